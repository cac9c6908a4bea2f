//! Region arithmetic, corner points, empirical-rate accounting and exact
//! small-instance verification of the distribution-approximation and
//! secrecy bounds.
//!
//! ## Regions
//!
//! [`region_bounds`] evaluates the right-hand sides of the confidential-only
//! joint-decoding region, of the two regions with private messages (one per
//! corner `k`), of the successive-decoding comparison bound and of Marton's
//! region (the `Z = ∅` specialization, written in its `min` form so that it
//! is an independent evaluation path). [`corner_point`] evaluates the four
//! entropy expressions of the corner `k` rate tuple.
//!
//! ## Empirical rates
//!
//! [`empirical_rates`] counts message cells of the compiled cell program
//! per receiver and divides by `nL`; the key ledger reports every shared key
//! in bits and as a rate.
//!
//! ## Exact verification
//!
//! At desk scale every random choice of the encoder (messages, keys, fresh
//! padding, randomized SC fills) is enumerated as a weighted path of a
//! [`BitSource`]. [`exact_tv`] compares the induced per-block law of
//! `(Ã, T̃1, T̃2)` with the product law, and [`exact_leakage`] computes
//! `I(S_(1) S_(2); Z^{1:L})` and `I(S_(1) S_(2); Z^{1:L}, side info)` exactly.
//! The bounds use `ℓ = 3` (three encoding layers). All logarithms are base 2.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chaining_codec::{ChainCodec, KeyId, KeyRing, MessageSet, MsgClass, Origin};
use crate::dms_model::InfoReport;
use crate::error::{Error, Result};
use crate::polar_core::{delta_n, BitSource};
use crate::set_builder::SchemeDesign;

/// Number of encoding layers used as `ℓ` in the distribution-approximation
/// bound.
pub const LAYER_COUNT: f64 = 3.0;

/// Tolerance of membership checks.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Rate tuples and corner points
// ---------------------------------------------------------------------------

/// `(R_S1, R_S2, R_W1, R_W2)` in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTuple {
    /// Confidential rates `[R_S1, R_S2]`.
    pub rs: [f64; 2],
    /// Private rates `[R_W1, R_W2]`.
    pub rw: [f64; 2],
    /// True when some component evaluated negative (reported, not clamped).
    pub negative: bool,
}

impl RateTuple {
    /// Build a tuple and set the negativity flag.
    pub fn new(rs: [f64; 2], rw: [f64; 2]) -> Self {
        let negative = rs.iter().chain(&rw).any(|&r| r < -MEMBERSHIP_TOLERANCE);
        RateTuple { rs, rw, negative }
    }

    /// Components in the order `(R_S1, R_S2, R_W1, R_W2)`.
    pub fn components(&self) -> [f64; 4] {
        [self.rs[0], self.rs[1], self.rw[0], self.rw[1]]
    }

    /// The same tuple with receiver labels exchanged.
    pub fn swapped(&self) -> Self {
        RateTuple { rs: [self.rs[1], self.rs[0]], rw: [self.rw[1], self.rw[0]], negative: self.negative }
    }
}

/// `max{I(V;Y1), I(V;Y2), I(V;Z)}`.
fn max_common(r: &InfoReport) -> f64 {
    r.i_v_y1.max(r.i_v_y2).max(r.i_v_z)
}

fn h_v_y(r: &InfoReport, k: u8) -> f64 {
    if k == 1 {
        r.h_v_y1
    } else {
        r.h_v_y2
    }
}

/// Corner point of the corner-`k` region, in the report's receiver frame.
///
/// The penalty of the other receiver's confidential rate is
/// `H(V|Y_k̄) − (H(V) − max{I(V;Y1), I(V;Y2), I(V;Z)})`, i.e. the
/// `min{H(V|Y), H(V|Z)}` term is taken over the better legitimate receiver,
/// which keeps the corner inside its region for every situation.
pub fn corner_point(report: &InfoReport, k: u8) -> Result<RateTuple> {
    if k != 1 && k != 2 {
        return Err(Error::InvalidConfig(format!("corner must be 1 or 2, got {k}")));
    }
    let (ki, kb) = ((k - 1) as usize, 3 - k);
    let rs_k = report.h_vuk_z[ki] - report.h_vuk_yk[ki];
    let rw_k = report.h_vuk[ki] - report.h_vuk_z[ki];
    let penalty = h_v_y(report, kb) - (report.h_v - max_common(report));
    let rs_kb = report.h_ukbar_vukz[ki] - report.h_ukbar_vykbar[ki] - penalty;
    let rw_kb = report.h_ukbar_vuk[ki] - report.h_ukbar_vukz[ki];
    let (mut rs, mut rw) = ([0.0; 2], [0.0; 2]);
    rs[ki] = rs_k;
    rw[ki] = rw_k;
    rs[(kb - 1) as usize] = rs_kb;
    rw[(kb - 1) as usize] = rw_kb;
    Ok(RateTuple::new(rs, rw))
}

// ---------------------------------------------------------------------------
// Region bounds
// ---------------------------------------------------------------------------

/// Right-hand sides of a two-receiver confidential-rate region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    /// Bound on `R_1`.
    pub r1: f64,
    /// Bound on `R_2`.
    pub r2: f64,
    /// Bound on `R_1 + R_2`.
    pub sum: f64,
}

/// Right-hand sides of the corner-`k` region with private messages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerRegion {
    pub k: u8,
    /// Bound on `R_S(k)`.
    pub rs_k: f64,
    /// Bound on `R_S(k̄)`.
    pub rs_kbar: f64,
    /// Bound on `R_S(k) + R_W(k)`.
    pub total_k: f64,
    /// Bound on `R_S(k̄) + R_W(k̄)`.
    pub total_kbar: f64,
}

impl CornerRegion {
    /// Whether a rate tuple (report frame) satisfies every inequality.
    pub fn contains(&self, t: &RateTuple) -> bool {
        let (ki, kb) = ((self.k - 1) as usize, (2 - self.k) as usize);
        let tol = MEMBERSHIP_TOLERANCE;
        t.rs[ki] <= self.rs_k + tol
            && t.rs[kb] <= self.rs_kbar + tol
            && t.rs[ki] + t.rw[ki] <= self.total_k + tol
            && t.rs[kb] + t.rw[kb] <= self.total_kbar + tol
    }
}

/// Every bound evaluated for one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    /// Joint-decoding confidential-only region.
    pub confidential: PairBounds,
    /// Successive-decoding bounds on `[R_S1, R_S2]`.
    pub successive: [f64; 2],
    /// `confidential.r_k − successive[k]` (strictly positive for the
    /// receiver with the larger `I(V;Y)` when the two differ).
    pub successive_gap: [f64; 2],
    /// Regions with private messages for corners 1 and 2.
    pub corners: [CornerRegion; 2],
    /// Marton's region (no eavesdropper), `min` form.
    pub marton: PairBounds,
    /// `I(U1;Y1|V) + I(U2;Y2|V) ≥ I(U1;U2|V)`.
    pub marton_feasible: bool,
}

/// Evaluate every region bound of a distribution.
pub fn region_bounds(r: &InfoReport) -> RegionBounds {
    let mx = max_common(r);
    let confidential = PairBounds {
        r1: r.i_vuk_yk[0] - r.i_vuk_z[0],
        r2: r.i_vuk_yk[1] - r.i_vuk_z[1],
        sum: r.i_vuk_yk[0] + r.i_vuk_yk[1] - r.i_u1u2_v - r.i_vu1u2_z - mx,
    };
    // Successive decoding: V must be decoded first by both receivers.
    let common = r.i_v_y1.min(r.i_v_y2);
    let successive = [
        common + r.i_uk_yk_v[0] - r.i_vuk_z[0],
        common + r.i_uk_yk_v[1] - r.i_vuk_z[1],
    ];
    let successive_gap = [confidential.r1 - successive[0], confidential.r2 - successive[1]];
    let corner = |k: u8| {
        let (ki, kbi) = ((k - 1) as usize, (2 - k) as usize);
        CornerRegion {
            k,
            rs_k: r.i_vuk_yk[ki] - r.i_vuk_z[ki],
            rs_kbar: r.i_vuk_yk[kbi] - r.i_u1u2_v - r.i_ukbar_z_vuk[ki] - mx,
            total_k: r.i_vuk_yk[ki],
            total_kbar: r.i_vuk_yk[kbi] - r.i_u1u2_v - mx + r.i_v_z,
        }
    };
    let marton = PairBounds {
        r1: r.i_v_y1 + r.i_uk_yk_v[0],
        r2: r.i_v_y2 + r.i_uk_yk_v[1],
        sum: common + r.i_uk_yk_v[0] + r.i_uk_yk_v[1] - r.i_u1u2_v,
    };
    RegionBounds {
        confidential,
        successive,
        successive_gap,
        corners: [corner(1), corner(2)],
        marton,
        marton_feasible: crate::dms_model::check_marton_feasibility(r),
    }
}

// ---------------------------------------------------------------------------
// Bound constants
// ---------------------------------------------------------------------------

/// The finite-`n` constants of the distribution-approximation and secrecy
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub beta: f64,
    pub blocks: usize,
    /// `δ_n = 2^(−n^β)`.
    pub delta_n: f64,
    /// Total-variation bound `δ*_n` with `ℓ = 3`.
    pub delta_star: f64,
    /// Per-block leakage bound `δ_n^(S) = 3nδ_n + 2δ*_n(3n − log δ*_n)`.
    pub delta_s: f64,
    /// Chain leakage bound `L·δ_n^(S)`.
    pub leakage_bound: f64,
}

/// `δ*_n` for layer count `ℓ`.
pub fn delta_star(n: usize, delta: f64, ell: f64) -> f64 {
    let n = n as f64;
    let root = (ell * n * delta * 2.0 * std::f64::consts::LN_2).sqrt();
    let inner = 2.0 * root * (ell * n - root.log2()) + delta;
    n * 3.0 * inner.sqrt() + 3f64.sqrt() * (n * delta * 2.0 * std::f64::consts::LN_2).sqrt()
}

/// `δ_n^(S)` from `δ_n` and `δ*_n`.
pub fn delta_s(n: usize, delta: f64, dstar: f64) -> f64 {
    let n = n as f64;
    3.0 * n * delta + 2.0 * dstar * (3.0 * n - dstar.log2())
}

/// Evaluate every bound constant.
pub fn bound_report(n: usize, beta: f64, blocks: usize) -> BoundReport {
    let d = delta_n(n, beta);
    let ds = delta_star(n, d, LAYER_COUNT);
    let s = delta_s(n, d, ds);
    BoundReport { n, beta, blocks, delta_n: d, delta_star: ds, delta_s: s, leakage_bound: blocks as f64 * s }
}

// ---------------------------------------------------------------------------
// Empirical rates
// ---------------------------------------------------------------------------

/// Shared-key and randomness accounting of a compiled design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    /// Key bits per key (e.g. `"ThetaV"`, `"SideV(1)"`).
    pub key_bits: Vec<(String, usize)>,
    /// Total shared key bits.
    pub total_key_bits: usize,
    /// `total_key_bits / (nL)`.
    pub key_rate: f64,
    /// Chaining keys of the inner layer, in bits.
    pub inner_chaining_key_bits: usize,
    /// Keys protecting the per-block side information, in bits.
    pub side_key_bits: usize,
    /// Fresh uniform padding cells.
    pub padding_bits: usize,
    /// Cells filled from the SC conditional law (deterministic or random).
    pub sc_fill_cells: usize,
    /// Frozen cells (relax mode).
    pub frozen_bits: usize,
    /// Plaintext side-information bits per receiver `[Rx1, Rx2]`.
    pub side_info_bits: [usize; 2],
}

/// Empirical rates with the overhead ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRates {
    pub n: usize,
    pub blocks: usize,
    /// Rates in the caller's receiver frame.
    pub rates: RateTuple,
    /// Message bits per class in the caller's frame, e.g. `"S1_inner"`.
    pub message_bits: Vec<(String, usize)>,
    pub overhead: OverheadLedger,
}

/// Name of a class in the caller's frame.
fn class_name(class: MsgClass, d: &SchemeDesign) -> String {
    let k = d.corner;
    match class {
        MsgClass::InnerS => format!("S{}_inner", d.external_receiver(k)),
        MsgClass::InnerW => format!("W{}_inner", d.external_receiver(k)),
        MsgClass::OuterS(r) => format!("S{}_outer", d.external_receiver(r)),
        MsgClass::OuterW(r) => format!("W{}_outer", d.external_receiver(r)),
    }
}

/// Name of a key in the caller's frame.
fn key_name(id: KeyId, d: &SchemeDesign) -> String {
    match id {
        KeyId::SideV(r) => format!("SideV({})", d.external_receiver(r)),
        KeyId::SideU(r) => format!("SideU({})", d.external_receiver(r)),
        other => format!("{other:?}"),
    }
}

/// Empirical rates `(1/nL)·Σ|segments|` of a design, per message class, in
/// the caller's receiver frame.
pub fn empirical_rates(d: &SchemeDesign) -> Result<EmpiricalRates> {
    let codec = ChainCodec::new(d)?;
    empirical_rates_of(d, &codec)
}

/// [`empirical_rates`] for an already compiled codec of `d`.
pub fn empirical_rates_of(d: &SchemeDesign, codec: &ChainCodec) -> Result<EmpiricalRates> {
    let (n, blocks) = (codec.n, codec.blocks);
    let nl = (n * blocks) as f64;
    let (mut rs, mut rw) = ([0.0; 2], [0.0; 2]);
    let mut message_bits = Vec::new();
    for (class, lens) in codec.message_lengths() {
        let bits: usize = lens.iter().sum();
        let r = (d.external_receiver(class.receiver(codec.corner)) - 1) as usize;
        if class.confidential() {
            rs[r] += bits as f64 / nl;
        } else {
            rw[r] += bits as f64 / nl;
        }
        message_bits.push((class_name(class, d), bits));
    }
    let key_bits: Vec<(String, usize)> = codec.key_lengths.iter().map(|(&id, &l)| (key_name(id, d), l)).collect();
    let total_key_bits = codec.total_key_bits();
    let sum_keys = |pred: fn(KeyId) -> bool| codec.key_lengths.iter().filter(|(&id, _)| pred(id)).map(|(_, &l)| l).sum();
    let mut side_info_bits = [0; 2];
    for r in [1u8, 2] {
        side_info_bits[(d.external_receiver(r) - 1) as usize] = codec.receiver(r).side_cells.len();
    }
    let overhead = OverheadLedger {
        key_bits,
        total_key_bits,
        key_rate: total_key_bits as f64 / nl,
        inner_chaining_key_bits: sum_keys(KeyId::is_inner_chaining),
        side_key_bits: sum_keys(|id| matches!(id, KeyId::SideV(_) | KeyId::SideU(_))),
        padding_bits: codec.count(|o| *o == Origin::Padding),
        sc_fill_cells: codec.count(|o| *o == Origin::Fill),
        frozen_bits: codec.count(|o| *o == Origin::Frozen),
        side_info_bits,
    };
    Ok(EmpiricalRates { n, blocks, rates: RateTuple::new(rs, rw), message_bits, overhead })
}

// ---------------------------------------------------------------------------
// Exhaustive path enumeration
// ---------------------------------------------------------------------------

/// A [`BitSource`] that walks every random path of a computation in
/// depth-first order. Each run replays a recorded prefix of choices and
/// extends it with zeros; [`PathEnumerator::advance`] moves to the next path.
/// Biased bits with probability 0 or 1 are deterministic and not branched.
#[derive(Debug, Default)]
pub struct PathEnumerator {
    /// `(chosen bit, probability of one)` per branching draw.
    script: Vec<(u8, f64)>,
    /// Next draw position within the current run.
    pos: usize,
}

impl PathEnumerator {
    /// Fresh enumerator positioned at the all-zero path.
    pub fn new() -> Self {
        Self::default()
    }

    /// Probability of the path just run.
    pub fn weight(&self) -> f64 {
        self.script[..self.pos]
            .iter()
            .map(|&(b, p)| if b == 1 { p } else { 1.0 - p })
            .product()
    }

    /// Move to the next path; false when every path has been visited.
    pub fn advance(&mut self) -> bool {
        self.script.truncate(self.pos);
        self.pos = 0;
        while let Some(&(b, _)) = self.script.last() {
            if b == 0 {
                self.script.last_mut().expect("nonempty").0 = 1;
                return true;
            }
            self.script.pop();
        }
        false
    }

    fn draw(&mut self, p_one: f64) -> u8 {
        if p_one <= 0.0 {
            return 0;
        }
        if p_one >= 1.0 {
            return 1;
        }
        if self.pos == self.script.len() {
            self.script.push((0, p_one));
        }
        let b = self.script[self.pos].0;
        self.pos += 1;
        b
    }
}

impl BitSource for PathEnumerator {
    fn uniform_bit(&mut self) -> u8 {
        self.draw(0.5)
    }

    fn biased_bit(&mut self, p_one: f64) -> u8 {
        self.draw(p_one)
    }
}

/// Run the whole encoder (messages, keys, transmission) on every random
/// path, calling `visit(weight, messages, transmission)`. Fails with
/// [`Error::StateSpaceTooLarge`] once more than `cap` paths are needed.
fn enumerate_chain(
    codec: &ChainCodec,
    keys_enabled: bool,
    cap: f64,
    mut visit: impl FnMut(f64, &MessageSet, &crate::chaining_codec::ChainTransmission),
) -> Result<usize> {
    let mut src = PathEnumerator::new();
    let mut paths = 0usize;
    loop {
        let msgs = MessageSet::random(codec, &mut src);
        let keys = KeyRing::generate(codec, keys_enabled, &mut src);
        let t = codec.encode_chain(&msgs, &keys, &mut src)?;
        paths += 1;
        if paths as f64 > cap {
            return Err(Error::StateSpaceTooLarge { size: paths as f64, cap });
        }
        visit(src.weight(), &msgs, &t);
        if !src.advance() {
            return Ok(paths);
        }
    }
}

// ---------------------------------------------------------------------------
// Exact total variation
// ---------------------------------------------------------------------------

/// Result of [`exact_tv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    /// `V(q̃_{A_i T1_i T2_i}, p_{A T1 T2})` for every block `i`.
    pub per_block: Vec<f64>,
    /// Largest per-block distance.
    pub tv: f64,
    /// Number of enumerated encoder paths.
    pub paths: usize,
    pub bounds: BoundReport,
    /// `tv ≤ δ*_n`.
    pub within_bound: bool,
}

/// Exact total-variation distance between the encoder-induced law of every
/// block and the product law of the source, by enumeration of all encoder
/// paths. The polar transform is a bijection, so the distance is computed on
/// `(V^n, U1^n, U2^n)`.
pub fn exact_tv(d: &SchemeDesign, cap: f64) -> Result<TvReport> {
    let codec = ChainCodec::new(d)?;
    let (n, blocks) = (codec.n, codec.blocks);
    if (8.0f64).powi(n as i32) > cap {
        return Err(Error::StateSpaceTooLarge { size: 8f64.powi(n as i32), cap });
    }
    let mut q: Vec<HashMap<usize, f64>> = vec![HashMap::new(); blocks];
    let paths = enumerate_chain(&codec, true, cap, |w, _, t| {
        for (b, qb) in q.iter_mut().enumerate() {
            let idx = (0..n).fold(0usize, |acc, j| {
                (acc << 3) | (4 * t.v[b][j] + 2 * t.u1[b][j] + t.u2[b][j]) as usize
            });
            *qb.entry(idx).or_default() += w;
        }
    })?;
    let p_atom = d.model.p_vu1u2();
    let p_of = |mut idx: usize| {
        let mut p = 1.0;
        for _ in 0..n {
            p *= p_atom[idx & 7];
            idx >>= 3;
        }
        p
    };
    let per_block: Vec<f64> = q
        .iter()
        .map(|qb| {
            let mut hit_p = 0.0;
            let mut dist = 0.0;
            for (&idx, &qv) in qb {
                let pv = p_of(idx);
                hit_p += pv;
                dist += (qv - pv).abs();
            }
            0.5 * (dist + (1.0 - hit_p).max(0.0))
        })
        .collect();
    let tv = per_block.iter().copied().fold(0.0, f64::max);
    let bounds = bound_report(n, d.config.beta, blocks);
    Ok(TvReport { per_block, tv, paths, bounds, within_bound: tv <= bounds.delta_star })
}

// ---------------------------------------------------------------------------
// Exact leakage
// ---------------------------------------------------------------------------

/// Result of [`exact_leakage`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    /// `I(S; Z^{1:L})` in bits.
    pub leakage: f64,
    /// `I(S; Z^{1:L}, encrypted side information)` in bits.
    pub leakage_with_side_info: f64,
    /// Confidential bits in `S`.
    pub confidential_bits: usize,
    /// Number of enumerated encoder paths.
    pub paths: usize,
    pub bounds: BoundReport,
    /// `leakage ≤ L·δ_n^(S)`.
    pub within_bound: bool,
}

/// Exact information leakage to the eavesdropper by marginalization over
/// every encoder path and every eavesdropper observation.
///
/// `S` collects the confidential classes (all of them when `classes` is
/// `None`); classes left out behave as uniform padding.
pub fn exact_leakage(d: &SchemeDesign, keys_enabled: bool, classes: Option<&[MsgClass]>, cap: f64) -> Result<LeakageReport> {
    let codec = ChainCodec::new(d)?;
    let (n, blocks) = (codec.n, codec.blocks);
    let secret: Vec<MsgClass> = codec
        .message_lengths()
        .keys()
        .copied()
        .filter(|c| c.confidential() && classes.is_none_or(|cs| cs.contains(c)))
        .collect();
    let z_alph = d.model.output_alphabets()[2];
    let z_outcomes = (z_alph as f64).powi((n * blocks) as i32);
    if z_outcomes > cap {
        return Err(Error::StateSpaceTooLarge { size: z_outcomes, cap });
    }
    // Aggregate paths on (s, x, side ciphers).
    type PathKey = (Vec<u8>, Vec<u8>, Vec<u8>);
    let mut agg: HashMap<PathKey, f64> = HashMap::new();
    let paths = enumerate_chain(&codec, keys_enabled, cap, |w, msgs, t| {
        let s: Vec<u8> = secret.iter().flat_map(|c| msgs.bits[c].iter().flatten().copied()).collect();
        let x: Vec<u8> = t.x.iter().flatten().copied().collect();
        let side: Vec<u8> = t.side_cipher.iter().flatten().copied().collect();
        *agg.entry((s, x, side)).or_default() += w;
    })?;
    let confidential_bits = agg.keys().next().map_or(0, |k| k.0.len());
    let bounds = bound_report(n, d.config.beta, blocks);
    if confidential_bits == 0 {
        return Ok(LeakageReport {
            leakage: 0.0,
            leakage_with_side_info: 0.0,
            confidential_bits,
            paths,
            bounds,
            within_bound: true,
        });
    }
    if agg.len() as f64 * z_outcomes > cap {
        return Err(Error::StateSpaceTooLarge { size: agg.len() as f64 * z_outcomes, cap });
    }
    // p(z|x) per symbol, marginalized over (y1, y2).
    let z_given_x: Vec<Vec<f64>> = (0..2)
        .map(|x| {
            let mut row = vec![0.0; z_alph];
            for (o, &p) in d.model.channel_row(x).iter().enumerate() {
                row[d.model.split_output(o).2] += p;
            }
            row
        })
        .collect();
    let mut joint_z: HashMap<(Vec<u8>, Vec<u8>), f64> = HashMap::new();
    let mut joint_zs: HashMap<(Vec<u8>, Vec<u8>), f64> = HashMap::new();
    let mut z = vec![0u8; n * blocks];
    let mut entries: Vec<_> = agg.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    for ((s, x, side), w) in entries {
        z.iter_mut().for_each(|v| *v = 0);
        loop {
            let pz: f64 = z.iter().zip(&x).map(|(&zi, &xi)| z_given_x[xi as usize][zi as usize]).product();
            if pz > 0.0 {
                *joint_z.entry((s.clone(), z.clone())).or_default() += w * pz;
                let mut view = z.clone();
                view.extend(&side);
                *joint_zs.entry((s.clone(), view)).or_default() += w * pz;
            }
            // Odometer over Z^{nL}.
            let mut i = 0;
            while i < z.len() {
                z[i] += 1;
                if (z[i] as usize) < z_alph {
                    break;
                }
                z[i] = 0;
                i += 1;
            }
            if i == z.len() {
                break;
            }
        }
    }
    let leakage = mutual_information(&joint_z);
    let leakage_with_side_info = mutual_information(&joint_zs);
    Ok(LeakageReport {
        leakage,
        leakage_with_side_info,
        confidential_bits,
        paths,
        bounds,
        within_bound: leakage <= bounds.leakage_bound,
    })
}

/// `I(A;B)` in bits of a joint law given as a map `(a, b) → p`.
pub fn mutual_information<A, B>(joint: &HashMap<(A, B), f64>) -> f64
where
    A: std::hash::Hash + Eq + Clone,
    B: std::hash::Hash + Eq + Clone,
{
    let mut pa: HashMap<A, f64> = HashMap::new();
    let mut pb: HashMap<B, f64> = HashMap::new();
    for ((a, b), &p) in joint {
        *pa.entry(a.clone()).or_default() += p;
        *pb.entry(b.clone()).or_default() += p;
    }
    joint
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|((a, b), &p)| p * (p / (pa[a] * pb[b])).log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dms_model::{bec_matrix, constant_matrix, identity_matrix, information_quantities, JointModel};
    use crate::polar_core::CodeConfig;
    use crate::set_builder::design;
    use approx::assert_abs_diff_eq;

    /// `V = X` uniform, `U`s constant, the given channels.
    fn v_only(y1: [Vec<f64>; 2], y2: [Vec<f64>; 2], z: [Vec<f64>; 2]) -> JointModel {
        let mut p = [0.0; 8];
        p[0] = 0.5;
        p[4] = 0.5;
        let f = [0, 0, 0, 0, 1, 1, 1, 1];
        JointModel::from_components(p, f, &y1, &y2, &z).unwrap()
    }

    #[test]
    fn corner_point_examples() {
        // V = X = Y1 uniform, Z independent of everything.
        let m = v_only(identity_matrix(), bec_matrix(0.5), constant_matrix());
        let c = corner_point(&information_quantities(&m), 1).unwrap();
        assert_abs_diff_eq!(c.rs[0], 1.0, epsilon = 1e-12);
        // Z = Y1 symbol for symbol.
        let m = v_only(identity_matrix(), bec_matrix(0.5), identity_matrix());
        let c = corner_point(&information_quantities(&m), 1).unwrap();
        assert_abs_diff_eq!(c.rs[0], 0.0, epsilon = 1e-12);
        // Everything independent.
        let m = v_only(constant_matrix(), constant_matrix(), constant_matrix());
        for k in [1, 2] {
            let c = corner_point(&information_quantities(&m), k).unwrap();
            for r in c.components() {
                assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
            }
        }
        assert!(corner_point(&information_quantities(&m), 3).is_err());
    }

    #[test]
    fn delta_constants_by_hand() {
        // Hand evaluation at n = 2, β = 0.25.
        let n = 2.0f64;
        let d = 2f64.powf(-(2f64.powf(0.25)));
        let a = (3.0 * n * d * 2.0 * 2f64.ln()).sqrt();
        let ds = n * 3.0 * (2.0 * a * (3.0 * n - a.log2()) + d).sqrt() + 3f64.sqrt() * (n * d * 2.0 * 2f64.ln()).sqrt();
        let b = bound_report(2, 0.25, 2);
        assert_abs_diff_eq!(b.delta_n, d, epsilon = 1e-15);
        assert_abs_diff_eq!(b.delta_star, ds, epsilon = 1e-12);
        assert_abs_diff_eq!(b.delta_s, 3.0 * n * d + 2.0 * ds * (3.0 * n - ds.log2()), epsilon = 1e-12);
        assert_abs_diff_eq!(b.leakage_bound, 2.0 * b.delta_s, epsilon = 1e-12);
    }

    #[test]
    fn path_enumerator_weights_sum_to_one() {
        let mut src = PathEnumerator::new();
        let (mut total, mut count) = (0.0, 0);
        loop {
            let a = src.uniform_bit();
            let b = src.biased_bit(if a == 1 { 0.3 } else { 1.0 });
            if b == 1 {
                src.biased_bit(0.9);
            }
            total += src.weight();
            count += 1;
            if !src.advance() {
                break;
            }
        }
        // a=0 → b=1 → two paths; a=1 → b∈{0,1}, b=1 → two paths.
        assert_eq!(count, 5);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_design_has_zero_tv() {
        // V, U1, U2 uniform and independent, every area uniform message.
        let p = [0.125; 8];
        let f = [0, 1, 0, 1, 1, 0, 1, 0];
        let m = JointModel::from_components(p, f, &identity_matrix(), &identity_matrix(), &bec_matrix(0.9)).unwrap();
        let d = design(&m, &CodeConfig::exact(2, 0.2, 2), 1, false).unwrap();
        let tv = exact_tv(&d, 1e7).unwrap();
        assert_abs_diff_eq!(tv.tv, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn leakage_examples() {
        // Z = X: the eavesdropper sees everything, no confidential area.
        let m = v_only(identity_matrix(), identity_matrix(), identity_matrix());
        let d = design(&m, &CodeConfig::exact(2, 0.2, 2), 1, false).unwrap();
        let lk = exact_leakage(&d, true, None, 1e7).unwrap();
        assert_eq!(lk.confidential_bits, 0);
        assert_eq!(lk.leakage, 0.0);
        // Z constant.
        let m = v_only(identity_matrix(), bec_matrix(0.2), constant_matrix());
        let d = design(&m, &CodeConfig::exact(2, 0.2, 2), 1, false).unwrap();
        let lk = exact_leakage(&d, true, None, 1e7).unwrap();
        assert!(lk.confidential_bits > 0);
        assert_abs_diff_eq!(lk.leakage, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lk.leakage_with_side_info, 0.0, epsilon = 1e-12);
        // Noiseless legitimate channels, Z = BEC(0.9): every symbol is a
        // confidential bit seen with probability 0.1.
        let m = v_only(identity_matrix(), identity_matrix(), bec_matrix(0.9));
        let d = design(&m, &CodeConfig::exact(2, 0.2, 2), 1, false).unwrap();
        let lk = exact_leakage(&d, true, None, 1e7).unwrap();
        assert_eq!(lk.confidential_bits, 4);
        assert_abs_diff_eq!(lk.leakage, 0.4, epsilon = 1e-12);
        assert!(matches!(exact_leakage(&d, true, None, 10.0), Err(Error::StateSpaceTooLarge { .. })));
    }

    /// Dropping a confidential class from `S` (it then acts as uniform
    /// padding) never increases the leakage.
    #[test]
    fn leakage_monotone_under_removal() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for trial in 0..12 {
            let m = JointModel::random_multiplexer(&mut rng);
            let cfg = CodeConfig::exact(2, 0.2, 2);
            let Ok(d) = design(&m, &cfg, 1 + (trial % 2) as u8, true) else { continue };
            let full = exact_leakage(&d, true, None, 1e7).unwrap();
            let classes: Vec<MsgClass> = ChainCodec::new(&d)
                .unwrap()
                .message_lengths()
                .keys()
                .copied()
                .filter(|c| c.confidential())
                .collect();
            for c in &classes {
                let rest: Vec<MsgClass> = classes.iter().copied().filter(|x| x != c).collect();
                let part = exact_leakage(&d, true, Some(&rest), 1e7).unwrap();
                assert!(part.leakage <= full.leakage + 1e-12, "trial {trial}");
                assert!(part.leakage_with_side_info <= full.leakage_with_side_info + 1e-12);
                checked += 1;
            }
            let tv = exact_tv(&d, 1e7).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&tv.tv));
        }
        assert!(checked > 0);
    }

    #[test]
    fn marton_reduction_and_successive_gap() {
        // Z independent of everything: the confidential region is Marton's.
        let m = JointModel::multiplexer(0.4, [0.3, 0.6], [0.2, 0.7], &bec_matrix(0.3), &crate::dms_model::bsc_matrix(0.1), &constant_matrix()).unwrap();
        let b = region_bounds(&information_quantities(&m));
        assert_abs_diff_eq!(b.confidential.r1, b.marton.r1, epsilon = 1e-12);
        assert_abs_diff_eq!(b.confidential.r2, b.marton.r2, epsilon = 1e-12);
        assert_abs_diff_eq!(b.confidential.sum, b.marton.sum, epsilon = 1e-12);
        // I(V;Y1) < I(V;Y2): strict gap for receiver 2 only.
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let r = information_quantities(&m);
        assert!(r.i_v_y1 < r.i_v_y2);
        let b = region_bounds(&r);
        assert_abs_diff_eq!(b.successive_gap[1], r.i_v_y2 - r.i_v_y1, epsilon = 1e-12);
        assert!(b.successive_gap[1] > 0.0);
        assert_abs_diff_eq!(b.successive_gap[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empirical_rates_match_set_sizes() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        for blocks in [1, 2, 4] {
            let d = design(&m, &CodeConfig::exact(64, 0.2, blocks), 1, false).unwrap();
            let e = empirical_rates(&d).unwrap();
            let p = &d.plan;
            let s_inner: usize = (1..=blocks).map(|i| p.message_area(i, blocks).len()).sum();
            let w_inner = blocks * p.partition.c.minus(&p.frozen).len();
            let nl = (64 * blocks) as f64;
            let get = |name: &str| e.message_bits.iter().find(|(n, _)| n == name).map_or(0, |x| x.1);
            assert_eq!(get("S1_inner"), s_inner);
            assert_eq!(get("W1_inner"), w_inner);
            // U is constant: the whole rate sits in the inner layer.
            assert_abs_diff_eq!(e.rates.rs[0], s_inner as f64 / nl, epsilon = 1e-15);
            assert_abs_diff_eq!(e.rates.rw[0], w_inner as f64 / nl, epsilon = 1e-15);
            assert_eq!(e.overhead.total_key_bits, e.overhead.key_bits.iter().map(|k| k.1).sum::<usize>());
        }
        // No C and no J sets: zero private rates.
        let m = v_only(identity_matrix(), identity_matrix(), constant_matrix());
        let d = design(&m, &CodeConfig::exact(8, 0.2, 2), 1, false).unwrap();
        let e = empirical_rates(&d).unwrap();
        assert_eq!(e.rates.rw, [0.0, 0.0]);
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(200))]

        /// Corner points lie in their region; bounds are symmetric under a
        /// receiver swap.
        #[test]
        fn corner_in_region_and_swap_symmetry(seed in proptest::prelude::any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = JointModel::random_multiplexer(&mut rng);
            let r = information_quantities(&m);
            let b = region_bounds(&r);
            for k in [1u8, 2] {
                let c = corner_point(&r, k).unwrap();
                proptest::prop_assert!(b.corners[(k - 1) as usize].contains(&c));
            }
            let bs = region_bounds(&information_quantities(&m.swapped()));
            proptest::prop_assert!((b.confidential.r1 - bs.confidential.r2).abs() < 1e-12);
            proptest::prop_assert!((b.confidential.sum - bs.confidential.sum).abs() < 1e-12);
            proptest::prop_assert!((b.marton.sum - bs.marton.sum).abs() < 1e-12);
            for k in [1u8, 2] {
                let c = corner_point(&r, k).unwrap();
                let cs = corner_point(&information_quantities(&m.swapped()), 3 - k).unwrap().swapped();
                for (x, y) in c.components().iter().zip(cs.components()) {
                    proptest::prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
