//! Polar transform, successive-cancellation (SC) primitives and per-index
//! conditional-entropy profiles.
//!
//! ## Conventions
//!
//! * Kernel: `u = x · F^{⊗m}` over GF(2) with `F = [[1,0],[1,1]]`, which is an
//!   involution (`F^{⊗m} F^{⊗m} = I`). Indices are in natural order; there is
//!   no bit-reversal permutation anywhere.
//! * An SC "layer" is a binary symbol `sym ∈ {V, U1, U2}` observed together
//!   with side variables (e.g. `U2 | V, U1, Z`). Each position `t` of a block
//!   contributes a weight pair `w[t] = [p(sym=0, side_t), p(sym=1, side_t)]`.
//! * The SC recursion walks the butterfly in natural order: the first half of
//!   the polar indices comes from the "minus" combination
//!   `x[j] ⊕ x[j+n/2]`, the second half from the "plus" combination.
//!
//! ## Profiles
//!
//! [`exact_profile`] computes `H(A(j) | A^{1:j-1}, side^n)` exactly by density
//! evolution on the distribution of the posterior `P(sym = 1 | side)`. Equal
//! posteriors are merged, which keeps the support tiny for erasure-type
//! layers and bounded for small alphabets. [`mc_profiles`] estimates the same
//! quantities by sampling the joint and running SC with the true prefix.
//! [`bec_profile`] is the closed-form erasure recursion used as an oracle.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dms_model::{h2, JointModel, PairTable, Var};
use crate::error::{Error, Result};

/// Default state-space cap for exact computations.
pub const DEFAULT_EXACT_CAP: f64 = (1u64 << 24) as f64;
/// Default Monte-Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Largest acceptable 95% confidence-interval width of MC profiles.
pub const MAX_CI_WIDTH: f64 = 0.05;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How entropy profiles are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMethod {
    /// Exact density evolution on posterior distributions.
    Exact,
    /// Monte-Carlo estimate with a shared pool of joint samples.
    #[serde(alias = "monte-carlo", alias = "montecarlo")]
    Mc,
}

impl fmt::Display for ProfileMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileMethod::Exact => "exact",
            ProfileMethod::Mc => "mc",
        })
    }
}

/// Code parameters shared by every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConfig {
    /// Block length (power of two).
    pub n: usize,
    /// Exponent of `δ_n = 2^(−n^β)`, in `(0, 1/2)`.
    pub beta: f64,
    /// Number of chained blocks `L ≥ 1`.
    pub blocks: usize,
    /// Profile method.
    pub method: ProfileMethod,
    /// Monte-Carlo sample count.
    pub samples: usize,
    /// Seed for every random stream.
    pub seed: u64,
    /// State-space cap of exact computations.
    pub exact_cap: f64,
}

impl CodeConfig {
    /// Exact-profile configuration with default cap and seed 0.
    pub fn exact(n: usize, beta: f64, blocks: usize) -> Self {
        CodeConfig {
            n,
            beta,
            blocks,
            method: ProfileMethod::Exact,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }

    /// Check the configuration invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::LengthNotPowerOfTwo(self.n));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::InvalidConfig(format!("beta={} must lie in (0, 1/2)", self.beta)));
        }
        if self.blocks == 0 {
            return Err(Error::InvalidConfig("number of blocks must be at least 1".into()));
        }
        if self.method == ProfileMethod::Mc && self.samples == 0 {
            return Err(Error::InvalidConfig("Monte-Carlo sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// `δ_n = 2^(−n^β)`.
    pub fn delta(&self) -> f64 {
        delta_n(self.n, self.beta)
    }
}

/// `δ_n = 2^(−n^β)`.
pub fn delta_n(n: usize, beta: f64) -> f64 {
    (-(n as f64).powf(beta)).exp2()
}

// ---------------------------------------------------------------------------
// Polar transform
// ---------------------------------------------------------------------------

/// Multiply a bit sequence by the polar kernel `F^{⊗m}` (an involution).
pub fn polar_transform(bits: &[u8]) -> Result<Vec<u8>> {
    if bits.is_empty() || !bits.len().is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(bits.len()));
    }
    let mut out = bits.to_vec();
    polar_transform_in_place(&mut out);
    Ok(out)
}

/// In-place butterfly; `bits.len()` must be a power of two.
pub fn polar_transform_in_place(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut h = n / 2;
    while h >= 1 {
        for base in (0..n).step_by(2 * h) {
            for j in base..base + h {
                bits[j] ^= bits[j + h];
            }
        }
        h /= 2;
    }
}

// ---------------------------------------------------------------------------
// Layers and weights
// ---------------------------------------------------------------------------

/// A polarized symbol together with its conditioning variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sym: Var,
    pub side: Vec<Var>,
}

impl LayerSpec {
    /// Layer `sym | side`.
    pub fn new(sym: Var, side: &[Var]) -> Self {
        LayerSpec { sym, side: side.to_vec() }
    }

    /// Parse `"U2|V,U1,Z"` (or `"V|"` / `"V"` for no side information).
    pub fn parse(s: &str) -> Result<Self> {
        let (sym, side) = s.split_once('|').unwrap_or((s, ""));
        let side = side
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(Var::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerSpec { sym: Var::parse(sym)?, side })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side: Vec<&str> = self.side.iter().map(|v| v.name()).collect();
        write!(f, "{}|{}", self.sym.name(), side.join(","))
    }
}

/// Per-position SC weights `p(sym = b, side_t)` for observed side values.
///
/// `side_values[t]` lists the values of `layer.side` at position `t`.
pub fn symbol_weights(table: &PairTable, side_values: &[Vec<usize>]) -> Vec<[f64; 2]> {
    side_values.iter().map(|s| table.rows[table.index(s)]).collect()
}

// ---------------------------------------------------------------------------
// Bit sources
// ---------------------------------------------------------------------------

/// Source of the encoder's randomness.
///
/// Implemented by every [`RngCore`] and by the exhaustive enumerator used for
/// exact small-instance verification.
pub trait BitSource {
    /// A uniform bit.
    fn uniform_bit(&mut self) -> u8;
    /// A bit equal to one with probability `p_one`.
    fn biased_bit(&mut self, p_one: f64) -> u8;
}

impl<R: RngCore> BitSource for R {
    fn uniform_bit(&mut self) -> u8 {
        (self.next_u32() & 1) as u8
    }

    fn biased_bit(&mut self, p_one: f64) -> u8 {
        if p_one <= 0.0 {
            0
        } else if p_one >= 1.0 {
            1
        } else {
            (self.gen::<f64>() < p_one) as u8
        }
    }
}

// ---------------------------------------------------------------------------
// SC recursion
// ---------------------------------------------------------------------------

/// Zero-evidence handling of the SC recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evidence {
    /// Raise [`Error::ZeroEvidence`].
    Strict,
    /// Replace the offending pair by `(½, ½)` and flag it.
    Lenient,
}

fn normalize(p: [f64; 2], index: usize, mode: Evidence, first_zero: &mut Option<usize>) -> Result<[f64; 2]> {
    let s = p[0] + p[1];
    if s > 0.0 && s.is_finite() {
        Ok([p[0] / s, p[1] / s])
    } else {
        match mode {
            Evidence::Strict => Err(Error::ZeroEvidence { index }),
            Evidence::Lenient => {
                if first_zero.is_none_or(|f| index < f) {
                    *first_zero = Some(index);
                }
                Ok([0.5, 0.5])
            }
        }
    }
}

/// Run the SC recursion over weights `w`; `decide(j, p)` returns the bit at
/// polar index `j` given the conditional pair `p`.
///
/// Returns the symbol-domain sequence implied by the decisions and, in
/// lenient mode, the smallest polar index whose conditional was affected by
/// zero evidence.
pub fn sc_run<F>(w: &[[f64; 2]], mode: Evidence, decide: &mut F) -> Result<(Vec<u8>, Option<usize>)>
where
    F: FnMut(usize, [f64; 2]) -> Result<u8>,
{
    if w.is_empty() || !w.len().is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(w.len()));
    }
    let mut first_zero = None;
    let x = sc_rec(w, 0, mode, decide, &mut first_zero)?;
    Ok((x, first_zero))
}

fn sc_rec<F>(w: &[[f64; 2]], offset: usize, mode: Evidence, decide: &mut F, first_zero: &mut Option<usize>) -> Result<Vec<u8>>
where
    F: FnMut(usize, [f64; 2]) -> Result<u8>,
{
    let n = w.len();
    if n == 1 {
        let p = normalize(w[0], offset, mode, first_zero)?;
        return Ok(vec![decide(offset, p)?]);
    }
    let h = n / 2;
    let mut wm = Vec::with_capacity(h);
    for j in 0..h {
        let (a, b) = (w[j], w[j + h]);
        wm.push(normalize([a[0] * b[0] + a[1] * b[1], a[0] * b[1] + a[1] * b[0]], offset, mode, first_zero)?);
    }
    let s = sc_rec(&wm, offset, mode, decide, first_zero)?;
    let mut wp = Vec::with_capacity(h);
    for j in 0..h {
        let (a, b) = (w[j], w[j + h]);
        let sj = s[j] as usize;
        wp.push(normalize([a[sj] * b[0], a[sj ^ 1] * b[1]], offset + h, mode, first_zero)?);
    }
    let xb = sc_rec(&wp, offset + h, mode, decide, first_zero)?;
    let mut out = Vec::with_capacity(n);
    out.extend(s.iter().zip(&xb).map(|(a, b)| a ^ b));
    out.extend_from_slice(&xb);
    Ok(out)
}

/// `P(A(j) = · | A^{1:j-1} = prefix, side)` for polar index `j` (0-based).
pub fn sc_conditional(j: usize, prefix: &[u8], w: &[[f64; 2]]) -> Result<[f64; 2]> {
    if j >= w.len() || prefix.len() < j {
        return Err(Error::InvalidConfig(format!("index {j} / prefix length {} out of range", prefix.len())));
    }
    let mut result = None;
    let mut decide = |i: usize, p: [f64; 2]| -> Result<u8> {
        if i == j {
            result = Some(p);
        }
        Ok(if i < j { prefix[i] } else { 0 })
    };
    // Zero evidence beyond index j is irrelevant to the requested conditional.
    let (_, first_zero) = sc_run(w, Evidence::Lenient, &mut decide)?;
    if let Some(i) = first_zero.filter(|&i| i <= j) {
        return Err(Error::ZeroEvidence { index: i });
    }
    Ok(result.expect("every index is visited"))
}

/// Per-index behaviour of [`sc_fill`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FillMode {
    /// Value supplied by the caller.
    Hold,
    /// Argmax of the SC conditional (ties → 0).
    Deterministic,
    /// Drawn from the SC conditional.
    Random,
}

/// SC encoding: visit indices in order, copying held values, taking the
/// argmax on deterministic indices and sampling on random ones.
///
/// Returns the polar-domain sequence.
pub fn sc_fill(
    known: &[Option<u8>],
    modes: &[FillMode],
    w: &[[f64; 2]],
    src: &mut dyn BitSource,
) -> Result<Vec<u8>> {
    let n = w.len();
    if known.len() != n || modes.len() != n {
        return Err(Error::PlanMismatch("sc_fill: length mismatch".into()));
    }
    let mut u = vec![0u8; n];
    let mut decide = |j: usize, p: [f64; 2]| -> Result<u8> {
        let b = match modes[j] {
            FillMode::Hold => known[j].ok_or_else(|| Error::PlanMismatch(format!("sc_fill: index {j} held without value")))?,
            FillMode::Deterministic => (p[1] > p[0]) as u8,
            FillMode::Random => src.biased_bit(p[1]),
        };
        u[j] = b;
        Ok(b)
    };
    sc_run(w, Evidence::Strict, &mut decide)?;
    Ok(u)
}

/// SC decoding: known positions are held, the others are decided by argmax.
///
/// Returns the polar-domain estimate and whether zero evidence was met
/// (only possible in [`Evidence::Lenient`] mode).
pub fn sc_decode(w: &[[f64; 2]], known: &[Option<u8>], mode: Evidence) -> Result<(Vec<u8>, bool)> {
    let n = w.len();
    if known.len() != n {
        return Err(Error::PlanMismatch("sc_decode: length mismatch".into()));
    }
    let mut u = vec![0u8; n];
    let mut decide = |j: usize, p: [f64; 2]| -> Result<u8> {
        let b = known[j].unwrap_or((p[1] > p[0]) as u8);
        u[j] = b;
        Ok(b)
    };
    let (_, first_zero) = sc_run(w, mode, &mut decide)?;
    Ok((u, first_zero.is_some()))
}

// ---------------------------------------------------------------------------
// Entropy profiles
// ---------------------------------------------------------------------------

/// Per-index conditional entropies of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub layer: LayerSpec,
    pub method: ProfileMethod,
    /// Monte-Carlo sample count (0 for exact profiles).
    pub samples: usize,
    /// `h[j] = H(A(j) | A^{1:j-1}, side^n)`, 0-based `j`.
    pub values: Vec<f64>,
    /// Largest 95% confidence-interval width (MC only).
    pub max_ci_width: Option<f64>,
}

const PROFILE_HEADER: &str = "polar-wtbc-profile v1";

impl EntropyProfile {
    /// Block length.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Versioned text serialization.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(PROFILE_HEADER);
        s.push('\n');
        s.push_str(&format!("layer {}\n", self.layer));
        s.push_str(&format!("method {}\n", self.method));
        s.push_str(&format!("samples {}\n", self.samples));
        if let Some(w) = self.max_ci_width {
            s.push_str(&format!("ci_width {w}\n"));
        }
        s.push_str(&format!("n {}\n", self.values.len()));
        s.push_str("values\n");
        for v in &self.values {
            s.push_str(&format!("{v}\n"));
        }
        s
    }

    /// Parse the text produced by [`EntropyProfile::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(PROFILE_HEADER) {
            return Err(Error::Parse(format!("profile must start with `{PROFILE_HEADER}`")));
        }
        let mut layer = None;
        let mut method = None;
        let mut samples = 0;
        let mut ci = None;
        let mut n = None;
        for line in lines.by_ref() {
            if line == "values" {
                break;
            }
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("malformed profile line `{line}`")))?;
            match k {
                "layer" => layer = Some(LayerSpec::parse(v)?),
                "method" => {
                    method = Some(match v {
                        "exact" => ProfileMethod::Exact,
                        "mc" => ProfileMethod::Mc,
                        _ => return Err(Error::Parse(format!("unknown method `{v}`"))),
                    })
                }
                "samples" => samples = v.parse().map_err(|_| Error::Parse("bad samples".into()))?,
                "ci_width" => ci = Some(v.parse().map_err(|_| Error::Parse("bad ci_width".into()))?),
                "n" => n = Some(v.parse::<usize>().map_err(|_| Error::Parse("bad n".into()))?),
                _ => return Err(Error::Parse(format!("unknown profile key `{k}`"))),
            }
        }
        let values = lines
            .map(|l| l.parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{l}`"))))
            .collect::<Result<Vec<_>>>()?;
        let n = n.ok_or_else(|| Error::Parse("missing n".into()))?;
        if values.len() != n {
            return Err(Error::Parse(format!("expected {n} values, found {}", values.len())));
        }
        Ok(EntropyProfile {
            layer: layer.ok_or_else(|| Error::Parse("missing layer".into()))?,
            method: method.ok_or_else(|| Error::Parse("missing method".into()))?,
            samples,
            values,
            max_ci_width: ci,
        })
    }
}

/// Closed-form erasure recursion: the profile of a symbol observed through
/// a BEC(ε), in natural index order (`e⁻ = 2e − e²`, `e⁺ = e²`).
pub fn bec_profile(eps: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    fn expand(e: f64, depth: u32, out: &mut Vec<f64>) {
        if depth == 0 {
            out.push(e);
        } else {
            expand(2.0 * e - e * e, depth - 1, out);
            expand(e * e, depth - 1, out);
        }
    }
    let mut out = Vec::with_capacity(n);
    expand(eps, n.trailing_zeros(), &mut out);
    Ok(out)
}

type Dist = Vec<(f64, f64)>;

fn merge_key(q: f64) -> i64 {
    (q * (1u64 << 40) as f64).round() as i64
}

fn merged(items: impl Iterator<Item = (f64, f64)>) -> Dist {
    let mut map: HashMap<i64, (f64, f64)> = HashMap::new();
    for (q, m) in items {
        if m <= 0.0 {
            continue;
        }
        let e = map.entry(merge_key(q)).or_insert((0.0, 0.0));
        e.0 += q * m;
        e.1 += m;
    }
    let mut v: Vec<(i64, f64, f64)> = map.into_iter().map(|(k, (qm, m))| (k, (qm / m).clamp(0.0, 1.0), m)).collect();
    v.sort_by_key(|e| e.0);
    v.into_iter().map(|(_, q, m)| (q, m)).collect()
}

fn minus_q(q1: f64, q2: f64) -> f64 {
    q1 * (1.0 - q2) + q2 * (1.0 - q1)
}

fn plus_q(q1: f64, q2: f64, s: u8) -> Option<f64> {
    let (num, den) = if s == 0 {
        (q1 * q2, q1 * q2 + (1.0 - q1) * (1.0 - q2))
    } else {
        ((1.0 - q1) * q2, (1.0 - q1) * q2 + q1 * (1.0 - q2))
    };
    if den > 0.0 {
        Some((num / den).clamp(0.0, 1.0))
    } else {
        None
    }
}

fn expected_h2(d: &Dist) -> f64 {
    d.iter().map(|&(q, m)| m * h2(q)).sum()
}

fn check_cap(work: f64, cap: f64) -> Result<()> {
    if work > cap {
        Err(Error::StateSpaceTooLarge { size: work, cap })
    } else {
        Ok(())
    }
}

/// Exact profile of `table` at block length `n`; `cap` bounds the total
/// number of posterior pairs enumerated over the whole recursion.
pub fn exact_profile_from_table(table: &PairTable, n: usize, cap: f64) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    let root = merged(table.rows.iter().map(|r| {
        let m = r[0] + r[1];
        (if m > 0.0 { r[1] / m } else { 0.0 }, m)
    }));
    let mut out = Vec::with_capacity(n);
    let mut work = 0.0;
    de_rec(&root, n, cap, &mut work, &mut out)?;
    Ok(out)
}

/// `work` accumulates the enumerated posterior pairs of the whole recursion.
fn de_rec(d: &Dist, len: usize, cap: f64, work: &mut f64, out: &mut Vec<f64>) -> Result<()> {
    if len == 1 {
        out.push(expected_h2(d));
        return Ok(());
    }
    let s = d.len() as f64;
    *work += s * s;
    check_cap(*work, cap)?;
    if len == 2 {
        let (mut hm, mut hp) = (0.0, 0.0);
        for &(q1, m1) in d {
            for &(q2, m2) in d {
                let m = m1 * m2;
                let qm = minus_q(q1, q2);
                hm += m * h2(qm);
                if let Some(q) = plus_q(q1, q2, 0) {
                    hp += m * (1.0 - qm) * h2(q);
                }
                if let Some(q) = plus_q(q1, q2, 1) {
                    hp += m * qm * h2(q);
                }
            }
        }
        out.push(hm);
        out.push(hp);
        return Ok(());
    }
    let minus = merged(d.iter().flat_map(|&(q1, m1)| d.iter().map(move |&(q2, m2)| (minus_q(q1, q2), m1 * m2))));
    de_rec(&minus, len / 2, cap, work, out)?;
    drop(minus);
    let plus = merged(d.iter().flat_map(|&(q1, m1)| {
        d.iter().flat_map(move |&(q2, m2)| {
            let qm = minus_q(q1, q2);
            let a = plus_q(q1, q2, 0).map(|q| (q, m1 * m2 * (1.0 - qm)));
            let b = plus_q(q1, q2, 1).map(|q| (q, m1 * m2 * qm));
            a.into_iter().chain(b)
        })
    }));
    de_rec(&plus, len / 2, cap, work, out)
}

/// Exact profile of a layer of `model`.
pub fn exact_profile(model: &JointModel, layer: &LayerSpec, n: usize, cap: f64) -> Result<EntropyProfile> {
    let table = model.pair_table(layer.sym, &layer.side);
    Ok(EntropyProfile {
        layer: layer.clone(),
        method: ProfileMethod::Exact,
        samples: 0,
        values: exact_profile_from_table(&table, n, cap)?,
        max_ci_width: None,
    })
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn ci_width(&self) -> f64 {
        if self.count < 2.0 {
            return f64::INFINITY;
        }
        let var = self.m2 / (self.count - 1.0);
        2.0 * 1.96 * (var / self.count).sqrt()
    }
}

/// Monte-Carlo profiles of several layers from one shared pool of joint
/// samples (common random numbers across layers).
pub fn mc_profiles(model: &JointModel, layers: &[LayerSpec], n: usize, samples: usize, seed: u64) -> Result<Vec<EntropyProfile>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let tables: Vec<PairTable> = layers.iter().map(|l| model.pair_table(l.sym, &l.side)).collect();
    let mut acc = vec![vec![Welford::default(); n]; layers.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..samples {
        atoms.clear();
        for _ in 0..n {
            atoms.push(model.sample_atom(&mut rng));
        }
        for (li, layer) in layers.iter().enumerate() {
            let table = &tables[li];
            let w: Vec<[f64; 2]> = atoms
                .iter()
                .map(|a| table.rows[model.key_of(a, &layer.side)])
                .collect();
            let mut sym: Vec<u8> = atoms.iter().map(|a| a[layer.sym.slot()] as u8).collect();
            polar_transform_in_place(&mut sym);
            let acc_l = &mut acc[li];
            let mut decide = |j: usize, p: [f64; 2]| -> Result<u8> {
                let b = sym[j];
                let pj = p[b as usize].max(1e-300);
                acc_l[j].push(-pj.log2());
                Ok(b)
            };
            sc_run(&w, Evidence::Lenient, &mut decide)?;
        }
    }
    Ok(layers
        .iter()
        .zip(acc)
        .map(|(layer, a)| {
            let width = a.iter().map(Welford::ci_width).fold(0.0, f64::max);
            if width > MAX_CI_WIDTH {
                log::warn!("SampleCountTooSmall: layer {layer} has 95% CI width {width:.4} > {MAX_CI_WIDTH}");
            }
            EntropyProfile {
                layer: layer.clone(),
                method: ProfileMethod::Mc,
                samples,
                values: a.iter().map(|w| w.mean.clamp(0.0, 1.0)).collect(),
                max_ci_width: Some(width),
            }
        })
        .collect())
}

/// Profiles of several layers using the configured method.
pub fn entropy_profiles(model: &JointModel, layers: &[LayerSpec], config: &CodeConfig) -> Result<Vec<EntropyProfile>> {
    match config.method {
        ProfileMethod::Exact => layers
            .iter()
            .map(|l| exact_profile(model, l, config.n, config.exact_cap))
            .collect(),
        ProfileMethod::Mc => mc_profiles(model, layers, config.n, config.samples, config.seed),
    }
}

/// Profile of one layer using the configured method.
pub fn entropy_profile(model: &JointModel, layer: &LayerSpec, config: &CodeConfig) -> Result<EntropyProfile> {
    Ok(entropy_profiles(model, std::slice::from_ref(layer), config)?.remove(0))
}
