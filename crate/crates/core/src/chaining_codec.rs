//! The L-block chained encoder and the two receiver decoders.
//!
//! ## Cell program
//!
//! A design is compiled once into a [`ChainCodec`]: every polar-domain cell
//! `(block, layer, index)` of the three layers `Ã` (inner, `V`), `T̃1`
//! (`U1`) and `T̃2` (`U2`) receives exactly one [`Origin`]:
//!
//! * a message bit of some [`MsgClass`],
//! * a fresh uniform padding bit,
//! * a frozen (public, zero) bit,
//! * an SC fill (the conditional distribution given the earlier indices),
//! * or a copy relation `cell = ⊕ sources ⊕ keys`.
//!
//! The audit in [`ChainCodec::new`] rejects double or missing assignments.
//! Copy relations cover every repetition of the construction: direct
//! repetitions (`R1`, `R2`, …), XOR combinations (`R12`, `R12′`), keyed
//! ("barred") repetitions, the `Π`/`Λ`/`F`/`Q` chains and the outer-layer
//! carriers `D`, `L`, `O`, `N`, `M`.
//!
//! ## Encoding
//!
//! Fresh bits are drawn first (so the next block's `C`-area is available to
//! the current block), then the layers are SC-filled block by block: `Ã`
//! forward, the corner-`k` outer layer forward, and the other outer layer
//! forward (corner 1) or backward (corner 2). Copy cells are evaluated
//! lazily, which resolves every cross-block dependency.
//!
//! ## Decoding
//!
//! A receiver knows frozen cells, its decrypted side information and its
//! keys. It visits blocks forward (receiver 1) or backward (receiver 2); in
//! every block it propagates relations with a single unknown, SC-decodes
//! `Ã`, propagates again, SC-decodes its own outer layer and propagates.
//! Unknown cells outside the decodable `L` sets at SC time are counted as
//! *unresolved* (zero for a sound plan).

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dms_model::{PairTable, Var};
use crate::error::{Error, Result};
use crate::polar_core::{polar_transform, sc_decode, sc_fill, BitSource, Evidence, FillMode};
use crate::set_builder::{IndexSet, SchemeDesign, SeqCell, SeqKind};

// ---------------------------------------------------------------------------
// Cells, origins, messages and keys
// ---------------------------------------------------------------------------

/// The three encoding layers of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    /// Inner layer `Ã` (`V`).
    A,
    /// Outer layer `T̃1` (`U1`).
    T1,
    /// Outer layer `T̃2` (`U2`).
    T2,
}

impl Layer {
    /// Outer layer of receiver `r`.
    pub fn outer(r: u8) -> Layer {
        if r == 1 {
            Layer::T1
        } else {
            Layer::T2
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Message classes (receiver labels are the design's normalized labels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgClass {
    /// Confidential inner-layer message `S^(V)` of receiver `k`.
    InnerS,
    /// Private inner-layer message `W^(V)` of receiver `k`.
    InnerW,
    /// Confidential outer-layer message `S^(U)` of the given receiver.
    OuterS(u8),
    /// Private outer-layer message `W^(U)` of the given receiver.
    OuterW(u8),
}

impl MsgClass {
    /// Receiver the class belongs to, for corner `k`.
    pub fn receiver(self, k: u8) -> u8 {
        match self {
            MsgClass::InnerS | MsgClass::InnerW => k,
            MsgClass::OuterS(r) | MsgClass::OuterW(r) => r,
        }
    }

    /// Whether the class is confidential.
    pub fn confidential(self) -> bool {
        matches!(self, MsgClass::InnerS | MsgClass::OuterS(_))
    }
}

/// Secret keys shared with the legitimate receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeyId {
    /// `κ_Θ^(V)` (corner 1), length `|C1|`.
    ThetaV,
    /// `κ_Ψ^(V)` (corner 2), length `|C2|`.
    PsiV,
    /// `κ_Γ^(V)`, length `|C12|`.
    GammaV,
    /// `κ_Θ^(U)` (corner 1), length `|D1|`.
    ThetaU,
    /// `κ_Ψ^(U)` (corner 2), length `|D2|`.
    PsiU,
    /// `κ_O^(U)`, length `|O|`.
    O,
    /// Side-information key of receiver `r`, inner layer.
    SideV(u8),
    /// Side-information key of receiver `r`, outer layer.
    SideU(u8),
}

impl KeyId {
    /// Inner-layer chaining keys (the ones the disable flag zeroes).
    pub fn is_inner_chaining(self) -> bool {
        matches!(self, KeyId::ThetaV | KeyId::PsiV | KeyId::GammaV)
    }
}

/// One bit of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyRef {
    pub id: KeyId,
    pub idx: usize,
}

/// Rule that writes one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Next bit of a message class.
    Message(MsgClass),
    /// Fresh uniform bit (repetition with no available source).
    Padding,
    /// Public zero (relax mode).
    Frozen,
    /// Successive-cancellation fill.
    Fill,
    /// XOR of other cells and key bits.
    Copy { cells: Vec<usize>, keys: Vec<KeyRef> },
}

/// Message bits per class and block.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSet {
    /// `bits[class][block]`.
    pub bits: BTreeMap<MsgClass, Vec<Vec<u8>>>,
}

impl MessageSet {
    /// Uniform messages with the lengths of `codec`.
    pub fn random(codec: &ChainCodec, src: &mut dyn BitSource) -> MessageSet {
        let mut bits = BTreeMap::new();
        for (class, lens) in codec.message_lengths() {
            let v: Vec<Vec<u8>> = lens.iter().map(|&l| (0..l).map(|_| src.uniform_bit()).collect()).collect();
            bits.insert(class, v);
        }
        MessageSet { bits }
    }

    /// Total bits of a class.
    pub fn total(&self, class: MsgClass) -> usize {
        self.bits.get(&class).map_or(0, |b| b.iter().map(Vec::len).sum())
    }

    /// Restriction to the given classes.
    pub fn restrict(&self, classes: &[MsgClass]) -> MessageSet {
        MessageSet {
            bits: self.bits.iter().filter(|(c, _)| classes.contains(c)).map(|(c, b)| (*c, b.clone())).collect(),
        }
    }
}

/// All key material.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRing {
    pub keys: BTreeMap<KeyId, Vec<u8>>,
}

impl KeyRing {
    /// Uniform keys of the exact ledger lengths. With `keys_enabled =
    /// false` the inner chaining keys are all-zero (empirical study only).
    pub fn generate(codec: &ChainCodec, keys_enabled: bool, src: &mut dyn BitSource) -> KeyRing {
        let mut keys = BTreeMap::new();
        for (&id, &len) in &codec.key_lengths {
            let v = if !keys_enabled && id.is_inner_chaining() {
                vec![0; len]
            } else {
                (0..len).map(|_| src.uniform_bit()).collect()
            };
            keys.insert(id, v);
        }
        KeyRing { keys }
    }

    fn bit(&self, k: KeyRef) -> Result<u8> {
        self.keys
            .get(&k.id)
            .and_then(|v| v.get(k.idx).copied())
            .ok_or_else(|| Error::PlanMismatch(format!("key {:?}[{}] missing", k.id, k.idx)))
    }

    /// Total key bits.
    pub fn total_bits(&self) -> usize {
        self.keys.values().map(Vec::len).sum()
    }
}

/// XOR a segment with a key of equal length.
pub fn encrypt(segment: &[u8], key: &[u8]) -> Result<Vec<u8>> {
    if segment.len() != key.len() {
        return Err(Error::PlanMismatch(format!("segment length {} vs key length {}", segment.len(), key.len())));
    }
    Ok(segment.iter().zip(key).map(|(s, k)| s ^ k).collect())
}

/// Exact crypto-lemma check for segments of `len ≤ 16` bits: for every
/// segment `s` the map `κ ↦ s⊕κ` is enumerated over all keys, and the
/// χ² statistic of the joint `(s, s⊕κ)` histogram against the uniform
/// product law is returned (exactly 0 when the lemma holds).
pub fn crypto_lemma_chi2(len: usize) -> Result<f64> {
    if len > 16 {
        return Err(Error::InvalidConfig(format!("crypto-lemma enumeration limited to 16 bits, got {len}")));
    }
    let size = 1usize << len;
    let mut chi2 = 0.0;
    let mut hist = vec![0u32; size];
    for s in 0..size {
        hist.iter_mut().for_each(|h| *h = 0);
        for k in 0..size {
            hist[s ^ k] += 1;
        }
        // Under independence and uniformity each (s, c) pair has count 1.
        for &h in &hist {
            let d = h as f64 - 1.0;
            chi2 += d * d;
        }
    }
    Ok(chi2)
}

// ---------------------------------------------------------------------------
// Transmission
// ---------------------------------------------------------------------------

/// Everything the transmitter produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTransmission {
    pub n: usize,
    pub blocks: usize,
    /// Polar-domain value of every cell (index by [`ChainCodec::cell`]).
    pub cells: Vec<u8>,
    /// Symbol-domain `V`, `U1`, `U2` per block.
    pub v: Vec<Vec<u8>>,
    pub u1: Vec<Vec<u8>>,
    pub u2: Vec<Vec<u8>>,
    /// Channel input per block.
    pub x: Vec<Vec<u8>>,
    /// Encrypted side information per receiver (order of
    /// [`ReceiverSpec::side_cells`]).
    pub side_cipher: [Vec<u8>; 2],
}

impl ChainTransmission {
    /// Polar-domain sequence of one block and layer.
    pub fn layer(&self, block: usize, layer: Layer) -> &[u8] {
        let s = (block * 3 + layer.slot()) * self.n;
        &self.cells[s..s + self.n]
    }
}

/// Static description of one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSpec {
    /// Normalized label.
    pub r: u8,
    /// Own outer layer.
    pub layer: Layer,
    /// Decodable set of the inner layer, `L_{V|Yr}`.
    pub l_inner: IndexSet,
    /// Decodable set of the outer layer.
    pub l_outer: IndexSet,
    /// Cells delivered as encrypted side information.
    pub side_cells: Vec<usize>,
    /// Number of those cells in the inner layer (key `SideV`), the rest use `SideU`.
    pub side_inner: usize,
    /// Keys shared with this receiver.
    pub keys: Vec<KeyId>,
    /// Message classes intended for this receiver.
    pub wanted: Vec<MsgClass>,
    /// Block visiting order.
    pub forward: bool,
}

// ---------------------------------------------------------------------------
// Codec
// ---------------------------------------------------------------------------

/// Compiled cell program of a design.
#[derive(Debug, Clone)]
pub struct ChainCodec {
    pub n: usize,
    pub blocks: usize,
    /// Normalized corner.
    pub corner: u8,
    pub origins: Vec<Origin>,
    pub key_lengths: BTreeMap<KeyId, usize>,
    pub receivers: [ReceiverSpec; 2],
    /// SC fill modes per layer (`A`, `T1`, `T2`).
    fill_modes: [Vec<FillMode>; 3],
    /// Encoder conditional tables: `V|∅`, `Uk|V`, `Uk̄|V,Uk`.
    enc_tables: [PairTable; 3],
    /// Decoder tables per receiver: `V|Yr`, `Ur|V,Yr`.
    dec_tables: [[PairTable; 2]; 2],
    f_table: [u8; 8],
}

struct Builder {
    n: usize,
    blocks: usize,
    origins: Vec<Option<Origin>>,
}

impl Builder {
    fn cell(&self, block: usize, layer: Layer, pos: usize) -> usize {
        (block * 3 + layer.slot()) * self.n + pos
    }

    fn set(&mut self, c: usize, o: Origin) -> Result<()> {
        if self.origins[c].is_some() {
            return Err(Error::PlanMismatch(format!("cell {c} assigned twice")));
        }
        self.origins[c] = Some(o);
        Ok(())
    }

    /// Copy with the available terms, padding when none exists.
    fn copy(&mut self, c: usize, terms: Vec<(usize, Option<KeyRef>)>) -> Result<()> {
        if terms.is_empty() {
            return self.set(c, Origin::Padding);
        }
        let cells = terms.iter().map(|t| t.0).collect();
        let keys = terms.iter().filter_map(|t| t.1).collect();
        self.set(c, Origin::Copy { cells, keys })
    }

    fn block(&self, b: isize) -> Option<usize> {
        (b >= 0 && (b as usize) < self.blocks).then_some(b as usize)
    }
}

fn seq_key(sc: &SeqCell, barred: bool, k: u8) -> Option<KeyRef> {
    if !barred {
        return None;
    }
    let id = match sc.seq {
        SeqKind::Theta => KeyId::ThetaV,
        SeqKind::Psi => KeyId::PsiV,
        SeqKind::Gamma => KeyId::GammaV,
        SeqKind::Pi1 => return None,
    };
    debug_assert!(matches!((id, k), (KeyId::GammaV, _) | (KeyId::ThetaV, 1) | (KeyId::PsiV, 2)));
    Some(KeyRef { id, idx: sc.index })
}

impl ChainCodec {
    /// Compile a design into its cell program.
    pub fn new(d: &SchemeDesign) -> Result<ChainCodec> {
        let n = d.config.n;
        let blocks = d.config.blocks;
        let k = d.corner;
        let kb = 3 - k;
        let plan = &d.plan;
        let o = &d.outer;
        let p = &plan.partition;
        let mut bld = Builder { n, blocks, origins: vec![None; 3 * n * blocks] };

        // ---- payload tails that do not fit the outer carriers are frozen ----
        let (payload_k, payload_kb) = if k == 1 {
            (plan.delta1(), plan.delta2())
        } else {
            (plan.delta2(), plan.payload_rx1())
        };
        let mut frozen_a = plan.frozen.clone();
        for sc in payload_k.iter().skip(o.lk_payload).chain(payload_kb.iter().skip(o.m_payload)) {
            frozen_a = frozen_a.union(&IndexSet::from_indices(n, [sc.pos]));
        }

        // ---- inner layer ----
        let next_barred = plan.next_barred();
        let prev_barred = plan.prev_barred();
        let dest = |set: &IndexSet| -> BTreeMap<usize, usize> { set.iter().enumerate().map(|(j, pos)| (pos, j)).collect() };
        let (m_r1, m_r1p, m_r2, m_r2p) = (dest(&plan.r1), dest(&plan.r1p), dest(&plan.r2), dest(&plan.r2p));
        let (m_r12, m_r12p, m_rs, m_rl) = (dest(&plan.r12), dest(&plan.r12p), dest(&plan.rs), dest(&plan.r_lambda));
        let (th1, th2) = (plan.theta_part(1), plan.theta_part(2));
        let (ps1, ps2) = (plan.psi_part(1), plan.psi_part(2));
        let (gp1, gp2) = (plan.gamma_prev_part(1), plan.gamma_prev_part(2));
        let (gn1, gn2) = (plan.gamma_next_part(1), plan.gamma_next_part(2));
        let pi2: Vec<usize> = plan.pi2.to_vec();
        let h_v = d.sets.h_v.clone();
        for b in 0..blocks {
            let i = b + 1;
            let area = plan.message_area(i, blocks);
            let prev = bld.block(b as isize - 1);
            let next = bld.block(b as isize + 1);
            for pos in 0..n {
                let c = bld.cell(b, Layer::A, pos);
                if !h_v.contains(pos) {
                    bld.set(c, Origin::Fill)?;
                    continue;
                }
                if frozen_a.contains(pos) {
                    bld.set(c, Origin::Frozen)?;
                    continue;
                }
                if p.c.contains(pos) {
                    bld.set(c, Origin::Message(MsgClass::InnerW))?;
                    continue;
                }
                if area.contains(pos) {
                    bld.set(c, Origin::Message(MsgClass::InnerS))?;
                    continue;
                }
                let from_next = |sc: &SeqCell, bld: &Builder| next.map(|nb| (bld.cell(nb, Layer::A, sc.pos), seq_key(sc, next_barred, k)));
                let from_prev = |sc: &SeqCell, bld: &Builder| prev.map(|pb| (bld.cell(pb, Layer::A, sc.pos), seq_key(sc, prev_barred, k)));
                let terms: Vec<(usize, Option<KeyRef>)> = if let Some(&j) = m_r1.get(&pos) {
                    from_next(&th1[j], &bld).into_iter().collect()
                } else if let Some(&j) = m_r1p.get(&pos) {
                    from_next(&gn2[j], &bld).into_iter().collect()
                } else if let Some(&j) = m_r2.get(&pos) {
                    from_prev(&ps1[j], &bld).into_iter().collect()
                } else if let Some(&j) = m_r2p.get(&pos) {
                    from_prev(&gp2[j], &bld).into_iter().collect()
                } else if let Some(&j) = m_r12.get(&pos) {
                    from_prev(&gp1[j], &bld).into_iter().chain(from_next(&gn1[j], &bld)).collect()
                } else if let Some(&j) = m_r12p.get(&pos) {
                    from_prev(&ps2[j], &bld).into_iter().chain(from_next(&th2[j], &bld)).collect()
                } else if let Some(&j) = m_rs.get(&pos) {
                    prev.map(|pb| (bld.cell(pb, Layer::A, pi2[j]), None)).into_iter().collect()
                } else if m_rl.contains_key(&pos) {
                    prev.map(|pb| (bld.cell(pb, Layer::A, pos), None)).into_iter().collect()
                } else {
                    return Err(Error::PlanMismatch(format!(
                        "inner index {pos} of block {i} is not covered by any rule"
                    )));
                };
                bld.copy(c, terms)?;
            }
        }

        // ---- outer layer k ----
        let lk = Layer::outer(k);
        let lkb = Layer::outer(kb);
        let (m_dk, m_lk) = (dest(&o.dk), dest(&o.lk));
        let jk_chained: Vec<usize> = o.jk.minus(&o.frozen_k).to_vec();
        let s_k = MsgClass::OuterS(k);
        for b in 0..blocks {
            let prev = bld.block(b as isize - 1);
            let next = bld.block(b as isize + 1);
            for pos in 0..n {
                let c = bld.cell(b, lk, pos);
                if !o.hk.contains(pos) {
                    bld.set(c, Origin::Fill)?;
                } else if o.frozen_k.contains(pos) {
                    bld.set(c, Origin::Frozen)?;
                } else if o.j0.contains(pos) || o.jk.contains(pos) {
                    bld.set(c, Origin::Message(MsgClass::OuterW(k)))?;
                } else if o.fk.contains(pos) {
                    match prev {
                        Some(pb) => bld.copy(c, vec![(bld.cell(pb, lk, pos), None)])?,
                        None => bld.set(c, Origin::Message(s_k))?,
                    }
                } else if o.f0.contains(pos) {
                    // Corner 1 repeats the next block, corner 2 the previous one.
                    let src_block = if k == 1 { next } else { prev };
                    let barred = if k == 1 { next_barred } else { prev_barred };
                    let key_id = if k == 1 { KeyId::ThetaU } else { KeyId::PsiU };
                    match (src_block, m_dk.get(&pos), m_lk.get(&pos)) {
                        (Some(sb), Some(&j), _) => {
                            let key = KeyRef { id: key_id, idx: j };
                            bld.copy(c, vec![(bld.cell(sb, lk, jk_chained[j]), Some(key))])?
                        }
                        (Some(sb), None, Some(&j)) => {
                            let sc = payload_k[j];
                            bld.copy(c, vec![(bld.cell(sb, Layer::A, sc.pos), seq_key(&sc, barred, k))])?
                        }
                        _ => bld.set(c, Origin::Message(s_k))?,
                    }
                } else {
                    return Err(Error::PlanMismatch(format!("outer-k index {pos} not covered")));
                }
            }
        }

        // ---- outer layer k̄ ----
        let (m_o, m_n, m_m) = (dest(&o.o), dest(&o.nset), dest(&o.m));
        let oreg_chained: Vec<usize> = o.oreg_chained().to_vec();
        let bkb_chained: Vec<usize> = o.bkb.minus(&o.frozen_kb).to_vec();
        let s_kb = MsgClass::OuterS(kb);
        for b in 0..blocks {
            let prev = bld.block(b as isize - 1);
            let next = bld.block(b as isize + 1);
            // Corner 1: T2 repeats the previous block; corner 2: T1 the next one.
            let carrier_src = if k == 1 { prev } else { next };
            for pos in 0..n {
                let c = bld.cell(b, lkb, pos);
                if !o.hc.contains(pos) {
                    bld.set(c, Origin::Fill)?;
                } else if o.frozen_kb.contains(pos) {
                    bld.set(c, Origin::Frozen)?;
                } else if o.b0.contains(pos) || o.bkb.contains(pos) {
                    bld.set(c, Origin::Message(MsgClass::OuterW(kb)))?;
                } else if o.qkb.contains(pos) {
                    match prev {
                        Some(pb) => bld.copy(c, vec![(bld.cell(pb, lkb, pos), None)])?,
                        None => bld.set(c, Origin::Message(s_kb))?,
                    }
                } else if o.q0.contains(pos) {
                    match carrier_src {
                        Some(sb) => {
                            if let Some(&j) = m_o.get(&pos) {
                                let key = KeyRef { id: KeyId::O, idx: j };
                                bld.copy(c, vec![(bld.cell(sb, lkb, oreg_chained[j]), Some(key))])?
                            } else if let Some(&j) = m_n.get(&pos) {
                                bld.copy(c, vec![(bld.cell(sb, lkb, bkb_chained[j]), None)])?
                            } else if let Some(&j) = m_m.get(&pos) {
                                let sc = payload_kb[j];
                                let barred = if k == 1 { prev_barred } else { next_barred };
                                bld.copy(c, vec![(bld.cell(sb, Layer::A, sc.pos), seq_key(&sc, barred, k))])?
                            } else {
                                bld.set(c, Origin::Message(s_kb))?
                            }
                        }
                        None => bld.set(c, Origin::Message(s_kb))?,
                    }
                } else {
                    return Err(Error::PlanMismatch(format!("outer-k̄ index {pos} not covered")));
                }
            }
        }

        // ---- audit ----
        let origins: Vec<Origin> = bld
            .origins
            .iter()
            .enumerate()
            .map(|(c, o)| o.clone().ok_or_else(|| Error::PlanMismatch(format!("cell {c} never assigned"))))
            .collect::<Result<_>>()?;

        // ---- keys ----
        let mut key_lengths = BTreeMap::new();
        if k == 1 {
            key_lengths.insert(KeyId::ThetaV, p.c1.len());
            key_lengths.insert(KeyId::ThetaU, o.dk.len());
        } else {
            key_lengths.insert(KeyId::PsiV, p.c2.len());
            key_lengths.insert(KeyId::PsiU, o.dk.len());
        }
        key_lengths.insert(KeyId::GammaV, p.c12.len());
        key_lengths.insert(KeyId::O, o.o.len());

        // ---- receivers ----
        let cell = |b: usize, l: Layer, pos: usize| (b * 3 + l.slot()) * n + pos;
        let mut receivers = Vec::new();
        for r in [1u8, 2] {
            let layer = Layer::outer(r);
            let l_inner = d.sets.l_v_y[(r - 1) as usize].clone();
            let (h_outer, l_outer) = if r == k { (o.hk.clone(), o.lk_y.clone()) } else { (o.hv.clone(), o.ly.clone()) };
            let anchor = if r == 1 { 0 } else { blocks - 1 };
            let mut side = Vec::new();
            let phi_v = h_v.complement().minus(&l_inner);
            let ups_v = h_v.minus(&l_inner);
            for b in 0..blocks {
                side.extend(phi_v.iter().map(|pos| cell(b, Layer::A, pos)));
            }
            side.extend(ups_v.iter().map(|pos| cell(anchor, Layer::A, pos)));
            let side_inner = side.len();
            let mut phi_u = h_outer.complement().minus(&l_outer);
            if r == kb {
                phi_u = phi_u.union(&o.o_overflow);
            }
            let ups_u = h_outer.minus(&l_outer).minus(&phi_u);
            for b in 0..blocks {
                side.extend(phi_u.iter().map(|pos| cell(b, layer, pos)));
            }
            side.extend(ups_u.iter().map(|pos| cell(anchor, layer, pos)));
            // Frozen cells are public: no side information needed.
            let mut inner_count = 0;
            let mut kept = Vec::new();
            for (idx, &c) in side.iter().enumerate() {
                if origins[c] != Origin::Frozen {
                    if idx < side_inner {
                        inner_count += 1;
                    }
                    kept.push(c);
                }
            }
            key_lengths.insert(KeyId::SideV(r), inner_count);
            key_lengths.insert(KeyId::SideU(r), kept.len() - inner_count);
            let mut keys = vec![KeyId::GammaV, KeyId::SideV(r), KeyId::SideU(r)];
            keys.push(if k == 1 { KeyId::ThetaV } else { KeyId::PsiV });
            keys.push(match (k, r == k) {
                (1, true) => KeyId::ThetaU,
                (2, true) => KeyId::PsiU,
                _ => KeyId::O,
            });
            let mut wanted = vec![MsgClass::OuterS(r), MsgClass::OuterW(r)];
            if r == k {
                wanted.extend([MsgClass::InnerS, MsgClass::InnerW]);
            }
            wanted.sort();
            receivers.push(ReceiverSpec {
                r,
                layer,
                l_inner,
                l_outer,
                side_cells: kept,
                side_inner: inner_count,
                keys,
                wanted,
                forward: r == 1,
            });
        }

        // ---- SC tables and modes ----
        let model = &d.model;
        let uk = Var::u(k);
        let ukb = Var::u(kb);
        let enc_tables = [
            model.pair_table(Var::V, &[]),
            model.pair_table(uk, &[Var::V]),
            model.pair_table(ukb, &[Var::V, uk]),
        ];
        let dec_tables = [1u8, 2].map(|r| [model.pair_table(Var::V, &[Var::y(r)]), model.pair_table(Var::u(r), &[Var::V, Var::y(r)])]);
        let modes = |hold: &IndexSet, det: &IndexSet| -> Vec<FillMode> {
            (0..n)
                .map(|j| {
                    if hold.contains(j) {
                        FillMode::Hold
                    } else if det.contains(j) {
                        FillMode::Deterministic
                    } else {
                        FillMode::Random
                    }
                })
                .collect()
        };
        let mut fill_modes = [modes(&h_v, &d.sets.l_v), Vec::new(), Vec::new()];
        fill_modes[lk.slot()] = modes(&o.hk, &o.lk_v);
        fill_modes[lkb.slot()] = modes(&o.hc, &o.lc);
        let [r1, r2]: [ReceiverSpec; 2] = receivers.try_into().expect("two receivers");
        Ok(ChainCodec {
            n,
            blocks,
            corner: k,
            origins,
            key_lengths,
            receivers: [r1, r2],
            fill_modes,
            enc_tables,
            dec_tables,
            f_table: *model.f_table(),
        })
    }

    /// Cell id of `(block, layer, index)` (block 0-based).
    pub fn cell(&self, block: usize, layer: Layer, pos: usize) -> usize {
        (block * 3 + layer.slot()) * self.n + pos
    }

    /// Inverse of [`ChainCodec::cell`].
    pub fn locate(&self, c: usize) -> (usize, Layer, usize) {
        let pos = c % self.n;
        let bl = c / self.n;
        let layer = [Layer::A, Layer::T1, Layer::T2][bl % 3];
        (bl / 3, layer, pos)
    }

    /// Message lengths per class and block.
    pub fn message_lengths(&self) -> BTreeMap<MsgClass, Vec<usize>> {
        let mut out: BTreeMap<MsgClass, Vec<usize>> = BTreeMap::new();
        for (c, o) in self.origins.iter().enumerate() {
            if let Origin::Message(class) = o {
                let (b, _, _) = self.locate(c);
                out.entry(*class).or_insert_with(|| vec![0; self.blocks])[b] += 1;
            }
        }
        out
    }

    /// Number of cells with a given origin predicate.
    pub fn count(&self, pred: impl Fn(&Origin) -> bool) -> usize {
        self.origins.iter().filter(|o| pred(o)).count()
    }

    /// Cells of a class in transmission order.
    fn class_cells(&self, class: MsgClass) -> Vec<usize> {
        (0..self.origins.len()).filter(|&c| self.origins[c] == Origin::Message(class)).collect()
    }

    /// Receiver spec by normalized label.
    pub fn receiver(&self, r: u8) -> &ReceiverSpec {
        &self.receivers[(r - 1) as usize]
    }

    fn eval(&self, c: usize, vals: &mut [Option<u8>], keys: &KeyRing) -> Result<u8> {
        if let Some(v) = vals[c] {
            return Ok(v);
        }
        match &self.origins[c] {
            Origin::Copy { cells, keys: ks } => {
                let mut acc = 0;
                for &t in cells {
                    acc ^= self.eval(t, vals, keys)?;
                }
                for &kr in ks {
                    acc ^= keys.bit(kr)?;
                }
                vals[c] = Some(acc);
                Ok(acc)
            }
            o => Err(Error::PlanMismatch(format!("cell {c} ({o:?}) evaluated before it was written"))),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fill_layer(
        &self,
        b: usize,
        layer: Layer,
        table: &PairTable,
        side: &[Vec<usize>],
        vals: &mut [Option<u8>],
        keys: &KeyRing,
        src: &mut dyn BitSource,
    ) -> Result<Vec<u8>> {
        let modes = &self.fill_modes[layer.slot()];
        let mut known = vec![None; self.n];
        for pos in 0..self.n {
            if modes[pos] == FillMode::Hold {
                known[pos] = Some(self.eval(self.cell(b, layer, pos), vals, keys)?);
            }
        }
        let w: Vec<[f64; 2]> = side.iter().map(|s| table.rows[table.index(s)]).collect();
        let u = sc_fill(&known, modes, &w, src)?;
        for (pos, &bit) in u.iter().enumerate() {
            vals[self.cell(b, layer, pos)] = Some(bit);
        }
        polar_transform(&u)
    }

    /// Encode all `L` blocks.
    pub fn encode_chain(&self, msgs: &MessageSet, keys: &KeyRing, src: &mut dyn BitSource) -> Result<ChainTransmission> {
        let (n, blocks, k) = (self.n, self.blocks, self.corner);
        let mut vals: Vec<Option<u8>> = vec![None; self.origins.len()];
        let mut cursor: BTreeMap<MsgClass, (usize, usize)> = BTreeMap::new();
        // Pre-pass: every fresh cell of every block.
        for c in 0..self.origins.len() {
            match self.origins[c] {
                Origin::Message(class) => {
                    let (b, _, _) = self.locate(c);
                    let blocks_bits = msgs
                        .bits
                        .get(&class)
                        .ok_or_else(|| Error::PlanMismatch(format!("message class {class:?} missing")))?;
                    let cur = cursor.entry(class).or_insert((usize::MAX, 0));
                    if cur.0 != b {
                        *cur = (b, 0);
                    }
                    let bit = blocks_bits
                        .get(b)
                        .and_then(|v| v.get(cur.1))
                        .copied()
                        .ok_or_else(|| Error::PlanMismatch(format!("message {class:?} too short in block {}", b + 1)))?;
                    cur.1 += 1;
                    vals[c] = Some(bit);
                }
                Origin::Padding => vals[c] = Some(src.uniform_bit()),
                Origin::Frozen => vals[c] = Some(0),
                _ => {}
            }
        }
        for (class, lens) in self.message_lengths() {
            let got: Vec<usize> = msgs.bits[&class].iter().map(Vec::len).collect();
            if got != lens {
                return Err(Error::PlanMismatch(format!("message {class:?} lengths {got:?}, plan needs {lens:?}")));
            }
        }
        let none: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut v = Vec::with_capacity(blocks);
        for b in 0..blocks {
            v.push(self.fill_layer(b, Layer::A, &self.enc_tables[0], &none, &mut vals, keys, src)?);
        }
        let lk = Layer::outer(k);
        let lkb = Layer::outer(3 - k);
        let mut uk = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let side: Vec<Vec<usize>> = v[b].iter().map(|&x| vec![x as usize]).collect();
            uk.push(self.fill_layer(b, lk, &self.enc_tables[1], &side, &mut vals, keys, src)?);
        }
        let mut ukb = vec![Vec::new(); blocks];
        let order: Vec<usize> = if k == 1 { (0..blocks).collect() } else { (0..blocks).rev().collect() };
        for b in order {
            let side: Vec<Vec<usize>> = (0..n).map(|t| vec![v[b][t] as usize, uk[b][t] as usize]).collect();
            ukb[b] = self.fill_layer(b, lkb, &self.enc_tables[2], &side, &mut vals, keys, src)?;
        }
        let (u1, u2) = if k == 1 { (uk, ukb) } else { (ukb, uk) };
        let x: Vec<Vec<u8>> = (0..blocks)
            .map(|b| (0..n).map(|t| self.f_table[(4 * v[b][t] + 2 * u1[b][t] + u2[b][t]) as usize]).collect())
            .collect();
        let cells: Vec<u8> = vals
            .iter()
            .enumerate()
            .map(|(c, x)| x.ok_or_else(|| Error::PlanMismatch(format!("cell {c} left unwritten"))))
            .collect::<Result<_>>()?;
        let mut side_cipher: [Vec<u8>; 2] = [Vec::new(), Vec::new()];
        for (ri, spec) in self.receivers.iter().enumerate() {
            let plain: Vec<u8> = spec.side_cells.iter().map(|&c| cells[c]).collect();
            let mut key = keys.keys.get(&KeyId::SideV(spec.r)).cloned().unwrap_or_default();
            key.extend(keys.keys.get(&KeyId::SideU(spec.r)).cloned().unwrap_or_default());
            side_cipher[ri] = encrypt(&plain, &key)?;
        }
        Ok(ChainTransmission { n, blocks, cells, v, u1, u2, x, side_cipher })
    }

    /// Message classes read from a transmission (ground truth).
    pub fn messages_of(&self, t: &ChainTransmission, classes: &[MsgClass]) -> MessageSet {
        let vals: Vec<Option<u8>> = t.cells.iter().map(|&b| Some(b)).collect();
        self.extract(&vals, classes)
    }

    fn extract(&self, vals: &[Option<u8>], classes: &[MsgClass]) -> MessageSet {
        let mut bits = BTreeMap::new();
        for &class in classes {
            let cells = self.class_cells(class);
            if cells.is_empty() {
                continue;
            }
            let mut per_block = vec![Vec::new(); self.blocks];
            for c in cells {
                let (b, _, _) = self.locate(c);
                per_block[b].push(vals[c].unwrap_or(0));
            }
            bits.insert(class, per_block);
        }
        MessageSet { bits }
    }

    /// Relations usable by receiver `r`, as `(cells, keys)` with XOR zero.
    fn relations(&self, spec: &ReceiverSpec) -> Vec<(Vec<usize>, Vec<KeyRef>)> {
        let usable = |c: usize| {
            let (_, l, _) = self.locate(c);
            l == Layer::A || l == spec.layer
        };
        let mut out = Vec::new();
        for (c, o) in self.origins.iter().enumerate() {
            if let Origin::Copy { cells, keys } = o {
                if usable(c) && cells.iter().all(|&t| usable(t)) && keys.iter().all(|kr| spec.keys.contains(&kr.id)) {
                    let mut all = vec![c];
                    all.extend(cells);
                    out.push((all, keys.clone()));
                }
            }
        }
        out
    }

    /// Decode at receiver `r` (normalized label) from its channel outputs
    /// `y[block][t]`, its encrypted side information and the key ring.
    pub fn decode(&self, r: u8, y: &[Vec<usize>], side_cipher: &[u8], keys: &KeyRing, mode: DecodeMode) -> Result<DecodeOutcome> {
        let spec = self.receiver(r);
        if y.len() != self.blocks || y.iter().any(|b| b.len() != self.n) {
            return Err(Error::PlanMismatch("observation shape does not match the plan".into()));
        }
        if side_cipher.len() != spec.side_cells.len() {
            return Err(Error::PlanMismatch("side information length does not match the plan".into()));
        }
        let mut vals: Vec<Option<u8>> = vec![None; self.origins.len()];
        for (c, o) in self.origins.iter().enumerate() {
            if *o == Origin::Frozen {
                vals[c] = Some(0);
            }
        }
        let mut side_key = keys.keys.get(&KeyId::SideV(r)).cloned().unwrap_or_default();
        side_key.extend(keys.keys.get(&KeyId::SideU(r)).cloned().unwrap_or_default());
        let plain = encrypt(side_cipher, &side_key)?;
        for (&c, &bit) in spec.side_cells.iter().zip(&plain) {
            vals[c] = Some(bit);
        }
        let rels = self.relations(spec);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.origins.len()];
        for (ri, (cells, _)) in rels.iter().enumerate() {
            for &c in cells {
                adj[c].push(ri);
            }
        }
        let mut prop = Propagator { rels: &rels, adj: &adj, queue: (0..rels.len()).collect() };
        prop.run(&mut vals, keys)?;
        let order: Vec<usize> = if spec.forward { (0..self.blocks).collect() } else { (0..self.blocks).rev().collect() };
        let mut unresolved = 0;
        let mut zero_evidence = false;
        for b in order {
            // Inner layer.
            let side: Vec<Vec<usize>> = y[b].iter().map(|&s| vec![s]).collect();
            let (v_sym, u1, z1) = self.decode_layer(b, Layer::A, &self.dec_tables[(r - 1) as usize][0], &side, &spec.l_inner, &mut vals, &mut prop, keys, &mode)?;
            unresolved += u1;
            zero_evidence |= z1;
            prop.run(&mut vals, keys)?;
            let side: Vec<Vec<usize>> = (0..self.n).map(|t| vec![v_sym[t] as usize, y[b][t]]).collect();
            let (_, u2, z2) = self.decode_layer(b, spec.layer, &self.dec_tables[(r - 1) as usize][1], &side, &spec.l_outer, &mut vals, &mut prop, keys, &mode)?;
            unresolved += u2;
            zero_evidence |= z2;
            prop.run(&mut vals, keys)?;
        }
        Ok(DecodeOutcome {
            receiver: r,
            messages: self.extract(&vals, &spec.wanted),
            unresolved,
            zero_evidence,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn decode_layer(
        &self,
        b: usize,
        layer: Layer,
        table: &PairTable,
        side: &[Vec<usize>],
        decodable: &IndexSet,
        vals: &mut [Option<u8>],
        prop: &mut Propagator,
        keys: &KeyRing,
        mode: &DecodeMode,
    ) -> Result<(Vec<u8>, usize, bool)> {
        let _ = keys;
        let known: Vec<Option<u8>> = (0..self.n).map(|pos| vals[self.cell(b, layer, pos)]).collect();
        let unresolved = (0..self.n).filter(|&pos| known[pos].is_none() && !decodable.contains(pos)).count();
        let (u, zero) = match mode {
            DecodeMode::Sc => {
                let w: Vec<[f64; 2]> = side.iter().map(|s| table.rows[table.index(s)]).collect();
                sc_decode(&w, &known, Evidence::Lenient)?
            }
            DecodeMode::Genie(truth) => {
                let t = truth.layer(b, layer);
                ((0..self.n).map(|pos| known[pos].unwrap_or(t[pos])).collect(), false)
            }
        };
        for pos in 0..self.n {
            let c = self.cell(b, layer, pos);
            if vals[c].is_none() {
                vals[c] = Some(u[pos]);
                prop.touch(c);
            }
        }
        Ok((polar_transform(&u)?, unresolved, zero))
    }

    /// Receiver 1 decoder (forward).
    pub fn decode_receiver1(&self, y1: &[Vec<usize>], t: &ChainTransmission, keys: &KeyRing) -> Result<DecodeOutcome> {
        self.decode(1, y1, &t.side_cipher[0], keys, DecodeMode::Sc)
    }

    /// Receiver 2 decoder (backward).
    pub fn decode_receiver2(&self, y2: &[Vec<usize>], t: &ChainTransmission, keys: &KeyRing) -> Result<DecodeOutcome> {
        self.decode(2, y2, &t.side_cipher[1], keys, DecodeMode::Sc)
    }

    /// Total shared key bits.
    pub fn total_key_bits(&self) -> usize {
        self.key_lengths.values().sum()
    }
}

/// How undetermined cells are decided.
#[derive(Debug, Clone, Copy)]
pub enum DecodeMode<'a> {
    /// Successive-cancellation decisions.
    Sc,
    /// Undetermined cells take their true values (structural checks).
    Genie(&'a ChainTransmission),
}

/// Result of one receiver's decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub receiver: u8,
    /// Estimates of the receiver's message classes.
    pub messages: MessageSet,
    /// Cells outside the decodable sets left to SC decisions (0 for a sound plan).
    pub unresolved: usize,
    /// Whether SC met a zero-probability conditioning event.
    pub zero_evidence: bool,
}

struct Propagator<'a> {
    rels: &'a [(Vec<usize>, Vec<KeyRef>)],
    adj: &'a [Vec<usize>],
    queue: VecDeque<usize>,
}

impl Propagator<'_> {
    fn touch(&mut self, c: usize) {
        self.queue.extend(self.adj[c].iter().copied());
    }

    fn run(&mut self, vals: &mut [Option<u8>], keys: &KeyRing) -> Result<()> {
        while let Some(ri) = self.queue.pop_front() {
            let (cells, ks) = &self.rels[ri];
            let mut unknown = None;
            let mut count = 0;
            let mut acc = 0u8;
            for &c in cells {
                match vals[c] {
                    Some(v) => acc ^= v,
                    None => {
                        count += 1;
                        unknown = Some(c);
                    }
                }
            }
            if count != 1 {
                continue;
            }
            for &kr in ks {
                acc ^= keys.bit(kr)?;
            }
            let c = unknown.expect("one unknown");
            vals[c] = Some(acc);
            self.touch(c);
        }
        Ok(())
    }
}
