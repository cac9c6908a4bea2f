//! Index-set system of the chained construction.
//!
//! Turns entropy profiles into
//!
//! * thresholded H/L sets per layer ([`threshold_sets`], [`SetSystem`]),
//! * the ten-cell partition of `H_V` into `G0,G1,G2,G12` and `C0,C1,C2,C12`
//!   ([`partition_inner`]),
//! * the case label A–F ([`classify_case`]),
//! * the inner-layer chaining plan ([`build_plan`]) and the two outer-layer
//!   set families ([`build_outer_plan`]),
//! * and the complete design of one corner point ([`design`]).
//!
//! Indices are 0-based throughout. "Any subset of" is resolved as
//! lowest-index-first, so plans are a pure function of the profiles.
//!
//! ## Inner-layer bookkeeping
//!
//! Three sequences of every block are repeated into neighbouring blocks:
//! `Θ = A[C1]` (needed by receiver 1), `Ψ = A[C2]` (needed by receiver 2)
//! and `Γ = A[C12]` (needed by both). Each is split in three consecutive
//! parts whose sizes are derived from the realized R-sets:
//!
//! | sequence | part 1 → | part 2 → | part 3 → |
//! |---|---|---|---|
//! | `Ψ_{i−1}` | `R2` | `R12′` (⊕ `Θ_{i+1}`) | `Δ_(2)` |
//! | `Γ_{i−1}` | `R12` (⊕ `Γ_{i+1}`) | `R2′` | `Δ_(2)` |
//! | `Θ_{i+1}` | `R1` | `R12′` | `Δ_(1)` |
//! | `Γ_{i+1}` | `R12` | `R1′` | `Δ_(1)` |
//!
//! `Δ_(1)`, `Π_(1)` travel to receiver 1 inside outer layer `T1` of the
//! previous block; `Δ_(2)` travels to receiver 2 inside `T2` of the next block.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dms_model::{classify_situation, information_quantities, InfoReport, JointModel, Situation, SituationKind, Var};
use crate::error::{Error, Result};
use crate::polar_core::{entropy_profiles, CodeConfig, EntropyProfile, LayerSpec};

// ---------------------------------------------------------------------------
// Index sets
// ---------------------------------------------------------------------------

/// A subset of `{0, …, n−1}` stored as a membership mask.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    mask: Vec<bool>,
}

impl IndexSet {
    /// Empty subset of `[0, n)`.
    pub fn empty(n: usize) -> Self {
        IndexSet { mask: vec![false; n] }
    }

    /// The whole range `[0, n)`.
    pub fn full(n: usize) -> Self {
        IndexSet { mask: vec![true; n] }
    }

    /// Subset containing the given indices.
    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in idx {
            s.mask[i] = true;
        }
        s
    }

    /// Subset selected by a predicate.
    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        IndexSet { mask: (0..n).map(f).collect() }
    }

    /// Universe size `n`.
    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    /// Membership test.
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// Cardinality.
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// True when no index is a member.
    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    /// Members in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Members as a sorted vector.
    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// `self ∪ other`.
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect() }
    }

    /// `self ∩ other`.
    pub fn inter(&self, other: &IndexSet) -> IndexSet {
        IndexSet { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect() }
    }

    /// `self ∖ other`.
    pub fn minus(&self, other: &IndexSet) -> IndexSet {
        IndexSet { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && !*b).collect() }
    }

    /// Complement within `[0, n)`.
    pub fn complement(&self) -> IndexSet {
        IndexSet { mask: self.mask.iter().map(|b| !b).collect() }
    }

    /// The `k` lowest members (`k ≤ len`).
    pub fn lowest(&self, k: usize) -> IndexSet {
        IndexSet::from_indices(self.universe(), self.iter().take(k))
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    /// `self ∩ other = ∅`.
    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !(*a && *b))
    }

    /// Union of several sets.
    pub fn union_all<'a>(n: usize, sets: impl IntoIterator<Item = &'a IndexSet>) -> IndexSet {
        sets.into_iter().fold(IndexSet::empty(n), |acc, s| acc.union(s))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.iter().map(|i| i.to_string()).collect();
        f.write_str(&v.join(" "))
    }
}

/// Thresholded sets of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub layer: LayerSpec,
    /// `{j : h[j] ≥ 1 − δ}`.
    pub h: IndexSet,
    /// `{j : h[j] ≤ δ}`.
    pub l: IndexSet,
    pub delta: f64,
    /// Fraction of indices in neither set.
    pub remainder_fraction: f64,
}

/// Threshold a profile at `δ`.
pub fn threshold_sets(profile: &EntropyProfile, delta: f64) -> IndexSets {
    let n = profile.values.len();
    let h = IndexSet::from_fn(n, |j| profile.values[j] >= 1.0 - delta);
    let l = IndexSet::from_fn(n, |j| profile.values[j] <= delta && !h.contains(j));
    let remainder = n - h.len() - l.len();
    IndexSets {
        layer: profile.layer.clone(),
        h,
        l,
        delta,
        remainder_fraction: remainder as f64 / n.max(1) as f64,
    }
}

// ---------------------------------------------------------------------------
// Set system of one corner
// ---------------------------------------------------------------------------

/// Layers whose profiles a corner-`k` design needs (normalized labels).
pub fn required_layers(k: u8) -> Vec<LayerSpec> {
    use Var::*;
    let (uk, ukb, yk, ykb) = (Var::u(k), Var::u(3 - k), Var::y(k), Var::y(3 - k));
    vec![
        LayerSpec::new(V, &[]),
        LayerSpec::new(V, &[Z]),
        LayerSpec::new(V, &[Y1]),
        LayerSpec::new(V, &[Y2]),
        LayerSpec::new(uk, &[V]),
        LayerSpec::new(uk, &[V, Z]),
        LayerSpec::new(uk, &[V, yk]),
        LayerSpec::new(ukb, &[V]),
        LayerSpec::new(ukb, &[V, uk]),
        LayerSpec::new(ukb, &[V, uk, Z]),
        LayerSpec::new(ukb, &[V, ykb]),
    ]
}

/// All H/L sets of a corner-`k` design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSystem {
    pub n: usize,
    pub corner: u8,
    pub delta: f64,
    pub h_v: IndexSet,
    pub l_v: IndexSet,
    pub h_v_z: IndexSet,
    /// `L_{V|Y1}`, `L_{V|Y2}`.
    pub l_v_y: [IndexSet; 2],
    pub h_uk_v: IndexSet,
    pub l_uk_v: IndexSet,
    pub h_uk_vz: IndexSet,
    pub l_uk_vyk: IndexSet,
    pub h_ukb_v: IndexSet,
    pub h_ukb_vuk: IndexSet,
    pub l_ukb_vuk: IndexSet,
    pub h_ukb_vukz: IndexSet,
    pub l_ukb_vykb: IndexSet,
    /// Largest unpolarized fraction over all layers.
    pub max_remainder_fraction: f64,
    /// Nesting repairs applied (empty for exact profiles).
    pub notes: Vec<String>,
}

impl SetSystem {
    /// Threshold the profiles of [`required_layers`] and enforce nestings.
    pub fn from_profiles(k: u8, profiles: &[EntropyProfile], delta: f64) -> Result<Self> {
        let layers = required_layers(k);
        let mut sets = Vec::with_capacity(layers.len());
        for layer in &layers {
            let p = profiles
                .iter()
                .find(|p| &p.layer == layer)
                .ok_or_else(|| Error::PlanMismatch(format!("missing profile for layer {layer}")))?;
            sets.push(threshold_sets(p, delta));
        }
        let n = sets[0].h.universe();
        if sets.iter().any(|s| s.h.universe() != n) {
            return Err(Error::PlanMismatch("profiles have different block lengths".into()));
        }
        let max_rem = sets.iter().map(|s| s.remainder_fraction).fold(0.0, f64::max);
        let mut notes = Vec::new();
        let mut narrow = |name: &str, inner: &IndexSet, outer: &IndexSet| -> IndexSet {
            if !inner.is_subset(outer) {
                notes.push(format!("nesting repaired: {name} (removed {})", inner.minus(outer)));
            }
            inner.inter(outer)
        };
        let h_v = sets[0].h.clone();
        let h_v_z = narrow("H_V|Z ⊆ H_V", &sets[1].h, &h_v);
        let h_uk_v = sets[4].h.clone();
        let h_uk_vz = narrow("H_Uk|VZ ⊆ H_Uk|V", &sets[5].h, &h_uk_v);
        let h_ukb_v = sets[7].h.clone();
        let h_ukb_vuk = narrow("H_Ukb|VUk ⊆ H_Ukb|V", &sets[8].h, &h_ukb_v);
        let h_ukb_vukz = narrow("H_Ukb|VUkZ ⊆ H_Ukb|VUk", &sets[9].h, &h_ukb_vuk);
        let mut widen = |name: &str, small: &IndexSet, big: &IndexSet, forbidden: &IndexSet| -> IndexSet {
            let add = small.minus(big).minus(forbidden);
            if !add.is_empty() {
                notes.push(format!("nesting repaired: {name} (added {add})"));
            }
            big.union(&add)
        };
        let l_v = sets[0].l.clone();
        let l_v_y1 = widen("L_V ⊆ L_V|Y1", &l_v, &sets[2].l, &h_v);
        let l_v_y2 = widen("L_V ⊆ L_V|Y2", &l_v, &sets[3].l, &h_v);
        let l_uk_v = sets[4].l.clone();
        let l_uk_vyk = widen("L_Uk|V ⊆ L_Uk|VYk", &l_uk_v, &sets[6].l, &h_uk_v);
        Ok(SetSystem {
            n,
            corner: k,
            delta,
            h_v,
            l_v,
            h_v_z,
            l_v_y: [l_v_y1, l_v_y2],
            h_uk_v,
            l_uk_v,
            h_uk_vz,
            l_uk_vyk,
            h_ukb_v,
            h_ukb_vuk,
            l_ukb_vuk: sets[8].l.clone(),
            h_ukb_vukz,
            l_ukb_vykb: sets[10].l.clone(),
            max_remainder_fraction: max_rem,
            notes,
        })
    }
}

// ---------------------------------------------------------------------------
// Inner partition and cases
// ---------------------------------------------------------------------------

/// Partition of `H_V` into `G = H_{V|Z}` and `C = H_V ∖ G`, each split by
/// membership in `L_{V|Y1}` and `L_{V|Y2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerPartition {
    pub g: IndexSet,
    pub c: IndexSet,
    /// In both `L_{V|Y1}` and `L_{V|Y2}`.
    pub g0: IndexSet,
    /// In `L_{V|Y2}` only (decodable by receiver 2, not by receiver 1).
    pub g1: IndexSet,
    /// In `L_{V|Y1}` only.
    pub g2: IndexSet,
    /// In neither.
    pub g12: IndexSet,
    pub c0: IndexSet,
    pub c1: IndexSet,
    pub c2: IndexSet,
    pub c12: IndexSet,
}

/// Cell sizes of an [`InnerPartition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSizes {
    pub g0: usize,
    pub g1: usize,
    pub g2: usize,
    pub g12: usize,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    pub c12: usize,
}

impl PartitionSizes {
    /// `(|G1|−|C2|, |G2|−|C1|, |C12|−|G0|)`.
    pub fn chain(&self) -> (i64, i64, i64) {
        (
            self.g1 as i64 - self.c2 as i64,
            self.g2 as i64 - self.c1 as i64,
            self.c12 as i64 - self.g0 as i64,
        )
    }
}

/// Compute the ten cells from `H_V`, `H_{V|Z}`, `L_{V|Y1}`, `L_{V|Y2}`.
pub fn partition_inner(h_v: &IndexSet, h_v_z: &IndexSet, l_y1: &IndexSet, l_y2: &IndexSet) -> InnerPartition {
    let g = h_v_z.inter(h_v);
    let c = h_v.minus(&g);
    let cell = |s: &IndexSet, in1: bool, in2: bool| {
        IndexSet::from_fn(s.universe(), |j| s.contains(j) && l_y1.contains(j) == in1 && l_y2.contains(j) == in2)
    };
    InnerPartition {
        g0: cell(&g, true, true),
        g1: cell(&g, false, true),
        g2: cell(&g, true, false),
        g12: cell(&g, false, false),
        c0: cell(&c, true, true),
        c1: cell(&c, false, true),
        c2: cell(&c, true, false),
        c12: cell(&c, false, false),
        g,
        c,
    }
}

impl InnerPartition {
    /// Cell sizes.
    pub fn sizes(&self) -> PartitionSizes {
        PartitionSizes {
            g0: self.g0.len(),
            g1: self.g1.len(),
            g2: self.g2.len(),
            g12: self.g12.len(),
            c0: self.c0.len(),
            c1: self.c1.len(),
            c2: self.c2.len(),
            c12: self.c12.len(),
        }
    }
}

/// The six size patterns of the inner layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    /// `|G1|≥|C2|, |G2|≥|C1|, |G0|≥|C12|`.
    A,
    /// `|G1|≥|C2|, |G2|≥|C1|, |G0|<|C12|`.
    B,
    /// `|G1|≥|C2|, |G2|<|C1|, |G0|≥|C12|`.
    C,
    /// `|G1|<|C2|, |G2|<|C1|, |G0|≥|C12|`.
    D,
    /// `|G1|≥|C2|, |G2|<|C1|, |G0|<|C12|`.
    E,
    /// `|G1|<|C2|, |G2|<|C1|, |G0|<|C12|`.
    F,
}

impl Case {
    /// Parse a single letter.
    pub fn parse(s: &str) -> Result<Case> {
        Ok(match s.trim() {
            "A" => Case::A,
            "B" => Case::B,
            "C" => Case::C,
            "D" => Case::D,
            "E" => Case::E,
            "F" => Case::F,
            o => return Err(Error::Parse(format!("unknown case `{o}`"))),
        })
    }

    /// Situations under which the case can occur.
    pub fn admissible(self) -> &'static [SituationKind] {
        use SituationKind::*;
        match self {
            Case::A => &[S1],
            Case::B | Case::D => &[S1, S2, S3],
            Case::C => &[S1, S2],
            Case::E => &[S2, S3],
            Case::F => &[S3],
        }
    }
}

/// Result of [`classify_case`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case: Case,
    pub situation: SituationKind,
    /// BoundaryTie notes (compared sizes equal, resolved as `≥`).
    pub notes: Vec<String>,
}

/// Situation implied by the set sizes alone (`None` when `a < b`, i.e. the
/// sizes contradict the receiver orientation).
pub fn size_situation(sizes: &PartitionSizes) -> Option<SituationKind> {
    let (a, b, c) = sizes.chain();
    if a < b {
        None
    } else if b >= c {
        Some(SituationKind::S1)
    } else if a >= c {
        Some(SituationKind::S2)
    } else {
        Some(SituationKind::S3)
    }
}

/// Classify the size pattern and check it against the situation's chain
/// `(S1: a≥b≥c, S2: a≥c>b, S3: c>a≥b)`.
pub fn classify_case(sizes: &PartitionSizes, situation: SituationKind) -> Result<CaseOutcome> {
    let mut notes = Vec::new();
    let (a, b, c) = sizes.chain();
    for (name, d) in [("|G1| = |C2|", a), ("|G2| = |C1|", b), ("|G0| = |C12|", -c)] {
        if d == 0 {
            notes.push(format!("BoundaryTie: {name}, resolved as ≥"));
        }
    }
    let (p1, p2, p0) = (a >= 0, b >= 0, c <= 0);
    let case = match (p1, p2, p0) {
        (true, true, true) => Case::A,
        (true, true, false) => Case::B,
        (true, false, true) => Case::C,
        (false, false, true) => Case::D,
        (true, false, false) => Case::E,
        (false, false, false) => Case::F,
        (false, true, _) => {
            return Err(Error::InadmissibleCombination(format!(
                "|G1|<|C2| with |G2|≥|C1| (a={a}, b={b}) contradicts I(V;Y1) ≤ I(V;Y2)"
            )))
        }
    };
    let chain_ok = match situation {
        SituationKind::S1 => a >= b && b >= c,
        SituationKind::S2 => a >= c && c > b,
        SituationKind::S3 => c > a && a >= b,
    };
    if !chain_ok || !case.admissible().contains(&situation) {
        return Err(Error::InadmissibleCombination(format!(
            "case {case:?} with sizes (a,b,c)=({a},{b},{c}) is not admissible under {situation:?}"
        )));
    }
    for n in &notes {
        log::info!("{n}");
    }
    Ok(CaseOutcome { case, situation, notes })
}

// ---------------------------------------------------------------------------
// Chaining plan
// ---------------------------------------------------------------------------

/// Three consecutive part lengths of a repeated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
}

impl Split {
    fn derive(total: usize, p1: usize, p2: usize, what: &str, relax: bool, notes: &mut Vec<String>) -> Result<(Split, usize, usize)> {
        if p1 + p2 <= total {
            return Ok((Split { p1, p2, p3: total - p1 - p2 }, p1, p2));
        }
        if !relax {
            return Err(Error::InfeasiblePlan(format!(
                "{what}: parts {p1}+{p2} exceed sequence length {total}"
            )));
        }
        let q1 = p1.min(total);
        let q2 = (total - q1).min(p2);
        notes.push(format!("relax: {what} parts truncated from ({p1},{p2}) to ({q1},{q2})"));
        Ok((Split { p1: q1, p2: q2, p3: total - q1 - q2 }, q1, q2))
    }
}

/// Inner-layer chaining plan of one corner point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingPlan {
    pub n: usize,
    pub corner: u8,
    pub case: Case,
    pub situation: SituationKind,
    pub partition: InnerPartition,
    pub r1: IndexSet,
    pub r1p: IndexSet,
    pub r2: IndexSet,
    pub r2p: IndexSet,
    pub r12: IndexSet,
    pub r12p: IndexSet,
    pub rs: IndexSet,
    pub i_set: IndexSet,
    pub r_lambda: IndexSet,
    /// `Π_(2)` positions `G2 ∩ I` that are repeated into `R_S`.
    pub pi2: IndexSet,
    /// `Π_(1)` positions `G1 ∩ I`.
    pub pi1: IndexSet,
    /// Frozen (public, zero) positions introduced by relax mode.
    pub frozen: IndexSet,
    pub psi: Split,
    pub theta: Split,
    pub gamma_prev: Split,
    pub gamma_next: Split,
    /// Relax-mode notes (empty in strict mode).
    pub notes: Vec<String>,
}

/// Where one cell of a repeated inner sequence lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqCell {
    /// Position in `A`.
    pub pos: usize,
    /// Which sequence it belongs to.
    pub seq: SeqKind,
    /// Index inside the sequence (= key index when barred).
    pub index: usize,
}

/// The three repeated inner sequences and `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeqKind {
    Theta,
    Psi,
    Gamma,
    Pi1,
}

impl ChainingPlan {
    fn seq_cells(&self, set: &IndexSet, seq: SeqKind, from: usize, len: usize) -> Vec<SeqCell> {
        set.iter()
            .enumerate()
            .skip(from)
            .take(len)
            .map(|(index, pos)| SeqCell { pos, seq, index })
            .collect()
    }

    /// Part `p ∈ {1,2,3}` of `Θ = A[C1]`.
    pub fn theta_part(&self, p: usize) -> Vec<SeqCell> {
        let s = self.theta;
        let (from, len) = part_range(s, p);
        self.seq_cells(&self.partition.c1, SeqKind::Theta, from, len)
    }

    /// Part `p` of `Ψ = A[C2]`.
    pub fn psi_part(&self, p: usize) -> Vec<SeqCell> {
        let (from, len) = part_range(self.psi, p);
        self.seq_cells(&self.partition.c2, SeqKind::Psi, from, len)
    }

    /// Part `p` of `Γ = A[C12]` split as a previous-block sequence.
    pub fn gamma_prev_part(&self, p: usize) -> Vec<SeqCell> {
        let (from, len) = part_range(self.gamma_prev, p);
        self.seq_cells(&self.partition.c12, SeqKind::Gamma, from, len)
    }

    /// Part `p` of `Γ = A[C12]` split as a next-block sequence.
    pub fn gamma_next_part(&self, p: usize) -> Vec<SeqCell> {
        let (from, len) = part_range(self.gamma_next, p);
        self.seq_cells(&self.partition.c12, SeqKind::Gamma, from, len)
    }

    /// `Δ_(1) = [Θ part 3, Γ(next) part 3]` (cells of the source block).
    pub fn delta1(&self) -> Vec<SeqCell> {
        let mut v = self.theta_part(3);
        v.extend(self.gamma_next_part(3));
        v
    }

    /// `Δ_(2) = [Ψ part 3, Γ(prev) part 3]`.
    pub fn delta2(&self) -> Vec<SeqCell> {
        let mut v = self.psi_part(3);
        v.extend(self.gamma_prev_part(3));
        v
    }

    /// `Π_(1)` cells.
    pub fn pi1_cells(&self) -> Vec<SeqCell> {
        self.seq_cells(&self.pi1, SeqKind::Pi1, 0, usize::MAX)
    }

    /// Payload carried to receiver 1 in layer `T1`: `[Π_(1), Δ_(1)]`.
    pub fn payload_rx1(&self) -> Vec<SeqCell> {
        let mut v = self.pi1_cells();
        v.extend(self.delta1());
        v
    }

    /// Whether the next-block sequences (`Θ`, `Γ` as next) are keyed.
    pub fn next_barred(&self) -> bool {
        self.corner == 1
    }

    /// Whether the previous-block sequences (`Ψ`, `Γ` as previous) are keyed.
    pub fn prev_barred(&self) -> bool {
        self.corner == 2
    }

    /// Confidential message area of the inner layer in block `i` (1-based).
    pub fn message_area(&self, i: usize, blocks: usize) -> IndexSet {
        let p = &self.partition;
        let mut s = self.i_set.clone();
        if i == 1 {
            s = s.union(&p.g1).union(&p.g12);
        }
        if i == blocks {
            s = s.union(&p.g2);
        }
        s.minus(&self.frozen)
    }

    /// Every named set, for serialization and audits.
    pub fn named_sets(&self) -> Vec<(&'static str, &IndexSet)> {
        let p = &self.partition;
        vec![
            ("G", &p.g),
            ("C", &p.c),
            ("G0", &p.g0),
            ("G1", &p.g1),
            ("G2", &p.g2),
            ("G12", &p.g12),
            ("C0", &p.c0),
            ("C1", &p.c1),
            ("C2", &p.c2),
            ("C12", &p.c12),
            ("R1", &self.r1),
            ("R1p", &self.r1p),
            ("R2", &self.r2),
            ("R2p", &self.r2p),
            ("R12", &self.r12),
            ("R12p", &self.r12p),
            ("RS", &self.rs),
            ("I", &self.i_set),
            ("RLambda", &self.r_lambda),
            ("Pi2", &self.pi2),
            ("Pi1", &self.pi1),
            ("FrozenV", &self.frozen),
        ]
    }
}

fn part_range(s: Split, p: usize) -> (usize, usize) {
    match p {
        1 => (0, s.p1),
        2 => (s.p1, s.p2),
        _ => (s.p1 + s.p2, s.p3),
    }
}

struct Picker<'a> {
    relax: bool,
    notes: &'a mut Vec<String>,
}

impl Picker<'_> {
    /// Lowest `size` members of `avail`.
    fn take(&mut self, avail: &IndexSet, size: i64, what: &str) -> Result<IndexSet> {
        if size < 0 {
            if self.relax {
                self.notes.push(format!("relax: {what} requested negative size {size}, using 0"));
                return Ok(IndexSet::empty(avail.universe()));
            }
            return Err(Error::InfeasiblePlan(format!("{what}: required size {size} is negative")));
        }
        let size = size as usize;
        if size > avail.len() {
            if self.relax {
                self.notes.push(format!("relax: {what} truncated from {size} to {}", avail.len()));
                return Ok(avail.clone());
            }
            return Err(Error::InfeasiblePlan(format!(
                "{what}: required size {size} exceeds the {} available indices",
                avail.len()
            )));
        }
        Ok(avail.lowest(size))
    }
}

/// Build the inner-layer plan for `(case, situation, corner k)`.
pub fn build_plan(partition: &InnerPartition, case: Case, situation: SituationKind, k: u8, relax: bool) -> Result<ChainingPlan> {
    if k != 1 && k != 2 {
        return Err(Error::InvalidConfig(format!("corner must be 1 or 2, got {k}")));
    }
    if !case.admissible().contains(&situation) {
        return Err(Error::InadmissibleCombination(format!("case {case:?} under {situation:?}")));
    }
    use SituationKind::*;
    let p = partition;
    let n = p.g.universe();
    let sz = p.sizes();
    let (g0, g1, g2, c1, c2, c12) = (sz.g0 as i64, sz.g1 as i64, sz.g2 as i64, sz.c1 as i64, sz.c2 as i64, sz.c12 as i64);
    let cc = c12 - g0;
    let empty = IndexSet::empty(n);
    let mut notes = Vec::new();
    let mut pk = Picker { relax, notes: &mut notes };
    let (mut r1p, mut r2p, mut r12p) = (empty.clone(), empty.clone(), empty.clone());
    let (mut r1, mut r2, mut r12);
    match case {
        Case::A => {
            r1 = pk.take(&p.g2, c1, "R1 ⊆ G2")?;
            r2 = pk.take(&p.g1, c2, "R2 ⊆ G1")?;
            r12 = pk.take(&p.g0, c12, "R12 ⊆ G0")?;
        }
        Case::B => {
            r1 = pk.take(&p.g2, c1, "R1 ⊆ G2")?;
            r2 = pk.take(&p.g1, c2, "R2 ⊆ G1")?;
            r12 = p.g0.clone();
            let rest2 = p.g2.minus(&r1);
            let rest1 = p.g1.minus(&r2);
            match (situation, k) {
                (S3, _) => {
                    r1p = rest2;
                    r2p = rest1;
                }
                (S1, 1) => {
                    r1p = pk.take(&rest2, cc, "R1' ⊆ G2∖R1")?;
                    r2p = pk.take(&rest1, cc, "R2' ⊆ G1∖R2")?;
                }
                (S2, 1) => {
                    r1p = rest2;
                    r2p = pk.take(&rest1, cc, "R2' ⊆ G1∖R2")?;
                }
                _ => {
                    r2p = pk.take(&rest1, cc, "R2' ⊆ G1∖R2")?;
                }
            }
        }
        Case::C => {
            r12 = pk.take(&p.g0, c12, "R12 ⊆ G0")?;
            r2 = pk.take(&p.g1, c2, "R2 ⊆ G1")?;
            let rest0 = p.g0.minus(&r12);
            r1 = match (situation, k) {
                (S1, 1) => p.g2.union(&pk.take(&rest0, c1 - g2, "R1 ∖ G2 ⊆ G0∖R12")?),
                (S2, 1) => p.g2.union(&rest0),
                _ => p.g2.clone(),
            };
        }
        Case::D => {
            r2 = p.g1.clone();
            r12 = pk.take(&p.g0, c12, "R12 ⊆ G0")?;
            let rest0 = p.g0.minus(&r12);
            if situation == S3 {
                r12p = rest0;
                r1 = p.g2.clone();
            } else {
                r12p = pk.take(&rest0, c2 - g1, "R12' ⊆ G0∖R12")?;
                let rest00 = rest0.minus(&r12p);
                r1 = match (situation, k) {
                    (S1, 1) => p.g2.union(&pk.take(&rest00, (c1 - g2) - (c2 - g1), "R1 ∖ G2 ⊆ G0∖(R12∪R12')")?),
                    (S2, 1) => p.g2.union(&rest00),
                    _ => p.g2.clone(),
                };
            }
        }
        Case::E => {
            r1 = p.g2.clone();
            r2 = pk.take(&p.g1, c2, "R2 ⊆ G1")?;
            r12 = p.g0.clone();
            let rest1 = p.g1.minus(&r2);
            r2p = if situation == S3 { rest1 } else { pk.take(&rest1, cc, "R2' ⊆ G1∖R2")? };
        }
        Case::F => {
            r12 = p.g0.clone();
            r1 = p.g2.clone();
            r2 = p.g1.clone();
        }
    }
    // Segment splits from the realized sizes.
    let (psi, _, _) = Split::derive(sz.c2, r2.len(), r12p.len(), "Ψ = (R2, R12', Δ2)", relax, pk.notes)?;
    let (theta, _, _) = Split::derive(sz.c1, r1.len(), r12p.len(), "Θ = (R1, R12', Δ1)", relax, pk.notes)?;
    let (gamma_prev, _, _) = Split::derive(sz.c12, r12.len(), r2p.len(), "Γ(prev) = (R12, R2', Δ2)", relax, pk.notes)?;
    let (gamma_next, _, _) = Split::derive(sz.c12, r12.len(), r1p.len(), "Γ(next) = (R12, R1', Δ1)", relax, pk.notes)?;
    // Relax: realized R-sets shrink to the part sizes actually filled.
    let shrink = |s: &IndexSet, keep: usize| s.lowest(keep);
    if relax {
        r2 = shrink(&r2, psi.p1);
        r1 = shrink(&r1, theta.p1);
        r12 = shrink(&r12, gamma_prev.p1.min(gamma_next.p1));
        r12p = shrink(&r12p, psi.p2.min(theta.p2));
        r2p = shrink(&r2p, gamma_prev.p2);
        r1p = shrink(&r1p, gamma_next.p2);
    }
    let all_r = IndexSet::union_all(n, [&r1, &r1p, &r2, &r2p, &r12, &r12p]);
    let pi2_full = p.g2.minus(&all_r);
    let rs_room = p.g1.minus(&all_r);
    let rs = pk.take(&rs_room, pi2_full.len() as i64, "R_S ⊆ G1∖(R2∪R2')")?;
    let pi2 = pi2_full.lowest(rs.len());
    let mut frozen = pi2_full.minus(&pi2);
    let (i_set, r_lambda) = if k == 1 {
        let i_set = p.g0.union(&p.g2).minus(&all_r);
        let r_lambda = p.g12.union(&p.g1.minus(&all_r).minus(&rs));
        (i_set, r_lambda)
    } else {
        let r_lambda = p.g12.clone();
        let i_set = p.g.minus(&all_r).minus(&rs).minus(&r_lambda);
        (i_set, r_lambda)
    };
    let i_set = i_set.minus(&frozen);
    let pi1 = p.g1.inter(&i_set);
    frozen = frozen.inter(&p.g);
    Ok(ChainingPlan {
        n,
        corner: k,
        case,
        situation,
        partition: partition.clone(),
        r1,
        r1p,
        r2,
        r2p,
        r12,
        r12p,
        rs,
        i_set,
        r_lambda,
        pi2,
        pi1,
        frozen,
        psi,
        theta,
        gamma_prev,
        gamma_next,
        notes,
    })
}

/// Check the summary size identities of a strict plan; returns violations.
pub fn summary_violations(plan: &ChainingPlan) -> Vec<String> {
    use SituationKind::*;
    let s = plan.partition.sizes();
    let (g0, g1, g2, c1, c2, c12) = (s.g0 as i64, s.g1 as i64, s.g2 as i64, s.c1 as i64, s.c2 as i64, s.c12 as i64);
    let i = plan.i_set.len() as i64;
    let pi1 = plan.pi1.len() as i64;
    let d1 = plan.delta1().len() as i64;
    let d2 = plan.delta2().len() as i64;
    let mut v = Vec::new();
    let mut want = |name: &str, got: i64, expect: i64| {
        if got != expect {
            v.push(format!("{name}: got {got}, expected {expect}"));
        }
    };
    want("|R_S| = |G2∖(R1∪R1')|", plan.rs.len() as i64, plan.partition.g2.minus(&plan.r1.union(&plan.r1p)).len() as i64);
    match (plan.situation, plan.corner) {
        (S1, 1) => {
            want("|I|", i, g0 + g2 - c1 - c12);
            want("|Π1|", pi1, 0);
            want("|Δ1|", d1, 0);
            want("|Δ2|", d2, 0);
        }
        (S1 | S2, 2) => {
            want("|I|", i, g0 + g1 - c2 - c12);
            want("|Π1|+|Δ1|", pi1 + d1, g1 + c1 - g2 - c2);
            want("|Δ2|", d2, 0);
        }
        (S2, 1) => {
            want("|I|", i, 0);
            want("|Π1|", pi1, 0);
            want("|Δ1|", d1, c1 + c12 - g0 - g2);
            want("|Δ2|", d2, 0);
        }
        _ => {
            want("|I|", i, 0);
            want("|Π1|", pi1, 0);
            want("|Δ1|", d1, c1 + c12 - g0 - g2);
            want("|Δ2|", d2, c2 + c12 - g0 - g1);
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Outer plan
// ---------------------------------------------------------------------------

/// Set families of the two outer layers for corner `k`.
///
/// Layer `k` is `T_k` (receiver `k`'s auxiliary), layer `k̄` is `T_k̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterPlan {
    pub corner: u8,
    // -- layer k --
    /// `H_{Uk|V}`.
    pub hk: IndexSet,
    /// `L_{Uk|V}` (deterministic SC fill).
    pub lk_v: IndexSet,
    /// `L_{Uk|VYk}` (decodable by receiver k).
    pub lk_y: IndexSet,
    pub f0: IndexSet,
    pub fk: IndexSet,
    pub j0: IndexSet,
    pub jk: IndexSet,
    pub dk: IndexSet,
    pub lk: IndexSet,
    /// `J_k` cells not repeated (relax only; frozen).
    pub frozen_k: IndexSet,
    // -- layer k̄ --
    /// `H_{Uk̄|V}`.
    pub hv: IndexSet,
    /// `H_{Uk̄|V Uk}`.
    pub hc: IndexSet,
    /// `L_{Uk̄|V Uk}` (deterministic SC fill).
    pub lc: IndexSet,
    /// `L_{Uk̄|V Yk̄}` (decodable by receiver k̄).
    pub ly: IndexSet,
    pub q0: IndexSet,
    pub qkb: IndexSet,
    pub b0: IndexSet,
    pub bkb: IndexSet,
    /// `(H_{Uk̄|VUk})^C ∩ H_{Uk̄|V} ∖ L_{Uk̄|VYk̄}`.
    pub oreg: IndexSet,
    pub o: IndexSet,
    pub nset: IndexSet,
    pub m: IndexSet,
    /// `B_k̄` cells not repeated (relax only; frozen).
    pub frozen_kb: IndexSet,
    /// `O`-region cells delivered as side information (relax only).
    pub o_overflow: IndexSet,
    /// Number of payload cells carried by `L_k` (tail beyond is frozen).
    pub lk_payload: usize,
    /// Number of payload cells carried by `M` (tail beyond is frozen).
    pub m_payload: usize,
    pub notes: Vec<String>,
}

impl OuterPlan {
    /// Every named set.
    pub fn named_sets(&self) -> Vec<(&'static str, &IndexSet)> {
        vec![
            ("Hk", &self.hk),
            ("LkV", &self.lk_v),
            ("LkY", &self.lk_y),
            ("F0", &self.f0),
            ("Fk", &self.fk),
            ("J0", &self.j0),
            ("Jk", &self.jk),
            ("Dk", &self.dk),
            ("Lk", &self.lk),
            ("FrozenK", &self.frozen_k),
            ("Hv", &self.hv),
            ("Hc", &self.hc),
            ("Lc", &self.lc),
            ("Ly", &self.ly),
            ("Q0", &self.q0),
            ("Qkb", &self.qkb),
            ("B0", &self.b0),
            ("Bkb", &self.bkb),
            ("Oreg", &self.oreg),
            ("O", &self.o),
            ("N", &self.nset),
            ("M", &self.m),
            ("FrozenKb", &self.frozen_kb),
            ("OOverflow", &self.o_overflow),
        ]
    }

    /// `O`-region cells repeated through the `O` chain.
    pub fn oreg_chained(&self) -> IndexSet {
        self.oreg.minus(&self.o_overflow)
    }
}

/// Build the outer-layer sets; `payload_k` / `payload_kb` are the numbers of
/// inner cells carried by `L_k` and `M`.
pub fn build_outer_plan(sets: &SetSystem, plan: &ChainingPlan, relax: bool) -> Result<OuterPlan> {
    let k = plan.corner;
    let mut notes = Vec::new();
    let mut pk = Picker { relax, notes: &mut notes };
    // Layer k.
    let hk = sets.h_uk_v.clone();
    let hz = sets.h_uk_vz.inter(&hk);
    let ly_k = sets.l_uk_vyk.clone();
    let f0 = hz.inter(&ly_k);
    let fk = hz.minus(&ly_k);
    let j0 = hk.minus(&hz).inter(&ly_k);
    let jk = hk.minus(&hz).minus(&ly_k);
    let dk = pk.take(&f0, jk.len() as i64, "D_k ⊆ F0 with |J_k|")?;
    let frozen_k = jk.minus(&jk.lowest(dk.len()));
    let payload_k = if k == 1 { plan.delta1().len() } else { plan.delta2().len() };
    let lk = pk.take(&f0.minus(&dk), payload_k as i64, "L_k ⊆ F0∖D_k")?;
    // Layer k̄.
    let hv = sets.h_ukb_v.clone();
    let hc = sets.h_ukb_vuk.inter(&hv);
    let hcz = sets.h_ukb_vukz.inter(&hc);
    let ly = sets.l_ukb_vykb.clone();
    let q0 = hcz.inter(&ly);
    let qkb = hcz.minus(&ly);
    let b0 = hc.minus(&hcz).inter(&ly);
    let bkb = hc.minus(&hcz).minus(&ly);
    let oreg = hv.minus(&hc).minus(&ly);
    let o = pk.take(&q0, oreg.len() as i64, "O ⊆ Q0 with |O-region|")?;
    let o_overflow = oreg.minus(&oreg.lowest(o.len()));
    let nset = pk.take(&q0.minus(&o), bkb.len() as i64, "N ⊆ Q0∖O with |B_k̄|")?;
    let frozen_kb = bkb.minus(&bkb.lowest(nset.len()));
    let payload_kb = if k == 1 { plan.delta2().len() } else { plan.payload_rx1().len() };
    let m = pk.take(&q0.minus(&o).minus(&nset), payload_kb as i64, "M ⊆ Q0∖(O∪N)")?;
    Ok(OuterPlan {
        corner: k,
        hk,
        lk_v: sets.l_uk_v.minus(&sets.h_uk_v),
        lk_y: ly_k,
        lk_payload: lk.len(),
        m_payload: m.len(),
        f0,
        fk,
        j0,
        jk,
        dk,
        lk,
        frozen_k,
        hv,
        lc: sets.l_ukb_vuk.minus(&hc),
        hc,
        ly,
        q0,
        qkb,
        b0,
        bkb,
        oreg,
        o,
        nset,
        m,
        frozen_kb,
        o_overflow,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Complete design
// ---------------------------------------------------------------------------

/// Everything needed to encode/decode one corner point.
#[derive(Debug, Clone)]
pub struct SchemeDesign {
    /// Receiver-normalized model (`I(V;Y1) ≤ I(V;Y2)`).
    pub model: JointModel,
    pub report: InfoReport,
    pub config: CodeConfig,
    /// Corner in normalized labels.
    pub corner: u8,
    /// Corner as requested by the caller (original labels).
    pub requested_corner: u8,
    /// Situation from mutual informations (with swap flag).
    pub mi_situation: Situation,
    /// Situation implied by the finite-n set sizes (used for the plan).
    pub situation: SituationKind,
    pub case: CaseOutcome,
    pub sets: SetSystem,
    pub plan: ChainingPlan,
    pub outer: OuterPlan,
    pub relax: bool,
    pub profiles: Vec<EntropyProfile>,
    pub notes: Vec<String>,
}

impl SchemeDesign {
    /// Whether receivers were exchanged internally.
    pub fn swapped(&self) -> bool {
        self.mi_situation.swapped
    }

    /// Receiver label in the caller's frame for a normalized receiver.
    pub fn external_receiver(&self, r: u8) -> u8 {
        if self.swapped() {
            3 - r
        } else {
            r
        }
    }
}

/// Design the scheme for `corner` (caller's receiver labels) with profiles
/// computed per `config`.
pub fn design(model: &JointModel, config: &CodeConfig, corner: u8, relax: bool) -> Result<SchemeDesign> {
    config.validate()?;
    if corner != 1 && corner != 2 {
        return Err(Error::InvalidConfig(format!("corner must be 1 or 2, got {corner}")));
    }
    let report0 = information_quantities(model);
    let mi_situation = classify_situation(&report0);
    let (model, k) = if mi_situation.swapped { (model.swapped(), 3 - corner) } else { (model.clone(), corner) };
    let profiles = entropy_profiles(&model, &required_layers(k), config)?;
    design_from_profiles(&model, config, k, corner, mi_situation, profiles, relax)
}

/// Design from precomputed profiles of the (already normalized) model.
pub fn design_from_profiles(
    model: &JointModel,
    config: &CodeConfig,
    k: u8,
    requested_corner: u8,
    mi_situation: Situation,
    profiles: Vec<EntropyProfile>,
    relax: bool,
) -> Result<SchemeDesign> {
    let report = information_quantities(model);
    let sets = SetSystem::from_profiles(k, &profiles, config.delta())?;
    let partition = partition_inner(&sets.h_v, &sets.h_v_z, &sets.l_v_y[0], &sets.l_v_y[1]);
    let sizes = partition.sizes();
    let mut notes = sets.notes.clone();
    notes.extend(mi_situation.notes.iter().cloned());
    let situation = size_situation(&sizes).ok_or_else(|| {
        Error::InadmissibleCombination(format!(
            "set sizes (a,b,c)={:?} contradict the receiver orientation I(V;Y1) ≤ I(V;Y2) at n={}",
            sizes.chain(),
            config.n
        ))
    })?;
    if situation != mi_situation.kind {
        let note = format!(
            "finite-n set sizes imply {situation:?} while mutual informations give {:?}; using {situation:?}",
            mi_situation.kind
        );
        log::info!("{note}");
        notes.push(note);
    }
    let case = classify_case(&sizes, situation)?;
    notes.extend(case.notes.iter().cloned());
    let plan = build_plan(&partition, case.case, situation, k, relax)?;
    let outer = build_outer_plan(&sets, &plan, relax)?;
    notes.extend(plan.notes.iter().cloned());
    notes.extend(outer.notes.iter().cloned());
    Ok(SchemeDesign {
        model: model.clone(),
        report,
        config: config.clone(),
        corner: k,
        requested_corner,
        mi_situation,
        situation,
        case,
        sets,
        plan,
        outer,
        relax,
        profiles,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

const PLAN_HEADER: &str = "polar-wtbc-plan v1";

/// Serialize both plans to the versioned text format.
pub fn plans_to_text(plan: &ChainingPlan, outer: &OuterPlan) -> String {
    let mut s = format!("{PLAN_HEADER}\n");
    s.push_str(&format!("n {}\ncorner {}\ncase {:?}\nsituation {:?}\n", plan.n, plan.corner, plan.case, plan.situation));
    for (name, sp) in [("psi", plan.psi), ("theta", plan.theta), ("gamma_prev", plan.gamma_prev), ("gamma_next", plan.gamma_next)] {
        s.push_str(&format!("split {name} {} {} {}\n", sp.p1, sp.p2, sp.p3));
    }
    s.push_str(&format!("payload {} {}\n", outer.lk_payload, outer.m_payload));
    for (name, set) in plan.named_sets() {
        s.push_str(&format!("inner {name}: {set}\n"));
    }
    for (name, set) in outer.named_sets() {
        s.push_str(&format!("outer {name}: {set}\n"));
    }
    s
}

/// Parse the text format back into both plans.
pub fn plans_from_text(text: &str) -> Result<(ChainingPlan, OuterPlan)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PLAN_HEADER) {
        return Err(Error::Parse(format!("plan must start with `{PLAN_HEADER}`")));
    }
    let mut scal: BTreeMap<String, String> = BTreeMap::new();
    let mut splits: BTreeMap<String, Split> = BTreeMap::new();
    let mut inner: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut outer: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let parse_idx = |rest: &str| -> Result<Vec<usize>> {
        rest.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad index `{t}`"))))
            .collect()
    };
    for line in lines.map(str::trim).filter(|l| !l.is_empty()) {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "inner" | "outer" => {
                let (name, idx) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("malformed set line `{line}`")))?;
                let target = if key == "inner" { &mut inner } else { &mut outer };
                target.insert(name.trim().to_string(), parse_idx(idx)?);
            }
            "split" => {
                let t: Vec<&str> = rest.split_whitespace().collect();
                if t.len() != 4 {
                    return Err(Error::Parse(format!("malformed split `{line}`")));
                }
                let num = |x: &str| x.parse::<usize>().map_err(|_| Error::Parse(format!("bad number `{x}`")));
                splits.insert(t[0].to_string(), Split { p1: num(t[1])?, p2: num(t[2])?, p3: num(t[3])? });
            }
            _ => {
                scal.insert(key.to_string(), rest.trim().to_string());
            }
        }
    }
    let n: usize = scal
        .get("n")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse("missing n".into()))?;
    let corner: u8 = scal
        .get("corner")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse("missing corner".into()))?;
    let case = Case::parse(scal.get("case").map(String::as_str).unwrap_or(""))?;
    let situation = match scal.get("situation").map(String::as_str) {
        Some("S1") => SituationKind::S1,
        Some("S2") => SituationKind::S2,
        Some("S3") => SituationKind::S3,
        other => return Err(Error::Parse(format!("bad situation {other:?}"))),
    };
    let payload: Vec<usize> = scal
        .get("payload")
        .map(|v| v.split_whitespace().filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    if payload.len() != 2 {
        return Err(Error::Parse("missing payload line".into()));
    }
    let get = |m: &BTreeMap<String, Vec<usize>>, name: &str| -> Result<IndexSet> {
        let v = m.get(name).ok_or_else(|| Error::Parse(format!("missing set {name}")))?;
        if v.iter().any(|&i| i >= n) {
            return Err(Error::Parse(format!("set {name} has an index ≥ n")));
        }
        Ok(IndexSet::from_indices(n, v.iter().copied()))
    };
    let split = |name: &str| splits.get(name).copied().ok_or_else(|| Error::Parse(format!("missing split {name}")));
    let partition = InnerPartition {
        g: get(&inner, "G")?,
        c: get(&inner, "C")?,
        g0: get(&inner, "G0")?,
        g1: get(&inner, "G1")?,
        g2: get(&inner, "G2")?,
        g12: get(&inner, "G12")?,
        c0: get(&inner, "C0")?,
        c1: get(&inner, "C1")?,
        c2: get(&inner, "C2")?,
        c12: get(&inner, "C12")?,
    };
    let plan = ChainingPlan {
        n,
        corner,
        case,
        situation,
        partition,
        r1: get(&inner, "R1")?,
        r1p: get(&inner, "R1p")?,
        r2: get(&inner, "R2")?,
        r2p: get(&inner, "R2p")?,
        r12: get(&inner, "R12")?,
        r12p: get(&inner, "R12p")?,
        rs: get(&inner, "RS")?,
        i_set: get(&inner, "I")?,
        r_lambda: get(&inner, "RLambda")?,
        pi2: get(&inner, "Pi2")?,
        pi1: get(&inner, "Pi1")?,
        frozen: get(&inner, "FrozenV")?,
        psi: split("psi")?,
        theta: split("theta")?,
        gamma_prev: split("gamma_prev")?,
        gamma_next: split("gamma_next")?,
        notes: Vec::new(),
    };
    let outer_plan = OuterPlan {
        corner,
        hk: get(&outer, "Hk")?,
        lk_v: get(&outer, "LkV")?,
        lk_y: get(&outer, "LkY")?,
        f0: get(&outer, "F0")?,
        fk: get(&outer, "Fk")?,
        j0: get(&outer, "J0")?,
        jk: get(&outer, "Jk")?,
        dk: get(&outer, "Dk")?,
        lk: get(&outer, "Lk")?,
        frozen_k: get(&outer, "FrozenK")?,
        hv: get(&outer, "Hv")?,
        hc: get(&outer, "Hc")?,
        lc: get(&outer, "Lc")?,
        ly: get(&outer, "Ly")?,
        q0: get(&outer, "Q0")?,
        qkb: get(&outer, "Qkb")?,
        b0: get(&outer, "B0")?,
        bkb: get(&outer, "Bkb")?,
        oreg: get(&outer, "Oreg")?,
        o: get(&outer, "O")?,
        nset: get(&outer, "N")?,
        m: get(&outer, "M")?,
        frozen_kb: get(&outer, "FrozenKb")?,
        o_overflow: get(&outer, "OOverflow")?,
        lk_payload: payload[0],
        m_payload: payload[1],
        notes: Vec::new(),
    };
    Ok((plan, outer_plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar_core::ProfileMethod;

    fn sizes(g0: usize, g1: usize, g2: usize, c1: usize, c2: usize, c12: usize) -> PartitionSizes {
        PartitionSizes { g0, g1, g2, g12: 0, c0: 0, c1, c2, c12 }
    }

    /// Partition with consecutive blocks of indices per cell.
    fn layout(s: PartitionSizes) -> InnerPartition {
        let cells = [s.g0, s.g1, s.g2, s.g12, s.c0, s.c1, s.c2, s.c12];
        let n = cells.iter().sum::<usize>().next_power_of_two().max(1);
        let mut start = 0;
        let mut sets = Vec::new();
        for &c in &cells {
            sets.push(IndexSet::from_indices(n, start..start + c));
            start += c;
        }
        let g = IndexSet::union_all(n, &sets[0..4]);
        let c = IndexSet::union_all(n, &sets[4..8]);
        InnerPartition {
            g,
            c,
            g0: sets[0].clone(),
            g1: sets[1].clone(),
            g2: sets[2].clone(),
            g12: sets[3].clone(),
            c0: sets[4].clone(),
            c1: sets[5].clone(),
            c2: sets[6].clone(),
            c12: sets[7].clone(),
        }
    }

    #[test]
    fn threshold_example() {
        let p = EntropyProfile {
            layer: LayerSpec::new(Var::V, &[]),
            method: ProfileMethod::Exact,
            samples: 0,
            values: vec![0.99, 0.50, 0.01, 0.7],
            max_ci_width: None,
        };
        let s = threshold_sets(&p, 0.05);
        assert_eq!(s.h.to_vec(), vec![0]);
        assert_eq!(s.l.to_vec(), vec![2]);
        assert_eq!(s.remainder_fraction, 0.5);
        let s = threshold_sets(&EntropyProfile { values: vec![0.99, 0.01], ..p }, 0.4999);
        assert_eq!(s.remainder_fraction, 0.0);
    }

    #[test]
    fn classify_examples() {
        let s = sizes(6, 5, 4, 2, 3, 4);
        assert_eq!(classify_case(&s, SituationKind::S1).unwrap().case, Case::A);
        // Pattern A under Situation 3 is inadmissible.
        let s = sizes(6, 5, 4, 2, 3, 4);
        assert!(matches!(classify_case(&s, SituationKind::S3), Err(Error::InadmissibleCombination(_))));
        let s = sizes(1, 1, 1, 3, 2, 5);
        assert_eq!(classify_case(&s, SituationKind::S3).unwrap().case, Case::F);
        let s = sizes(3, 3, 2, 2, 3, 1);
        let out = classify_case(&s, SituationKind::S1).unwrap();
        assert!(out.notes.iter().any(|n| n.contains("BoundaryTie")));
    }

    #[test]
    fn case_a_corner1_plan() {
        let p = layout(sizes(6, 5, 4, 2, 3, 4));
        let plan = build_plan(&p, Case::A, SituationKind::S1, 1, false).unwrap();
        assert_eq!(plan.rs.len(), 4 - 2);
        assert!(plan.pi1.is_empty());
        assert!(plan.delta1().is_empty());
        assert!(plan.delta2().is_empty());
        assert!(summary_violations(&plan).is_empty());
    }

    #[test]
    fn case_b_corner1_s1_primes() {
        // a=5-2=3, b=6-1=5?  choose a≥b≥c: g1=8,c2=2 → a=6; g2=6,c1=2 → b=4; c12=5,g0=2 → c=3.
        let p = layout(sizes(2, 8, 6, 2, 2, 5));
        let plan = build_plan(&p, Case::B, SituationKind::S1, 1, false).unwrap();
        assert_eq!(plan.r1p.len(), 3);
        assert_eq!(plan.r2p.len(), 3);
        assert!(summary_violations(&plan).is_empty());
    }

    /// Exhaustive over all cell sizes ≤ 4: every admissible plan satisfies
    /// the summary identities; the only infeasible combination is Case B at
    /// corner 2 with `|G1|−|C2| < (|G2|−|C1|) + (|C12|−|G0|)`.
    #[test]
    fn exhaustive_summary_identities() {
        let mut built = 0;
        for code in 0..5usize.pow(6) {
            let d: Vec<usize> = (0..6).map(|i| code / 5usize.pow(i) % 5).collect();
            let s = sizes(d[0], d[1], d[2], d[3], d[4], d[5]);
            let Some(sit) = size_situation(&s) else { continue };
            let co = classify_case(&s, sit).unwrap();
            let (a, b, c) = s.chain();
            for k in [1u8, 2] {
                match build_plan(&layout(s), co.case, sit, k, false) {
                    Ok(plan) => {
                        assert_eq!(summary_violations(&plan), Vec::<String>::new(), "{s:?} {:?} k={k}", co.case);
                        built += 1;
                    }
                    Err(Error::InfeasiblePlan(_)) => {
                        assert!(co.case == Case::B && k == 2 && a < b + c, "{s:?} {:?} k={k}", co.case)
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
        assert!(built > 10_000);
    }

    #[test]
    fn relax_resolves_case_b_corner2() {
        let s = sizes(0, 1, 1, 0, 0, 1);
        let plan = build_plan(&layout(s), Case::B, SituationKind::S1, 2, true).unwrap();
        assert!(!plan.notes.is_empty());
        assert_eq!(plan.frozen.len(), 1);
        assert!(plan.rs.is_empty());
    }

    #[test]
    fn empty_plan() {
        let p = layout(sizes(0, 0, 0, 0, 0, 0));
        let plan = build_plan(&p, Case::A, SituationKind::S1, 1, false).unwrap();
        for (_, s) in plan.named_sets() {
            assert!(s.is_empty());
        }
    }

    #[test]
    fn design_bec_triple_corner1() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let cfg = CodeConfig::exact(64, 0.2, 4);
        let d = design(&m, &cfg, 1, false).unwrap();
        assert!(summary_violations(&d.plan).is_empty());
        assert_eq!(d.outer.dk.len(), d.outer.jk.len());
        let text = plans_to_text(&d.plan, &d.outer);
        let (p2, o2) = plans_from_text(&text).unwrap();
        assert_eq!(plans_to_text(&p2, &o2), text);
    }
}
