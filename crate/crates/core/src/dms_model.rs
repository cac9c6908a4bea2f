//! Discrete memoryless source model of the wiretap broadcast channel.
//!
//! The source is the joint law of `(V, U1, U2, X, Y1, Y2, Z)` where the three
//! auxiliary variables are binary, `X = f(V, U1, U2)` is a deterministic
//! binary map and `(Y1, Y2, Z)` are produced by an arbitrary (possibly
//! correlated) finite-alphabet channel `p(y1, y2, z | x)`.
//!
//! The module provides
//!
//! * validated construction ([`JointModel::new`], [`load_model`] for JSON),
//! * exact information quantities by summation over the finite joint
//!   ([`JointModel::entropy`], [`information_quantities`]),
//! * the per-symbol "pair tables" `p(sym = b, side = s)` that drive every SC
//!   recursion in [`crate::polar_core`],
//! * receiver-role normalization ([`classify_situation`], [`JointModel::swapped`]).
//!
//! All quantities are in bits.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Tolerance used when validating probability rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance used for ties between mutual informations.
pub const TIE_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

/// One coordinate of the joint source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    V,
    U1,
    U2,
    X,
    Y1,
    Y2,
    Z,
}

impl Var {
    /// Position of the variable inside an [`Atom`].
    pub fn slot(self) -> usize {
        self as usize
    }

    /// `U_k` for receiver `k ∈ {1, 2}`.
    pub fn u(k: u8) -> Var {
        if k == 1 {
            Var::U1
        } else {
            Var::U2
        }
    }

    /// `Y_k` for receiver `k ∈ {1, 2}`.
    pub fn y(k: u8) -> Var {
        if k == 1 {
            Var::Y1
        } else {
            Var::Y2
        }
    }

    /// Short display name.
    pub fn name(self) -> &'static str {
        match self {
            Var::V => "V",
            Var::U1 => "U1",
            Var::U2 => "U2",
            Var::X => "X",
            Var::Y1 => "Y1",
            Var::Y2 => "Y2",
            Var::Z => "Z",
        }
    }

    /// Parse a display name.
    pub fn parse(s: &str) -> Result<Var> {
        Ok(match s.trim() {
            "V" => Var::V,
            "U1" => Var::U1,
            "U2" => Var::U2,
            "X" => Var::X,
            "Y1" => Var::Y1,
            "Y2" => Var::Y2,
            "Z" => Var::Z,
            other => return Err(Error::Parse(format!("unknown variable `{other}`"))),
        })
    }
}

/// One outcome `(v, u1, u2, x, y1, y2, z)` of the joint source.
pub type Atom = [usize; 7];

// ---------------------------------------------------------------------------
// Joint model
// ---------------------------------------------------------------------------

/// Validated joint distribution of the source.
#[derive(Debug, Clone)]
pub struct JointModel {
    /// Alphabet sizes of `(Y1, Y2, Z)`.
    alph: [usize; 3],
    /// `p(v, u1, u2)` indexed by `4v + 2u1 + u2`.
    p_vu1u2: [f64; 8],
    /// `f(v, u1, u2)` indexed like `p_vu1u2`.
    f_table: [u8; 8],
    /// `p(y1, y2, z | x)` rows, entry index `(y1·|Y2| + y2)·|Z| + z`.
    channel: [Vec<f64>; 2],
    /// Positive-probability atoms of the full joint.
    atoms: Vec<(Atom, f64)>,
    /// Cumulative masses of `atoms` for sampling.
    cumulative: Vec<f64>,
}

impl JointModel {
    /// Build and validate a model.
    ///
    /// `channel[x]` is the joint row `p(y1, y2, z | x)` of length
    /// `|Y1|·|Y2|·|Z|`. Rows within [`ROW_SUM_TOLERANCE`] of one are
    /// renormalized so that downstream invariants hold to machine precision.
    pub fn new(
        alphabets: [usize; 3],
        p_vu1u2: [f64; 8],
        f_table: [u8; 8],
        channel: [Vec<f64>; 2],
    ) -> Result<Self> {
        if alphabets.contains(&0) {
            return Err(Error::Parse("output alphabets must be nonempty".into()));
        }
        let width = alphabets[0] * alphabets[1] * alphabets[2];
        let p = normalized_row(&p_vu1u2, "p_vu1u2")?;
        let mut rows: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for x in 0..2 {
            if channel[x].len() != width {
                return Err(Error::Parse(format!(
                    "channel row x={x} has {} entries, expected {width}",
                    channel[x].len()
                )));
            }
            rows[x] = normalized_row(&channel[x], &format!("channel[x={x}]"))?;
        }
        if let Some(i) = f_table.iter().position(|&b| b > 1) {
            return Err(Error::Parse(format!("f_table[{i}] is not a bit")));
        }
        let mut p_arr = [0.0; 8];
        p_arr.copy_from_slice(&p);
        let mut model = JointModel {
            alph: alphabets,
            p_vu1u2: p_arr,
            f_table,
            channel: rows,
            atoms: Vec::new(),
            cumulative: Vec::new(),
        };
        model.rebuild_atoms();
        Ok(model)
    }

    /// Build a model whose outputs are conditionally independent given `X`,
    /// from three `2 × |alphabet|` transition matrices.
    pub fn from_components(
        p_vu1u2: [f64; 8],
        f_table: [u8; 8],
        y1: &[Vec<f64>; 2],
        y2: &[Vec<f64>; 2],
        z: &[Vec<f64>; 2],
    ) -> Result<Self> {
        let alph = [y1[0].len(), y2[0].len(), z[0].len()];
        for (name, m) in [("y1", y1), ("y2", y2), ("z", z)] {
            for x in 0..2 {
                if m[x].len() != m[0].len() {
                    return Err(Error::Parse(format!("channel `{name}` rows have different lengths")));
                }
                normalized_row(&m[x], &format!("channel.{name}[x={x}]"))?;
            }
        }
        let mut channel: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for x in 0..2 {
            let mut row = Vec::with_capacity(alph[0] * alph[1] * alph[2]);
            for a in 0..alph[0] {
                for b in 0..alph[1] {
                    for c in 0..alph[2] {
                        row.push(y1[x][a] * y2[x][b] * z[x][c]);
                    }
                }
            }
            channel[x] = row;
        }
        Self::new(alph, p_vu1u2, f_table, channel)
    }

    fn rebuild_atoms(&mut self) {
        let mut atoms = Vec::new();
        for idx in 0..8 {
            let pv = self.p_vu1u2[idx];
            if pv <= 0.0 {
                continue;
            }
            let (v, u1, u2) = (idx >> 2, (idx >> 1) & 1, idx & 1);
            let x = self.f_table[idx] as usize;
            for (o, &pc) in self.channel[x].iter().enumerate() {
                if pc <= 0.0 {
                    continue;
                }
                let (y1, y2, z) = self.split_output(o);
                atoms.push(([v, u1, u2, x, y1, y2, z], pv * pc));
            }
        }
        let mut acc = 0.0;
        self.cumulative = atoms
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        self.atoms = atoms;
    }

    /// Alphabet size of a variable.
    pub fn alphabet(&self, var: Var) -> usize {
        match var {
            Var::Y1 => self.alph[0],
            Var::Y2 => self.alph[1],
            Var::Z => self.alph[2],
            _ => 2,
        }
    }

    /// Alphabet sizes of `(Y1, Y2, Z)`.
    pub fn output_alphabets(&self) -> [usize; 3] {
        self.alph
    }

    /// `p(v, u1, u2)` table.
    pub fn p_vu1u2(&self) -> &[f64; 8] {
        &self.p_vu1u2
    }

    /// Deterministic map table.
    pub fn f_table(&self) -> &[u8; 8] {
        &self.f_table
    }

    /// `x = f(v, u1, u2)`.
    pub fn f(&self, v: u8, u1: u8, u2: u8) -> u8 {
        self.f_table[((v as usize) << 2) | ((u1 as usize) << 1) | u2 as usize]
    }

    /// Joint channel row `p(·, ·, · | x)`.
    pub fn channel_row(&self, x: usize) -> &[f64] {
        &self.channel[x]
    }

    /// Flat output index of `(y1, y2, z)`.
    pub fn output_index(&self, y1: usize, y2: usize, z: usize) -> usize {
        (y1 * self.alph[1] + y2) * self.alph[2] + z
    }

    /// Inverse of [`JointModel::output_index`].
    pub fn split_output(&self, o: usize) -> (usize, usize, usize) {
        let z = o % self.alph[2];
        let rest = o / self.alph[2];
        (rest / self.alph[1], rest % self.alph[1], z)
    }

    /// Positive-probability atoms of the full joint.
    pub fn atoms(&self) -> &[(Atom, f64)] {
        &self.atoms
    }

    /// Draw one atom from the joint.
    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> Atom {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let r: f64 = rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= r).min(self.atoms.len() - 1);
        self.atoms[i].0
    }

    /// Model with the receiver roles exchanged (`U1↔U2`, `Y1↔Y2`).
    pub fn swapped(&self) -> JointModel {
        let mut p = [0.0; 8];
        let mut f = [0u8; 8];
        for idx in 0..8 {
            let (v, u1, u2) = (idx >> 2, (idx >> 1) & 1, idx & 1);
            let j = (v << 2) | (u2 << 1) | u1;
            p[j] = self.p_vu1u2[idx];
            f[j] = self.f_table[idx];
        }
        let alph = [self.alph[1], self.alph[0], self.alph[2]];
        let mut channel: [Vec<f64>; 2] = [vec![0.0; self.channel[0].len()], vec![0.0; self.channel[1].len()]];
        for x in 0..2 {
            for o in 0..self.channel[x].len() {
                let (y1, y2, z) = self.split_output(o);
                channel[x][(y2 * alph[1] + y1) * alph[2] + z] = self.channel[x][o];
            }
        }
        JointModel::new(alph, p, f, channel).expect("swapping preserves validity")
    }

    // -----------------------------------------------------------------------
    // Marginals and information quantities
    // -----------------------------------------------------------------------

    /// Mixed-radix index of `vars` inside an atom.
    pub fn key_of(&self, atom: &Atom, vars: &[Var]) -> usize {
        vars.iter().fold(0, |acc, &v| acc * self.alphabet(v) + atom[v.slot()])
    }

    /// Number of distinct keys for `vars`.
    pub fn key_space(&self, vars: &[Var]) -> usize {
        vars.iter().map(|&v| self.alphabet(v)).product()
    }

    /// Marginal distribution of `vars` keyed by mixed-radix index.
    pub fn marginal(&self, vars: &[Var]) -> Vec<f64> {
        let mut out = vec![0.0; self.key_space(vars)];
        for (atom, p) in &self.atoms {
            out[self.key_of(atom, vars)] += p;
        }
        out
    }

    /// Joint entropy `H(vars)` in bits.
    pub fn entropy(&self, vars: &[Var]) -> f64 {
        self.marginal(vars).iter().map(|&p| entropy_term(p)).sum()
    }

    /// Conditional entropy `H(target | given)`.
    pub fn cond_entropy(&self, target: &[Var], given: &[Var]) -> f64 {
        let mut all: Vec<Var> = given.to_vec();
        all.extend_from_slice(target);
        (self.entropy(&all) - self.entropy(given)).max(0.0)
    }

    /// Mutual information `I(a; b)`.
    pub fn mutual_info(&self, a: &[Var], b: &[Var]) -> f64 {
        self.cond_mutual_info(a, b, &[])
    }

    /// Conditional mutual information `I(a; b | c)`.
    pub fn cond_mutual_info(&self, a: &[Var], b: &[Var], c: &[Var]) -> f64 {
        let mut ac = c.to_vec();
        ac.extend_from_slice(a);
        let mut bc = c.to_vec();
        bc.extend_from_slice(b);
        let mut abc = ac.clone();
        abc.extend_from_slice(b);
        (self.entropy(&ac) + self.entropy(&bc) - self.entropy(&abc) - self.entropy(c)).max(0.0)
    }

    /// Per-symbol table `p(sym = b, side = s)` for every side value `s`.
    pub fn pair_table(&self, sym: Var, side: &[Var]) -> PairTable {
        let mut rows = vec![[0.0f64; 2]; self.key_space(side)];
        for (atom, p) in &self.atoms {
            rows[self.key_of(atom, side)][atom[sym.slot()]] += p;
        }
        PairTable {
            radix: side.iter().map(|&v| self.alphabet(v)).collect(),
            rows,
        }
    }

    // -----------------------------------------------------------------------
    // Serialization
    // -----------------------------------------------------------------------

    /// JSON representation (joint channel form).
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "alphabets": {"y1": self.alph[0], "y2": self.alph[1], "z": self.alph[2]},
            "p_vu1u2": self.p_vu1u2.to_vec(),
            "f_table": self.f_table.to_vec(),
            "channel": {"joint": [self.channel[0].clone(), self.channel[1].clone()]},
        })
    }

    // -----------------------------------------------------------------------
    // Reference constructors
    // -----------------------------------------------------------------------

    /// `V` uniform, `U1 = U2 = 0`, `X = V`, independent erasure channels to
    /// `Y1`, `Y2`, `Z` with erasure probabilities `e1`, `e2`, `ez`.
    /// Output alphabet `{0, 1, e}` (erasure is symbol 2).
    pub fn bec_triple(e1: f64, e2: f64, ez: f64) -> Result<Self> {
        let mut p = [0.0; 8];
        p[0] = 0.5;
        p[4] = 0.5;
        let f = [0, 0, 0, 0, 1, 1, 1, 1];
        Self::from_components(p, f, &bec_matrix(e1), &bec_matrix(e2), &bec_matrix(ez))
    }

    /// Multiplexer source: `V ~ Bern(pv)`, `U1`, `U2` independent given `V`
    /// with `P(Uk = 1 | V = v) = pu_k[v]`, and `X = U1` if `V = 0`, else
    /// `X = U2`; outputs are conditionally independent given `X`.
    pub fn multiplexer(
        pv: f64,
        pu1: [f64; 2],
        pu2: [f64; 2],
        y1: &[Vec<f64>; 2],
        y2: &[Vec<f64>; 2],
        z: &[Vec<f64>; 2],
    ) -> Result<Self> {
        let mut p = [0.0; 8];
        let mut f = [0u8; 8];
        for idx in 0..8 {
            let (v, u1, u2) = (idx >> 2, (idx >> 1) & 1, idx & 1);
            let bern = |q: f64, b: usize| if b == 1 { q } else { 1.0 - q };
            p[idx] = bern(pv, v) * bern(pu1[v], u1) * bern(pu2[v], u2);
            f[idx] = if v == 0 { u1 as u8 } else { u2 as u8 };
        }
        Self::from_components(p, f, y1, y2, z)
    }

    /// A random [`JointModel::multiplexer`] whose three channels are each a
    /// BEC or a BSC with random parameter. Posteriors of every layer take at
    /// most a handful of values, so exact profiles stay cheap.
    pub fn random_multiplexer<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let chan = |rng: &mut R| {
            if rng.gen_bool(0.5) {
                bec_matrix(rng.gen_range(0.02..0.9))
            } else {
                bsc_matrix(rng.gen_range(0.01..0.4))
            }
        };
        let (y1, y2, z) = (chan(rng), chan(rng), chan(rng));
        let q = |rng: &mut R| rng.gen_range(0.05..0.95);
        let pv = q(rng);
        let pu1 = [q(rng), q(rng)];
        let pu2 = [q(rng), q(rng)];
        Self::multiplexer(pv, pu1, pu2, &y1, &y2, &z).expect("valid multiplexer model")
    }

    /// Uniform `(v, u1, u2)`, `X = V ⊕ U1 ⊕ U2`, noiseless `Y1 = Y2 = Z = X`.
    pub fn xor_noiseless() -> Self {
        let p = [0.125; 8];
        let mut f = [0u8; 8];
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = ((i >> 2) ^ ((i >> 1) & 1) ^ (i & 1)) as u8;
        }
        let id = identity_matrix();
        Self::from_components(p, f, &id, &id, &id).expect("valid reference model")
    }
}

/// Per-symbol table `p(sym = b, side = s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    /// Alphabet sizes of the side variables (mixed radix, most significant first).
    pub radix: Vec<usize>,
    /// `rows[s] = [p(0, s), p(1, s)]`.
    pub rows: Vec<[f64; 2]>,
}

impl PairTable {
    /// Row index of a side value tuple.
    pub fn index(&self, values: &[usize]) -> usize {
        self.radix.iter().zip(values).fold(0, |acc, (&r, &v)| acc * r + v)
    }
}

/// Row of a binary erasure channel with erasure symbol 2.
pub fn bec_matrix(e: f64) -> [Vec<f64>; 2] {
    [vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]]
}

/// Binary symmetric channel matrix.
pub fn bsc_matrix(p: f64) -> [Vec<f64>; 2] {
    [vec![1.0 - p, p], vec![p, 1.0 - p]]
}

/// Noiseless binary channel.
pub fn identity_matrix() -> [Vec<f64>; 2] {
    bsc_matrix(0.0)
}

/// Channel whose output is independent of the input (single symbol).
pub fn constant_matrix() -> [Vec<f64>; 2] {
    [vec![1.0], vec![1.0]]
}

fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy function `h₂(p)` in bits.
pub fn h2(p: f64) -> f64 {
    entropy_term(p) + entropy_term(1.0 - p)
}

fn normalized_row(row: &[f64], location: &str) -> Result<Vec<f64>> {
    for (i, &p) in row.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::Parse(format!("{location}[{i}] is not finite")));
        }
        if p < 0.0 {
            return Err(Error::NegativeProbability {
                location: format!("{location}[{i}]"),
                value: p,
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::RowSumError {
            location: location.to_string(),
            sum,
        });
    }
    Ok(row.iter().map(|p| p / sum).collect())
}

// ---------------------------------------------------------------------------
// JSON loading
// ---------------------------------------------------------------------------

/// Parse a model from its JSON text.
///
/// ```json
/// {
///   "alphabets": {"y1": 2, "y2": 2, "z": 2},
///   "p_vu1u2": ["0.125", 0.125, ...],          // 8 entries, index 4v+2u1+u2
///   "f_table": [0, 1, ...],                     // 8 bits, or 8 [p0, p1] rows
///   "channel": {"y1": [[..],[..]], "y2": ..., "z": ...}
///           or {"joint": [[row x=0], [row x=1]]}
/// }
/// ```
pub fn load_model(text: &str) -> Result<JointModel> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    model_from_json(&v)
}

/// Parse a model from an already-decoded JSON value.
pub fn model_from_json(v: &Value) -> Result<JointModel> {
    let obj = v.as_object().ok_or_else(|| Error::Parse("model must be a JSON object".into()))?;
    let p = prob_vec(field(obj, "p_vu1u2")?, "p_vu1u2")?;
    if p.len() != 8 {
        return Err(Error::Parse("p_vu1u2 must have 8 entries".into()));
    }
    let mut p_arr = [0.0; 8];
    p_arr.copy_from_slice(&p);
    let f_table = parse_f_table(field(obj, "f_table")?)?;
    let channel = field(obj, "channel")?
        .as_object()
        .ok_or_else(|| Error::Parse("channel must be an object".into()))?;
    if let Some(joint) = channel.get("joint") {
        let alph = field(obj, "alphabets")?;
        let get = |k: &str| -> Result<usize> {
            alph.get(k)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| Error::Parse(format!("alphabets.{k} missing")))
        };
        let alphabets = [get("y1")?, get("y2")?, get("z")?];
        let rows = prob_matrix(joint, "channel.joint")?;
        if rows.len() != 2 {
            return Err(Error::Parse("channel.joint must have two rows".into()));
        }
        JointModel::new(alphabets, p_arr, f_table, [rows[0].clone(), rows[1].clone()])
    } else {
        let comp = |k: &str| -> Result<[Vec<f64>; 2]> {
            let m = prob_matrix(
                channel.get(k).ok_or_else(|| Error::Parse(format!("channel.{k} missing")))?,
                &format!("channel.{k}"),
            )?;
            if m.len() != 2 {
                return Err(Error::Parse(format!("channel.{k} must have two rows")));
            }
            Ok([m[0].clone(), m[1].clone()])
        };
        let (y1, y2, z) = (comp("y1")?, comp("y2")?, comp("z")?);
        if let Some(alph) = obj.get("alphabets") {
            for (k, m) in [("y1", &y1), ("y2", &y2), ("z", &z)] {
                if let Some(a) = alph.get(k).and_then(Value::as_u64) {
                    if a as usize != m[0].len() {
                        return Err(Error::Parse(format!("alphabets.{k}={a} disagrees with channel.{k}")));
                    }
                }
            }
        }
        JointModel::from_components(p_arr, f_table, &y1, &y2, &z)
    }
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, k: &str) -> Result<&'a Value> {
    obj.get(k).ok_or_else(|| Error::Parse(format!("missing key `{k}`")))
}

fn prob_value(v: &Value, location: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("{location}: bad number"))),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("{location}: `{s}` is not a decimal"))),
        _ => Err(Error::Parse(format!("{location}: expected number or decimal string"))),
    }
}

fn prob_vec(v: &Value, location: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{location} must be an array")))?
        .iter()
        .enumerate()
        .map(|(i, x)| prob_value(x, &format!("{location}[{i}]")))
        .collect()
}

fn prob_matrix(v: &Value, location: &str) -> Result<Vec<Vec<f64>>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{location} must be an array of rows")))?
        .iter()
        .enumerate()
        .map(|(i, r)| prob_vec(r, &format!("{location}[{i}]")))
        .collect()
}

fn parse_f_table(v: &Value) -> Result<[u8; 8]> {
    let arr = v.as_array().ok_or_else(|| Error::Parse("f_table must be an array".into()))?;
    if arr.len() != 8 {
        return Err(Error::Parse("f_table must have 8 entries".into()));
    }
    let mut out = [0u8; 8];
    for (i, e) in arr.iter().enumerate() {
        let loc = format!("f_table[{i}]");
        out[i] = match e {
            Value::Array(_) => {
                let row = prob_vec(e, &loc)?;
                if row.len() != 2 {
                    return Err(Error::Parse(format!("{loc} must be a pair [p(x=0), p(x=1)]")));
                }
                let row = normalized_row(&row, &loc)?;
                if row[1] == 1.0 {
                    1
                } else if row[0] == 1.0 {
                    0
                } else {
                    return Err(Error::NonDeterministicX { location: loc });
                }
            }
            _ => {
                let x = prob_value(e, &loc)?;
                if x == 0.0 {
                    0
                } else if x == 1.0 {
                    1
                } else {
                    return Err(Error::NonDeterministicX { location: loc });
                }
            }
        };
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Information report and situations
// ---------------------------------------------------------------------------

/// Every information quantity the scheme and the regions use.
///
/// Arrays indexed `[k-1]` hold the value for corner / receiver `k ∈ {1,2}`;
/// `k̄` denotes the other receiver.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InfoReport {
    pub h_v: f64,
    pub h_v_z: f64,
    pub h_v_y1: f64,
    pub h_v_y2: f64,
    /// `H(U_k | V)`.
    pub h_uk_v: [f64; 2],
    /// `H(U_k | V Z)`.
    pub h_uk_vz: [f64; 2],
    /// `H(U_k | V Y_k)`.
    pub h_uk_vyk: [f64; 2],
    /// `H(U_k̄ | V U_k)`.
    pub h_ukbar_vuk: [f64; 2],
    /// `H(U_k̄ | V U_k Z)`.
    pub h_ukbar_vukz: [f64; 2],
    /// `H(U_k̄ | V Y_k̄)`.
    pub h_ukbar_vykbar: [f64; 2],
    /// `H(V U_k)`.
    pub h_vuk: [f64; 2],
    /// `H(V U_k | Z)`.
    pub h_vuk_z: [f64; 2],
    /// `H(V U_k | Y_k)`.
    pub h_vuk_yk: [f64; 2],
    pub i_v_z: f64,
    pub i_v_y1: f64,
    pub i_v_y2: f64,
    pub i_u1u2_v: f64,
    /// `I(U_k ; Y_k | V)`.
    pub i_uk_yk_v: [f64; 2],
    /// `I(U_k ; Z | V)`.
    pub i_uk_z_v: [f64; 2],
    /// `I(V U_k ; Y_k)`.
    pub i_vuk_yk: [f64; 2],
    /// `I(V U_k ; Z)`.
    pub i_vuk_z: [f64; 2],
    /// `I(U_k̄ ; Z | V U_k)`.
    pub i_ukbar_z_vuk: [f64; 2],
    /// `I(V U1 U2 ; Z)`.
    pub i_vu1u2_z: f64,
}

/// Compute the [`InfoReport`] of a model by exact summation.
pub fn information_quantities(model: &JointModel) -> InfoReport {
    use Var::*;
    let per_k = |f: &dyn Fn(u8) -> f64| [f(1), f(2)];
    let bar = |k: u8| 3 - k;
    InfoReport {
        h_v: model.entropy(&[V]),
        h_v_z: model.cond_entropy(&[V], &[Z]),
        h_v_y1: model.cond_entropy(&[V], &[Y1]),
        h_v_y2: model.cond_entropy(&[V], &[Y2]),
        h_uk_v: per_k(&|k| model.cond_entropy(&[Var::u(k)], &[V])),
        h_uk_vz: per_k(&|k| model.cond_entropy(&[Var::u(k)], &[V, Z])),
        h_uk_vyk: per_k(&|k| model.cond_entropy(&[Var::u(k)], &[V, Var::y(k)])),
        h_ukbar_vuk: per_k(&|k| model.cond_entropy(&[Var::u(bar(k))], &[V, Var::u(k)])),
        h_ukbar_vukz: per_k(&|k| model.cond_entropy(&[Var::u(bar(k))], &[V, Var::u(k), Z])),
        h_ukbar_vykbar: per_k(&|k| model.cond_entropy(&[Var::u(bar(k))], &[V, Var::y(bar(k))])),
        h_vuk: per_k(&|k| model.entropy(&[V, Var::u(k)])),
        h_vuk_z: per_k(&|k| model.cond_entropy(&[V, Var::u(k)], &[Z])),
        h_vuk_yk: per_k(&|k| model.cond_entropy(&[V, Var::u(k)], &[Var::y(k)])),
        i_v_z: model.mutual_info(&[V], &[Z]),
        i_v_y1: model.mutual_info(&[V], &[Y1]),
        i_v_y2: model.mutual_info(&[V], &[Y2]),
        i_u1u2_v: model.cond_mutual_info(&[U1], &[U2], &[V]),
        i_uk_yk_v: per_k(&|k| model.cond_mutual_info(&[Var::u(k)], &[Var::y(k)], &[V])),
        i_uk_z_v: per_k(&|k| model.cond_mutual_info(&[Var::u(k)], &[Z], &[V])),
        i_vuk_yk: per_k(&|k| model.mutual_info(&[V, Var::u(k)], &[Var::y(k)])),
        i_vuk_z: per_k(&|k| model.mutual_info(&[V, Var::u(k)], &[Z])),
        i_ukbar_z_vuk: per_k(&|k| model.cond_mutual_info(&[Var::u(bar(k))], &[Z], &[V, Var::u(k)])),
        i_vu1u2_z: model.mutual_info(&[V, U1, U2], &[Z]),
    }
}

/// The three orderings of `I(V;Z)` against `I(V;Y1) ≤ I(V;Y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SituationKind {
    /// `I(V;Z) ≤ I(V;Y1) ≤ I(V;Y2)`.
    S1,
    /// `I(V;Y1) < I(V;Z) ≤ I(V;Y2)`.
    S2,
    /// `I(V;Y1) ≤ I(V;Y2) < I(V;Z)`.
    S3,
}

/// Situation of a model after receiver-role normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Situation {
    pub kind: SituationKind,
    /// True when the receivers had to be exchanged so that `I(V;Y1) ≤ I(V;Y2)`.
    pub swapped: bool,
    /// Tie notes (quantities equal within [`TIE_TOLERANCE`]).
    pub notes: Vec<String>,
}

/// Classify the situation of a report (swap-normalizing first).
pub fn classify_situation(report: &InfoReport) -> Situation {
    let mut notes = Vec::new();
    let (mut a, mut b) = (report.i_v_y1, report.i_v_y2);
    let swapped = a > b + TIE_TOLERANCE;
    if swapped {
        std::mem::swap(&mut a, &mut b);
    } else if (a - b).abs() <= TIE_TOLERANCE {
        notes.push("TieBreak: I(V;Y1) = I(V;Y2); no role swap".to_string());
    }
    let z = report.i_v_z;
    let kind = if z <= a + TIE_TOLERANCE {
        if (z - a).abs() <= TIE_TOLERANCE {
            notes.push("TieBreak: I(V;Z) = I(V;Y1); resolved as S1".to_string());
        }
        SituationKind::S1
    } else if z <= b + TIE_TOLERANCE {
        if (z - b).abs() <= TIE_TOLERANCE {
            notes.push("TieBreak: I(V;Z) = I(V;Y2); resolved as S2".to_string());
        }
        SituationKind::S2
    } else {
        SituationKind::S3
    };
    for n in &notes {
        log::info!("{n}");
    }
    Situation { kind, swapped, notes }
}

/// Marton feasibility `I(U1;Y1|V) + I(U2;Y2|V) ≥ I(U1;U2|V)` (within 1e-9).
pub fn check_marton_feasibility(report: &InfoReport) -> bool {
    report.i_uk_yk_v[0] + report.i_uk_yk_v[1] + TIE_TOLERANCE >= report.i_u1u2_v
}

/// Exact pairwise MI by the double-sum definition (independent oracle path).
pub fn mutual_info_double_sum(model: &JointModel, a: &[Var], b: &[Var]) -> f64 {
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (atom, p) in model.atoms() {
        *joint.entry((model.key_of(atom, a), model.key_of(atom, b))).or_default() += p;
    }
    let pa = model.marginal(a);
    let pb = model.marginal(b);
    joint
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(&(i, j), &p)| p * (p / (pa[i] * pb[j])).log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bsc_model(p: f64) -> JointModel {
        let mut pv = [0.0; 8];
        pv[0] = 0.5;
        pv[4] = 0.5;
        JointModel::from_components(
            pv,
            [0, 0, 0, 0, 1, 1, 1, 1],
            &bsc_matrix(p),
            &identity_matrix(),
            &constant_matrix(),
        )
        .unwrap()
    }

    #[test]
    fn xor_model_is_valid() {
        let m = JointModel::xor_noiseless();
        assert_eq!(m.f(1, 1, 0), 0);
        assert_abs_diff_eq!(m.entropy(&[Var::V, Var::U1, Var::U2]), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn row_sum_error() {
        let r = JointModel::from_components(
            [0.9 / 8.0; 8],
            [0; 8],
            &identity_matrix(),
            &identity_matrix(),
            &identity_matrix(),
        );
        assert!(matches!(r, Err(Error::RowSumError { .. })));
    }

    #[test]
    fn negative_probability() {
        let mut p = [0.25; 8];
        p[0] = -0.25;
        p[1] = 0.0;
        p[2] = 0.0;
        p[3] = 0.25;
        let r = JointModel::from_components(p, [0; 8], &identity_matrix(), &identity_matrix(), &identity_matrix());
        assert!(matches!(r, Err(Error::NegativeProbability { .. })));
    }

    #[test]
    fn stochastic_x_rejected() {
        let text = r#"{"alphabets":{"y1":2,"y2":2,"z":2},
            "p_vu1u2":["0.125","0.125","0.125","0.125","0.125","0.125","0.125","0.125"],
            "f_table":[[1,0],[0.5,0.5],[1,0],[1,0],[0,1],[0,1],[0,1],[0,1]],
            "channel":{"y1":[[1,0],[0,1]],"y2":[[1,0],[0,1]],"z":[[1,0],[0,1]]}}"#;
        assert!(matches!(load_model(text), Err(Error::NonDeterministicX { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let back = model_from_json(&m.to_json()).unwrap();
        assert_eq!(back.atoms().len(), m.atoms().len());
        assert_abs_diff_eq!(back.entropy(&[Var::V, Var::Y1, Var::Z]), m.entropy(&[Var::V, Var::Y1, Var::Z]), epsilon = 1e-12);
    }

    #[test]
    fn bsc_mutual_information() {
        let r = information_quantities(&bsc_model(0.11));
        assert_abs_diff_eq!(r.i_v_y1, 1.0 - h2(0.11), epsilon = 1e-12);
        assert_abs_diff_eq!(r.i_v_y1, 0.5004, epsilon = 1e-3);
        assert_abs_diff_eq!(r.i_v_y2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i_v_z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn situations_from_orderings() {
        let mut r = information_quantities(&bsc_model(0.11));
        for (z, y1, y2, want) in [
            (0.0, 0.3, 0.6, SituationKind::S1),
            (0.4, 0.3, 0.6, SituationKind::S2),
            (0.9, 0.3, 0.6, SituationKind::S3),
        ] {
            r.i_v_z = z;
            r.i_v_y1 = y1;
            r.i_v_y2 = y2;
            let s = classify_situation(&r);
            assert_eq!(s.kind, want);
            assert!(!s.swapped);
        }
        r.i_v_y1 = 0.6;
        r.i_v_y2 = 0.3;
        r.i_v_z = 0.0;
        assert!(classify_situation(&r).swapped);
    }

    #[test]
    fn marton_feasibility_examples() {
        // U1 = U2 uniform, noiseless Y1 = U1, Y2 = U2: 2 ≥ 1.
        let mut p = [0.0; 8];
        p[0] = 0.25;
        p[3] = 0.25;
        p[4] = 0.25;
        p[7] = 0.25;
        let f = [0, 0, 0, 1, 0, 0, 0, 1];
        let m = JointModel::from_components(p, f, &identity_matrix(), &identity_matrix(), &constant_matrix()).unwrap();
        assert!(check_marton_feasibility(&information_quantities(&m)));
        let m = JointModel::from_components(p, f, &constant_matrix(), &constant_matrix(), &constant_matrix()).unwrap();
        let r = information_quantities(&m);
        assert_abs_diff_eq!(r.i_u1u2_v, 1.0, epsilon = 1e-12);
        assert!(!check_marton_feasibility(&r));
    }

    #[test]
    fn swap_exchanges_roles() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let s = m.swapped();
        let (r, rs) = (information_quantities(&m), information_quantities(&s));
        assert_abs_diff_eq!(r.i_v_y1, rs.i_v_y2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i_v_y2, rs.i_v_y1, epsilon = 1e-12);
    }

    #[test]
    fn pair_table_masses() {
        let m = JointModel::bec_triple(0.5, 0.5, 0.5).unwrap();
        let t = m.pair_table(Var::V, &[Var::Y1]);
        assert_eq!(t.rows.len(), 3);
        assert_abs_diff_eq!(t.rows[2][0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rows[0][1], 0.0, epsilon = 1e-12);
    }
}
