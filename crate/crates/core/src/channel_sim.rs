//! Broadcast-channel sampling and end-to-end reliability experiments.
//!
//! ## Channel
//!
//! [`transmit`] draws `(y1, y2, z)` for every transmitted symbol
//! independently from the joint row `p(y1, y2, z | x)` of the model. Erasure
//! symbols are ordinary output letters.
//!
//! ## Experiments
//!
//! [`run_trials`] designs the scheme once and then runs, per trial, the
//! pipeline messages → keys → chained encoding → channel → both decoders →
//! comparison. Trial `t` draws all of its randomness from the ChaCha stream
//! `t` of the experiment seed, so reports are reproducible and independent
//! of execution order. A trial counts as a block error at a receiver when
//! any bit of any message intended for it is decoded wrongly.

use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{empirical_rates_of, EmpiricalRates};
use crate::chaining_codec::{ChainCodec, KeyRing, MessageSet};
use crate::dms_model::JointModel;
use crate::error::{Error, Result};
use crate::polar_core::CodeConfig;
use crate::set_builder::{design, SchemeDesign};

// ---------------------------------------------------------------------------
// Channel
// ---------------------------------------------------------------------------

/// Channel outputs per block, `[block][t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOutputs {
    pub y1: Vec<Vec<usize>>,
    pub y2: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
}

/// Per-input samplers of the joint output row.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    rows: [WeightedIndex<f64>; 2],
    model: JointModel,
}

impl ChannelSampler {
    /// Prepare samplers for both input symbols.
    pub fn new(model: &JointModel) -> Result<Self> {
        let row = |x: usize| {
            WeightedIndex::new(model.channel_row(x).iter().copied())
                .map_err(|e| Error::InvalidConfig(format!("channel row x={x}: {e}")))
        };
        Ok(ChannelSampler { rows: [row(0)?, row(1)?], model: model.clone() })
    }

    /// One channel use: `(y1, y2, z)` given input `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: u8, rng: &mut R) -> (usize, usize, usize) {
        self.model.split_output(self.rows[x as usize].sample(rng))
    }

    /// Pass whole blocks through the channel.
    pub fn transmit<R: Rng + ?Sized>(&self, x_blocks: &[Vec<u8>], rng: &mut R) -> Result<ChannelOutputs> {
        let mut out = ChannelOutputs { y1: Vec::new(), y2: Vec::new(), z: Vec::new() };
        for block in x_blocks {
            let (mut y1, mut y2, mut z) = (Vec::with_capacity(block.len()), Vec::with_capacity(block.len()), Vec::with_capacity(block.len()));
            for &x in block {
                if x > 1 {
                    return Err(Error::InvalidConfig(format!("channel input symbol {x} is not binary")));
                }
                let (a, b, c) = self.sample(x, rng);
                y1.push(a);
                y2.push(b);
                z.push(c);
            }
            out.y1.push(y1);
            out.y2.push(y2);
            out.z.push(z);
        }
        Ok(out)
    }
}

/// Pass `x_blocks` through the broadcast channel of `model`, i.i.d. per
/// symbol.
pub fn transmit<R: Rng + ?Sized>(x_blocks: &[Vec<u8>], model: &JointModel, rng: &mut R) -> Result<ChannelOutputs> {
    ChannelSampler::new(model)?.transmit(x_blocks, rng)
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Optional outputs of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Keep one [`TrialRecord`] per trial in the report.
    #[serde(default)]
    pub per_trial: bool,
}

/// Everything that defines a reliability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Where the model was loaded from (provenance only).
    #[serde(default)]
    pub model_path: Option<String>,
    pub code: CodeConfig,
    /// Corner `k ∈ {1, 2}` in the caller's receiver labels.
    pub corner: u8,
    /// Number of trials (at least 1).
    pub trials: usize,
    /// Seed of every trial stream.
    pub seed: u64,
    /// Relax infeasible plans instead of failing.
    #[serde(default)]
    pub relax: bool,
    /// Shared inner chaining keys (disable for empirical study only).
    #[serde(default = "default_true")]
    pub keys_enabled: bool,
    #[serde(default)]
    pub metrics: Metrics,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Check the invariants.
    pub fn validate(&self) -> Result<()> {
        self.code.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trial count must be at least 1".into()));
        }
        if self.corner != 1 && self.corner != 2 {
            return Err(Error::InvalidConfig(format!("corner must be 1 or 2, got {}", self.corner)));
        }
        Ok(())
    }
}

/// Error statistics of one receiver (caller's label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverStats {
    pub receiver: u8,
    /// Trials with at least one wrong message bit.
    pub block_errors: usize,
    /// `block_errors / trials`.
    pub error_rate: f64,
    /// Wrong message bits over all trials.
    pub bit_errors: usize,
    /// Message bits intended for the receiver per trial.
    pub message_bits: usize,
    /// Trials in which SC met a zero-probability event.
    pub zero_evidence_trials: usize,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Wrong message bits per receiver (caller's labels).
    pub bit_errors: [usize; 2],
}

/// Aggregated experiment results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub blocks: usize,
    pub corner: u8,
    pub trials: usize,
    pub seed: u64,
    pub relax: bool,
    pub keys_enabled: bool,
    /// Inner-layer case and size situation of the design.
    pub case: String,
    pub situation: String,
    /// Receivers 1 and 2.
    pub receivers: Vec<ReceiverStats>,
    /// Achieved rates and the key ledger.
    pub rates: EmpiricalRates,
    /// Shared key bits divided by `nL`.
    pub key_rate_overhead: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_trial: Vec<TrialRecord>,
    /// Wall-clock seconds (excluded from reproducibility comparisons).
    pub runtime_secs: f64,
}

impl ExperimentReport {
    /// Header of [`ExperimentReport::csv_record`].
    pub const CSV_HEADER: [&'static str; 12] = [
        "n",
        "blocks",
        "corner",
        "trials",
        "seed",
        "case",
        "situation",
        "rx1_block_errors",
        "rx1_error_rate",
        "rx2_block_errors",
        "rx2_error_rate",
        "key_rate_overhead",
    ];

    /// One CSV row summarizing the report (for sweeps).
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.blocks.to_string(),
            self.corner.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            self.case.clone(),
            self.situation.clone(),
            self.receivers[0].block_errors.to_string(),
            format!("{}", self.receivers[0].error_rate),
            self.receivers[1].block_errors.to_string(),
            format!("{}", self.receivers[1].error_rate),
            format!("{}", self.key_rate_overhead),
        ]
    }
}

/// Random stream of trial `t`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Design the scheme for `model` and run the experiment.
pub fn run_trials(model: &JointModel, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let d = design(model, &config.code, config.corner, config.relax)?;
    run_trials_with_design(&d, config)
}

/// Run the experiment on an existing design (the design's code parameters
/// take precedence over `config.code`).
pub fn run_trials_with_design(d: &SchemeDesign, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let codec = ChainCodec::new(d)?;
    let sampler = ChannelSampler::new(&d.model)?;
    let rates = empirical_rates_of(d, &codec)?;
    let mut receivers: Vec<ReceiverStats> = [1u8, 2]
        .iter()
        .map(|&r| ReceiverStats {
            receiver: r,
            block_errors: 0,
            error_rate: 0.0,
            bit_errors: 0,
            message_bits: 0,
            zero_evidence_trials: 0,
        })
        .collect();
    let mut per_trial = Vec::new();
    for trial in 0..config.trials {
        let mut rng = trial_rng(config.seed, trial);
        let keys = KeyRing::generate(&codec, config.keys_enabled, &mut rng);
        let msgs = MessageSet::random(&codec, &mut rng);
        let t = codec.encode_chain(&msgs, &keys, &mut rng)?;
        let out = sampler.transmit(&t.x, &mut rng)?;
        let mut record = TrialRecord { trial, bit_errors: [0, 0] };
        for r in [1u8, 2] {
            // Normalized receiver r observes the normalized model's output r.
            let y = if r == 1 { &out.y1 } else { &out.y2 };
            let dec = codec.decode(r, y, &t.side_cipher[(r - 1) as usize], &keys, crate::chaining_codec::DecodeMode::Sc)?;
            let want = msgs.restrict(&codec.receiver(r).wanted);
            let (errs, total) = bit_mismatches(&want, &dec.messages);
            let ext = (d.external_receiver(r) - 1) as usize;
            let st = &mut receivers[ext];
            st.message_bits = total;
            st.bit_errors += errs;
            st.block_errors += (errs > 0) as usize;
            st.zero_evidence_trials += dec.zero_evidence as usize;
            record.bit_errors[ext] = errs;
        }
        if config.metrics.per_trial {
            per_trial.push(record);
        }
    }
    for st in &mut receivers {
        st.error_rate = st.block_errors as f64 / config.trials as f64;
    }
    let key_rate_overhead = rates.overhead.key_rate;
    Ok(ExperimentReport {
        n: codec.n,
        blocks: codec.blocks,
        corner: d.requested_corner,
        trials: config.trials,
        seed: config.seed,
        relax: d.relax,
        keys_enabled: config.keys_enabled,
        case: format!("{:?}", d.case.case),
        situation: format!("{:?}", d.situation),
        receivers,
        rates,
        key_rate_overhead,
        per_trial,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// `(wrong bits, total bits)` of a decoded message set against the truth;
/// a missing class counts all of its bits as wrong.
fn bit_mismatches(truth: &MessageSet, got: &MessageSet) -> (usize, usize) {
    let mut errs = 0;
    let mut total = 0;
    for (class, blocks) in &truth.bits {
        for (b, bits) in blocks.iter().enumerate() {
            total += bits.len();
            match got.bits.get(class).and_then(|g| g.get(b)) {
                Some(g) if g.len() == bits.len() => errs += bits.iter().zip(g).filter(|(a, b)| a != b).count(),
                _ => errs += bits.len(),
            }
        }
    }
    (errs, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dms_model::{bec_matrix, bsc_matrix, identity_matrix};

    fn config(n: usize, blocks: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            model_path: None,
            code: CodeConfig::exact(n, 0.2, blocks),
            corner: 1,
            trials,
            seed: 9,
            relax: false,
            keys_enabled: true,
            metrics: Metrics::default(),
        }
    }

    #[test]
    fn transmit_trivial_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![vec![0, 1, 1, 0, 1, 0, 0, 1], vec![1; 8]];
        let id = identity_matrix();
        let m = JointModel::from_components([0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0], [0, 0, 0, 0, 1, 1, 1, 1], &id, &id, &id).unwrap();
        let out = transmit(&x, &m, &mut rng).unwrap();
        let xs: Vec<Vec<usize>> = x.iter().map(|b| b.iter().map(|&v| v as usize).collect()).collect();
        assert_eq!(out.y1, xs);
        assert_eq!(out.y2, xs);
        assert_eq!(out.z, xs);
        let m = JointModel::bec_triple(1.0, 1.0, 1.0).unwrap();
        let out = transmit(&x, &m, &mut rng).unwrap();
        assert!(out.y1.iter().chain(&out.y2).chain(&out.z).flatten().all(|&s| s == 2));
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let a = transmit(&x, &m, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = transmit(&x, &m, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(transmit(&[vec![2]], &m, &mut rng).is_err());
    }

    /// Empirical output frequencies lie within 3σ of the channel law.
    #[test]
    fn channel_frequencies_within_three_sigma() {
        let m = JointModel::from_components(
            [0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
            [0, 0, 0, 0, 1, 1, 1, 1],
            &bec_matrix(0.3),
            &bsc_matrix(0.2),
            &bec_matrix(0.6),
        )
        .unwrap();
        let sampler = ChannelSampler::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        for x in 0..2u8 {
            let row = m.channel_row(x as usize);
            let mut counts = vec![0usize; row.len()];
            for _ in 0..draws {
                let (a, b, c) = sampler.sample(x, &mut rng);
                counts[m.output_index(a, b, c)] += 1;
            }
            for (o, &p) in row.iter().enumerate() {
                let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
                let diff = (counts[o] as f64 - draws as f64 * p).abs();
                assert!(diff <= 3.0 * sigma + 1e-9, "x={x} o={o}: {diff} > 3σ={}", 3.0 * sigma);
            }
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let err = run_trials(&m, &config(16, 2, 0)).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn noiseless_zero_errors() {
        let id = identity_matrix();
        let m = JointModel::from_components([0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0], [0, 0, 0, 0, 1, 1, 1, 1], &id, &id, &bec_matrix(0.5)).unwrap();
        let mut cfg = config(16, 2, 100);
        cfg.metrics.per_trial = true;
        let rep = run_trials(&m, &cfg).unwrap();
        for st in &rep.receivers {
            assert_eq!(st.block_errors, 0);
        }
        // Corner 1 with constant U: all message bits go to receiver 1.
        assert!(rep.receivers[0].message_bits > 0);
        assert_eq!(rep.per_trial.len(), 100);
    }

    #[test]
    fn report_counts_and_reproducibility() {
        let m = JointModel::bec_triple(0.4, 0.3, 0.6).unwrap();
        let mut cfg = config(64, 2, 30);
        cfg.metrics.per_trial = true;
        let a = run_trials(&m, &cfg).unwrap();
        let b = run_trials(&m, &cfg).unwrap();
        for (ra, rb) in a.receivers.iter().zip(&b.receivers) {
            assert_eq!(ra, rb);
            assert!(ra.block_errors <= a.trials);
            assert!((0.0..=1.0).contains(&ra.error_rate));
        }
        // Error rate = trials with any mismatch / trials.
        for r in 0..2 {
            let any = a.per_trial.iter().filter(|t| t.bit_errors[r] > 0).count();
            assert_eq!(a.receivers[r].block_errors, any);
            assert_eq!(a.receivers[r].error_rate, any as f64 / a.trials as f64);
        }
        assert_eq!(a.per_trial, b.per_trial);
        assert_eq!(a.csv_record().len(), ExperimentReport::CSV_HEADER.len());
    }
}
