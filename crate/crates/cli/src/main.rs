//! `polar-wtbc`: batch front end for chained wiretap broadcast polar codes.
//!
//! # Subcommands
//!
//! | command    | work                                                        |
//! |------------|-------------------------------------------------------------|
//! | `region`   | information quantities, region bounds and both corner points |
//! | `sets`     | entropy profiles, threshold sets and chaining plans          |
//! | `simulate` | Monte-Carlo encode / channel / decode trials                 |
//! | `verify`   | exact distribution-approximation TV and exact leakage        |
//! | `rates`    | empirical rates swept over `n` or over the block count `L`   |
//!
//! # Configuration
//!
//! One JSON file per run (`--config`). It holds the model (inline under
//! `model` or as `model_path`, relative to the config file), the `code`
//! parameters and optional per-subcommand sections:
//!
//! ```json
//! {
//!   "model_path": "bec.json",
//!   "code": {"n": 64, "beta": 0.2, "blocks": 4, "method": "exact"},
//!   "corner": 1, "seed": 7,
//!   "simulate": {"trials": 200},
//!   "verify": {"cap": 16777216},
//!   "rates": {"sweep": "n", "values": [8, 16, 32]}
//! }
//! ```
//!
//! Command-line flags override the file. All randomness derives from the
//! single run seed through named streams (`profiles`, `trials`).
//!
//! # Outputs
//!
//! Everything goes to `--out`: `manifest.json` (resolved settings), one
//! `<command>.json` report and one `<command>.csv` table, and `meta.json`
//! (timestamp, wall-clock runtime). Every file except `meta.json` is a pure
//! function of the config and the seed.
//!
//! # Exit codes
//!
//! `0` success, `2` validation error, `3` infeasible plan, `4` state-space
//! cap, `1` runtime failure. Every failure writes a machine-readable
//! `error.json` (and the same record as one line on stderr).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use polar_wtbc::analysis::{bound_report, corner_point, empirical_rates, exact_leakage, exact_tv, region_bounds, RateTuple};
use polar_wtbc::channel_sim::{run_trials, ExperimentConfig, ExperimentReport, Metrics};
use polar_wtbc::dms_model::{classify_situation, information_quantities, model_from_json, JointModel};
use polar_wtbc::error::{Error, ErrorClass};
use polar_wtbc::polar_core::{CodeConfig, ProfileMethod, DEFAULT_EXACT_CAP, DEFAULT_SAMPLES};
use polar_wtbc::set_builder::{design, plans_to_text, threshold_sets, IndexSet, SchemeDesign};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "polar-wtbc", version, about = "Chained polar codes for the wiretap broadcast channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corner point in the caller's receiver labels (overrides the config).
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    corner: Option<u8>,
    /// Truncate infeasible plans instead of failing.
    #[arg(long, global = true)]
    relax: bool,
    /// Entropy-profile method (overrides the config).
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Monte-Carlo sample count (overrides the config).
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Region bounds and corner points of the model.
    Region,
    /// Entropy profiles, index sets and chaining plans.
    Sets,
    /// Monte-Carlo reliability trials.
    Simulate,
    /// Exact TV distance and leakage (small n only).
    Verify,
    /// Empirical rates over a sweep of n or L.
    Rates,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Region => "region",
            Command::Sets => "sets",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Rates => "rates",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    /// Inline model (same format as a model file).
    #[serde(default)]
    model: Option<Value>,
    /// Model file, relative to the config file.
    #[serde(default)]
    model_path: Option<PathBuf>,
    code: CodeSection,
    #[serde(default = "default_corner")]
    corner: u8,
    #[serde(default)]
    relax: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    verify: VerifySection,
    #[serde(default)]
    rates: RatesSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeSection {
    n: usize,
    beta: f64,
    blocks: usize,
    #[serde(default)]
    method: Option<ProfileMethod>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    exact_cap: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateSection {
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_true")]
    keys_enabled: bool,
    #[serde(default)]
    per_trial: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { trials: default_trials(), keys_enabled: true, per_trial: false }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    #[serde(default = "default_cap")]
    cap: f64,
    #[serde(default = "default_true")]
    keys_enabled: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { cap: default_cap(), keys_enabled: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum Sweep {
    N,
    Blocks,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesSection {
    #[serde(default = "default_sweep")]
    sweep: Sweep,
    /// Sweep values (defaults to the configured `n` or `blocks`).
    #[serde(default)]
    values: Vec<usize>,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection { sweep: default_sweep(), values: Vec::new() }
    }
}

fn default_corner() -> u8 {
    1
}
fn default_trials() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_cap() -> f64 {
    DEFAULT_EXACT_CAP
}
fn default_sweep() -> Sweep {
    Sweep::N
}

/// Resolved settings of one run (config file + flag overrides).
#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: Command,
    config: String,
    seed: u64,
    corner: u8,
    relax: bool,
    code: CodeConfig,
    /// Seeds of the named random streams.
    streams: Vec<(String, u64)>,
}

// ---------------------------------------------------------------------------
// Failures
// ---------------------------------------------------------------------------

/// A failure with its exit class.
#[derive(Debug)]
struct Failure {
    kind: String,
    class: ErrorClass,
    message: String,
}

impl Failure {
    fn validation(kind: &str, message: impl Into<String>) -> Self {
        Failure { kind: kind.into(), class: ErrorClass::Validation, message: message.into() }
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Validation => 2,
            ErrorClass::Infeasible => 3,
            ErrorClass::StateCap => 4,
            ErrorClass::Runtime => 1,
        }
    }

    fn record(&self) -> Value {
        json!({
            "error": self.kind,
            "class": self.class,
            "exit_code": self.exit_code(),
            "message": self.message,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { kind: e.kind().into(), class: e.class(), message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// Seed of the random stream `name` split off the run seed: FNV-1a of the
/// name mixed into the seed and passed through a SplitMix64 finalizer.
fn stream_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Run context
// ---------------------------------------------------------------------------

/// Everything a subcommand needs.
struct Run {
    command: Command,
    config: RunConfig,
    model: JointModel,
    code: CodeConfig,
    corner: u8,
    relax: bool,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn load(cli: &Cli) -> CliResult<Run> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Failure::validation("MissingConfig", "--config <FILE> is required"))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::validation("ConfigUnreadable", format!("{}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Failure::validation("Parse", format!("{}: {e}", path.display())))?;
        let model_value = match (&config.model, &config.model_path) {
            (Some(v), None) => v.clone(),
            (None, Some(p)) => {
                let full = path.parent().unwrap_or(Path::new(".")).join(p);
                let t = fs::read_to_string(&full)
                    .map_err(|e| Failure::validation("ModelUnreadable", format!("{}: {e}", full.display())))?;
                serde_json::from_str(&t).map_err(|e| Failure::validation("Parse", format!("{}: {e}", full.display())))?
            }
            _ => return Err(Failure::validation("InvalidConfig", "exactly one of `model` and `model_path` is required")),
        };
        let model = model_from_json(&model_value)?;
        let seed = cli.seed.unwrap_or(config.seed);
        let corner = cli.corner.unwrap_or(config.corner);
        if corner != 1 && corner != 2 {
            return Err(Error::InvalidConfig(format!("corner must be 1 or 2, got {corner}")).into());
        }
        let method = match cli.method {
            Some(MethodArg::Exact) => ProfileMethod::Exact,
            Some(MethodArg::Mc) => ProfileMethod::Mc,
            None => config.code.method.unwrap_or(ProfileMethod::Exact),
        };
        let code = CodeConfig {
            n: config.code.n,
            beta: config.code.beta,
            blocks: config.code.blocks,
            method,
            samples: cli.samples.or(config.code.samples).unwrap_or(DEFAULT_SAMPLES),
            seed: stream_seed(seed, "profiles"),
            exact_cap: config.code.exact_cap.unwrap_or(DEFAULT_EXACT_CAP),
        };
        code.validate()?;
        fs::create_dir_all(&cli.out)
            .map_err(|e| Failure::validation("OutputNotWritable", format!("{}: {e}", cli.out.display())))?;
        Ok(Run {
            command: cli.command,
            relax: cli.relax || config.relax,
            config,
            model,
            code,
            corner,
            seed,
            out: cli.out.clone(),
        })
    }

    fn manifest(&self, config_path: &Path) -> RunManifest {
        RunManifest {
            subcommand: self.command,
            config: config_path.display().to_string(),
            seed: self.seed,
            corner: self.corner,
            relax: self.relax,
            code: self.code.clone(),
            streams: ["profiles", "trials"].iter().map(|s| (s.to_string(), stream_seed(self.seed, s))).collect(),
        }
    }

    fn design(&self, code: &CodeConfig) -> CliResult<SchemeDesign> {
        Ok(design(&self.model, code, self.corner, self.relax)?)
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| runtime("Serialize", e))?;
        text.push('\n');
        fs::write(self.out.join(name), text).map_err(|e| runtime("Io", e))
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.out.join(name)).map_err(|e| runtime("Io", e))?;
        w.write_record(header).map_err(|e| runtime("Io", e))?;
        for r in rows {
            w.write_record(r).map_err(|e| runtime("Io", e))?;
        }
        w.flush().map_err(|e| runtime("Io", e))
    }

    fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        fs::write(self.out.join(name), text).map_err(|e| runtime("Io", e))
    }
}

fn runtime(kind: &str, e: impl fmt::Display) -> Failure {
    Failure { kind: kind.into(), class: ErrorClass::Runtime, message: e.to_string() }
}

fn indices(s: &IndexSet) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn rate_json(t: &RateTuple) -> Value {
    json!({"rs1": t.rs[0], "rs2": t.rs[1], "rw1": t.rw[0], "rw2": t.rw[1], "negative": t.negative})
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_region(run: &Run) -> CliResult<()> {
    let report = information_quantities(&run.model);
    let situation = classify_situation(&report);
    let bounds = region_bounds(&report);
    let corners = [corner_point(&report, 1)?, corner_point(&report, 2)?];
    let membership: Vec<bool> = (0..2).map(|k| bounds.corners[k].contains(&corners[k])).collect();
    let value = json!({
        "requested_corner": run.corner,
        "situation": situation,
        "information": report,
        "bounds": bounds,
        "corner_points": [rate_json(&corners[0]), rate_json(&corners[1])],
        "corner_in_region": membership,
    });
    run.write_json("region.json", &value)?;
    let mut rows = Vec::new();
    for (k, c) in corners.iter().enumerate() {
        let [rs1, rs2, rw1, rw2] = c.components();
        rows.push(vec![(k + 1).to_string(), rs1.to_string(), rs2.to_string(), rw1.to_string(), rw2.to_string(), membership[k].to_string()]);
    }
    run.write_csv("region.csv", &["corner", "rs1", "rs2", "rw1", "rw2", "in_region"], &rows)
}

fn cmd_sets(run: &Run) -> CliResult<()> {
    let d = run.design(&run.code)?;
    let delta = run.code.delta();
    let mut rows = Vec::new();
    let profiles: Vec<Value> = d
        .profiles
        .iter()
        .map(|p| {
            let t = threshold_sets(p, delta);
            let layer = p.layer.to_string();
            rows.push(vec!["profile_H".into(), layer.clone(), t.h.len().to_string(), indices(&t.h)]);
            rows.push(vec!["profile_L".into(), layer.clone(), t.l.len().to_string(), indices(&t.l)]);
            json!({
                "layer": layer,
                "method": p.method,
                "samples": p.samples,
                "values": p.values,
                "max_ci_width": p.max_ci_width,
                "h": t.h.to_vec(),
                "l": t.l.to_vec(),
                "remainder_fraction": t.remainder_fraction,
            })
        })
        .collect();
    let named = |sets: Vec<(&'static str, &IndexSet)>, scope: &str, rows: &mut Vec<Vec<String>>| -> Value {
        let mut m = serde_json::Map::new();
        for (name, s) in sets {
            rows.push(vec![scope.into(), name.into(), s.len().to_string(), indices(s)]);
            m.insert(name.into(), json!(s.to_vec()));
        }
        Value::Object(m)
    };
    let inner = named(d.plan.named_sets(), "inner", &mut rows);
    let outer = named(d.outer.named_sets(), "outer", &mut rows);
    let value = json!({
        "n": d.config.n,
        "blocks": d.config.blocks,
        "delta": delta,
        "requested_corner": d.requested_corner,
        "normalized_corner": d.corner,
        "swapped": d.swapped(),
        "case": format!("{:?}", d.case.case),
        "situation": format!("{:?}", d.situation),
        "mi_situation": d.mi_situation,
        "relax": d.relax,
        "profiles": profiles,
        "inner": inner,
        "outer": outer,
        "notes": d.notes,
    });
    run.write_json("sets.json", &value)?;
    run.write_text("plans.txt", &plans_to_text(&d.plan, &d.outer))?;
    run.write_csv("sets.csv", &["scope", "name", "size", "indices"], &rows)
}

fn cmd_simulate(run: &Run) -> CliResult<f64> {
    let s = &run.config.simulate;
    let config = ExperimentConfig {
        model_path: run.config.model_path.as_ref().map(|p| p.display().to_string()),
        code: run.code.clone(),
        corner: run.corner,
        trials: s.trials,
        seed: stream_seed(run.seed, "trials"),
        relax: run.relax,
        keys_enabled: s.keys_enabled,
        metrics: Metrics { per_trial: s.per_trial },
    };
    let report = run_trials(&run.model, &config)?;
    let runtime = report.runtime_secs;
    // The wall-clock field goes to meta.json only.
    let mut value = serde_json::to_value(&report).map_err(runtime_err)?;
    if let Value::Object(m) = &mut value {
        m.remove("runtime_secs");
    }
    run.write_json("simulate.json", &value)?;
    run.write_csv("simulate.csv", &ExperimentReport::CSV_HEADER, &[report.csv_record()])?;
    Ok(runtime)
}

fn runtime_err(e: impl fmt::Display) -> Failure {
    runtime("Serialize", e)
}

fn cmd_verify(run: &Run) -> CliResult<()> {
    let v = &run.config.verify;
    let d = run.design(&run.code)?;
    let tv = exact_tv(&d, v.cap)?;
    let lk = exact_leakage(&d, v.keys_enabled, None, v.cap)?;
    let b = bound_report(run.code.n, run.code.beta, run.code.blocks);
    let value = json!({
        "n": run.code.n,
        "blocks": run.code.blocks,
        "beta": run.code.beta,
        "corner": run.corner,
        "relax": d.relax,
        "keys_enabled": v.keys_enabled,
        "tv": tv.tv,
        "tv_per_block": tv.per_block,
        "tv_paths": tv.paths,
        "leakage": lk.leakage,
        "leakage_with_side_info": lk.leakage_with_side_info,
        "confidential_bits": lk.confidential_bits,
        "leakage_paths": lk.paths,
        "delta_n": b.delta_n,
        "delta_star": b.delta_star,
        "delta_s": b.delta_s,
        "leakage_bound": b.leakage_bound,
        "tv_within_bound": tv.within_bound,
        "leakage_within_bound": lk.within_bound,
    });
    run.write_json("verify.json", &value)?;
    let row = vec![
        run.code.n.to_string(),
        run.code.blocks.to_string(),
        run.corner.to_string(),
        tv.tv.to_string(),
        lk.leakage.to_string(),
        lk.leakage_with_side_info.to_string(),
        b.delta_star.to_string(),
        b.delta_s.to_string(),
        b.leakage_bound.to_string(),
    ];
    run.write_csv(
        "verify.csv",
        &["n", "blocks", "corner", "tv", "leakage", "leakage_with_side_info", "delta_star", "delta_s", "leakage_bound"],
        &[row],
    )
}

fn cmd_rates(run: &Run) -> CliResult<()> {
    let r = &run.config.rates;
    let values = if r.values.is_empty() {
        vec![match r.sweep {
            Sweep::N => run.code.n,
            Sweep::Blocks => run.code.blocks,
        }]
    } else {
        r.values.clone()
    };
    let target = corner_point(&information_quantities(&run.model), run.corner)?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    let mut first_error = None;
    for &x in &values {
        let mut code = run.code.clone();
        match r.sweep {
            Sweep::N => code.n = x,
            Sweep::Blocks => code.blocks = x,
        }
        let outcome = code.validate().map_err(Failure::from).and_then(|_| run.design(&code)).and_then(|d| Ok(empirical_rates(&d)?));
        match outcome {
            Ok(e) => {
                let c = e.rates.components();
                let t = target.components();
                let gaps: Vec<f64> = (0..4).map(|i| (c[i] - t[i]).abs()).collect();
                let mut row = vec![code.n.to_string(), code.blocks.to_string(), "ok".into()];
                row.extend(c.iter().map(|v| v.to_string()));
                row.extend(gaps.iter().map(|v| v.to_string()));
                row.push(e.overhead.key_rate.to_string());
                rows.push(row);
                points.push(json!({"n": code.n, "blocks": code.blocks, "status": "ok", "rates": e, "gaps": gaps}));
            }
            Err(f) => {
                let mut row = vec![code.n.to_string(), code.blocks.to_string(), f.kind.clone()];
                row.extend(std::iter::repeat_n(String::new(), 9));
                rows.push(row);
                points.push(json!({"n": code.n, "blocks": code.blocks, "status": f.kind, "error": f.message}));
                first_error.get_or_insert(f);
            }
        }
    }
    let value = json!({
        "sweep": r.sweep,
        "corner": run.corner,
        "corner_point": rate_json(&target),
        "points": points,
    });
    run.write_json("rates.json", &value)?;
    run.write_csv(
        "rates.csv",
        &["n", "blocks", "status", "rs1", "rs2", "rw1", "rw2", "gap_rs1", "gap_rs2", "gap_rw1", "gap_rw2", "key_rate"],
        &rows,
    )?;
    // A sweep with no usable point is a failure of the whole run.
    match first_error {
        Some(f) if rows.iter().all(|r| r[2] != "ok") => Err(f),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn execute(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let run = Run::load(cli)?;
    run.write_json("manifest.json", &run.manifest(cli.config.as_deref().unwrap_or(Path::new(""))))?;
    log::info!("running `{}` with seed {}", run.command.name(), run.seed);
    let mut meta = json!({
        "subcommand": run.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    });
    match run.command {
        Command::Region => cmd_region(&run)?,
        Command::Sets => cmd_sets(&run)?,
        Command::Simulate => {
            let t = cmd_simulate(&run)?;
            meta["trials_runtime_secs"] = json!(t);
        }
        Command::Verify => cmd_verify(&run)?,
        Command::Rates => cmd_rates(&run)?,
    }
    meta["runtime_secs"] = json!(start.elapsed().as_secs_f64());
    run.write_json("meta.json", &meta)
}

fn report_failure(f: &Failure, out: Option<&Path>) {
    let record = f.record();
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), format!("{}\n", serde_json::to_string_pretty(&record).unwrap_or_default()));
        }
    }
    eprintln!("{record}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::validation("Usage", e.to_string().trim().to_string());
            report_failure(&f, None);
            return ExitCode::from(f.exit_code());
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_failure(&f, Some(&cli.out));
            ExitCode::from(f.exit_code())
        }
    }
}
