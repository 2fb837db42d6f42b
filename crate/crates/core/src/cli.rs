//! Command-line front end: configuration files, subcommands and reports.
//!
//! Every report is a JSON object `{command, partial, config, metadata,
//! result}`. The embedded `config` is the fully resolved [`RunConfig`], so
//! passing a report back through `--config` reruns the same computation and
//! produces the same bytes. CSV output carries the same numbers as plain
//! columns, preceded by `#` comment lines holding the config and metadata.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable input, 3 invalid
//! model, 4 node budget exceeded (a partial enumeration report is written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::decompose::{
    crossing_profile, diamond_times, hw_decompose, irreducible_pieces, is_bridge,
    renewal_crossing_sandwich, renewal_times, width, zigzags,
};
use crate::enumerate::{
    bridge_gap_constants, enumerate_sharded, evaluate_series, kesten_trace, lambda_bracket,
    EnumerateOptions, EnumerationReport, DEFAULT_NODE_BUDGET,
};
use crate::lattice::{LatticeVector, StepSet, Walk};
use crate::model::{validate_potential, JumpDistribution, Model, PotentialKind, DEFAULT_CAP};
use crate::montecarlo::{
    ballistic_scan, diamond_density_estimate, exact_sample, mcmc_sample, simulate_ib_process,
    verify_conditional_identity, BallisticConfig, DiamondDensityConfig, IbLibrary, McmcConfig,
    SamplingMode, RNG_NAME,
};
use crate::par::{with_threads, Execution};
use crate::transform::{stickbreak_recorded, unfold_recorded};
use crate::Error;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// A real number that may be `+∞`, written as `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedReal(pub f64);

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtendedReal(v)),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" | "+infinity" => Ok(ExtendedReal(f64::INFINITY)),
                _ => Err(de::Error::custom(format!(
                    "expected a number or \"inf\", got {t:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RhoConfig {
    #[default]
    Uniform,
    Explicit {
        values: Vec<f64>,
    },
    Rational {
        numerators: Vec<u64>,
        denominator: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiConfig {
    Free {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    Saw {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    Weak {
        k: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    Table {
        values: Vec<ExtendedReal>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig::Free { cap: None }
    }
}

/// The model section of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    /// Explicit step set; nearest-neighbour steps when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<Vec<i32>>>,
    pub rho: RhoConfig,
    pub phi: PhiConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dimension: 2,
            steps: None,
            rho: RhoConfig::Uniform,
            phi: PhiConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> crate::Result<Model> {
        let steps = match &self.steps {
            Some(list) => {
                if let Some(bad) = list.iter().find(|s| s.len() != self.dimension) {
                    return Err(Error::MixedDimension {
                        expected: self.dimension,
                        found: bad.len(),
                    });
                }
                StepSet::validate(list.iter().map(|s| LatticeVector::new(s)).collect())?
            }
            None => StepSet::nearest_neighbor(self.dimension)?,
        };
        let rho = match &self.rho {
            RhoConfig::Uniform => JumpDistribution::uniform(steps),
            RhoConfig::Explicit { values } => JumpDistribution::explicit(steps, values.clone())?,
            RhoConfig::Rational {
                numerators,
                denominator,
            } => JumpDistribution::rational(steps, numerators.clone(), *denominator)?,
        };
        let phi = match &self.phi {
            PhiConfig::Free { cap } => {
                validate_potential(PotentialKind::Free, cap.unwrap_or(DEFAULT_CAP))?
            }
            PhiConfig::Saw { cap } => {
                validate_potential(PotentialKind::Saw, cap.unwrap_or(DEFAULT_CAP))?
            }
            PhiConfig::Weak { k, cap } => {
                validate_potential(PotentialKind::Weak { k: *k }, cap.unwrap_or(DEFAULT_CAP))?
            }
            PhiConfig::Table { values, cap } => {
                let values: Vec<f64> = values.iter().map(|v| v.0).collect();
                let cap = cap.unwrap_or(values.len().saturating_sub(1));
                validate_potential(PotentialKind::Table { values }, cap)?
            }
        };
        Ok(Model::new(rho, phi))
    }
}

/// A walk given either as compass letters (`"EENWN"`) or as a point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WalkInput {
    Compass(String),
    Points(Vec<Vec<i32>>),
}

impl WalkInput {
    fn parse(text: &str) -> Result<WalkInput, String> {
        let t = text.trim();
        if t.starts_with('[') {
            serde_json::from_str(t)
                .map(WalkInput::Points)
                .map_err(|e| format!("cannot parse walk points: {e}"))
        } else {
            Ok(WalkInput::Compass(t.to_string()))
        }
    }

    fn to_walk(&self, steps: &StepSet) -> Result<Walk, String> {
        let walk = match self {
            WalkInput::Compass(s) => {
                if !steps.has_compass_steps() {
                    return Err(
                        "compass letters need a two-dimensional step set with the unit steps"
                            .into(),
                    );
                }
                Walk::from_compass(s).map_err(|e| e.to_string())?
            }
            WalkInput::Points(p) => Walk::from_points(p).map_err(|e| e.to_string())?,
        };
        walk.validate(steps).map_err(|e| e.to_string())?;
        Ok(walk)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateParams {
    pub max_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_depth: Option<usize>,
    /// Extra rates at which the truncated series are evaluated.
    pub lambdas: Vec<f64>,
}

impl Default for EnumerateParams {
    fn default() -> Self {
        EnumerateParams {
            max_len: 8,
            prefix_depth: None,
            lambdas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    #[default]
    Unfold,
    Stickbreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TransformParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkInput>,
    pub operation: Operation,
    /// Zigzag pairs to unfold, or the single pair of diamond times.
    pub sites: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    #[default]
    Exact,
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub chains: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub pivot_probability: f64,
    pub max_window: usize,
    pub batches: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        let d = McmcConfig::default();
        McmcSettings {
            chains: d.chains,
            sweeps: d.sweeps,
            burn_in: d.burn_in,
            pivot_probability: d.pivot_probability,
            max_window: d.max_window,
            batches: d.batches,
        }
    }
}

impl McmcSettings {
    fn config(&self, n: usize, seed: u64) -> McmcConfig {
        McmcConfig {
            n,
            chains: self.chains,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            seed,
            pivot_probability: self.pivot_probability,
            max_window: self.max_window,
            batches: self.batches,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleParams {
    pub mode: SampleMode,
    pub n: usize,
    /// Number of exact samples.
    pub count: usize,
    pub mcmc: McmcSettings,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            mode: SampleMode::Exact,
            n: 6,
            count: 1000,
            mcmc: McmcSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallisticParams {
    pub schedule: Vec<usize>,
    pub velocities: Vec<f64>,
    pub mode: SamplingMode,
    /// Largest walk tree evaluated exactly in `auto` mode.
    pub exact_limit: u64,
    pub mcmc: McmcSettings,
}

impl Default for BallisticParams {
    fn default() -> Self {
        let d = BallisticConfig::default();
        BallisticParams {
            schedule: d.schedule,
            velocities: d.velocities,
            mode: d.mode,
            exact_limit: d.exact_budget,
            mcmc: McmcSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IbParams {
    pub truncation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub pieces: usize,
    /// Cone windows for the diamond-density estimate.
    pub windows: Vec<usize>,
    pub batches: usize,
}

impl Default for IbParams {
    fn default() -> Self {
        IbParams {
            truncation: 8,
            lambda: None,
            pieces: 1000,
            windows: vec![10],
            batches: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub lengths: Vec<usize>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams { lengths: vec![4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Everything that determines a report. Output path and thread count are
/// deliberately absent: neither changes the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub seed: u64,
    /// Node budget for every exhaustive enumeration.
    pub budget: u64,
    pub format: OutputFormat,
    pub enumerate: EnumerateParams,
    pub decompose: DecomposeParams,
    pub transform: TransformParams,
    pub sample: SampleParams,
    pub ballistic: BallisticParams,
    pub ibprocess: IbParams,
    pub verify: VerifyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            seed: 0,
            budget: DEFAULT_NODE_BUDGET,
            format: OutputFormat::Json,
            enumerate: EnumerateParams::default(),
            decompose: DecomposeParams::default(),
            transform: TransformParams::default(),
            sample: SampleParams::default(),
            ballistic: BallisticParams::default(),
            ibprocess: IbParams::default(),
            verify: VerifyParams::default(),
        }
    }
}

impl RunConfig {
    /// Parses a configuration file, or the config embedded in a report.
    pub fn from_json(text: &str) -> Result<RunConfig, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let inner = match value.get("config") {
            Some(c) if value.get("result").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "polymer-lab",
    version,
    about = "Self-repelling lattice polymers: enumeration, decompositions and sampling"
)]
pub struct Cli {
    /// JSON configuration file (or a previous report to rerun).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, env = "POLYMER_LAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Node budget for exhaustive enumeration.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition functions, bridge sums and the λ bracket up to a length.
    Enumerate(EnumerateArgs),
    /// Renewal times, bridge decomposition, crossings, zigzags and diamonds of a walk.
    Decompose(WalkArgs),
    /// Unfold zigzags or stickbreak between diamond times.
    Transform(TransformArgs),
    /// Exact or Markov-chain samples of the polymer measure.
    Sample(SampleArgs),
    /// Displacement and tail diagnostics over a schedule of lengths.
    Ballistic(BallisticArgs),
    /// Simulate the irreducible-bridge renewal process.
    Ibprocess(IbArgs),
    /// Check that bridges are renewal-conditioned concatenations.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Enumerate(_) => "enumerate",
            Command::Decompose(_) => "decompose",
            Command::Transform(_) => "transform",
            Command::Sample(_) => "sample",
            Command::Ballistic(_) => "ballistic",
            Command::Ibprocess(_) => "ibprocess",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long = "max-len", short = 'n')]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub prefix_depth: Option<usize>,
    /// Evaluate the truncated series at this rate (repeatable).
    #[arg(long = "lambda", allow_hyphen_values = true)]
    pub lambdas: Vec<f64>,
    /// Run the shards on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Compass letters (E/W/N/S) or a JSON list of points.
    #[arg(long)]
    pub walk: Option<String>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub walk: Option<String>,
    #[arg(long = "op", value_enum)]
    pub operation: Option<Operation>,
    /// Site pair `i,j` (repeatable).
    #[arg(long = "site", value_parser = parse_pair)]
    pub sites: Vec<(usize, usize)>,
}

#[derive(Debug, Args)]
pub struct McmcArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub mode: Option<SampleMode>,
    #[arg(long, short = 'n')]
    pub n: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Args)]
pub struct BallisticArgs {
    /// Lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Velocities, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub velocities: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_sampling_mode)]
    pub mode: Option<SamplingMode>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Args)]
pub struct IbArgs {
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub pieces: Option<usize>,
    /// Diamond windows, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Bridge length (repeatable).
    #[arg(long = "n", short = 'n')]
    pub lengths: Vec<usize>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn parse_sampling_mode(s: &str) -> Result<SamplingMode, String> {
    match s {
        "auto" => Ok(SamplingMode::Auto),
        "exact" => Ok(SamplingMode::Exact),
        "mcmc" => Ok(SamplingMode::Mcmc),
        _ => Err(format!("unknown mode {s:?} (auto, exact, mcmc)")),
    }
}

/// A failure with its exit code and, for budget overruns, a partial result.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub partial: Option<Value>,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
            partial: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if e.is_model_error() {
            EXIT_MODEL
        } else if matches!(e, Error::BudgetExceeded { .. }) {
            EXIT_BUDGET
        } else {
            EXIT_OTHER
        };
        let partial = match &e {
            Error::BudgetExceeded {
                partial: Some(report),
                ..
            } => Some(
                enumeration_result(report, &[]).unwrap_or_else(|_| json!({ "report": report })),
            ),
            _ => None,
        };
        Failure {
            code,
            message: e.to_string(),
            partial,
        }
    }
}

/// Output of one command: the JSON result, a CSV table and a short summary.
pub struct Outcome {
    pub result: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<String>,
}

/// Decimal rendering with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialise")
}

fn walk_text(w: &Walk) -> String {
    w.to_compass()
        .unwrap_or_else(|| serde_json::to_string(w).expect("walks serialise"))
}

fn enumeration_result(report: &EnumerationReport, lambdas: &[f64]) -> crate::Result<Value> {
    let bracket = if report.max_len >= 1 {
        lambda_bracket(report).ok()
    } else {
        None
    };
    let kesten = bracket.as_ref().map(|b| {
        json!({
            "lambda": b.upper,
            "partial_sums": kesten_trace(report, b.upper),
        })
    });
    let series: Vec<Value> = lambdas
        .iter()
        .map(|&l| to_value(&evaluate_series(report, l)))
        .collect();
    Ok(json!({
        "report": report,
        "bracket": bracket,
        "kesten": kesten,
        "series": series,
        "bridge_gap_constants": if report.max_len >= 1 { bridge_gap_constants(report) } else { Vec::new() },
    }))
}

fn cmd_enumerate(cfg: &RunConfig, model: &Model, sequential: bool) -> Result<Outcome, Failure> {
    let p = &cfg.enumerate;
    let mut opts = EnumerateOptions::new(p.max_len).node_budget(cfg.budget);
    if let Some(d) = p.prefix_depth {
        opts = opts.prefix_depth(d);
    }
    if sequential {
        opts = opts.execution(Execution::Sequential);
    }
    let report = enumerate_sharded(model, &opts)?;
    let result = enumeration_result(&report, &p.lambdas)?;
    let kesten: Vec<f64> = result["kesten"]["partial_sums"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default();
    let header = [
        "n",
        "z",
        "log_z",
        "h",
        "zplus",
        "ib_mass",
        "kesten_partial_sum",
        "configurations",
        "bridges",
        "irreducible_bridges",
        "exact_z_numerator",
        "exact_h_numerator",
    ];
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.z),
                fmt_f64(r.log_z),
                fmt_f64(r.h),
                fmt_f64(r.zplus),
                fmt_f64(r.ib_mass),
                if r.n == 0 {
                    String::new()
                } else {
                    kesten.get(r.n - 1).map(|&s| fmt_f64(s)).unwrap_or_default()
                },
                r.configurations.to_string(),
                r.bridges.to_string(),
                r.irreducible_bridges.to_string(),
                fmt_opt(r.exact_z_numerator),
                fmt_opt(r.exact_h_numerator),
            ]
        })
        .collect();
    let mut summary = vec![format!(
        "enumerated {} nodes up to n = {}",
        report.nodes, report.max_len
    )];
    if let Some(b) = result["bracket"].as_object() {
        summary.push(format!("lambda bracket [{}, {}]", b["lower"], b["upper"]));
    }
    Ok(Outcome {
        result,
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
        summary,
    })
}

fn required_walk(input: &Option<WalkInput>, model: &Model) -> Result<Walk, Failure> {
    input
        .as_ref()
        .ok_or_else(|| Failure::parse("a walk is required (--walk)"))?
        .to_walk(model.steps())
        .map_err(Failure::parse)
}

fn cmd_decompose(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let w = required_walk(&cfg.decompose.walk, model)?;
    let bridge = is_bridge(&w);
    let mut result = json!({
        "walk": walk_text(&w),
        "length": w.len(),
        "is_bridge": bridge,
        "renewal_times": renewal_times(&w).times,
        "hw_decomposition": hw_decompose(&w, model.steps()),
        "crossing_profile": crossing_profile(&w),
    });
    if bridge {
        result["irreducible_pieces"] = to_value(
            &irreducible_pieces(&w)?
                .iter()
                .map(walk_text)
                .collect::<Vec<_>>(),
        );
        result["renewal_crossing_sandwich"] =
            to_value(&renewal_crossing_sandwich(&w, model.steps().x_extent()));
        result["zigzags"] = to_value(&zigzags(&w)?.pairs);
        if w.dim() >= 2 {
            result["diamond_times"] = to_value(&diamond_times(&w)?);
        }
    }
    if w.dim() >= 2 {
        result["width"] = to_value(&width(&w));
    }
    let rows = result
        .as_object()
        .expect("object")
        .iter()
        .map(|(k, v)| vec![k.clone(), v.to_string()])
        .collect();
    Ok(Outcome {
        summary: vec![format!("decomposed a walk of length {}", w.len())],
        result,
        header: vec!["quantity".into(), "value".into()],
        rows,
    })
}

fn cmd_transform(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let p = &cfg.transform;
    let w = required_walk(&p.walk, model)?;
    let record = match p.operation {
        Operation::Unfold => unfold_recorded(model, &w, &p.sites, true)?,
        Operation::Stickbreak => {
            let &[(i, j)] = p.sites.as_slice() else {
                return Err(Failure::parse("stickbreak takes exactly one site pair"));
            };
            stickbreak_recorded(model, &w, i, j, true)?
        }
    };
    let mut result = to_value(&record);
    result["output_walk"] = Value::String(walk_text(&record.output));
    let mut rows: Vec<Vec<String>> = record
        .output
        .points()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![k.to_string()];
            row.extend(p.iter().map(|c| c.to_string()));
            row
        })
        .collect();
    rows.extend(
        record
            .checks
            .iter()
            .map(|(k, v)| vec![format!("check:{k}"), v.to_string()]),
    );
    let mut header = vec!["index".to_string()];
    header.extend((0..w.dim()).map(|k| format!("x{k}")));
    let summary = vec![
        format!("output walk {}", walk_text(&record.output)),
        if record.all_passed() {
            "all checks passed".to_string()
        } else {
            format!("failed checks: {}", record.failures().join(", "))
        },
    ];
    Ok(Outcome {
        result,
        header,
        rows,
        summary,
    })
}

fn cmd_sample(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let p = &cfg.sample;
    match p.mode {
        SampleMode::Exact => {
            let walks = exact_sample(model, p.n, p.count, cfg.seed, cfg.budget)?;
            let rows = walks
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let mut row = vec![k.to_string(), walk_text(w)];
                    row.extend(w.endpoint().iter().map(|c| c.to_string()));
                    row
                })
                .collect();
            let mut header = vec!["sample".to_string(), "walk".to_string()];
            header.extend((0..model.dim()).map(|k| format!("end_x{k}")));
            Ok(Outcome {
                summary: vec![format!("{} exact samples of length {}", walks.len(), p.n)],
                result: json!({
                    "mode": "exact",
                    "n": p.n,
                    "walks": walks.iter().map(walk_text).collect::<Vec<_>>(),
                }),
                header,
                rows,
            })
        }
        SampleMode::Mcmc => {
            if p.n == 0 {
                return Err(Failure::parse("MCMC needs n >= 1"));
            }
            let run = mcmc_sample(model, &p.mcmc.config(p.n, cfg.seed))?;
            let (mx, sx) = run.estimate(|e| e.x() as f64);
            let (mn, sn) = run.estimate(|e| {
                e.coords()
                    .iter()
                    .map(|&c| (c as f64).powi(2))
                    .sum::<f64>()
                    .sqrt()
            });
            let stats = run.stats();
            let mut rows = Vec::new();
            for c in &run.chains {
                for (s, e) in c.endpoints.iter().enumerate() {
                    let mut row = vec![c.chain.to_string(), s.to_string()];
                    row.extend(e.coords().iter().map(|v| v.to_string()));
                    rows.push(row);
                }
            }
            let mut header = vec!["chain".to_string(), "sweep".to_string()];
            header.extend((0..model.dim()).map(|k| format!("end_x{k}")));
            Ok(Outcome {
                summary: vec![
                    format!("E x(n) = {mx} ± {sx}"),
                    format!(
                        "acceptance: pivot {:.3}, window {:.3}",
                        stats.pivot_rate(),
                        stats.window_rate()
                    ),
                ],
                result: json!({
                    "mode": "mcmc",
                    "n": p.n,
                    "mean_x": mx,
                    "mean_x_se": sx,
                    "mean_norm": mn,
                    "mean_norm_se": sn,
                    "stats": stats,
                    "chains": run.chains,
                }),
                header,
                rows,
            })
        }
    }
}

fn cmd_ballistic(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let p = &cfg.ballistic;
    if p.schedule.is_empty() {
        return Err(Failure::parse("the schedule is empty"));
    }
    let bc = BallisticConfig {
        schedule: p.schedule.clone(),
        velocities: p.velocities.clone(),
        mode: p.mode,
        exact_budget: p.exact_limit.min(cfg.budget),
        mcmc: p.mcmc.config(0, cfg.seed),
    };
    let report = ballistic_scan(model, &bc)?;
    let mut rows = Vec::new();
    for r in &report.rows {
        let mode = to_value(&r.mode).as_str().unwrap_or_default().to_string();
        let base = vec![
            r.n.to_string(),
            mode,
            fmt_f64(r.mean_norm),
            fmt_f64(r.mean_norm_se),
            fmt_f64(r.exponent),
        ];
        if r.tails.is_empty() {
            let mut row = base.clone();
            row.extend([String::new(), String::new(), String::new()]);
            rows.push(row);
        }
        for t in &r.tails {
            let mut row = base.clone();
            row.extend([
                fmt_f64(t.v),
                fmt_f64(t.probability),
                fmt_f64(t.standard_error),
            ]);
            rows.push(row);
        }
    }
    let header = [
        "n",
        "mode",
        "mean_norm",
        "mean_norm_se",
        "exponent",
        "v",
        "tail",
        "tail_se",
    ];
    Ok(Outcome {
        summary: vec![format!(
            "exponents negative: {}, non-increasing: {}",
            report.exponents_negative, report.exponents_non_increasing
        )],
        result: to_value(&report),
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

fn cmd_ibprocess(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let p = &cfg.ibprocess;
    let lib = IbLibrary::build(model, p.truncation, p.lambda, cfg.budget)?;
    let t = simulate_ib_process(&lib, p.pieces, cfg.seed);
    let shifted = t.shift(&lib);
    let drift = t.drift(p.batches);
    let diamonds = p
        .windows
        .iter()
        .map(|&window| {
            diamond_density_estimate(
                &lib,
                &DiamondDensityConfig {
                    pieces: p.pieces,
                    window,
                    seed: cfg.seed,
                    batches: p.batches,
                },
            )
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let lengths = t.piece_lengths();
    let rows = t
        .renewal_times
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let mut row = vec![(k + 1).to_string(), r.to_string(), lengths[k].to_string()];
            row.extend(t.walk.point(r).iter().map(|c| c.to_string()));
            row
        })
        .collect();
    let mut header = vec![
        "k".to_string(),
        "renewal_time".to_string(),
        "piece_length".to_string(),
    ];
    header.extend((0..model.dim()).map(|k| format!("x{k}")));
    let summary = std::iter::once(format!(
        "drift per piece: dx = {} ± {}, dy = {} ± {}",
        drift.mean_dx, drift.se_dx, drift.mean_dy, drift.se_dy
    ))
    .chain(diamonds.iter().map(|d| {
        format!(
            "diamond density (upper-bound estimate at window {}): {} ± {}",
            d.window, d.density, d.standard_error
        )
    }))
    .collect();
    Ok(Outcome {
        result: json!({
            "library": {
                "truncation": lib.truncation,
                "pieces": lib.len(),
                "lambda": lib.lambda,
                "bracket": lib.bracket,
                "kesten_sum": lib.kesten_sum,
                "truncation_gap": lib.truncation_gap,
                "mean_length": lib.mean_length(),
            },
            "renewal_times": t.renewal_times,
            "piece_indices": t.piece_indices,
            "endpoint": t.walk.endpoint(),
            "shifted_endpoint": shifted.walk.endpoint(),
            "drift": drift,
            "diamond_density": diamonds,
        }),
        header,
        rows,
        summary,
    })
}

fn cmd_verify(cfg: &RunConfig, model: &Model) -> Result<Outcome, Failure> {
    let reports = cfg
        .verify
        .lengths
        .iter()
        .map(|&n| verify_conditional_identity(model, n, cfg.budget))
        .collect::<crate::Result<Vec<_>>>()?;
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.bridges.to_string(),
                r.concatenations.to_string(),
                fmt_f64(r.total_variation),
                r.holds.to_string(),
            ]
        })
        .collect();
    let summary = reports
        .iter()
        .map(|r| format!("n = {}: TV distance {:.1e}", r.n, r.total_variation))
        .collect();
    Ok(Outcome {
        result: to_value(&reports),
        header: ["n", "bridges", "concatenations", "total_variation", "holds"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
        summary,
    })
}

fn metadata() -> Value {
    json!({
        "tool": "polymer-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "rng": RNG_NAME,
    })
}

fn render_json(command: &str, partial: bool, cfg: &RunConfig, result: &Value) -> String {
    let doc = json!({
        "command": command,
        "partial": partial,
        "config": cfg,
        "metadata": metadata(),
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialise");
    s.push('\n');
    s
}

fn render_csv(
    command: &str,
    partial: bool,
    cfg: &RunConfig,
    outcome: &Outcome,
) -> Result<String, Failure> {
    let mut head = String::new();
    let _ = writeln!(head, "# command: {command}");
    let _ = writeln!(head, "# partial: {partial}");
    let _ = writeln!(
        head,
        "# config: {}",
        serde_json::to_string(cfg).expect("config serialises")
    );
    let _ = writeln!(head, "# metadata: {}", metadata());
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    let io = |e: csv::Error| Failure {
        code: EXIT_OTHER,
        message: e.to_string(),
        partial: None,
    };
    w.write_record(&outcome.header).map_err(io)?;
    for row in &outcome.rows {
        w.write_record(row).map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| Failure {
        code: EXIT_OTHER,
        message: e.to_string(),
        partial: None,
    })?;
    Ok(head + &String::from_utf8(body).expect("utf-8"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_OTHER,
            message: format!("cannot write {}: {e}", path.display()),
            partial: None,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure {
                code: EXIT_OTHER,
                message: e.to_string(),
                partial: None,
            })
        }
    }
}

fn resolve(cli: &Cli) -> Result<(RunConfig, bool), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)
                .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    let apply_mcmc = |m: &McmcArgs, s: &mut McmcSettings| {
        if let Some(v) = m.chains {
            s.chains = v;
        }
        if let Some(v) = m.sweeps {
            s.sweeps = v;
        }
        if let Some(v) = m.burn_in {
            s.burn_in = v;
        }
    };
    let mut sequential = false;
    match &cli.command {
        Command::Enumerate(a) => {
            if let Some(n) = a.max_len {
                cfg.enumerate.max_len = n;
            }
            if a.prefix_depth.is_some() {
                cfg.enumerate.prefix_depth = a.prefix_depth;
            }
            if !a.lambdas.is_empty() {
                cfg.enumerate.lambdas = a.lambdas.clone();
            }
            sequential = a.sequential;
        }
        Command::Decompose(a) => {
            if let Some(w) = &a.walk {
                cfg.decompose.walk = Some(WalkInput::parse(w).map_err(Failure::parse)?);
            }
        }
        Command::Transform(a) => {
            if let Some(w) = &a.walk {
                cfg.transform.walk = Some(WalkInput::parse(w).map_err(Failure::parse)?);
            }
            if let Some(op) = a.operation {
                cfg.transform.operation = op;
            }
            if !a.sites.is_empty() {
                cfg.transform.sites = a.sites.clone();
            }
        }
        Command::Sample(a) => {
            if let Some(m) = a.mode {
                cfg.sample.mode = m;
            }
            if let Some(n) = a.n {
                cfg.sample.n = n;
            }
            if let Some(c) = a.count {
                cfg.sample.count = c;
            }
            apply_mcmc(&a.mcmc, &mut cfg.sample.mcmc);
        }
        Command::Ballistic(a) => {
            if let Some(s) = &a.schedule {
                cfg.ballistic.schedule = s.clone();
            }
            if let Some(v) = &a.velocities {
                cfg.ballistic.velocities = v.clone();
            }
            if let Some(m) = a.mode {
                cfg.ballistic.mode = m;
            }
            apply_mcmc(&a.mcmc, &mut cfg.ballistic.mcmc);
        }
        Command::Ibprocess(a) => {
            if let Some(t) = a.truncation {
                cfg.ibprocess.truncation = t;
            }
            if a.lambda.is_some() {
                cfg.ibprocess.lambda = a.lambda;
            }
            if let Some(p) = a.pieces {
                cfg.ibprocess.pieces = p;
            }
            if let Some(w) = &a.windows {
                cfg.ibprocess.windows = w.clone();
            }
        }
        Command::Verify(a) => {
            if !a.lengths.is_empty() {
                cfg.verify.lengths = a.lengths.clone();
            }
        }
    }
    Ok((cfg, sequential))
}

fn execute(cli: &Cli) -> Result<Vec<String>, Failure> {
    let (cfg, sequential) = resolve(cli)?;
    let command = cli.command.name();
    let model = cfg.model.build()?;
    let outcome = with_threads(cli.threads, || match &cli.command {
        Command::Enumerate(_) => cmd_enumerate(&cfg, &model, sequential),
        Command::Decompose(_) => cmd_decompose(&cfg, &model),
        Command::Transform(_) => cmd_transform(&cfg, &model),
        Command::Sample(_) => cmd_sample(&cfg, &model),
        Command::Ballistic(_) => cmd_ballistic(&cfg, &model),
        Command::Ibprocess(_) => cmd_ibprocess(&cfg, &model),
        Command::Verify(_) => cmd_verify(&cfg, &model),
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(f) => {
            if let Some(partial) = &f.partial {
                // budget overrun: keep what was enumerated
                let text = render_json(command, true, &cfg, partial);
                emit(cli.out.as_deref(), &text)?;
            }
            return Err(f);
        }
    };
    let text = match cfg.format {
        OutputFormat::Json => render_json(command, false, &cfg, &outcome.result),
        OutputFormat::Csv => render_csv(command, false, &cfg, &outcome)?,
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(outcome.summary)
}

/// Runs the tool on `args` and returns the process exit code. The report
/// goes to `--out` or standard output; summaries and errors go to standard
/// error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_PARSE,
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            for line in summary {
                eprintln!("{line}");
            }
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
