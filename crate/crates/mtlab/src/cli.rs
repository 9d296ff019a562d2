//! Batch runner behind the `mtlab` binary: JSON configuration with flag overrides, deterministic outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::extremal::{
    arc_coefficients, arc_sum_instance, axiom_check, build_multibush, bump_weight_instance,
    bush_field, bush_instance, bush_report, multibush_report, replay, sharpness_sweep,
    single_packet_instance, AxiomOptions, AxiomaticStructure, MultibushPlan, Variant,
};
use crate::geometry::{CurveSpec, IncidenceMode};
use crate::lab::corpus::random_packet_field;
use crate::lab::{
    corpus_instance, exponent_sweep, refined_decoupling_check, IneqId, Params, WeightKind,
};
use crate::weights::{carbery_points, Verification};

pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::ConfigError(m) => CliError::Schema(m),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sweep,
    Example,
    RefinedCheck,
    Axioms,
    Points,
    Replay,
}

/// Every field is optional so that a file and the command line can each supply part of it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default, rename = "R")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub ineq: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default, rename = "K")]
    pub k: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub weight: Option<String>,
    /// bump | bush | single-packet | arc | multibush.
    #[serde(default)]
    pub example: Option<String>,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default, rename = "N")]
    pub big_n: Option<usize>,
    #[serde(default)]
    pub mu: Option<usize>,
    /// exhaustive | sampled | none.
    #[serde(default)]
    pub verify: Option<String>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    /// containment | intersection.
    #[serde(default)]
    pub mode: Option<String>,
    /// packets | multibush.
    #[serde(default)]
    pub structure: Option<String>,
    #[serde(default)]
    pub plan: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    /// Fields set in `flags` replace those of `self`.
    pub fn merged(mut self, flags: &ExperimentConfig) -> Self {
        overlay!(
            self, flags, kind, n, radii, ineq, seed, epsilon, k, r, weight, example, variant,
            big_n, mu, verify, samples, p, mode, structure, plan, out
        );
        self
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn need<T: Clone>(v: &Option<T>, name: &str) -> std::result::Result<T, CliError> {
        v.clone()
            .ok_or_else(|| schema(format!("missing field '{name}'")))
    }

    pub fn dimension(&self) -> std::result::Result<usize, CliError> {
        let n = Self::need(&self.n, "n")?;
        if n < 2 {
            return Err(schema(format!("n = {n} must be at least 2")));
        }
        Ok(n)
    }

    pub fn scales(&self) -> std::result::Result<Vec<f64>, CliError> {
        let rs = Self::need(&self.radii, "R")?;
        if rs.is_empty() {
            return Err(schema("empty R list"));
        }
        if let Some(r) = rs.iter().find(|r| !(r.is_finite() && **r >= 2.0)) {
            return Err(schema(format!("R = {r} must be a finite number ≥ 2")));
        }
        Ok(rs)
    }

    pub fn params(&self) -> Params {
        let mut p = Params::default();
        if let Some(e) = self.epsilon {
            p.epsilon = e;
        }
        if let Some(k) = self.k {
            p.k = k;
        }
        p.r = self.r.or(p.r);
        p
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mtlab",
    version,
    about = "Weighted refined decoupling and Mizohata–Takeuchi lab"
)]
pub struct Cli {
    /// JSON configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated scales.
    #[arg(long = "R", value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Output directory (sweep) or file (other commands); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exponent sweep of one inequality over several scales.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ineq: Option<String>,
        #[arg(long)]
        weight: Option<String>,
    },
    /// Sharpness examples: bump, bush, single-packet, arc, multibush.
    Example {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        example: Option<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Refined decoupling monitor on a random packet field.
    RefinedCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Axiom checks on a packet hierarchy or a multibush structure.
    Axioms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        structure: Option<String>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Well-separated point configurations with hull-volume certification.
    Points {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        mu: Option<usize>,
        #[arg(long)]
        verify: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Rebuild a multibush witness from a saved plan and report on it.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl Command {
    /// The flag layer of the configuration.
    pub fn flags(&self) -> ExperimentConfig {
        let base = |kind: ExperimentKind, c: &Common| ExperimentConfig {
            kind: Some(kind),
            n: c.n,
            radii: c.radii.clone(),
            seed: c.seed,
            epsilon: c.epsilon,
            k: c.k,
            r: c.r,
            out: c.out.clone(),
            ..Default::default()
        };
        match self {
            Command::Sweep {
                common,
                ineq,
                weight,
            } => ExperimentConfig {
                ineq: ineq.clone(),
                weight: weight.clone(),
                ..base(ExperimentKind::Sweep, common)
            },
            Command::Example {
                common,
                example,
                variant,
                samples,
            } => ExperimentConfig {
                example: example.clone(),
                variant: variant.clone(),
                samples: *samples,
                ..base(ExperimentKind::Example, common)
            },
            Command::RefinedCheck { common, p, mode } => ExperimentConfig {
                p: *p,
                mode: mode.clone(),
                ..base(ExperimentKind::RefinedCheck, common)
            },
            Command::Axioms {
                common,
                structure,
                variant,
            } => ExperimentConfig {
                structure: structure.clone(),
                variant: variant.clone(),
                ..base(ExperimentKind::Axioms, common)
            },
            Command::Points {
                common,
                big_n,
                mu,
                verify,
                samples,
            } => ExperimentConfig {
                big_n: *big_n,
                mu: *mu,
                verify: verify.clone(),
                samples: *samples,
                ..base(ExperimentKind::Points, common)
            },
            Command::Replay {
                common,
                plan,
                samples,
            } => ExperimentConfig {
                plan: plan.clone(),
                samples: *samples,
                ..base(ExperimentKind::Replay, common)
            },
        }
    }
}

/// Wrapper written around every JSON result.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    kind: ExperimentKind,
    config_hash: &'a str,
    version: &'static str,
    seed: u64,
    result: T,
}

fn emit<T: Serialize>(
    cfg: &ExperimentConfig,
    hash: &str,
    result: T,
) -> std::result::Result<(), CliError> {
    let env = Envelope {
        kind: cfg.kind.expect("kind set"),
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed(),
        result,
    };
    let text = serde_json::to_string_pretty(&env)
        .map_err(|e| CliError::Numeric(format!("unserializable result: {e}")))?;
    match &cfg.out {
        Some(p) => fs::write(p, text + "\n")
            .map_err(|e| CliError::Numeric(format!("{}: {e}", p.display()))),
        None => {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::Numeric(format!("{}: {e}", p.display()))
}

fn load_config(path: Option<&Path>) -> std::result::Result<ExperimentConfig, CliError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))
}

/// Resolves the configuration and runs it.
pub fn run_cli(cli: &Cli) -> std::result::Result<(), CliError> {
    let file = load_config(cli.config.as_deref())?;
    let flags = cli.command.flags();
    if let (Some(a), Some(b)) = (file.kind, flags.kind) {
        if a != b {
            return Err(schema(format!(
                "config file is for {a:?}, command is {b:?}"
            )));
        }
    }
    run(&file.merged(&flags))
}

/// Runs one experiment.
pub fn run(cfg: &ExperimentConfig) -> std::result::Result<(), CliError> {
    let hash = cfg.hash();
    match cfg.kind.ok_or_else(|| schema("missing field 'kind'"))? {
        ExperimentKind::Sweep => run_sweep(cfg, &hash),
        ExperimentKind::Example => run_example(cfg, &hash),
        ExperimentKind::RefinedCheck => run_refined(cfg, &hash),
        ExperimentKind::Axioms => run_axioms(cfg, &hash),
        ExperimentKind::Points => run_points(cfg, &hash),
        ExperimentKind::Replay => run_replay(cfg, &hash),
    }
}

fn run_sweep(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let n = cfg.dimension()?;
    let radii = cfg.scales()?;
    let id: IneqId = ExperimentConfig::need(&cfg.ineq, "ineq")?.parse()?;
    let kind: WeightKind = cfg.weight.as_deref().unwrap_or("sparse").parse()?;
    let params = cfg.params();
    let seed = cfg.seed();
    let res = exponent_sweep(
        id,
        |r| corpus_instance(id, n, r, seed, kind, params),
        &radii,
    )?;
    let sidecar = res.sidecar(hash, seed);
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let csv = dir.join(format!("{id}_n{n}.csv"));
            let json = dir.join(format!("{id}_n{n}.json"));
            let mut f = fs::File::create(&csv).map_err(|e| io_err(&csv, e))?;
            res.write_csv(&mut f, true)?;
            f.flush().map_err(|e| io_err(&csv, e))?;
            let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            fs::write(&json, text + "\n").map_err(|e| io_err(&json, e))?;
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}\n{}",
                csv.display(),
                json.display()
            );
        }
        None => {
            if let Err(e) = res.write_csv(std::io::stdout().lock(), true) {
                if !matches!(&e, LabError::Io(m) if m.contains("Broken pipe")) {
                    return Err(e.into());
                }
            }
            eprintln!(
                "{}",
                serde_json::to_string(&sidecar).expect("sidecar serializes")
            );
        }
    }
    Ok(())
}

fn variant(cfg: &ExperimentConfig) -> std::result::Result<Variant, CliError> {
    Ok(cfg.variant.as_deref().unwrap_or("S").parse()?)
}

fn single_scale(cfg: &ExperimentConfig) -> std::result::Result<f64, CliError> {
    let rs = cfg.scales()?;
    if rs.len() != 1 {
        return Err(schema(format!(
            "this experiment takes one scale, got {}",
            rs.len()
        )));
    }
    Ok(rs[0])
}

fn run_example(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let n = cfg.dimension()?;
    let seed = cfg.seed();
    let which = ExperimentConfig::need(&cfg.example, "example")?;
    match which.as_str() {
        "bump" => {
            let s = sharpness_sweep(|r| bump_weight_instance(n, r, seed), &cfg.scales()?)?;
            emit(cfg, hash, s)
        }
        "single-packet" => {
            let s = sharpness_sweep(|r| single_packet_instance(n, r), &cfg.scales()?)?;
            emit(cfg, hash, s)
        }
        "bush" => {
            let rows: Vec<serde_json::Value> = cfg
                .scales()?
                .iter()
                .map(|&r| -> Result<serde_json::Value> {
                    let rep = bush_report(&bush_field(n, r)?);
                    let point = crate::extremal::sharpness_point(&bush_instance(n, r)?)?;
                    Ok(serde_json::json!({ "R": point.radius, "bush": rep, "cor31a": point }))
                })
                .collect::<Result<_>>()?;
            emit(cfg, hash, rows)
        }
        "arc" => {
            let s = sharpness_sweep(
                |r| arc_sum_instance(n, r, &arc_coefficients(r, seed)),
                &cfg.scales()?,
            )?;
            emit(cfg, hash, s)
        }
        "multibush" => {
            let r = single_scale(cfg)?;
            let (s, w, plan) = build_multibush(variant(cfg)?, n, r, seed)?;
            let rep = multibush_report(&s, &w, &plan, cfg.samples.unwrap_or(1 << 20))?;
            emit(
                cfg,
                hash,
                serde_json::json!({ "report": rep, "plan": plan }),
            )
        }
        other => Err(schema(format!("unknown example '{other}'"))),
    }
}

fn run_refined(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let n = cfg.dimension()?;
    let r = single_scale(cfg)?;
    let p = cfg.p.unwrap_or((n * (n + 1)) as f64);
    let mode = match cfg.mode.as_deref().unwrap_or("containment") {
        "containment" => IncidenceMode::Containment,
        "intersection" => IncidenceMode::Intersection,
        other => return Err(schema(format!("unknown incidence mode '{other}'"))),
    };
    let curve = CurveSpec::<f64>::moment(n);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed());
    let field = random_packet_field(&curve, r, &mut rng)?;
    let rep = refined_decoupling_check(&field, p, cfg.params().epsilon, mode)?;
    emit(cfg, hash, rep)
}

fn run_axioms(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let n = cfg.dimension()?;
    let r = single_scale(cfg)?;
    let epsilon = cfg.params().epsilon;
    let s = match cfg.structure.as_deref().unwrap_or("multibush") {
        "packets" => {
            let curve = CurveSpec::<f64>::moment(n);
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed());
            AxiomaticStructure::from_packets(
                Arc::new(random_packet_field(&curve, r, &mut rng)?),
                epsilon,
            )?
        }
        "multibush" => build_multibush(variant(cfg)?, n, r, cfg.seed())?.0,
        other => return Err(schema(format!("unknown structure '{other}'"))),
    };
    let opts = AxiomOptions {
        seed: cfg.seed(),
        ..AxiomOptions::default()
    };
    emit(cfg, hash, axiom_check(&s, &opts))
}

fn run_points(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let n = cfg.dimension()?;
    let r = single_scale(cfg)?;
    let big_n = ExperimentConfig::need(&cfg.big_n, "N")?;
    let mu = cfg.mu.unwrap_or(n + 2);
    let verify = match cfg.verify.as_deref().unwrap_or("sampled") {
        "exhaustive" => Verification::Exhaustive,
        "sampled" => Verification::Sampled(cfg.samples.unwrap_or(2000)),
        "none" => Verification::None,
        other => return Err(schema(format!("unknown verification '{other}'"))),
    };
    let pts = carbery_points(n, big_n, mu, r, cfg.seed(), verify)?;
    emit(cfg, hash, pts)
}

fn run_replay(cfg: &ExperimentConfig, hash: &str) -> std::result::Result<(), CliError> {
    let path = ExperimentConfig::need(&cfg.plan, "plan")?;
    let text = fs::read_to_string(&path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    let plan: MultibushPlan = match serde_json::from_str::<MultibushPlan>(&text) {
        Ok(p) => p,
        Err(_) => {
            // an `example multibush` output wraps the plan
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| schema(format!("{}: {e}", path.display())))?;
            serde_json::from_value(v["result"]["plan"].clone())
                .map_err(|e| schema(format!("{}: no plan found: {e}", path.display())))?
        }
    };
    let (s, w) = replay(&plan)?;
    let rep = multibush_report(&s, &w, &plan, cfg.samples.unwrap_or(1 << 20))?;
    emit(cfg, hash, rep)
}

/// Caps rayon's pool at MTLAB_THREADS when set.
pub fn init_threads() -> std::result::Result<(), CliError> {
    if let Ok(v) = std::env::var("MTLAB_THREADS") {
        let t: usize = v
            .parse()
            .map_err(|_| schema(format!("MTLAB_THREADS = '{v}' is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    Ok(())
}
