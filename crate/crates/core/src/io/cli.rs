//! The `shadowfolk` command line.
//!
//! Exit codes: 0 success, 2 model or input error, 3 I/O error, 4 usage error.
//! `--format machine` switches every command to JSON on stdout (and a JSON
//! error object on stderr).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::folk::{calibrate, default_folk_theory, default_targets, CalibrationSettings, FolkTheory, SurveyTargets};
use crate::graph::{posterior, validate, Assignment, Network, NetworkSpec};
use crate::intervention::{
    evaluate_intervention, parse_catalog, sweep_interventions, AppliesTo, Intervention, InterventionReport, SimSettings,
};
use crate::io::service::{self, Registry};
use crate::io::{parse_cpt_lines, parse_model, serialize_model};
use crate::sim::{default_world_model, simulate_population_with_workers, RunRecord, SuspicionStats, WorldModel};

pub const DEFAULT_CATALOG: &str = include_str!("../../models/interventions.json");
pub const DEFAULT_CALIBRATION: &str = include_str!("../../models/calibration.json");
pub const UNCALIBRATED_FOLK: &str = include_str!("../../models/uncalibrated/folk.ftm");
pub const UNCALIBRATED_WORLD: &str = include_str!("../../models/uncalibrated/world.ftm");

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "shadowfolk", version, about = "Folk-theory shadowban suspicion engine")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model file.
    Validate { model: PathBuf },
    /// Exact posterior of one node given evidence.
    Infer(InferArgs),
    /// Edit a model (with MODEL) or evaluate one intervention on the world/folk pair.
    Intervene(InterveneArgs),
    /// Simulate a population of users.
    Simulate(SimulateArgs),
    /// Evaluate and rank a catalog of interventions.
    Sweep(SweepArgs),
    /// Fit free parameters to survey targets.
    Calibrate(CalibrateArgs),
    /// Serve the JSON API (and optionally static UI files).
    Serve(ServeArgs),
}

#[derive(Debug, Args, Default)]
pub struct Edits {
    /// Graph surgery, `NODE=STATE`. Repeatable.
    #[arg(long = "do", value_name = "NODE=STATE")]
    pub do_: Vec<String>,
    /// Replace a root prior, `NODE=P1,P2,...`. Repeatable.
    #[arg(long, value_name = "NODE=P1,P2")]
    pub prior: Vec<String>,
    /// Replace conditional tables with the `cpt` lines in FILE.
    #[arg(long, value_name = "FILE")]
    pub cpt_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    pub model: PathBuf,
    /// Node to query.
    #[arg(long, short)]
    pub query: String,
    /// Evidence, `NODE=STATE`, comma separated or repeated.
    #[arg(long, short, value_delimiter = ',')]
    pub evidence: Vec<String>,
    #[command(flatten)]
    pub edits: Edits,
}

#[derive(Debug, Args)]
pub struct Population {
    /// World model file (default: shipped calibrated world).
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Folk-theory model file (default: shipped calibrated folk theory).
    #[arg(long)]
    pub folk: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct InterveneArgs {
    /// Model to edit. Without it, the intervention is evaluated instead.
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub edits: Edits,
    /// Where to write the edited model (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Side(s) the evaluated intervention acts on.
    #[arg(long, default_value = "folk")]
    pub applies_to: String,
    #[command(flatten)]
    pub population: Population,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub population: Population,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write a run record (models hashes, settings, stats) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub population: Population,
    /// JSON array of interventions (default: shipped catalog).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Starting folk theory (default: shipped uncalibrated folk theory).
    #[arg(long)]
    pub folk: Option<PathBuf>,
    /// Starting world (default: shipped uncalibrated world).
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Survey targets CSV (default: shipped targets).
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Calibration settings JSON (default: shipped settings).
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Write folk.ftm, world.ftm and fit-report.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of static files served outside `/api`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    /// Extra models to register, `NAME=FILE`. Repeatable.
    #[arg(long, value_name = "NAME=FILE")]
    pub model: Vec<String>,
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub folk: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Model(Error),
    Io(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            e => Failure::Model(e),
        }
    }
}

impl From<crate::graph::GraphError> for Failure {
    fn from(e: crate::graph::GraphError) -> Failure {
        Failure::Model(e.into())
    }
}

type Outcome = std::result::Result<String, Failure>;

/// Runs the CLI on `args` (including the program name) and captures output.
pub fn run<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                CliOutput { code, stdout: text, stderr: String::new() }
            } else {
                CliOutput { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let format = cli.format;
    match dispatch(cli) {
        Ok(stdout) => CliOutput { code: EXIT_OK, stdout, stderr: String::new() },
        Err(f) => failure_output(f, format),
    }
}

fn failure_output(f: Failure, format: Format) -> CliOutput {
    let (code, kind, message, diagnostics) = match f {
        Failure::Model(Error::Parse(p)) => {
            let diags = serde_json::to_value(&p.0).unwrap_or_default();
            (EXIT_MODEL, "model", p.to_string(), diags)
        }
        Failure::Model(e) => (EXIT_MODEL, "model", e.to_string(), json!([])),
        Failure::Io(m) => (EXIT_IO, "io", m, json!([])),
        Failure::Usage(m) => (EXIT_USAGE, "usage", m, json!([])),
    };
    let stderr = match format {
        Format::Text => format!("error: {message}\n"),
        Format::Machine => json!({ "error": kind, "message": message, "diagnostics": diagnostics }).to_string() + "\n",
    };
    CliOutput { code, stdout: String::new(), stderr }
}

fn dispatch(cli: Cli) -> Outcome {
    let fmt = cli.format;
    match cli.command {
        Command::Validate { model } => cmd_validate(&model, fmt),
        Command::Infer(a) => cmd_infer(a, fmt),
        Command::Intervene(a) => cmd_intervene(a, fmt),
        Command::Simulate(a) => cmd_simulate(a, fmt),
        Command::Sweep(a) => cmd_sweep(a, fmt),
        Command::Calibrate(a) => cmd_calibrate(a, fmt),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> std::result::Result<Network, Failure> {
    let spec = parse_model(&read(path)?).map_err(Error::from)?;
    Ok(Network::build(spec)?)
}

fn load_world(path: Option<&Path>) -> std::result::Result<WorldModel, Failure> {
    match path {
        Some(p) => Ok(WorldModel::from_network(load_network(p)?)?),
        None => Ok(default_world_model()),
    }
}

fn load_folk(path: Option<&Path>) -> std::result::Result<FolkTheory, Failure> {
    match path {
        Some(p) => Ok(FolkTheory::from_network(load_network(p)?)?),
        None => Ok(default_folk_theory()),
    }
}

fn split_pair<'a>(s: &'a str, what: &str) -> std::result::Result<(&'a str, &'a str), Failure> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| Failure::Usage(format!("{what} `{s}` must look like NAME=VALUE")))
}

fn parse_evidence(items: &[String]) -> std::result::Result<Assignment, Failure> {
    let mut ev = Assignment::new();
    for item in items.iter().filter(|s| !s.trim().is_empty()) {
        let (node, state) = split_pair(item, "evidence")?;
        ev.insert(node, state);
    }
    Ok(ev)
}

fn parse_probs(node: &str, text: &str) -> std::result::Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("prior for `{node}`: `{p}` is not a number")))
        })
        .collect()
}

/// The interventions named by `--do`, `--prior` and `--cpt-file`, in that order.
fn collect_edits(
    edits: &Edits,
    spec: &NetworkSpec,
    applies_to: AppliesTo,
) -> std::result::Result<Vec<Intervention>, Failure> {
    let mut out = Vec::new();
    for d in &edits.do_ {
        let (node, state) = split_pair(d, "--do")?;
        out.push(Intervention::set_outcome(node, state, applies_to));
    }
    for p in &edits.prior {
        let (node, probs) = split_pair(p, "--prior")?;
        out.push(Intervention::set_prior(node, parse_probs(node, probs)?, applies_to));
    }
    if let Some(path) = &edits.cpt_file {
        let cpts = parse_cpt_lines(&read(path)?, spec).map_err(Error::from)?;
        if cpts.is_empty() {
            return Err(Failure::Usage(format!("{}: no cpt lines", path.display())));
        }
        out.extend(cpts.into_iter().map(|c| Intervention::set_contingency(c, applies_to)));
    }
    Ok(out)
}

fn fmt_prob(p: f64) -> String {
    format!("{p:.6}")
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn cmd_validate(path: &Path, fmt: Format) -> Outcome {
    let spec = parse_model(&read(path)?).map_err(Error::from)?;
    let findings = validate(&spec);
    if findings.is_empty() {
        let net = Network::build(spec)?;
        return Ok(match fmt {
            Format::Text => format!("OK, {} nodes, {} active edges\n", net.len(), net.active_edge_count()),
            Format::Machine => to_json(&json!({
                "ok": true,
                "model": net.name(),
                "nodes": net.len(),
                "active_edges": net.active_edge_count(),
                "topo_order": net.topo_ids(),
            })),
        });
    }
    let messages: Vec<String> = findings.iter().map(|f| f.to_string()).collect();
    Err(Failure::Model(Error::InvalidModel(messages.join("; "))))
}

fn cmd_infer(a: InferArgs, fmt: Format) -> Outcome {
    let mut net = load_network(&a.model)?;
    for iv in collect_edits(&a.edits, net.spec(), AppliesTo::Both)? {
        net = iv.apply_raw(&net)?;
    }
    let ev = parse_evidence(&a.evidence)?;
    let d = posterior(&net, &ev, &a.query)?;
    Ok(match fmt {
        Format::Text => {
            let given: Vec<String> = ev.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let mut s = if given.is_empty() {
                format!("P({})\n", d.node)
            } else {
                format!("P({} | {})\n", d.node, given.join(", "))
            };
            for (st, p) in d.states.iter().zip(&d.probs) {
                s.push_str(&format!("  {st}\t{}\n", fmt_prob(*p)));
            }
            s
        }
        Format::Machine => to_json(&json!({
            "query": d.node,
            "evidence": ev,
            "states": d.states,
            "probs": d.probs,
        })),
    })
}

fn stats_text(label: &str, s: &SuspicionStats) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), fmt_prob);
    let mut out = format!(
        "{label}: n={} suspicious={} (true {}, false {})\n  incidence {}  false rate {}  true rate {}\n  false share {}  true share {}\n",
        s.n,
        s.suspicious,
        s.true_suspicions,
        s.false_suspicions,
        opt(s.suspicion_incidence),
        opt(s.false_suspicion_rate),
        opt(s.true_suspicion_rate),
        opt(s.false_share_among_suspicious),
        opt(s.true_share_among_suspicious),
    );
    if !s.attributions.is_empty() || s.unattributed > 0 {
        let parts: Vec<String> = s.attributions.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("  attributed {} unattributed={}\n", parts.join(" "), s.unattributed));
    }
    out
}

fn report_text(r: &InterventionReport) -> String {
    let d = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:+.6}"));
    format!(
        "{}\n  false rate {} -> {} ({})\n  false share {} -> {} ({})\n",
        r.description,
        r.baseline.false_suspicion_rate.map_or("n/a".into(), fmt_prob),
        r.post.false_suspicion_rate.map_or("n/a".into(), fmt_prob),
        d(r.deltas.false_suspicion_rate),
        r.baseline.false_share_among_suspicious.map_or("n/a".into(), fmt_prob),
        r.post.false_share_among_suspicious.map_or("n/a".into(), fmt_prob),
        d(r.deltas.false_share_among_suspicious),
    )
}

fn settings_of(p: &Population) -> SimSettings {
    SimSettings { n: p.n, seed: p.seed, threshold: p.threshold }
}

fn cmd_intervene(a: InterveneArgs, fmt: Format) -> Outcome {
    let applies_to: AppliesTo = a
        .applies_to
        .parse()
        .map_err(|_| Failure::Usage(format!("--applies-to `{}` must be world, folk or both", a.applies_to)))?;

    if let Some(path) = &a.model {
        // Edit mode: authoring surgery, no intervenable check.
        let mut net = load_network(path)?;
        let edits = collect_edits(&a.edits, net.spec(), applies_to)?;
        if edits.is_empty() {
            return Err(Failure::Usage("nothing to apply; give --do, --prior or --cpt-file".into()));
        }
        for iv in &edits {
            net = iv.apply_raw(&net)?;
        }
        let text = serialize_model(net.spec());
        return match &a.out {
            Some(out) => {
                write(out, &text)?;
                Ok(match fmt {
                    Format::Text => format!("wrote {}\n", out.display()),
                    Format::Machine => to_json(&json!({ "written": out })),
                })
            }
            None => Ok(text),
        };
    }

    let world = load_world(a.population.world.as_deref())?;
    let folk = load_folk(a.population.folk.as_deref())?;
    let mut edits = collect_edits(&a.edits, folk.network().spec(), applies_to)?;
    if edits.len() != 1 {
        return Err(Failure::Usage(format!("evaluation takes exactly one intervention, got {}", edits.len())));
    }
    let iv = edits.remove(0);
    let r = evaluate_intervention(&world, &folk, &iv, settings_of(&a.population))?;
    Ok(match fmt {
        Format::Text => report_text(&r),
        Format::Machine => to_json(&r),
    })
}

fn cmd_simulate(a: SimulateArgs, fmt: Format) -> Outcome {
    let world = load_world(a.population.world.as_deref())?;
    let folk = load_folk(a.population.folk.as_deref())?;
    let p = &a.population;
    let workers = match a.workers {
        Some(0) => return Err(Failure::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => rayon::current_num_threads(),
    };
    let stats = simulate_population_with_workers(&world, &folk, p.n, p.threshold, p.seed, workers)?;
    let record = RunRecord::new(world.network().spec(), folk.network().spec(), settings_of(p), stats);
    if let Some(out) = &a.out {
        write(out, &record.to_json())?;
    }
    Ok(match fmt {
        Format::Text => stats_text("population", &record.stats),
        Format::Machine => record.to_json() + "\n",
    })
}

fn cmd_sweep(a: SweepArgs, fmt: Format) -> Outcome {
    let world = load_world(a.population.world.as_deref())?;
    let folk = load_folk(a.population.folk.as_deref())?;
    let catalog = match &a.catalog {
        Some(p) => parse_catalog(&read(p)?)?,
        None => parse_catalog(DEFAULT_CATALOG)?,
    };
    let reports = sweep_interventions(&world, &folk, &catalog, settings_of(&a.population))?;
    Ok(match fmt {
        Format::Text => {
            let mut s = String::new();
            if let Some(first) = reports.first() {
                s.push_str(&stats_text("baseline", &first.baseline));
            }
            for (i, r) in reports.iter().enumerate() {
                s.push_str(&format!("{}. {}", i + 1, report_text(r)));
            }
            s
        }
        Format::Machine => to_json(&reports),
    })
}

fn cmd_calibrate(a: CalibrateArgs, fmt: Format) -> Outcome {
    let folk = match &a.folk {
        Some(p) => FolkTheory::from_network(load_network(p)?)?,
        None => FolkTheory::from_text(UNCALIBRATED_FOLK)?,
    };
    let world = match &a.world {
        Some(p) => WorldModel::from_network(load_network(p)?)?,
        None => WorldModel::from_text(UNCALIBRATED_WORLD)?,
    };
    let targets = match &a.targets {
        Some(p) => SurveyTargets::parse(&read(p)?)?,
        None => default_targets(),
    };
    let settings: CalibrationSettings = match &a.settings {
        Some(p) => serde_json::from_str(&read(p)?).map_err(Error::from)?,
        None => serde_json::from_str(DEFAULT_CALIBRATION).map_err(Error::from)?,
    };
    let result = calibrate(&folk, &world, &targets, &settings)?;
    let summary = result.summary_json();

    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        let header = "# Fitted by `shadowfolk calibrate`; see fit-report.json for the loss trace.\n";
        write(&dir.join("folk.ftm"), &(header.to_string() + &serialize_model(result.folk.network().spec())))?;
        write(&dir.join("world.ftm"), &(header.to_string() + &serialize_model(result.world.network().spec())))?;
        write(&dir.join("fit-report.json"), &to_json(&summary))?;
    }

    Ok(match fmt {
        Format::Text => {
            let mut s = format!(
                "loss {:.6e} -> {:.6e} ({} accepted steps, {} evaluations)\n",
                result.loss_trace[0],
                result.final_loss(),
                result.accepted_steps,
                result.evaluations
            );
            for r in &result.residuals {
                let sim = r.simulated.map_or("n/a".to_string(), fmt_prob);
                s.push_str(&format!(
                    "  {:<24} simulated {sim}  target {}  residual {:+.6}\n",
                    r.target,
                    fmt_prob(r.expected),
                    r.residual
                ));
            }
            for (k, v) in &result.parameters {
                s.push_str(&format!("  {k} = {v}\n"));
            }
            s
        }
        Format::Machine => to_json(&summary),
    })
}

fn cmd_serve(a: ServeArgs) -> Outcome {
    let registry = Registry::new();
    registry.insert("world", load_world(a.world.as_deref())?.network().clone());
    registry.insert("folk", load_folk(a.folk.as_deref())?.network().clone());
    for m in &a.model {
        let (name, file) = split_pair(m, "--model")?;
        registry.insert(name, load_network(Path::new(file))?);
    }
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|_| Failure::Usage(format!("bad address {}:{}", a.host, a.port)))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    rt.block_on(service::serve(Arc::new(registry), addr, a.static_dir)).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(String::new())
}
