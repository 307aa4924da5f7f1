//! Command-line pipeline: mesh -> coarsen -> fom -> train -> rom -> metrics.
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 for I/O and validation
//! failures. Every subcommand that writes a file also writes
//! `<out>.manifest.toml`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::ae::{self, AEModel, LayerSpec, Padding, TrainConfig};
use crate::coarsen::{build_hierarchy, line_radii, planar_radii, Hierarchy};
use crate::error::{Error, Result};
use crate::fom::burgers::{self, Burgers, BurgersConfig};
use crate::fom::euler::{self, Euler, EulerCase, EulerConfig, CFL_WARN, GAMMA};
use crate::fom::{ResidualProblem, TimeScheme, Velocity};
use crate::manifest::{file_hash, RunManifest, StageConfig};
use crate::mesh::{cylinder_front_mesh, parse_gmsh, strip_mesh, unit_square_mesh, write_msh22, Mesh, ScaleStats};
use crate::metrics::{self, MetricRecord, MetricsFile};
use crate::num::{DifferentiableMap, LinearMap};
use crate::rom::{pod_basis, rom_solve, Normalization, RomConfig, StepPolicy, StoredBasis};
use crate::snapshot::{SnapshotSet, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "gdlspg", version, about = "Graph-autoencoder LSPG model reduction")]
struct Cli {
    /// TOML file whose [section] tables supply default flags per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarize a mesh, optionally generating and writing it.
    MeshInfo(MeshInfoArgs),
    /// Build the hierarchy of spectrally clustered graphs.
    Coarsen(CoarsenArgs),
    /// Run full-order models into a snapshot file.
    #[command(subcommand)]
    Fom(FomCommand),
    /// Per-variable min/max of a snapshot file.
    ScaleStats(ScaleStatsArgs),
    /// Train a graph autoencoder.
    Train(TrainArgs),
    /// Reduced-order time integration.
    #[command(subcommand)]
    Rom(RomCommand),
    /// Build a POD basis.
    Pod(PodArgs),
    /// Error metrics.
    Metrics(MetricsArgs),
    /// Long-format CSV from metrics or snapshot files.
    ExportCsv(ExportArgs),
}

#[derive(Args, Debug)]
struct MeshInfoArgs {
    /// Gmsh file to read.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    mesh: Option<PathBuf>,
    /// `square:CELLS`, `cylinder:NTHETA,NR` or `strip:NX`.
    #[arg(long)]
    generate: Option<String>,
    /// Write the mesh as MSH 2.2.
    #[arg(long)]
    write: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoarsenArgs {
    /// 2D mesh whose cell centers form level 0.
    #[arg(long, conflicts_with = "burgers_cells", required_unless_present = "burgers_cells")]
    mesh: Option<PathBuf>,
    /// 1D Burgers grid of this many physical cells instead of a mesh.
    #[arg(long)]
    burgers_cells: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    length: f64,
    #[arg(long, default_value_t = 0)]
    pad_left: usize,
    #[arg(long, default_value_t = 0)]
    pad_right: usize,
    /// Node counts of the coarse levels, e.g. `64,16,4,2`.
    #[arg(long, value_delimiter = ',', required = true)]
    nodes: Vec<usize>,
    /// One radius per level including level 0; defaults to the edge-count heuristic.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-level diagnostics CSV; defaults to `<out>.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum FomCommand {
    /// Parameterized 1D inviscid Burgers.
    Burgers(FomBurgersArgs),
    /// 2D Euler on a triangle mesh.
    Euler(FomEulerArgs),
}

#[derive(Args, Debug, Clone)]
struct BurgersGrid {
    #[arg(long, default_value_t = 256)]
    cells: usize,
    #[arg(long, default_value_t = 100.0)]
    length: f64,
    #[arg(long, default_value_t = 0.07)]
    dt: f64,
    #[arg(long, default_value_t = 35.0)]
    final_time: f64,
}

impl BurgersGrid {
    fn config(&self) -> Result<BurgersConfig> {
        let cfg = BurgersConfig {
            cells: self.cells,
            length: self.length,
            dt: self.dt,
            final_time: self.final_time,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FomBurgersArgs {
    /// Inlet values; every combination with --mu2 is run.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu2: Vec<f64>,
    /// Use the full 10 x 8 training grid instead of --mu1/--mu2.
    #[arg(long)]
    full_grid: bool,
    #[command(flatten)]
    grid: BurgersGrid,
    #[arg(long, default_value_t = 0)]
    pad_left: usize,
    #[arg(long, default_value_t = 0)]
    pad_right: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CaseArg {
    Burgers,
    Riemann,
    Bowshock,
}

impl CaseArg {
    fn euler(self) -> Result<EulerCase> {
        match self {
            CaseArg::Riemann => Ok(EulerCase::Riemann),
            CaseArg::Bowshock => Ok(EulerCase::BowShock),
            CaseArg::Burgers => Err(Error::Config("burgers is not an Euler case".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EulerTime {
    /// Defaults to 0.001.
    #[arg(long)]
    dt: Option<f64>,
    /// Defaults to 0.3 (riemann) or 1.0 (bowshock).
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long, default_value_t = GAMMA)]
    gamma: f64,
}

impl EulerTime {
    fn config(&self, case: EulerCase) -> Result<EulerConfig> {
        let mut cfg = match case {
            EulerCase::Riemann => EulerConfig::riemann(),
            EulerCase::BowShock => EulerConfig::bowshock(),
        };
        cfg.gamma = self.gamma;
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.final_time {
            cfg.final_time = t;
        }
        if !(cfg.dt > 0.0) || !(cfg.final_time >= 0.0) || !(cfg.gamma > 1.0) {
            return Err(Error::Config("need dt > 0, final time >= 0 and gamma > 1".into()));
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FomEulerArgs {
    #[arg(long, value_enum)]
    case: CaseArg,
    #[arg(long)]
    mesh: PathBuf,
    /// One parameter vector per occurrence: `mu_u,mu_v` or `mach`.
    #[arg(long, allow_negative_numbers = true)]
    mu: Vec<String>,
    /// Use the case's full training parameter set.
    #[arg(long)]
    full_grid: bool,
    #[command(flatten)]
    time: EulerTime,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScaleStatsArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// Feature width per level, starting with the number of state variables.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long)]
    latent: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 3)]
    unpool_k: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of snapshots held out for validation.
    #[arg(long, default_value_t = 0.0)]
    val_fraction: f64,
    /// Scale statistics file; computed from the snapshots when absent.
    #[arg(long)]
    scale_stats: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum RomCommand {
    /// March a reduced model from the encoded or projected initial state.
    Solve(RomSolveArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    PodLspg,
    GdLspg,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::PodLspg => "pod-lspg",
            Method::GdLspg => "gd-lspg",
        }
    }
}

#[derive(Args, Debug)]
struct RomSolveArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, required_if_eq("method", "gd-lspg"))]
    model: Option<PathBuf>,
    #[arg(long, required_if_eq("method", "gd-lspg"))]
    hierarchy: Option<PathBuf>,
    #[arg(long, required_if_eq("method", "pod-lspg"))]
    basis: Option<PathBuf>,
    #[arg(long, value_enum)]
    case: CaseArg,
    /// Parameter vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    mu: Vec<f64>,
    /// Mesh for the Euler cases.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    cells: usize,
    #[arg(long, default_value_t = 100.0)]
    length: f64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long, default_value_t = GAMMA)]
    gamma: f64,
    /// Defaults to 1e-4 (pod-lspg) or 1e-3 (gd-lspg).
    #[arg(long)]
    kappa: Option<f64>,
    /// `fixed[:BETA]`, `decay[:INITIAL,FACTOR,PATIENCE]` or `armijo`.
    #[arg(long, default_value = "fixed:1.0")]
    step_policy: String,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    /// Normalize each step by its own initial reduced residual.
    #[arg(long)]
    per_step_normalization: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PodArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long, requires = "rom")]
    fom: Option<PathBuf>,
    #[arg(long, requires = "fom")]
    rom: Option<PathBuf>,
    /// Snapshots for reconstruction (with --model) or projection (with --basis) error.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    #[arg(long, requires_all = ["hierarchy", "snapshots"])]
    model: Option<PathBuf>,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, requires = "snapshots")]
    basis: Option<PathBuf>,
    /// Write the local error field of this step (needs --fom/--rom).
    #[arg(long, requires_all = ["fom", "field_out"])]
    field_step: Option<usize>,
    #[arg(long, default_value_t = 0)]
    field_run: usize,
    #[arg(long)]
    field_variable: Option<usize>,
    #[arg(long)]
    field_out: Option<PathBuf>,
    /// Append results to this metrics file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "unlabeled")]
    method: String,
    /// Latent dimension recorded with the results.
    #[arg(long, default_value_t = 0)]
    latent_dim: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, conflicts_with = "snapshots", required_unless_present = "snapshots")]
    metrics: Option<PathBuf>,
    /// Snapshot file to flatten to `run,step,variable,cell,value`.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

const NESTED: [&str; 2] = ["fom", "rom"];

/// Parse and run; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let (cli, effective) = match parse(&argv) {
        Ok(v) => v,
        Err(ParseFailure::Usage(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(cli, effective) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum ParseFailure {
    Usage(clap::Error),
    Config(Error),
}

fn command() -> clap::Command {
    fn override_self(c: clap::Command) -> clap::Command {
        let names: Vec<String> = c.get_subcommands().map(|s| s.get_name().to_string()).collect();
        names
            .iter()
            .fold(c.args_override_self(true), |c, n| c.mut_subcommand(n, override_self))
    }
    override_self(Cli::command())
}

fn parse_with(argv: &[String]) -> std::result::Result<Cli, clap::Error> {
    let m = command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&m)
}

/// Parse, splice in config-file defaults, and return the arguments (without
/// program name or `--config`) that reproduce the run.
fn parse(argv: &[String]) -> std::result::Result<(Cli, Vec<String>), ParseFailure> {
    let first = parse_with(argv).map_err(ParseFailure::Usage)?;
    let mut rest: Vec<String> = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            it.next();
        } else if !a.starts_with("--config=") {
            rest.push(a.clone());
        }
    }
    let Some(path) = &first.config else {
        return Ok((first, rest));
    };
    let cfg = StageConfig::load(path).map_err(ParseFailure::Config)?;
    let names: Vec<String> = command().get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(pos) = rest.iter().position(|a| names.contains(a)) else {
        return Ok((first, rest));
    };
    let section = rest[pos].clone();
    let mut insert_at = pos + 1;
    let mut extra = cfg.args_for(&[&section]).map_err(ParseFailure::Config)?;
    if NESTED.contains(&section.as_str()) {
        if let Some(sub) = rest.get(pos + 1).cloned() {
            insert_at += 1;
            extra.extend(cfg.args_for(&[&section, &sub]).map_err(ParseFailure::Config)?);
        }
    }
    let mut effective = rest[..insert_at].to_vec();
    effective.extend(extra);
    effective.extend_from_slice(&rest[insert_at..]);
    let mut full = vec![argv.first().cloned().unwrap_or_else(|| "gdlspg".into())];
    full.extend(effective.iter().cloned());
    let cli = parse_with(&full).map_err(ParseFailure::Usage)?;
    Ok((cli, effective))
}

fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    match cli.command {
        Command::MeshInfo(a) => mesh_info(a, args),
        Command::Coarsen(a) => coarsen(a, args),
        Command::Fom(FomCommand::Burgers(a)) => fom_burgers(a, args),
        Command::Fom(FomCommand::Euler(a)) => fom_euler(a, args),
        Command::ScaleStats(a) => scale_stats(a, args),
        Command::Train(a) => train(a, args),
        Command::Rom(RomCommand::Solve(a)) => rom(a, args),
        Command::Pod(a) => pod(a, args),
        Command::Metrics(a) => metrics_cmd(a, args),
        Command::ExportCsv(a) => export_csv(a),
    }
}

fn finish(mut manifest: RunManifest, out: &Path) -> Result<()> {
    manifest.output(out)?;
    manifest.save(RunManifest::path_for(out))
}

fn generated_mesh(spec: &str) -> Result<Mesh> {
    let (kind, nums) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("mesh spec `{spec}` should look like kind:numbers")))?;
    let n: Vec<usize> = nums
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad number `{s}` in `{spec}`"))))
        .collect::<Result<_>>()?;
    match (kind, n.as_slice()) {
        ("square", [c]) => unit_square_mesh(*c),
        ("cylinder", [t, r]) => cylinder_front_mesh(*t, *r),
        ("strip", [x]) => strip_mesh(*x),
        _ => Err(Error::Config(format!("unknown mesh spec `{spec}`"))),
    }
}

fn mesh_info(a: MeshInfoArgs, args: Vec<String>) -> Result<()> {
    let mesh = match (&a.mesh, &a.generate) {
        (Some(p), _) => parse_gmsh(p)?,
        (None, Some(g)) => generated_mesh(g)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    println!("{}", mesh.summary());
    println!("hash: {}", mesh.hash());
    if let Some(out) = &a.write {
        write_msh22(&mesh, out)?;
        let mut m = RunManifest::new("mesh-info", args);
        if let Some(p) = &a.mesh {
            m.input(p)?;
        }
        m.set("cells", mesh.num_cells());
        finish(m, out)?;
    }
    Ok(())
}

fn coarsen(a: CoarsenArgs, args: Vec<String>) -> Result<()> {
    let mut m = RunManifest::new("coarsen", args);
    m.seed = Some(a.seed);
    let positions = match (&a.mesh, a.burgers_cells) {
        (Some(p), _) => {
            m.input(p)?;
            parse_gmsh(p)?.positions()
        }
        (None, Some(cells)) => {
            let cfg = BurgersConfig {
                cells,
                length: a.length,
                ..BurgersConfig::default()
            };
            cfg.validate()?;
            burgers::padded_positions(&cfg, a.pad_left, a.pad_right)
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut counts = vec![positions.rows()];
    counts.extend(&a.nodes);
    let radii = match &a.radii {
        Some(r) => r.clone(),
        None if positions.cols() == 1 => line_radii(positions[(0, 0)], positions[(positions.rows() - 1, 0)], &counts),
        None => planar_radii(&counts),
    };
    let h = build_hierarchy(positions, &counts, &radii, a.seed)?;
    h.save(&a.out)?;
    let csv = a.csv.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".csv");
        a.out.with_file_name(name)
    });
    crate::binio::write_atomic(&csv, h.diagnostics_csv().as_bytes())?;
    print!("{}", h.diagnostics_csv());
    println!("hierarchy hash: {}", h.hash());
    m.set("nodes", format!("{counts:?}"));
    m.set("radii", format!("{radii:?}"));
    m.hierarchy_hash = Some(h.hash());
    m.output(&csv)?;
    finish(m, &a.out)
}

fn fom_burgers(a: FomBurgersArgs, args: Vec<String>) -> Result<()> {
    let cfg = a.grid.config()?;
    let params: Vec<[f64; 2]> = if a.full_grid {
        burgers::param_grid(10, 8)
    } else {
        if a.mu1.is_empty() || a.mu2.is_empty() {
            return Err(Error::Config("give --mu1 and --mu2, or --full-grid".into()));
        }
        a.mu1.iter().flat_map(|&p| a.mu2.iter().map(move |&q| [p, q])).collect()
    };
    let (set, failed) = burgers::training_set(&cfg, &params, a.pad_left, a.pad_right)?;
    if !failed.is_empty() {
        for f in &failed {
            eprintln!("run mu = {:?} failed: {}", f.mu, f.error);
        }
        return Err(Error::Config(format!("{} of {} runs failed", failed.len(), params.len())));
    }
    set.save(&a.out)?;
    println!(
        "{} runs, {} snapshots of length {}",
        set.runs.len(),
        set.total_snapshots(),
        set.state_len()
    );
    let mut m = RunManifest::new("fom burgers", args);
    m.set("cells", cfg.cells);
    m.set("dt", cfg.dt);
    m.set("steps", cfg.steps());
    m.set("runs", params.len());
    finish(m, &a.out)
}

fn parse_mu(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad parameter `{p}` in `{s}`"))))
        .collect()
}

fn fom_euler(a: FomEulerArgs, args: Vec<String>) -> Result<()> {
    let case = a.case.euler()?;
    let cfg = a.time.config(case)?;
    let mesh = parse_gmsh(&a.mesh)?;
    let params: Vec<Vec<f64>> = if a.full_grid {
        match case {
            EulerCase::Riemann => euler::riemann_param_grid(5).iter().map(|p| p.to_vec()).collect(),
            EulerCase::BowShock => euler::bowshock_params().into_iter().map(|p| vec![p]).collect(),
        }
    } else {
        a.mu.iter().map(|s| parse_mu(s)).collect::<Result<_>>()?
    };
    if params.is_empty() {
        return Err(Error::Config("give at least one --mu, or --full-grid".into()));
    }
    let runs = params
        .par_iter()
        .map(|mu| euler::run_case(&mesh, case, mu, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut set = SnapshotSet::new(case.name(), euler::NQ, mesh.num_cells(), cfg.dt, mesh.hash());
    let mut max_cfl = 0.0f64;
    for (traj, cfl) in runs {
        max_cfl = max_cfl.max(cfl);
        set.push(traj)?;
    }
    if max_cfl > CFL_WARN {
        eprintln!("warning: CFL number reached {max_cfl:.3}");
    }
    set.save(&a.out)?;
    println!("{} runs, {} snapshots, max CFL {max_cfl:.4}", set.runs.len(), set.total_snapshots());
    let mut m = RunManifest::new("fom euler", args);
    m.input(&a.mesh)?;
    m.set("dt", cfg.dt);
    m.set("steps", cfg.steps());
    m.set("max_cfl", max_cfl);
    finish(m, &a.out)
}

fn scale_stats(a: ScaleStatsArgs, args: Vec<String>) -> Result<()> {
    let set = SnapshotSet::load(&a.snapshots)?;
    let stats = ScaleStats::from_states(set.states(), set.nq)?;
    let text = toml::to_string(&stats).map_err(|e| Error::Format(e.to_string()))?;
    crate::binio::write_atomic(&a.out, text.as_bytes())?;
    print!("{text}");
    let mut m = RunManifest::new("scale-stats", args);
    m.input(&a.snapshots)?;
    finish(m, &a.out)
}

fn load_stats(path: &Path) -> Result<ScaleStats> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn train(a: TrainArgs, args: Vec<String>) -> Result<()> {
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(Error::Config(format!("validation fraction must be in [0, 1), got {}", a.val_fraction)));
    }
    let set = SnapshotSet::load(&a.snapshots)?;
    let hierarchy = Hierarchy::load(&a.hierarchy)?;
    let n_val = (a.val_fraction * set.total_snapshots() as f64).round() as usize;
    let (train_data, val_data) = set.split_random(n_val, a.seed)?;
    let stats = match &a.scale_stats {
        Some(p) => load_stats(p)?,
        None => ScaleStats::from_states(train_data.iter().map(Vec::as_slice), set.nq)?,
    };
    let spec = LayerSpec {
        widths: a.widths.clone(),
        latent: a.latent,
        depth: a.depth,
        unpool_k: a.unpool_k,
    };
    let padding = Padding {
        left: set.pad_left,
        right: set.pad_right,
    };
    let mut model = AEModel::new(spec, hierarchy, stats, padding, a.seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let report = ae::train(&mut model, &train_data, &val_data, &cfg)?;
    model.save(&a.out)?;
    let last = report.train_loss.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} parameters, {} train / {} validation snapshots, final train loss {last:e}",
        model.num_params(),
        train_data.len(),
        val_data.len()
    );
    if let Some(v) = report.val_loss.last() {
        println!("final validation loss {v:e}");
    }
    let mut m = RunManifest::new("train", args);
    m.seed = Some(a.seed);
    m.input(&a.snapshots)?;
    m.input(&a.hierarchy)?;
    if let Some(p) = &a.scale_stats {
        m.input(p)?;
    }
    m.set("epochs", a.epochs);
    m.set("batch", a.batch);
    m.set("lr", a.lr);
    m.set("validation", n_val);
    m.hierarchy_hash = Some(model.hierarchy_hash().to_string());
    m.model_hash = Some(file_hash(&a.out)?);
    finish(m, &a.out)
}

fn parse_policy(s: &str) -> Result<StepPolicy> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if rest.is_empty() {
        Vec::new()
    } else {
        parse_mu(rest)?
    };
    match (kind, nums.as_slice()) {
        ("fixed", []) => Ok(StepPolicy::unit()),
        ("fixed", [b]) => Ok(StepPolicy::Fixed { beta: *b }),
        ("decay", []) => Ok(StepPolicy::decaying()),
        ("decay", [i, f, p]) if *p >= 1.0 && p.fract() == 0.0 => Ok(StepPolicy::Decay {
            initial: *i,
            factor: *f,
            patience: *p as usize,
        }),
        ("armijo", []) => Ok(StepPolicy::armijo()),
        _ => Err(Error::Config(format!("unknown step policy `{s}`"))),
    }
}

/// Velocity of one of the three cases behind a trait object.
enum CaseModel {
    Burgers(Burgers, BurgersConfig),
    Euler(Euler, EulerCase, EulerConfig),
}

impl CaseModel {
    fn velocity(&self) -> &dyn Velocity {
        match self {
            CaseModel::Burgers(b, _) => b,
            CaseModel::Euler(e, _, _) => e,
        }
    }

    fn scheme(&self) -> Result<TimeScheme> {
        match self {
            CaseModel::Burgers(_, c) => burgers::scheme(c),
            CaseModel::Euler(_, _, c) => TimeScheme::forward_euler(c.dt),
        }
    }

    fn steps(&self) -> usize {
        match self {
            CaseModel::Burgers(_, c) => c.steps(),
            CaseModel::Euler(_, _, c) => c.steps(),
        }
    }

    fn dt(&self) -> f64 {
        match self {
            CaseModel::Burgers(_, c) => c.dt,
            CaseModel::Euler(_, _, c) => c.dt,
        }
    }

    /// Physical initial state.
    fn initial(&self, mu: &[f64]) -> Result<Vec<f64>> {
        match self {
            CaseModel::Burgers(b, _) => Ok(vec![1.0; b.dim()]),
            CaseModel::Euler(e, case, _) => euler::initial_state(e, *case, mu),
        }
    }

    fn output_set(&self) -> SnapshotSet {
        match self {
            CaseModel::Burgers(b, c) => SnapshotSet::new("burgers", 1, b.dim(), c.dt, c.mesh_hash()),
            CaseModel::Euler(e, case, c) => {
                SnapshotSet::new(case.name(), euler::NQ, e.num_cells(), c.dt, e.mesh().hash())
            }
        }
    }
}

fn case_model(a: &RomSolveArgs) -> Result<CaseModel> {
    match a.case {
        CaseArg::Burgers => {
            let d = BurgersConfig::default();
            let cfg = BurgersConfig {
                cells: a.cells,
                length: a.length,
                dt: a.dt.unwrap_or(d.dt),
                final_time: a.final_time.unwrap_or(d.final_time),
            };
            cfg.validate()?;
            let [m1, m2] = <[f64; 2]>::try_from(a.mu.as_slice())
                .map_err(|_| Error::Config("burgers takes --mu MU1,MU2".into()))?;
            Ok(CaseModel::Burgers(Burgers::from_config(&cfg, [m1, m2])?, cfg))
        }
        c => {
            let case = c.euler()?;
            let mesh_path = a
                .mesh
                .as_ref()
                .ok_or_else(|| Error::Config("Euler cases need --mesh".into()))?;
            let time = EulerTime {
                dt: a.dt,
                final_time: a.final_time,
                gamma: a.gamma,
            };
            let cfg = time.config(case)?;
            let mesh = parse_gmsh(mesh_path)?;
            Ok(CaseModel::Euler(euler::case_model(&mesh, case, &a.mu, cfg.gamma)?, case, cfg))
        }
    }
}

fn rom(a: RomSolveArgs, args: Vec<String>) -> Result<()> {
    let model = case_model(&a)?;
    let scheme = model.scheme()?;
    let problem = ResidualProblem::new(model.velocity(), &scheme);
    let base = match a.method {
        Method::PodLspg => RomConfig::pod_lspg(),
        Method::GdLspg => RomConfig::gd_lspg(),
    };
    let cfg = RomConfig {
        kappa: a.kappa.unwrap_or(base.kappa),
        policy: parse_policy(&a.step_policy)?,
        max_iterations: a.max_iterations,
        normalization: if a.per_step_normalization {
            Normalization::PerStep
        } else {
            Normalization::FirstStep
        },
    };
    let mut out = model.output_set();
    let x0 = model.initial(&a.mu)?;
    let mut manifest = RunManifest::new("rom solve", args);
    let traj = match a.method {
        Method::PodLspg => {
            let path = a.basis.as_ref().expect("clap requires --basis");
            manifest.input(path)?;
            let stored = StoredBasis::load(path)?;
            if stored.mesh_hash != out.mesh_hash || stored.nq * stored.nc != x0.len() {
                return Err(Error::HashMismatch {
                    expected: out.mesh_hash.clone(),
                    found: stored.mesh_hash,
                });
            }
            let xhat0 = stored.basis.project(&x0)?;
            rom_solve(&problem, &LinearMap(stored.basis.phi.clone()), &xhat0, model.steps(), &cfg)?
        }
        Method::GdLspg => {
            let (mp, hp) = (a.model.as_ref().unwrap(), a.hierarchy.as_ref().unwrap());
            manifest.input(mp)?;
            manifest.input(hp)?;
            let hierarchy = Hierarchy::load(hp)?;
            let ae_model = AEModel::load(mp, &hierarchy)?;
            let pad = ae_model.padding();
            let input = match &model {
                CaseModel::Burgers(b, _) => {
                    let mut v = vec![b.mu()[0]; pad.left];
                    v.extend(std::iter::repeat_n(1.0, b.dim() + pad.right));
                    v
                }
                CaseModel::Euler(..) if pad.left + pad.right > 0 => {
                    return Err(Error::Config("padded models are only supported for burgers".into()))
                }
                CaseModel::Euler(..) => x0.clone(),
            };
            let xhat0 = ae_model.encode(&input)?;
            let dec = ae_model.decoder(true);
            if dec.output_dim() != x0.len() {
                return Err(Error::Dimension(format!(
                    "model reconstructs {} physical entries, case has {}",
                    dec.output_dim(),
                    x0.len()
                )));
            }
            manifest.hierarchy_hash = Some(ae_model.hierarchy_hash().to_string());
            manifest.model_hash = Some(file_hash(mp)?);
            rom_solve(&problem, &dec, &xhat0, model.steps(), &cfg)?
        }
    };
    let total: usize = traj.iterations.iter().sum();
    let worst = traj.ratios.iter().copied().fold(0.0f64, f64::max);
    println!(
        "{} steps of {:.4e}, {total} Gauss-Newton iterations, worst final ratio {worst:.3e}",
        traj.iterations.len(),
        model.dt()
    );
    out.push(Trajectory {
        mu: a.mu.clone(),
        states: traj.states,
        latents: Some(traj.latents),
    })?;
    out.save(&a.out)?;
    manifest.set("method", a.method.label());
    manifest.set("kappa", cfg.kappa);
    manifest.set("step_policy", format!("{:?}", cfg.policy));
    manifest.set("normalization", format!("{:?}", cfg.normalization));
    manifest.set("gauss_newton_iterations", total);
    finish(manifest, &a.out)
}

fn pod(a: PodArgs, args: Vec<String>) -> Result<()> {
    let set = SnapshotSet::load(&a.snapshots)?;
    let snaps: Vec<Vec<f64>> = set.states().map(|s| set.physical(s)).collect();
    let basis = pod_basis(&snaps, a.dim)?;
    let err = metrics::pod_projection_error(snaps.iter().map(Vec::as_slice), &basis.phi)?;
    let shown: Vec<String> = basis.singular_values.iter().take(10).map(|s| format!("{s:.6e}")).collect();
    println!("leading singular values: {}", shown.join(" "));
    println!("projection error {err:e}");
    StoredBasis {
        case: set.case.clone(),
        nq: set.nq,
        nc: set.nc,
        mesh_hash: set.mesh_hash.clone(),
        basis,
    }
    .save(&a.out)?;
    let mut m = RunManifest::new("pod", args);
    m.input(&a.snapshots)?;
    m.set("dim", a.dim);
    m.metrics.push(MetricRecord {
        case: set.case,
        method: "pod".into(),
        m: a.dim,
        metric: "projection".into(),
        value: err,
    });
    finish(m, &a.out)
}

fn metrics_cmd(a: MetricsArgs, args: Vec<String>) -> Result<()> {
    let mut m = RunManifest::new("metrics", args);
    let mut records = Vec::new();
    let mut record = |case: &str, metric: &str, value: f64| {
        println!("{metric} {value}");
        records.push(MetricRecord {
            case: case.to_string(),
            method: a.method.clone(),
            m: a.latent_dim,
            metric: metric.to_string(),
            value,
        });
    };
    if let (Some(fp), Some(rp)) = (&a.fom, &a.rom) {
        let fom = SnapshotSet::load(fp)?;
        let rom = SnapshotSet::load(rp)?;
        m.input(fp)?;
        m.input(rp)?;
        record(&fom.case, "state-prediction", metrics::state_prediction_error(&fom, &rom)?);
        if let (Some(step), Some(out)) = (a.field_step, &a.field_out) {
            let field = metrics::local_error_field(&fom, &rom, a.field_run, step, a.field_variable)?;
            let mut csv = String::from("index,value\n");
            for (i, v) in field.iter().enumerate() {
                csv.push_str(&format!("{i},{v:e}\n"));
            }
            crate::binio::write_atomic(out, csv.as_bytes())?;
        }
    }
    if let Some(sp) = &a.snapshots {
        let set = SnapshotSet::load(sp)?;
        m.input(sp)?;
        if let Some(mp) = &a.model {
            let hp = a.hierarchy.as_ref().expect("clap requires --hierarchy");
            m.input(mp)?;
            let h = Hierarchy::load(hp)?;
            let model = AEModel::load(mp, &h)?;
            if model.input_len() != set.state_len() {
                return Err(Error::Dimension(format!(
                    "model takes {} entries, snapshots have {}",
                    model.input_len(),
                    set.state_len()
                )));
            }
            record(&set.case, "reconstruction", metrics::ae_reconstruction_error(&model, set.states())?);
        }
        if let Some(bp) = &a.basis {
            m.input(bp)?;
            let stored = StoredBasis::load(bp)?;
            let phys: Vec<Vec<f64>> = set.states().map(|s| set.physical(s)).collect();
            record(
                &set.case,
                "projection",
                metrics::pod_projection_error(phys.iter().map(Vec::as_slice), &stored.basis.phi)?,
            );
        }
    }
    if records.is_empty() {
        return Err(Error::Config("nothing to measure: give --fom/--rom, or --snapshots with --model or --basis".into()));
    }
    if let Some(out) = &a.out {
        let mut file = MetricsFile::load_or_default(out)?;
        file.records.extend(records.iter().cloned());
        file.save(out)?;
        m.metrics = records;
        finish(m, out)?;
    }
    Ok(())
}

fn export_csv(a: ExportArgs) -> Result<()> {
    let csv = if let Some(p) = &a.metrics {
        MetricsFile::load(p)?.to_csv()
    } else {
        let set = SnapshotSet::load(a.snapshots.as_ref().expect("clap requires a source"))?;
        let mut s = String::from("run,step,variable,cell,value\n");
        for (r, run) in set.runs.iter().enumerate() {
            for (n, state) in run.states.iter().enumerate() {
                let phys = set.physical(state);
                for q in 0..set.nq {
                    for c in 0..set.nc {
                        s.push_str(&format!("{r},{n},{q},{c},{:e}\n", phys[q * set.nc + c]));
                    }
                }
            }
        }
        s
    };
    match &a.out {
        Some(out) => crate::binio::write_atomic(out, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(cli(["gdlspg", "pod", "--bogus"]), 2);
    }

    #[test]
    fn policies() {
        assert_eq!(parse_policy("fixed").unwrap(), StepPolicy::unit());
        assert_eq!(parse_policy("fixed:0.5").unwrap(), StepPolicy::Fixed { beta: 0.5 });
        assert_eq!(parse_policy("decay").unwrap(), StepPolicy::decaying());
        assert!(parse_policy("decay:0.5,0.9").is_err());
        assert!(parse_policy("newton").is_err());
    }

    #[test]
    fn mesh_specs() {
        assert_eq!(generated_mesh("square:8").unwrap().num_cells(), 8);
        assert!(generated_mesh("hexagon:3").is_err());
    }
}
