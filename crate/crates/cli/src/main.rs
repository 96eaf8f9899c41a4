//! `mcvd`: closed-form channel responses, simulations and model-vs-simulation
//! experiments for diffusion-based molecular links.

mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcvd_core::analytic::Diffusion;
use mcvd_core::experiments::{
    build_topology, builtin_topologies, lookup_topology, run_experiment, ComparisonReport,
    ReflectorSpec, Scale, TopologyId, TopologySpec,
};
use mcvd_core::montecarlo::simulate;
use mcvd_core::{HitHistogram, SimConfig};

use manifest::{RunInputs, RunManifest, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid input files, invalid parameters.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "mcvd",
    version,
    about = "Diffusion channel models and Monte Carlo checks"
)]
struct Cli {
    /// Worker threads for simulations (defaults to all cores).
    #[arg(long, global = true, env = "MCVD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a closed-form hitting rate and CDF as CSV (t, rate, cdf).
    Analytic(AnalyticArgs),
    /// Simulate one topology and write its hit histogram.
    Simulate(SimulateArgs),
    /// Compare the closed-form CDF with simulation for built-in topologies.
    Experiment(ExperimentArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Siso,
    Halfspace,
    Twoplane,
}

impl ModelKind {
    fn reflectors(self) -> usize {
        match self {
            ModelKind::Siso => 0,
            ModelKind::Halfspace => 1,
            ModelKind::Twoplane => 2,
        }
    }
}

#[derive(Args, Clone, Default)]
struct TopologyArgs {
    /// Built-in topology id (t0, t1, t2, t3, t4, t2_finite, two_plane).
    #[arg(long, conflicts_with = "topology_file")]
    topology: Option<String>,
    /// Topology description in JSON.
    #[arg(long)]
    topology_file: Option<PathBuf>,
    /// Receiver radius in um.
    #[arg(long)]
    rr: Option<f64>,
    /// Gap between receiver surface and reflector in um.
    #[arg(long)]
    d: Option<f64>,
    /// Number of image receivers for two planes.
    #[arg(long)]
    kprime: Option<usize>,
}

#[derive(Args)]
struct AnalyticArgs {
    model: ModelKind,
    #[command(flatten)]
    topology: TopologyArgs,
    /// Transmitter to receiver-center distance in um (siso only).
    #[arg(long)]
    r0: Option<f64>,
    /// Transmitter position "x,y,z" in um.
    #[arg(long, value_parser = parse_vec3)]
    tx: Option<[f64; 3]>,
    /// Receiver center "x,y,z" in um.
    #[arg(long, value_parser = parse_vec3)]
    rx: Option<[f64; 3]>,
    /// Reflecting plane "px,py,pz,nx,ny,nz" (point and normal, um); repeat for two planes.
    #[arg(long = "plane", value_parser = parse_plane)]
    planes: Vec<ReflectorSpec>,
    /// Diffusion coefficient in um^2/s.
    #[arg(long = "D", visible_alias = "diffusion", default_value_t = SimConfig::DIFFUSION_UM2_PER_S)]
    diffusion: f64,
    #[arg(long, default_value_t = 2.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    t_step: f64,
    /// Write the CSV here (plus a manifest beside it) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// N = 1e5, dt = 1e-4 s, 10 replications (default).
    #[arg(long, conflicts_with = "full_scale")]
    desk_scale: bool,
    /// N = 1e6, dt = 1e-5 s, 100 replications.
    #[arg(long = "paper-scale", visible_alias = "full-scale")]
    full_scale: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    n_molecules: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Time step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated duration in seconds.
    #[arg(long)]
    t_total: Option<f64>,
    /// Diffusion coefficient in um^2/s.
    #[arg(long = "D", visible_alias = "diffusion")]
    diffusion: Option<f64>,
    /// Take every step at full resolution, even far from all surfaces.
    #[arg(long)]
    no_far_field: bool,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        let scale = if self.full_scale {
            Scale::Full
        } else {
            Scale::Desk
        };
        let mut cfg = scale.config(self.seed);
        if let Some(n) = self.n_molecules {
            cfg.n_molecules = n;
        }
        if let Some(r) = self.reps {
            cfg.n_reps = r;
        }
        if let Some(dt) = self.dt {
            cfg.dt_s = dt;
        }
        if let Some(t) = self.t_total {
            cfg.t_total_s = t;
        }
        if let Some(d) = self.diffusion {
            cfg.diffusion_um2_per_s = d;
        }
        cfg.far_field_stepping = !self.no_far_field;
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Built-in topology id.
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    id: Option<String>,
    /// Run every built-in topology variant.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    rr: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    kprime: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Defaults to a `replay` directory next to the manifest.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!(
            "expected {N} comma-separated numbers, got {}",
            parts.len()
        ));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(out)
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_plane(s: &str) -> Result<ReflectorSpec, String> {
    let v = parse_floats::<6>(s)?;
    Ok(ReflectorSpec::Plane {
        point_um: [v[0], v[1], v[2]],
        normal: [v[3], v[4], v[5]],
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

impl TopologyArgs {
    fn resolve(&self) -> Result<Option<TopologySpec>, CliError> {
        if let Some(path) = &self.topology_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let mut spec = TopologySpec::from_json(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if let Some(k) = self.kprime {
                spec = spec.with_k_prime(k).map_err(usage)?;
            }
            return Ok(Some(spec));
        }
        let Some(id) = &self.topology else {
            return Ok(None);
        };
        let id: TopologyId = id.parse().map_err(usage)?;
        lookup_topology(id, self.rr, self.d, self.kprime)
            .map(Some)
            .map_err(usage)
    }
}

fn analytic_topology(args: &AnalyticArgs) -> Result<TopologySpec, CliError> {
    if let Some(spec) = args.topology.resolve()? {
        return Ok(spec);
    }
    let r_r = args.topology.rr.ok_or_else(|| usage("--rr is required"))?;
    let spec = match args.model {
        ModelKind::Siso if args.tx.is_none() && args.rx.is_none() => {
            let r0 = args
                .r0
                .ok_or_else(|| usage("siso needs --r0 or --tx/--rx"))?;
            TopologySpec {
                id: TopologyId::Custom,
                tx_um: [0.0; 3],
                rx_center_um: [r0, 0.0, 0.0],
                r_r_um: r_r,
                d_um: None,
                k_prime: None,
                reflectors: Vec::new(),
            }
        }
        _ => TopologySpec {
            id: TopologyId::Custom,
            tx_um: args.tx.ok_or_else(|| usage("--tx is required"))?,
            rx_center_um: args.rx.ok_or_else(|| usage("--rx is required"))?,
            r_r_um: r_r,
            d_um: None,
            k_prime: args.topology.kprime,
            reflectors: args.planes.clone(),
        },
    };
    Ok(spec)
}

fn analytic_csv(
    model_name: &str,
    spec: &TopologySpec,
    d: f64,
    t_max: f64,
    t_step: f64,
) -> Result<String, CliError> {
    if !(t_step > 0.0 && t_max >= t_step && t_max.is_finite()) {
        return Err(usage("need 0 < --t-step <= --t-max"));
    }
    let kind = ModelKind::from_str(model_name, true).map_err(usage)?;
    if spec.reflectors.len() != kind.reflectors() {
        return Err(usage(format!(
            "model {model_name} needs {} reflector(s), topology has {}",
            kind.reflectors(),
            spec.reflectors.len()
        )));
    }
    let diffusion = Diffusion::new(d).map_err(usage)?;
    let (_, model) = build_topology(spec, diffusion).map_err(usage)?;
    let rows = (t_max / t_step).round() as usize;
    let mut out = String::with_capacity(48 * (rows + 1));
    out.push_str("t,rate,cdf\n");
    for i in 1..=rows {
        let t = i as f64 * t_step;
        let _ = writeln!(out, "{t},{},{}", model.rate(t), model.cdf(t));
    }
    Ok(out)
}

fn cmd_analytic(args: AnalyticArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = analytic_topology(&args)?;
    let name = args
        .model
        .to_possible_value()
        .expect("named variant")
        .get_name()
        .to_string();
    let csv = analytic_csv(&name, &spec, args.diffusion, args.t_max, args.t_step)?;
    match &args.out {
        None => print!("{csv}"),
        Some(path) => {
            write_file(path, &csv)?;
            let inputs = RunInputs::Analytic {
                model: name,
                topology: spec,
                diffusion_um2_per_s: args.diffusion,
                t_max_s: args.t_max,
                t_step_s: args.t_step,
            };
            let mut manifest_path = path.clone().into_os_string();
            manifest_path.push(".manifest.json");
            RunManifest::new(inputs, start.elapsed().as_secs_f64())
                .write(Path::new(&manifest_path))?;
        }
    }
    Ok(())
}

fn histogram_csv(h: &HitHistogram) -> String {
    let curves: Vec<Vec<f64>> = (0..h.n_receivers())
        .map(|r| h.cumulative_curve(r).expect("receiver index in range"))
        .collect();
    let mut out = String::from("t_seconds");
    for r in 0..h.n_receivers() {
        let _ = write!(out, ",rx{r}_hits,rx{r}_cumulative_fraction");
    }
    out.push('\n');
    for (b, t) in h.bin_end_times().iter().enumerate() {
        let _ = write!(out, "{t}");
        for (counts, curve) in h.counts.iter().zip(&curves) {
            let _ = write!(out, ",{},{}", counts[b], curve[b]);
        }
        out.push('\n');
    }
    out
}

fn run_simulate(spec: &TopologySpec, cfg: &SimConfig, out_dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let diffusion = Diffusion::new(cfg.diffusion_um2_per_s).map_err(usage)?;
    let (env, _) = build_topology(spec, diffusion).map_err(usage)?;
    cfg.schedule().map_err(usage)?;
    let hist = simulate(&env, cfg).map_err(runtime)?;
    write_file(&out_dir.join("histogram.csv"), &histogram_csv(&hist))?;
    eprintln!(
        "{}: {} of {} molecules absorbed, {} reflections",
        spec.label(),
        hist.n_absorbed.iter().sum::<u64>(),
        hist.n_emitted,
        hist.diagnostics.reflections
    );
    let inputs = RunInputs::Simulate {
        topology: spec.clone(),
        config: cfg.clone(),
    };
    RunManifest::new(inputs, start.elapsed().as_secs_f64()).write(&out_dir.join(MANIFEST_FILE))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = args
        .topology
        .resolve()?
        .ok_or_else(|| usage("one of --topology or --topology-file is required"))?;
    run_simulate(&spec, &args.sim.config(), &args.out_dir)
}

fn write_report(report: &ComparisonReport, dir: &Path) -> Result<(), CliError> {
    write_file(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_file(&dir.join("curves.csv"), &report.curves_csv())
}

fn run_experiments(
    specs: &[TopologySpec],
    cfg: &SimConfig,
    out_dir: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    cfg.schedule().map_err(usage)?;
    let diffusion = Diffusion::new(cfg.diffusion_um2_per_s).map_err(usage)?;
    for spec in specs {
        build_topology(spec, diffusion).map_err(usage)?;
    }
    let mut summary = String::from("topology,model,rmse\n");
    for spec in specs {
        let report = run_experiment(spec, cfg).map_err(runtime)?;
        let label = spec.label();
        write_report(&report, &out_dir.join(&label))?;
        println!("{label:16} {:10} rmse {:.5}", report.model, report.rmse);
        let _ = writeln!(summary, "{label},{},{}", report.model, report.rmse);
    }
    write_file(&out_dir.join("summary.csv"), &summary)?;
    let inputs = RunInputs::Experiment {
        topologies: specs.to_vec(),
        config: cfg.clone(),
    };
    RunManifest::new(inputs, start.elapsed().as_secs_f64()).write(&out_dir.join(MANIFEST_FILE))
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let specs = if args.all {
        builtin_topologies().to_vec()
    } else {
        let id: TopologyId = args
            .id
            .as_deref()
            .expect("clap enforces id or --all")
            .parse()
            .map_err(usage)?;
        vec![lookup_topology(id, args.rr, args.d, args.kprime).map_err(usage)?]
    };
    run_experiments(&specs, &args.sim.config(), &args.out_dir)
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    let out_dir = args.out_dir.unwrap_or_else(|| {
        args.manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join("replay")
    });
    match manifest.inputs {
        RunInputs::Analytic {
            model,
            topology,
            diffusion_um2_per_s,
            t_max_s,
            t_step_s,
        } => {
            let csv = analytic_csv(&model, &topology, diffusion_um2_per_s, t_max_s, t_step_s)?;
            write_file(&out_dir.join("analytic.csv"), &csv)
        }
        RunInputs::Simulate { topology, config } => run_simulate(&topology, &config, &out_dir),
        RunInputs::Experiment { topologies, config } => {
            run_experiments(&topologies, &config, &out_dir)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(runtime)?;
    }
    match cli.command {
        Command::Analytic(a) => cmd_analytic(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
