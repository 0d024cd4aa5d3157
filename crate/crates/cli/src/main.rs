use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use swe_carleman::bench::{
    degree_study, kappa_sweeps, sound_speed_sweep, stable_sweep, truncation_error_study,
    DegreeConfig, KappaConfig, SoundSpeedConfig, StableConfig, TruncationConfig,
};
use swe_carleman::io::{
    read_json, read_matrix_market, read_vector_market, write_atomic, write_json,
    write_matrix_market, write_vector_market, SystemMetadata,
};
use swe_carleman::{
    assemble, carleman_dim, embed_state, extract_observables, initial_field, solve, CarlemanMatrix,
    CsrMatrix, Error, EulerSystem, KappaMethod, PhysParams, SolveMethod, SolveReport,
    StreamingScale, WeightSet, DEFAULT_RESIDUAL_TOL,
};

#[derive(Parser, Debug)]
#[command(
    name = "swe-carleman",
    version,
    about = "Carleman-linearized lattice Boltzmann shallow water pipeline"
)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SWE_CARLEMAN_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the Carleman generator and the Euler system and write them as Matrix Market.
    Build(BuildArgs),
    /// Solve a built (or freshly assembled) system and write observables.
    Solve(SolveArgs),
    /// Run one of the benchmark studies.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args, Debug, Default)]
struct PhysFlags {
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Domain length L.
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    timesteps: Option<usize>,
    /// standard | printed
    #[arg(long, value_parser = parse_enum::<WeightSet>)]
    weights: Option<WeightSet>,
    /// physical | lattice
    #[arg(long, value_parser = parse_enum::<StreamingScale>)]
    streaming_scale: Option<StreamingScale>,
}

impl PhysFlags {
    fn apply(&self, p: &mut PhysParams) {
        set(&mut p.g, self.g);
        set(&mut p.tau, self.tau);
        set(&mut p.length, self.length);
        set(&mut p.grid_points, self.grid_points);
        set(&mut p.dt, self.dt);
        set(&mut p.timesteps, self.timesteps);
        set(&mut p.weights, self.weights);
        set(&mut p.streaming_scale, self.streaming_scale);
    }
}

#[derive(Args, Debug)]
struct SystemFlags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    phys: PhysFlags,
    /// Initial depth per grid point (one value is broadcast).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h0: Option<Vec<f64>>,
    /// Initial velocity per grid point (one value is broadcast).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u0: Option<Vec<f64>>,
    /// Replace the Carleman generator by zero.
    #[arg(long)]
    disable_dynamics: bool,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    system: SystemFlags,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Directory written by `build`. Without it the system is assembled in memory.
    #[arg(long, conflicts_with_all = ["config", "h0", "u0", "disable_dynamics", "g", "tau", "length", "grid_points", "dt", "timesteps", "weights", "streaming_scale"])]
    system: Option<PathBuf>,
    #[command(flatten)]
    flags: SystemFlags,
    /// block_forward | sparse_direct
    #[arg(long, value_parser = parse_from_str::<SolveMethod>)]
    method: Option<SolveMethod>,
    /// Largest accepted relative residual.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Depth error of a resting lake against h0.
    Stable(StableArgs),
    /// Measured wave speed against sqrt(g h0).
    SoundSpeed(SoundArgs),
    /// Carleman against the nonlinear reference for shrinking deviations.
    Truncation(TruncationArgs),
    /// Condition number of the Euler system against N_t and N.
    Kappa(KappaArgs),
    /// Degree of the odd polynomial approximating 1/x.
    QsvtDegree(DegreeArgs),
}

#[derive(Args, Debug)]
struct BenchOut {
    /// JSON configuration for the scenario; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StableArgs {
    #[command(flatten)]
    common: BenchOut,
    #[command(flatten)]
    phys: PhysFlags,
    #[arg(long, value_delimiter = ',')]
    h0: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_from_str::<SolveMethod>)]
    method: Option<SolveMethod>,
    #[arg(long)]
    disable_dynamics: bool,
}

#[derive(Args, Debug)]
struct SoundArgs {
    #[command(flatten)]
    common: BenchOut,
    #[arg(long, value_delimiter = ',')]
    h0: Option<Vec<f64>>,
    /// Step height as a fraction of h0.
    #[arg(long)]
    dh_frac: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Fixed time step instead of the CFL rule.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long, value_parser = parse_enum::<WeightSet>)]
    weights: Option<WeightSet>,
    #[arg(long, value_parser = parse_enum::<StreamingScale>)]
    streaming_scale: Option<StreamingScale>,
}

#[derive(Args, Debug)]
struct TruncationArgs {
    #[command(flatten)]
    common: BenchOut,
    #[command(flatten)]
    phys: PhysFlags,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    deviations: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<f64>,
}

#[derive(Args, Debug)]
struct KappaArgs {
    #[command(flatten)]
    common: BenchOut,
    /// N_t values for the sweep at fixed N.
    #[arg(long, value_delimiter = ',')]
    timesteps: Option<Vec<usize>>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// N values for the sweep at fixed N_t.
    #[arg(long, value_delimiter = ',')]
    grid_list: Option<Vec<usize>>,
    #[arg(long)]
    fixed_timesteps: Option<usize>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    /// iterative | dense_svd
    #[arg(long, value_parser = parse_from_str::<KappaMethod>)]
    method: Option<KappaMethod>,
    #[arg(long, value_parser = parse_enum::<WeightSet>)]
    weights: Option<WeightSet>,
    #[arg(long, value_parser = parse_enum::<StreamingScale>)]
    streaming_scale: Option<StreamingScale>,
}

#[derive(Args, Debug)]
struct DegreeArgs {
    #[command(flatten)]
    common: BenchOut,
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    #[arg(long, alias = "epsilon")]
    eps: Option<f64>,
}

/// Configuration accepted by `build` and `solve`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    params: PhysParams,
    /// Empty means a 1% step on the left half of a unit-depth lake.
    h0: Vec<f64>,
    u0: Vec<f64>,
    disable_dynamics: bool,
    method: Option<SolveMethod>,
    tolerance: Option<f64>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    metadata: &'a SystemMetadata,
    tolerance: f64,
    passed: bool,
    report: &'a SolveReport,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn per_point(
    values: &[f64],
    n: usize,
    what: &str,
    default: impl Fn(usize) -> f64,
) -> Result<Vec<f64>, Error> {
    match values.len() {
        0 => Ok((0..n).map(default).collect()),
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(Error::InvalidParameter(format!(
            "{what} has {len} values; expected 1 or N = {n}"
        ))),
    }
}

fn run_config(flags: &SystemFlags) -> Result<RunConfig, Error> {
    let mut cfg: RunConfig = load(flags.config.as_deref())?;
    flags.phys.apply(&mut cfg.params);
    set(&mut cfg.h0, flags.h0.clone());
    set(&mut cfg.u0, flags.u0.clone());
    cfg.disable_dynamics |= flags.disable_dynamics;
    Ok(cfg)
}

fn assemble_system(cfg: &RunConfig) -> Result<(CsrMatrix, EulerSystem, SystemMetadata), Error> {
    let p = &cfg.params;
    p.validate()?;
    let n = p.grid_points;
    let h0 = per_point(&cfg.h0, n, "h0", |a| if a < n / 2 { 1.01 } else { 1.0 })?;
    let u0 = per_point(&cfg.u0, n, "u0", |_| 0.0)?;
    let f0 = initial_field(&h0, &u0)?;
    let c = if cfg.disable_dynamics {
        CarlemanMatrix::zero(n)
    } else {
        CarlemanMatrix::build(p)?
    };
    let sys = assemble(&c.total, &embed_state(&f0), p.dt, p.timesteps)?;
    let meta = SystemMetadata {
        grid_points: n,
        truncation_order: swe_carleman::carleman::TRUNCATION_ORDER,
        tau: p.tau,
        g: p.g,
        length: p.length,
        dt: p.dt,
        timesteps: p.timesteps,
        weights: p.weights,
        streaming_scale: p.streaming_scale,
        disable_dynamics: cfg.disable_dynamics,
        carleman_dim: c.dim(),
        euler_dim: sys.dim(),
        carleman_nnz: c.total.nnz(),
        euler_nnz: sys.matrix.nnz(),
        h0,
        u0,
    };
    Ok((c.total, sys, meta))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_build(args: &BuildArgs) -> Result<(), Error> {
    let cfg = run_config(&args.system)?;
    let (c, sys, meta) = assemble_system(&cfg)?;
    ensure_dir(&args.out)?;
    write_matrix_market(&args.out.join("C.mtx"), &c, Some("Carleman generator"))?;
    write_matrix_market(
        &args.out.join("E.mtx"),
        &sys.matrix,
        Some("forward Euler block system"),
    )?;
    write_vector_market(&args.out.join("b.mtx"), &sys.rhs)?;
    write_json(&args.out.join("metadata.json"), &meta)?;
    println!(
        "built N = {}, N_t = {}: dim C = {}, dim E = {}, nnz E = {} -> {}",
        meta.grid_points,
        meta.timesteps,
        meta.carleman_dim,
        meta.euler_dim,
        meta.euler_nnz,
        args.out.display()
    );
    Ok(())
}

fn load_system(dir: &Path) -> Result<(EulerSystem, SystemMetadata), Error> {
    let meta: SystemMetadata = read_json(&dir.join("metadata.json"))?;
    meta.params().validate()?;
    let e = read_matrix_market(&dir.join("E.mtx"))?;
    let b = read_vector_market(&dir.join("b.mtx"))?;
    let block = carleman_dim(meta.grid_points);
    if e.rows() != (meta.timesteps + 1) * block {
        return Err(Error::SizeMismatch {
            what: "E.mtx rows against metadata",
            expected: (meta.timesteps + 1) * block,
            actual: e.rows(),
        });
    }
    let sys = EulerSystem::from_parts(e, b, block, meta.dt)?;
    Ok((sys, meta))
}

/// Returns whether the residual met the tolerance.
fn cmd_solve(args: &SolveArgs) -> Result<bool, Error> {
    let (sys, meta, cfg) = match &args.system {
        Some(dir) => {
            let (sys, meta) = load_system(dir)?;
            (sys, meta, RunConfig::default())
        }
        None => {
            let cfg = run_config(&args.flags)?;
            let (_, sys, meta) = assemble_system(&cfg)?;
            (sys, meta, cfg)
        }
    };
    let method = args
        .method
        .or(cfg.method)
        .unwrap_or(SolveMethod::BlockForward);
    let tolerance = args
        .tolerance
        .or(cfg.tolerance)
        .unwrap_or(DEFAULT_RESIDUAL_TOL);
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let report = solve(&sys, method)?;
    let passed = report.check(tolerance).is_ok();
    ensure_dir(&args.out)?;
    if passed {
        let obs = extract_observables(&report.solution, meta.grid_points, meta.timesteps)?;
        write_atomic(&args.out.join("observables.csv"), obs.to_csv().as_bytes())?;
    }
    write_json(
        &args.out.join("solve_report.json"),
        &SolveOutput {
            metadata: &meta,
            tolerance,
            passed,
            report: &report,
        },
    )?;
    println!(
        "solved dim {} with {}: relative residual {:e} (tolerance {:e}), {:.3} s",
        report.dim,
        method.as_str(),
        report.residual,
        tolerance,
        report.wall_time_secs
    );
    Ok(passed)
}

fn write_bench<T: Serialize>(
    out: &Path,
    name: &str,
    csv: &[(&str, String)],
    summary: &T,
) -> Result<(), Error> {
    ensure_dir(out)?;
    for (suffix, body) in csv {
        write_atomic(&out.join(format!("{name}{suffix}.csv")), body.as_bytes())?;
    }
    write_json(&out.join(format!("{name}_summary.json")), summary)
}

fn fit_line(kind: &str, fit: Option<swe_carleman::bench::LinearFit>) -> String {
    match fit {
        Some(f) => format!("{kind} slope {:.4}, R^2 {:.4}", f.slope, f.r_squared),
        None => "no fit (fewer than two points)".into(),
    }
}

fn cmd_bench(cmd: &BenchCommand) -> Result<(), Error> {
    match cmd {
        BenchCommand::Stable(a) => {
            let mut cfg: StableConfig = load(a.common.config.as_deref())?;
            a.phys.apply(&mut cfg.params);
            set(&mut cfg.h0, a.h0.clone());
            set(&mut cfg.solve_method, a.method);
            cfg.disable_dynamics |= a.disable_dynamics;
            let r = stable_sweep(&cfg)?;
            write_bench(&a.common.out, "stable", &[("", r.to_csv())], &r)?;
            for row in &r.rows {
                println!(
                    "h0 {:<6} abs error {:e}  rel error {:e}",
                    row.h0, row.abs_error, row.rel_error
                );
            }
            println!("{}", fit_line("linear", r.fit));
        }
        BenchCommand::SoundSpeed(a) => {
            let mut cfg: SoundSpeedConfig = load(a.common.config.as_deref())?;
            set(&mut cfg.h0, a.h0.clone());
            set(&mut cfg.dh_frac, a.dh_frac);
            set(&mut cfg.grid_points, a.grid_points);
            set(&mut cfg.length, a.length);
            set(&mut cfg.g, a.g);
            set(&mut cfg.tau, a.tau);
            set(&mut cfg.cfl, a.cfl);
            if a.dt.is_some() {
                cfg.dt = a.dt;
            }
            if a.timesteps.is_some() {
                cfg.timesteps = a.timesteps;
            }
            set(&mut cfg.weights, a.weights);
            set(&mut cfg.streaming_scale, a.streaming_scale);
            let r = sound_speed_sweep(&cfg)?;
            write_bench(&a.common.out, "sound_speed", &[("", r.to_csv())], &r)?;
            println!(
                "{:>8} {:>12} {:>12} {:>8}",
                "h0", "v_measured", "v_analytic", "ratio"
            );
            for row in &r.rows {
                println!(
                    "{:>8} {:>12.5} {:>12.5} {:>8.4}",
                    row.h0,
                    row.v_measured,
                    row.v_analytic,
                    row.ratio()
                );
            }
            println!("{}", fit_line("log-log", r.fit));
        }
        BenchCommand::Truncation(a) => {
            let mut cfg: TruncationConfig = load(a.common.config.as_deref())?;
            a.phys.apply(&mut cfg.params);
            set(&mut cfg.deviations, a.deviations.clone());
            set(&mut cfg.u0, a.u0);
            let r = truncation_error_study(&cfg)?;
            write_bench(&a.common.out, "truncation", &[("", r.to_csv())], &r)?;
            for row in &r.rows {
                println!("d {:<8} discrepancy {:e}", row.deviation, row.discrepancy);
            }
            println!("{}", fit_line("log-log", r.fit));
        }
        BenchCommand::Kappa(a) => {
            let mut cfg: KappaConfig = load(a.common.config.as_deref())?;
            set(&mut cfg.timesteps, a.timesteps.clone());
            set(&mut cfg.grid_points, a.grid_points);
            set(&mut cfg.grid_list, a.grid_list.clone());
            set(&mut cfg.fixed_timesteps, a.fixed_timesteps);
            set(&mut cfg.g, a.g);
            set(&mut cfg.tau, a.tau);
            set(&mut cfg.dt, a.dt);
            set(&mut cfg.dx, a.dx);
            set(&mut cfg.method, a.method);
            set(&mut cfg.weights, a.weights);
            set(&mut cfg.streaming_scale, a.streaming_scale);
            let r = kappa_sweeps(&cfg)?;
            write_bench(
                &a.common.out,
                "kappa",
                &[
                    ("_timesteps", r.vs_timesteps.to_csv()),
                    ("_grid", r.vs_grid.to_csv()),
                ],
                &r,
            )?;
            for row in r.vs_timesteps.rows.iter().chain(&r.vs_grid.rows) {
                println!(
                    "N {:<3} N_t {:<4} dim {:<7} kappa {}",
                    row.grid_points, row.timesteps, row.dim, row.kappa
                );
            }
            println!("against N_t: {}", fit_line("linear", r.vs_timesteps.fit));
            println!("against N: max/min kappa {}", r.vs_grid.spread);
        }
        BenchCommand::QsvtDegree(a) => {
            let mut cfg: DegreeConfig = load(a.common.config.as_deref())?;
            set(&mut cfg.kappas, a.kappas.clone());
            set(&mut cfg.epsilon, a.eps);
            let r = degree_study(&cfg)?;
            write_bench(&a.common.out, "qsvt_degree", &[("", r.to_csv())], &r)?;
            for row in &r.rows {
                println!(
                    "kappa {:<6} degree {:<6} error {:.3e}  d/(k ln k) {:.4}",
                    row.kappa, row.degree, row.achieved_error, row.ratio_d_over_klogk
                );
            }
            println!("{}", fit_line("log-log", r.fit));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResidualTooLarge { .. } => 3,
        Error::InvalidParameter(_)
        | Error::NonPositiveDepth { .. }
        | Error::SizeMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::TooFewGridPoints(_)
        | Error::Io { .. }
        | Error::Parse { .. }
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Build(a) => cmd_build(a)?,
        Command::Solve(a) => {
            if !cmd_solve(a)? {
                eprintln!("error: relative residual exceeds tolerance");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Bench(b) => cmd_bench(b)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
