//! `osmc`: synthetic data, single estimates, evaluation, sweeps and the
//! rank-dependence search from the command line.
//!
//! Exit status: 0 on success, 1 on usage errors (bad flags, unreadable or
//! malformed config), 2 on runtime failures.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use osmc::datagen::{load_matrix, load_observations, power_law_spectrum, save_matrix, save_observations, SpecialKind};
use osmc::harness::{
    append_csv, parse_count, rank_dependence, run_algorithm, run_sweep, truth_incoherence, Algorithm, ConfigFile, Dataset,
    RankDepSpec, SweepSpec,
};
use osmc::masking::sample_mask;
use osmc::metrics::{eval_colfactors, eval_rowspace, eval_theta};
use osmc::{FactorEstimate, InitMode, Rng, SolverConfig};

#[derive(Parser)]
#[command(name = "osmc", version, about = "One-sided matrix completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth and write its observed entries as triplets.
    Synth(SynthArgs),
    /// Paired sweep over m and k; appends records to a CSV file.
    Sweep(CommonArgs),
    /// Smallest m reaching the target error for each rank, plus the log-log slope.
    Rankdep(CommonArgs),
    /// Run one estimator on a triplet file and save the factors.
    Estimate(EstimateArgs),
    /// Compare saved factors against saved ground-truth factors.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// `key = value` file overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Observation triplet file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, correlated, all_ones or single_zero.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Also write the true top-r factors (`Λ` row, then `Q`).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write `Θ*`.
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Also write the dense `X` (small problems only).
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observation triplet file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Factor file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// ours, ours_convex, full_mc, direct or no_diag.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Also write `Θ̂` for the Gram-matrix solvers.
    #[arg(long)]
    theta: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// `Θ̂` and `Θ*` files; both are needed for `theta_err`.
    #[arg(long)]
    theta_hat: Option<PathBuf>,
    #[arg(long)]
    theta_star: Option<PathBuf>,
    /// Write the metrics as `key,value` lines instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage<T>(r: osmc::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.into()))
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => ConfigFile::load(p).map_err(|e| Failure::Usage(anyhow!("cannot read config {}: {e}", p.display()))),
    }
}

const SOLVER_KEYS: [&str; 9] = [
    "steps",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon_adam",
    "init",
    "init_scale",
    "log_every",
    "convex_tol",
];

fn apply_solver(cfg: &ConfigFile, s: &mut SolverConfig) -> osmc::Result<()> {
    if let Some(v) = cfg.get::<String>("steps")? {
        s.steps = parse_count(&v)?;
    }
    if let Some(v) = cfg.get("learning_rate")? {
        s.learning_rate = v;
    }
    if let Some(v) = cfg.get("beta1")? {
        s.beta1 = v;
    }
    if let Some(v) = cfg.get("beta2")? {
        s.beta2 = v;
    }
    if let Some(v) = cfg.get("epsilon_adam")? {
        s.epsilon_adam = v;
    }
    if let Some(v) = cfg.get::<InitMode>("init")? {
        s.init_mode = v;
    }
    if let Some(v) = cfg.get("init_scale")? {
        s.init_scale = v;
    }
    if let Some(v) = cfg.get("log_every")? {
        s.log_every = v;
    }
    if let Some(v) = cfg.get("convex_tol")? {
        s.convex_tol = v;
    }
    Ok(())
}

fn counts(cfg: &ConfigFile, key: &str) -> osmc::Result<Option<Vec<usize>>> {
    cfg.get_list::<String>(key)?
        .map(|v| v.iter().map(|s| parse_count(s)).collect())
        .transpose()
}

fn dataset_from(cfg: &ConfigFile, name: &str, r: usize) -> osmc::Result<Dataset> {
    Ok(match name {
        "gaussian" => Dataset::Gaussian,
        "correlated" => {
            let spectrum = match cfg.get_list::<f64>("spectrum")? {
                Some(s) => s,
                None => power_law_spectrum(
                    r,
                    cfg.get("power_law_c0")?.unwrap_or(1.0),
                    cfg.get("power_law_a")?.unwrap_or(0.0),
                ),
            };
            Dataset::Correlated(spectrum)
        }
        "file" => Dataset::File(
            cfg.get::<PathBuf>("file")?
                .ok_or_else(|| osmc::Error::InvalidArgument("dataset = file needs `file = <path>`".into()))?,
        ),
        other => Dataset::Special(other.parse::<SpecialKind>()?),
    })
}

const DATASET_KEYS: [&str; 5] = ["dataset", "spectrum", "power_law_c0", "power_law_a", "file"];

fn sweep_spec(cfg: &ConfigFile, seed: Option<u64>) -> osmc::Result<SweepSpec> {
    let mut known: Vec<&str> = vec![
        "d",
        "r",
        "k",
        "m",
        "algorithms",
        "repeats",
        "seed",
        "convex_lambda",
        "full_mc_lambda",
        "timing",
        "threads",
    ];
    known.extend(SOLVER_KEYS);
    known.extend(DATASET_KEYS);
    cfg.check_keys(&known)?;
    let mut spec = SweepSpec::default();
    if let Some(v) = cfg.get("d")? {
        spec.d = v;
    }
    if let Some(v) = cfg.get("r")? {
        spec.r = v;
    }
    if let Some(v) = counts(cfg, "k")? {
        spec.ks = v;
    }
    if let Some(v) = counts(cfg, "m")? {
        spec.ms = v;
    }
    if let Some(v) = cfg.get_list::<Algorithm>("algorithms")? {
        spec.algorithms = v;
    }
    if let Some(v) = cfg.get("repeats")? {
        spec.repeats = v;
    }
    spec.base_seed = seed.or(cfg.get("seed")?).unwrap_or(0);
    spec.convex_lambda = cfg.get("convex_lambda")?;
    if let Some(v) = cfg.get("full_mc_lambda")? {
        spec.full_mc_lambda = v;
    }
    if let Some(v) = cfg.get("timing")? {
        spec.timing = v;
    }
    spec.threads = cfg.get("threads")?;
    apply_solver(cfg, &mut spec.solver)?;
    let name = cfg.get::<String>("dataset")?.unwrap_or_else(|| "gaussian".into());
    spec.dataset = dataset_from(cfg, &name, spec.r)?;
    spec.validate()?;
    Ok(spec)
}

fn rankdep_spec(cfg: &ConfigFile, seed: Option<u64>) -> osmc::Result<RankDepSpec> {
    let mut known: Vec<&str> = vec![
        "ranks",
        "d",
        "k",
        "target",
        "tolerance",
        "runs_per_probe",
        "m_max",
        "max_probes",
        "min_ratio",
        "seed",
    ];
    known.extend(SOLVER_KEYS);
    cfg.check_keys(&known)?;
    let mut spec = RankDepSpec::default();
    if let Some(v) = counts(cfg, "ranks")? {
        spec.ranks = v;
    }
    if let Some(v) = cfg.get("d")? {
        spec.d = v;
    }
    if let Some(v) = cfg.get("k")? {
        spec.k = v;
    }
    if let Some(v) = cfg.get("target")? {
        spec.target = v;
    }
    if let Some(v) = cfg.get("tolerance")? {
        spec.tolerance = v;
    }
    if let Some(v) = cfg.get("runs_per_probe")? {
        spec.runs_per_probe = v;
    }
    if let Some(v) = cfg.get::<String>("m_max")? {
        spec.m_max = parse_count(&v)?;
    }
    if let Some(v) = cfg.get("max_probes")? {
        spec.max_probes = v;
    }
    if let Some(v) = cfg.get("min_ratio")? {
        spec.min_ratio = v;
    }
    spec.base_seed = seed.or(cfg.get("seed")?).unwrap_or(0);
    apply_solver(cfg, &mut spec.solver)?;
    spec.validate()?;
    Ok(spec)
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let mut known = vec!["m", "d", "r", "k", "seed"];
    known.extend(DATASET_KEYS);
    usage(cfg.check_keys(&known))?;
    let m = match args.m.or(usage(cfg.get::<String>("m"))?) {
        Some(s) => usage(parse_count(&s))?,
        None => 1000,
    };
    let d = args.d.or(usage(cfg.get("d"))?).unwrap_or(20);
    let r = args.r.or(usage(cfg.get("r"))?).unwrap_or(2);
    let k = args.k.or(usage(cfg.get("k"))?).unwrap_or(2);
    let seed = args.seed.or(usage(cfg.get("seed"))?).unwrap_or(0);
    let name = match args.dataset {
        Some(n) => n,
        None => usage(cfg.get::<String>("dataset"))?.unwrap_or_else(|| "gaussian".into()),
    };
    let dataset = usage(dataset_from(&cfg, &name, r))?;

    let mut rng = Rng::new(seed);
    let gt = dataset.generate(m, d, r, &mut rng).context("generating ground truth")?;
    let obs = sample_mask(m, d, k, &mut rng.derive(1)).context("sampling the mask")?;
    let x = gt.observe(&obs).context("observing entries")?;
    save_observations(&x, &args.out).context("writing observations")?;
    if let Some(p) = &args.truth {
        FactorEstimate {
            q: gt.q_true.clone(),
            lambda: gt.lambda_true.clone(),
        }
        .save(p)
        .context("writing truth factors")?;
    }
    if let Some(p) = &args.theta {
        save_matrix(&gt.theta_star, p).context("writing theta")?;
    }
    if let Some(p) = &args.matrix {
        save_matrix(&gt.x(), p).context("writing matrix")?;
    }
    let mu = truth_incoherence(&gt).context("incoherence")?;
    log::info!("wrote {m}x{d} (k = {k}); mu = ({:.3}, {:.3}, {:.3})", mu.mu1, mu.mu2, mu.mu3);
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let mut known = vec!["algorithm", "rank", "seed", "lambda", "alpha_cap"];
    known.extend(SOLVER_KEYS);
    usage(cfg.check_keys(&known))?;
    let mut solver = SolverConfig::default();
    usage(apply_solver(&cfg, &mut solver))?;
    if let Some(s) = args.steps {
        solver.steps = s;
    }
    solver.rank = args.rank.or(usage(cfg.get("rank"))?).unwrap_or(1);
    solver.lambda_reg = usage(cfg.get("lambda"))?;
    solver.alpha_cap = usage(cfg.get("alpha_cap"))?;
    let algorithm: Algorithm = match args.algorithm {
        Some(a) => usage(a.parse())?,
        None => usage(cfg.get("algorithm"))?.unwrap_or(Algorithm::Ours),
    };
    usage(solver.validate())?;
    let seed = args.seed.or(usage(cfg.get("seed"))?).unwrap_or(0);

    let x = load_observations(&args.input).context("reading observations")?;
    let est = run_algorithm(algorithm, &x, &solver, &mut Rng::new(seed)).with_context(|| format!("running {algorithm}"))?;
    if est.warning {
        log::warn!("{algorithm}: loss trace did not settle");
    }
    est.factors.save(&args.out).context("writing factors")?;
    if let Some(p) = &args.theta {
        match &est.theta_hat {
            Some(t) => save_matrix(t, p).context("writing theta")?,
            None => return Err(Failure::Usage(anyhow!("{algorithm} does not produce a Gram estimate"))),
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let est = FactorEstimate::load(&args.estimate).context("reading estimate")?;
    let truth = FactorEstimate::load(&args.truth).context("reading truth")?;
    if est.rank() != truth.rank() || est.d() != truth.d() {
        return Err(Failure::Runtime(anyhow!(
            "estimate is {}x{}, truth is {}x{}",
            est.d(),
            est.rank(),
            truth.d(),
            truth.rank()
        )));
    }
    let rowspace = eval_rowspace(&est.q, &truth.q).context("rowspace error")?;
    let mut lines = vec![
        ("rowspace_err", rowspace),
        ("rowspace_err_norm", rowspace / est.rank() as f64),
        (
            "colfactor_err",
            eval_colfactors(&est.q, &est.lambda, &truth.q, &truth.lambda).context("column factor error")?,
        ),
    ];
    match (&args.theta_hat, &args.theta_star) {
        (Some(a), Some(b)) => {
            let a = load_matrix(a).context("reading theta_hat")?;
            let b = load_matrix(b).context("reading theta_star")?;
            lines.insert(0, ("theta_err", eval_theta(&a, &b).context("theta error")?));
        }
        (None, None) => {}
        _ => return Err(Failure::Usage(anyhow!("--theta-hat and --theta-star go together"))),
    }
    let mut text = String::new();
    for (k, v) in lines {
        text.push_str(&format!("{k},{v}\n"));
    }
    match &args.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(args: CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let spec = usage(sweep_spec(&cfg, args.seed))?;
    let records = run_sweep(&spec).context("sweep")?;
    append_csv(&args.out, &records).context("writing results")?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", records.len());
    }
    Ok(())
}

fn rankdep(args: CommonArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let spec = usage(rankdep_spec(&cfg, args.seed))?;
    let res = rank_dependence(&spec).context("rank-dependence search")?;
    let slope = res.slope.map_or(String::new(), |s| s.to_string());
    let mut out = String::from("r,m_star,accepted,probes,slope\n");
    for p in &res.points {
        out.push_str(&format!("{},{},{},{},{slope}\n", p.r, p.m_star, p.accepted, p.probes.len()));
    }
    File::create(&args.out)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .with_context(|| format!("writing {}", args.out.display()))?;
    match res.slope {
        Some(s) => println!("slope {s:.3}"),
        None => println!("slope undefined (fewer than two ranks)"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Rankdep(a) => rankdep(a),
        Command::Estimate(a) => estimate(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
