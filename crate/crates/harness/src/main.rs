use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pinnuq::bounds::{estimate_envelope, pseudo_profile, ResidualEnvelope};
use pinnuq::problems::{problem_ids, PinnProblem, Problem};
use pinnuq::scalar::linspace;
use pinnuq::train::TrainedPINN;
use pinnuq_harness::config::{read_key_values, ExperimentConfig, Method, Preset, Scale};
use pinnuq_harness::{emit_outputs, run_experiment, HarnessError, Result};

#[derive(Parser)]
#[command(name = "pinnuq", version, about = "PINN solvers with error-aware uncertainty bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, bound and run inference for one cell or a whole preset.
    Solve(SolveArgs),
    /// Print the registered problem ids.
    ListProblems,
    /// Error bound of saved weights, without any inference.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// fig1, fig2, fig4, fig5 or burgers.
    #[arg(long)]
    preset: Option<String>,
    /// full (published budgets, the default) or desk (reduced).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    det_epochs: Option<usize>,
    #[arg(long)]
    vi_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation points along x.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// A `.weights` file written by `solve`.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = pinnuq::bounds::DEFAULT_KNOTS)]
    knots: usize,
    #[arg(long, default_value_t = pinnuq::bounds::DEFAULT_OVERSAMPLE)]
    oversample: usize,
    #[arg(long, default_value_t = pinnuq::bounds::DEFAULT_SAFETY)]
    safety: f64,
    #[arg(long, default_value_t = 401)]
    grid: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const SOLVE_KEYS: [&str; 9] = ["problem", "method", "preset", "profile", "det_epochs", "vi_epochs", "seed", "grid", "out"];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| HarnessError::Config(format!("{key}: cannot parse '{v}'")))
}

fn merged(args: SolveArgs) -> Result<BTreeMap<String, String>> {
    let mut kv = match &args.config {
        Some(path) => read_key_values(path)?,
        None => BTreeMap::new(),
    };
    if let Some(k) = kv.keys().find(|k| !SOLVE_KEYS.contains(&k.as_str())) {
        return Err(HarnessError::Config(format!("unknown key '{k}' in config file")));
    }
    let flags = [
        ("problem", args.problem),
        ("method", args.method),
        ("preset", args.preset),
        ("profile", args.profile),
        ("det_epochs", args.det_epochs.map(|v| v.to_string())),
        ("vi_epochs", args.vi_epochs.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("grid", args.grid.map(|v| v.to_string())),
        ("out", args.out.map(|p| p.display().to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    }
    Ok(kv)
}

fn solve(args: SolveArgs) -> Result<()> {
    let kv = merged(args)?;
    let out = PathBuf::from(kv.get("out").ok_or_else(|| HarnessError::Config("--out is required".into()))?);
    let scale: Scale = kv.get("profile").map_or(Ok(Scale::Full), |s| s.parse())?;
    let preset: Option<Preset> = kv.get("preset").map(|s| s.parse()).transpose()?;
    let method: Option<Method> = kv.get("method").map(|s| s.parse()).transpose()?;
    let problem = kv.get("problem").cloned();

    let cells: Vec<(String, Method)> = match preset {
        Some(p) => p
            .cells()
            .into_iter()
            .filter(|(id, m)| problem.as_deref().is_none_or(|want| want == *id) && method.is_none_or(|want| want == *m))
            .map(|(id, m)| (id.to_string(), m))
            .collect(),
        None => match (problem, method) {
            (Some(id), Some(m)) => vec![(id, m)],
            _ => return Err(HarnessError::Config("give --problem and --method, or a --preset".into())),
        },
    };
    if cells.is_empty() {
        return Err(HarnessError::Config("the filters select no cell of the preset".into()));
    }

    for (id, m) in cells {
        let mut cfg = match preset {
            Some(p) => p.config(&id, m, scale)?,
            None => ExperimentConfig::new(&id, m, scale)?,
        };
        if let Some(v) = kv.get("det_epochs") {
            cfg.det_epochs = parse_num("det_epochs", v)?;
        }
        if let Some(v) = kv.get("vi_epochs") {
            cfg.vi_epochs = parse_num("vi_epochs", v)?;
        }
        if let Some(v) = kv.get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = kv.get("grid") {
            cfg.grid_points = parse_num("grid", v)?;
        }
        cfg.out_dir = Some(out.clone());
        cfg.validate()?;
        eprintln!("running {} / {} ({} det epochs)", cfg.problem_id, cfg.method, cfg.det_epochs);
        let report = run_experiment(&cfg)?;
        let m = report.metrics();
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{}\tcoverage_train={}\tcoverage_extrap={}\tmax_err_det={}\twidth={}",
            cfg.stem(),
            show(m.coverage_train),
            show(m.coverage_extrapolation),
            m.max_abs_error_det.map_or("-".into(), |v| format!("{v:.3e}")),
            show(m.mean_band_width),
        );
        emit_outputs(&report, &out)?;
    }
    Ok(())
}

fn certify(args: CertifyArgs) -> Result<()> {
    let problem = Problem::<f64>::by_id(&args.problem).map_err(|e| HarnessError::Config(e.to_string()))?;
    let ode = problem
        .as_ode()
        .ok_or_else(|| HarnessError::Config("certify supports the ODE problems only".into()))?
        .clone();
    let params = pinnuq::nn::io::read_weights::<f64>(&args.weights).map_err(HarnessError::stage("reading weights"))?;
    let trained = TrainedPINN {
        params,
        problem_id: args.problem.clone(),
        loss_history: Vec::new(),
        config: pinnuq::train::TrainConfig::ode(ode.train_domain, 0, 0),
    };
    let knots = ResidualEnvelope::uniform_knots(ode.x0, ode.test_domain.1, args.knots);
    let env = estimate_envelope(&problem, &trained, knots, args.oversample, args.safety)
        .map_err(HarnessError::stage("residual envelope"))?;
    let grid: Vec<Vec<f64>> = linspace(ode.test_domain.0, ode.test_domain.1, args.grid).into_iter().map(|x| vec![x]).collect();
    let profile = pseudo_profile(&problem, &trained.params, Some(&env), &grid)
        .map_err(HarnessError::stage("error bound"))?;
    let mut csv = String::from("x,u_det,bound\n");
    for (p, b) in grid.iter().zip(&profile.sigma_p) {
        let u = problem.surrogate(&trained.params, p).map_err(HarnessError::stage("evaluation"))?;
        csv.push_str(&format!("{:e},{u:e},{b:e}\n", p[0]));
    }
    match args.out {
        Some(path) => std::fs::write(&path, csv).map_err(|source| HarnessError::Io { path, source })?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::ListProblems => {
            for id in problem_ids() {
                let p = Problem::<f64>::by_id(id).expect("registered id");
                println!("{id}\t{}", p.describe());
            }
            Ok(())
        }
        Command::Certify(args) => certify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_args(args: &[&str]) -> SolveArgs {
        let mut argv = vec!["pinnuq", "solve"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "problem = ode1.cos\ndet-epochs = 50\nseed = 7\n").unwrap();
        let kv = merged(solve_args(&["--config", file.to_str().unwrap(), "--seed", "9", "--method", "deterministic"])).unwrap();
        assert_eq!(kv["problem"], "ode1.cos");
        assert_eq!(kv["det_epochs"], "50");
        assert_eq!(kv["seed"], "9");
        std::fs::write(&file, "colour = red\n").unwrap();
        assert!(merged(solve_args(&["--config", file.to_str().unwrap()])).is_err());
    }

    #[test]
    fn configuration_errors_exit_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        for args in [
            vec!["--problem", "ode9", "--method", "deterministic", "--out", out],
            vec!["--problem", "ode1.exp", "--method", "mcmc", "--out", out],
            vec!["--problem", "ode1.exp", "--method", "deterministic"],
            vec!["--preset", "fig3", "--out", out],
            vec!["--preset", "fig2", "--problem", "burgers", "--out", out],
            vec!["--problem", "ode1.exp", "--method", "deterministic", "--det-epochs", "x", "--out", out],
        ] {
            let err = match Cli::try_parse_from(["pinnuq", "solve"].into_iter().chain(args.iter().copied())) {
                Ok(Cli { command: Command::Solve(a) }) => solve(a).unwrap_err(),
                Ok(_) => unreachable!(),
                // clap reports malformed numbers itself, with the same code
                Err(e) => {
                    assert_eq!(e.exit_code(), 2);
                    continue;
                }
            };
            assert_eq!(err.exit_code(), 2, "{args:?}: {err}");
        }
    }

    #[test]
    fn fig2_preset_writes_eight_bands() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        solve(solve_args(&["--preset", "fig2", "--profile", "desk", "--det-epochs", "10", "--vi-epochs", "20", "--grid", "41", "--out", out]))
            .unwrap();
        let names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        let bands = names.iter().filter(|n| n.ends_with(".band.dat")).count();
        assert_eq!(bands, 8);
        let table = std::fs::read_to_string(dir.path().join("ode1.exp_error_aware_nlm_e10.csv")).unwrap();
        assert_eq!(table.lines().next(), Some(pinnuq_harness::report::TABLE_HEADER));
        assert_eq!(table.lines().count(), 42);
    }

    #[test]
    fn certify_reads_saved_weights() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        solve(solve_args(&["--problem", "ode2.damped.exp", "--method", "deterministic", "--det-epochs", "30", "--profile", "desk", "--out", out]))
            .unwrap();
        let weights = dir.path().join("ode2.damped.exp_deterministic_e30.model.weights");
        let csv = dir.path().join("bound.csv");
        let cli = Cli::try_parse_from([
            "pinnuq",
            "certify",
            "--weights",
            weights.to_str().unwrap(),
            "--problem",
            "ode2.damped.exp",
            "--grid",
            "11",
            "--out",
            csv.to_str().unwrap(),
        ])
        .unwrap();
        let Command::Certify(args) = cli.command else { unreachable!() };
        certify(args).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with("x,u_det,bound\n0e0,3e0,0e0\n"));

        let cli = Cli::try_parse_from(["pinnuq", "certify", "--weights", "/nonexistent.weights", "--problem", "ode1.exp"]).unwrap();
        let Command::Certify(args) = cli.command else { unreachable!() };
        assert_eq!(certify(args).unwrap_err().exit_code(), 1);
    }
}
