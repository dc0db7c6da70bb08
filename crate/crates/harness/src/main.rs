use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hoif::checks::{self, Mutation};
use hoif::estimators::Estimator;
use hoif::mar::PreliminaryFit;
use hoif::rng;
use hoif_harness::error::{HarnessError, Result};
use hoif_harness::experiment::{self, summarize_rows};
use hoif_harness::io::{self, FitFile, ModelFile};
use hoif_harness::{provenance, rates, ExperimentConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_CHECK: u8 = 2;

#[derive(Parser)]
#[command(name = "hoif", version, about = "Higher-order influence function estimators of a missing-data mean")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the configured model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Sample size; the first entry of n_grid by default.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the synthetic preliminary fit for this sample size.
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Also write the model's cell values.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Apply the configured estimators to a dataset and a preliminary fit.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo replications over the configured grid of sample sizes.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Result CSV; the summary goes next to it with a `.summary.csv` suffix.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        json: bool,
    },
    /// Fit log-RMSE against log-n for each estimator in a result CSV.
    Rates {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the exact identities; exits with 2 if any fails.
    Check {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MutationArg::None, hide = true)]
        mutation: MutationArg,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    FlipDegenerateSign,
    WrongGramWeight,
}

impl From<MutationArg> for Mutation {
    fn from(m: MutationArg) -> Self {
        match m {
            MutationArg::None => Mutation::None,
            MutationArg::FlipDegenerateSign => Mutation::FlipDegenerateSign,
            MutationArg::WrongGramWeight => Mutation::WrongGramWeight,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { config, n, seed, out, fit, model } => simulate(&config, n, seed, &out, fit, model),
        Command::Estimate { config, data, fit, json } => estimate(&config, &data, &fit, json),
        Command::Experiment { config, seed, out, workers, json } => run_experiment(&config, seed, out, workers, json),
        Command::Rates { data, json } => fit_rates(&data, json),
        Command::Check { seed, mutation, json } => check(seed, mutation.into(), json),
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn simulate(
    config: &Path,
    n: Option<usize>,
    seed: u64,
    out: &Path,
    fit_out: Option<PathBuf>,
    model_out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(config)?;
    let n = n.unwrap_or(cfg.n_grid[0]);
    if n == 0 {
        return Err(HarnessError::Config("n must be positive".into()));
    }
    let model = cfg.build_model()?;
    let obs = model.sampler()?.sample(n, &mut rng::stream(seed, 0));
    let mut header = provenance(&cfg);
    header.push(format!("simulate n={n} seed={seed} truth={}", io::fmt_f64(model.truth())));
    io::write_dataset(out, model.dim(), &obs, &header)?;
    if let Some(path) = fit_out {
        let mut fit = PreliminaryFit::synthetic(&model, n, &cfg.synthetic_spec())?;
        if cfg.preliminary.known_density {
            fit = fit.with_known_g(&model);
        }
        io::write_json(&path, &FitFile::from_fit(&fit))?;
    }
    if let Some(path) = model_out {
        io::write_json(&path, &ModelFile::from_model(&model))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct EstimateLine {
    estimator: String,
    k: usize,
    cutoff: Option<usize>,
    estimate: f64,
    linear: f64,
    terms: Vec<f64>,
}

fn estimate(config: &Path, data: &Path, fit: &Path, json: bool) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(config)?;
    let model = cfg.build_model()?;
    let (dim, obs) = io::read_dataset(data)?;
    if dim != model.dim() {
        return Err(HarnessError::Data(format!("dataset has dimension {dim}, model has {}", model.dim())));
    }
    let fit = io::read_json::<FitFile>(fit)?.to_fit(&model)?;
    let n = obs.len();
    let mut lines = Vec::new();
    for spec in &cfg.estimators {
        let res = spec.resolve(n, &cfg, &model)?;
        let report = Estimator::new(&fit, &res.config)?.estimate(&obs)?;
        lines.push(EstimateLine {
            estimator: spec.name.clone(),
            k: res.k,
            cutoff: res.cutoff,
            estimate: report.value,
            linear: report.linear,
            terms: report.terms,
        });
    }
    if json {
        print_json(&serde_json::json!({ "n": n, "truth": model.truth(), "estimates": lines }));
    } else {
        println!("n = {n}, truth = {:.6}", model.truth());
        for l in &lines {
            println!("{:<16} k={:<7} estimate={:.6} linear={:.6} terms={:?}", l.estimator, l.k, l.estimate, l.linear, l.terms);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn run_experiment(config: &Path, seed: Option<u64>, out: Option<PathBuf>, workers: usize, json: bool) -> Result<ExitCode> {
    if workers == 0 {
        return Err(HarnessError::Config("--workers must be positive".into()));
    }
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| HarnessError::Config("no output path (--out or \"output\")".into()))?;
    let result = experiment::run(&cfg, workers)?;
    let header = provenance(&cfg);
    io::write_results(&out, &header, &result.rows)?;
    io::write_summary(&summary_path(&out), &header, &result.summaries)?;
    if json {
        print_json(&result.summaries);
    } else {
        println!("truth = {:.6}", result.truth);
        println!("{:>6} {:<16} {:>11} {:>10} {:>10} {:>10} {:>11}", "n", "estimator", "bias", "bias_se", "sd", "rmse", "oracle");
        for s in &result.summaries {
            let oracle = s.oracle_bias.map(|b| format!("{b:.3e}")).unwrap_or_default();
            println!(
                "{:>6} {:<16} {:>11.3e} {:>10.2e} {:>10.3e} {:>10.3e} {:>11}",
                s.n, s.estimator, s.bias, s.bias_se, s.sd, s.rmse, oracle
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn fit_rates(data: &Path, json: bool) -> Result<ExitCode> {
    let rows = io::read_results(data)?;
    let fits = rates::fit_rates(&summarize_rows(&rows))?;
    if json {
        print_json(&fits);
    } else {
        for f in &fits {
            println!("{:<16} slope={:.4} (se {:.4}) over {} sizes", f.estimator, f.slope, f.slope_se, f.points);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn check(seed: u64, mutation: Mutation, json: bool) -> Result<ExitCode> {
    let results = checks::suite(seed, mutation)?;
    let ok = results.iter().all(|r| r.passed());
    if json {
        let v: Vec<_> = results
            .iter()
            .map(|r| serde_json::json!({"name": r.name, "residual": r.residual, "tolerance": r.tolerance, "passed": r.passed()}))
            .collect();
        print_json(&v);
    } else {
        for r in &results {
            let tag = if r.passed() { "ok  " } else { "FAIL" };
            println!("{tag} {:<44} residual {:.3e} (tolerance {:.0e})", r.name, r.residual, r.tolerance);
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK) })
}
