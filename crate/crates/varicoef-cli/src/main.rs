//! `varicoef` — varying-coefficient PDE inverse problems from the
//! command line: data generation, constrained self-adaptive training,
//! change-point detection, verification, and plots.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use varicoef::harness::{
    detect_existing, make_plots, run_case_upto, CaseId, ExperimentConfig, Expectations, Preset,
    RunArtifacts, RunPhase,
};

#[derive(Parser)]
#[command(
    name = "varicoef",
    about = "Inverse problems for PDEs with time- and space-varying coefficients",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Case id: c1_1, c1_2, c1_3, c2_1, c2_2, c3, comparison, wave_ellipse
    /// (comma-separate to run several).
    #[arg(long)]
    case: String,
    /// Scale preset.
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (per-case subdirectories are created when
    /// several cases are given).
    #[arg(long)]
    out: PathBuf,
    /// Config overrides, e.g. --set train.epochs=4000.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run up to this many cases concurrently (capped by VARICOEF_THREADS).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and store the reference data.
    Generate(CommonArgs),
    /// Generate, sample observations, and train (no detection).
    Train(CommonArgs),
    /// Run change-point detection on an existing run directory.
    Detect(CommonArgs),
    /// Full pipeline: generate, sample, train, detect, report, plot.
    Run(CommonArgs),
    /// Check a finished run against expectations.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Expectations file (TOML); built-in defaults when omitted.
        #[arg(long)]
        expectations: Option<PathBuf>,
    },
    /// Re-emit plots from a run directory.
    Plot(CommonArgs),
}

fn parse_overrides(set: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .with_context(|| format!("override '{kv}' is not KEY=VALUE"))
        })
        .collect()
}

fn experiment_configs(common: &CommonArgs) -> anyhow::Result<Vec<ExperimentConfig>> {
    let cases: Vec<&str> = common.case.split(',').map(|c| c.trim()).collect();
    let preset = Preset::parse(&common.preset)?;
    let overrides = parse_overrides(&common.set)?;
    let multi = cases.len() > 1;
    cases
        .into_iter()
        .map(|name| {
            let case = CaseId::parse(name)?;
            let out_dir = if multi {
                common.out.join(name)
            } else {
                common.out.clone()
            };
            Ok(ExperimentConfig {
                case,
                preset,
                seed: common.seed,
                out_dir,
                overrides: overrides.clone(),
            })
        })
        .collect()
}

fn thread_cap() -> usize {
    std::env::var("VARICOEF_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(usize::MAX)
}

/// Runs one job per case; `jobs > 1` executes distinct cases on worker
/// threads (there is no shared mutable state between cases).
fn for_each_case<F>(
    configs: Vec<ExperimentConfig>,
    jobs: usize,
    f: F,
) -> anyhow::Result<Vec<RunArtifacts>>
where
    F: Fn(&ExperimentConfig) -> varicoef::Result<RunArtifacts> + Sync,
{
    let jobs = jobs.clamp(1, thread_cap()).min(configs.len().max(1));
    if jobs <= 1 {
        return configs
            .iter()
            .map(|cfg| f(cfg).map_err(Into::into))
            .collect();
    }
    let mut results: Vec<Option<anyhow::Result<RunArtifacts>>> =
        (0..configs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..jobs {
            let f = &f;
            let configs = &configs;
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                let mut i = worker;
                while i < configs.len() {
                    local.push((i, f(&configs[i]).map_err(anyhow::Error::from)));
                    i += jobs;
                }
                local
            }));
        }
        for handle in handles {
            for (i, res) in handle.join().expect("case worker panicked") {
                results[i] = Some(res);
            }
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            3
        }
    });
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Generate(common) => {
            let artifacts = for_each_case(experiment_configs(&common)?, common.jobs, |cfg| {
                run_case_upto(cfg, RunPhase::Generate)
            })?;
            report_failures(&artifacts)
        }
        Command::Train(common) => {
            let artifacts = for_each_case(experiment_configs(&common)?, common.jobs, |cfg| {
                run_case_upto(cfg, RunPhase::Train)
            })?;
            report_failures(&artifacts)
        }
        Command::Run(common) => {
            let artifacts = for_each_case(experiment_configs(&common)?, common.jobs, |cfg| {
                run_case_upto(cfg, RunPhase::Full)
            })?;
            report_failures(&artifacts)
        }
        Command::Detect(common) => {
            let artifacts =
                for_each_case(experiment_configs(&common)?, common.jobs, detect_existing)?;
            report_failures(&artifacts)
        }
        Command::Plot(common) => {
            for cfg in experiment_configs(&common)? {
                let artifacts = RunArtifacts::load(&cfg.out_dir)
                    .with_context(|| format!("no artifacts in {}", cfg.out_dir.display()))?;
                let paths = make_plots(&artifacts)?;
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }
            Ok(0)
        }
        Command::Verify {
            common,
            expectations,
        } => {
            let expectations = match expectations {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    Some(Expectations::from_toml(&text)?)
                }
                None => None,
            };
            let mut all_pass = true;
            for cfg in experiment_configs(&common)? {
                let outcome = varicoef::harness::verify(&cfg.out_dir, expectations.as_ref())?;
                print!("{}", outcome.table());
                if outcome.vacuous {
                    eprintln!("warning: no expectations listed for case {}", outcome.case);
                }
                all_pass &= outcome.passed;
            }
            Ok(if all_pass { 0 } else { 2 })
        }
    }
}

fn report_failures(artifacts: &[RunArtifacts]) -> anyhow::Result<i32> {
    let mut code = 0;
    for a in artifacts {
        match &a.failure {
            Some(failure) => {
                eprintln!("case {} FAILED: {failure}", a.case);
                code = 3;
            }
            None => {
                let secs: f64 = a.phase_seconds.values().sum();
                println!(
                    "case {} done in {:.1}s -> {}",
                    a.case,
                    secs,
                    a.out_dir.display()
                );
            }
        }
    }
    Ok(code)
}
