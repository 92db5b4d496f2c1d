use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use navtune::bench::{
    collect, course, generate_suite, load_suite, nominal_lap, prepare_variants, record_worlds, run_matrix,
    save_suite, significance_matrix, standard_variants, to_csv, to_markdown, MatrixConfig, NominalConfig,
    SuiteConfig, TrialTable,
};
use navtune::intervention::{load_log, save_log, InterventionRecord};
use navtune::nav::PlannerInput;
use navtune::pipeline::{assemble_map, fit_all, train, EpisodeConfig, ParameterMap, TrainSettings, TrainedPolicy};
use navtune::registry::SelectorRegistry;
use navtune::world::{OccupancyGrid, World};

#[derive(Parser)]
#[command(name = "navtune", version, about = "Learn planner parameters from interventions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record the scripted training course as an intervention log.
    Course {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit one parameter set per intervention.
    Fit {
        #[arg(long)]
        records: PathBuf,
        /// Parameter map output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the context classifier around a fitted parameter map.
    TrainClf {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// Policy output.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Fit and train in one go.
    Train {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the parameter map here.
        #[arg(long)]
        map: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Run one episode with a trained policy and write its tick log.
    Deploy {
        /// Grid file of the environment.
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Line-JSON episode log; stdout when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "gated")]
        selector: String,
        #[arg(long)]
        epsilon_u: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 50.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    epsilon_u: f64,
    #[arg(long, default_value_t = 21)]
    window: usize,
    /// Generated worlds driven unattended for nominal inputs.
    #[arg(long, default_value_t = NominalConfig::default().practice_envs)]
    practice_envs: usize,
    /// Train without nominal inputs.
    #[arg(long)]
    no_nominal: bool,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Generate an environment suite.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        envs: usize,
    },
    /// Train every variant and run the trial matrix.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Trial table output (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        runs: usize,
        #[arg(long, default_value_t = 50.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cell cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Only these variants (comma separated names).
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Mean-time ordering and significance matrix of a trial table.
    Report {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

fn records(path: &Path) -> Result<Vec<InterventionRecord>> {
    let r = load_log(path).with_context(|| format!("reading {}", path.display()))?;
    if r.is_empty() {
        bail!("{} holds no records", path.display());
    }
    Ok(r)
}

fn settings(flags: &TrainFlags) -> TrainSettings {
    let mut s = TrainSettings {
        seed: flags.seed,
        ..TrainSettings::default()
    };
    s.predictor.epsilon_u = flags.epsilon_u;
    s.predictor.window = flags.window;
    s
}

fn nominal(records: &[InterventionRecord], flags: &TrainFlags, settings: &TrainSettings) -> Result<Vec<PlannerInput>> {
    if flags.no_nominal {
        return Ok(Vec::new());
    }
    let cfg = NominalConfig {
        practice_envs: flags.practice_envs,
        ..NominalConfig::default()
    };
    let x = nominal_lap(&record_worlds(records), &settings.sim, settings.seed, &cfg)?;
    log::info!("{} nominal inputs", x.len());
    Ok(x)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Course { out, seed } => {
            let recs = collect(&course(), &TrainSettings::default().sim, seed)?;
            save_log(&out, &recs)?;
            for r in &recs {
                println!("context {} {}: {} steps", r.context_id, r.meta, r.steps.len());
            }
        }
        Cmd::Fit { records: path, out, seed } => {
            let recs = records(&path)?;
            let s = TrainSettings {
                seed,
                ..TrainSettings::default()
            };
            let fits = fit_all(&recs, &s)?;
            for (i, f) in fits.iter().enumerate() {
                println!(
                    "context {}: per-step loss {:.3e} (default {:.3e}), {} evals",
                    i + 1,
                    f.per_step_loss(),
                    f.default_loss / f.steps.max(1) as f64,
                    f.evals
                );
            }
            let map = ParameterMap::new(s.space.default, fits.iter().map(|f| f.theta).collect());
            write(&out, &map.to_text())?;
        }
        Cmd::TrainClf {
            records: path,
            map,
            out,
            train,
        } => {
            let recs = records(&path)?;
            let s = settings(&train);
            let text = std::fs::read_to_string(&map).with_context(|| format!("reading {}", map.display()))?;
            let map = ParameterMap::from_text(&text)?;
            let x = nominal(&recs, &train, &s)?;
            let policy = assemble_map(&recs, map, &x, &s)?;
            policy.save(&out)?;
        }
        Cmd::Train {
            records: path,
            out,
            map,
            train: flags,
        } => {
            let recs = records(&path)?;
            let s = settings(&flags);
            let x = nominal(&recs, &flags, &s)?;
            let (policy, fits) = train(&recs, &x, &s)?;
            for (i, f) in fits.iter().enumerate() {
                println!("context {}: per-step loss {:.3e}", i + 1, f.per_step_loss());
            }
            policy.save(&out)?;
            if let Some(m) = map {
                write(&m, &policy.map.to_text())?;
            }
        }
        Cmd::Deploy {
            env,
            policy,
            log,
            selector,
            epsilon_u,
            window,
            timeout,
            seed,
        } => {
            let text = std::fs::read_to_string(&env).with_context(|| format!("reading {}", env.display()))?;
            let world = World::with_default_endpoints(OccupancyGrid::from_text(&text)?);
            let mut p = TrainedPolicy::load(&policy)?;
            if let Some(e) = epsilon_u {
                p.predictor.epsilon_u = e;
            }
            if let Some(w) = window {
                p.predictor.window = w;
            }
            p.validate()?;
            let selector = SelectorRegistry::default().get(&selector)?;
            let cfg = EpisodeConfig {
                timeout,
                ..EpisodeConfig::default()
            };
            let r = navtune::pipeline::run_policy(&world, Arc::new(p), selector, &cfg, seed)?;
            match log {
                Some(path) => write(&path, &r.log())?,
                None => print!("{}", r.log()),
            }
            eprintln!("{:?} after {:.1} s", r.outcome, r.time);
        }
        Cmd::Bench(BenchCmd::Gen { out, seed, envs }) => {
            let cfg = SuiteConfig {
                n_envs: envs,
                ..SuiteConfig::desk(seed)
            };
            let suite = generate_suite(&cfg)?;
            save_suite(&out, &suite)?;
            println!("{} environments in {}", suite.len(), out.display());
        }
        Cmd::Bench(BenchCmd::Run {
            suite,
            records: path,
            out,
            runs,
            timeout,
            seed,
            cache,
            variants,
            workers,
        }) => {
            let envs = load_suite(&suite)?;
            let recs = records(&path)?;
            let s = TrainSettings {
                seed,
                ..TrainSettings::default()
            };
            let mut specs = standard_variants();
            if !variants.is_empty() {
                for v in &variants {
                    if !specs.iter().any(|s| &s.name == v) {
                        bail!("unknown variant {v:?}");
                    }
                }
                specs.retain(|s| variants.contains(&s.name));
            }
            let fits = fit_all(&recs, &s)?;
            let x = nominal_lap(&record_worlds(&recs), &s.sim, seed, &NominalConfig::default())?;
            let prepared = prepare_variants(&specs, &recs, &fits, &x, &s, &SelectorRegistry::default())?;
            let mut cfg = MatrixConfig {
                runs,
                base_seed: seed,
                ..MatrixConfig::default()
            };
            cfg.episode.timeout = timeout;
            cfg.penalty = timeout;
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            let table = run_matrix(&envs, &prepared, &cfg, cache.as_deref())?;
            write(&out, &serde_json::to_string_pretty(&table)?)?;
            println!("{} envs x {} variants x {runs} runs -> {}", envs.len(), prepared.len(), out.display());
        }
        Cmd::Bench(BenchCmd::Report { trials, format, alpha }) => {
            let text = std::fs::read_to_string(&trials).with_context(|| format!("reading {}", trials.display()))?;
            let table: TrialTable = serde_json::from_str(&text)?;
            let m = significance_matrix(&table, alpha);
            match format {
                Format::Md => print!("{}", to_markdown(&m)),
                Format::Csv => print!("{}", to_csv(&m)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
