//! Variants, repeated trials and the resumable trial table.

use std::path::Path as FsPath;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::suite::SuiteEnv;
use super::{derive_seed, BenchError};
use crate::geom::Point2;
use crate::intervention::{InterventionRecord, InterventionType};
use crate::learn::FitResult;
use crate::nav::{ParameterSet, PlannerInput};
use crate::pipeline::{assemble, run_episode, Controller, Deployer, EpisodeConfig, Outcome, TrainSettings, TrainedPolicy};
use crate::registry::{ContextSelector, SelectorRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    /// Intervention types trained on; empty means the default planner.
    pub subset: Vec<InterventionType>,
    pub use_confidence: bool,
}

impl VariantSpec {
    pub fn is_default(&self) -> bool {
        self.subset.is_empty()
    }

    pub fn selector_name(&self) -> &'static str {
        if self.is_default() {
            "default"
        } else if self.use_confidence {
            "gated"
        } else {
            "argmax"
        }
    }
}

/// Default plus A, A+B and A+B+D, each with and without the confidence gate.
pub fn standard_variants() -> Vec<VariantSpec> {
    use InterventionType::*;
    let mut v = vec![VariantSpec {
        name: "default".into(),
        subset: vec![],
        use_confidence: false,
    }];
    for (label, subset) in [("A", vec![TypeA]), ("A+B", vec![TypeA, TypeB]), ("A+B+D", vec![TypeA, TypeB, Demo])] {
        for conf in [false, true] {
            v.push(VariantSpec {
                name: format!("APPLI({label}{})", if conf { "+c" } else { "" }),
                subset: subset.clone(),
                use_confidence: conf,
            });
        }
    }
    v
}

#[derive(Debug, Clone)]
pub enum VariantPolicy {
    Default(ParameterSet),
    Policy {
        policy: Arc<TrainedPolicy>,
        selector: Arc<dyn ContextSelector>,
    },
}

#[derive(Debug, Clone)]
pub struct PreparedVariant {
    pub spec: VariantSpec,
    pub policy: VariantPolicy,
    /// Content hash of everything that determines the variant's behavior.
    pub key: String,
}

impl PreparedVariant {
    fn controller(&self) -> Controller {
        match &self.policy {
            VariantPolicy::Default(theta) => Controller::Fixed(*theta),
            VariantPolicy::Policy { policy, selector } => {
                Controller::Policy(Deployer::new(policy.clone(), selector.clone()))
            }
        }
    }
}

/// Trains one policy per distinct subset from shared per-record fits.
/// `records` carry ids 1..n and `fits` are in that order.
pub fn prepare_variants(
    specs: &[VariantSpec],
    records: &[InterventionRecord],
    fits: &[FitResult],
    nominal: &[PlannerInput],
    settings: &TrainSettings,
    selectors: &SelectorRegistry,
) -> Result<Vec<PreparedVariant>, BenchError> {
    let mut by_id: Vec<(&InterventionRecord, &FitResult)> = records.iter().zip(fits).collect();
    by_id.sort_by_key(|(r, _)| r.context_id);
    let mut trained: Vec<(Vec<InterventionType>, Arc<TrainedPolicy>)> = Vec::new();
    let mut out = Vec::new();
    for spec in specs {
        let selector = selectors.get(spec.selector_name())?;
        if spec.is_default() {
            let theta = settings.space.default;
            let key = hash_parts(&["default", &serde_json::to_string(&theta)?]);
            out.push(PreparedVariant {
                spec: spec.clone(),
                policy: VariantPolicy::Default(theta),
                key,
            });
            continue;
        }
        let policy = match trained.iter().find(|(s, _)| s == &spec.subset) {
            Some((_, p)) => p.clone(),
            None => {
                let chosen: Vec<(InterventionRecord, FitResult)> = by_id
                    .iter()
                    .filter(|(r, _)| spec.subset.contains(&r.itype))
                    .enumerate()
                    .map(|(i, (r, f))| {
                        let mut r = (*r).clone();
                        r.context_id = i as u32 + 1;
                        (r, **f)
                    })
                    .collect();
                if chosen.is_empty() {
                    return Err(BenchError::Config(format!("no records for variant {}", spec.name)));
                }
                let (recs, fs): (Vec<_>, Vec<_>) = chosen.into_iter().unzip();
                let p = Arc::new(assemble(&recs, &fs, nominal, settings)?);
                trained.push((spec.subset.clone(), p.clone()));
                p
            }
        };
        let key = hash_parts(&[selector.name(), &policy.to_json()]);
        out.push(PreparedVariant {
            spec: spec.clone(),
            policy: VariantPolicy::Policy { policy, selector },
            key,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub run: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub time: f64,
    /// Traversal time with failures scored at the penalty.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub episode: EpisodeConfig,
    /// Score given to stuck, collided and timed-out runs (s).
    pub penalty: f64,
    /// Start positions are shifted uniformly within this box (m).
    pub start_jitter: f64,
    pub workers: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            runs: 4,
            base_seed: 0,
            episode: EpisodeConfig::default(),
            penalty: 50.0,
            start_jitter: 0.05,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Traversal scores per environment, variant and run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTable {
    pub envs: Vec<String>,
    pub variants: Vec<String>,
    pub penalty: f64,
    /// `cells[env][variant]` holds the runs.
    pub cells: Vec<Vec<Vec<Trial>>>,
}

impl TrialTable {
    pub fn scores(&self, env: usize, variant: usize) -> Vec<f64> {
        self.cells[env][variant].iter().map(|t| t.score).collect()
    }

    pub fn variant_index(&self, name: &str) -> Option<usize> {
        self.variants.iter().position(|v| v == name)
    }
}

pub fn hash_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn cell_key(env: &SuiteEnv, variant: &PreparedVariant, cfg: &MatrixConfig) -> String {
    let cfg_json = serde_json::to_string(&(
        cfg.runs,
        cfg.base_seed,
        &cfg.episode,
        cfg.penalty,
        cfg.start_jitter,
    ))
    .expect("config serializes");
    hash_parts(&[&env.world.grid.to_text(), &variant.key, &variant.spec.name, &env.meta.name, &cfg_json])
}

fn run_cell(env: &SuiteEnv, variant: &PreparedVariant, cfg: &MatrixConfig) -> Vec<Trial> {
    (0..cfg.runs)
        .map(|run| {
            let seed = derive_seed(&[
                &cfg.base_seed.to_string(),
                &env.meta.name,
                &variant.spec.name,
                &run.to_string(),
            ]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut world = env.world.clone();
            if cfg.start_jitter > 0.0 {
                let j = cfg.start_jitter;
                world.start = Point2::new(
                    world.start.x + rng.random_range(-j..=j),
                    world.start.y + rng.random_range(-j..=j),
                );
            }
            match run_episode(&world, &mut variant.controller(), &cfg.episode, seed) {
                Ok(r) => Trial {
                    run,
                    seed,
                    outcome: r.outcome,
                    time: r.time,
                    score: r.score(cfg.penalty),
                },
                Err(e) => {
                    log::warn!("{} / {} run {run}: {e}", env.meta.name, variant.spec.name);
                    Trial {
                        run,
                        seed,
                        outcome: Outcome::Collision,
                        time: 0.0,
                        score: cfg.penalty,
                    }
                }
            }
        })
        .collect()
}

/// Runs every (environment, variant) cell. With a cache directory,
/// finished cells are stored by content hash and skipped on re-runs.
pub fn run_matrix(
    envs: &[SuiteEnv],
    variants: &[PreparedVariant],
    cfg: &MatrixConfig,
    cache: Option<&FsPath>,
) -> Result<TrialTable, BenchError> {
    if cfg.runs == 0 {
        return Err(BenchError::Config("runs must be at least 1".into()));
    }
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(usize, usize)> = (0..envs.len())
        .flat_map(|e| (0..variants.len()).map(move |v| (e, v)))
        .collect();
    let results: Mutex<Vec<Option<Vec<Trial>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let work = || -> Result<(), BenchError> {
        loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            let Some(&(e, v)) = jobs.get(i) else {
                return Ok(());
            };
            let path = cache.map(|d| d.join(format!("{}.json", cell_key(&envs[e], &variants[v], cfg))));
            let cached = path
                .as_ref()
                .and_then(|p| std::fs::read_to_string(p).ok())
                .and_then(|s| serde_json::from_str::<Vec<Trial>>(&s).ok())
                .filter(|t| t.len() == cfg.runs);
            let trials = match cached {
                Some(t) => t,
                None => {
                    let t = run_cell(&envs[e], &variants[v], cfg);
                    if let Some(p) = &path {
                        std::fs::write(p, serde_json::to_string(&t)?)?;
                    }
                    t
                }
            };
            results.lock().expect("results lock")[i] = Some(trials);
        }
    };
    let workers = cfg.workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers).map(|_| s.spawn(work)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<()>, BenchError>>()
    })?;
    let mut flat = results.into_inner().expect("results lock").into_iter();
    let cells = (0..envs.len())
        .map(|_| (0..variants.len()).map(|_| flat.next().flatten().expect("every cell ran")).collect())
        .collect();
    Ok(TrialTable {
        envs: envs.iter().map(|e| e.meta.name.clone()).collect(),
        variants: variants.iter().map(|v| v.spec.name.clone()).collect(),
        penalty: cfg.penalty,
        cells,
    })
}
