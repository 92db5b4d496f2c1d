//! Benchmark environment suites swept over fill probability.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{derive_seed, BenchError};
use crate::world::{generate_ca_world, CaConfig, OccupancyGrid, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub n_envs: usize,
    pub seed: u64,
    /// Fill-probability ranges; environments are split evenly across them
    /// and swept linearly within each.
    pub bands: Vec<[f64; 2]>,
    pub template: CaConfig,
}

impl SuiteConfig {
    /// 30 environments in three bands of 10.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_envs: 30,
            seed,
            bands: vec![[0.38, 0.42], [0.42, 0.46], [0.46, 0.50]],
            template: CaConfig::default(),
        }
    }

    /// 300 environments over the same range.
    pub fn full(seed: u64) -> Self {
        Self {
            n_envs: 300,
            ..Self::desk(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvMeta {
    pub id: usize,
    pub name: String,
    pub band: usize,
    pub fill_prob: f64,
    pub seed: u64,
    pub seed_used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEnv {
    pub meta: EnvMeta,
    pub world: World,
}

/// Band index and fill probability of environment `i`.
fn placement(cfg: &SuiteConfig, i: usize) -> (usize, f64) {
    let nb = cfg.bands.len();
    let base = cfg.n_envs / nb;
    let extra = cfg.n_envs % nb;
    let mut first = 0;
    for (b, band) in cfg.bands.iter().enumerate() {
        let count = base + usize::from(b < extra);
        if i < first + count {
            let k = i - first;
            let frac = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.5 };
            return (b, band[0] + frac * (band[1] - band[0]));
        }
        first += count;
    }
    unreachable!("index within n_envs")
}

pub fn generate_suite(cfg: &SuiteConfig) -> Result<Vec<SuiteEnv>, BenchError> {
    if cfg.n_envs == 0 {
        return Err(BenchError::Config("n_envs must be at least 1".into()));
    }
    if cfg.bands.is_empty() || cfg.bands.iter().any(|b| !(0.0..=1.0).contains(&b[0]) || !(b[0]..=1.0).contains(&b[1])) {
        return Err(BenchError::Config("bands must be ordered ranges inside [0, 1]".into()));
    }
    (0..cfg.n_envs)
        .map(|i| {
            let (band, fill_prob) = placement(cfg, i);
            let seed = derive_seed(&[cfg.seed.to_string().as_str(), "env", &i.to_string()]);
            let g = generate_ca_world(&CaConfig {
                seed,
                fill_prob,
                ..cfg.template.clone()
            })?;
            Ok(SuiteEnv {
                meta: EnvMeta {
                    id: i,
                    name: format!("env_{i:03}"),
                    band,
                    fill_prob,
                    seed,
                    seed_used: g.seed_used,
                },
                world: g.world,
            })
        })
        .collect()
}

/// Writes `<name>.grid` per environment and `suite.json` with the metadata.
pub fn save_suite(dir: &FsPath, envs: &[SuiteEnv]) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    for e in envs {
        std::fs::write(dir.join(format!("{}.grid", e.meta.name)), e.world.grid.to_text())?;
    }
    let metas: Vec<&EnvMeta> = envs.iter().map(|e| &e.meta).collect();
    std::fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&metas)?)?;
    Ok(())
}

pub fn load_suite(dir: &FsPath) -> Result<Vec<SuiteEnv>, BenchError> {
    let metas: Vec<EnvMeta> = serde_json::from_str(&std::fs::read_to_string(dir.join("suite.json"))?)?;
    metas
        .into_iter()
        .map(|meta| {
            let text = std::fs::read_to_string(dir.join(format!("{}.grid", meta.name)))?;
            let grid = OccupancyGrid::from_text(&text)?;
            Ok(SuiteEnv {
                meta,
                world: World::with_default_endpoints(grid),
            })
        })
        .collect()
}
