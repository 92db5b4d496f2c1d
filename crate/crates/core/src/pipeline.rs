//! Training (parameter fits plus classifier) and online deployment with
//! per-tick context switching.

use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{
    ContextClassifier, ContextError, ContextPrediction, FeatureConfig, ModeFilter, PredictorConfig,
    TrainConfig,
};
use crate::geom::Pose2D;
use crate::intervention::{build_dataset, InterventionError, InterventionRecord};
use crate::learn::{fit_parameters, BcWeights, CmaConfig, FitResult, LearnError, RecordPlanner};
use crate::nav::{NavError, ParameterSet, ParameterSpace, PlannerInput};
use crate::registry::ContextSelector;
use crate::sim::{Decision, Sim, SimConfig, SimError, StepStatus};
use crate::world::World;

const POLICY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no interventions to train on")]
    NoRecords,
    #[error("fitting context {context} failed: {source}")]
    Fit { context: u32, source: LearnError },
    #[error(transparent)]
    Intervention(#[from] InterventionError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("malformed policy: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Context id to parameter set; entry 0 is the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    entries: Vec<ParameterSet>,
}

impl ParameterMap {
    pub fn new(default: ParameterSet, learned: Vec<ParameterSet>) -> Self {
        let mut entries = vec![default];
        entries.extend(learned);
        Self { entries }
    }

    pub fn contexts(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn default_params(&self) -> &ParameterSet {
        &self.entries[0]
    }

    /// Parameters for `context`; ids outside the map fall back to entry 0.
    pub fn get(&self, context: u32) -> &ParameterSet {
        self.entries.get(context as usize).unwrap_or(&self.entries[0])
    }

    pub fn entries(&self) -> &[ParameterSet] {
        &self.entries
    }

    /// Key-value text, one block per context separated by `[id]` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.entries.iter().enumerate() {
            out.push_str(&format!("[{i}]\n{}\n", p.to_kv().trim_end()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NavError> {
        let mut entries = Vec::new();
        let mut block = String::new();
        let mut expect = 0usize;
        let mut open = false;
        let flush = |block: &mut String, entries: &mut Vec<ParameterSet>| -> Result<(), NavError> {
            entries.push(ParameterSet::from_kv(block)?);
            block.clear();
            Ok(())
        };
        for line in text.lines() {
            let t = line.trim();
            if let Some(id) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                if open {
                    flush(&mut block, &mut entries)?;
                }
                if id.parse::<usize>().ok() != Some(expect) {
                    return Err(NavError::BadParameters(format!("expected block [{expect}], found [{id}]")));
                }
                expect += 1;
                open = true;
            } else if !t.is_empty() {
                if !open {
                    return Err(NavError::BadParameters("entry outside a block".into()));
                }
                block.push_str(line);
                block.push('\n');
            }
        }
        if open {
            flush(&mut block, &mut entries)?;
        }
        if entries.is_empty() {
            return Err(NavError::BadParameters("empty parameter map".into()));
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub records: Vec<RecordInfo>,
    /// Nominal inputs offered to the classifier as zero-evidence samples.
    #[serde(default)]
    pub nominal: usize,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordInfo {
    pub context_id: u32,
    pub itype: String,
    pub env_file: String,
    pub seed: u64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPolicy {
    pub version: u32,
    pub map: ParameterMap,
    pub classifier: ContextClassifier,
    pub predictor: PredictorConfig,
    pub provenance: Provenance,
}

impl TrainedPolicy {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.classifier.contexts() != self.map.contexts() {
            return Err(PipelineError::Malformed(format!(
                "classifier has {} contexts, map has {}",
                self.classifier.contexts(),
                self.map.contexts()
            )));
        }
        self.predictor.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let p: Self = serde_json::from_str(text)?;
        if p.version != POLICY_VERSION {
            return Err(PipelineError::Malformed(format!("unsupported version {}", p.version)));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &FsPath) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<Self, PipelineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub space: ParameterSpace,
    pub weights: BcWeights,
    pub cma: CmaConfig,
    pub classifier: TrainConfig,
    pub features: FeatureConfig,
    pub predictor: PredictorConfig,
    pub sim: SimConfig,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            space: ParameterSpace::default(),
            weights: BcWeights::default(),
            cma: CmaConfig {
                patience: Some(320),
                restarts: 3,
                ..CmaConfig::default()
            },
            classifier: TrainConfig::default(),
            features: FeatureConfig::default(),
            predictor: PredictorConfig::default(),
            sim: SimConfig::default(),
            seed: 0,
        }
    }
}

/// One parameter set per record, in context-id order.
pub fn fit_all(records: &[InterventionRecord], settings: &TrainSettings) -> Result<Vec<FitResult>, PipelineError> {
    let mut sorted: Vec<&InterventionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.context_id);
    sorted
        .into_iter()
        .map(|r| {
            let planner = RecordPlanner::new(r, settings.sim.dwa, settings.sim.inflation);
            let cma = CmaConfig {
                seed: settings.seed.wrapping_add(r.context_id as u64),
                ..settings.cma.clone()
            };
            fit_parameters(r, &settings.space, &settings.weights, &cma, &planner.context()).map_err(|source| {
                PipelineError::Fit {
                    context: r.context_id,
                    source,
                }
            })
        })
        .collect()
}

/// Fits every context and trains the classifier on all recorded inputs.
/// `nominal` holds inputs from unattended driving with the defaults.
pub fn train(
    records: &[InterventionRecord],
    nominal: &[PlannerInput],
    settings: &TrainSettings,
) -> Result<(TrainedPolicy, Vec<FitResult>), PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::NoRecords);
    }
    let fits = fit_all(records, settings)?;
    let policy = assemble(records, &fits, nominal, settings)?;
    Ok((policy, fits))
}

/// Builds a policy from records and their fits (in context-id order),
/// training only the classifier.
pub fn assemble(
    records: &[InterventionRecord],
    fits: &[FitResult],
    nominal: &[PlannerInput],
    settings: &TrainSettings,
) -> Result<TrainedPolicy, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::NoRecords);
    }
    if fits.len() != records.len() {
        return Err(PipelineError::Malformed(format!(
            "{} fits for {} records",
            fits.len(),
            records.len()
        )));
    }
    let map = ParameterMap::new(settings.space.default, fits.iter().map(|f| f.theta).collect());
    assemble_map(records, map, nominal, settings)
}

/// Builds a policy around an already fitted parameter map whose entries
/// follow the records' context ids.
pub fn assemble_map(
    records: &[InterventionRecord],
    map: ParameterMap,
    nominal: &[PlannerInput],
    settings: &TrainSettings,
) -> Result<TrainedPolicy, PipelineError> {
    if map.contexts() != records.len() {
        return Err(PipelineError::Malformed(format!(
            "map has {} contexts for {} records",
            map.contexts(),
            records.len()
        )));
    }
    let dataset = build_dataset(records)?;
    let (classifier, report) =
        ContextClassifier::train(&dataset, nominal, settings.features.clone(), &settings.classifier, settings.seed)?;
    log::info!(
        "trained classifier on {} samples: accuracy {:.3}, loss {:.4}",
        dataset.items.len(),
        report.accuracy,
        report.final_loss
    );
    let mut infos: Vec<RecordInfo> = records
        .iter()
        .map(|r| RecordInfo {
            context_id: r.context_id,
            itype: r.itype.to_string(),
            env_file: r.env_file.clone(),
            seed: r.seed,
            steps: r.steps.len(),
        })
        .collect();
    infos.sort_by_key(|i| i.context_id);
    let policy = TrainedPolicy {
        version: POLICY_VERSION,
        map,
        classifier,
        predictor: settings.predictor,
        provenance: Provenance {
            records: infos,
            nominal: nominal.len(),
            seed: settings.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    policy.validate()?;
    Ok(policy)
}

/// Online context switching for one episode.
#[derive(Debug, Clone)]
pub struct Deployer {
    policy: Arc<TrainedPolicy>,
    selector: Arc<dyn ContextSelector>,
    filter: ModeFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeployStep {
    pub decision: Decision,
    pub prediction: ContextPrediction,
    pub selected: u32,
    pub context: u32,
}

impl Deployer {
    pub fn new(policy: Arc<TrainedPolicy>, selector: Arc<dyn ContextSelector>) -> Self {
        let filter = ModeFilter::new(policy.predictor.window);
        Self {
            policy,
            selector,
            filter,
        }
    }

    pub fn policy(&self) -> &TrainedPolicy {
        &self.policy
    }

    pub fn history(&self) -> Vec<u32> {
        self.filter.history()
    }

    /// Classifies `x`, updates the filtered context and runs the autopilot
    /// with that context's parameters.
    pub fn step(&mut self, sim: &mut Sim, x: &PlannerInput) -> Result<DeployStep, PipelineError> {
        let prediction = self.policy.classifier.predict(x)?;
        let selected = self.selector.select(&prediction, self.policy.predictor.epsilon_u);
        let context = self.filter.push(selected);
        let theta = *self.policy.map.get(context);
        let decision = sim.autopilot(x, &theta)?;
        Ok(DeployStep {
            decision,
            prediction,
            selected,
            context,
        })
    }
}

pub enum Controller {
    Fixed(ParameterSet),
    Policy(Deployer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Stuck,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub sim: SimConfig,
    pub timeout: f64,
    /// An episode is stuck after moving less than `stuck_dist` over this
    /// many seconds.
    pub stuck_window: f64,
    pub stuck_dist: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            timeout: 50.0,
            stuck_window: 15.0,
            stuck_dist: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTick {
    pub t: f64,
    pub pose: [f64; 3],
    pub action: [f64; 2],
    pub context: u32,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub time: f64,
    pub path: Vec<Pose2D>,
    pub ticks: Vec<EpisodeTick>,
}

impl EpisodeResult {
    /// Traversal time, with every failed run scored at `penalty`.
    pub fn score(&self, penalty: f64) -> f64 {
        match self.outcome {
            Outcome::Reached => self.time,
            _ => penalty,
        }
    }

    pub fn contexts(&self) -> Vec<u32> {
        self.ticks.iter().map(|t| t.context).collect()
    }

    pub fn log(&self) -> String {
        let mut out = String::new();
        for t in &self.ticks {
            out.push_str(&serde_json::to_string(t).expect("tick serializes"));
            out.push('\n');
        }
        out
    }
}

/// Closed-loop run from the world's start until the goal, a collision,
/// no progress, or the timeout.
pub fn run_episode(
    world: &World,
    controller: &mut Controller,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult, PipelineError> {
    let mut sim = Sim::new(world.clone(), config.sim.clone(), seed)?;
    let mut path = vec![sim.state().robot.pose];
    let mut ticks = Vec::new();
    if sim.at_goal() {
        return Ok(EpisodeResult {
            outcome: Outcome::Reached,
            time: 0.0,
            path,
            ticks,
        });
    }
    let period = config.sim.control_period();
    let window = (config.stuck_window / period).round().max(1.0) as usize;
    loop {
        let x = sim.observe();
        let (action, context, confidence) = match controller {
            Controller::Fixed(theta) => (sim.autopilot(&x, theta)?.action, 0, 0.0),
            Controller::Policy(d) => {
                let s = d.step(&mut sim, &x)?;
                (s.decision.action, s.context, s.prediction.confidence)
            }
        };
        let status = sim.advance(action);
        let pose = sim.state().robot.pose;
        path.push(pose);
        ticks.push(EpisodeTick {
            t: sim.time(),
            pose: [pose.x, pose.y, pose.theta],
            action: [action.v, action.w],
            context,
            confidence,
        });
        let outcome = match status {
            StepStatus::Reached => Some(Outcome::Reached),
            StepStatus::Collision => Some(Outcome::Collision),
            StepStatus::Running if sim.time() >= config.timeout - 1e-9 => Some(Outcome::Timeout),
            StepStatus::Running if path.len() > window => {
                let then = path[path.len() - 1 - window];
                (then.position().distance(&pose.position()) < config.stuck_dist).then_some(Outcome::Stuck)
            }
            StepStatus::Running => None,
        };
        if let Some(outcome) = outcome {
            return Ok(EpisodeResult {
                outcome,
                time: sim.time(),
                path,
                ticks,
            });
        }
    }
}

/// Convenience for a single fixed parameter set.
pub fn run_fixed(world: &World, theta: ParameterSet, config: &EpisodeConfig, seed: u64) -> Result<EpisodeResult, PipelineError> {
    run_episode(world, &mut Controller::Fixed(theta), config, seed)
}

/// Convenience for a trained policy with the named selector.
pub fn run_policy(
    world: &World,
    policy: Arc<TrainedPolicy>,
    selector: Arc<dyn ContextSelector>,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult, PipelineError> {
    run_episode(world, &mut Controller::Policy(Deployer::new(policy, selector)), config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{force_border, OccupancyGrid};

    fn corridor() -> World {
        let mut g = OccupancyGrid::new(12, 70, 0.15).unwrap();
        force_border(&mut g);
        World::with_default_endpoints(g)
    }

    #[test]
    fn map_text_round_trip() {
        let mut a = ParameterSet::default();
        a.inflation_radius = 0.05;
        a.max_vel_x = 0.3;
        let m = ParameterMap::new(ParameterSet::default(), vec![a, ParameterSet::default()]);
        let back = ParameterMap::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.contexts(), 2);
        assert_eq!(*back.get(7), ParameterSet::default());
        assert!(ParameterMap::from_text("[1]\n").is_err());
    }

    #[test]
    fn open_corridor_is_reached() {
        let w = corridor();
        let r = run_fixed(&w, ParameterSet::default(), &EpisodeConfig::default(), 3).unwrap();
        assert_eq!(r.outcome, Outcome::Reached);
        let dist = w.start.distance(&w.goal) - 0.3;
        assert!(r.time > dist / ParameterSet::default().max_vel_x);
        assert!(r.time < 50.0);
        assert_eq!(r.ticks.len() + 1, r.path.len());
    }

    #[test]
    fn start_at_goal_is_immediate() {
        let mut w = corridor();
        w.goal = w.start;
        let r = run_fixed(&w, ParameterSet::default(), &EpisodeConfig::default(), 0).unwrap();
        assert_eq!(r.outcome, Outcome::Reached);
        assert_eq!(r.time, 0.0);
    }

    #[test]
    fn sealed_goal_does_not_reach() {
        let mut w = corridor();
        w.grid.fill_rect(0, 30, 11, 31, true);
        let cfg = EpisodeConfig::default();
        let r = run_fixed(&w, ParameterSet::default(), &cfg, 0).unwrap();
        assert!(matches!(r.outcome, Outcome::Stuck | Outcome::Timeout), "{:?}", r.outcome);
        assert_eq!(r.score(cfg.timeout), 50.0);
    }
}
