//! Behavior-cloning loss over recorded interventions and the CMA-ES
//! minimizer used to fit one parameter set per intervention.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervention::InterventionRecord;
use crate::nav::{Dwa, DwaConfig, LocalPlanner, ParameterSet, ParameterSpace};
use crate::sim::CostCache;
use crate::world::InflationModel;

/// Loss added per step when the planner finds no feasible motion.
pub const INFEASIBLE_PENALTY: f64 = 4.0;
const BOX_PENALTY: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("objective returned {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record has no steps")]
    EmptyRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcWeights {
    pub lambda_v: f64,
    pub lambda_w: f64,
}

impl Default for BcWeights {
    fn default() -> Self {
        Self {
            lambda_v: 1.0,
            lambda_w: 0.25,
        }
    }
}

impl BcWeights {
    pub fn new(lambda_v: f64, lambda_w: f64) -> Result<Self, LearnError> {
        let w = Self { lambda_v, lambda_w };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_v) || !ok(self.lambda_w) || self.lambda_v + self.lambda_w == 0.0 {
            return Err(LearnError::Config(format!(
                "weights ({}, {}) must be non-negative and not both zero",
                self.lambda_v, self.lambda_w
            )));
        }
        Ok(())
    }
}

/// The planner and cost grids a record is replayed against.
pub struct ReplayContext<'a> {
    pub planner: &'a dyn LocalPlanner,
    pub costs: &'a CostCache,
}

/// Owns the default planner and the cost cache for one record's grid.
pub struct RecordPlanner {
    pub dwa: Dwa,
    pub costs: CostCache,
}

impl RecordPlanner {
    pub fn new(record: &InterventionRecord, dwa: DwaConfig, inflation: InflationModel) -> Self {
        Self {
            dwa: Dwa::new(dwa),
            costs: CostCache::new(record.grid.clone(), inflation),
        }
    }

    pub fn context(&self) -> ReplayContext<'_> {
        ReplayContext {
            planner: &self.dwa,
            costs: &self.costs,
        }
    }
}

/// Weighted squared action error of the planner against the recorded
/// actions, evaluated open-loop on the recorded inputs.
pub fn bc_loss(
    record: &InterventionRecord,
    theta: &ParameterSet,
    weights: &BcWeights,
    ctx: &ReplayContext<'_>,
) -> f64 {
    let costs = ctx.costs.get(theta.inflation_radius);
    record
        .steps
        .iter()
        .map(|s| match ctx.planner.plan(&s.x, theta, &costs).ok().and_then(|o| o.action()) {
            Some(a) => {
                let dv = s.action.v - a.v;
                let dw = s.action.w - a.w;
                weights.lambda_v * dv * dv + weights.lambda_w * dw * dw
            }
            None => INFEASIBLE_PENALTY,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaConfig {
    pub population: usize,
    pub sigma0: f64,
    pub budget: usize,
    pub seed: u64,
    pub tol_f: f64,
    /// Stop when the generation-best values of the last this many
    /// evaluations span at most `tol_f`; `None` means 10·dim.
    #[serde(default)]
    pub stagnation_evals: Option<usize>,
    /// Stop when the best value has not improved for this many evaluations.
    #[serde(default)]
    pub patience: Option<usize>,
    /// Stop as soon as the best value is at or below this.
    #[serde(default)]
    pub target: Option<f64>,
    /// Fresh-seed reruns `fit_parameters` may spend the remaining budget on.
    #[serde(default)]
    pub restarts: usize,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            population: 16,
            sigma0: 0.3,
            budget: 6000,
            seed: 0,
            tol_f: 1e-12,
            stagnation_evals: None,
            patience: None,
            target: None,
            restarts: 0,
        }
    }
}

impl CmaConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.population < 4 {
            return Err(LearnError::Config("population must be at least 4".into()));
        }
        if self.budget < self.population {
            return Err(LearnError::Config("budget must cover one generation".into()));
        }
        if !(self.sigma0 > 0.0) {
            return Err(LearnError::Config("sigma0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub evals: usize,
    pub best: f64,
    pub generation_best: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evals: usize,
    pub history: Vec<Generation>,
}

fn clip_unit(x: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut d2 = 0.0;
    let z = x
        .iter()
        .map(|v| {
            let c = v.clamp(0.0, 1.0);
            d2 += (v - c) * (v - c);
            c
        })
        .collect();
    (z, d2)
}

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu updates over the unit
/// box. Points are clipped before evaluation and charged `1e3 * |x - clip(x)|^2`.
/// `start` is the initial mean (the box center when `None`); `inject` points
/// replace the first samples of the first generation.
pub fn cmaes_minimize<F>(
    mut objective: F,
    dim: usize,
    config: &CmaConfig,
    start: Option<&[f64]>,
    inject: &[Vec<f64>],
) -> Result<CmaResult, LearnError>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    if dim == 0 {
        return Err(LearnError::Config("dimension must be positive".into()));
    }
    let n = dim as f64;
    let lambda = config.population;
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu)
        .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / wsum).collect();
    let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
    let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mean = match start {
        Some(s) if s.len() == dim => DVector::from_column_slice(s),
        Some(_) => return Err(LearnError::Config("start point has wrong dimension".into())),
        None => DVector::from_element(dim, 0.5),
    };
    let mut sigma = config.sigma0;
    let mut cov = DMatrix::<f64>::identity(dim, dim);
    let mut p_sigma = DVector::<f64>::zeros(dim);
    let mut p_c = DVector::<f64>::zeros(dim);

    let window = config.stagnation_evals.unwrap_or(10 * dim);
    let mut best_point = vec![0.5; dim];
    let mut best_value = f64::INFINITY;
    let mut evals = 0usize;
    let mut history: Vec<Generation> = Vec::new();
    let mut generation = 0usize;

    while evals + lambda <= config.budget {
        let eig = SymmetricEigen::new(cov.clone());
        let b = eig.eigenvectors;
        let d = eig.eigenvalues.map(|e| e.max(1e-20).sqrt());
        let mut xs: Vec<DVector<f64>> = Vec::with_capacity(lambda);
        for k in 0..lambda {
            if generation == 0 && k < inject.len() {
                if inject[k].len() != dim {
                    return Err(LearnError::Config("injected point has wrong dimension".into()));
                }
                xs.push(DVector::from_column_slice(&inject[k]));
                continue;
            }
            let z = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
            let y = &b * d.component_mul(&z);
            xs.push(&mean + sigma * y);
        }
        let mut fit: Vec<(f64, usize)> = Vec::with_capacity(lambda);
        let mut gen_best = f64::INFINITY;
        for (k, x) in xs.iter().enumerate() {
            let (z, d2) = clip_unit(x);
            let raw = objective(&z);
            if !raw.is_finite() {
                return Err(LearnError::NonFinite { point: z, value: raw });
            }
            evals += 1;
            if raw < best_value {
                best_value = raw;
                best_point = z;
            }
            gen_best = gen_best.min(raw);
            fit.push((raw + BOX_PENALTY * d2, k));
        }
        fit.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        history.push(Generation {
            evals,
            best: best_value,
            generation_best: gen_best,
            sigma,
        });
        generation += 1;

        if config.target.is_some_and(|t| best_value <= t) {
            break;
        }
        if evals >= window {
            let recent: Vec<f64> = history
                .iter()
                .rev()
                .take_while(|g| g.evals + window > evals)
                .map(|g| g.generation_best)
                .collect();
            let hi = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
            if recent.len() >= 2 && hi - lo <= config.tol_f {
                break;
            }
        }
        if let Some(patience) = config.patience {
            let past = history
                .iter()
                .rev()
                .find(|g| g.evals + patience <= evals)
                .map(|g| g.best);
            if past.is_some_and(|p| p <= best_value) {
                break;
            }
        }

        let old_mean = mean.clone();
        mean = DVector::zeros(dim);
        for (i, (_, k)) in fit.iter().take(mu).enumerate() {
            mean += w[i] * &xs[*k];
        }
        let step = (&mean - &old_mean) / sigma;
        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt * &step);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * generation as i32)).sqrt() / chi_n
            < 1.4 + 2.0 / (n + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - c_c) * &p_c + hs * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &step;
        let mut rank_mu = DMatrix::<f64>::zeros(dim, dim);
        for (i, (_, k)) in fit.iter().take(mu).enumerate() {
            let y = (&xs[*k] - &old_mean) / sigma;
            rank_mu += w[i] * &y * y.transpose();
        }
        let delta_h = (1.0 - hs) * c_c * (2.0 - c_c);
        cov = (1.0 - c1 - c_mu) * &cov + c1 * (&p_c * p_c.transpose() + delta_h * &cov) + c_mu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        if !sigma.is_finite() || sigma < 1e-300 {
            break;
        }
    }
    Ok(CmaResult {
        best_point,
        best_value,
        evals,
        history,
    })
}

/// Fits the parameter set whose planner output best matches the record.
/// The default is evaluated first and returned unless something is
/// strictly better.
pub fn fit_parameters(
    record: &InterventionRecord,
    space: &ParameterSpace,
    weights: &BcWeights,
    config: &CmaConfig,
    ctx: &ReplayContext<'_>,
) -> Result<FitResult, LearnError> {
    if record.steps.is_empty() {
        return Err(LearnError::EmptyRecord);
    }
    weights.validate()?;
    space
        .validate()
        .map_err(|e| LearnError::Config(e.to_string()))?;
    let default = space.default;
    let default_loss = bc_loss(record, &default, weights, ctx);
    let z0 = space.encode(&default);
    let mut cfg = config.clone();
    if cfg.target.is_none() {
        cfg.target = Some(0.0);
    }
    let mut res = cmaes_minimize(
        |z| bc_loss(record, &space.decode(z), weights, ctx),
        ParameterSpace::DIM,
        &cfg,
        Some(&z0),
        &[z0.clone()],
    )?;
    let target = cfg.target.unwrap_or(0.0);
    for r in 1..=config.restarts {
        let left = config.budget.saturating_sub(res.evals);
        if res.best_value <= target || left < cfg.population {
            break;
        }
        let again = cmaes_minimize(
            |z| bc_loss(record, &space.decode(z), weights, ctx),
            ParameterSpace::DIM,
            &CmaConfig {
                budget: left,
                seed: cfg.seed.wrapping_add(0x9e37_79b9 * r as u64),
                ..cfg.clone()
            },
            Some(&z0),
            &[],
        )?;
        res.evals += again.evals;
        if again.best_value < res.best_value {
            res.best_value = again.best_value;
            res.best_point = again.best_point;
        }
    }
    let (theta, loss) = if res.best_value < default_loss {
        (space.decode(&res.best_point), res.best_value)
    } else {
        (default, default_loss)
    };
    Ok(FitResult {
        theta,
        loss,
        default_loss,
        evals: res.evals,
        steps: record.steps.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: ParameterSet,
    pub loss: f64,
    pub default_loss: f64,
    pub evals: usize,
    pub steps: usize,
}

impl FitResult {
    pub fn per_step_loss(&self) -> f64 {
        self.loss / self.steps.max(1) as f64
    }
}
