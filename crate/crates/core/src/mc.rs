//! Monte Carlo estimation of the probability of synchronizing from random
//! initial phases.
//!
//! Trial `i` of a plan draws its phases from a ChaCha stream selected by `i`
//! under the master seed, so trials can run in any order or in parallel and
//! disjoint trial ranges pool exactly.

use std::fmt::{self, Write as _};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{self, BoundsError};
use crate::graph::{generate_rgg, GraphError, Graph, RggSpec};
use crate::prc::{classify_stii, Prc};
use crate::sim::{run_one_period, run_to_synchrony, ModelParams, SimError, Simulation};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

pub const DEFAULT_MAX_PERIODS: u32 = 50;

#[derive(Debug, Error)]
pub enum McError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Law of the initial phase vector.
pub trait InitialCondition: Send + Sync + fmt::Debug {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// I.i.d. uniform phases on `[0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformInit;

impl InitialCondition for UniformInit {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Wilson,
    /// Normal approximation, clamped to `[0, 1]`.
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    Certificate,
    Full { max_periods: u32 },
}

#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub trials: usize,
    pub seed: u64,
    /// Index of the first trial; lets disjoint ranges pool exactly.
    pub first_trial: u64,
    pub init: Arc<dyn InitialCondition>,
    pub estimator: Estimator,
    pub ci: CiMethod,
}

impl TrialPlan {
    pub fn certificate(trials: usize, seed: u64) -> Self {
        TrialPlan {
            trials,
            seed,
            first_trial: 0,
            init: Arc::new(UniformInit),
            estimator: Estimator::Certificate,
            ci: CiMethod::Wilson,
        }
    }

    pub fn full(trials: usize, seed: u64, max_periods: u32) -> Self {
        TrialPlan {
            estimator: Estimator::Full { max_periods },
            ..TrialPlan::certificate(trials, seed)
        }
    }

    fn validate(&self) -> Result<(), McError> {
        if self.trials == 0 {
            return Err(McError::NoTrials);
        }
        Ok(())
    }

    fn trial_indices(&self) -> std::ops::Range<u64> {
        self.first_trial..self.first_trial + self.trials as u64
    }
}

/// Phases for trial `index` under `seed`.
pub fn trial_phases(init: &dyn InitialCondition, n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    init.sample(n, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: usize,
    pub trials: usize,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Not serialized, so output files stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl Estimate {
    pub fn from_counts(successes: usize, trials: usize, ci: CiMethod) -> Self {
        let (ci_low, ci_high) = match ci {
            CiMethod::Wilson => wilson_interval(successes, trials, Z_95),
            CiMethod::Wald => wald_interval(successes, trials, Z_95),
        };
        let point = successes as f64 / trials as f64;
        Estimate {
            successes,
            trials,
            point,
            ci_low: ci_low.min(point),
            ci_high: ci_high.max(point),
            wall_time: 0.0,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Wilson score interval.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let rad = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (((center - rad) / denom).max(0.0), ((center + rad) / denom).min(1.0))
}

pub fn wald_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let rad = z * (p * (1.0 - p) / n).sqrt();
    ((p - rad).max(0.0), (p + rad).min(1.0))
}

fn run_trials<F>(g: &Graph, plan: &TrialPlan, trial: F) -> Result<Vec<bool>, McError>
where
    F: Fn(&[f64]) -> Result<bool, SimError> + Sync,
{
    plan.validate()?;
    let n = g.node_count();
    let outcomes: Vec<Result<bool, SimError>> = plan
        .trial_indices()
        .into_par_iter()
        .map(|i| trial(&trial_phases(plan.init.as_ref(), n, plan.seed, i)))
        .collect();
    outcomes.into_iter().map(|r| r.map_err(McError::from)).collect()
}

fn summarize(outcomes: &[bool], plan: &TrialPlan, started: Instant) -> Estimate {
    let successes = outcomes.iter().filter(|&&ok| ok).count();
    let mut est = Estimate::from_counts(successes, outcomes.len(), plan.ci);
    est.wall_time = started.elapsed().as_secs_f64();
    est
}

/// Fraction of trials whose single-period run earns a certificate.
pub fn estimate_certificate(g: &Graph, params: &ModelParams, plan: &TrialPlan) -> Result<Estimate, McError> {
    if plan.estimator != Estimator::Certificate {
        return Err(McError::InvalidPlan("plan is not a certificate plan".into()));
    }
    let started = Instant::now();
    let outcomes = run_trials(g, plan, |ph| Ok(run_one_period(ph, g, params)?.granted))?;
    Ok(summarize(&outcomes, plan, started))
}

/// Fraction of trials reaching exact synchrony within the period budget.
pub fn estimate_full(g: &Graph, params: &ModelParams, plan: &TrialPlan) -> Result<Estimate, McError> {
    let Estimator::Full { max_periods } = plan.estimator else {
        return Err(McError::InvalidPlan("plan is not a full-integration plan".into()));
    };
    let started = Instant::now();
    let outcomes = run_trials(g, plan, |ph| Ok(run_to_synchrony(ph, g, params, max_periods)?.synced))?;
    Ok(summarize(&outcomes, plan, started))
}

/// Per-trial certificate and full outcomes on shared initial phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairedOutcome {
    pub certificate: bool,
    pub full: bool,
}

pub fn paired_trials(
    g: &Graph,
    params: &ModelParams,
    trials: usize,
    seed: u64,
    max_periods: u32,
) -> Result<Vec<PairedOutcome>, McError> {
    if trials == 0 {
        return Err(McError::NoTrials);
    }
    let n = g.node_count();
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let ph = trial_phases(&UniformInit, n, seed, i);
            Ok(PairedOutcome {
                certificate: run_one_period(&ph, g, params)?.granted,
                full: run_to_synchrony(&ph, g, params, max_periods)?.synced,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()
        .map_err(McError::from)
}

/// Analytic product lower bound for `prc` on `g`: the strong-firing bound
/// when the curve classifies with `k = 1`, the `STII_{k, eta}` bound for
/// larger `k`, and 0 when it does not classify.
pub fn analytic_product_bound(g: &Graph, prc: &Prc, tau: f64) -> Result<AnalyticBound, McError> {
    let params = prc.params;
    let s = bounds::compute_s(params.b, tau)?;
    let Some(class) = classify_stii(prc, &params, 16, 16) else {
        return Ok(AnalyticBound { k: None, product: 0.0 });
    };
    let k = class.class.k;
    let product = if k == 1 {
        bounds::sf_graph_bounds(g, s)?.product
    } else {
        let q = bounds::default_ready_probability(s, params.eta);
        if q <= 0.0 {
            0.0
        } else {
            bounds::stii_graph_bound(g, &vec![q; g.node_count()], k, s, params.eta)?.product
        }
    };
    Ok(AnalyticBound { k: Some(k), product })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticBound {
    pub k: Option<u32>,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub cert_trials: usize,
    pub full_trials: usize,
    pub max_periods: u32,
    /// Graphs sampled per radius, seeded `graph_seed .. graph_seed + replicates`.
    pub replicates: u64,
    pub graph_seed: u64,
    /// Phase seed shared by every row, so rows are paired.
    pub seed: u64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            cert_trials: 2000,
            full_trials: 500,
            max_periods: DEFAULT_MAX_PERIODS,
            replicates: 3,
            graph_seed: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub radius: f64,
    pub graph_seed: u64,
    pub prc: String,
    pub analytic_bound: f64,
    pub cert: Estimate,
    pub full: Estimate,
}

pub const SWEEP_HEADER: &str =
    "radius,graph_seed,prc,analytic_bound,cert_point,cert_lo,cert_hi,full_point,full_lo,full_hi,trials";

/// Certificate and full estimates with the analytic bound, per radius,
/// graph replicate and curve.
pub fn sweep_radius(
    base: RggSpec,
    radii: &[f64],
    prcs: &[Prc],
    tau: f64,
    plan: &SweepPlan,
) -> Result<Vec<SweepRow>, McError> {
    if radii.is_empty() || prcs.is_empty() {
        return Err(McError::InvalidPlan("radius and PRC lists must be nonempty".into()));
    }
    if plan.cert_trials == 0 || plan.full_trials == 0 || plan.replicates == 0 {
        return Err(McError::NoTrials);
    }
    let params: Vec<ModelParams> = prcs
        .iter()
        .map(|p| ModelParams::new(tau, p.clone()))
        .collect::<Result<_, _>>()?;
    let cert_plan = TrialPlan::certificate(plan.cert_trials, plan.seed);
    let full_plan = TrialPlan::full(plan.full_trials, plan.seed, plan.max_periods);
    let mut rows = Vec::new();
    for &radius in radii {
        for rep in 0..plan.replicates {
            let graph_seed = plan.graph_seed + rep;
            let g = generate_rgg(&RggSpec { radius, ..base }, graph_seed)?;
            for (prc, mp) in prcs.iter().zip(&params) {
                let analytic = analytic_product_bound(&g, prc, tau)?;
                rows.push(SweepRow {
                    radius,
                    graph_seed,
                    prc: prc.name(),
                    analytic_bound: analytic.product,
                    cert: estimate_certificate(&g, mp, &cert_plan)?,
                    full: estimate_full(&g, mp, &full_plan)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Sweep table as CSV; `trials` is the certificate trial count.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.radius,
            r.graph_seed,
            r.prc,
            r.analytic_bound,
            r.cert.point,
            r.cert.ci_low,
            r.cert.ci_high,
            r.full.point,
            r.full.ci_low,
            r.full.ci_high,
            r.cert.trials
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileRow {
    pub t: f64,
    pub mean: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Circular spread of one trajectory at `0, dt, 2 dt, ...` up to `horizon`.
pub fn spread_trajectory(
    phases: &[f64],
    g: &Graph,
    params: &ModelParams,
    sample_dt: f64,
    horizon: f64,
) -> Result<Vec<(f64, f64)>, SimError> {
    let mut sim = Simulation::new(g, params, phases)?;
    let steps = (horizon / sample_dt + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * sample_dt;
        sim.advance_to(t)?;
        out.push((t, sim.spread()));
    }
    Ok(out)
}

/// Mean and quartiles of the circular spread across trials at each sample time.
pub fn trajectory_quantiles(
    g: &Graph,
    params: &ModelParams,
    plan: &TrialPlan,
    sample_dt: f64,
    horizon: f64,
) -> Result<Vec<QuantileRow>, McError> {
    plan.validate()?;
    if !(sample_dt > 0.0) || !(horizon >= 0.0) {
        return Err(McError::InvalidPlan("sample_dt must be > 0 and horizon >= 0".into()));
    }
    if g.node_count() == 0 {
        return Err(McError::InvalidPlan("graph has no nodes".into()));
    }
    let n = g.node_count();
    let runs = plan
        .trial_indices()
        .into_par_iter()
        .map(|i| {
            let ph = trial_phases(plan.init.as_ref(), n, plan.seed, i);
            spread_trajectory(&ph, g, params, sample_dt, horizon)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let samples = runs[0].len();
    Ok((0..samples)
        .map(|k| {
            let mut col: Vec<f64> = runs.iter().map(|r| r[k].1).collect();
            col.sort_by(f64::total_cmp);
            QuantileRow {
                t: runs[0][k].0,
                mean: col.iter().sum::<f64>() / col.len() as f64,
                q25: quantile(&col, 0.25),
                q50: quantile(&col, 0.5),
                q75: quantile(&col, 0.75),
            }
        })
        .collect())
}

pub const QUANTILE_HEADER: &str = "t,mean,q25,q50,q75";

pub fn quantile_csv(rows: &[QuantileRow]) -> String {
    let mut out = format!("{QUANTILE_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.t, r.mean, r.q25, r.q50, r.q75).unwrap();
    }
    out
}
