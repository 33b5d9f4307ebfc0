//! Model runners: stream a series through the GP filter or an online AR
//! baseline, score one-step-ahead predictions with NMAE, and collect
//! everything a report needs.
//!
//! Conventions shared by every run: observations are z-scored before the
//! GP sees them (predictions are mapped back to the original scale before
//! scoring), time is shifted so the series starts at 0, and the sampling
//! frequency defaults to the reciprocal mean of the first few gaps.
//! Baselines operate on the raw values — they normalize themselves through
//! their own regression weights.

use std::time::Instant;

use ndarray::Array1;

use pmgp::baselines::{
    ar_features, blr_update, nmae, pa_regress_update, ARModel, ArVariant,
};
use pmgp::filter::{forecast, FilterState};
use pmgp::gpr_oracle::{log_marginal_likelihood, GPRProblem};
use pmgp::kernels::{HyperParams, TrendKind};
use pmgp::learner::{step, PAConfig, ThetaTraceEntry};
use pmgp::{Error, Result};

use crate::ingest::{estimate_fs, SeriesRecord};

/// Model list used by `benchmark` when none is given.
pub const DEFAULT_MODELS: [&str; 5] = ["pmgp", "pa-ar2", "pa-ar10", "blr-ar2", "blr-ar10"];

/// Shared run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Matérn smoothness p (the process is p-times differentiable).
    pub p: usize,
    /// Number of spectral mixture components K.
    pub components: usize,
    /// Aggressiveness of the hyperparameter learner.
    pub c: f64,
    /// Loss tolerance of the hyperparameter learner.
    pub eps: f64,
    pub trend: TrendKind,
    /// Sampling frequency; estimated from the data when absent.
    pub fs_override: Option<f64>,
    /// Record the per-step hyperparameter trace in reports.
    pub with_trace: bool,
    /// Record wall-clock runtimes in reports.
    pub with_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 2,
            components: 4,
            c: 100.0,
            eps: 0.0,
            trend: TrendKind::Linear,
            fs_override: None,
            with_trace: false,
            with_timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::Domain("need at least one mixture component".into()));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Domain(format!("c must be positive, got {}", self.c)));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::Domain(format!("eps must be nonnegative, got {}", self.eps)));
        }
        if let Some(fs) = self.fs_override {
            if !(fs.is_finite() && fs > 0.0) {
                return Err(Error::Domain(format!("fs must be positive, got {fs}")));
            }
        }
        Ok(())
    }
}

pub fn parse_trend(s: &str) -> Result<TrendKind> {
    match s {
        "linear" => Ok(TrendKind::Linear),
        "constant" => Ok(TrendKind::Constant),
        other => Err(Error::Input(format!(
            "unknown trend `{other}` (expected `linear` or `constant`)"
        ))),
    }
}

/// A runnable model name: the GP filter or an AR baseline with an order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    Pmgp,
    Ar(ArVariant, usize),
}

/// Parse a model name: `pmgp`, `pa-arK`, `pa1-arK`, `pa2-arK`, `blr-arK`.
pub fn parse_model(name: &str) -> Result<ModelId> {
    if name == "pmgp" {
        return Ok(ModelId::Pmgp);
    }
    let unknown = || Error::Input(format!("unknown model `{name}`"));
    let (family, order) = name.split_once("-ar").ok_or_else(unknown)?;
    let order: usize = order.parse().map_err(|_| unknown())?;
    if order == 0 {
        return Err(Error::Input(format!("model `{name}`: AR order must be at least 1")));
    }
    let variant = match family {
        "pa" => ArVariant::Pa,
        "pa1" => ArVariant::PaI,
        "pa2" => ArVariant::PaII,
        "blr" => ArVariant::Blr,
        _ => return Err(unknown()),
    };
    Ok(ModelId::Ar(variant, order))
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn require_min_len(records: &[SeriesRecord], min: usize) -> Result<()> {
    if records.len() < min {
        return Err(Error::Input(format!(
            "need at least {min} records, got {}",
            records.len()
        )));
    }
    Ok(())
}

/// Everything produced by streaming a series through the GP filter.
#[derive(Debug, Clone)]
pub struct PmgpRun {
    /// One-step-ahead predictive means on the original scale, one per record.
    pub predictions: Vec<f64>,
    /// Number of steps on which the learner actually moved θ.
    pub theta_updates: usize,
    pub trace: Vec<ThetaTraceEntry<f64>>,
    /// Final filter state (in shifted-time, z-scored coordinates).
    pub state: FilterState<f64>,
    /// Mean and standard deviation used for z-scoring.
    pub y_mean: f64,
    pub y_std: f64,
    /// Time of the first record; internal time is `t - t_start`.
    pub t_start: f64,
    /// Sampling frequency in force (estimated or overridden).
    pub fs: f64,
}

/// Stream the series through the GP filter with online hyperparameter
/// learning, scoring each observation before absorbing it.
pub fn run_pmgp(records: &[SeriesRecord], cfg: &RunConfig) -> Result<PmgpRun> {
    cfg.validate()?;
    require_min_len(records, 3)?;

    let (y_mean, y_std) = population_std(records.iter().map(|r| r.y));
    if !(y_std > 0.0) {
        return Err(Error::DegenerateSeries(
            "series is constant; cannot z-score".into(),
        ));
    }
    let t_start = records[0].t;
    let fs = match cfg.fs_override {
        Some(v) => v,
        None => estimate_fs(records)?,
    };

    let theta0 = HyperParams::init(cfg.trend, cfg.components, fs)?;
    let pa_cfg = PAConfig::new(cfg.c, cfg.eps)?.with_reference(theta0.pack());
    let mut state = FilterState::new(theta0, cfg.trend, cfg.p)?;

    let mut predictions = Vec::with_capacity(records.len());
    let mut trace = Vec::with_capacity(records.len());
    let mut theta_updates = 0usize;
    for rec in records {
        let t = rec.t - t_start;
        let y = (rec.y - y_mean) / y_std;
        let (next, predictive, entry) = step(&state, t, y, &pa_cfg)?;
        predictions.push(predictive.mean * y_std + y_mean);
        if entry.fired {
            theta_updates += 1;
        }
        trace.push(entry);
        state = next;
    }

    Ok(PmgpRun {
        predictions,
        theta_updates,
        trace,
        state,
        y_mean,
        y_std,
        t_start,
        fs,
    })
}

/// A forecast beyond the end of the series, on the original scale.
#[derive(Debug, Clone, Copy)]
pub struct FutureForecast {
    pub t: f64,
    pub mean: f64,
    /// Predictive variance of a noisy observation at `t`.
    pub var: f64,
    /// Predictive variance of the noise-free signal at `t`.
    pub latent_var: f64,
}

/// Extrapolate `horizon` steps of `1/fs` past the last absorbed record.
pub fn future_forecasts(run: &PmgpRun, horizon: usize) -> Result<Vec<FutureForecast>> {
    let t_last = run
        .state
        .t_last
        .ok_or_else(|| Error::Input("cannot extrapolate from an empty run".into()))?;
    let scale = run.y_std * run.y_std;
    let mut out = Vec::with_capacity(horizon);
    for j in 1..=horizon {
        let t = t_last + j as f64 / run.fs;
        let (obs, latent) = forecast(&run.state, t)?;
        out.push(FutureForecast {
            t: t + run.t_start,
            mean: obs.mean * run.y_std + run.y_mean,
            var: obs.var * scale,
            latent_var: latent.var * scale,
        });
    }
    Ok(out)
}

/// Stream the series through one online AR baseline on the raw values,
/// returning one-step-ahead predictions aligned with the records.
pub fn run_ar_baseline(
    records: &[SeriesRecord],
    variant: ArVariant,
    order: usize,
) -> Result<Vec<f64>> {
    require_min_len(records, 3)?;

    let mut model = match variant {
        ArVariant::Pa => ARModel::pa(order, 0.0)?,
        ArVariant::PaI => ARModel::pa_i(order, 100.0, 0.0)?,
        ArVariant::PaII => ARModel::pa_ii(order, 100.0, 0.0)?,
        ArVariant::Blr => {
            let (_, y_std) = population_std(records.iter().map(|r| r.y));
            if !(y_std > 0.0) {
                return Err(Error::DegenerateSeries(
                    "series is constant; cannot scale the regression noise".into(),
                ));
            }
            ARModel::blr(order, 0.05 * y_std)?
        }
    };

    let mut history: Vec<f64> = Vec::with_capacity(records.len());
    let mut predictions = Vec::with_capacity(records.len());
    for rec in records {
        let x = ar_features(&history, order);
        predictions.push(model.predict(&x)?);
        model = match variant {
            ArVariant::Blr => blr_update(model, &x, rec.y)?,
            _ => pa_regress_update(model, &x, rec.y)?,
        };
        history.push(rec.y);
    }
    Ok(predictions)
}

/// Scores and artifacts of one successfully run model.
#[derive(Debug, Clone)]
pub struct ModelScore {
    pub nmae: f64,
    pub nmae_std: f64,
    /// Number of observations streamed.
    pub n_steps: usize,
    /// Cumulative NMAE after each scored step (steps 1..n-1).
    pub running: Vec<f64>,
    /// GP model only: steps on which the learner moved θ.
    pub theta_updates: Option<usize>,
    pub trace: Option<Vec<ThetaTraceEntry<f64>>>,
    pub runtime_ms: Option<f64>,
}

/// One row of a benchmark: either a score or the error that stopped the
/// model. A failing model never takes the rest of the benchmark down.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub model: String,
    pub outcome: std::result::Result<ModelScore, String>,
}

fn score_predictions(
    predictions: Vec<f64>,
    records: &[SeriesRecord],
    theta_updates: Option<usize>,
    trace: Option<Vec<ThetaTraceEntry<f64>>>,
    runtime_ms: Option<f64>,
) -> Result<ModelScore> {
    let actuals = Array1::from_iter(records.iter().map(|r| r.y));
    let scored = nmae(&Array1::from_vec(predictions), &actuals)?;
    Ok(ModelScore {
        nmae: scored.nmae,
        nmae_std: scored.nmae_std,
        n_steps: records.len(),
        running: scored.running.to_vec(),
        theta_updates,
        trace,
        runtime_ms,
    })
}

/// Score a finished GP run against its records.
pub fn score_pmgp(
    run: &PmgpRun,
    records: &[SeriesRecord],
    cfg: &RunConfig,
    runtime_ms: Option<f64>,
) -> Result<ModelScore> {
    score_predictions(
        run.predictions.clone(),
        records,
        Some(run.theta_updates),
        cfg.with_trace.then(|| run.trace.clone()),
        runtime_ms,
    )
}

/// Run one named model end to end.
pub fn run_model(records: &[SeriesRecord], cfg: &RunConfig, id: ModelId) -> Result<ModelScore> {
    let started = Instant::now();
    let (predictions, theta_updates, trace) = match id {
        ModelId::Pmgp => {
            let run = run_pmgp(records, cfg)?;
            let trace = cfg.with_trace.then_some(run.trace);
            (run.predictions, Some(run.theta_updates), trace)
        }
        ModelId::Ar(variant, order) => (run_ar_baseline(records, variant, order)?, None, None),
    };
    let runtime_ms = cfg
        .with_timing
        .then(|| started.elapsed().as_secs_f64() * 1e3);
    score_predictions(predictions, records, theta_updates, trace, runtime_ms)
}

/// Run every named model, isolating per-model failures. Model names must
/// parse — an unknown name is a configuration error and aborts.
pub fn run_benchmark(
    records: &[SeriesRecord],
    cfg: &RunConfig,
    models: &[String],
) -> Result<Vec<ModelReport>> {
    cfg.validate()?;
    require_min_len(records, 3)?;
    let ids: Vec<ModelId> = models
        .iter()
        .map(|name| parse_model(name))
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(models.len());
    for (name, id) in models.iter().zip(ids) {
        let outcome = run_model(records, cfg, id).map_err(|e| e.to_string());
        if let Err(msg) = &outcome {
            log::warn!("model {name} failed: {msg}");
        }
        reports.push(ModelReport {
            model: name.clone(),
            outcome,
        });
    }
    Ok(reports)
}

/// Log likelihood of the series under the initial hyperparameters, via
/// the filter's running sum or the dense Gram-matrix evaluation.
pub fn run_loglik(records: &[SeriesRecord], cfg: &RunConfig, exact: bool) -> Result<f64> {
    cfg.validate()?;
    require_min_len(records, 2)?;

    let (y_mean, y_std) = population_std(records.iter().map(|r| r.y));
    if !(y_std > 0.0) {
        return Err(Error::DegenerateSeries(
            "series is constant; cannot z-score".into(),
        ));
    }
    let t_start = records[0].t;
    let fs = match cfg.fs_override {
        Some(v) => v,
        None => estimate_fs(records)?,
    };
    let times = Array1::from_iter(records.iter().map(|r| r.t - t_start));
    let zs = Array1::from_iter(records.iter().map(|r| (r.y - y_mean) / y_std));

    let theta = HyperParams::init(cfg.trend, cfg.components, fs)?;
    if exact {
        let prob = GPRProblem::new(
            times,
            zs,
            theta.kernel(cfg.p)?,
            theta.trend(cfg.trend)?,
            theta.sigma(),
        )?;
        log_marginal_likelihood(&prob)
    } else {
        let theta_fixed = theta.clone();
        let mut state = FilterState::new(theta, cfg.trend, cfg.p)?;
        let mut total = 0.0;
        for (&t, &z) in times.iter().zip(zs.iter()) {
            total += pmgp::filter::local_loglik(&state, t, z, &theta_fixed)?;
            let (next, _) = pmgp::filter::update(&state, t, z)?;
            state = next;
        }
        Ok(total)
    }
}

/// Which knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    C,
    Components,
}

pub fn parse_sweep_param(s: &str) -> Result<SweepParam> {
    match s {
        "c" => Ok(SweepParam::C),
        "components" => Ok(SweepParam::Components),
        other => Err(Error::Input(format!(
            "unknown sweep parameter `{other}` (expected `c` or `components`)"
        ))),
    }
}

/// Default sweep grid for a parameter.
pub fn default_sweep_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::C => vec![0.1, 1.0, 10.0, 100.0, 1000.0],
        SweepParam::Components => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
    }
}

/// One sweep point: the value tried and the GP model's score at it.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<(f64, f64), String>,
}

/// Rerun the GP model across a grid of one parameter, isolating failures
/// per point just like the benchmark isolates them per model.
pub fn run_sweep(
    records: &[SeriesRecord],
    cfg: &RunConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Input("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut point_cfg = cfg.clone();
        match param {
            SweepParam::C => point_cfg.c = value,
            SweepParam::Components => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Input(format!(
                        "component counts must be positive integers, got {value}"
                    )));
                }
                point_cfg.components = value as usize;
            }
        }
        let outcome = point_cfg
            .validate()
            .and_then(|()| run_model(records, &point_cfg, ModelId::Pmgp))
            .map(|score| (score.nmae, score.nmae_std))
            .map_err(|e| e.to_string());
        rows.push(SweepRow { value, outcome });
    }
    Ok(rows)
}
