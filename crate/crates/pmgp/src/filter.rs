//! Exact Kalman recursions for the spectral Matérn state-space model.
//!
//! Each incoming observation costs O(d²) regardless of how many came
//! before: the model of [`crate::statespace`] collapses the past into the
//! carried posterior (m, P). The one-step predictive of the observation at
//! time t is N(m(t) + Hᵀm⁻, v̄) with v̄ = HᵀP⁻H + σ², and that scalar
//! Gaussian is both the forecast and the per-step term of the exact log
//! marginal likelihood.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::{HyperParams, TrendKind};
use crate::scalar::{sc, Scalar};
use crate::statespace::{assemble, symmetrize, AssembledModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveKind {
    /// Next observation (includes measurement noise).
    Observation,
    /// Latent process value at a future time (no measurement noise).
    LatentForecast,
    /// Latent process value at the last filtered time.
    LatentFiltered,
}

/// Scalar Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictive<T> {
    pub mean: T,
    pub var: T,
    pub kind: PredictiveKind,
}

/// Posterior state of the filter after zero or more updates.
///
/// Holds the posterior mean and covariance of the stacked derivative state,
/// the hyperparameters currently in force, and enough shape information to
/// rebuild the model (trend kind and Matérn smoothness).
#[derive(Debug, Clone)]
pub struct FilterState<T> {
    pub m: Array1<T>,
    pub p_cov: Array2<T>,
    pub t_last: Option<T>,
    /// Number of observations absorbed so far.
    pub k: usize,
    pub theta: HyperParams<T>,
    pub trend_kind: TrendKind,
    /// Matérn smoothness p shared by all mixture components.
    pub smoothness: usize,
}

impl<T: Scalar> FilterState<T> {
    /// Fresh, uninitialized state: zero mean and the stationary prior
    /// covariance under `theta`.
    pub fn new(theta: HyperParams<T>, trend_kind: TrendKind, smoothness: usize) -> Result<Self> {
        if theta.beta.len() != trend_kind.n_coeffs() {
            return Err(Error::Dimension(format!(
                "trend kind needs {} coefficients, hyperparameters carry {}",
                trend_kind.n_coeffs(),
                theta.beta.len()
            )));
        }
        let kern = theta.kernel(smoothness)?;
        let prior = assemble(None, T::zero(), &kern)?;
        Ok(Self {
            m: Array1::zeros(prior.d),
            p_cov: prior.k_cond,
            t_last: None,
            k: 0,
            theta,
            trend_kind,
            smoothness,
        })
    }

    pub fn initialized(&self) -> bool {
        self.t_last.is_some()
    }

    /// State dimension 2(p+1)(n+1).
    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// Everything needed for one prediction/update at time t under `theta`.
/// The carried (m, P) are taken from `state` as-is; the model quantities
/// are rebuilt from `theta`.
pub(crate) struct StepQuantities<T> {
    pub model: AssembledModel<T>,
    pub m_minus: Array1<T>,
    pub p_minus: Array2<T>,
    /// One-step predictive mean m(t) + Hᵀm⁻.
    pub mbar: T,
    /// One-step predictive variance HᵀP⁻H + σ².
    pub vbar: T,
    pub sigma2: T,
}

pub(crate) fn step_quantities<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    theta: &HyperParams<T>,
) -> Result<StepQuantities<T>> {
    let kern = theta.kernel(state.smoothness)?;
    if kern.state_dim() != state.dim() {
        return Err(Error::Dimension(
            "hyperparameters change the state dimension mid-stream".into(),
        ));
    }
    // For an uninitialized state `assemble` yields F = 0 and K_cond equal to
    // the stationary prior, so the same formulas below produce m⁻ = 0 and
    // P⁻ = prior without a special case.
    let model = assemble(state.t_last, t, &kern)?;
    let m_minus = model.f.dot(&state.m);
    let mut p_minus = model.f.dot(&state.p_cov).dot(&model.f.t()) + &model.k_cond;
    symmetrize(&mut p_minus);
    let sigma = theta.sigma();
    let sigma2 = sigma * sigma;
    let vbar = model.h.dot(&p_minus.dot(&model.h)) + sigma2;
    if !(vbar.is_finite() && vbar > T::zero()) {
        return Err(Error::Conditioning(format!(
            "one-step predictive variance is not positive: {vbar}"
        )));
    }
    let trend = theta.trend(state.trend_kind)?;
    let mbar = trend.eval(t) + model.h.dot(&m_minus);
    Ok(StepQuantities { model, m_minus, p_minus, mbar, vbar, sigma2 })
}

/// Prediction step: propagate the posterior to time t without observing.
/// An uninitialized state returns the stationary prior at any t.
pub fn predict_state<T: Scalar>(state: &FilterState<T>, t: T) -> Result<(Array1<T>, Array2<T>)> {
    let q = step_quantities(state, t, &state.theta)?;
    Ok((q.m_minus, q.p_minus))
}

/// Update step: absorb observation y at time t.
///
/// Returns the new posterior state together with the one-step predictive
/// N(m(t) + Hᵀm⁻, v̄) of the observation — the forecast made *before* y was
/// seen, which is what gets scored.
pub fn update<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    y: T,
) -> Result<(FilterState<T>, Predictive<T>)> {
    if !y.is_finite() {
        return Err(Error::Input(format!("observation must be finite, got {y}")));
    }
    let q = step_quantities(state, t, &state.theta)?;
    let e = y - q.mbar;
    let ph = q.p_minus.dot(&q.model.h);
    let g = &ph / q.vbar;
    let m = &q.m_minus + &(&g * e);
    let d = state.dim();
    let mut p = q.p_minus;
    for i in 0..d {
        for j in 0..d {
            p[[i, j]] -= q.vbar * g[i] * g[j];
        }
    }
    symmetrize(&mut p);
    let new_state = FilterState {
        m,
        p_cov: p,
        t_last: Some(t),
        k: state.k + 1,
        theta: state.theta.clone(),
        trend_kind: state.trend_kind,
        smoothness: state.smoothness,
    };
    let predictive = Predictive { mean: q.mbar, var: q.vbar, kind: PredictiveKind::Observation };
    Ok((new_state, predictive))
}

/// Forecast at a future time t without mutating the state, so several
/// horizons can be queried from the same posterior.
///
/// Returns (observation predictive, latent predictive); the latent variance
/// is v̄ − σ², clamped at zero if roundoff pushes it below.
pub fn forecast<T: Scalar>(state: &FilterState<T>, t: T) -> Result<(Predictive<T>, Predictive<T>)> {
    let q = step_quantities(state, t, &state.theta)?;
    let mut latent_var = q.vbar - q.sigma2;
    if latent_var < T::zero() {
        log::warn!("latent forecast variance {latent_var} rounded below zero; clamping");
        latent_var = T::zero();
    }
    Ok((
        Predictive { mean: q.mbar, var: q.vbar, kind: PredictiveKind::Observation },
        Predictive { mean: q.mbar, var: latent_var, kind: PredictiveKind::LatentForecast },
    ))
}

/// Latent posterior at the last filtered time.
pub fn filtered_latent<T: Scalar>(state: &FilterState<T>) -> Result<Predictive<T>> {
    let t_last = state
        .t_last
        .ok_or_else(|| Error::Input("filter has not absorbed any observation yet".into()))?;
    let kern = state.theta.kernel(state.smoothness)?;
    let h = crate::statespace::measurement_vector(&kern, t_last);
    let trend = state.theta.trend(state.trend_kind)?;
    let mean = trend.eval(t_last) + h.dot(&state.m);
    let var = h.dot(&state.p_cov.dot(&h)).max(T::zero());
    Ok(Predictive { mean, var, kind: PredictiveKind::LatentFiltered })
}

/// Log-density of y under the one-step predictive at time t, with the model
/// quantities rebuilt from the *supplied* `theta` while the carried (m, P)
/// stay fixed. This is the per-step utility the online learner ascends, and
/// summed over a series it reproduces the exact GP log marginal likelihood.
pub fn local_loglik<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    y: T,
    theta: &HyperParams<T>,
) -> Result<T> {
    if !y.is_finite() {
        return Err(Error::Input(format!("observation must be finite, got {y}")));
    }
    let q = step_quantities(state, t, theta)?;
    Ok(gaussian_loglik(y, q.mbar, q.vbar))
}

pub(crate) fn gaussian_loglik<T: Scalar>(y: T, mean: T, var: T) -> T {
    let two = sc::<T>(2.0);
    let e = y - mean;
    -(two * T::PI() * var).ln() / two - e * e / (two * var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ComponentParams;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + b.abs()), "expected {b}, got {a}");
    }

    /// Single unmodulated exponential component: k0, l, sigma given directly.
    fn simple_theta(k0: f64, l: f64, sigma: f64) -> HyperParams<f64> {
        HyperParams {
            beta: ndarray::arr1(&[0.0]),
            log_sigma: sigma.ln(),
            components: vec![ComponentParams {
                log_k0: k0.ln(),
                log_l: l.ln(),
                log_omega: f64::NEG_INFINITY, // ω = 0
            }],
        }
    }

    #[test]
    fn first_observation_matches_scalar_gp() {
        let theta = simple_theta(1.0, 1.0, 1.0);
        let state = FilterState::new(theta, TrendKind::Constant, 0).unwrap();
        assert!(!state.initialized());
        assert_eq!(state.dim(), 2);

        let (st, pred) = update(&state, 0.0, 2.0).unwrap();
        // prior predictive: N(0, k0 + σ²)
        close(pred.mean, 0.0, 1e-15);
        close(pred.var, 2.0, 1e-14);
        // posterior mean k0/(k0+σ²)·y = 1 on the cosine copy, 0 on the sine copy
        close(st.m[0], 1.0, 1e-12);
        close(st.m[1], 0.0, 1e-12);
        close(st.p_cov[[0, 0]], 0.5, 1e-12);
        close(st.p_cov[[1, 1]], 1.0, 1e-12);
        close(st.p_cov[[0, 1]], 0.0, 1e-12);
        assert_eq!(st.k, 1);
        assert!(st.initialized());
    }

    #[test]
    fn prediction_decays_like_ou() {
        let theta = simple_theta(1.0, 1.0, 1.0);
        let state = FilterState::new(theta, TrendKind::Constant, 0).unwrap();
        let (st, _) = update(&state, 0.0, 2.0).unwrap();
        for &dt in &[0.3, 1.0, 2.5] {
            let (m_minus, _) = predict_state(&st, dt).unwrap();
            close(m_minus[0], (-dt).exp(), 1e-12);
        }
        // infinite-lag limit: back to the prior
        let (m_inf, p_inf) = predict_state(&st, 1e9).unwrap();
        close(m_inf[0], 0.0, 1e-12);
        close(p_inf[[0, 0]], 1.0, 1e-10);
    }

    #[test]
    fn uninitialized_prediction_is_prior() {
        let theta = simple_theta(1.7, 0.8, 0.5);
        let state = FilterState::new(theta, TrendKind::Constant, 2).unwrap();
        let (m_minus, p_minus) = predict_state(&state, 123.0).unwrap();
        assert!(m_minus.iter().all(|&x| x == 0.0));
        close(p_minus[[0, 0]], 1.7, 1e-12);
    }

    #[test]
    fn enormous_noise_freezes_the_mean() {
        let theta = simple_theta(1.0, 1.0, 1e6);
        let state = FilterState::new(theta, TrendKind::Constant, 1).unwrap();
        let (st, _) = update(&state, 0.0, 5.0).unwrap();
        for &x in st.m.iter() {
            assert!(x.abs() < 1e-6, "mean moved by {x} despite huge noise");
        }
    }

    #[test]
    fn exact_prediction_leaves_mean_but_shrinks_variance() {
        let theta = simple_theta(1.0, 1.0, 0.7);
        let state = FilterState::new(theta, TrendKind::Constant, 1).unwrap();
        let (st1, _) = update(&state, 0.0, 1.3).unwrap();
        let (obs, _) = forecast(&st1, 0.5).unwrap();
        let (m_minus, p_minus) = predict_state(&st1, 0.5).unwrap();
        let (st2, _) = update(&st1, 0.5, obs.mean).unwrap();
        for i in 0..st2.dim() {
            close(st2.m[i], m_minus[i], 1e-12);
        }
        assert!(st2.p_cov[[0, 0]] < p_minus[[0, 0]]);
    }

    #[test]
    fn forecast_latent_variance_identity() {
        let theta = simple_theta(2.0, 1.5, 0.9);
        let state = FilterState::new(theta, TrendKind::Constant, 2).unwrap();
        // prior predictive: var = Σk0 + σ²
        let (obs, latent) = forecast(&state, 4.2).unwrap();
        close(obs.var, 2.0 + 0.81, 1e-12);
        assert_eq!(latent.var, obs.var - 0.81);
        let (st, _) = update(&state, 0.0, 0.4).unwrap();
        let (obs2, latent2) = forecast(&st, 1.0).unwrap();
        assert_eq!(latent2.var, obs2.var - 0.81);
        assert_eq!(obs2.kind, PredictiveKind::Observation);
        assert_eq!(latent2.kind, PredictiveKind::LatentForecast);
    }

    #[test]
    fn posterior_contraction_and_variance_floor() {
        let theta = simple_theta(1.2, 0.9, 0.4);
        let sigma2 = 0.16;
        let mut state = FilterState::new(theta, TrendKind::Constant, 2).unwrap();
        let ys = [0.5, -0.1, 0.8, 0.3, -0.6, 0.9, 0.2];
        for (i, &y) in ys.iter().enumerate() {
            let t = i as f64 * 0.4;
            let q = step_quantities(&state, t, &state.theta).unwrap();
            assert!(q.vbar >= sigma2 * (1.0 - 1e-10), "variance floor violated: {}", q.vbar);
            let (st, pred) = update(&state, t, y).unwrap();
            // filtered observation variance never exceeds the predictive one
            let v_filt = q.model.h.dot(&st.p_cov.dot(&q.model.h));
            assert!(v_filt <= q.vbar - sigma2 + 1e-12);
            assert!(pred.var >= sigma2 * (1.0 - 1e-10));
            state = st;
        }
        let fl = filtered_latent(&state).unwrap();
        assert_eq!(fl.kind, PredictiveKind::LatentFiltered);
        assert!(fl.var >= 0.0 && fl.var.is_finite());
    }

    #[test]
    fn local_loglik_standard_values() {
        // v̄ = 1 at y = m̄ gives −log(2π)/2
        let theta = simple_theta(0.5, 1.0, 0.5f64.sqrt());
        let state = FilterState::new(theta, TrendKind::Constant, 0).unwrap();
        let ll = local_loglik(&state, 0.0, 0.0, &state.theta).unwrap();
        close(ll, -0.918939, 1e-5);
        close(ll, -(2.0 * std::f64::consts::PI).ln() / 2.0, 1e-13);

        // v̄ = 1/(2π) at y = m̄ gives exactly 0
        let quarter = 1.0 / (4.0 * std::f64::consts::PI);
        let theta2 = simple_theta(quarter, 1.0, quarter.sqrt());
        let state2 = FilterState::new(theta2, TrendKind::Constant, 0).unwrap();
        let ll2 = local_loglik(&state2, 0.0, 0.0, &state2.theta).unwrap();
        close(ll2, 0.0, 1e-13);
    }

    #[test]
    fn local_loglik_uses_supplied_theta() {
        let theta = simple_theta(1.0, 1.0, 1.0);
        let mut state = FilterState::new(theta.clone(), TrendKind::Constant, 1).unwrap();
        let (st, _) = update(&state, 0.0, 1.0).unwrap();
        state = st;
        let base = local_loglik(&state, 1.0, 0.7, &state.theta).unwrap();
        let mut other = theta.clone();
        other.log_sigma = 1.5f64.ln();
        let alt = local_loglik(&state, 1.0, 0.7, &other).unwrap();
        assert!(base.is_finite() && alt.is_finite());
        assert_ne!(base, alt);
    }

    #[test]
    fn ordering_and_input_errors() {
        let theta = simple_theta(1.0, 1.0, 1.0);
        let state = FilterState::new(theta, TrendKind::Constant, 0).unwrap();
        let (st, _) = update(&state, 1.0, 0.5).unwrap();
        assert!(matches!(update(&st, 1.0, 0.3), Err(Error::Ordering(_))));
        assert!(matches!(update(&st, 0.5, 0.3), Err(Error::Ordering(_))));
        assert!(matches!(predict_state(&st, 1.0), Err(Error::Ordering(_))));
        assert!(matches!(update(&st, 2.0, f64::NAN), Err(Error::Input(_))));
        assert!(matches!(
            local_loglik(&st, 2.0, f64::INFINITY, &st.theta),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn trend_enters_the_predictive_mean() {
        let mut theta = simple_theta(1.0, 1.0, 1.0);
        theta.beta = ndarray::arr1(&[2.0, 3.0]);
        let state = FilterState::new(theta, TrendKind::Linear, 1).unwrap();
        let (obs, _) = forecast(&state, 2.0).unwrap();
        close(obs.mean, 8.0, 1e-13);
    }

    #[test]
    fn f32_filter_smoke() {
        let theta = HyperParams::<f32> {
            beta: ndarray::arr1(&[0.0f32]),
            log_sigma: 0.0,
            components: vec![ComponentParams { log_k0: 0.0, log_l: 0.0, log_omega: 0.0 }],
        };
        let state = FilterState::new(theta, TrendKind::Constant, 1).unwrap();
        let (st, pred) = update(&state, 0.0f32, 1.0).unwrap();
        assert!(pred.var > 0.0 && st.m.iter().all(|x| x.is_finite()));
    }
}
