//! Online hyperparameter adaptation.
//!
//! Each incoming observation is first scored under the current θ; if the
//! local predictive log-density falls below −ε, a passive-aggressive step
//! moves θ along the analytic gradient of that log-density. The gradient
//! treats the carried filter state (m, P) as constant — sensitivities are
//! local to the step, never propagated recursively.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::filter::{gaussian_loglik, step_quantities, FilterState, Predictive};
use crate::kernels::{HyperParams, PreparedMatern};
use crate::scalar::{sc, Scalar};
use crate::statespace::{
    cholesky_psd_recorded, cross_cov_dlogl_prepared, cross_cov_prepared, solve_chol_mat,
    symmetrize, FactorMethod,
};

/// Tuning of the passive-aggressive update.
#[derive(Debug, Clone)]
pub struct PAConfig<T> {
    /// Normalized aggressiveness, > 0.
    pub c: T,
    /// Tolerance ε ≥ 0: no update fires while the local log-density stays
    /// above −ε.
    pub eps: T,
    /// Floor for the squared-norm factor in c_k, > 0. Without it the
    /// all-zero start has c_k = 0 and learning never unfreezes.
    pub theta_norm_floor: T,
    /// Optional anchor for the squared-norm factor: c_k uses ‖θ − ref‖²
    /// instead of ‖θ‖², so the normalization measures drift from the start
    /// rather than distance from the origin. `None` means the origin.
    pub theta_ref: Option<Array1<T>>,
}

impl<T: Scalar> PAConfig<T> {
    pub fn new(c: T, eps: T) -> Result<Self> {
        let cfg = Self { c, eps, theta_norm_floor: T::one(), theta_ref: None };
        cfg.validate_scalars()?;
        Ok(cfg)
    }

    pub fn with_reference(mut self, theta_ref: Array1<T>) -> Self {
        self.theta_ref = Some(theta_ref);
        self
    }

    fn validate_scalars(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > T::zero()) {
            return Err(Error::Domain(format!("aggressiveness c must be positive, got {}", self.c)));
        }
        if !(self.eps.is_finite() && self.eps >= T::zero()) {
            return Err(Error::Domain(format!("tolerance eps must be nonnegative, got {}", self.eps)));
        }
        if !(self.theta_norm_floor.is_finite() && self.theta_norm_floor > T::zero()) {
            return Err(Error::Domain(format!(
                "theta_norm_floor must be positive, got {}",
                self.theta_norm_floor
            )));
        }
        Ok(())
    }

    fn validate(&self, flat_len: usize) -> Result<()> {
        self.validate_scalars()?;
        if let Some(r) = &self.theta_ref {
            if r.len() != flat_len {
                return Err(Error::Dimension(format!(
                    "theta_ref has length {}, flat θ has length {flat_len}",
                    r.len()
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("theta_ref entries must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Per-coordinate sensitivities of the one-step predictive, in flat-θ order,
/// plus the assembled gradient of the local log-density.
#[derive(Debug, Clone)]
pub struct GradientBundle<T> {
    pub dmbar: Array1<T>,
    pub dvbar: Array1<T>,
    pub grad: Array1<T>,
}

/// One row of the θ trace: the parameters in force after step k, the local
/// log-density that drove the update (evaluated at the previous θ; `None`
/// when its evaluation failed numerically and the step stayed passive), and
/// whether the update fired.
#[derive(Debug, Clone)]
pub struct ThetaTraceEntry<T> {
    pub k: usize,
    pub t: T,
    pub theta: Array1<T>,
    pub local_loglik: Option<T>,
    pub fired: bool,
}

/// Gradient of the local log-density at (t, y) with respect to every flat-θ
/// coordinate, with the carried (m, P) held constant.
pub fn grad_local_loglik<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    y: T,
    theta: &HyperParams<T>,
) -> Result<GradientBundle<T>> {
    Ok(loglik_and_gradient(state, t, y, theta)?.1)
}

pub(crate) fn loglik_and_gradient<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    y: T,
    theta: &HyperParams<T>,
) -> Result<(T, GradientBundle<T>)> {
    if !y.is_finite() {
        return Err(Error::Input(format!("observation must be finite, got {y}")));
    }
    let q = step_quantities(state, t, theta)?;
    let kern = theta.kernel(state.smoothness)?;
    let pp = state.smoothness + 1;
    let d = state.dim();
    let n_beta = theta.beta.len();
    let flat_len = theta.flat_len();
    let mut dmbar = Array1::<T>::zeros(flat_len);
    let mut dvbar = Array1::<T>::zeros(flat_len);

    // Trend coefficients move only the mean; the noise scale only the
    // variance.
    let trend = theta.trend(state.trend_kind)?;
    let db = trend.dbeta(t);
    for (j, &g) in db.iter().enumerate() {
        dmbar[j] = g;
    }
    dvbar[n_beta] = sc::<T>(2.0) * q.sigma2;

    let h = &q.model.h;
    let p_minus_h = q.p_minus.dot(h);

    for (i, comp) in kern.components().iter().enumerate() {
        let base = n_beta + 1 + 3 * i;
        let prep = PreparedMatern::new(comp);
        let off0 = 2 * i * pp;
        let kc_blk = q.model.k_cond.slice(s![off0..off0 + pp, off0..off0 + pp]).to_owned();

        // log k0 channel: every covariance block is linear in k0, so
        // ∂K/∂log k0 = K, which makes ∂F vanish identically and leaves
        // ∂K_cond = K_cond.
        let df_k0 = Array2::<T>::zeros((pp, pp));
        let dkc_k0 = kc_blk;

        // log l channel: differentiate the conditioning.
        // ∂F = (∂K_uv − F·∂K_vv)·K_vv⁻¹
        // ∂K_cond = ∂K_uu − ∂K_uv·Fᵀ − F·∂K_uvᵀ + F·∂K_vv·Fᵀ
        let (df_l, dkc_l) = match state.t_last {
            None => {
                let dk00 = cross_cov_dlogl_prepared(&prep, T::zero(), T::zero());
                (Array2::<T>::zeros((pp, pp)), dk00)
            }
            Some(tp) => {
                let fblk = q.model.f.slice(s![off0..off0 + pp, off0..off0 + pp]).to_owned();
                let k00 = cross_cov_prepared(&prep, T::zero(), T::zero());
                let dk00 = cross_cov_dlogl_prepared(&prep, T::zero(), T::zero());
                let dkuv = cross_cov_dlogl_prepared(&prep, t, tp);
                let (lvv, method) = cholesky_psd_recorded(&k00)?;
                if method == FactorMethod::EigenClamped {
                    return Err(Error::Conditioning(
                        "stationary marginal covariance is numerically singular; cannot \
                         differentiate the transition"
                            .into(),
                    ));
                }
                let rhs = &dkuv - &fblk.dot(&dk00);
                let df = solve_chol_mat(&lvv, &rhs.t().to_owned()).t().to_owned();
                let mut dkc = &(&dk00 - &dkuv.dot(&fblk.t())) - &fblk.dot(&dkuv.t())
                    + fblk.dot(&dk00).dot(&fblk.t());
                symmetrize(&mut dkc);
                (df, dkc)
            }
        };

        for (idx, df_blk, dkc_blk) in [(base, df_k0, dkc_k0), (base + 1, df_l, dkc_l)] {
            let mut df_full = Array2::<T>::zeros((d, d));
            let mut dkc_full = Array2::<T>::zeros((d, d));
            for copy in 0..2 {
                let off = (2 * i + copy) * pp;
                df_full.slice_mut(s![off..off + pp, off..off + pp]).assign(&df_blk);
                dkc_full.slice_mut(s![off..off + pp, off..off + pp]).assign(&dkc_blk);
            }
            // ∂P⁻ = ∂F·P·Fᵀ + F·P·∂Fᵀ + ∂K_cond
            let a = df_full.dot(&state.p_cov).dot(&q.model.f.t());
            let dp = &(&a + &a.t()) + &dkc_full;
            dvbar[idx] = h.dot(&dp.dot(h));
            dmbar[idx] = h.dot(&df_full.dot(&state.m));
        }

        // log ω channel: the transition is frequency-independent; only the
        // measurement vector moves.
        let om = comp.omega;
        let mut dh = Array1::<T>::zeros(d);
        dh[off0] = -t * om * (om * t).sin();
        dh[off0 + pp] = t * om * (om * t).cos();
        dvbar[base + 2] = sc::<T>(2.0) * dh.dot(&p_minus_h);
        dmbar[base + 2] = dh.dot(&q.m_minus);
    }

    let two = sc::<T>(2.0);
    let e = y - q.mbar;
    let a_v = -T::one() / (two * q.vbar) + e * e / (two * q.vbar * q.vbar);
    let a_m = e / q.vbar;
    let grad = &dvbar * a_v + &dmbar * a_m;
    let value = gaussian_loglik(y, q.mbar, q.vbar);

    if !value.is_finite()
        || grad.iter().any(|g| !g.is_finite())
        || dmbar.iter().any(|g| !g.is_finite())
        || dvbar.iter().any(|g| !g.is_finite())
    {
        return Err(Error::Conditioning(
            "local log-density gradient overflowed to a non-finite value".into(),
        ));
    }
    Ok((value, GradientBundle { dmbar, dvbar, grad }))
}

/// Passive-aggressive update on the flat vector. Assumes `cfg` validated and
/// inputs finite; returns the new vector and whether the update fired.
fn pa_update_flat<T: Scalar>(
    flat: &Array1<T>,
    l_val: T,
    grad: &Array1<T>,
    cfg: &PAConfig<T>,
) -> (Array1<T>, bool) {
    if l_val >= -cfg.eps {
        return (flat.clone(), false);
    }
    let gnorm2 = grad.dot(grad);
    if gnorm2 == T::zero() {
        return (flat.clone(), false);
    }
    let diff = match &cfg.theta_ref {
        Some(r) => flat - r,
        None => flat.clone(),
    };
    let norm2 = diff.dot(&diff).max(cfg.theta_norm_floor);
    let gap = cfg.eps + l_val; // negative when the update fires
    let c_k = cfg.c * norm2 / (gap * gap);
    let scale = c_k * (-cfg.eps - l_val) / (T::one() + c_k * gnorm2);
    let cand = flat + &(grad * scale);
    if cand.iter().any(|x| !x.is_finite()) {
        log::warn!("hyperparameter update produced non-finite values; keeping previous θ");
        return (flat.clone(), false);
    }
    (cand, true)
}

/// Passive-aggressive hyperparameter update.
///
/// Passive whenever L ≥ −ε (θ returned bitwise unchanged). Otherwise
/// θ_new = θ + c_k·(−ε−L)/(1 + c_k‖g‖²)·g with
/// c_k = c·max(‖θ − ref‖², floor)/(ε+L)². A candidate with non-finite
/// entries is rejected (θ unchanged, warning logged).
pub fn pa_update<T: Scalar>(
    theta_prev: &HyperParams<T>,
    l_val: T,
    grad: &Array1<T>,
    cfg: &PAConfig<T>,
) -> Result<HyperParams<T>> {
    cfg.validate(theta_prev.flat_len())?;
    if !l_val.is_finite() {
        return Err(Error::Input(format!("local log-likelihood must be finite, got {l_val}")));
    }
    if grad.len() != theta_prev.flat_len() {
        return Err(Error::Dimension(format!(
            "gradient has length {}, flat θ has length {}",
            grad.len(),
            theta_prev.flat_len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Input("gradient entries must be finite".into()));
    }
    let flat = theta_prev.pack();
    let (new_flat, _) = pa_update_flat(&flat, l_val, grad, cfg);
    HyperParams::unpack(new_flat.view(), theta_prev.beta.len(), theta_prev.components.len())
}

/// One full streaming step: score the incoming (t, y) under the current θ,
/// adapt θ, rebuild the model under the new θ, then run the prediction and
/// update steps. The returned predictive is the pre-update forecast under
/// the *new* θ — the quantity that gets scored.
///
/// A numerical failure inside the gradient evaluation downgrades the step
/// to passive (with a warning) instead of killing the stream; every other
/// error propagates.
pub fn step<T: Scalar>(
    state: &FilterState<T>,
    t: T,
    y: T,
    cfg: &PAConfig<T>,
) -> Result<(FilterState<T>, Predictive<T>, ThetaTraceEntry<T>)> {
    cfg.validate(state.theta.flat_len())?;
    let (theta_new, local_ll, fired) = match loglik_and_gradient(state, t, y, &state.theta) {
        Ok((l_val, bundle)) => {
            let flat = state.theta.pack();
            let (new_flat, fired) = pa_update_flat(&flat, l_val, &bundle.grad, cfg);
            let th = HyperParams::unpack(
                new_flat.view(),
                state.theta.beta.len(),
                state.theta.components.len(),
            )?;
            (th, Some(l_val), fired)
        }
        Err(e) if e.is_numerical() => {
            log::warn!("skipping hyperparameter update at t={t}: {e}");
            (state.theta.clone(), None, false)
        }
        Err(e) => return Err(e),
    };
    let mut staged = state.clone();
    staged.theta = theta_new;
    let (new_state, predictive) = crate::filter::update(&staged, t, y)?;
    let entry = ThetaTraceEntry {
        k: new_state.k,
        t,
        theta: new_state.theta.pack(),
        local_loglik: local_ll,
        fired,
    };
    Ok((new_state, predictive, entry))
}
