//! Fully-online autoregressive baselines and the NMAE metric.
//!
//! All four baselines predict the next value as a linear function of the
//! last k observations (zero-padded at the start, weights initialized to
//! zero): three passive-aggressive regression variants and a conjugate
//! Bayesian linear regression with an N(0, I) prior on the weights.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::statespace::symmetrize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArVariant {
    Pa,
    PaI,
    PaII,
    Blr,
}

/// Online AR(k) predictor state.
#[derive(Debug, Clone)]
pub struct ARModel<T> {
    pub order: usize,
    /// Regression weights; for BLR this is the posterior mean.
    pub weights: Array1<T>,
    pub variant: ArVariant,
    /// ε-insensitivity of the hinge loss (PA family).
    pub eps_insensitive: T,
    /// Aggressiveness bound C (PA-I / PA-II only).
    pub c: Option<T>,
    /// Observation noise std (BLR only).
    pub noise_std: Option<T>,
    /// Posterior covariance of the weights (BLR only).
    pub cov: Option<Array2<T>>,
}

impl<T: Scalar> ARModel<T> {
    fn base(order: usize, variant: ArVariant, eps_insensitive: T) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("autoregressive order must be at least 1".into()));
        }
        if !(eps_insensitive.is_finite() && eps_insensitive >= T::zero()) {
            return Err(Error::Domain(format!(
                "insensitivity must be nonnegative, got {eps_insensitive}"
            )));
        }
        Ok(Self {
            order,
            weights: Array1::zeros(order),
            variant,
            eps_insensitive,
            c: None,
            noise_std: None,
            cov: None,
        })
    }

    pub fn pa(order: usize, eps_insensitive: T) -> Result<Self> {
        Self::base(order, ArVariant::Pa, eps_insensitive)
    }

    pub fn pa_i(order: usize, c: T, eps_insensitive: T) -> Result<Self> {
        if !(c.is_finite() && c > T::zero()) {
            return Err(Error::Domain(format!("aggressiveness C must be positive, got {c}")));
        }
        let mut m = Self::base(order, ArVariant::PaI, eps_insensitive)?;
        m.c = Some(c);
        Ok(m)
    }

    pub fn pa_ii(order: usize, c: T, eps_insensitive: T) -> Result<Self> {
        if !(c.is_finite() && c > T::zero()) {
            return Err(Error::Domain(format!("aggressiveness C must be positive, got {c}")));
        }
        let mut m = Self::base(order, ArVariant::PaII, eps_insensitive)?;
        m.c = Some(c);
        Ok(m)
    }

    pub fn blr(order: usize, noise_std: T) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std > T::zero()) {
            return Err(Error::Domain(format!("noise std must be positive, got {noise_std}")));
        }
        let mut m = Self::base(order, ArVariant::Blr, T::zero())?;
        m.noise_std = Some(noise_std);
        m.cov = Some(Array2::eye(order));
        Ok(m)
    }

    /// Point prediction wᵀx (posterior-mean prediction for BLR).
    pub fn predict(&self, x: &Array1<T>) -> Result<T> {
        if x.len() != self.order {
            return Err(Error::Dimension(format!(
                "feature vector has length {}, model order is {}",
                x.len(),
                self.order
            )));
        }
        Ok(self.weights.dot(x))
    }
}

/// Feature vector from the observation history: the last `order` values,
/// most recent first, zero-padded when the history is shorter.
pub fn ar_features<T: Scalar>(history: &[T], order: usize) -> Array1<T> {
    let mut x = Array1::<T>::zeros(order);
    for (i, slot) in x.iter_mut().enumerate() {
        if i < history.len() {
            *slot = history[history.len() - 1 - i];
        }
    }
    x
}

fn check_features<T: Scalar>(model: &ARModel<T>, x: &Array1<T>, y: T) -> Result<()> {
    if x.len() != model.order {
        return Err(Error::Dimension(format!(
            "feature vector has length {}, model order is {}",
            x.len(),
            model.order
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return Err(Error::Input("features and target must be finite".into()));
    }
    Ok(())
}

/// Passive-aggressive regression update (variants PA, PA-I, PA-II) under the
/// ε-insensitive hinge loss ℓ = max(|y − wᵀx| − ε, 0):
/// τ = ℓ/‖x‖² (PA), min(C, ℓ/‖x‖²) (PA-I), ℓ/(‖x‖² + 1/(2C)) (PA-II), and
/// w ← w + sign(y − wᵀx)·τ·x.
pub fn pa_regress_update<T: Scalar>(model: ARModel<T>, x: &Array1<T>, y: T) -> Result<ARModel<T>> {
    if model.variant == ArVariant::Blr {
        return Err(Error::Input("pa_regress_update requires a PA-family model".into()));
    }
    check_features(&model, x, y)?;
    let e = y - model.weights.dot(x);
    let loss = (e.abs() - model.eps_insensitive).max(T::zero());
    if loss == T::zero() {
        return Ok(model);
    }
    let x2 = x.dot(x);
    if x2 == T::zero() {
        // zero features cannot move the weights; plain PA's step is even
        // undefined here
        if model.variant == ArVariant::Pa {
            log::warn!("passive-aggressive update skipped: zero feature vector with loss {loss}");
        }
        return Ok(model);
    }
    let tau = match model.variant {
        ArVariant::Pa => loss / x2,
        ArVariant::PaI => (loss / x2).min(model.c.unwrap()),
        ArVariant::PaII => loss / (x2 + T::one() / (sc::<T>(2.0) * model.c.unwrap())),
        ArVariant::Blr => unreachable!(),
    };
    let sign = if e > T::zero() { T::one() } else { -T::one() };
    let mut out = model;
    out.weights = &out.weights + &(x * (sign * tau));
    Ok(out)
}

/// Conjugate Bayesian update of the weight posterior, rank-1 form:
/// with S the current covariance and s² the noise variance,
/// μ ← μ + Sx·(y − μᵀx)/(s² + xᵀSx), S ← S − Sx(Sx)ᵀ/(s² + xᵀSx).
pub fn blr_update<T: Scalar>(model: ARModel<T>, x: &Array1<T>, y: T) -> Result<ARModel<T>> {
    if model.variant != ArVariant::Blr {
        return Err(Error::Input("blr_update requires a BLR model".into()));
    }
    check_features(&model, x, y)?;
    let mut out = model;
    let s = out.noise_std.unwrap();
    let s2 = s * s;
    let cov = out.cov.as_ref().unwrap();
    let sx = cov.dot(x);
    let denom = s2 + x.dot(&sx);
    let e = y - out.weights.dot(x);
    out.weights = &out.weights + &(&sx * (e / denom));
    let mut new_cov = cov.clone();
    let n = out.order;
    for i in 0..n {
        for j in 0..n {
            new_cov[[i, j]] -= sx[i] * sx[j] / denom;
        }
    }
    symmetrize(&mut new_cov);
    out.cov = Some(new_cov);
    Ok(out)
}

/// Posterior-mean prediction of a BLR model.
pub fn blr_predict<T: Scalar>(model: &ARModel<T>, x: &Array1<T>) -> Result<T> {
    if model.variant != ArVariant::Blr {
        return Err(Error::Input("blr_predict requires a BLR model".into()));
    }
    model.predict(x)
}

/// NMAE of a forecast series, plus the running curve.
#[derive(Debug, Clone)]
pub struct NmaeResult<T> {
    /// Mean normalized absolute error over steps 2..N.
    pub nmae: T,
    /// Population std of the per-step normalized errors.
    pub nmae_std: T,
    /// Normalized absolute error per scored step (length N−1).
    pub per_step: Array1<T>,
    /// Running mean of `per_step` (length N−1).
    pub running: Array1<T>,
    /// The normalizer: population std of the actuals' first differences.
    pub increment_std: T,
}

/// Mean absolute one-step error, excluding the very first forecast (made
/// with no history), normalized by the population standard deviation of the
/// actual series' first differences.
pub fn nmae<T: Scalar>(predictions: &Array1<T>, actuals: &Array1<T>) -> Result<NmaeResult<T>> {
    if predictions.len() != actuals.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    let n = actuals.len();
    if n < 2 {
        return Err(Error::Input("need at least two observations to score".into()));
    }
    if predictions.iter().any(|v| !v.is_finite()) || actuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("predictions and actuals must be finite".into()));
    }
    let m = n - 1;
    let mut increments = Array1::<T>::zeros(m);
    for i in 0..m {
        increments[i] = actuals[i + 1] - actuals[i];
    }
    let count = sc::<T>(m as f64);
    let mean_inc = increments.sum() / count;
    let var_inc = increments.iter().map(|&d| (d - mean_inc) * (d - mean_inc)).sum::<T>() / count;
    let increment_std = var_inc.sqrt();
    if !(increment_std > T::zero()) {
        return Err(Error::DegenerateSeries(
            "increment standard deviation is zero; NMAE is undefined".into(),
        ));
    }
    let mut per_step = Array1::<T>::zeros(m);
    for i in 0..m {
        per_step[i] = (predictions[i + 1] - actuals[i + 1]).abs() / increment_std;
    }
    let mut running = Array1::<T>::zeros(m);
    let mut acc = T::zero();
    for i in 0..m {
        acc += per_step[i];
        running[i] = acc / sc::<T>((i + 1) as f64);
    }
    let nmae_val = running[m - 1];
    let var_steps =
        per_step.iter().map(|&v| (v - nmae_val) * (v - nmae_val)).sum::<T>() / count;
    Ok(NmaeResult {
        nmae: nmae_val,
        nmae_std: var_steps.sqrt(),
        per_step,
        running,
        increment_std,
    })
}
