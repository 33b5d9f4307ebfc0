//! Dense Gaussian process regression under the spectral Matérn kernel.
//!
//! Brute-force O(N³) reference: builds the full Gram matrix and conditions
//! on all observations at once. The filter must reproduce these numbers
//! exactly (up to roundoff), which is what the equivalence tests check.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::filter::{Predictive, PredictiveKind};
use crate::kernels::{spectral_matern_eval, SpectralMaternKernel, TrendModel};
use crate::scalar::{sc, Scalar};
use crate::statespace::{cholesky_psd, solve_chol_vec, solve_lower};

/// A complete regression problem: data, kernel, trend, and noise scale.
#[derive(Debug, Clone)]
pub struct GPRProblem<T> {
    pub times: Array1<T>,
    pub observations: Array1<T>,
    pub kern: SpectralMaternKernel<T>,
    pub trend: TrendModel<T>,
    pub sigma: T,
}

impl<T: Scalar> GPRProblem<T> {
    pub fn new(
        times: Array1<T>,
        observations: Array1<T>,
        kern: SpectralMaternKernel<T>,
        trend: TrendModel<T>,
        sigma: T,
    ) -> Result<Self> {
        if times.len() != observations.len() {
            return Err(Error::Dimension(format!(
                "{} times vs {} observations",
                times.len(),
                observations.len()
            )));
        }
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(Error::Domain(format!("noise std must be positive, got {sigma}")));
        }
        if times.iter().any(|t| !t.is_finite()) || observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::Input("times and observations must be finite".into()));
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(Error::Ordering(format!(
                    "times must strictly increase: t[{i}]={} after {}",
                    times[i],
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times, observations, kern, trend, sigma })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }
}

/// Gram matrix of the mixture kernel plus σ² on the diagonal.
fn noisy_gram<T: Scalar>(prob: &GPRProblem<T>) -> Result<Array2<T>> {
    let n = prob.n();
    let s2 = prob.sigma * prob.sigma;
    let mut k = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = spectral_matern_eval(prob.times[i] - prob.times[j], &prob.kern)?;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
        k[[i, i]] += s2;
    }
    Ok(k)
}

fn residual<T: Scalar>(prob: &GPRProblem<T>) -> Array1<T> {
    let mut r = prob.observations.clone();
    for (i, v) in r.iter_mut().enumerate() {
        *v -= prob.trend.eval(prob.times[i]);
    }
    r
}

/// Exact log density of the observations under N(m(times), K + σ²I).
pub fn log_marginal_likelihood<T: Scalar>(prob: &GPRProblem<T>) -> Result<T> {
    let n = prob.n();
    if n == 0 {
        return Err(Error::Input("need at least one observation".into()));
    }
    let k = noisy_gram(prob)?;
    let l = cholesky_psd(&k)?;
    for i in 0..n {
        if l[[i, i]] <= T::zero() {
            return Err(Error::Conditioning(
                "noisy Gram matrix is numerically singular".into(),
            ));
        }
    }
    let r = residual(prob);
    let alpha = solve_chol_vec(&l, &r);
    let two = sc::<T>(2.0);
    let mut half_logdet = T::zero();
    for i in 0..n {
        half_logdet += l[[i, i]].ln();
    }
    Ok(-r.dot(&alpha) / two - half_logdet - sc::<T>(n as f64) / two * (two * T::PI()).ln())
}

/// Exact latent posterior N(mean, var) at `t_star`; with no data this is the
/// prior N(m(t*), Σk0).
pub fn posterior<T: Scalar>(prob: &GPRProblem<T>, t_star: T) -> Result<Predictive<T>> {
    if !t_star.is_finite() {
        return Err(Error::Domain("query time must be finite".into()));
    }
    let prior_var = prob.kern.variance_at_zero();
    let prior_mean = prob.trend.eval(t_star);
    let n = prob.n();
    if n == 0 {
        return Err(Error::Input("empty problem; prior is trivial".into()));
    }
    let k = noisy_gram(prob)?;
    let l = cholesky_psd(&k)?;
    let r = residual(prob);
    let alpha = solve_chol_vec(&l, &r);
    let mut k_star = Array1::<T>::zeros(n);
    for i in 0..n {
        k_star[i] = spectral_matern_eval(t_star - prob.times[i], &prob.kern)?;
    }
    let mean = prior_mean + k_star.dot(&alpha);
    let v = solve_lower(&l, &k_star);
    let var = (prior_var - v.dot(&v)).max(T::zero());
    Ok(Predictive { mean, var, kind: PredictiveKind::LatentForecast })
}

/// Prior predictive when there is no data yet.
pub fn prior<T: Scalar>(
    kern: &SpectralMaternKernel<T>,
    trend: &TrendModel<T>,
    t_star: T,
) -> Result<Predictive<T>> {
    if !t_star.is_finite() {
        return Err(Error::Domain("query time must be finite".into()));
    }
    Ok(Predictive {
        mean: trend.eval(t_star),
        var: kern.variance_at_zero(),
        kind: PredictiveKind::LatentForecast,
    })
}
