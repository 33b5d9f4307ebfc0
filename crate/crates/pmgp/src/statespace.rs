//! State-space construction for the spectral Matérn filter.
//!
//! A Matérn-(p+½) process stacked with its first p mean-square derivatives
//! is Markovian, so conditioning on the previous time collapses the whole
//! past into one (p+1)-dimensional Gaussian step. This module builds the
//! cross-covariances of that derivative process, the per-component
//! transition quantities F and K_cond, and the assembled block-diagonal
//! model (two copies per mixture component — a cosine and a sine phase —
//! read out by a time-varying measurement vector).

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::{KernelComponent, PreparedMatern, SpectralMaternKernel};
use crate::scalar::{sc, Scalar};

/// Cross-covariance of the derivative process between two times:
/// entry (i, j) is (−1)^j · k^{(i+j)}(u − v).
#[derive(Debug, Clone)]
pub struct CrossCovMatrix<T> {
    pub entries: Array2<T>,
    pub u: T,
    pub v: T,
}

pub(crate) fn cross_cov_prepared<T: Scalar>(prep: &PreparedMatern<T>, u: T, v: T) -> Array2<T> {
    let pp = prep.p + 1;
    let tau = u - v;
    Array2::from_shape_fn((pp, pp), |(i, j)| {
        let val = prep.deriv(tau, i + j);
        if j % 2 == 0 {
            val
        } else {
            -val
        }
    })
}

/// Same layout, but each entry differentiated with respect to log l.
pub(crate) fn cross_cov_dlogl_prepared<T: Scalar>(
    prep: &PreparedMatern<T>,
    u: T,
    v: T,
) -> Array2<T> {
    let pp = prep.p + 1;
    let tau = u - v;
    Array2::from_shape_fn((pp, pp), |(i, j)| {
        let val = prep.deriv_dlogl(tau, i + j);
        if j % 2 == 0 {
            val
        } else {
            -val
        }
    })
}

pub fn dgp_cross_cov<T: Scalar>(u: T, v: T, comp: &KernelComponent<T>) -> Result<CrossCovMatrix<T>> {
    if !(u.is_finite() && v.is_finite()) {
        return Err(Error::Domain("times must be finite".into()));
    }
    let prep = PreparedMatern::new(comp);
    Ok(CrossCovMatrix { entries: cross_cov_prepared(&prep, u, v), u, v })
}

/// How a positive-semidefinite factorization was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorMethod {
    /// Plain Cholesky, possibly after adding `jitter`·mean(diag) to the diagonal.
    Cholesky { jitter: f64 },
    /// Symmetric eigendecomposition with negative eigenvalues clamped to zero.
    EigenClamped,
}

const JITTERS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower factor L with L·Lᵀ = M for a symmetric PSD matrix.
///
/// Conditional step covariances degenerate as the time step shrinks, so a
/// plain Cholesky is tried first, then with escalating diagonal jitter, and
/// finally an eigendecomposition with negative eigenvalues clamped to zero
/// (that factor is not triangular, but satisfies L·Lᵀ = M). The method
/// actually taken is reported for reproducibility.
pub fn cholesky_psd_recorded<T: Scalar>(m: &Array2<T>) -> Result<(Array2<T>, FactorMethod)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!(
            "cholesky_psd needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let mut absmax = T::zero();
    for &x in m.iter() {
        if !x.is_finite() {
            return Err(Error::Input("matrix entries must be finite".into()));
        }
        absmax = absmax.max(x.abs());
    }
    let mut asym = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if asym > sc::<T>(1e-8) * (absmax + sc::<T>(1e-300)) {
        return Err(Error::Input("matrix is not symmetric within tolerance".into()));
    }

    let mut sym = m.clone();
    symmetrize(&mut sym);
    let diag_mean = (0..n).map(|i| sym[[i, i]].abs()).sum::<T>() / sc::<T>(n.max(1) as f64);

    for &eps in &JITTERS {
        let mut a = sym.clone();
        if eps > 0.0 {
            let bump = sc::<T>(eps) * diag_mean;
            for i in 0..n {
                a[[i, i]] += bump;
            }
        }
        if let Some(l) = try_cholesky(&a) {
            if eps > 0.0 {
                log::debug!("cholesky_psd succeeded with diagonal jitter {eps:e}");
            }
            return Ok((l, FactorMethod::Cholesky { jitter: eps }));
        }
    }

    let (vals, vecs) = jacobi_eigh(&sym);
    let vmax = vals.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let floor = -sc::<T>(1e-6) * (vmax + sc::<T>(1e-300));
    if vals.iter().any(|&v| v < floor) {
        return Err(Error::Conditioning(
            "matrix is not positive semidefinite even after jitter escalation".into(),
        ));
    }
    let mut l = vecs;
    for j in 0..n {
        let sv = vals[j].max(T::zero()).sqrt();
        for i in 0..n {
            l[[i, j]] *= sv;
        }
    }
    log::warn!("cholesky_psd fell back to an eigendecomposition factor with clamped eigenvalues");
    Ok((l, FactorMethod::EigenClamped))
}

pub fn cholesky_psd<T: Scalar>(m: &Array2<T>) -> Result<Array2<T>> {
    cholesky_psd_recorded(m).map(|(l, _)| l)
}

/// Plain lower-triangular Cholesky; `None` when a pivot turns negative.
/// An (almost) exactly zero pivot is accepted when the rest of its column
/// is negligible too, so rank-deficient limits like a zero matrix factor
/// cleanly.
fn try_cholesky<T: Scalar>(a: &Array2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(T::zero(), |x, y| x.max(y));
    let tol = sc::<T>(1e-12) * (scale + sc::<T>(1e-300));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= tol {
            if d < -tol {
                return None;
            }
            // treat as exact rank deficiency: the column must vanish as well
            for i in (j + 1)..n {
                let mut r = a[[i, j]];
                for k in 0..j {
                    r -= l[[i, k]] * l[[j, k]];
                }
                if r.abs() > sc::<T>(1e-8) * (scale + sc::<T>(1e-300)) {
                    return None;
                }
                l[[i, j]] = T::zero();
            }
            l[[j, j]] = T::zero();
            continue;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut r = a[[i, j]];
            for k in 0..j {
                r -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = r / dj;
        }
    }
    Some(l)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix:
/// returns (eigenvalues, eigenvector columns) with A = V·diag(w)·Vᵀ.
pub(crate) fn jacobi_eigh<T: Scalar>(a: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt() + sc::<T>(1e-300);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= sc::<T>(1e-14) * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= sc::<T>(1e-300) {
                    continue;
                }
                let tau = (m[[q, q]] - m[[p, p]]) / (sc::<T>(2.0) * apq);
                let t = {
                    let sgn = if tau >= T::zero() { T::one() } else { -T::one() };
                    sgn / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = Array1::from_shape_fn(n, |i| m[[i, i]]);
    (w, v)
}

/// Forward substitution: solve L·x = b for lower-triangular L.
pub(crate) fn solve_lower<T: Scalar>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let xi = x[k];
            x[i] = x[i] - l[[i, k]] * xi;
        }
        x[i] = x[i] / l[[i, i]];
    }
    x
}

/// Back substitution: solve Lᵀ·x = b.
fn solve_lower_t<T: Scalar>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let xk = x[k];
            x[i] = x[i] - l[[k, i]] * xk;
        }
        x[i] = x[i] / l[[i, i]];
    }
    x
}

/// Solve (L·Lᵀ)·x = b.
pub(crate) fn solve_chol_vec<T: Scalar>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    solve_lower_t(l, &solve_lower(l, b))
}

/// Solve (L·Lᵀ)·X = B column by column.
pub(crate) fn solve_chol_mat<T: Scalar>(l: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let mut out = Array2::<T>::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let x = solve_chol_vec(l, &col.to_owned());
        out.column_mut(j).assign(&x);
    }
    out
}

pub(crate) fn symmetrize<T: Scalar>(a: &mut Array2<T>) {
    let n = a.nrows();
    let half = sc::<T>(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = half * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// One component's conditional step: x_u | x_v ~ N(F·x_v, K_cond).
#[derive(Debug, Clone)]
pub struct ComponentTransition<T> {
    pub f: Array2<T>,
    pub k_cond: Array2<T>,
    /// Factor with L·Lᵀ = K_cond.
    pub l: Array2<T>,
    pub dt: T,
}

pub(crate) fn transition_from_prepared<T: Scalar>(
    prep: &PreparedMatern<T>,
    u: T,
    v: T,
) -> Result<ComponentTransition<T>> {
    let k00 = cross_cov_prepared(prep, v, v);
    let k_uv = cross_cov_prepared(prep, u, v);
    let (l_vv, method) = cholesky_psd_recorded(&k00)?;
    if method == FactorMethod::EigenClamped {
        return Err(Error::Conditioning(
            "stationary marginal covariance is numerically singular; cannot form the transition"
                .into(),
        ));
    }
    // F = K_uv · K_vv⁻¹, computed by solving K_vv·Xᵀ = K_uvᵀ
    let x = solve_chol_mat(&l_vv, &k_uv.t().to_owned());
    let f = x.t().to_owned();
    // K_cond = K_uu − K_uv·K_vv⁻¹·K_vu, with K_uu = K_vv by stationarity
    // and K_vu = K_uvᵀ.
    let mut k_cond = &k00 - &f.dot(&k_uv.t());
    symmetrize(&mut k_cond);
    let l = cholesky_psd(&k_cond)?;
    Ok(ComponentTransition { f, k_cond, l, dt: u - v })
}

/// Marginal (infinite-lag) block: F = 0 and K_cond equals the stationary
/// covariance. Used to start the filter.
pub(crate) fn prior_block<T: Scalar>(prep: &PreparedMatern<T>) -> Result<ComponentTransition<T>> {
    let k00 = cross_cov_prepared(prep, T::zero(), T::zero());
    let l = cholesky_psd(&k00)?;
    let pp = prep.p + 1;
    Ok(ComponentTransition { f: Array2::zeros((pp, pp)), k_cond: k00, l, dt: T::infinity() })
}

pub fn component_transition<T: Scalar>(
    u: T,
    v: T,
    comp: &KernelComponent<T>,
) -> Result<ComponentTransition<T>> {
    if !(u.is_finite() && v.is_finite()) {
        return Err(Error::Domain("times must be finite".into()));
    }
    if u <= v {
        return Err(Error::Ordering(format!("need u > v, got u={u}, v={v}")));
    }
    transition_from_prepared(&PreparedMatern::new(comp), u, v)
}

/// The full block-diagonal step model at one time, plus the measurement
/// vector that reads the modulated mixture out of the stacked state.
#[derive(Debug, Clone)]
pub struct AssembledModel<T> {
    /// State dimension 2(p+1)(n+1).
    pub d: usize,
    pub f: Array2<T>,
    pub k_cond: Array2<T>,
    pub l: Array2<T>,
    /// Zero except h[2i(p+1)] = cos(ω_i t) and h[(2i+1)(p+1)] = sin(ω_i t).
    pub h: Array1<T>,
}

/// Measurement vector at time t: zero except h[2i(p+1)] = cos(ω_i t) and
/// h[(2i+1)(p+1)] = sin(ω_i t), one cosine/sine pair per component.
pub fn measurement_vector<T: Scalar>(kern: &SpectralMaternKernel<T>, t: T) -> Array1<T> {
    let pp = kern.p() + 1;
    let mut h = Array1::zeros(kern.state_dim());
    for (i, comp) in kern.components().iter().enumerate() {
        h[2 * i * pp] = (comp.omega * t).cos();
        h[(2 * i + 1) * pp] = (comp.omega * t).sin();
    }
    h
}

/// Build the step model from `t_prev` to `t` (`t_prev = None` builds the
/// initial model: zero transition and the stationary covariance).
/// Each component contributes two consecutive diagonal blocks — its cosine
/// and sine copies share the same transition.
pub fn assemble<T: Scalar>(
    t_prev: Option<T>,
    t: T,
    kern: &SpectralMaternKernel<T>,
) -> Result<AssembledModel<T>> {
    if !t.is_finite() {
        return Err(Error::Domain("time must be finite".into()));
    }
    if let Some(tp) = t_prev {
        if t <= tp {
            return Err(Error::Ordering(format!(
                "time must strictly increase: t={t} does not advance past t_prev={tp}"
            )));
        }
    }
    let pp = kern.p() + 1;
    let d = kern.state_dim();
    let mut f = Array2::<T>::zeros((d, d));
    let mut k_cond = Array2::<T>::zeros((d, d));
    let mut l = Array2::<T>::zeros((d, d));
    for (i, comp) in kern.components().iter().enumerate() {
        let prep = PreparedMatern::new(comp);
        let tr = match t_prev {
            Some(tp) => transition_from_prepared(&prep, t, tp)?,
            None => prior_block(&prep)?,
        };
        for copy in 0..2 {
            let off = (2 * i + copy) * pp;
            f.slice_mut(s![off..off + pp, off..off + pp]).assign(&tr.f);
            k_cond.slice_mut(s![off..off + pp, off..off + pp]).assign(&tr.k_cond);
            l.slice_mut(s![off..off + pp, off..off + pp]).assign(&tr.l);
        }
    }
    let h = measurement_vector(kern, t);
    Ok(AssembledModel { d, f, k_cond, l, h })
}
