//! Half-integer Matérn kernels, their derivatives, the cosine-modulated
//! spectral mixture, and the hyperparameter vector.
//!
//! For half-integer smoothness ν = p + ½ the Matérn kernel has the closed
//! form (for τ ≥ 0)
//!
//! ```text
//! k(τ) = k0 · exp(-λτ) · Q(τ),          λ = sqrt(2p+1)/l,
//! Q(τ) = Σ_{j=0}^{p} c_j τ^j,           c_j = k0-free combinatorial weights,
//! ```
//!
//! which makes every derivative up to order 2p available symbolically via
//! the recurrence Q_{m+1} = Q_m′ − λ·Q_m (even orders extend to negative τ
//! by symmetry, odd orders by antisymmetry). The spectral mixture multiplies
//! each component by cos(ω_i τ); any stationary covariance can be
//! approximated arbitrarily well in this family.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};

/// One Matérn-(p+½) mixture component with cosine modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelComponent<T> {
    /// Amplitude (variance units), > 0.
    pub k0: T,
    /// Lengthscale (time units), > 0.
    pub l: T,
    /// Angular modulation frequency in radians per time unit, ≥ 0.
    pub omega: T,
    /// Smoothness integer p ≥ 0; the kernel is 2p-times differentiable.
    pub p: usize,
}

impl<T: Scalar> KernelComponent<T> {
    pub fn new(k0: T, l: T, omega: T, p: usize) -> Result<Self> {
        if !(k0.is_finite() && l.is_finite() && omega.is_finite()) {
            return Err(Error::Domain("kernel parameters must be finite".into()));
        }
        if k0 <= T::zero() {
            return Err(Error::Domain(format!("amplitude k0 must be positive, got {k0}")));
        }
        if l <= T::zero() {
            return Err(Error::Domain(format!("lengthscale l must be positive, got {l}")));
        }
        if omega < T::zero() {
            return Err(Error::Domain(format!("frequency omega must be nonnegative, got {omega}")));
        }
        Ok(Self { k0, l, omega, p })
    }

    /// Decay rate λ = sqrt(2p+1)/l of the exponential factor.
    pub fn lambda(&self) -> T {
        sc::<T>((2 * self.p + 1) as f64).sqrt() / self.l
    }
}

/// Precomputed polynomial form of one component's derivatives.
///
/// `polys[m]` holds the coefficients of Q_m, so that for τ ≥ 0 the m-th
/// lag-derivative of the kernel is exp(-λτ)·Q_m(τ). Orders up to 2p+1 are
/// kept: 2p is the public differentiability cap, and the one extra order
/// feeds the lengthscale-derivative identity
/// ∂k^{(m)}/∂log l = −m·k^{(m)}(τ) − τ·k^{(m+1)}(τ).
#[derive(Debug, Clone)]
pub(crate) struct PreparedMatern<T> {
    pub lam: T,
    pub p: usize,
    polys: Vec<Vec<T>>,
}

impl<T: Scalar> PreparedMatern<T> {
    pub fn new(comp: &KernelComponent<T>) -> Self {
        let p = comp.p;
        let lam = comp.lambda();
        let two_lam = sc::<T>(2.0) * lam;
        let mut q0 = Vec::with_capacity(p + 1);
        for j in 0..=p {
            q0.push(comp.k0 * sc::<T>(poly_weight(p, j)) * two_lam.powi(j as i32));
        }
        let mut polys = vec![q0];
        for _ in 0..(2 * p + 1) {
            let next = poly_derive(polys.last().unwrap(), lam);
            polys.push(next);
        }
        Self { lam, p, polys }
    }

    /// m-th lag-derivative at τ, valid for m ≤ 2p+1 (callers enforce the
    /// public m ≤ 2p cap). Odd orders at τ = 0 are exactly zero.
    pub fn deriv(&self, tau: T, m: usize) -> T {
        if tau == T::zero() && m % 2 == 1 {
            return T::zero();
        }
        let a = tau.abs();
        let val = (-self.lam * a).exp() * horner(&self.polys[m], a);
        if tau < T::zero() && m % 2 == 1 {
            -val
        } else {
            val
        }
    }

    /// ∂/∂(log l) of the m-th lag-derivative. The τ-multiplied term is
    /// exactly zero at τ = 0, so the order-(m+1) value is never needed there.
    pub fn deriv_dlogl(&self, tau: T, m: usize) -> T {
        let base = -sc::<T>(m as f64) * self.deriv(tau, m);
        if tau == T::zero() {
            base
        } else {
            base - tau * self.deriv(tau, m + 1)
        }
    }
}

/// Combinatorial weight of τ^j in the degree-p polynomial:
/// p!/(2p)! · (2p−j)!/((p−j)!·j!). Accumulated in f64; exact for the
/// moderate p this crate targets.
fn poly_weight(p: usize, j: usize) -> f64 {
    let f = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    f(p) / f(2 * p) * f(2 * p - j) / (f(p - j) * f(j))
}

/// Coefficients of Q′ − λ·Q.
fn poly_derive<T: Scalar>(q: &[T], lam: T) -> Vec<T> {
    let n = q.len();
    let mut out = vec![T::zero(); n];
    for j in 0..n {
        let dq = if j + 1 < n {
            sc::<T>((j + 1) as f64) * q[j + 1]
        } else {
            T::zero()
        };
        out[j] = dq - lam * q[j];
    }
    out
}

fn horner<T: Scalar>(coeffs: &[T], x: T) -> T {
    let mut acc = T::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// k_ma(τ; k0, l, p+½) via the closed half-integer form.
pub fn matern_eval<T: Scalar>(tau: T, comp: &KernelComponent<T>) -> Result<T> {
    if !tau.is_finite() {
        return Err(Error::Domain(format!("lag must be finite, got {tau}")));
    }
    Ok(PreparedMatern::new(comp).deriv(tau, 0))
}

/// m-th derivative of the kernel with respect to the lag.
///
/// Satisfies k^{(m)}(−τ) = (−1)^m·k^{(m)}(τ); odd orders vanish at τ = 0.
/// Orders beyond 2p are rejected: the kernel is only 2p-times differentiable.
pub fn matern_derivative<T: Scalar>(tau: T, m: usize, comp: &KernelComponent<T>) -> Result<T> {
    if !tau.is_finite() {
        return Err(Error::Domain(format!("lag must be finite, got {tau}")));
    }
    if m > 2 * comp.p {
        return Err(Error::UnsupportedOrder { order: m, p: comp.p, max: 2 * comp.p });
    }
    Ok(PreparedMatern::new(comp).deriv(tau, m))
}

/// Sum of cosine-modulated Matérn components sharing one smoothness p.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMaternKernel<T> {
    components: Vec<KernelComponent<T>>,
    p: usize,
}

impl<T: Scalar> SpectralMaternKernel<T> {
    pub fn new(components: Vec<KernelComponent<T>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Domain("spectral kernel needs at least one component".into()))?;
        let p = first.p;
        if components.iter().any(|c| c.p != p) {
            return Err(Error::Domain("all components must share the same smoothness p".into()));
        }
        Ok(Self { components, p })
    }

    pub fn components(&self) -> &[KernelComponent<T>] {
        &self.components
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of components minus one (the mixture is indexed 0..=n).
    pub fn n(&self) -> usize {
        self.components.len() - 1
    }

    /// Value at lag zero: the sum of the component amplitudes.
    pub fn variance_at_zero(&self) -> T {
        self.components.iter().map(|c| c.k0).sum()
    }

    /// Dimension of the equivalent state space: 2(p+1)(n+1).
    pub fn state_dim(&self) -> usize {
        2 * (self.p + 1) * self.components.len()
    }
}

/// k_sma(τ) = Σ_i k_ma(τ; k0_i, l_i, p+½)·cos(ω_i τ).
pub fn spectral_matern_eval<T: Scalar>(tau: T, kern: &SpectralMaternKernel<T>) -> Result<T> {
    let mut acc = T::zero();
    for comp in kern.components() {
        acc += matern_eval(tau, comp)? * (comp.omega * tau).cos();
    }
    Ok(acc)
}

/// Deterministic trend (mean function) of the observation process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendKind {
    Constant,
    Linear,
}

impl TrendKind {
    pub fn n_coeffs(self) -> usize {
        match self {
            TrendKind::Constant => 1,
            TrendKind::Linear => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendModel<T> {
    pub kind: TrendKind,
    pub beta: Array1<T>,
}

impl<T: Scalar> TrendModel<T> {
    pub fn new(kind: TrendKind, beta: Array1<T>) -> Result<Self> {
        if beta.len() != kind.n_coeffs() {
            return Err(Error::Dimension(format!(
                "trend kind needs {} coefficients, got {}",
                kind.n_coeffs(),
                beta.len()
            )));
        }
        Ok(Self { kind, beta })
    }

    /// m(t): β₀ for a constant trend, β₀ + β₁·t for a linear one.
    pub fn eval(&self, t: T) -> T {
        match self.kind {
            TrendKind::Constant => self.beta[0],
            TrendKind::Linear => self.beta[0] + self.beta[1] * t,
        }
    }

    /// Gradient of m(t) in the trend coefficients: (1,) or (1, t).
    pub fn dbeta(&self, t: T) -> Array1<T> {
        match self.kind {
            TrendKind::Constant => Array1::from_elem(1, T::one()),
            TrendKind::Linear => Array1::from_vec(vec![T::one(), t]),
        }
    }
}

/// Per-component log-parameters of the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentParams<T> {
    pub log_k0: T,
    pub log_l: T,
    pub log_omega: T,
}

/// The full learnable parameter vector θ: trend coefficients, log noise
/// scale, and per-component (log k0, log l, log ω).
///
/// Flattening order is fixed — beta, log_sigma, then the component triples
/// in index order — and `pack`/`unpack` are exact inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams<T> {
    pub beta: Array1<T>,
    pub log_sigma: T,
    pub components: Vec<ComponentParams<T>>,
}

impl<T: Scalar> HyperParams<T> {
    /// Length of the flat vector: dim(beta) + 1 + 3·(number of components).
    pub fn flat_len(&self) -> usize {
        self.beta.len() + 1 + 3 * self.components.len()
    }

    pub fn pack(&self) -> Array1<T> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend(self.beta.iter().copied());
        v.push(self.log_sigma);
        for c in &self.components {
            v.push(c.log_k0);
            v.push(c.log_l);
            v.push(c.log_omega);
        }
        Array1::from_vec(v)
    }

    pub fn unpack(v: ArrayView1<'_, T>, n_beta: usize, n_components: usize) -> Result<Self> {
        let want = n_beta + 1 + 3 * n_components;
        if v.len() != want {
            return Err(Error::Dimension(format!(
                "flat hyperparameter vector has length {}, expected {}",
                v.len(),
                want
            )));
        }
        let beta = v.slice(ndarray::s![..n_beta]).to_owned();
        let log_sigma = v[n_beta];
        let mut components = Vec::with_capacity(n_components);
        for i in 0..n_components {
            let base = n_beta + 1 + 3 * i;
            components.push(ComponentParams {
                log_k0: v[base],
                log_l: v[base + 1],
                log_omega: v[base + 2],
            });
        }
        Ok(Self { beta, log_sigma, components })
    }

    pub fn sigma(&self) -> T {
        self.log_sigma.exp()
    }

    /// Instantiate the mixture kernel at smoothness p.
    pub fn kernel(&self, p: usize) -> Result<SpectralMaternKernel<T>> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                KernelComponent::new(c.log_k0.exp(), c.log_l.exp(), c.log_omega.exp(), p)
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralMaternKernel::new(comps)
    }

    pub fn trend(&self, kind: TrendKind) -> Result<TrendModel<T>> {
        TrendModel::new(kind, self.beta.clone())
    }

    /// Streaming-start initialization: all trend/log coefficients zero
    /// (σ = k0 = l = 1) and the component frequencies spread over a ladder
    /// tied to the sampling frequency, ω_i = (1+i)/(n_components)·π·fs.
    pub fn init(kind: TrendKind, n_components: usize, fs: T) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::Domain("need at least one mixture component".into()));
        }
        if !(fs.is_finite() && fs > T::zero()) {
            return Err(Error::Domain(format!("sampling frequency must be positive, got {fs}")));
        }
        let denom = sc::<T>(n_components as f64);
        let components = (0..n_components)
            .map(|i| {
                let omega = sc::<T>((1 + i) as f64) / denom * T::PI() * fs;
                ComponentParams {
                    log_k0: T::zero(),
                    log_l: T::zero(),
                    log_omega: omega.ln(),
                }
            })
            .collect();
        Ok(Self {
            beta: Array1::zeros(kind.n_coeffs()),
            log_sigma: T::zero(),
            components,
        })
    }
}
