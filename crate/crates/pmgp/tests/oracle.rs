//! Independent-oracle test suite.
//!
//! Three pillars, each checking the library against something it does not
//! share code with:
//!
//! 1. the closed-form half-integer Matérn kernel against a Bessel-integral
//!    evaluation of the general Matérn covariance;
//! 2. the streaming filter against dense O(N³) GP regression on randomized
//!    instances (same law, so log-likelihoods and forecasts must agree);
//! 3. the analytic gradient against central finite differences of the
//!    local log-likelihood on randomized instances.

use ndarray::{arr1, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use pmgp::filter::{forecast, local_loglik, update, FilterState};
use pmgp::gpr_oracle::{log_marginal_likelihood, posterior, GPRProblem};
use pmgp::kernels::{matern_eval, ComponentParams, HyperParams, KernelComponent, TrendKind};
use pmgp::learner::grad_local_loglik;

// ---------------------------------------------------------------------------
// Gauss–Legendre machinery for the Bessel-integral oracle
// ---------------------------------------------------------------------------

/// Nodes and weights of n-point Gauss–Legendre quadrature on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by upward recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 1..n {
            let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Modified Bessel function of the second kind K_ν(x) for x > 0 via its
/// integral representation ∫₀^∞ e^{−x·cosh t}·cosh(νt) dt, integrated with
/// panelized Gauss–Legendre quadrature. The upper limit T grows until the
/// truncated tail is provably below e^{−45} relative to the integrand peak.
fn bessel_k(nu: f64, x: f64) -> f64 {
    let mut t_max = 3.0f64;
    while x * (t_max.cosh() - 1.0) - nu * t_max < 45.0 {
        t_max *= 1.25;
    }
    let (nodes, weights) = gauss_legendre(64);
    let panels = 8;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = t_max * p as f64 / panels as f64;
        let b = t_max * (p + 1) as f64 / panels as f64;
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for (xi, wi) in nodes.iter().zip(weights.iter()) {
            let t = mid + half * xi;
            acc += wi * half * (-x * t.cosh()).exp() * (nu * t).cosh();
        }
    }
    acc
}

/// Γ(p + ½) = (2p−1)!! / 2^p · √π.
fn gamma_half_integer(p: usize) -> f64 {
    let mut double_fact = 1.0f64;
    let mut k = 2 * p as i64 - 1;
    while k >= 2 {
        double_fact *= k as f64;
        k -= 2;
    }
    double_fact / 2f64.powi(p as i32) * std::f64::consts::PI.sqrt()
}

/// General Matérn covariance with ν = p + ½ through the Bessel form:
/// k(τ) = k0 · 2^{1−ν}/Γ(ν) · (√(2ν)·τ/l)^ν · K_ν(√(2ν)·τ/l).
fn matern_via_bessel(tau: f64, k0: f64, l: f64, p: usize) -> f64 {
    let nu = p as f64 + 0.5;
    let arg = (2.0 * nu).sqrt() * tau.abs() / l;
    k0 * 2f64.powf(1.0 - nu) / gamma_half_integer(p) * arg.powf(nu) * bessel_k(nu, arg)
}

#[test]
fn closed_form_matches_bessel_integral() {
    // machine-precision agreement over a broad τ grid for all supported p
    for p in 0..=3usize {
        for &l in &[0.3, 1.0, 2.7] {
            for &k0 in &[0.5, 1.8] {
                let comp = KernelComponent::new(k0, l, 0.0, p).unwrap();
                for i in 1..=40 {
                    let tau = 10.0 * i as f64 / 40.0;
                    let closed = matern_eval(tau, &comp).unwrap();
                    let integral = matern_via_bessel(tau, k0, l, p);
                    assert!(
                        (closed - integral).abs() <= 1e-9 * k0,
                        "p={p} l={l} k0={k0} tau={tau}: closed {closed} vs integral {integral}"
                    );
                }
            }
        }
    }
}

#[test]
fn bessel_oracle_self_check() {
    // K_{1/2}(x) = √(π/(2x))·e^{−x} exactly
    for &x in &[0.3, 1.0, 4.2, 9.7] {
        let want = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        let got = bessel_k(0.5, x);
        assert!((got - want).abs() <= 1e-12 * want, "x={x}: {got} vs {want}");
    }
}

// ---------------------------------------------------------------------------
// Randomized instances shared by the equivalence and gradient suites
// ---------------------------------------------------------------------------

fn random_theta(rng: &mut ChaCha20Rng, kind: TrendKind, n_components: usize) -> HyperParams<f64> {
    let beta = match kind {
        TrendKind::Constant => arr1(&[rng.gen_range(-1.0..1.0)]),
        TrendKind::Linear => arr1(&[rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)]),
    };
    let components = (0..n_components)
        .map(|_| ComponentParams {
            log_k0: rng.gen_range(-0.7..0.7),
            log_l: rng.gen_range(-0.5..0.8),
            log_omega: rng.gen_range(0.3f64..6.0).ln(),
        })
        .collect();
    HyperParams { beta, log_sigma: rng.gen_range(0.2f64..1.2).ln(), components }
}

fn random_times(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            t += rng.gen_range(0.05..0.6);
            t
        })
        .collect()
}

#[test]
fn filter_matches_dense_gpr_on_random_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0001);
    let mut checked = 0;
    while checked < 60 {
        let p = rng.gen_range(0..=2usize);
        let n_comp = rng.gen_range(1..=3usize);
        let kind = if rng.gen_bool(0.5) { TrendKind::Constant } else { TrendKind::Linear };
        let n = rng.gen_range(3..=40usize);
        let theta = random_theta(&mut rng, kind, n_comp);
        let times = random_times(&mut rng, n);
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let mut state = FilterState::new(theta.clone(), kind, p).unwrap();
        let mut streamed = 0.0;
        for (&t, &y) in times.iter().zip(ys.iter()) {
            streamed += local_loglik(&state, t, y, &theta).unwrap();
            let (st, _) = update(&state, t, y).unwrap();
            state = st;
        }

        let prob = GPRProblem::new(
            Array1::from_vec(times.clone()),
            Array1::from_vec(ys),
            theta.kernel(p).unwrap(),
            theta.trend(kind).unwrap(),
            theta.sigma(),
        )
        .unwrap();
        let dense = log_marginal_likelihood(&prob).unwrap();
        assert!(
            (streamed - dense).abs() <= 1e-6 * (1.0 + dense.abs()),
            "instance {checked}: streamed {streamed} vs dense {dense} (p={p}, n={n_comp}, N={n})"
        );

        // held-out latent forecasts beyond the last observation
        let mut t_star = *times.last().unwrap();
        for _ in 0..5 {
            t_star += rng.gen_range(0.1..2.0);
            let post = posterior(&prob, t_star).unwrap();
            let (_, latent) = forecast(&state, t_star).unwrap();
            assert!(
                (latent.mean - post.mean).abs() <= 1e-6 * (1.0 + post.mean.abs()),
                "instance {checked}: forecast mean {} vs {} at t*={t_star}",
                latent.mean,
                post.mean
            );
            assert!(
                (latent.var - post.var).abs() <= 1e-6 * (1.0 + post.var.abs()),
                "instance {checked}: forecast var {} vs {} at t*={t_star}",
                latent.var,
                post.var
            );
        }
        checked += 1;
    }
}

#[test]
fn analytic_gradient_matches_finite_differences_broadly() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0002);
    let mut checked = 0;
    while checked < 120 {
        let p = rng.gen_range(0..=2usize);
        let n_comp = rng.gen_range(1..=3usize);
        let kind = if rng.gen_bool(0.5) { TrendKind::Constant } else { TrendKind::Linear };
        let theta0 = random_theta(&mut rng, kind, n_comp);
        let n_warm = [0usize, 1, 3][rng.gen_range(0..3)];

        let mut state = FilterState::new(theta0.clone(), kind, p).unwrap();
        let mut t = 0.0;
        for _ in 0..n_warm {
            t += rng.gen_range(0.1..0.8);
            let y = rng.gen_range(-2.0..2.0);
            let (st, _) = update(&state, t, y).unwrap();
            state = st;
        }
        t += rng.gen_range(0.1..0.8);
        let y = rng.gen_range(-2.0..2.0);

        // probe θ is decoupled from the θ the state was built under
        let mut flat = theta0.pack();
        for v in flat.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let n_beta = theta0.beta.len();
        let probe = HyperParams::unpack(flat.view(), n_beta, n_comp).unwrap();

        let bundle = grad_local_loglik(&state, t, y, &probe).unwrap();
        let h = 1e-5;
        for j in 0..flat.len() {
            let mut up = flat.clone();
            up[j] += h;
            let mut dn = flat.clone();
            dn[j] -= h;
            let thu = HyperParams::unpack(up.view(), n_beta, n_comp).unwrap();
            let thd = HyperParams::unpack(dn.view(), n_beta, n_comp).unwrap();
            let fd = (local_loglik(&state, t, y, &thu).unwrap()
                - local_loglik(&state, t, y, &thd).unwrap())
                / (2.0 * h);
            let g = bundle.grad[j];
            assert!(
                (g - fd).abs() <= 1e-4 * fd.abs() + 1e-8,
                "instance {checked}, coordinate {j}: analytic {g} vs fd {fd} \
                 (p={p}, n_comp={n_comp}, warm={n_warm})"
            );
        }
        checked += 1;
    }
}

#[test]
fn forecast_variance_is_monotone_in_horizon_eventually() {
    // not an oracle, but a strong qualitative property: after the last
    // observation, latent forecast variance relaxes back toward the prior
    let theta = HyperParams {
        beta: arr1(&[0.0]),
        log_sigma: 0.4f64.ln(),
        components: vec![ComponentParams { log_k0: 0.0, log_l: 0.0, log_omega: 1.0f64.ln() }],
    };
    let mut state = FilterState::new(theta.clone(), TrendKind::Constant, 2).unwrap();
    for (i, &y) in [0.5, -0.3, 0.8, 0.2].iter().enumerate() {
        let (st, _) = update(&state, i as f64 * 0.5, y).unwrap();
        state = st;
    }
    let prior_var = theta.kernel(2).unwrap().variance_at_zero();
    let (_, near) = forecast(&state, 2.1).unwrap();
    let (_, far) = forecast(&state, 60.0).unwrap();
    assert!(near.var < prior_var);
    assert!((far.var - prior_var).abs() < 1e-6 * prior_var);
}
