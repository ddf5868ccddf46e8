//! Deterministic (noise-input-free) damped wave dynamics: the closed-form
//! mode propagator, the damped kernel j_eps and its integral J_eps, the
//! Volterra resolvent kernel, and the mild (Duhamel) solution of the
//! thermostatted mode system.
//!
//! Everything here is cross-check machinery: the production microscopic
//! path integrates the SDE directly (chain_sim), and this module supplies
//! the independent semi-analytic answers it is tested against.

use crate::dispersion::{k_midpoints, Dispersion};
use crate::numerics::{adaptive_simpson, pairwise_sum};
use crate::scattering::r_total;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MildError {
    #[error("overdamped mode at k = {k}: eps*beta = {eps_beta} >= 1")]
    Overdamped { k: f64, eps_beta: f64 },
    #[error("time step too large: gamma1*dt*max|J| = {product} must be < 1/2")]
    StepTooLarge { product: f64 },
    #[error("Laplace cross-check failed at lambda = {lambda}: kernel {got} vs resolvent {want}")]
    LaplaceMismatch { lambda: f64, got: f64, want: f64 },
    #[error("Laplace argument must have positive real part, got {lambda}")]
    LambdaOutOfDomain { lambda: Complex64 },
}

/// Damped mode propagator: each wavenumber k carries the 2x2 generator
/// Omega(k) acting on (psi_hat(k), conj(psi_hat(-k))) with damping
/// a(k) = eps*gamma0*R(k) and rotation omega(k).
#[derive(Clone, Debug)]
pub struct DampedPropagator {
    pub eps: f64,
    pub gamma0: f64,
    dispersion: Dispersion,
}

// Shared scalar pair (cc, ss) with e^{Omega t} = e^{-at} (cc I + ss M),
// M the traceless part; d = a^2 - omega^2 selects the trig/hyperbolic branch.
fn env_scalars(a: f64, omega: f64, t: f64) -> (f64, f64) {
    let d = a * a - omega * omega;
    if d.abs() < 1e-24 {
        (1.0, t)
    } else if d < 0.0 {
        let s = (-d).sqrt();
        ((s * t).cos(), (s * t).sin() / s)
    } else {
        let s = d.sqrt();
        ((s * t).cosh(), (s * t).sinh() / s)
    }
}

impl DampedPropagator {
    pub fn new(eps: f64, gamma0: f64, dispersion: Dispersion) -> Result<Self, MildError> {
        assert!(eps >= 0.0 && gamma0 >= 0.0);
        let prop = DampedPropagator {
            eps,
            gamma0,
            dispersion,
        };
        // validity of the square root in omega_eps: eps*beta < 1 everywhere
        for i in 0..=2048 {
            let k = i as f64 / 4096.0;
            let eb = eps * prop.beta(k);
            if eb >= 1.0 {
                return Err(MildError::Overdamped { k, eps_beta: eb });
            }
        }
        Ok(prop)
    }

    pub fn dispersion(&self) -> &Dispersion {
        &self.dispersion
    }

    /// Damping rate a(k) = eps * gamma0 * R(k).
    pub fn damping(&self, k: f64) -> f64 {
        self.eps * self.gamma0 * r_total(k)
    }

    /// beta(k) = gamma0 R(k) / omega(k); zero where both vanish (k = 0).
    pub fn beta(&self, k: f64) -> f64 {
        let w = self.dispersion.omega(k);
        if w < 1e-14 {
            0.0
        } else {
            self.gamma0 * r_total(k) / w
        }
    }

    /// Damped frequency omega_eps = omega sqrt(1 - (eps beta)^2).
    pub fn omega_eps(&self, k: f64) -> f64 {
        let w = self.dispersion.omega(k);
        let eb = self.eps * self.beta(k);
        w * (1.0 - eb * eb).max(0.0).sqrt()
    }

    pub fn lambda_plus(&self, k: f64) -> Complex64 {
        Complex64::new(-self.damping(k), self.omega_eps(k))
    }

    pub fn lambda_minus(&self, k: f64) -> Complex64 {
        self.lambda_plus(k).conj()
    }
}

/// Closed-form e^{Omega(k) t} on the (psi_hat(k), conj(psi_hat(-k))) pair.
pub fn e_omega(k: f64, t: f64, prop: &DampedPropagator) -> [[Complex64; 2]; 2] {
    let a = prop.damping(k);
    let w = prop.dispersion().omega(k);
    let (cc, ss) = env_scalars(a, w, t);
    let env = (-a * t).exp();
    [
        [
            env * Complex64::new(cc, -w * ss),
            Complex64::new(env * a * ss, 0.0),
        ],
        [
            Complex64::new(env * a * ss, 0.0),
            env * Complex64::new(cc, w * ss),
        ],
    ]
}

/// Damped cosine kernel, the display form: envelope times
/// sqrt(1-(eps beta)^2) cos(omega_eps t) - eps beta sin(omega_eps t).
pub fn j_eps(t: f64, k: f64, prop: &DampedPropagator) -> f64 {
    let a = prop.damping(k);
    let eb = prop.eps * prop.beta(k);
    let c = (1.0 - eb * eb).max(0.0).sqrt();
    let we = prop.omega_eps(k);
    (-a * t).exp() * (c * (we * t).cos() - eb * (we * t).sin())
}

// The kernel the discrete mode system actually generates: the (1,1)-pairing
// of e^{Omega t} against the forcing direction. Differs from the display
// form by an O(eps) amplitude factor; the mild solution must use this one
// to agree with direct integration at finite N.
pub(crate) fn j_exact(t: f64, k: f64, prop: &DampedPropagator) -> f64 {
    let a = prop.damping(k);
    let w = prop.dispersion().omega(k);
    let (cc, ss) = env_scalars(a, w, t);
    (-a * t).exp() * (cc - a * ss)
}

/// J_eps(t) = int_T j_eps(t, k) dk by adaptive quadrature.
pub fn j_eps_integral(t: f64, prop: &DampedPropagator) -> f64 {
    let f = |k: f64| Complex64::new(j_eps(t, k, prop), 0.0);
    2.0 * adaptive_simpson(&f, 0.0, 0.5, 1e-10, 48).re
}

/// Laplace transform of J_eps: int_T c(k) lambda / (lambda^2 + 2 a lambda
/// + omega^2) dk, Re lambda > 0. Splits at the resonant wavenumber like the
/// undamped transform.
pub fn j_eps_tilde(lambda: Complex64, prop: &DampedPropagator) -> Result<Complex64, MildError> {
    if !(lambda.re > 0.0) {
        return Err(MildError::LambdaOutOfDomain { lambda });
    }
    let disp = prop.dispersion();
    let f = |k: f64| {
        let w = disp.omega(k);
        let a = prop.damping(k);
        let eb = prop.eps * prop.beta(k);
        let c = (1.0 - eb * eb).max(0.0).sqrt();
        c * lambda / (lambda * lambda + 2.0 * a * lambda + w * w)
    };
    let target = lambda.im.abs();
    let mut split = None;
    if target > disp.omega_min() && target < disp.omega_max() {
        if let Ok(kr) = disp.inverse_branch(target, crate::dispersion::Branch::Plus) {
            if kr > 1e-9 && kr < 0.5 - 1e-9 {
                split = Some(kr);
            }
        }
    }
    let integral = match split {
        Some(kr) => {
            adaptive_simpson(&f, 0.0, kr, 5e-11, 48) + adaptive_simpson(&f, kr, 0.5, 5e-11, 48)
        }
        None => adaptive_simpson(&f, 0.0, 0.5, 1e-10, 48),
    };
    Ok(2.0 * integral)
}

// Product-trapezoidal solve of x + gamma1 (J * x) = rhs on a uniform grid.
// x[0] = rhs[0] exactly: the convolution over [0,0] vanishes.
fn volterra_march(kernel: &[f64], rhs: &[f64], gamma1: f64, dt: f64) -> Vec<f64> {
    let n = kernel.len();
    let mut x = vec![0.0; n];
    x[0] = rhs[0];
    let diag = 1.0 + 0.5 * gamma1 * dt * kernel[0];
    for i in 1..n {
        let mut conv = 0.5 * kernel[i] * x[0];
        // dot of kernel[1..i] (reversed) with x[1..i]
        let mut acc = 0.0;
        for l in 1..i {
            acc += kernel[i - l] * x[l];
        }
        conv += acc;
        x[i] = (rhs[i] - gamma1 * dt * conv) / diag;
    }
    x
}

/// Sampled absolutely continuous part of the resolvent kernel g_eps:
/// g_eps(ds) = delta(ds) + density(s) ds.
#[derive(Clone, Debug)]
pub struct VolterraKernel {
    pub dt: f64,
    pub t_max: f64,
    pub gamma1: f64,
    density: Vec<f64>,
}

impl VolterraKernel {
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Laplace transform of the sampled kernel: 1 + int e^{-lambda t} density.
    pub fn laplace(&self, lambda: f64) -> f64 {
        let vals: Vec<f64> = self
            .density
            .iter()
            .enumerate()
            .map(|(i, &d)| (-lambda * i as f64 * self.dt).exp() * d)
            .collect();
        1.0 + crate::numerics::trapezoid(&vals, self.dt)
    }
}

/// Solve the resolvent equation density = -gamma1 J_eps - gamma1 J_eps *
/// density and cross-check its Laplace transform against
/// (1 + gamma1 Jtilde_eps)^{-1} at lambda in {1, 2, 4}.
pub fn solve_volterra(
    prop: &DampedPropagator,
    gamma1: f64,
    dt: f64,
    t_max: f64,
) -> Result<VolterraKernel, MildError> {
    let n = (t_max / dt).round() as usize + 1;
    // dense midpoint mode grid: the integrand is a smooth periodic function
    // of k, so the midpoint rule is spectrally accurate and far cheaper than
    // re-running adaptive quadrature at every time sample
    let nodes = k_midpoints(2048);
    let mut j = vec![0.0; n];
    for (i, jv) in j.iter_mut().enumerate() {
        let t = i as f64 * dt;
        let terms: Vec<f64> = nodes.iter().map(|&k| j_eps(t, k, prop)).collect();
        *jv = pairwise_sum(&terms) / nodes.len() as f64;
    }
    let jmax = j.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let product = gamma1 * dt * jmax;
    if product >= 0.5 {
        return Err(MildError::StepTooLarge { product });
    }
    let rhs: Vec<f64> = j.iter().map(|&v| -gamma1 * v).collect();
    let density = volterra_march(&j, &rhs, gamma1, dt);
    let kernel = VolterraKernel {
        dt,
        t_max,
        gamma1,
        density,
    };
    for lambda in [1.0, 2.0, 4.0] {
        let got = kernel.laplace(lambda);
        let want = (1.0
            + gamma1
                * j_eps_tilde(Complex64::new(lambda, 0.0), prop)?
                    .re)
            .recip();
        if (got - want).abs() > 1e-6 {
            return Err(MildError::LaplaceMismatch { lambda, got, want });
        }
    }
    Ok(kernel)
}

/// Mild (Duhamel) solution of the thermostatted mode system at time t:
/// free damped flow of each (k, -k) pair plus the convolution of the
/// interface force against the recovered momentum history p0.
///
/// `psi_hat` lives on the FFT mode grid k_j = j/N (wrapped); the -k partner
/// of index j is (N - j) mod N.
pub fn solve_deterministic(
    psi_hat: &[Complex64],
    t: f64,
    prop: &DampedPropagator,
    gamma1: f64,
    dt: f64,
) -> Result<Vec<Complex64>, MildError> {
    let n_modes = psi_hat.len();
    assert!(n_modes > 0 && t >= 0.0);
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let nt = steps + 1;

    let ks: Vec<f64> = (0..n_modes)
        .map(|j| crate::dispersion::wrap_torus(j as f64 / n_modes as f64))
        .collect();
    let omegas: Vec<f64> = ks.iter().map(|&k| prop.dispersion().omega(k)).collect();
    let damps: Vec<f64> = ks.iter().map(|&k| prop.damping(k)).collect();

    // pair fields: Pf = psi_j - conj(psi_{-j}), MPf = M Pf for the traceless
    // part M of the generator
    let mut pf = vec![Complex64::new(0.0, 0.0); n_modes];
    let mut mpf = vec![Complex64::new(0.0, 0.0); n_modes];
    for j in 0..n_modes {
        let jm = (n_modes - j) % n_modes;
        let psi1 = psi_hat[j];
        let psi2 = psi_hat[jm].conj();
        pf[j] = psi1 - psi2;
        mpf[j] = Complex64::new(0.0, -omegas[j]) * (psi1 + psi2) - damps[j] * (psi1 - psi2);
    }

    // p0^0(t_i): momentum at the origin under pure free damped flow,
    // and the discrete memory kernel generated by the same flow
    let mut p00 = vec![0.0; nt];
    let mut kernel = vec![0.0; nt];
    for i in 0..nt {
        let ti = i as f64 * h;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut kacc = 0.0;
        for j in 0..n_modes {
            let (cc, ss) = env_scalars(damps[j], omegas[j], ti);
            let env = (-damps[j] * ti).exp();
            acc += env * (cc * pf[j] + ss * mpf[j]);
            kacc += env * (cc - damps[j] * ss);
        }
        p00[i] = acc.im / (2.0 * n_modes as f64);
        kernel[i] = kacc / n_modes as f64;
    }

    let jmax = kernel.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let product = gamma1 * h * jmax;
    if product >= 0.5 {
        return Err(MildError::StepTooLarge { product });
    }
    let p0 = volterra_march(&kernel, &p00, gamma1, h);

    // final assembly: free flow of the pair plus the Duhamel convolution of
    // the force direction, trapezoidal in s with tau = t - s
    let mut out = vec![Complex64::new(0.0, 0.0); n_modes];
    for j in 0..n_modes {
        let jm = (n_modes - j) % n_modes;
        let psi1 = psi_hat[j];
        let psi2 = psi_hat[jm].conj();
        let (cc, ss) = env_scalars(damps[j], omegas[j], t);
        let env = (-damps[j] * t).exp();
        let free = env * ((Complex64::new(cc, -omegas[j] * ss)) * psi1 + damps[j] * ss * psi2);
        let mut duhamel = Complex64::new(0.0, 0.0);
        for (i, &p) in p0.iter().enumerate() {
            let tau = t - i as f64 * h;
            let (cct, sst) = env_scalars(damps[j], omegas[j], tau);
            let envt = (-damps[j] * tau).exp();
            let force = envt * (cct + sst * Complex64::new(-damps[j], -omegas[j]));
            let w = if i == 0 || i == nt - 1 { 0.5 } else { 1.0 };
            duhamel += w * force * Complex64::new(0.0, -gamma1 * p);
        }
        out[j] = free + duhamel * h;
    }
    Ok(out)
}
