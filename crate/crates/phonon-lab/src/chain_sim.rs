//! Microscopic chain dynamics: the thermostatted harmonic chain with
//! conservative momentum-exchange noise on a finite periodic ring.
//!
//! The integrator is a Strang composition of three exact flows:
//! harmonic phase rotation (spectral), momentum-triple rotations realizing
//! the conservative noise, and the exact Ornstein-Uhlenbeck update of the
//! thermostatted momentum. Each sub-flow preserves its own invariants
//! exactly, which is what makes quadratic observables trustworthy.
//!
//! Array index idx holds physical site x = idx - N/2, so the thermostat
//! (physical x = 0) sits at array index N/2 and macroscopic positions are
//! y = eps * (idx - N/2).

use crate::dispersion::{wrap_torus, Dispersion};
use crate::numerics::{pairwise_sum, stream_rng};
use crate::scattering::theta_coeff;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain size must be even and at least 6, got {n}")]
    BadSize { n: usize },
    #[error("packet support [{lo}, {hi}] wraps the periodic window [-{half_l}, {half_l})")]
    PacketWrapsChain { lo: f64, hi: f64, half_l: f64 },
    #[error("state became non-finite at step {step}")]
    NumericalBlowup { step: u64 },
    #[error("covariance oracle limited to N <= 32, got {n}")]
    CovarianceTooLarge { n: usize },
}

#[derive(Clone, Debug)]
pub struct ChainParams {
    pub n: usize,
    pub eps: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub temperature: f64,
    pub dispersion: Dispersion,
}

impl ChainParams {
    /// Thermostat array index (physical site x = 0).
    pub fn thermostat_index(&self) -> usize {
        self.n / 2
    }

    /// Macroscopic window length L = eps * N.
    pub fn window_length(&self) -> f64 {
        self.eps * self.n as f64
    }

    /// Default micro step: resolve the fastest phase and the OU relaxation.
    pub fn default_dt(&self) -> f64 {
        let w = self.dispersion.omega_max().max(1e-12);
        let by_omega = 0.1 / w;
        if self.gamma1 > 0.0 {
            by_omega.min(0.1 / self.gamma1)
        } else {
            by_omega
        }
    }

    fn mode_k(&self, j: usize) -> f64 {
        wrap_torus(j as f64 / self.n as f64)
    }
}

/// Spectral chain state: mode amplitudes of positions and momenta on the
/// FFT grid k_j = j/N. Kept spectral because the harmonic flow is diagonal
/// here; the noise passes transform p back and forth each step.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub qh: Vec<Complex64>,
    pub ph: Vec<Complex64>,
    pub t: f64,
    pub steps: u64,
}

/// Wave field psi_hat = omega qhat + i phat on the mode grid.
#[derive(Clone, Debug)]
pub struct WaveField {
    pub eps: f64,
    pub psi_hat: Vec<Complex64>,
}

impl WaveField {
    /// Discrete L2 norm squared (1/N) sum |psi_hat|^2; equals 2E.
    pub fn norm_sqr(&self) -> f64 {
        let terms: Vec<f64> = self.psi_hat.iter().map(|z| z.norm_sqr()).collect();
        pairwise_sum(&terms) / self.psi_hat.len() as f64
    }
}

/// Two independent RNG streams per trajectory: bond noise and thermostat.
pub struct ChainRng {
    pub bonds: ChaCha8Rng,
    pub thermostat: ChaCha8Rng,
}

impl ChainRng {
    pub fn for_trajectory(base_seed: u64, trajectory: u64) -> Self {
        ChainRng {
            bonds: stream_rng(base_seed, 2 * trajectory),
            thermostat: stream_rng(base_seed, 2 * trajectory + 1),
        }
    }
}

// Exact rotation of a momentum triple about the axis (1,1,1) by angle phi.
// Conserves a+b+c and a^2+b^2+c^2 to roundoff for any angle.
#[inline]
fn rotate_triple(a: f64, b: f64, c: f64, phi: f64) -> (f64, f64, f64) {
    let co = phi.cos();
    let si = phi.sin() / 3.0_f64.sqrt();
    let m = (a + b + c) / 3.0;
    let w = 1.0 - co;
    (
        co * a + si * (b - c) + w * m,
        co * b + si * (c - a) + w * m,
        co * c + si * (a - b) + w * m,
    )
}

/// Strang-splitting integrator with cached spectral tables and FFT plans.
pub struct ChainStepper {
    pub params: ChainParams,
    pub dt: f64,
    cw: Vec<f64>,
    sw: Vec<f64>,
    snc: Vec<f64>,
    omegas: Vec<f64>,
    ou_decay: f64,
    ou_sigma: f64,
    angle_scale: f64,
    therm_idx: usize,
    colors: [Vec<usize>; 3],
    extras: Vec<usize>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    pbuf: Vec<Complex64>,
    angles: Vec<f64>,
}

impl ChainStepper {
    pub fn new(params: ChainParams, dt: f64) -> Result<Self, ChainError> {
        let n = params.n;
        if n < 6 || n % 2 != 0 {
            return Err(ChainError::BadSize { n });
        }
        assert!(dt > 0.0);
        let h = 0.5 * dt;
        let mut cw = vec![0.0; n];
        let mut sw = vec![0.0; n];
        let mut snc = vec![0.0; n];
        let mut omegas = vec![0.0; n];
        for j in 0..n {
            let w = params.dispersion.omega(params.mode_k(j));
            omegas[j] = w;
            cw[j] = (w * h).cos();
            sw[j] = (w * h).sin();
            snc[j] = if w > 1e-12 { (w * h).sin() / w } else { h };
        }
        let g1 = params.gamma1;
        let ou_decay = (-g1 * dt).exp();
        let ou_sigma = (params.temperature * (1.0 - (-2.0 * g1 * dt).exp())).sqrt();
        let angle_scale = (3.0 * params.eps * params.gamma0 * dt).sqrt();
        // momentum-triple centers colored mod 3 so each batch touches
        // disjoint sites; the ring remainder is applied sequentially
        let main = 3 * (n / 3);
        let mut colors: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for c in 0..main {
            colors[c % 3].push(c);
        }
        let extras: Vec<usize> = (main..n).collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n);
        let fft_inv = planner.plan_fft_inverse(n);
        let scratch_len = fft_fwd
            .get_inplace_scratch_len()
            .max(fft_inv.get_inplace_scratch_len());
        Ok(ChainStepper {
            therm_idx: params.thermostat_index(),
            params,
            dt,
            cw,
            sw,
            snc,
            omegas,
            ou_decay,
            ou_sigma,
            angle_scale,
            colors,
            extras,
            fft_fwd,
            fft_inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            pbuf: vec![Complex64::new(0.0, 0.0); n],
            angles: vec![0.0; n],
        })
    }

    fn harmonic_half(&self, state: &mut ChainState) {
        for j in 0..self.params.n {
            let q = state.qh[j];
            let p = state.ph[j];
            state.qh[j] = self.cw[j] * q + self.snc[j] * p;
            state.ph[j] = -self.omegas[j] * self.sw[j] * q + self.cw[j] * p;
        }
    }

    /// One Strang step: harmonic half, noise sweep + thermostat on p,
    /// harmonic half. Errors out (with the step index) if the state leaves
    /// the finite range.
    pub fn step(&mut self, state: &mut ChainState, rng: &mut ChainRng) -> Result<(), ChainError> {
        let n = self.params.n;
        self.harmonic_half(state);

        // p to real space
        self.pbuf.copy_from_slice(&state.ph);
        self.fft_inv
            .process_with_scratch(&mut self.pbuf, &mut self.scratch);
        let inv_n = 1.0 / n as f64;
        let mut p: Vec<f64> = self.pbuf.iter().map(|z| z.re * inv_n).collect();

        if self.params.gamma0 > 0.0 && self.params.eps > 0.0 {
            for x in 0..n {
                let g: f64 = rng.bonds.sample(StandardNormal);
                self.angles[x] = self.angle_scale * g;
            }
            for color in &self.colors {
                for &x in color {
                    let xm = (x + n - 1) % n;
                    let xp = (x + 1) % n;
                    let (a, b, c) = rotate_triple(p[xm], p[x], p[xp], self.angles[x]);
                    p[xm] = a;
                    p[x] = b;
                    p[xp] = c;
                }
            }
            for &x in &self.extras {
                let xm = (x + n - 1) % n;
                let xp = (x + 1) % n;
                let (a, b, c) = rotate_triple(p[xm], p[x], p[xp], self.angles[x]);
                p[xm] = a;
                p[x] = b;
                p[xp] = c;
            }
        }

        if self.params.gamma1 > 0.0 {
            let g: f64 = rng.thermostat.sample(StandardNormal);
            p[self.therm_idx] = self.ou_decay * p[self.therm_idx] + self.ou_sigma * g;
        }

        for (dst, &src) in self.pbuf.iter_mut().zip(p.iter()) {
            *dst = Complex64::new(src, 0.0);
        }
        self.fft_fwd
            .process_with_scratch(&mut self.pbuf, &mut self.scratch);
        state.ph.copy_from_slice(&self.pbuf);

        self.harmonic_half(state);
        state.t += self.dt;
        state.steps += 1;
        if state
            .ph
            .iter()
            .chain(state.qh.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(ChainError::NumericalBlowup { step: state.steps });
        }
        Ok(())
    }

    /// Real-space coordinates (q, p) of a state.
    pub fn real_coords(&mut self, state: &ChainState) -> (Vec<f64>, Vec<f64>) {
        let n = self.params.n;
        let inv_n = 1.0 / n as f64;
        self.pbuf.copy_from_slice(&state.qh);
        self.fft_inv
            .process_with_scratch(&mut self.pbuf, &mut self.scratch);
        let q = self.pbuf.iter().map(|z| z.re * inv_n).collect();
        self.pbuf.copy_from_slice(&state.ph);
        self.fft_inv
            .process_with_scratch(&mut self.pbuf, &mut self.scratch);
        let p = self.pbuf.iter().map(|z| z.re * inv_n).collect();
        (q, p)
    }
}

/// Wave field psi_hat(k_j) = omega(k_j) qhat_j + i phat_j.
pub fn wave_function(state: &ChainState, params: &ChainParams) -> WaveField {
    let psi_hat = (0..params.n)
        .map(|j| {
            let w = params.dispersion.omega(params.mode_k(j));
            w * state.qh[j] + Complex64::new(0.0, 1.0) * state.ph[j]
        })
        .collect();
    WaveField {
        eps: params.eps,
        psi_hat,
    }
}

/// Reconstruct a chain state from a wave field. Modes with omega = 0 cannot
/// store a position amplitude; their symmetric part is dropped (zero for any
/// field that came from a real chain state).
pub fn state_from_wave_field(wf: &WaveField, params: &ChainParams) -> ChainState {
    let n = params.n;
    assert_eq!(wf.psi_hat.len(), n);
    let mut qh = vec![Complex64::new(0.0, 0.0); n];
    let mut ph = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let jm = (n - j) % n;
        let rev = wf.psi_hat[jm].conj();
        let w = params.dispersion.omega(params.mode_k(j));
        qh[j] = if w > 1e-12 {
            (wf.psi_hat[j] + rev) / (2.0 * w)
        } else {
            Complex64::new(0.0, 0.0)
        };
        ph[j] = (wf.psi_hat[j] - rev) / Complex64::new(0.0, 2.0);
    }
    ChainState {
        qh,
        ph,
        t: 0.0,
        steps: 0,
    }
}

/// Total energy from the spectral state, (1/2N) sum (omega^2|qh|^2 + |ph|^2).
/// Cheap (no FFT); used for per-step tracking.
pub fn energy_total_spectral(state: &ChainState, params: &ChainParams) -> f64 {
    let n = params.n;
    let terms: Vec<f64> = (0..n)
        .map(|j| {
            let w = params.dispersion.omega(params.mode_k(j));
            w * w * state.qh[j].norm_sqr() + state.ph[j].norm_sqr()
        })
        .collect();
    pairwise_sum(&terms) / (2.0 * n as f64)
}

/// Total and per-site energy from the quadratic forms in real space:
/// e_x = p_x^2/2 + (1/2) q_x (alpha * q)_x.
pub fn energy(state: &ChainState, params: &ChainParams) -> (f64, Vec<f64>) {
    let n = params.n;
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(n);
    let inv_n = 1.0 / n as f64;
    let mut qb = state.qh.clone();
    inv.process(&mut qb);
    let q: Vec<f64> = qb.iter().map(|z| z.re * inv_n).collect();
    let mut pb = state.ph.clone();
    inv.process(&mut pb);
    let p: Vec<f64> = pb.iter().map(|z| z.re * inv_n).collect();
    let row = params.dispersion.coupling().circulant_row(n);
    let radius = params.dispersion.coupling().support_radius();
    let sites: Vec<f64> = (0..n)
        .map(|x| {
            let mut conv = row[0] * q[x];
            for d in 1..=radius {
                conv += row[d % n] * (q[(x + d) % n] + q[(x + n - d % n) % n]);
            }
            0.5 * p[x] * p[x] + 0.5 * q[x] * conv
        })
        .collect();
    (pairwise_sum(&sites), sites)
}

/// Smooth compactly supported wavenumber density: a (1-u^2)^3 bump on
/// [center - half_width, center + half_width], away from k = 0 and +-1/2.
#[derive(Clone, Copy, Debug)]
pub struct RhoBump {
    pub center: f64,
    pub half_width: f64,
}

impl Default for RhoBump {
    fn default() -> Self {
        RhoBump {
            center: 0.25,
            half_width: 0.2,
        }
    }
}

impl RhoBump {
    pub fn density(&self, k: f64) -> f64 {
        let u = (k - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let v = 1.0 - u * u;
            // normalization: int_{-1}^{1} (1-u^2)^3 du = 32/35
            v * v * v * 35.0 / (32.0 * self.half_width)
        }
    }

    // CDF in the bump variable u in [-1, 1]
    fn cdf_u(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        35.0 / 32.0 * (u - u.powi(3) + 0.6 * u.powi(5) - u.powi(7) / 7.0) + 0.5
    }

    /// Quantile function: k with CDF(k) = quantile.
    pub fn ppf(&self, quantile: f64) -> f64 {
        let q = quantile.clamp(0.0, 1.0);
        let mut lo = -1.0_f64;
        let mut hi = 1.0_f64;
        let mut u = 2.0 * q - 1.0;
        for _ in 0..100 {
            let f = self.cdf_u(u) - q;
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let der = 35.0 / 32.0 * (1.0 - u * u).powi(3);
            let newton = u - f / der;
            u = if der > 1e-12 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        self.center + self.half_width * u
    }
}

/// Random-phase wave-packet generator. Per realization:
/// psi_x = A exp(-((eps x - y0)/sigma)^2 / 2) exp(i(2 pi k0 x + U)),
/// k0 ~ rho, U uniform; (q, p) recovered through the wave-field split.
#[derive(Clone, Copy, Debug)]
pub struct PacketGenerator {
    pub amplitude: f64,
    pub sigma: f64,
    pub y0: f64,
    pub rho: RhoBump,
}

impl PacketGenerator {
    /// Kinetic-scale energy: eps * E = A^2 sigma sqrt(pi) / 2, independent
    /// of eps.
    pub fn energy_scale(&self) -> f64 {
        self.amplitude * self.amplitude * self.sigma * std::f64::consts::PI.sqrt() / 2.0
    }

    /// Macroscopic initial Wigner profile W0(y,k) = (A^2/2) |phi|^2 rho(k).
    pub fn w0_profile(&self, y: f64, k: f64) -> f64 {
        let u = (y - self.y0) / self.sigma;
        0.5 * self.amplitude * self.amplitude * (-u * u).exp() * self.rho.density(k)
    }

    /// Stratified wavenumber for ensemble slot r of m (quantile midpoints).
    pub fn stratified_k0(&self, r: usize, m: usize) -> f64 {
        self.rho.ppf((r as f64 + 0.5) / m as f64)
    }

    pub fn init_state(
        &self,
        params: &ChainParams,
        rng: &mut impl Rng,
    ) -> Result<ChainState, ChainError> {
        let k0 = self.rho.ppf(rng.random::<f64>());
        let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        self.init_state_with(params, k0, phase)
    }

    pub fn init_state_with(
        &self,
        params: &ChainParams,
        k0: f64,
        phase: f64,
    ) -> Result<ChainState, ChainError> {
        let n = params.n;
        let half_l = 0.5 * params.window_length();
        let lo = self.y0 - 4.0 * self.sigma;
        let hi = self.y0 + 4.0 * self.sigma;
        if self.amplitude != 0.0 && (lo <= -half_l || hi >= half_l) {
            return Err(ChainError::PacketWrapsChain { lo, hi, half_l });
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        for (idx, v) in psi.iter_mut().enumerate() {
            let xt = idx as f64 - (n / 2) as f64;
            let arg = (params.eps * xt - self.y0) / self.sigma;
            let amp = self.amplitude * (-0.5 * arg * arg).exp();
            let th = 2.0 * std::f64::consts::PI * k0 * xt + phase;
            *v = Complex64::new(amp * th.cos(), amp * th.sin());
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut psi);
        let wf = WaveField {
            eps: params.eps,
            psi_hat: psi,
        };
        Ok(state_from_wave_field(&wf, params))
    }
}

/// Exact second-moment oracle: the state z = (q, p) obeys a linear SDE, so
/// its covariance satisfies the closed matrix ODE
/// dM/dt = A M + M A^T + eps gamma0 sum_x B_x M B_x^T + 2 gamma1 T e0 e0^T,
/// integrated here with RK4 at dt = 1e-3.
pub fn evolve_covariance_exact(
    m0: &Array2<f64>,
    t: f64,
    params: &ChainParams,
) -> Result<Array2<f64>, ChainError> {
    let n = params.n;
    if n > 32 {
        return Err(ChainError::CovarianceTooLarge { n });
    }
    let dim = 2 * n;
    assert_eq!(m0.shape(), [dim, dim]);
    let j0 = params.thermostat_index();

    let mut a = Array2::<f64>::zeros((dim, dim));
    let alpha_row = params.dispersion.coupling().circulant_row(n);
    let mut theta_row = vec![0.0; n];
    for d in -2i64..=2 {
        theta_row[d.rem_euclid(n as i64) as usize] += theta_coeff(d as i32);
    }
    let eg_half = 0.5 * params.eps * params.gamma0;
    for x in 0..n {
        a[[x, n + x]] = 1.0;
        for d in 0..n {
            if alpha_row[d] != 0.0 {
                a[[n + x, (x + d) % n]] -= alpha_row[d];
            }
            if theta_row[d] != 0.0 {
                a[[n + x, n + (x + d) % n]] -= eg_half * theta_row[d];
            }
        }
    }
    a[[n + j0, n + j0]] -= params.gamma1;

    let mut e = Array2::<f64>::zeros((dim, dim));
    e[[n + j0, n + j0]] = 2.0 * params.gamma1 * params.temperature;

    let s = [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]];
    let eg = params.eps * params.gamma0;
    let rhs = |m: &Array2<f64>| -> Array2<f64> {
        let mut out = a.dot(m) + m.dot(&a.t()) + &e;
        if eg > 0.0 {
            for x in 0..n {
                let idx = [(x + n - 1) % n, x, (x + 1) % n];
                let mut sub = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        sub[r][c] = m[[n + idx[r], n + idx[c]]];
                    }
                }
                // S sub S^T
                let mut tmp = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        tmp[r][c] = (0..3).map(|q| s[r][q] * sub[q][c]).sum();
                    }
                }
                for r in 0..3 {
                    for c in 0..3 {
                        let v: f64 = (0..3).map(|q| tmp[r][q] * s[c][q]).sum();
                        out[[n + idx[r], n + idx[c]]] += eg * v;
                    }
                }
            }
        }
        out
    };

    let dt = 1e-3;
    let steps = (t / dt).round().max(1.0) as usize;
    let h = t / steps as f64;
    let mut m = m0.clone();
    for _ in 0..steps {
        let k1 = rhs(&m);
        let k2 = rhs(&(&m + &(&k1 * (0.5 * h))));
        let k3 = rhs(&(&m + &(&k2 * (0.5 * h))));
        let k4 = rhs(&(&m + &(&k3 * h)));
        m = &m + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0));
    }
    Ok(m)
}

/// Energy functional of a covariance matrix: (1/2) tr M_pp + (1/2) alpha : M_qq.
pub fn covariance_energy(m: &Array2<f64>, params: &ChainParams) -> f64 {
    let n = params.n;
    let row = params.dispersion.coupling().circulant_row(n);
    let mut total = 0.0;
    for x in 0..n {
        total += 0.5 * m[[n + x, n + x]];
        for d in 0..n {
            if row[d] != 0.0 {
                total += 0.5 * row[d] * m[[x, (x + d) % n]];
            }
        }
    }
    total
}
