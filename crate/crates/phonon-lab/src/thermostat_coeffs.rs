//! Thermostat response functions and interface coefficients.
//!
//! The chain's response to the point thermostat is encoded by
//! J(t) = int cos(omega(k) t) dk, its Laplace transform J~(lambda), the
//! resolvent g~ = (1 + gamma1 J~)^{-1}, and the boundary values
//! nu(k) = lim g~(eps - i omega(k)). The transmission / reflection /
//! absorption probabilities of a phonon hitting the interface all derive
//! from nu.

use crate::dispersion::{cos_pi, k_midpoints, Branch, Dispersion};
use crate::numerics::adaptive_simpson;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoeffsError {
    #[error("Laplace argument must have positive real part, got {lambda}")]
    LambdaOutOfDomain { lambda: Complex64 },
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_DEPTH: u32 = 48;

/// J(t) = int_T cos(omega(k) t) dk, absolute tolerance 1e-10.
pub fn j_of_t(t: f64, disp: &Dispersion) -> f64 {
    let f = |k: f64| Complex64::new((disp.omega(k) * t).cos(), 0.0);
    2.0 * adaptive_simpson(&f, 0.0, 0.5, QUAD_TOL, QUAD_DEPTH).re
}

/// Laplace transform J~(lambda) = int_T lambda / (lambda^2 + omega^2) dk for
/// Re lambda > 0. When lambda approaches the spectrum (lambda = eps - i
/// omega(k0)) the integrand peaks at the resonant wavenumber; the integration
/// range is split there so the adaptive rule sees the peak as an endpoint.
pub fn j_tilde(lambda: Complex64, disp: &Dispersion) -> Result<Complex64, CoeffsError> {
    if !(lambda.re > 0.0) {
        return Err(CoeffsError::LambdaOutOfDomain { lambda });
    }
    let f = |k: f64| {
        let w = disp.omega(k);
        lambda / (lambda * lambda + w * w)
    };
    let target = lambda.im.abs();
    let mut split = None;
    if target > disp.omega_min() && target < disp.omega_max() {
        if let Ok(kr) = disp.inverse_branch(target, Branch::Plus) {
            if kr > 1e-9 && kr < 0.5 - 1e-9 {
                split = Some(kr);
            }
        }
    }
    let integral = match split {
        Some(kr) => {
            adaptive_simpson(&f, 0.0, kr, 0.5 * QUAD_TOL, QUAD_DEPTH)
                + adaptive_simpson(&f, kr, 0.5, 0.5 * QUAD_TOL, QUAD_DEPTH)
        }
        None => adaptive_simpson(&f, 0.0, 0.5, QUAD_TOL, QUAD_DEPTH),
    };
    Ok(2.0 * integral)
}

/// Closed form for the unpinned nearest-neighbour chain:
/// J~(lambda) = (lambda^2 + 4)^{-1/2}, principal branch. The branch cut sits
/// on the imaginary axis, so the principal square root is the right branch
/// throughout the open right half-plane.
pub fn j_tilde_closed_unpinned(lambda: Complex64) -> Complex64 {
    (lambda * lambda + 4.0).sqrt().inv()
}

/// g~(lambda) = (1 + gamma1 J~(lambda))^{-1}; |g~| <= 1 on the right
/// half-plane.
pub fn g_tilde(lambda: Complex64, gamma1: f64, disp: &Dispersion) -> Result<Complex64, CoeffsError> {
    let jt = j_tilde(lambda, disp)?;
    Ok((Complex64::new(1.0, 0.0) + gamma1 * jt).inv())
}

/// Richardson nodes for the eps -> 0+ boundary limit.
pub const EPS_NODES: [f64; 3] = [1e-2, 1e-3, 1e-4];

// Two-level Richardson extrapolation on a geometric eps ladder (ratio 10),
// eliminating the O(eps) and O(eps^2) terms. Returns the extrapolated value
// and |v - v2| as a self-consistency error estimate.
fn richardson(g: [Complex64; 3]) -> (Complex64, f64) {
    let r = 10.0;
    let v1 = (r * g[1] - g[0]) / (r - 1.0);
    let v2 = (r * g[2] - g[1]) / (r - 1.0);
    let v = (r * r * v2 - v1) / (r * r - 1.0);
    (v, (v - v2).norm())
}

#[derive(Clone, Copy, Debug)]
pub struct NuResult {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

/// Boundary value nu(k) = lim_{eps->0+} g~(eps - i omega(k)), by evaluation
/// at the three eps nodes and Richardson extrapolation. `converged` is false
/// when the self-consistency estimate exceeds 1e-4, which happens near the
/// band edges where the limit degenerates.
pub fn nu(k: f64, gamma1: f64, disp: &Dispersion) -> Result<NuResult, CoeffsError> {
    if gamma1 == 0.0 {
        return Ok(NuResult {
            value: Complex64::new(1.0, 0.0),
            error: 0.0,
            converged: true,
        });
    }
    let w = disp.omega(k);
    let mut g = [Complex64::new(0.0, 0.0); 3];
    for (i, &eps) in EPS_NODES.iter().enumerate() {
        g[i] = g_tilde(Complex64::new(eps, -w), gamma1, disp)?;
    }
    let (value, error) = richardson(g);
    Ok(NuResult {
        value,
        error,
        converged: error <= 1e-4,
    })
}

/// Closed form for nn_unpinned: nu = 2|c(k)| / (2|c(k)| + gamma1), real.
pub fn nu_closed_unpinned(k: f64, gamma1: f64) -> f64 {
    let c = cos_pi(k).abs();
    2.0 * c / (2.0 * c + gamma1)
}

// Extrapolated boundary transform J~(0+ - i omega(k)) with its real part
// replaced by the exact value 1/(2|omega_bar'|). The real part of the
// boundary value is the half density of states, which is what makes
// p+ + p- + absorb = 1 an identity; enforcing it keeps the normalization
// exact even where the eps-ladder extrapolation of the real part degrades.
fn boundary_j_tilde(k: f64, disp: &Dispersion) -> Result<Complex64, CoeffsError> {
    let w = disp.omega(k);
    let mut g = [Complex64::new(0.0, 0.0); 3];
    for (i, &eps) in EPS_NODES.iter().enumerate() {
        g[i] = j_tilde(Complex64::new(eps, -w), disp)?;
    }
    let (v, _) = richardson(g);
    let obp = disp.omega_bar_prime(k).abs();
    Ok(Complex64::new(0.5 / obp, v.im))
}

/// Transmission, reflection, and absorption probabilities from a boundary
/// value nu at wavenumber k with |group velocity| obp.
pub fn coefficients_from_nu(nu: Complex64, gamma1: f64, obp: f64) -> (f64, f64, f64) {
    let wp = gamma1 * nu / (2.0 * obp);
    let p_plus = (Complex64::new(1.0, 0.0) - wp).norm_sqr();
    let p_minus = wp.norm_sqr();
    let absorb = gamma1 * nu.norm_sqr() / obp;
    (p_plus, p_minus, absorb)
}

#[derive(Clone, Copy, Debug)]
pub struct InterfaceEntry {
    pub k: f64,
    pub nu: Complex64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub absorb: f64,
    /// False for band-edge cells (min(|k|, 1/2 - |k|) < 1/nk), where the
    /// group velocity vanishes and the coefficients are not defined.
    pub valid: bool,
}

/// Interface coefficient table on the midpoint k-grid.
#[derive(Clone, Debug)]
pub struct InterfaceCoefficients {
    pub gamma1: f64,
    entries: Vec<InterfaceEntry>,
    dk: f64,
}

impl InterfaceCoefficients {
    /// Build the table: closed-form nu for the unpinned preset, the
    /// boundary-transform construction otherwise.
    pub fn new(gamma1: f64, disp: &Dispersion, nk: usize) -> Result<Self, CoeffsError> {
        let ks = k_midpoints(nk);
        let dk = 1.0 / nk as f64;
        let mut entries = Vec::with_capacity(nk);
        for &k in &ks {
            let valid = k.abs().min(0.5 - k.abs()) >= dk;
            let nu_k = if gamma1 == 0.0 {
                Complex64::new(1.0, 0.0)
            } else if disp.is_unpinned_preset() {
                Complex64::new(nu_closed_unpinned(k, gamma1), 0.0)
            } else {
                let jb = boundary_j_tilde(k, disp)?;
                (Complex64::new(1.0, 0.0) + gamma1 * jb).inv()
            };
            let obp = disp.omega_bar_prime(k).abs();
            let (p_plus, p_minus, absorb) = coefficients_from_nu(nu_k, gamma1, obp);
            entries.push(InterfaceEntry {
                k,
                nu: nu_k,
                p_plus,
                p_minus,
                absorb,
                valid,
            });
        }
        Ok(InterfaceCoefficients {
            gamma1,
            entries,
            dk,
        })
    }

    pub fn entries(&self) -> &[InterfaceEntry] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &InterfaceEntry {
        &self.entries[j]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{build_coupling, CouplingSpec};
    use crate::numerics::bessel_j0;
    use rand::Rng;

    fn unpinned() -> Dispersion {
        Dispersion::new(build_coupling(&CouplingSpec::NnUnpinned).unwrap())
    }

    fn pinned(w0: f64) -> Dispersion {
        Dispersion::new(build_coupling(&CouplingSpec::NnPinned { omega0: w0 }).unwrap())
    }

    #[test]
    fn j_at_zero_is_one() {
        assert!((j_of_t(0.0, &unpinned()) - 1.0).abs() < 1e-12);
        assert!((j_of_t(0.0, &pinned(1.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unpinned_j_is_bessel() {
        let d = unpinned();
        assert!((j_of_t(1.0, &d) - bessel_j0(2.0)).abs() < 1e-10);
        assert!((j_of_t(1.0, &d) - 0.2238908).abs() < 1e-7);
        assert!((j_of_t(10.0, &d) - bessel_j0(20.0)).abs() < 1e-8);
    }

    #[test]
    fn laplace_transform_closed_form() {
        let d = unpinned();
        let got = j_tilde(Complex64::new(1.0, 0.0), &d).unwrap();
        assert!((got.re - 1.0 / 5.0_f64.sqrt()).abs() < 1e-9);
        assert!(got.im.abs() < 1e-10);
        // against the closed form at complex arguments
        for lam in [
            Complex64::new(0.5, 0.8),
            Complex64::new(2.0, -3.0),
            Complex64::new(1e-2, -1.4),
        ] {
            let q = j_tilde(lam, &d).unwrap();
            let c = j_tilde_closed_unpinned(lam);
            assert!((q - c).norm() < 1e-8, "lambda={lam}: {q} vs {c}");
        }
    }

    #[test]
    fn laplace_transform_symmetries() {
        let d = pinned(0.8);
        let lam = Complex64::new(0.3, 0.7);
        let a = j_tilde(lam, &d).unwrap();
        let b = j_tilde(lam.conj(), &d).unwrap();
        assert!((a.conj() - b).norm() < 1e-10);
        let real = j_tilde(Complex64::new(0.9, 0.0), &d).unwrap();
        assert!(real.im.abs() < 1e-12 && real.re > 0.0);
        assert!(j_tilde(Complex64::new(-0.1, 1.0), &d).is_err());
        assert!(j_tilde(Complex64::new(0.0, 1.0), &d).is_err());
    }

    #[test]
    fn resolvent_values_and_contraction() {
        let d = unpinned();
        let g = g_tilde(Complex64::new(1.0, 0.0), 2.0, &d).unwrap();
        let closed = 1.0 / (1.0 + 2.0 / 5.0_f64.sqrt());
        assert!((g.re - closed).abs() < 1e-9);
        assert!((g.re - 0.5278640450004206).abs() < 1e-9);
        assert!(g.im.abs() < 1e-10);
        assert!((g_tilde(Complex64::new(0.4, -1.3), 0.0, &d).unwrap()
            - Complex64::new(1.0, 0.0))
        .norm()
            .abs()
            < 1e-12);
        let mut rng = crate::numerics::stream_rng(31, 0);
        for _ in 0..100 {
            let lam = Complex64::new(rng.random_range(0.01..5.0), rng.random_range(-5.0..5.0));
            let g = g_tilde(lam, 1.3, &d).unwrap();
            assert!(g.norm() <= 1.0 + 1e-10, "|g~({lam})| = {}", g.norm());
        }
    }

    #[test]
    fn boundary_limit_matches_closed_form() {
        let d = unpinned();
        let r = nu(0.25, 1.0, &d).unwrap();
        assert!(r.converged);
        assert!((r.value.re - 0.5857864376269049).abs() < 1e-7);
        assert!((r.value.re - 0.5857864).abs() < 1e-6);
        assert!(r.value.im.abs() < 1e-6);
        // gamma1 = 0 short-circuits to 1
        let r0 = nu(0.3, 0.0, &d).unwrap();
        assert_eq!(r0.value, Complex64::new(1.0, 0.0));
        // evenness
        let a = nu(0.17, 0.7, &d).unwrap().value;
        let b = nu(-0.17, 0.7, &d).unwrap().value;
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn extrapolated_nu_tracks_closed_form_on_interior() {
        let d = unpinned();
        for k in [0.05, 0.1, 0.2, 0.25, 0.33, 0.42] {
            for gamma1 in [0.5, 1.0, 2.0] {
                let r = nu(k, gamma1, &d).unwrap();
                assert!(r.converged, "k={k} gamma1={gamma1}");
                let closed = nu_closed_unpinned(k, gamma1);
                assert!(
                    (r.value - Complex64::new(closed, 0.0)).norm() < 1e-6,
                    "k={k} gamma1={gamma1}: {} vs {closed}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn interface_table_normalization_is_exact() {
        let du = unpinned();
        let dp = pinned(1.0);
        for (disp, tol) in [(&du, 1e-12), (&dp, 1e-12)] {
            let table = InterfaceCoefficients::new(1.0, disp, 64).unwrap();
            for e in table.entries().iter().filter(|e| e.valid) {
                let sum = e.p_plus + e.p_minus + e.absorb;
                assert!((sum - 1.0).abs() < tol, "k={}: sum={sum}", e.k);
                assert!(e.p_plus >= 0.0 && e.p_minus >= 0.0 && e.absorb >= 0.0);
                assert!(e.p_plus <= 1.0 + 1e-10 && e.p_minus <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn frozen_interface_values_at_quarter() {
        let d = unpinned();
        let table = InterfaceCoefficients::new(1.0, &d, 256).unwrap();
        let e = table
            .entries()
            .iter()
            .min_by(|a, b| {
                (a.k - 0.25)
                    .abs()
                    .partial_cmp(&(b.k - 0.25).abs())
                    .unwrap()
            })
            .unwrap();
        // nearest cell midpoint is not exactly 0.25; evaluate directly instead
        assert!((e.k - 0.25).abs() < 1e-2);
        let nu_q = Complex64::new(nu_closed_unpinned(0.25, 1.0), 0.0);
        let (pp, pm, gg) = coefficients_from_nu(nu_q, 1.0, cos_pi(0.25));
        assert!((pp - 0.3431457505076197).abs() < 1e-12);
        assert!((pm - 0.17157287525380993).abs() < 1e-12);
        assert!((gg - 0.4852813742385705).abs() < 1e-12);
        assert!((pp + pm + gg - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_is_fully_transparent() {
        let d = pinned(0.6);
        let table = InterfaceCoefficients::new(0.0, &d, 32).unwrap();
        for e in table.entries().iter().filter(|e| e.valid) {
            assert!((e.p_plus - 1.0).abs() < 1e-14);
            assert!(e.p_minus.abs() < 1e-14);
            assert!(e.absorb.abs() < 1e-14);
        }
    }

    #[test]
    fn strong_coupling_reflects() {
        // closed form: curly-p = gamma1 / (2 c + gamma1) at k = 1/4
        let gamma1 = 1e3;
        let c = 2.0 * cos_pi(0.25);
        let wp = gamma1 / (c + gamma1);
        let oracle = wp * wp;
        let nu_q = Complex64::new(nu_closed_unpinned(0.25, gamma1), 0.0);
        let (_, pm, _) = coefficients_from_nu(nu_q, gamma1, cos_pi(0.25));
        assert!((pm - oracle).abs() < 1e-12);
        assert!(pm > 0.98, "near-total reflection expected, got {pm}");
        assert!((pm - 0.99717).abs() < 1e-5);
    }

    #[test]
    fn pinned_table_matches_raw_extrapolation_in_the_interior() {
        let d = pinned(1.0);
        let gamma1 = 1.0;
        let table = InterfaceCoefficients::new(gamma1, &d, 64).unwrap();
        for e in table.entries() {
            if e.k.abs() < 0.1 || e.k.abs() > 0.4 {
                continue; // compare only well inside the band
            }
            let raw = nu(e.k, gamma1, &d).unwrap();
            assert!(raw.converged);
            assert!(
                (raw.value - e.nu).norm() < 1e-5,
                "k={}: raw {} vs table {}",
                e.k,
                raw.value,
                e.nu
            );
        }
    }

    #[test]
    fn feb_identity_holds_for_table_nu() {
        for (disp, gamma1) in [(unpinned(), 0.5), (pinned(0.9), 1.7)] {
            let table = InterfaceCoefficients::new(gamma1, &disp, 64).unwrap();
            for e in table.entries().iter().filter(|e| e.valid) {
                let obp = disp.omega_bar_prime(e.k).abs();
                let lhs = e.nu.re;
                let rhs = (1.0 + gamma1 / (2.0 * obp)) * e.nu.norm_sqr();
                assert!((lhs - rhs).abs() < 1e-12, "k={}", e.k);
            }
        }
    }
}
