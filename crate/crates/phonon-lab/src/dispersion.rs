//! Lattice coupling and dispersion relation.
//!
//! A coupling is a finitely supported, even sequence of real coefficients
//! `alpha_x`. Its symbol `alpha_hat(k) = sum_x alpha_x e^{2 pi i k x}` must be
//! nonnegative on the torus, and strictly positive away from k = 0; the
//! frequency is `omega(k) = sqrt(alpha_hat(k))`. Two presets cover the
//! nearest-neighbour chain with and without pinning; arbitrary finite-range
//! couplings are accepted after validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// sin(pi k).
pub fn sin_pi(k: f64) -> f64 {
    (std::f64::consts::PI * k).sin()
}

/// cos(pi k).
pub fn cos_pi(k: f64) -> f64 {
    (std::f64::consts::PI * k).cos()
}

/// Wrap k into the fundamental torus [-1/2, 1/2].
pub fn wrap_torus(k: f64) -> f64 {
    let w = k - k.round();
    // round() sends 0.5 to 1, so exact +1/2 maps to -1/2; both are the same
    // torus point and every symbol here is even, so callers never notice.
    w
}

/// Midpoint grid on the torus: k_j = -1/2 + (j + 1/2)/n. Never contains
/// k = 0 or the band edges +-1/2.
pub fn k_midpoints(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -0.5 + (j as f64 + 0.5) / n as f64)
        .collect()
}

const VALIDATION_GRID: usize = 4096;
const NEGATIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum CouplingSpec {
    NnUnpinned,
    NnPinned {
        omega0: f64,
    },
    /// Coefficients as (offset, value) pairs; both signs must be present and
    /// equal for every nonzero offset.
    Custom {
        coefficients: Vec<(i32, f64)>,
    },
}

#[derive(Debug, Error)]
pub enum DispersionError {
    #[error("coupling not even: alpha_{offset} = {value} but alpha_{mirror_offset} = {mirror}")]
    NotEven {
        offset: i32,
        value: f64,
        mirror_offset: i32,
        mirror: f64,
    },
    #[error("symbol negative at k = {k}: alpha_hat = {value}")]
    NotPositive { k: f64, value: f64 },
    #[error("symbol vanishes at k = 0 but its curvature {curvature} is not positive")]
    FlatAtZero { curvature: f64 },
    #[error("pinning frequency must be positive, got {omega0}")]
    InvalidPinning { omega0: f64 },
    #[error("frequency {u} outside the band [{min}, {max}]")]
    OutOfBand { u: f64, min: f64, max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Unpinned,
    Pinned,
    Custom,
}

/// Validated coupling: one-sided coefficient storage (alpha_0 .. alpha_r).
#[derive(Clone, Debug)]
pub struct LatticeCoupling {
    kind: Kind,
    omega0: f64,
    half: Vec<f64>,
}

pub fn build_coupling(spec: &CouplingSpec) -> Result<LatticeCoupling, DispersionError> {
    let coupling = match spec {
        CouplingSpec::NnUnpinned => LatticeCoupling {
            kind: Kind::Unpinned,
            omega0: 0.0,
            half: vec![2.0, -1.0],
        },
        CouplingSpec::NnPinned { omega0 } => {
            if !(*omega0 > 0.0) {
                return Err(DispersionError::InvalidPinning { omega0: *omega0 });
            }
            LatticeCoupling {
                kind: Kind::Pinned,
                omega0: *omega0,
                half: vec![2.0 + omega0 * omega0, -1.0],
            }
        }
        CouplingSpec::Custom { coefficients } => {
            let mut r = 0usize;
            for &(x, _) in coefficients {
                r = r.max(x.unsigned_abs() as usize);
            }
            let mut alpha = vec![0.0; 2 * r + 1];
            for &(x, v) in coefficients {
                alpha[(x + r as i32) as usize] += v;
            }
            for x in 1..=r {
                let a = alpha[r + x];
                let b = alpha[r - x];
                if a != b {
                    return Err(DispersionError::NotEven {
                        offset: x as i32,
                        value: a,
                        mirror_offset: -(x as i32),
                        mirror: b,
                    });
                }
            }
            LatticeCoupling {
                kind: Kind::Custom,
                omega0: 0.0,
                half: (0..=r).map(|x| alpha[r + x]).collect(),
            }
        }
    };
    coupling.validate()?;
    Ok(coupling)
}

impl LatticeCoupling {
    /// Symbol alpha_hat(k) = alpha_0 + 2 sum_{x>=1} alpha_x cos(2 pi x k).
    /// Evaluated at |k| so evenness holds to the bit.
    pub fn alpha_hat(&self, k: f64) -> f64 {
        let ka = wrap_torus(k).abs();
        let mut s = self.half[0];
        for (x, &a) in self.half.iter().enumerate().skip(1) {
            s += 2.0 * a * (2.0 * std::f64::consts::PI * x as f64 * ka).cos();
        }
        s
    }

    /// Coefficient alpha_x (by absolute offset; couplings are even).
    pub fn coefficient(&self, x: i32) -> f64 {
        self.half.get(x.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    pub fn support_radius(&self) -> usize {
        self.half.len() - 1
    }

    /// Row 0 of the n-periodic circulant: c_j = sum_m alpha_{j + m n}.
    pub fn circulant_row(&self, n: usize) -> Vec<f64> {
        let mut row = vec![0.0; n];
        let r = self.support_radius() as i64;
        for x in -r..=r {
            let j = x.rem_euclid(n as i64) as usize;
            row[j] += self.coefficient(x as i32);
        }
        row
    }

    fn validate(&self) -> Result<(), DispersionError> {
        for i in 0..=VALIDATION_GRID / 2 {
            let k = i as f64 / VALIDATION_GRID as f64;
            let v = self.alpha_hat(k);
            if v < -NEGATIVITY_TOL {
                return Err(DispersionError::NotPositive { k, value: v });
            }
        }
        let at_zero = self.alpha_hat(0.0);
        if at_zero.abs() <= 1e-12 {
            // alpha_hat''(0) = -4 pi^2 sum_x x^2 alpha_x; acoustic chains need
            // it positive so omega ~ c|k| near the zero.
            let mut sum = 0.0;
            for (x, &a) in self.half.iter().enumerate().skip(1) {
                sum += 2.0 * (x * x) as f64 * a;
            }
            let curvature = -4.0 * std::f64::consts::PI.powi(2) * sum;
            if curvature <= 0.0 {
                return Err(DispersionError::FlatAtZero { curvature });
            }
        } else if at_zero < 0.0 {
            return Err(DispersionError::NotPositive {
                k: 0.0,
                value: at_zero,
            });
        }
        Ok(())
    }
}

/// Dispersion relation omega = sqrt(alpha_hat) with group velocity and
/// inverse branches. Immutable; cheap to clone.
#[derive(Clone, Debug)]
pub struct Dispersion {
    coupling: LatticeCoupling,
    omega_min: f64,
    omega_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Dispersion {
    pub fn new(coupling: LatticeCoupling) -> Self {
        let (omega_min, omega_max) = match coupling.kind {
            Kind::Unpinned => (0.0, 2.0),
            Kind::Pinned => {
                let w0 = coupling.omega0;
                (w0, (w0 * w0 + 4.0).sqrt())
            }
            Kind::Custom => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..=VALIDATION_GRID / 2 {
                    let k = i as f64 / VALIDATION_GRID as f64;
                    let w = coupling.alpha_hat(k).max(0.0).sqrt();
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
                (lo, hi)
            }
        };
        Dispersion {
            coupling,
            omega_min,
            omega_max,
        }
    }

    pub fn coupling(&self) -> &LatticeCoupling {
        &self.coupling
    }

    /// True for the nn_unpinned preset, which carries closed forms for the
    /// boundary-value machinery downstream.
    pub fn is_unpinned_preset(&self) -> bool {
        self.coupling.kind == Kind::Unpinned
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn omega(&self, k: f64) -> f64 {
        self.coupling.alpha_hat(k).max(0.0).sqrt()
    }

    /// Group velocity in macroscopic units, omega'(k) / (2 pi). Odd in k; at
    /// k = 0 the acoustic case takes the right-sided value.
    pub fn omega_bar_prime(&self, k: f64) -> f64 {
        let kw = wrap_torus(k);
        match self.coupling.kind {
            Kind::Unpinned => {
                let c = cos_pi(kw.abs());
                if kw < 0.0 {
                    -c
                } else {
                    c
                }
            }
            Kind::Pinned => {
                let w = self.omega(kw);
                (2.0 * std::f64::consts::PI * kw).sin() / w
            }
            Kind::Custom => {
                let h = 1e-6;
                (self.omega(kw + h) - self.omega(kw - h)) / (2.0 * h)
                    / (2.0 * std::f64::consts::PI)
            }
        }
    }

    /// k with omega(k) = u on the branch [0, 1/2] (Plus) or its negation.
    pub fn inverse_branch(&self, u: f64, branch: Branch) -> Result<f64, DispersionError> {
        if u < self.omega_min - 1e-12 || u > self.omega_max + 1e-12 {
            return Err(DispersionError::OutOfBand {
                u,
                min: self.omega_min,
                max: self.omega_max,
            });
        }
        let uc = u.clamp(self.omega_min, self.omega_max);
        let k = match self.coupling.kind {
            Kind::Unpinned => (uc / 2.0).clamp(-1.0, 1.0).asin() / std::f64::consts::PI,
            Kind::Pinned => {
                let w0 = self.coupling.omega0;
                let s = ((uc * uc - w0 * w0).max(0.0)).sqrt() / 2.0;
                s.clamp(-1.0, 1.0).asin() / std::f64::consts::PI
            }
            Kind::Custom => self.invert_monotone(uc),
        };
        Ok(match branch {
            Branch::Plus => k,
            Branch::Minus => -k,
        })
    }

    // Safeguarded Newton on [0, 1/2]; omega' vanishes at band edges, so every
    // step is clipped to the current bracket and falls back to bisection.
    fn invert_monotone(&self, u: f64) -> f64 {
        let mut lo = 0.0_f64;
        let mut hi = 0.5_f64;
        let mut k = 0.25_f64;
        for _ in 0..200 {
            let f = self.omega(k) - u;
            if f.abs() < 1e-14 {
                break;
            }
            if f > 0.0 {
                hi = k;
            } else {
                lo = k;
            }
            let slope = 2.0 * std::f64::consts::PI * self.omega_bar_prime(k.max(1e-9));
            let newton = k - f / slope;
            k = if slope.abs() > 1e-12 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        k
    }

    /// Scan (0, 1/2) for intervals where omega decreases. Empty = unimodal.
    pub fn validate_unimodal(&self) -> UnimodalityReport {
        let n = VALIDATION_GRID / 2;
        let mut violations = Vec::new();
        let mut prev_k = 0.0;
        let mut prev_w = self.omega(0.0);
        for i in 1..=n {
            let k = 0.5 * i as f64 / n as f64;
            let w = self.omega(k);
            if w < prev_w - 1e-12 {
                violations.push(MonotoneViolation {
                    k_lo: prev_k,
                    k_hi: k,
                    omega_lo: prev_w,
                    omega_hi: w,
                });
            }
            prev_k = k;
            prev_w = w;
        }
        UnimodalityReport { violations }
    }
}

#[derive(Clone, Debug)]
pub struct MonotoneViolation {
    pub k_lo: f64,
    pub k_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
}

#[derive(Clone, Debug)]
pub struct UnimodalityReport {
    pub violations: Vec<MonotoneViolation>,
}

impl UnimodalityReport {
    pub fn is_unimodal(&self) -> bool {
        self.violations.is_empty()
    }
}
