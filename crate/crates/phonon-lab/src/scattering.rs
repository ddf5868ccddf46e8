//! Conservative-noise scattering: the elementary kernel r, the symmetrized
//! pair kernel R(k,k'), the total rate R(k), the generator L, the gain
//! operator, and inverse-CDF sampling of outgoing modes.
//!
//! All kernels are trigonometric polynomials, so the uniform midpoint rule
//! integrates them exactly once the grid has more than a handful of points;
//! the tables below rely on that instead of adaptive quadrature.

use crate::dispersion::{k_midpoints, sin_pi};
use crate::numerics::pairwise_sum;
use rand::Rng;
use thiserror::Error;

/// r(k,k') = 4 s(k) s(k-k') s(2k-k'), s = sin(pi .).
pub fn r_kernel(k: f64, kp: f64) -> f64 {
    4.0 * sin_pi(k) * sin_pi(k - kp) * sin_pi(2.0 * k - kp)
}

/// R(k,k') = [r^2(k, k-k') + r^2(k, k+k')] / 2.
pub fn r_pair(k: f64, kp: f64) -> f64 {
    let a = r_kernel(k, k - kp);
    let b = r_kernel(k, k + kp);
    0.5 * (a * a + b * b)
}

/// Total rate R(k) = s^2(2k) + 2 s^2(k); equals the k'-integral of R(k,k').
pub fn r_total(k: f64) -> f64 {
    let s2 = sin_pi(2.0 * k);
    let s = sin_pi(k);
    s2 * s2 + 2.0 * s * s
}

/// Symbol of the momentum-exchange dissipation: theta_hat = 4 R(k).
pub fn theta_hat(k: f64) -> f64 {
    4.0 * r_total(k)
}

/// Real-space coefficients of theta_hat by absolute offset |x| = 0, 1, 2.
pub fn theta_coeff(x: i32) -> f64 {
    match x.unsigned_abs() {
        0 => 6.0,
        1 => -2.0,
        2 => -1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("total scattering rate vanishes at k = {k}")]
    ZeroRate { k: f64 },
}

/// Precomputed kernel tables on a midpoint k-grid.
pub struct ScatteringTable {
    pub gamma0: f64,
    k: Vec<f64>,
    dk: f64,
    rate: Vec<f64>,
    pair: Vec<f64>,    // row-major nk x nk
    row_cdf: Vec<f64>, // row-major nk x nk, normalized per row
    nk: usize,
}

impl ScatteringTable {
    pub fn new(gamma0: f64, nk: usize) -> Self {
        assert!(nk >= 8, "midpoint rule needs at least 8 cells");
        let k = k_midpoints(nk);
        let dk = 1.0 / nk as f64;
        let rate: Vec<f64> = k.iter().map(|&kj| r_total(kj)).collect();
        let mut pair = vec![0.0; nk * nk];
        let mut row_cdf = vec![0.0; nk * nk];
        for j in 0..nk {
            let row = &mut pair[j * nk..(j + 1) * nk];
            for (jp, cell) in row.iter_mut().enumerate() {
                *cell = r_pair(k[j], k[jp]);
            }
            let cdf = &mut row_cdf[j * nk..(j + 1) * nk];
            let mut acc = 0.0;
            for jp in 0..nk {
                acc += pair[j * nk + jp];
                cdf[jp] = acc;
            }
            if acc > 0.0 {
                for c in cdf.iter_mut() {
                    *c /= acc;
                }
                cdf[nk - 1] = 1.0;
            }
        }
        ScatteringTable {
            gamma0,
            k,
            dk,
            rate,
            pair,
            row_cdf,
            nk,
        }
    }

    pub fn nk(&self) -> usize {
        self.nk
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    pub fn pair_at(&self, j: usize, jp: usize) -> f64 {
        self.pair[j * self.nk + jp]
    }

    pub fn pair_row(&self, j: usize) -> &[f64] {
        &self.pair[j * self.nk..(j + 1) * self.nk]
    }

    /// L F (k_j) = 2 sum_{j'} R(k_j, k_{j'}) [F_{j'} - F_j] dk. The loss term
    /// uses the same quadrature as the gain so constants are annihilated to
    /// rounding, not just to quadrature error.
    pub fn apply_l(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.nk);
        (0..self.nk)
            .map(|j| {
                let row = self.pair_row(j);
                let terms: Vec<f64> = row
                    .iter()
                    .zip(f.iter())
                    .map(|(&r, &fp)| r * (fp - f[j]))
                    .collect();
                2.0 * self.dk * pairwise_sum(&terms)
            })
            .collect()
    }

    /// Gain operator: (R_cal F)(k_j) = sum_{j'} R(k_j,k_{j'}) F_{j'} dk.
    pub fn apply_rcal(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.nk);
        (0..self.nk)
            .map(|j| {
                let row = self.pair_row(j);
                let terms: Vec<f64> = row.iter().zip(f.iter()).map(|(&r, &fp)| r * fp).collect();
                self.dk * pairwise_sum(&terms)
            })
            .collect()
    }

    /// Outgoing cell index with probability proportional to R(k_j, k_{j'}).
    /// Hot path for the Monte Carlo walker; the row is a valid CDF whenever
    /// rate[j] > 0, which the caller guarantees by construction.
    pub fn sample_outgoing_cell(&self, j: usize, rng: &mut impl Rng) -> usize {
        debug_assert!(self.rate[j] > 1e-12);
        let u: f64 = rng.random();
        let cdf = &self.row_cdf[j * self.nk..(j + 1) * self.nk];
        cdf.partition_point(|&c| c < u).min(self.nk - 1)
    }

    /// Outgoing wavenumber for an arbitrary k (snapped to the nearest cell).
    pub fn sample_outgoing(&self, k: f64, rng: &mut impl Rng) -> Result<f64, ScatteringError> {
        let j = self.nearest_cell(k);
        if self.rate[j] < 1e-12 || r_total(k) < 1e-12 {
            return Err(ScatteringError::ZeroRate { k });
        }
        Ok(self.k[self.sample_outgoing_cell(j, rng)])
    }

    pub fn nearest_cell(&self, k: f64) -> usize {
        let kw = crate::dispersion::wrap_torus(k);
        let idx = ((kw + 0.5) / self.dk - 0.5).round() as isize;
        idx.clamp(0, self.nk as isize - 1) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stream_rng;

    #[test]
    fn elementary_kernel_values() {
        for kp in [-0.4, -0.1, 0.0, 0.3] {
            assert_eq!(r_kernel(0.0, kp), 0.0);
        }
        assert!((r_kernel(0.5, 0.25) - 2.0).abs() < 1e-14);
        assert!(r_kernel(0.25, 0.5).abs() < 1e-14);
    }

    #[test]
    fn pair_kernel_values_and_symmetry() {
        assert!((r_pair(0.25, 0.25) - 2.0).abs() < 1e-14);
        assert!(r_pair(0.0, 0.3).abs() < 1e-30);
        let mut rng = stream_rng(3, 0);
        use rand::Rng;
        for _ in 0..1000 {
            let k: f64 = rng.random_range(-0.5..0.5);
            let kp: f64 = rng.random_range(-0.5..0.5);
            assert!((r_pair(k, kp) - r_pair(kp, k)).abs() < 1e-12);
            // closed symmetric form of the same kernel
            let (s, c) = (sin_pi(k), crate::dispersion::cos_pi(k));
            let (sp, cp) = (sin_pi(kp), crate::dispersion::cos_pi(kp));
            let closed =
                16.0 * s * s * sp * sp * (s * s * cp * cp + sp * sp * c * c);
            assert!((r_pair(k, kp) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn total_rate_values() {
        assert!((r_total(0.25) - 2.0).abs() < 1e-14);
        assert!((r_total(0.5) - 2.0).abs() < 1e-14);
        // R(k) ~ 6 pi^2 k^2 near zero
        let k = 1e-3;
        let ratio = r_total(k) / (6.0 * std::f64::consts::PI.powi(2) * k * k);
        assert!((ratio - 1.0).abs() < 0.01);
        // theta_hat consistency with its Fourier coefficients
        for k in [0.1, 0.23, 0.45] {
            let tpk = 2.0 * std::f64::consts::PI * k;
            let from_coeffs = theta_coeff(0)
                + 2.0 * theta_coeff(1) * tpk.cos()
                + 2.0 * theta_coeff(2) * (2.0 * tpk).cos();
            assert!((theta_hat(k) - from_coeffs).abs() < 1e-12);
        }
    }

    #[test]
    fn row_integral_matches_closed_rate() {
        let table = ScatteringTable::new(1.0, 64);
        for j in 0..table.nk() {
            let row_sum: f64 = table.pair_row(j).iter().sum::<f64>() * table.dk();
            assert!(
                (row_sum - table.rate()[j]).abs() < 1e-10,
                "j={j}: {row_sum} vs {}",
                table.rate()[j]
            );
        }
    }

    #[test]
    fn generator_annihilates_constants_and_conserves_mass() {
        let table = ScatteringTable::new(1.0, 128);
        let f = vec![0.7; 128];
        for v in table.apply_l(&f) {
            assert!(v.abs() < 1e-12);
        }
        let mut rng = stream_rng(5, 0);
        use rand::Rng;
        let g: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lg = table.apply_l(&g);
        let total: f64 = lg.iter().sum::<f64>() * table.dk();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn gain_of_unit_function_is_total_rate() {
        let table = ScatteringTable::new(1.0, 256);
        let ones = vec![1.0; 256];
        let gain = table.apply_rcal(&ones);
        for (j, g) in gain.iter().enumerate() {
            assert!((g - table.rate()[j]).abs() < 1e-10);
        }
        // gain part of L on F=1 doubles the rate
        let j = table.nearest_cell(0.25);
        assert!((2.0 * gain[j] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn gain_commutes_with_reflection() {
        let table = ScatteringTable::new(1.0, 64);
        let f: Vec<f64> = table.k_grid().iter().map(|&k| (3.0 * k).sin() + k).collect();
        let f_rev: Vec<f64> = (0..64).map(|j| f[63 - j]).collect();
        let a = table.apply_rcal(&f_rev);
        let b = table.apply_rcal(&f);
        for j in 0..64 {
            assert!((a[j] - b[63 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_of_point_mass_recovers_pair_kernel() {
        let table = ScatteringTable::new(1.0, 256);
        let j0 = table.nearest_cell(0.25);
        let mut f = vec![0.0; 256];
        f[j0] = 1.0 / table.dk(); // unit mass in one cell
        let gain = table.apply_rcal(&f);
        for j in (0..256).step_by(17) {
            assert!((gain[j] - r_pair(table.k_grid()[j], 0.25)).abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_matches_quadrature_moment() {
        let table = ScatteringTable::new(1.0, 256);
        let j = table.nearest_cell(0.25);
        let kj = table.k_grid()[j];
        // quadrature oracle for E[s^2(k')] and its variance under the row law
        let row = table.pair_row(j);
        let norm: f64 = row.iter().sum();
        let mean: f64 = row
            .iter()
            .zip(table.k_grid())
            .map(|(&r, &kp)| r * sin_pi(kp).powi(2))
            .sum::<f64>()
            / norm;
        let second: f64 = row
            .iter()
            .zip(table.k_grid())
            .map(|(&r, &kp)| r * sin_pi(kp).powi(4))
            .sum::<f64>()
            / norm;
        let var = second - mean * mean;
        let n = 1_000_000;
        let mut rng = stream_rng(17, 0);
        let mut acc = 0.0;
        for _ in 0..n {
            let jp = table.sample_outgoing_cell(j, &mut rng);
            acc += sin_pi(table.k_grid()[jp]).powi(2);
        }
        let emp = acc / n as f64;
        let sigma = (var / n as f64).sqrt();
        assert!(
            (emp - mean).abs() < 3.0 * sigma,
            "empirical {emp} vs {mean} (3 sigma = {})",
            3.0 * sigma
        );
        let _ = kj;
    }

    #[test]
    fn sampler_histogram_chi_square() {
        let table = ScatteringTable::new(1.0, 64);
        let j = table.nearest_cell(0.25);
        let row = table.pair_row(j);
        let norm: f64 = row.iter().sum();
        let n = 200_000usize;
        let mut counts = vec![0u64; 64];
        let mut rng = stream_rng(23, 0);
        for _ in 0..n {
            counts[table.sample_outgoing_cell(j, &mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (jp, &c) in counts.iter().enumerate() {
            let expected = n as f64 * row[jp] / norm;
            if expected > 5.0 {
                chi2 += (c as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        let dof = (dof - 1) as f64;
        // Wilson-Hilferty critical value at significance 0.01
        let z = 2.3263478740408408;
        let crit = dof * (1.0 - 2.0 / (9.0 * dof) + z * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} exceeds critical {crit}");
    }

    #[test]
    fn zero_rate_rejected() {
        let table = ScatteringTable::new(1.0, 64);
        let mut rng = stream_rng(1, 0);
        assert!(table.sample_outgoing(0.0, &mut rng).is_err());
        assert!(table.sample_outgoing(0.25, &mut rng).is_ok());
    }
}
