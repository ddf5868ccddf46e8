//! Shared numerical kernels: deterministic summation, monotone cubic
//! interpolation, adaptive quadrature, and small test oracles.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pairwise (cascade) summation. Deterministic for a fixed element order and
/// O(log n) error growth; every ensemble reduction in the crate goes through
/// here so that identical configs produce bit-identical outputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean (sample variance, n-1 normalization).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Uniform-grid trapezoid rule.
pub fn trapezoid(y: &[f64], dx: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner = pairwise_sum(&y[1..y.len() - 1]);
    dx * (0.5 * (y[0] + y[y.len() - 1]) + inner)
}

/// Counter-based RNG stream: trajectory / particle-block `stream` under a
/// common `base_seed`. Streams are statistically independent and the mapping
/// is stable, so parallel schedules cannot change results.
pub fn stream_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream.into());
    rng
}

/// Monotone cubic (PCHIP) interpolant on strictly increasing nodes.
///
/// Derivatives follow Fritsch-Carlson: weighted harmonic means in the
/// interior, shape-limited three-point estimates at the ends. Evaluation
/// outside the node range clamps to the boundary value; the kinetic solver
/// relies on that as its outflow rule.
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "need matching nodes");
        let mut h = vec![0.0; n - 1];
        let mut del = vec![0.0; n - 1];
        for i in 0..n - 1 {
            h[i] = x[i + 1] - x[i];
            debug_assert!(h[i] > 0.0, "nodes must increase");
            del[i] = (y[i + 1] - y[i]) / h[i];
        }
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for i in 1..n - 1 {
                if del[i - 1] * del[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            d[0] = edge_derivative(h[0], h[1], del[0], del[1]);
            d[n - 1] = edge_derivative(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    /// Evaluate at `xq`; constant beyond the first/last node.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // rightmost interval with x[i] <= xq
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).expect("finite"))
        {
            Ok(j) => j.min(n - 2),
            Err(j) => j - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h * h10 * self.d[i] + h01 * self.y[i + 1] + h * h11 * self.d[i + 1]
    }
}

// Three-point end-derivative with the Fritsch-Carlson shape limiter.
fn edge_derivative(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        d = 0.0;
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        d = 3.0 * del0;
    }
    d
}

/// Adaptive Simpson quadrature for a complex-valued integrand on [a, b].
/// `tol` is an absolute tolerance; recursion splits the budget in half.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.norm() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Reference 2x2 complex matrix exponential: scaling and squaring around a
/// fixed-order Taylor polynomial. Slow and simple; used as an oracle against
/// closed-form propagators, not in production paths.
pub fn expm2_taylor(m: [[Complex64; 2]; 2], terms: usize) -> [[Complex64; 2]; 2] {
    let norm = m
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    let mut s = 0u32;
    while norm / f64::powi(2.0, s as i32) > 0.5 {
        s += 1;
    }
    let scale = Complex64::new(1.0 / f64::powi(2.0, s as i32), 0.0);
    let a = [
        [m[0][0] * scale, m[0][1] * scale],
        [m[1][0] * scale, m[1][1] * scale],
    ];
    let mut result = ident2();
    let mut term = ident2();
    for j in 1..=terms {
        term = mat2_mul(&term, &a);
        let c = Complex64::new(1.0 / factorial(j), 0.0);
        for (r, row) in term.iter().enumerate() {
            for (cidx, v) in row.iter().enumerate() {
                result[r][cidx] += v * c;
            }
        }
    }
    for _ in 0..s {
        result = mat2_mul(&result, &result);
    }
    result
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn ident2() -> [[Complex64; 2]; 2] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [[one, zero], [zero, one]]
}

pub fn mat2_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Bessel J0, delegated to libm's implementation.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}
