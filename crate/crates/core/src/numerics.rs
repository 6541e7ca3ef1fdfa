//! Small numerical kernels shared by the engines: factorial logs, Laguerre
//! and Hermite recurrences, Gauss-Legendre nodes, and a dense matrix
//! exponential for the beamsplitter blocks.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 1024;

/// ln(n!)
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        t.push(0.0);
        for i in 1..LN_FACT_TABLE {
            t.push(t[i - 1] + (i as f64).ln());
        }
        t
    });
    if n < LN_FACT_TABLE {
        table[n]
    } else {
        table[LN_FACT_TABLE - 1] + ((LN_FACT_TABLE)..=n).map(|i| (i as f64).ln()).sum::<f64>()
    }
}

/// Generalized Laguerre polynomials `L_j^{(k)}(x)` for `j = 0..=n_max`.
pub fn laguerre_all(n_max: usize, k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    let kf = k as f64;
    out.push(1.0 + kf - x);
    for j in 1..n_max {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * out[j] - (jf + kf) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Matrix element `<m|D(xi)|n>` of the displacement operator
/// `D(xi) = exp(xi a^dag - xi^* a)`, exact (no truncation involved).
pub fn displacement_element(m: usize, n: usize, xi: C64) -> C64 {
    let x = xi.norm_sqr();
    let gauss = (-0.5 * x).exp();
    if m >= n {
        let k = m - n;
        let lag = laguerre_all(n, k, x)[n];
        let pref = (0.5 * (ln_factorial(n) - ln_factorial(m))).exp();
        xi.powu(k as u32) * (pref * gauss * lag)
    } else {
        let k = n - m;
        let lag = laguerre_all(m, k, x)[m];
        let pref = (0.5 * (ln_factorial(m) - ln_factorial(n))).exp();
        (-xi.conj()).powu(k as u32) * (pref * gauss * lag)
    }
}

/// Full `dim x dim` displacement matrix, every entry computed exactly.
pub fn displacement_matrix(xi: C64, dim: usize) -> DMatrix<C64> {
    let x = xi.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let mut d = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let lag = laguerre_all(dim - 1 - k, k, x);
        let up = xi.powu(k as u32);
        let down = (-xi.conj()).powu(k as u32);
        for (n, l) in lag.iter().enumerate() {
            let m = n + k;
            let pref = (0.5 * (ln_factorial(n) - ln_factorial(m))).exp() * gauss * l;
            d[(m, n)] = up * pref;
            if k > 0 {
                d[(n, m)] = down * pref;
            }
        }
    }
    d
}

/// Number-state wavefunctions `<x|n>` for `n = 0..dim` in the quadrature
/// convention `x = a + a^dag` (vacuum variance 1).
pub fn quadrature_wavefunctions(dim: usize, x: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(dim);
    if dim == 0 {
        return psi;
    }
    psi.push((2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp());
    if dim > 1 {
        psi.push(x * psi[0]);
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        let next = (x * psi[n] - nf.sqrt() * psi[n - 1]) / (nf + 1.0).sqrt();
        psi.push(next);
    }
    psi
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(order > 0);
    let mut out = Vec::with_capacity(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let nf = order as f64;
    for i in 0..order {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=order {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out.push((mid - half * z, half * w));
    }
    out
}

/// Dense matrix exponential by scaling and squaring of a truncated Taylor
/// series. Intended for small, well-scaled generators.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * &scaled / (k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laguerre_matches_explicit_low_orders() {
        let x = 1.7;
        let l = laguerre_all(3, 2, x);
        assert_relative_eq!(l[1], 3.0 - x, epsilon = 1e-14);
        // L_2^{(2)}(x) = (x^2 - 8x + 12)/2
        assert_relative_eq!(l[2], (x * x - 8.0 * x + 12.0) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let xi = C64::new(0.6, -0.3);
        for n in 0..8 {
            let expected =
                (-0.5 * xi.norm_sqr()).exp() * xi.powu(n as u32) / (ln_factorial(n) * 0.5).exp();
            let got = displacement_element(n, 0, xi);
            assert!((got - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn displacement_matrix_agrees_with_elementwise() {
        let xi = C64::new(-0.4, 0.9);
        let d = displacement_matrix(xi, 12);
        for m in 0..12 {
            for n in 0..12 {
                assert!((d[(m, n)] - displacement_element(m, n, xi)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(8, -1.0, 2.0);
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert_relative_eq!(integral, (2f64.powi(8) - 1.0) / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn wavefunctions_are_orthonormal() {
        let nodes = gauss_legendre(400, -20.0, 20.0);
        let dim = 10;
        let mut gram = vec![0.0; dim * dim];
        for (x, w) in nodes {
            let psi = quadrature_wavefunctions(dim, x);
            for i in 0..dim {
                for j in 0..dim {
                    gram[i * dim + j] += w * psi[i] * psi[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * dim + j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expm_rotation() {
        let theta = 0.7;
        let g = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let u = expm(&g);
        assert_relative_eq!(u[(0, 0)], theta.cos(), epsilon = 1e-14);
        assert_relative_eq!(u[(1, 0)], theta.sin(), epsilon = 1e-14);
    }
}
