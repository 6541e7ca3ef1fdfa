//! Wigner functions on rectangular grids, from a number-basis density
//! operator or analytically from a Gaussian mixture.
//!
//! Normalization is `int W dx dp = 1` in the `x = a + a^dag` convention, so
//! the vacuum peak is `1/(2 pi)`, values are bounded below by `-1/(2 pi)` and
//! `Tr[rho_a rho_b] = 4 pi int W_a W_b dx dp`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockState, FockVector};
use crate::gaussian::GaussianMixture;
use crate::numerics::{laguerre_all, ln_factorial};

/// Allowed `|norm - 1|` before a grid is rejected.
pub const NORM_REJECT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(7.0, 201)
    }
}

impl GridSpec {
    /// `[-half, half]^2` with `points` nodes per axis.
    pub fn square(half: f64, points: usize) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            x_points: points,
            p_min: -half,
            p_max: half,
            p_points: points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_points < 2 || self.p_points < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        if !(self.x_max > self.x_min && self.p_max > self.p_min) {
            return Err(Error::InvalidParameter(
                "grid ranges must be increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn x_axis(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.x_points)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        axis(self.p_min, self.p_max, self.p_points)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.x_points - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.p_points - 1) as f64
    }

    /// Same ranges with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            x_points: 2 * self.x_points - 1,
            p_points: 2 * self.p_points - 1,
            ..*self
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: GridSpec,
    /// `values[i * p_points + j] = W(x_i, p_j)`.
    pub values: Vec<f64>,
    pub norm_estimate: f64,
}

impl WignerGrid {
    fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(spec: &GridSpec, f: F) -> Result<Self> {
        spec.validate()?;
        let xs = spec.x_axis();
        let ps = spec.p_axis();
        let values: Vec<f64> = xs
            .par_iter()
            .flat_map_iter(|&x| ps.iter().map(move |&p| (x, p)).collect::<Vec<_>>())
            .map(|(x, p)| f(x, p))
            .collect();
        let norm_estimate = values.iter().sum::<f64>() * spec.dx() * spec.dp();
        let grid = Self {
            spec: *spec,
            values,
            norm_estimate,
        };
        if (grid.norm_estimate - 1.0).abs() > NORM_REJECT {
            return Err(Error::GridTooCoarse {
                norm: grid.norm_estimate,
                tolerance: NORM_REJECT,
            });
        }
        Ok(grid)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.p_points + j]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_difference(&self, other: &WignerGrid) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_same_grid(&self, other: &WignerGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape("Wigner grids differ".into()));
        }
        Ok(())
    }

    /// CSV with header `x,p,w`, one row per node, `x` varying slowest.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,p,w")?;
        let xs = self.spec.x_axis();
        let ps = self.spec.p_axis();
        for (i, x) in xs.iter().enumerate() {
            for (j, p) in ps.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    sig9(*x),
                    sig9(*p),
                    sig9(self.values[i * ps.len() + j])
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Nine significant digits in scientific notation; zero printed plainly.
fn sig9(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// Precomputed `(-1)^m sqrt(m!/n!)` factors for a dimension.
struct FockKernel {
    dim: usize,
    rho: DMatrix<C64>,
    ratio: Vec<Vec<f64>>,
}

impl FockKernel {
    fn new(rho: &FockOperator) -> Self {
        let dim = rho.dim();
        let ratio = (0..dim)
            .map(|k| {
                (0..dim - k)
                    .map(|m| {
                        let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                        s * (0.5 * (ln_factorial(m) - ln_factorial(m + k))).exp()
                    })
                    .collect()
            })
            .collect();
        Self {
            dim,
            rho: rho.entries().clone(),
            ratio,
        }
    }

    fn eval(&self, x: f64, p: f64) -> f64 {
        let xi = C64::new(x, p);
        let r2 = xi.norm_sqr();
        let mut acc = 0.0;
        let mut xi_k = C64::new(1.0, 0.0);
        for k in 0..self.dim {
            let lag = laguerre_all(self.dim - 1 - k, k, r2);
            let mut inner = C64::new(0.0, 0.0);
            for (m, l) in lag.iter().enumerate() {
                inner += self.rho[(m, m + k)] * (self.ratio[k][m] * l);
            }
            if k == 0 {
                acc += inner.re;
            } else {
                acc += 2.0 * (inner * xi_k).re;
            }
            xi_k *= xi;
        }
        acc * (-0.5 * r2).exp() / (2.0 * PI)
    }
}

fn check_trace(rho: &FockOperator) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "density operator trace {tr} is not 1"
        )));
    }
    Ok(())
}

/// `W(x, p)` of a number-basis density operator at one point.
pub fn wigner_at(rho: &FockOperator, x: f64, p: f64) -> f64 {
    FockKernel::new(rho).eval(x, p)
}

pub fn wigner_from_fock(rho: &FockOperator, spec: &GridSpec) -> Result<WignerGrid> {
    check_trace(rho)?;
    let kernel = FockKernel::new(rho);
    WignerGrid::from_fn(spec, |x, p| kernel.eval(x, p))
}

pub fn wigner_from_state(state: &FockState, spec: &GridSpec) -> Result<WignerGrid> {
    wigner_from_fock(&state.density(), spec)
}

/// One Gaussian term of the mixture, ready for pointwise evaluation.
struct GaussianKernel {
    weight: C64,
    mean: [C64; 2],
    inv: [[f64; 2]; 2],
}

impl GaussianKernel {
    fn eval(&self, x: f64, p: f64) -> C64 {
        let u = [
            C64::new(x, 0.0) - self.mean[0],
            C64::new(p, 0.0) - self.mean[1],
        ];
        let q = u[0] * u[0] * self.inv[0][0]
            + u[0] * u[1] * (self.inv[0][1] + self.inv[1][0])
            + u[1] * u[1] * self.inv[1][1];
        self.weight * (-0.5 * q).exp()
    }
}

/// Term-by-term analytic transform: a term with weight `w`, mean `d` and
/// covariance `V` contributes `w / (2 pi sqrt(det V)) exp(-(z-d)^T V^-1 (z-d) / 2)`.
pub fn wigner_from_gaussian_mixture(mix: &GaussianMixture, spec: &GridSpec) -> Result<WignerGrid> {
    if mix.modes() != 1 {
        return Err(Error::Shape(format!(
            "Wigner grid needs a 1-mode mixture, got {} modes",
            mix.modes()
        )));
    }
    let kernels = mix
        .terms()
        .iter()
        .map(|t| {
            if t.is_identity() {
                return Err(Error::Shape("identity term has no Wigner function".into()));
            }
            let v: &DMatrix<f64> = &t.cov;
            let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
            if !(det > 0.0 && v[(0, 0)] > 0.0) {
                return Err(Error::IllConditionedIntegral(format!(
                    "term covariance not positive definite (det {det:.3e})"
                )));
            }
            let mean: &DVector<C64> = &t.mean;
            Ok(GaussianKernel {
                weight: t.weight / (2.0 * PI * det.sqrt()),
                mean: [mean[0], mean[1]],
                inv: [
                    [v[(1, 1)] / det, -v[(0, 1)] / det],
                    [-v[(1, 0)] / det, v[(0, 0)] / det],
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WignerGrid::from_fn(spec, |x, p| {
        kernels.iter().map(|k| k.eval(x, p)).sum::<C64>().re
    })
}

/// `<b|rho_a|b>` for a pure target `b`.
pub fn fidelity_from_states(a: &FockState, b: &FockVector) -> f64 {
    a.fidelity_with(b)
}

/// `4 pi int W_a W_b dx dp`, which equals `Tr[rho_a rho_b]` on converged grids.
pub fn overlap_integral(a: &WignerGrid, b: &WignerGrid) -> Result<f64> {
    a.check_same_grid(b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(4.0 * PI * s * a.spec.dx() * a.spec.dp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::gaussian::squeezed_vacuum_cf;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_peak_and_normalization() {
        let s = FockSpace::new(8);
        let g = wigner_from_fock(&s.vacuum().to_density(), &GridSpec::default()).unwrap();
        assert_relative_eq!(g.value(100, 100), 1.0 / (2.0 * PI), max_relative = 1e-14);
        assert!((g.norm_estimate - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coherent_state_centred_at_twice_amplitude() {
        let s = FockSpace::new(30);
        let gamma = c(0.7, -0.4);
        let rho = s.coherent(gamma).unwrap().to_density();
        let peak = wigner_at(&rho, 1.4, -0.8);
        assert_relative_eq!(peak, 1.0 / (2.0 * PI), max_relative = 1e-10);
        let off = wigner_at(&rho, 1.4 + 0.5, -0.8 - 0.2);
        let expected = (-(0.25 + 0.04) / 2.0f64).exp() / (2.0 * PI);
        assert_relative_eq!(off, expected, max_relative = 1e-10);
    }

    #[test]
    fn even_cat_matches_analytic_fringes() {
        let alpha = 0.95;
        let s = FockSpace::new(40);
        let rho = s.parity_cat(c(alpha, 0.0), true).unwrap().to_density();
        let n2 = 1.0 / (2.0 * (1.0 + (-2.0 * alpha * alpha).exp()));
        for p in [-2.0, -0.7, 0.0, 0.3, 1.9] {
            let expected = n2 / (2.0 * PI)
                * (2.0 * (-(4.0 * alpha * alpha + p * p) / 2.0f64).exp()
                    + 2.0 * (-p * p / 2.0f64).exp() * (2.0 * alpha * p).cos());
            assert_relative_eq!(wigner_at(&rho, 0.0, p), expected, epsilon = 1e-12);
        }
        // coherent components centred on the x axis at +-2 alpha
        for x in [-2.5, -1.9, -0.4, 0.0, 1.1, 1.9, 3.0] {
            let expected = n2 / (2.0 * PI)
                * ((-(x - 2.0 * alpha) * (x - 2.0 * alpha) / 2.0f64).exp()
                    + (-(x + 2.0 * alpha) * (x + 2.0 * alpha) / 2.0f64).exp()
                    + 2.0 * (-x * x / 2.0f64).exp());
            assert_relative_eq!(wigner_at(&rho, x, 0.0), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_cat_is_negative_at_origin() {
        let s = FockSpace::new(32);
        let rho = s.parity_cat(c(0.95, 0.0), false).unwrap().to_density();
        let w0 = wigner_at(&rho, 0.0, 0.0);
        assert!(w0 < 0.0);
        assert_relative_eq!(w0, -1.0 / (2.0 * PI), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_vacuum_matches_fock() {
        let spec = GridSpec::square(5.0, 41);
        let a = wigner_from_gaussian_mixture(&GaussianMixture::vacuum(1), &spec).unwrap();
        let b = wigner_from_fock(&FockSpace::new(4).vacuum().to_density(), &spec).unwrap();
        assert!(a.max_abs_difference(&b).unwrap() < 1e-10);
    }

    #[test]
    fn squeezed_vacuum_widths() {
        let r: f64 = 0.3;
        let g = wigner_from_gaussian_mixture(&squeezed_vacuum_cf(r), &GridSpec::default()).unwrap();
        let xs = g.spec.x_axis();
        let var_x: f64 = (0..xs.len())
            .map(|i| xs[i] * xs[i] * (0..g.spec.p_points).map(|j| g.value(i, j)).sum::<f64>())
            .sum::<f64>()
            * g.spec.dx()
            * g.spec.dp();
        assert_relative_eq!(var_x, (2.0 * r).exp(), max_relative = 1e-4);
        let (vx, vp) = ((2.0 * r).exp(), (-2.0 * r).exp());
        let (i, j) = (120, 90);
        let (x, p) = (g.spec.x_axis()[i], g.spec.p_axis()[j]);
        let expected = (-0.5 * (x * x / vx + p * p / vp)).exp() / (2.0 * PI);
        assert_relative_eq!(g.value(i, j), expected, max_relative = 1e-12);
    }

    #[test]
    fn overlap_identity_for_pure_pair() {
        let s = FockSpace::new(32);
        let a = s.parity_cat(c(0.9, 0.0), false).unwrap();
        let b = s.coherent(c(0.5, 0.2)).unwrap();
        let spec = GridSpec::default();
        let wa = wigner_from_fock(&a.to_density(), &spec).unwrap();
        let wb = wigner_from_fock(&b.to_density(), &spec).unwrap();
        let exact = fidelity_from_states(&FockState::Pure(a), &b);
        assert!((overlap_integral(&wa, &wb).unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn coarse_grid_rejected() {
        let s = FockSpace::new(8);
        let err =
            wigner_from_fock(&s.vacuum().to_density(), &GridSpec::square(1.0, 11)).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn csv_header_and_precision() {
        let s = FockSpace::new(4);
        let g = wigner_from_fock(&s.vacuum().to_density(), &GridSpec::square(6.0, 13)).unwrap();
        let csv = g.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,p,w"));
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 3);
        assert_eq!(csv.lines().count(), 1 + 13 * 13);
        let w: &str = first.split(',').nth(2).unwrap();
        let mantissa = w.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 9);
    }
}
