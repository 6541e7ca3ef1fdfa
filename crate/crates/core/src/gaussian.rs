//! Characteristic-function engine.
//!
//! States and POVM elements are finite mixtures of Gaussian forms
//!
//! ```text
//! chi(w) = sum_k weight_k * exp(-1/2 w^T V_k w + i w^T d_k)
//! ```
//!
//! with `chi(w) = Tr[rho exp(i w^T z)]`, `z = (x_1, p_1, x_2, p_2, ...)`,
//! `x = a + a^dag`, `p = -i(a - a^dag)`. A physical Gaussian state has `V`
//! equal to its covariance matrix (vacuum `V = I`) and `d` equal to its mean.
//! Operators such as `|a><b|` have complex `d`. The identity operator, whose
//! transform is a delta function, is carried as a symbolic [`TermKind::Identity`].
//!
//! Trace pairing is `Tr[A B] = pi^{-n} int chi_A(w) chi_B(-w) dw` for `n` modes.
//! The constant is fixed by requiring that outcome probabilities of any
//! complete measurement sum to one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{DetectorModel, DEFAULT_PROBABILITY_FLOOR};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Gaussian,
    /// `weight * pi^n delta(w)`: the transform of `weight * I`.
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTerm {
    pub weight: C64,
    pub mean: DVector<C64>,
    pub cov: DMatrix<f64>,
    pub kind: TermKind,
}

impl GaussianTerm {
    pub fn gaussian(weight: C64, mean: DVector<C64>, cov: DMatrix<f64>) -> Self {
        Self {
            weight,
            mean,
            cov,
            kind: TermKind::Gaussian,
        }
    }

    pub fn identity(weight: C64, modes: usize) -> Self {
        Self {
            weight,
            mean: DVector::zeros(2 * modes),
            cov: DMatrix::zeros(2 * modes, 2 * modes),
            kind: TermKind::Identity,
        }
    }

    pub fn phase_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_identity(&self) -> bool {
        self.kind == TermKind::Identity
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.cov - self.cov.transpose())
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Smallest symplectic eigenvalue of the covariance.
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        let n = self.phase_dim();
        let j = symplectic_form(n / 2);
        // eigenvalues of i J V come in +-nu pairs
        let m: DMatrix<C64> = (&j * &self.cov).map(|v| C64::new(0.0, v));
        let herm_like = m.clone();
        let eig = herm_like.eigenvalues();
        match eig {
            Some(vals) => vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min),
            None => {
                // fall back to the real Schur form of J V
                let jv = &j * &self.cov;
                jv.complex_eigenvalues()
                    .iter()
                    .map(|v| v.norm())
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    fn evaluate(&self, w: &DVector<f64>) -> C64 {
        let quad = (w.transpose() * &self.cov * w)[(0, 0)];
        let lin: C64 = w.iter().zip(self.mean.iter()).map(|(a, b)| b * *a).sum();
        self.weight * (C64::new(-0.5 * quad, 0.0) + C64::new(0.0, 1.0) * lin).exp()
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    kind: TermKind,
    weight: [f64; 2],
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl Serialize for GaussianTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.phase_dim();
        TermRepr {
            kind: self.kind,
            weight: [self.weight.re, self.weight.im],
            mean: self.mean.iter().flat_map(|c| [c.re, c.im]).collect(),
            cov: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| self.cov[(i, j)])
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianTerm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TermRepr::deserialize(d)?;
        if r.mean.len() % 2 != 0 || r.cov.len() != (r.mean.len() / 2).pow(2) {
            return Err(serde::de::Error::custom("inconsistent Gaussian term shape"));
        }
        let n = r.mean.len() / 2;
        Ok(GaussianTerm {
            kind: r.kind,
            weight: C64::new(r.weight[0], r.weight[1]),
            mean: DVector::from_iterator(n, r.mean.chunks(2).map(|c| C64::new(c[0], c[1]))),
            cov: DMatrix::from_row_slice(n, n, &r.cov),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    modes: usize,
    terms: Vec<GaussianTerm>,
}

impl GaussianMixture {
    pub fn new(modes: usize, terms: Vec<GaussianTerm>) -> Result<Self> {
        for t in &terms {
            if t.phase_dim() != 2 * modes || t.cov.nrows() != 2 * modes || !t.cov.is_square() {
                return Err(Error::Shape(format!(
                    "term of phase-space dimension {} in a {}-mode mixture",
                    t.phase_dim(),
                    modes
                )));
            }
        }
        Ok(Self { modes, terms })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            terms: vec![GaussianTerm::gaussian(
                ONE,
                DVector::zeros(2 * modes),
                DMatrix::identity(2 * modes, 2 * modes),
            )],
        }
    }

    /// Characteristic function of `|a><b|` (complex mean, unit covariance).
    pub fn outer_coherent(a: C64, b: C64) -> Self {
        let weight = (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + b.conj() * a).exp();
        let i = C64::new(0.0, 1.0);
        let mean = DVector::from_vec(vec![a + b.conj(), -i * (a - b.conj())]);
        Self {
            modes: 1,
            terms: vec![GaussianTerm::gaussian(
                weight,
                mean,
                DMatrix::identity(2, 2),
            )],
        }
    }

    pub fn coherent(alpha: C64) -> Self {
        Self::outer_coherent(alpha, alpha)
    }

    /// Normalized projector onto `c_plus |alpha> + c_minus |-alpha>`.
    pub fn cat(alpha: C64, c_plus: C64, c_minus: C64) -> Result<Self> {
        let overlap = (-2.0 * alpha.norm_sqr()).exp();
        let norm_sqr =
            c_plus.norm_sqr() + c_minus.norm_sqr() + 2.0 * (c_plus.conj() * c_minus).re * overlap;
        if !(norm_sqr > 1e-16) {
            return Err(Error::DegenerateState {
                norm: norm_sqr.max(0.0).sqrt(),
            });
        }
        let amps = [(alpha, c_plus), (-alpha, c_minus)];
        let mut terms = Vec::with_capacity(4);
        for &(a, ca) in &amps {
            for &(b, cb) in &amps {
                let coeff = ca * cb.conj() / norm_sqr;
                if coeff == ZERO {
                    continue;
                }
                let mut t = Self::outer_coherent(a, b).terms.remove(0);
                t.weight *= coeff;
                terms.push(t);
            }
        }
        Ok(Self { modes: 1, terms })
    }

    pub fn tensor(&self, other: &GaussianMixture) -> Result<Self> {
        let n1 = 2 * self.modes;
        let n2 = 2 * other.modes;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                if a.is_identity() != b.is_identity() {
                    return Err(Error::Shape(
                        "cannot tensor an identity term with a Gaussian term".into(),
                    ));
                }
                let mut mean = DVector::zeros(n1 + n2);
                mean.rows_mut(0, n1).copy_from(&a.mean);
                mean.rows_mut(n1, n2).copy_from(&b.mean);
                let mut cov = DMatrix::zeros(n1 + n2, n1 + n2);
                cov.view_mut((0, 0), (n1, n1)).copy_from(&a.cov);
                cov.view_mut((n1, n1), (n2, n2)).copy_from(&b.cov);
                terms.push(GaussianTerm {
                    weight: a.weight * b.weight,
                    mean,
                    cov,
                    kind: a.kind,
                });
            }
        }
        Ok(Self {
            modes: self.modes + other.modes,
            terms,
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.weight *= c;
        }
        out
    }

    /// Pointwise value; undefined for mixtures containing identity terms.
    pub fn evaluate(&self, w: &[f64]) -> Result<C64> {
        if w.len() != 2 * self.modes {
            return Err(Error::Shape(format!(
                "argument of length {} for {} modes",
                w.len(),
                self.modes
            )));
        }
        if self.terms.iter().any(GaussianTerm::is_identity) {
            return Err(Error::Shape(
                "identity terms have no pointwise characteristic function".into(),
            ));
        }
        let w = DVector::from_column_slice(w);
        Ok(self.terms.iter().map(|t| t.evaluate(&w)).sum())
    }

    /// `chi(0)`, the trace of the represented operator.
    pub fn trace(&self) -> Result<C64> {
        if self.terms.iter().any(GaussianTerm::is_identity) {
            return Err(Error::IllConditionedIntegral(
                "trace of an identity term diverges".into(),
            ));
        }
        Ok(self.terms.iter().map(|t| t.weight).sum())
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace()?;
        if !(tr.norm() > DEFAULT_PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability {
                probability: tr.norm(),
                floor: DEFAULT_PROBABILITY_FLOOR,
            });
        }
        Ok(self.scaled(ONE / tr))
    }

    pub fn transform(&self, map: &SymplecticMap) -> Result<Self> {
        let s = &map.matrix;
        if s.nrows() != 2 * self.modes {
            return Err(Error::Shape(format!(
                "{}x{} map on {} modes",
                s.nrows(),
                s.ncols(),
                self.modes
            )));
        }
        let st = s.transpose();
        let st_c = st.map(|v| C64::new(v, 0.0));
        let terms = self
            .terms
            .iter()
            .map(|t| match t.kind {
                TermKind::Identity => t.clone(),
                TermKind::Gaussian => GaussianTerm {
                    weight: t.weight,
                    mean: &st_c * &t.mean,
                    cov: &st * &t.cov * s,
                    kind: t.kind,
                },
            })
            .collect();
        Ok(Self {
            modes: self.modes,
            terms,
        })
    }

    /// Partial trace over every mode not in `keep` (order preserved).
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let idx = phase_indices(keep, self.modes)?;
        let terms = self
            .terms
            .iter()
            .map(|t| GaussianTerm {
                weight: t.weight,
                mean: t.mean.select_rows(&idx),
                cov: t.cov.select_rows(&idx).select_columns(&idx),
                kind: t.kind,
            })
            .collect();
        Ok(Self {
            modes: keep.len(),
            terms,
        })
    }

    /// `Tr[A B]` for two operators on the same modes.
    pub fn pair(&self, other: &GaussianMixture) -> Result<C64> {
        if self.modes != other.modes {
            return Err(Error::Shape(format!(
                "pairing {}-mode with {}-mode mixture",
                self.modes, other.modes
            )));
        }
        let mut acc = ZERO;
        for a in &self.terms {
            for b in &other.terms {
                acc += match (a.kind, b.kind) {
                    (TermKind::Identity, TermKind::Identity) => {
                        return Err(Error::IllConditionedIntegral(
                            "pairing two identity terms diverges".into(),
                        ))
                    }
                    (TermKind::Identity, _) | (_, TermKind::Identity) => a.weight * b.weight,
                    _ => {
                        let q = &a.cov + &b.cov;
                        let d = &a.mean - &b.mean;
                        let g = GaussianIntegral::new(&q)?;
                        a.weight * b.weight * g.pairing_factor() * (-0.5 * g.quadratic(&d)).exp()
                    }
                };
            }
        }
        Ok(acc)
    }

    /// Pairs the listed modes with single-mode POVM mixtures and returns the
    /// unnormalized operator left on the remaining modes:
    /// `Tr_M[rho (I (x) Pi_M)]`.
    pub fn partial_pair(&self, measured: &[(usize, &GaussianMixture)]) -> Result<Self> {
        let mut seen = vec![false; self.modes];
        for &(m, povm) in measured {
            if m >= self.modes || seen[m] {
                return Err(Error::Shape(format!(
                    "invalid or repeated measured mode {m}"
                )));
            }
            if povm.modes != 1 {
                return Err(Error::Shape("measured POVMs must be single-mode".into()));
            }
            seen[m] = true;
        }
        let kept: Vec<usize> = (0..self.modes).filter(|m| !seen[*m]).collect();
        let mut out = Vec::new();
        for st in &self.terms {
            if st.is_identity() {
                return Err(Error::Shape(
                    "state mixtures cannot hold identity terms".into(),
                ));
            }
            let combos = measured.iter().fold(vec![Vec::new()], |acc, (_, povm)| {
                acc.into_iter()
                    .flat_map(|prefix: Vec<&GaussianTerm>| {
                        povm.terms.iter().map(move |t| {
                            let mut p = prefix.clone();
                            p.push(t);
                            p
                        })
                    })
                    .collect()
            });
            for combo in combos {
                let mut weight = st.weight;
                let mut integrated = Vec::new();
                let mut povm_terms = Vec::new();
                for (&(m, _), t) in measured.iter().zip(&combo) {
                    weight *= t.weight;
                    if !t.is_identity() {
                        integrated.push(m);
                        povm_terms.push(*t);
                    }
                }
                if weight == ZERO {
                    continue;
                }
                out.push(integrate_modes(
                    st,
                    weight,
                    &kept,
                    &integrated,
                    &povm_terms,
                )?);
            }
        }
        Ok(Self {
            modes: kept.len(),
            terms: out,
        })
    }
}

/// Integrates `chi_state(w_kept, w_int) * prod chi_povm(-w_int)` over the
/// integrated modes; identity-measured modes are simply dropped.
fn integrate_modes(
    st: &GaussianTerm,
    weight: C64,
    kept: &[usize],
    integrated: &[usize],
    povm: &[&GaussianTerm],
) -> Result<GaussianTerm> {
    let ka = phase_indices(kept, usize::MAX)?;
    let km = phase_indices(integrated, usize::MAX)?;
    let mean_a = st.mean.select_rows(&ka);
    let cov_aa = st.cov.select_rows(&ka).select_columns(&ka);
    if km.is_empty() {
        return Ok(GaussianTerm::gaussian(weight, mean_a, cov_aa));
    }
    let mut q_mm = st.cov.select_rows(&km).select_columns(&km);
    let mut d_m = st.mean.select_rows(&km);
    for (slot, t) in povm.iter().enumerate() {
        let o = 2 * slot;
        let mut block = q_mm.view_mut((o, o), (2, 2));
        block += &t.cov;
        let mut dm = d_m.rows_mut(o, 2);
        dm -= &t.mean;
    }
    let q_am = st.cov.select_rows(&ka).select_columns(&km);
    let g = GaussianIntegral::new(&q_mm)?;
    let inv = g.inverse.clone();
    let inv_c = inv.map(|v| C64::new(v, 0.0));
    let q_am_c = q_am.map(|v| C64::new(v, 0.0));
    let weight = weight * g.pairing_factor() * (-0.5 * g.quadratic(&d_m)).exp();
    let mean = mean_a - &q_am_c * (&inv_c * &d_m);
    let cov = &cov_aa - &q_am * &inv * q_am.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianTerm::gaussian(weight, mean, cov))
}

/// Checked inverse and determinant of the real symmetric quadratic form of
/// a Gaussian integral.
struct GaussianIntegral {
    inverse: DMatrix<f64>,
    det: f64,
    dim: usize,
}

impl GaussianIntegral {
    fn new(q: &DMatrix<f64>) -> Result<Self> {
        let sym = (q + q.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let min = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(min > 0.0) {
            return Err(Error::IllConditionedIntegral(format!(
                "quadratic form not positive definite (min eigenvalue {min:.3e})"
            )));
        }
        if max / min > CONDITION_LIMIT {
            return Err(Error::IllConditionedIntegral(format!(
                "condition number {:.3e} exceeds {CONDITION_LIMIT:.0e}",
                max / min
            )));
        }
        let inverse = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::IllConditionedIntegral("Cholesky factorization failed".into()))?
            .inverse();
        Ok(Self {
            inverse,
            det: eig.eigenvalues.iter().product(),
            dim: q.nrows(),
        })
    }

    /// `pi^{-k} * (2 pi)^k / sqrt(det Q)` for `k = dim/2` integrated modes.
    fn pairing_factor(&self) -> C64 {
        C64::new(2f64.powi((self.dim / 2) as i32) / self.det.sqrt(), 0.0)
    }

    /// `d^T Q^{-1} d` (plain transpose, valid for complex `d`).
    fn quadratic(&self, d: &DVector<C64>) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += d[i] * self.inverse[(i, j)] * d[j];
            }
        }
        acc
    }
}

fn phase_indices(modes: &[usize], bound: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(2 * modes.len());
    for &m in modes {
        if m >= bound {
            return Err(Error::Shape(format!("mode {m} out of range")));
        }
        idx.push(2 * m);
        idx.push(2 * m + 1);
    }
    Ok(idx)
}

/// Standard symplectic form for `(x_1, p_1, ..., x_n, p_n)` ordering.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticMap {
    matrix: DMatrix<f64>,
}

impl SymplecticMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let map = Self { matrix };
        let defect = map.symplectic_defect();
        if !(defect < 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "matrix is not symplectic (defect {defect:.3e})"
            )));
        }
        Ok(map)
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// `S_BS(T)` acting on modes `i`, `j` of an `n`-mode system:
    /// `[[sqrt(T) I, sqrt(1-T) I], [-sqrt(1-T) I, sqrt(T) I]]`.
    pub fn beamsplitter(t: f64, modes: usize, i: usize, j: usize) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmittance {t} outside (0, 1]"
            )));
        }
        if i >= modes || j >= modes || i == j {
            return Err(Error::Shape(format!(
                "beamsplitter modes ({i}, {j}) of {modes}"
            )));
        }
        let (c, s) = (t.sqrt(), (1.0 - t).sqrt());
        let mut m = DMatrix::identity(2 * modes, 2 * modes);
        for q in 0..2 {
            m[(2 * i + q, 2 * i + q)] = c;
            m[(2 * i + q, 2 * j + q)] = s;
            m[(2 * j + q, 2 * i + q)] = -s;
            m[(2 * j + q, 2 * j + q)] = c;
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `self * other`.
    pub fn compose(&self, other: &SymplecticMap) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn symplectic_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        if !n.is_multiple_of(2) || !self.matrix.is_square() {
            return f64::INFINITY;
        }
        let j = symplectic_form(n / 2);
        (&self.matrix * &j * self.matrix.transpose() - &j)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Single-mode squeezed vacuum, covariance `diag(e^{2r}, e^{-2r})`.
pub fn squeezed_vacuum_cf(r: f64) -> GaussianMixture {
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![(2.0 * r).exp(), (-2.0 * r).exp()]));
    GaussianMixture {
        modes: 1,
        terms: vec![GaussianTerm::gaussian(ONE, DVector::zeros(2), cov)],
    }
}

/// Combined symplectic map of the two splitters: `(S_BS(T) (+) I)(I (+) S_BS(1/2))`.
pub fn bs_chain_map(t: f64) -> Result<SymplecticMap> {
    let first = SymplecticMap::beamsplitter(t, 3, 0, 1)?;
    let second = SymplecticMap::beamsplitter(0.5, 3, 1, 2)?;
    Ok(first.compose(&second))
}

/// Sends a three-mode (signal, vacuum, vacuum) mixture through the splitter
/// chain: the signal is tapped with transmittance `T` and the tap is split
/// on a balanced splitter.
pub fn apply_bs_chain(mix: &GaussianMixture, t: f64) -> Result<GaussianMixture> {
    if mix.modes != 3 {
        return Err(Error::Shape(format!(
            "splitter chain needs 3 modes, got {}",
            mix.modes
        )));
    }
    mix.transform(&bs_chain_map(t)?)
}

/// Input of the on/off scheme: squeezed signal with two vacuum ancillas,
/// already propagated through the splitter chain.
pub fn scheme_input_cf(r: f64, t: f64) -> Result<GaussianMixture> {
    let input = squeezed_vacuum_cf(r).tensor(&GaussianMixture::vacuum(2))?;
    apply_bs_chain(&input, t)
}

/// `Pi_off` of an on/off detector as one Gaussian term: a displaced thermal
/// form `e^{-nu}/eta * rho_th` with covariance `(2 - eta)/eta` centred at
/// `-beta`. Empty for an always-on detector.
pub fn off_povm_cf(det: &DetectorModel) -> Result<GaussianMixture> {
    det.validate()?;
    if det.is_always_on() {
        return Ok(GaussianMixture {
            modes: 1,
            terms: Vec::new(),
        });
    }
    let weight = C64::new((-det.nu).exp() / det.eta, 0.0);
    let var = (2.0 - det.eta) / det.eta;
    let b = det.displacement;
    let mean = DVector::from_vec(vec![C64::new(-2.0 * b.re, 0.0), C64::new(-2.0 * b.im, 0.0)]);
    Ok(GaussianMixture {
        modes: 1,
        terms: vec![GaussianTerm::gaussian(
            weight,
            mean,
            DMatrix::identity(2, 2) * var,
        )],
    })
}

/// `(chi_off, chi_on)` with `chi_on = chi_I - chi_off`.
pub fn onoff_povm_cf(det: &DetectorModel) -> Result<(GaussianMixture, GaussianMixture)> {
    let off = off_povm_cf(det)?;
    let mut on_terms = vec![GaussianTerm::identity(ONE, 1)];
    on_terms.extend(off.scaled(-ONE).terms);
    Ok((
        off,
        GaussianMixture {
            modes: 1,
            terms: on_terms,
        },
    ))
}

/// Output of mode A (index 0) conditioned on clicks at modes B (1) and C (2).
pub fn conditional_output_cf(
    state: &GaussianMixture,
    det_b: &DetectorModel,
    det_c: &DetectorModel,
) -> Result<(GaussianMixture, f64)> {
    if state.modes != 3 {
        return Err(Error::Shape(format!(
            "conditioning needs 3 modes, got {}",
            state.modes
        )));
    }
    let (_, on_b) = onoff_povm_cf(det_b)?;
    let (_, on_c) = onoff_povm_cf(det_c)?;
    let out = state.partial_pair(&[(1, &on_b), (2, &on_c)])?;
    let p = out.trace()?.re;
    if !(p > DEFAULT_PROBABILITY_FLOOR) {
        return Err(Error::ZeroProbability {
            probability: p,
            floor: DEFAULT_PROBABILITY_FLOOR,
        });
    }
    Ok((out.scaled(C64::new(1.0 / p, 0.0)), p.min(1.0)))
}

/// Probabilities `[[off_B off_C, off_B on_C], [on_B off_C, on_B on_C]]`.
pub fn branch_probabilities(
    state: &GaussianMixture,
    det_b: &DetectorModel,
    det_c: &DetectorModel,
) -> Result<[[f64; 2]; 2]> {
    let (off_b, on_b) = onoff_povm_cf(det_b)?;
    let (off_c, on_c) = onoff_povm_cf(det_c)?;
    let b = [&off_b, &on_b];
    let c = [&off_c, &on_c];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = state.partial_pair(&[(1, b[i]), (2, c[j])])?.trace()?.re;
        }
    }
    Ok(out)
}
