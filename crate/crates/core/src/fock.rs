//! Exact engine on truncated Fock spaces.
//!
//! Every state and operator lives in a number basis `|0>, ..., |dim-1>`.
//! Constructors compute the probability mass that the truncation discards
//! (`tail_mass`) from the exact expansion and refuse to build a state whose
//! tail exceeds the configured tolerance; transformations instead record the
//! mass they drop and leave the caller to decide.
//!
//! Conventions shared with the rest of the crate:
//! * quadratures `x = a + a^dag`, `p = -i (a - a^dag)`, vacuum variance 1;
//! * `D(beta) = exp(beta a^dag - beta^* a)`;
//! * beamsplitter `B_T = exp[theta (a^dag b - a b^dag)]`, `cos(theta) = sqrt(T)`,
//!   which maps `a^dag -> sqrt(T) a^dag - sqrt(1-T) b^dag`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{displacement_matrix, expm, ln_factorial};

/// Per-mode truncation used by the reproduction runs (`N_max = 31`).
pub const DEFAULT_DIM: usize = 32;
/// Default bound on discarded probability mass.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
/// Default floor below which a conditioning event is treated as impossible.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-14;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// A truncated number basis together with its truncation policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSpace {
    pub dim: usize,
    pub tail_tolerance: f64,
}

impl FockSpace {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "Fock space dimension must be positive");
        Self {
            dim,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tail_tolerance = tolerance;
        self
    }

    fn check_tail(&self, tail: f64) -> Result<()> {
        if tail >= self.tail_tolerance {
            Err(Error::Truncation {
                tail,
                tolerance: self.tail_tolerance,
                dim: self.dim,
            })
        } else {
            Ok(())
        }
    }

    pub fn vacuum(&self) -> FockVector {
        FockVector::basis(0, self.dim)
    }

    pub fn number_state(&self, n: usize) -> Result<FockVector> {
        if n >= self.dim {
            return Err(Error::Truncation {
                tail: 1.0,
                tolerance: self.tail_tolerance,
                dim: self.dim,
            });
        }
        Ok(FockVector::basis(n, self.dim))
    }

    /// Coherent state `|alpha>`.
    pub fn coherent(&self, alpha: C64) -> Result<FockVector> {
        let (amps, tail) = coherent_amplitudes(alpha, self.dim);
        self.check_tail(tail)?;
        let mut v = FockVector::from_amps(amps);
        v.tail_mass = tail;
        v.normalize()?;
        Ok(v)
    }

    /// Normalized superposition `c_plus |alpha> + c_minus |-alpha>`.
    pub fn cat(&self, alpha: C64, c_plus: C64, c_minus: C64) -> Result<FockVector> {
        let overlap = (-2.0 * alpha.norm_sqr()).exp();
        let norm_sqr =
            c_plus.norm_sqr() + c_minus.norm_sqr() + 2.0 * (c_plus.conj() * c_minus).re * overlap;
        if !(norm_sqr > 1e-16) {
            return Err(Error::DegenerateState {
                norm: norm_sqr.max(0.0).sqrt(),
            });
        }
        let (plus, tail_p) = coherent_amplitudes(alpha, self.dim);
        let (minus, tail_m) = coherent_amplitudes(-alpha, self.dim);
        let amps: Vec<C64> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| c_plus * p + c_minus * m)
            .collect();
        let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let bound = (tail_p + tail_m) * (c_plus.norm() + c_minus.norm()).powi(2) / norm_sqr;
        let tail = ((norm_sqr - kept) / norm_sqr).max(0.0).min(bound);
        self.check_tail(tail)?;
        let mut v = FockVector::from_amps(amps);
        v.tail_mass = tail;
        v.normalize()?;
        Ok(v)
    }

    /// Even (`+`) or odd (`-`) cat `|alpha> +- |-alpha>`.
    pub fn parity_cat(&self, alpha: C64, even: bool) -> Result<FockVector> {
        let sign = if even { ONE } else { -ONE };
        self.cat(alpha, ONE, sign)
    }

    /// Squeezed vacuum with `<x^2> = e^{2r}`: amplitudes
    /// `<2n|psi> = lambda^n sqrt((2n)!) / (2^n n!) / sqrt(cosh r)`, `lambda = tanh r`.
    pub fn squeezed_vacuum(&self, r: f64) -> Result<FockVector> {
        let lambda = r.tanh();
        let pref = 1.0 / r.cosh().sqrt();
        let mut amps = vec![ZERO; self.dim];
        let mut c = pref;
        let mut n = 0usize;
        while 2 * n < self.dim {
            amps[2 * n] = C64::new(c, 0.0);
            c *= lambda * ((2 * n + 1) as f64 / (2 * n + 2) as f64).sqrt();
            n += 1;
        }
        let mut tail = 0.0;
        while c * c > 1e-30 * tail {
            tail += c * c;
            c *= lambda * ((2 * n + 1) as f64 / (2 * n + 2) as f64).sqrt();
            n += 1;
        }
        self.check_tail(tail)?;
        let mut v = FockVector::from_amps(amps);
        v.tail_mass = tail;
        v.normalize()?;
        Ok(v)
    }

    pub fn identity(&self) -> FockOperator {
        FockOperator::identity(self.dim)
    }

    pub fn number_operator(&self) -> FockOperator {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for n in 0..self.dim {
            m[(n, n)] = C64::new(n as f64, 0.0);
        }
        FockOperator::hermitian(m)
    }

    pub fn parity_operator(&self) -> FockOperator {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for n in 0..self.dim {
            m[(n, n)] = if n % 2 == 0 { ONE } else { -ONE };
        }
        FockOperator::hermitian(m)
    }

    /// Exact matrix elements of `D(beta)` restricted to the space.
    pub fn displacement(&self, beta: C64) -> FockOperator {
        FockOperator::from_matrix(displacement_matrix(beta, self.dim))
    }

    /// On/off detector POVM `(Pi_off, Pi_on)`.
    ///
    /// `Pi_off = e^{-nu} sum_m (1-eta)^m D^dag(beta)|m><m|D(beta)` is evaluated
    /// through its normal-ordered form
    /// `e^{-nu - eta|beta|^2} e^{-eta beta a^dag} (1-eta)^{n} e^{-eta beta^* a}`,
    /// whose number-basis elements are finite sums, so the truncated matrix
    /// is exact entry by entry.
    pub fn povm_onoff(&self, det: &DetectorModel) -> (FockOperator, FockOperator) {
        let dim = self.dim;
        let eta = det.eta;
        let beta = det.displacement;
        let global = if det.nu.is_infinite() {
            0.0
        } else {
            (-det.nu - eta * beta.norm_sqr()).exp()
        };
        // lower[j][i] = <j| e^{-eta beta a^dag} |i>
        let shift = -eta * beta;
        let mut lower = DMatrix::<C64>::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let k = j - i;
                let mag = (0.5 * (ln_factorial(j) - ln_factorial(i)) - ln_factorial(k)).exp();
                lower[(j, i)] = shift.powu(k as u32) * mag;
            }
        }
        let mut diag = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            diag[(i, i)] = C64::new((1.0 - eta).powi(i as i32), 0.0);
        }
        let off = &lower * diag * lower.adjoint() * C64::new(global, 0.0);
        let on = DMatrix::identity(dim, dim) - &off;
        (FockOperator::hermitian(off), FockOperator::hermitian(on))
    }
}

impl Default for FockSpace {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

/// Exact (unnormalized-by-truncation) coherent amplitudes and the discarded tail.
fn coherent_amplitudes(alpha: C64, dim: usize) -> (Vec<C64>, f64) {
    let mod2 = alpha.norm_sqr();
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * mod2).exp(), 0.0);
    for n in 0..dim {
        amps.push(c);
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    // tail = sum_{n >= dim} e^{-|a|^2} |a|^{2n} / n!
    let mut term = c.norm_sqr();
    let mut tail = 0.0;
    let mut n = dim;
    while term > 0.0 {
        tail += term;
        n += 1;
        term *= mod2 / n as f64;
        if term < 1e-30 * tail {
            break;
        }
    }
    (amps, tail)
}

/// On/off detector with efficiency `eta`, dark parameter `nu` and an optional
/// displacement `D(beta)` applied in front of it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta: f64,
    pub nu: f64,
    pub displacement: C64,
}

impl DetectorModel {
    pub fn new(eta: f64, nu: f64, displacement: C64) -> Result<Self> {
        let det = Self {
            eta,
            nu,
            displacement,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn ideal() -> Self {
        Self {
            eta: 1.0,
            nu: 0.0,
            displacement: ZERO,
        }
    }

    /// Detector that clicks with certainty (`Pi_off = 0`, `Pi_on = I`).
    pub fn always_on() -> Self {
        Self {
            eta: 1.0,
            nu: f64::INFINITY,
            displacement: ZERO,
        }
    }

    pub fn with_displacement(mut self, beta: C64) -> Self {
        self.displacement = beta;
        self
    }

    pub fn is_always_on(&self) -> bool {
        self.nu.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "detector efficiency {} outside (0, 1]",
                self.eta
            )));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dark parameter {} must be non-negative",
                self.nu
            )));
        }
        if !(self.displacement.re.is_finite() && self.displacement.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite displacement".into()));
        }
        Ok(())
    }
}

/// Complex amplitudes over a truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
    tail_mass: f64,
}

impl FockVector {
    pub fn from_amps(amps: Vec<C64>) -> Self {
        assert!(!amps.is_empty(), "FockVector needs a positive dimension");
        Self {
            amps,
            tail_mass: 0.0,
        }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Self::from_amps(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn basis(n: usize, dim: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[n] = ONE;
        Self::from_amps(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn with_tail_mass(mut self, tail: f64) -> Self {
        self.tail_mass = tail;
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm; fails when the norm is below `1e-8`.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > 1e-8) {
            return Err(Error::DegenerateState { norm });
        }
        for a in &mut self.amps {
            *a /= norm;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `<self|other>`; dimensions may differ, missing entries count as zero.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2 / (<self|self><other|other>)`.
    pub fn fidelity(&self, other: &FockVector) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr()
    }

    /// `a * self + b * other` (dimension of the longer operand).
    pub fn superpose(a: C64, x: &FockVector, b: C64, y: &FockVector) -> FockVector {
        let dim = x.dim().max(y.dim());
        let get = |v: &FockVector, i: usize| v.amps.get(i).copied().unwrap_or(ZERO);
        let amps = (0..dim).map(|i| a * get(x, i) + b * get(y, i)).collect();
        FockVector {
            amps,
            tail_mass: x.tail_mass + y.tail_mass,
        }
    }

    pub fn scaled(&self, c: C64) -> FockVector {
        FockVector {
            amps: self.amps.iter().map(|a| a * c).collect(),
            tail_mass: self.tail_mass,
        }
    }

    /// Zero-pads or truncates to `dim`; truncated mass is added to the tail.
    pub fn resized(&self, dim: usize) -> FockVector {
        let mut amps = self.amps.clone();
        let dropped: f64 = amps.iter().skip(dim).map(|a| a.norm_sqr()).sum();
        amps.resize(dim, ZERO);
        FockVector {
            amps,
            tail_mass: self.tail_mass + dropped,
        }
    }

    /// Multiplies by a global phase so that the first non-negligible
    /// amplitude is real and positive.
    pub fn with_canonical_phase(mut self) -> FockVector {
        let scale = self.norm_sqr().sqrt();
        if let Some(lead) = self.amps.iter().find(|a| a.norm() > 1e-9 * scale).copied() {
            let phase = lead.conj() / lead.norm();
            for a in &mut self.amps {
                *a *= phase;
            }
        }
        self
    }

    pub fn to_density(&self) -> FockOperator {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        FockOperator::hermitian(&v * v.adjoint())
    }

    pub(crate) fn as_dvector(&self) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(&self.amps)
    }
}

#[derive(Serialize, Deserialize)]
struct FockVectorRepr {
    dim: usize,
    amps: Vec<f64>,
    #[serde(default)]
    tail_mass: f64,
}

impl Serialize for FockVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FockVectorRepr {
            dim: self.dim(),
            amps: interleave(self.amps.iter()),
            tail_mass: self.tail_mass,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FockVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FockVectorRepr::deserialize(d)?;
        let amps = deinterleave(&repr.amps, repr.dim).map_err(serde::de::Error::custom)?;
        if repr.dim == 0 {
            return Err(serde::de::Error::custom("dim must be positive"));
        }
        Ok(FockVector {
            amps,
            tail_mass: repr.tail_mass,
        })
    }
}

fn interleave<'a>(it: impl Iterator<Item = &'a C64>) -> Vec<f64> {
    it.flat_map(|c| [c.re, c.im]).collect()
}

fn deinterleave(data: &[f64], len: usize) -> std::result::Result<Vec<C64>, String> {
    if data.len() != 2 * len {
        return Err(format!(
            "expected {} interleaved values, found {}",
            2 * len,
            data.len()
        ));
    }
    Ok(data.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

/// Dense operator on a truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    entries: DMatrix<C64>,
    hermitian_hint: bool,
}

impl FockOperator {
    pub fn from_matrix(entries: DMatrix<C64>) -> Self {
        assert!(entries.is_square(), "operator matrix must be square");
        Self {
            entries,
            hermitian_hint: false,
        }
    }

    /// Marks the operator Hermitian and symmetrizes away rounding noise.
    pub fn hermitian(entries: DMatrix<C64>) -> Self {
        assert!(entries.is_square(), "operator matrix must be square");
        let sym = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        Self {
            entries: sym,
            hermitian_hint: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::hermitian(DMatrix::identity(dim, dim))
    }

    pub fn projector(v: &FockVector) -> Self {
        v.to_density()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `<v|O|v>` using the overlapping block when dimensions differ.
    pub fn expectation(&self, v: &FockVector) -> C64 {
        let d = self.dim().min(v.dim());
        let mut acc = ZERO;
        for i in 0..d {
            let vi = v.amps[i].conj();
            if vi == ZERO {
                continue;
            }
            for j in 0..d {
                acc += vi * self.entries[(i, j)] * v.amps[j];
            }
        }
        acc
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        assert_eq!(self.dim(), v.dim(), "operator/vector dimension mismatch");
        let out = &self.entries * v.as_dvector();
        FockVector {
            amps: out.iter().copied().collect(),
            tail_mass: v.tail_mass,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * C64::new(c, 0.0),
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn plus(&self, other: &FockOperator) -> Self {
        Self {
            entries: &self.entries + &other.entries,
            hermitian_hint: self.hermitian_hint && other.hermitian_hint,
        }
    }

    pub fn minus(&self, other: &FockOperator) -> Self {
        Self {
            entries: &self.entries - &other.entries,
            hermitian_hint: self.hermitian_hint && other.hermitian_hint,
        }
    }

    pub fn product(&self, other: &FockOperator) -> Self {
        Self::from_matrix(&self.entries * &other.entries)
    }

    /// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
    pub fn eigh(&self) -> (Vec<f64>, Vec<FockVector>) {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let mut pairs: Vec<(f64, FockVector)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lam)| {
                let col = eig.eigenvectors.column(k);
                (lam, FockVector::from_amps(col.iter().copied().collect()))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().0.first().copied().unwrap_or(0.0)
    }

    /// Pure-state decomposition `sum_k w_k |v_k><v_k|`, dropping weights
    /// below `cutoff` times the largest.
    pub fn pure_components(&self, cutoff: f64) -> Vec<(f64, FockVector)> {
        let (vals, vecs) = self.eigh();
        let top = vals.iter().copied().fold(0.0, f64::max);
        vals.into_iter()
            .zip(vecs)
            .filter(|(w, _)| *w > cutoff * top)
            .rev()
            .collect()
    }

    pub fn resized(&self, dim: usize) -> FockOperator {
        let d = self.dim().min(dim);
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (d, d))
            .copy_from(&self.entries.view((0, 0), (d, d)));
        Self {
            entries: m,
            hermitian_hint: self.hermitian_hint,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FockOperatorRepr {
    dim: usize,
    entries: Vec<f64>,
    #[serde(default)]
    hermitian_hint: bool,
}

impl Serialize for FockOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // row-major
        let rows: Vec<C64> = (0..self.dim())
            .flat_map(|i| (0..self.dim()).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[(i, j)])
            .collect();
        FockOperatorRepr {
            dim: self.dim(),
            entries: interleave(rows.iter()),
            hermitian_hint: self.hermitian_hint,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FockOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FockOperatorRepr::deserialize(d)?;
        let vals =
            deinterleave(&repr.entries, repr.dim * repr.dim).map_err(serde::de::Error::custom)?;
        Ok(FockOperator {
            entries: DMatrix::from_row_slice(repr.dim, repr.dim, &vals),
            hermitian_hint: repr.hermitian_hint,
        })
    }
}

/// Either a pure state or a density operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FockState {
    Pure(FockVector),
    Mixed(FockOperator),
}

impl FockState {
    pub fn dim(&self) -> usize {
        match self {
            FockState::Pure(v) => v.dim(),
            FockState::Mixed(rho) => rho.dim(),
        }
    }

    pub fn density(&self) -> FockOperator {
        match self {
            FockState::Pure(v) => v.to_density(),
            FockState::Mixed(rho) => rho.clone(),
        }
    }

    /// `<target|rho|target>` for a normalized pure target.
    pub fn fidelity_with(&self, target: &FockVector) -> f64 {
        let t = target.norm_sqr();
        match self {
            FockState::Pure(v) => v.fidelity(target),
            FockState::Mixed(rho) => rho.expectation(target).re / (t * rho.trace().re),
        }
    }

    pub fn pure_components(&self, cutoff: f64) -> Vec<(f64, FockVector)> {
        match self {
            FockState::Pure(v) => vec![(1.0, v.clone())],
            FockState::Mixed(rho) => rho.pure_components(cutoff),
        }
    }

    pub fn mean_photon_number(&self) -> f64 {
        match self {
            FockState::Pure(v) => v.mean_photon_number(),
            FockState::Mixed(rho) => {
                let tr = rho.trace().re;
                (0..rho.dim())
                    .map(|n| n as f64 * rho.entries()[(n, n)].re)
                    .sum::<f64>()
                    / tr
            }
        }
    }
}

/// Which factor of a two-mode product a measurement acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

/// Pure state of two modes, amplitudes `psi[(n_A, n_B)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    amps: DMatrix<C64>,
    tail_mass: f64,
}

impl TwoModeState {
    pub fn from_matrix(amps: DMatrix<C64>) -> Self {
        Self {
            amps,
            tail_mass: 0.0,
        }
    }

    pub fn product(a: &FockVector, b: &FockVector) -> Self {
        let va = a.as_dvector();
        let vb = b.as_dvector();
        Self {
            amps: &va * vb.transpose(),
            tail_mass: a.tail_mass + b.tail_mass,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.amps.nrows(), self.amps.ncols())
    }

    pub fn amps(&self) -> &DMatrix<C64> {
        &self.amps
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n > 1e-8) {
            return Err(Error::DegenerateState { norm: n });
        }
        self.amps /= C64::new(n, 0.0);
        Ok(())
    }

    /// Applies `B_T` (mode A is the first port).
    pub fn beamsplitter(&self, t: f64) -> Result<TwoModeState> {
        let (da, db) = self.dims();
        let bs = BeamSplitter::new(t, da + db - 2)?;
        Ok(bs.apply(self))
    }

    /// Reduced density operator of the given mode.
    pub fn reduced(&self, keep: Mode) -> FockOperator {
        match keep {
            Mode::A => FockOperator::hermitian(&self.amps * self.amps.adjoint()),
            Mode::B => FockOperator::hermitian((self.amps.adjoint() * &self.amps).transpose()),
        }
    }

    /// Measures `mode` with POVM element `povm`; returns the normalized state of
    /// the other mode and the outcome probability.
    pub fn condition_on_outcome(
        &self,
        mode: Mode,
        povm: &FockOperator,
    ) -> Result<(FockOperator, f64)> {
        self.condition_with_floor(mode, povm, DEFAULT_PROBABILITY_FLOOR)
    }

    pub fn condition_with_floor(
        &self,
        mode: Mode,
        povm: &FockOperator,
        floor: f64,
    ) -> Result<(FockOperator, f64)> {
        let unnorm = self.partial_apply(mode, povm)?;
        let p = unnorm.trace().re;
        if !(p > floor) {
            return Err(Error::ZeroProbability {
                probability: p,
                floor,
            });
        }
        Ok((unnorm.scaled(1.0 / p), p.min(1.0)))
    }

    /// `Tr_mode[(I (x) Pi) |psi><psi|]`, unnormalized.
    pub fn partial_apply(&self, mode: Mode, povm: &FockOperator) -> Result<FockOperator> {
        let (da, db) = self.dims();
        let m = &self.amps;
        match mode {
            Mode::B => {
                if povm.dim() != db {
                    return Err(Error::Shape(format!(
                        "POVM dim {} vs mode B dim {}",
                        povm.dim(),
                        db
                    )));
                }
                Ok(FockOperator::hermitian(
                    m * povm.entries.transpose() * m.adjoint(),
                ))
            }
            Mode::A => {
                if povm.dim() != da {
                    return Err(Error::Shape(format!(
                        "POVM dim {} vs mode A dim {}",
                        povm.dim(),
                        da
                    )));
                }
                let mt = m.transpose();
                Ok(FockOperator::hermitian(
                    &mt * povm.entries.transpose() * mt.adjoint(),
                ))
            }
        }
    }

    /// Projects `mode` onto the ket `onto`; returns the normalized pure state
    /// of the other mode and the probability.
    pub fn project(&self, mode: Mode, onto: &FockVector) -> Result<(FockVector, f64)> {
        let (da, db) = self.dims();
        let bra = onto.as_dvector().map(|c| c.conj());
        let out = match mode {
            Mode::B => {
                if onto.dim() != db {
                    return Err(Error::Shape("projector dim vs mode B".into()));
                }
                &self.amps * bra
            }
            Mode::A => {
                if onto.dim() != da {
                    return Err(Error::Shape("projector dim vs mode A".into()));
                }
                self.amps.transpose() * bra
            }
        };
        let v = FockVector {
            amps: out.iter().copied().collect(),
            tail_mass: self.tail_mass,
        };
        let p = v.norm_sqr() / onto.norm_sqr();
        if !(p > DEFAULT_PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability {
                probability: p,
                floor: DEFAULT_PROBABILITY_FLOOR,
            });
        }
        Ok((v.normalized()?, p))
    }
}

/// `B_T` restricted to total photon number blocks `N = 0..=max_total`.
///
/// Inside a block the operator is exact; only components that land outside
/// the per-mode truncation are dropped (and accounted as tail mass).
#[derive(Clone, Debug)]
pub struct BeamSplitter {
    transmittance: f64,
    blocks: Vec<DMatrix<f64>>,
}

impl BeamSplitter {
    pub fn new(t: f64, max_total: usize) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmittance {t} outside (0, 1]"
            )));
        }
        Ok(Self::with_angle(t.sqrt().acos(), max_total, t))
    }

    /// `exp[theta (a^dag b - a b^dag)]` for an arbitrary mixing angle; a
    /// negative angle gives the inverse splitter.
    pub fn from_angle(theta: f64, max_total: usize) -> Self {
        Self::with_angle(theta, max_total, theta.cos().powi(2))
    }

    fn with_angle(theta: f64, max_total: usize, t: f64) -> Self {
        let blocks = (0..=max_total)
            .map(|n| {
                // basis |k, N-k>, k = photons in the first port
                let mut g = DMatrix::<f64>::zeros(n + 1, n + 1);
                for k in 0..n {
                    let amp = theta * (((k + 1) * (n - k)) as f64).sqrt();
                    g[(k + 1, k)] = amp;
                    g[(k, k + 1)] = -amp;
                }
                expm(&g)
            })
            .collect();
        Self {
            transmittance: t,
            blocks,
        }
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn apply(&self, state: &TwoModeState) -> TwoModeState {
        let (da, db) = state.dims();
        let mut out = DMatrix::<C64>::zeros(da, db);
        let mut dropped = 0.0;
        let max_n = (da + db - 2).min(self.blocks.len() - 1);
        for n in 0..=max_n {
            let block = &self.blocks[n];
            let k_lo = n.saturating_sub(db - 1);
            let k_hi = n.min(da - 1);
            if k_lo > k_hi {
                continue;
            }
            let input: Vec<(usize, C64)> = (k_lo..=k_hi)
                .map(|k| (k, state.amps[(k, n - k)]))
                .filter(|(_, a)| *a != ZERO)
                .collect();
            if input.is_empty() {
                continue;
            }
            for kp in 0..=n {
                let mut acc = ZERO;
                for &(k, a) in &input {
                    acc += a * block[(kp, k)];
                }
                if kp < da && n - kp < db {
                    out[(kp, n - kp)] = acc;
                } else {
                    dropped += acc.norm_sqr();
                }
            }
        }
        TwoModeState {
            amps: out,
            tail_mass: state.tail_mass + dropped,
        }
    }

    /// Vector `U |n>_1 |ancilla>_2` for every input number `n < dim`.
    fn images(&self, ancilla: &FockVector, dim: usize) -> Vec<TwoModeState> {
        (0..dim)
            .map(|n| {
                let input =
                    TwoModeState::product(&FockVector::basis(n, dim), &ancilla.resized(dim));
                self.apply(&input)
            })
            .collect()
    }

    /// Effective POVM on the first input port when it is mixed with
    /// `ancilla` and the two outputs are measured with `pi_1 (x) pi_2`:
    /// `E = <anc| U^dag (pi_1 (x) pi_2) U |anc>`.
    pub fn effective_povm(
        &self,
        ancilla: &FockVector,
        pi_1: &FockOperator,
        pi_2: &FockOperator,
    ) -> FockOperator {
        let dim = pi_1.dim();
        let images = self.images(ancilla, dim);
        let transformed: Vec<DMatrix<C64>> = images
            .iter()
            .map(|w| &pi_1.entries * &w.amps * pi_2.entries.transpose())
            .collect();
        let mut e = DMatrix::<C64>::zeros(dim, dim);
        for m in 0..dim {
            for n in 0..dim {
                e[(m, n)] = images[m].amps.dotc(&transformed[n]);
            }
        }
        FockOperator::hermitian(e)
    }

    /// Ket `kappa` on the first input port such that detecting `|k_1>|k_2>`
    /// at the outputs is equivalent to projecting that port onto `kappa`:
    /// `kappa_n = <n, anc| U^dag |k_1, k_2>`.
    pub fn effective_projection(
        &self,
        ancilla: &FockVector,
        k_1: &FockVector,
        k_2: &FockVector,
    ) -> FockVector {
        let dim = k_1.dim();
        let target = TwoModeState::product(k_1, &k_2.resized(dim));
        let amps = self
            .images(ancilla, dim)
            .iter()
            .map(|w| w.amps.dotc(&target.amps))
            .collect();
        FockVector::from_amps(amps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coherent_vacuum_identity() {
        let v = FockSpace::new(10).coherent(ZERO).unwrap();
        assert_eq!(v.amps()[0], ONE);
        assert!(v.amps()[1..].iter().all(|a| *a == ZERO));
    }

    #[test]
    fn coherent_mean_photon_number() {
        let v = FockSpace::new(30).coherent(c(0.97, 0.0)).unwrap();
        assert!((v.mean_photon_number() - 0.9409).abs() < 1e-9);
    }

    #[test]
    fn coherent_overlap_of_opposite_amplitudes() {
        let s = FockSpace::new(32);
        let a = s.coherent(c(0.95, 0.0)).unwrap();
        let b = s.coherent(c(-0.95, 0.0)).unwrap();
        assert_relative_eq!(
            a.inner(&b).norm_sqr(),
            (-3.61f64).exp(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn coherent_truncation_error() {
        let err = FockSpace::new(5).coherent(c(3.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn cat_parities() {
        let s = FockSpace::new(32);
        let even = s.cat(c(1.0, 0.0), ONE, ONE).unwrap();
        let odd = s.cat(c(1.0, 0.0), ONE, -ONE).unwrap();
        for n in 0..32 {
            if n % 2 == 1 {
                assert!(even.amps()[n].norm() < 1e-15);
            } else {
                assert!(odd.amps()[n].norm() < 1e-15);
            }
        }
        assert!(even.amps()[0].norm() > 0.1);
        assert!(odd.amps()[1].norm() > 0.1);
    }

    #[test]
    fn cat_normalization_matches_closed_form() {
        // unnormalized |a> - |-a> has norm^2 N_- = 2(1 - e^{-2a^2})
        let alpha = 0.8;
        let s = FockSpace::new(40);
        let odd = s.cat(c(alpha, 0.0), ONE, -ONE).unwrap();
        let coh = s.coherent(c(alpha, 0.0)).unwrap();
        let n_minus = 2.0 * (1.0 - (-2.0 * alpha * alpha).exp());
        // <alpha|C_-> = (1 - e^{-2a^2}) / sqrt(N_-)
        let expected = (1.0 - (-2.0 * alpha * alpha).exp()) / n_minus.sqrt();
        assert_relative_eq!(coh.inner(&odd).re, expected, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_cat_rejected() {
        let err = FockSpace::new(10).cat(ZERO, ONE, -ONE).unwrap_err();
        assert!(matches!(err, Error::DegenerateState { .. }));
    }

    #[test]
    fn squeezed_vacuum_is_vacuum_at_zero() {
        let v = FockSpace::new(8).squeezed_vacuum(0.0).unwrap();
        assert_eq!(v, FockVector::basis(0, 8));
    }

    #[test]
    fn squeezed_vacuum_photon_number_and_parity() {
        let v = FockSpace::new(40).squeezed_vacuum(0.3).unwrap();
        assert!((v.mean_photon_number() - 0.3f64.sinh().powi(2)).abs() < 1e-9);
        for n in (1..40).step_by(2) {
            assert_eq!(v.amps()[n], ZERO);
        }
    }

    #[test]
    fn squeezed_vacuum_antisqueezes_x() {
        // <x^2> = <(a + a^dag)^2> = 1 + 2<n> + 2 Re<a^2>
        let r = 0.3;
        let v = FockSpace::new(40).squeezed_vacuum(r).unwrap();
        let a2: C64 = (2..40)
            .map(|n| v.amps()[n - 2].conj() * v.amps()[n] * ((n * (n - 1)) as f64).sqrt())
            .sum();
        let x2 = 1.0 + 2.0 * v.mean_photon_number() + 2.0 * a2.re;
        assert_relative_eq!(x2, (2.0 * r).exp(), max_relative = 1e-10);
    }

    #[test]
    fn squeezed_vacuum_tail_reported() {
        // r = 0.6 is not converged at the default truncation
        let err = FockSpace::new(32).squeezed_vacuum(0.6).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        assert!(FockSpace::new(48).squeezed_vacuum(0.6).is_ok());
    }

    #[test]
    fn beamsplitter_identity_at_unit_transmittance() {
        let s = FockSpace::new(24);
        let st = TwoModeState::product(
            &s.squeezed_vacuum(0.3).unwrap(),
            &s.coherent(c(0.2, 0.1)).unwrap(),
        );
        let out = st.beamsplitter(1.0).unwrap();
        let diff = (out.amps() - st.amps())
            .iter()
            .map(|a| a.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn beamsplitter_sign_convention() {
        // |1,0> -> sqrt(T)|1,0> - sqrt(1-T)|0,1>
        let st = TwoModeState::product(&FockVector::basis(1, 4), &FockVector::basis(0, 4));
        let out = st.beamsplitter(0.5).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amps()[(1, 0)] - c(h, 0.0)).norm() < 1e-14);
        assert!((out.amps()[(0, 1)] - c(-h, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn beamsplitter_maps_coherent_pairs() {
        // |a, b> -> |sqrt(T) a + sqrt(1-T) b, -sqrt(1-T) a + sqrt(T) b>
        let s = FockSpace::new(30);
        let (a, b, t) = (c(0.7, 0.2), c(-0.3, 0.5), 0.8);
        let st = TwoModeState::product(&s.coherent(a).unwrap(), &s.coherent(b).unwrap());
        let out = st.beamsplitter(t).unwrap();
        let (ct, st_) = (t.sqrt(), (1.0 - t).sqrt());
        let expected = TwoModeState::product(
            &s.coherent(a * ct + b * st_).unwrap(),
            &s.coherent(-a * st_ + b * ct).unwrap(),
        );
        let overlap: C64 = expected.amps().dotc(out.amps());
        assert!(overlap.norm() > 1.0 - 1e-10);
    }

    #[test]
    fn povm_ideal_reductions() {
        let s = FockSpace::new(10);
        let (off, on) = s.povm_onoff(&DetectorModel::ideal());
        assert_eq!(off.entries()[(0, 0)], ONE);
        assert!(off.entries().iter().skip(1).all(|x| x.norm() < 1e-15));
        assert!((on.entries()[(1, 1)] - ONE).norm() < 1e-15);

        let beta = c(0.3, -0.2);
        let (off, _) = s.povm_onoff(&DetectorModel::ideal().with_displacement(beta));
        let minus_beta = s.coherent(-beta).unwrap();
        // compare against the exact (un-renormalized) amplitudes of |-beta>
        let exact: Vec<C64> = (0..10)
            .map(|n| crate::numerics::displacement_element(n, 0, -beta))
            .collect();
        for i in 0..10 {
            for j in 0..10 {
                let expected = exact[i] * exact[j].conj();
                assert!((off.entries()[(i, j)] - expected).norm() < 1e-14);
            }
        }
        assert!(minus_beta.fidelity(&FockVector::from_amps(exact)) > 1.0 - 1e-12);
    }

    #[test]
    fn povm_single_photon_element() {
        let s = FockSpace::new(10);
        let det = DetectorModel::new(0.1, 1e-7, ZERO).unwrap();
        let (off, _) = s.povm_onoff(&det);
        let p = off.expectation(&FockVector::basis(1, 10)).re;
        assert_relative_eq!(p, (-1e-7f64).exp() * 0.9, max_relative = 1e-14);
    }

    #[test]
    fn povm_matches_direct_displaced_sum() {
        // Pi_off = e^{-nu} sum_m (1-eta)^m D(-beta)|m><m|D(-beta)^dag, summed in a
        // larger space so the truncated block is converged
        let (eta, nu, beta): (f64, f64, C64) = (0.35, 0.02, c(0.4, 0.25));
        let dim = 8;
        let big = 80;
        let d = displacement_matrix(-beta, big);
        let mut direct = DMatrix::<C64>::zeros(dim, dim);
        for m in 0..big {
            let w = (-nu).exp() * (1.0 - eta).powi(m as i32);
            for i in 0..dim {
                for j in 0..dim {
                    direct[(i, j)] += d[(i, m)] * d[(j, m)].conj() * w;
                }
            }
        }
        let (off, _) = FockSpace::new(dim).povm_onoff(&DetectorModel::new(eta, nu, beta).unwrap());
        let diff = (off.entries() - direct)
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn always_on_detector() {
        let (off, on) = FockSpace::new(6).povm_onoff(&DetectorModel::always_on());
        assert!(off.entries().iter().all(|x| *x == ZERO));
        assert_eq!(on, FockOperator::identity(6));
    }

    #[test]
    fn condition_with_identity_gives_reduced_state() {
        let s = FockSpace::new(24);
        let st = TwoModeState::product(&s.squeezed_vacuum(0.3).unwrap(), &s.vacuum())
            .beamsplitter(0.9)
            .unwrap();
        let (rho, p) = st.condition_on_outcome(Mode::B, &s.identity()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let reduced = st.reduced(Mode::A);
        let diff = (rho.entries() - reduced.entries())
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn zero_probability_reported() {
        let s = FockSpace::new(6);
        let st = TwoModeState::product(&s.vacuum(), &s.vacuum());
        let err = st
            .condition_on_outcome(Mode::B, &FockOperator::projector(&FockVector::basis(1, 6)))
            .unwrap_err();
        assert!(matches!(err, Error::ZeroProbability { .. }));
    }

    #[test]
    fn effective_projection_balanced_single_photon() {
        // detecting |1>|0> after a balanced splitter with vacuum ancilla
        // projects the input onto |1>/sqrt(2)
        let bs = BeamSplitter::new(0.5, 10).unwrap();
        let dim = 5;
        let kappa = bs.effective_projection(
            &FockVector::basis(0, dim),
            &FockVector::basis(1, dim),
            &FockVector::basis(0, dim),
        );
        assert!((kappa.amps()[1] - c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!(kappa
            .amps()
            .iter()
            .enumerate()
            .all(|(n, a)| n == 1 || a.norm() < 1e-14));
    }

    #[test]
    fn serde_roundtrip_preserves_vector_and_operator() {
        let s = FockSpace::new(12);
        let v = s.coherent(c(0.3, -0.4)).unwrap();
        let back: FockVector = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, back);
        let op = s.displacement(c(0.1, 0.2));
        let back: FockOperator =
            serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        assert_eq!(op, back);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn povm_completeness(eta in 0.01f64..=1.0, nu in 0.0f64..2.0,
                                 br in -1.0f64..1.0, bi in -1.0f64..1.0) {
                let det = DetectorModel::new(eta, nu, C64::new(br, bi)).unwrap();
                let (off, on) = FockSpace::new(12).povm_onoff(&det);
                let sum = off.plus(&on);
                let id = DMatrix::<C64>::identity(12, 12);
                let diff = (sum.entries() - id).iter().map(|x| x.norm()).fold(0.0, f64::max);
                prop_assert!(diff < 1e-12);
                prop_assert!(off.min_eigenvalue() > -1e-10);
                prop_assert!(on.min_eigenvalue() > -1e-10);
                prop_assert!(off.max_hermitian_defect() < 1e-12);
            }

            #[test]
            fn beamsplitter_is_unitary(t in 0.01f64..=1.0, r in 0.0f64..0.5,
                                       ar in -0.8f64..0.8, ai in -0.8f64..0.8) {
                let s = FockSpace::new(30);
                let st = TwoModeState::product(&s.squeezed_vacuum(r).unwrap(),
                                               &s.coherent(C64::new(ar, ai)).unwrap());
                let out = st.beamsplitter(t).unwrap();
                prop_assert!((out.norm_sqr() + out.tail_mass() - st.norm_sqr()).abs() < 1e-10);
                // total photon number is conserved
                let n_in: f64 = st.amps().iter().enumerate()
                    .map(|(idx, a)| ((idx % 30) + (idx / 30)) as f64 * a.norm_sqr()).sum();
                let n_out: f64 = out.amps().iter().enumerate()
                    .map(|(idx, a)| ((idx % 30) + (idx / 30)) as f64 * a.norm_sqr()).sum();
                prop_assert!((n_in - n_out).abs() < 1e-8);
            }
        }
    }
}
