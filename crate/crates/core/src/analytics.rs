//! Closed-form results for photon-subtracted squeezed vacuum: the split of
//! the one- and two-photon-subtracted states into quasi-coherent components,
//! their fidelity with coherent states, detection weights, the displacement
//! that steers the on/off scheme and the ancilla that steers the PNRD scheme.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockSpace, FockVector};
use crate::numerics::ln_factorial;

/// Relative size of `|c+ + c-|` below which the target cannot be reached.
pub const SINGULAR_TARGET_REL: f64 = 1e-10;
/// Relative size of `|c+ + c-|` below which a warning is attached.
pub const NEAR_SINGULAR_REL: f64 = 1e-3;
/// `|beta|^2`-type validity ratio above which a warning is attached.
pub const VALIDITY_WARN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    /// Squeezing parameter; `lambda = tanh r`.
    pub r: f64,
    /// Power transmittance of the tapping splitter.
    pub t: f64,
    /// Displacement applied before detector C.
    #[serde(default)]
    pub beta: C64,
    #[serde(default = "unit")]
    pub c_plus: C64,
    #[serde(default)]
    pub c_minus: C64,
}

fn unit() -> C64 {
    C64::new(1.0, 0.0)
}

impl SchemeParams {
    pub fn new(r: f64, t: f64) -> Self {
        Self {
            r,
            t,
            beta: C64::new(0.0, 0.0),
            c_plus: C64::new(1.0, 0.0),
            c_minus: C64::new(0.0, 0.0),
        }
    }

    pub fn with_target(mut self, c_plus: C64, c_minus: C64) -> Self {
        self.c_plus = c_plus;
        self.c_minus = c_minus;
        self
    }

    pub fn with_beta(mut self, beta: C64) -> Self {
        self.beta = beta;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.r.tanh()
    }

    pub fn lambda_t(&self) -> f64 {
        self.lambda() * self.t
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("squeezing r = {}", self.r)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmittance {} outside (0, 1]",
                self.t
            )));
        }
        if self.c_plus.norm_sqr() + self.c_minus.norm_sqr() == 0.0 {
            return Err(Error::InvalidParameter(
                "target coefficients both zero".into(),
            ));
        }
        if !(self.beta.re.is_finite() && self.beta.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite displacement".into()));
        }
        Ok(())
    }

    /// Target coefficients scaled to unit norm `|c+|^2 + |c-|^2 = 1`.
    pub fn normalized_target(&self) -> (C64, C64) {
        let n = (self.c_plus.norm_sqr() + self.c_minus.norm_sqr()).sqrt();
        (self.c_plus / n, self.c_minus / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaQubit {
    pub b0: C64,
    pub b1: C64,
}

impl AncillaQubit {
    pub fn new(b0: C64, b1: C64) -> Result<Self> {
        let n = (b0.norm_sqr() + b1.norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateState { norm: n });
        }
        Ok(Self {
            b0: b0 / n,
            b1: b1 / n,
        })
    }

    pub fn to_fock(&self, dim: usize) -> FockVector {
        let mut amps = vec![C64::new(0.0, 0.0); dim.max(2)];
        amps[0] = self.b0;
        amps[1] = self.b1;
        FockVector::from_amps(amps)
    }
}

/// Outcome `(n_1, n_2)` of the two number-resolving detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PnrdOutcome {
    TwoZero,
    ZeroTwo,
}

impl PnrdOutcome {
    pub fn counts(&self) -> (usize, usize) {
        match self {
            PnrdOutcome::TwoZero => (2, 0),
            PnrdOutcome::ZeroTwo => (0, 2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(&self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Quasi-coherent amplitude `sqrt(3x / (1 - x^2))` at `x = lambda T`.
pub fn alpha_of(lambda_t: f64) -> f64 {
    (3.0 * lambda_t / (1.0 - lambda_t * lambda_t)).sqrt()
}

/// Inverse of [`alpha_of`] on `alpha >= 0`.
pub fn lambda_t_for_alpha(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    // root of a2 x^2 + 3x - a2 = 0, written to avoid cancellation
    2.0 * a2 / (3.0 + (9.0 + 4.0 * a2 * a2).sqrt())
}

fn check_open_lambda_t(params: &SchemeParams) -> Result<f64> {
    params.validate()?;
    let x = params.lambda_t();
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "lambda T = {x} outside (0, 1); the decomposition degenerates"
        )));
    }
    Ok(x)
}

pub fn decomposition_coeffs(params: &SchemeParams) -> Result<DecompositionCoeffs> {
    let x = check_open_lambda_t(params)?;
    let den = (1.0 + x) * (1.0 + 2.0 * x);
    Ok(DecompositionCoeffs {
        c1: (3.0 * x / den).sqrt(),
        c2: ((1.0 + 2.0 * x * x) / den).sqrt(),
        alpha: alpha_of(x),
    })
}

/// Quasi-coherent state `|phi_+->`, built directly from its number-basis
/// series. The even-photon factor is `sqrt(1 - x^2)`, which makes the series
/// exactly normalized and equal to `c2 |Psi_2> +- c1 |Psi_1>`. Amplitudes are evaluated in log space; the mass beyond `dim` is
/// summed from the same series and must stay under the space's tolerance.
pub fn phi_pm_state(params: &SchemeParams, sign: Sign, space: &FockSpace) -> Result<FockVector> {
    let x = check_open_lambda_t(params)?;
    let one_m = 1.0 - x * x;
    let ln_pref = 0.75 * one_m.ln() - (2.0f64).ln() - 0.5 * ((1.0 + x) * (1.0 + 2.0 * x)).ln();
    let ln_half_x = (0.5 * x).ln();
    let ln_even = 0.5 * one_m.ln();
    let ln_odd = 0.5 * (3.0 * x).ln();
    let amp = |k: usize| -> f64 {
        let n = k / 2;
        let ln_b = ln_pref + ln_factorial(2 * n + 2) - ln_factorial(n + 1) + n as f64 * ln_half_x;
        if k.is_multiple_of(2) {
            (ln_b + ln_even - 0.5 * ln_factorial(2 * n)).exp()
        } else {
            sign.value() * (ln_b + ln_odd - 0.5 * ln_factorial(2 * n + 1)).exp()
        }
    };
    let amps: Vec<C64> = (0..space.dim).map(|k| C64::new(amp(k), 0.0)).collect();
    let mut tail = 0.0;
    let mut k = space.dim;
    loop {
        let a2 = amp(k).powi(2) + amp(k + 1).powi(2);
        tail += a2;
        k += 2;
        if a2 < 1e-18 * tail.max(1e-300) || a2 < 1e-40 || k > 100_000 {
            break;
        }
    }
    if tail >= space.tail_tolerance {
        return Err(Error::Truncation {
            tail,
            tolerance: space.tail_tolerance,
            dim: space.dim,
        });
    }
    FockVector::from_amps(amps)
        .with_tail_mass(tail)
        .normalized()
}

/// `|<alpha|phi_+>|^2` in closed form; equal to one at `lambda T = 0`.
pub fn fidelity_closed_form(params: &SchemeParams) -> f64 {
    let x = params.lambda_t();
    (1.0 - x * x).sqrt() * (1.0 + x) * (1.0 + 2.0 * x) * (-3.0 * x / (1.0 + x)).exp()
}

/// Probability that `m` photons are reflected off the tapping splitter.
pub fn p_m(params: &SchemeParams, m: usize) -> f64 {
    let lambda = params.lambda();
    let t = params.t;
    let x = lambda * t;
    let lead = ((1.0 - lambda * lambda) / (1.0 - x * x)).sqrt();
    if m == 0 {
        return lead;
    }
    if x == 0.0 || t == 1.0 {
        return 0.0;
    }
    // [x^2 (1-T) / (T (1 - x^2))]^m (2x)^{-2k} regrouped to stay finite as x -> 0
    let ratio = (1.0 - t) / (t * (1.0 - x * x));
    let sum: f64 = (0..=m / 2)
        .map(|k| {
            let ln_c = ln_factorial(m) - ln_factorial(m - 2 * k) - 2.0 * ln_factorial(k);
            (ln_c + (2 * m - 2 * k) as f64 * x.ln() - 2.0 * k as f64 * 2f64.ln()).exp()
        })
        .sum();
    lead * ratio.powi(m as i32) * sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalBeta {
    pub beta: C64,
    /// Left side of the small-displacement condition divided by its right side.
    pub validity: f64,
    pub warnings: Vec<String>,
}

/// Displacement that makes the on/off scheme approximate
/// `c+ |phi_+> + c- |phi_->`.
pub fn optimal_beta(params: &SchemeParams) -> Result<OptimalBeta> {
    params.validate()?;
    let sum = params.c_plus + params.c_minus;
    let scale = params.c_plus.norm() + params.c_minus.norm();
    let rel = sum.norm() / scale;
    if rel <= SINGULAR_TARGET_REL {
        return Err(Error::SingularTarget { sum: sum.norm() });
    }
    let mut warnings = Vec::new();
    if rel < NEAR_SINGULAR_REL {
        warnings.push(format!(
            "|c+ + c-| is {rel:.2e} of the target scale; the displacement is far outside its small-amplitude regime"
        ));
    }
    let lambda = params.lambda();
    let x = params.lambda_t();
    let ratio = (params.c_plus - params.c_minus) / sum;
    let k2 = 3.0 * lambda * (1.0 - params.t) / (2.0 * (1.0 - x * x));
    let beta = ratio * k2.sqrt();
    let validity = ratio.norm_sqr() * k2;
    if validity > VALIDITY_WARN {
        warnings.push(format!(
            "displacement validity ratio {validity:.3} exceeds {VALIDITY_WARN}"
        ));
    }
    Ok(OptimalBeta {
        beta,
        validity,
        warnings,
    })
}

/// Ancilla `b0|0> + b1|1>` for which the PNRD scheme, conditioned on
/// `outcome`, outputs `c+ |phi_+> + c- |phi_->`.
///
/// The effective projection for `(0,2)` is `b0/2 <2| + b1/sqrt2 <1|`, giving
/// `b0/2 sqrt(P2) |Psi_2> + b1/sqrt2 sqrt(P1) |Psi_1>`; `(2,0)` flips the
/// sign of the `b1` term.
pub fn qubit_ancilla_coeffs(params: &SchemeParams, outcome: PnrdOutcome) -> Result<AncillaQubit> {
    let coeffs = decomposition_coeffs(params)?;
    if params.t >= 1.0 {
        return Err(Error::Domain("T = 1 reflects nothing".into()));
    }
    let (cp, cm) = params.normalized_target();
    let a2 = (cp + cm) * coeffs.c2;
    let a1 = (cp - cm) * coeffs.c1;
    if a1.norm() + a2.norm() <= SINGULAR_TARGET_REL {
        return Err(Error::SingularTarget {
            sum: (cp + cm).norm(),
        });
    }
    let b0 = a2 * 2.0 / p_m(params, 2).sqrt();
    let mut b1 = a1 * 2f64.sqrt() / p_m(params, 1).sqrt();
    if outcome == PnrdOutcome::TwoZero {
        b1 = -b1;
    }
    AncillaQubit::new(b0, b1)
}
