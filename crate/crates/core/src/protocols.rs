//! End-to-end scheme runs: photon subtraction with a number-resolving
//! detector, the qubit-ancilla PNRD scheme, the on/off scheme with a
//! displaced detector (both engines), and homodyne-conditioned
//! amplification with its cascade.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use crate::analytics::{
    alpha_of, lambda_t_for_alpha, optimal_beta, AncillaQubit, PnrdOutcome, SchemeParams,
};
use crate::error::{Error, Result};
use crate::fock::{
    BeamSplitter, DetectorModel, FockOperator, FockSpace, FockState, FockVector, Mode,
    TwoModeState, DEFAULT_PROBABILITY_FLOOR,
};
use crate::gaussian::{conditional_output_cf, scheme_input_cf, GaussianMixture};
use crate::numerics::{gauss_legendre, quadrature_wavefunctions};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const TAU: f64 = 2.0 * PI;
/// Relative eigenvalue cutoff when splitting mixed inputs into pure parts.
const COMPONENT_CUTOFF: f64 = 1e-14;
const TAIL_WARN: f64 = 1e-10;
const PHASE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Fock,
    Gaussian,
}

/// `(c_plus |alpha> + c_minus |-alpha>) / N` with real `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatTarget {
    pub alpha: f64,
    pub c_plus: C64,
    pub c_minus: C64,
}

impl CatTarget {
    pub fn new(alpha: f64, c_plus: C64, c_minus: C64) -> Self {
        Self {
            alpha,
            c_plus,
            c_minus,
        }
    }

    /// `|alpha> + e^{i phase} |-alpha>`.
    pub fn with_phase(alpha: f64, phase: f64) -> Self {
        Self::new(alpha, ONE, C64::from_polar(1.0, phase))
    }

    pub fn fock(&self, space: &FockSpace) -> Result<FockVector> {
        space.cat(C64::new(self.alpha, 0.0), self.c_plus, self.c_minus)
    }

    pub fn gaussian(&self) -> Result<GaussianMixture> {
        GaussianMixture::cat(C64::new(self.alpha, 0.0), self.c_plus, self.c_minus)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", content = "data", rename_all = "snake_case")]
pub enum OutputState {
    Fock(FockState),
    Gaussian(GaussianMixture),
}

impl OutputState {
    /// `<target|rho|target>`.
    pub fn fidelity_with(&self, target: &CatTarget, space: &FockSpace) -> Result<f64> {
        match self {
            OutputState::Fock(s) => {
                let t = target.fock(&FockSpace {
                    dim: s.dim(),
                    ..*space
                })?;
                Ok(s.fidelity_with(&t))
            }
            OutputState::Gaussian(mix) => Ok(mix.pair(&target.gaussian()?)?.re),
        }
    }

    pub fn as_fock(&self) -> Option<&FockState> {
        match self {
            OutputState::Fock(s) => Some(s),
            OutputState::Gaussian(_) => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianMixture> {
        match self {
            OutputState::Gaussian(m) => Some(m),
            OutputState::Fock(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub state: OutputState,
    pub success_probability: f64,
    pub fidelity_vs_target: f64,
    pub target: CatTarget,
    pub engine: Engine,
    pub warnings: Vec<String>,
}

fn tail_warnings(tail: f64, warnings: &mut Vec<String>) {
    if tail > TAIL_WARN {
        warnings.push(format!("truncation discarded probability mass {tail:.3e}"));
    }
}

fn check_dim(space: &FockSpace, min: usize) -> Result<()> {
    if space.dim < min {
        return Err(Error::InvalidParameter(format!(
            "Fock dimension {} below the minimum {min}",
            space.dim
        )));
    }
    Ok(())
}

/// State after the tapping splitter: squeezed vacuum on A, vacuum on B.
fn tapped_squeezed_vacuum(r: f64, t: f64, space: &FockSpace) -> Result<TwoModeState> {
    let sv = space.squeezed_vacuum(r)?;
    TwoModeState::product(&sv, &space.vacuum()).beamsplitter(t)
}

/// Probabilities of the four on/off outcome pairs `[b][c]` (index 0 = off,
/// 1 = on), computed in the number basis.
pub fn fock_branch_probabilities(
    r: f64,
    t: f64,
    det_b: &DetectorModel,
    det_c: &DetectorModel,
    space: &FockSpace,
) -> Result<[[f64; 2]; 2]> {
    check_dim(space, 3)?;
    let joint = tapped_squeezed_vacuum(r, t, space)?;
    let (off_b, on_b) = space.povm_onoff(det_b);
    let (off_c, on_c) = space.povm_onoff(det_c);
    let bs = BeamSplitter::new(0.5, 2 * space.dim)?;
    let b = [&off_b, &on_b];
    let c = [&off_c, &on_c];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let effective = bs.effective_povm(&space.vacuum(), b[i], c[j]);
            out[i][j] = joint.condition_on_outcome(Mode::B, &effective)?.1;
        }
    }
    Ok(out)
}

/// `|Psi_m>` (canonical phase) and its probability, by projecting the
/// reflected mode onto `|m>`.
pub fn photon_subtracted(r: f64, t: f64, m: usize, space: &FockSpace) -> Result<(FockVector, f64)> {
    Ok(photon_subtracted_all(r, t, &[m], space)?.remove(0))
}

/// [`photon_subtracted`] for several photon numbers from one joint state.
pub fn photon_subtracted_all(
    r: f64,
    t: f64,
    ms: &[usize],
    space: &FockSpace,
) -> Result<Vec<(FockVector, f64)>> {
    if let Some(&m) = ms.iter().find(|&&m| m >= space.dim) {
        return Err(Error::InvalidParameter(format!(
            "photon number {m} outside dimension {}",
            space.dim
        )));
    }
    let joint = tapped_squeezed_vacuum(r, t, space)?;
    ms.iter()
        .map(|&m| {
            let (v, p) = joint.project(Mode::B, &space.number_state(m)?)?;
            Ok((v.with_canonical_phase(), p))
        })
        .collect()
}

/// Single number-resolving detector on the reflected beam, outcome `m`.
pub fn run_daokw(r: f64, t: f64, m: usize, space: &FockSpace) -> Result<GenerationResult> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "photon number must be at least 1".into(),
        ));
    }
    let params = SchemeParams::new(r, t);
    params.validate()?;
    let (psi, p) = photon_subtracted(r, t, m, space)?;
    let sign = if m.is_multiple_of(2) { ONE } else { -ONE };
    let target = CatTarget::new(alpha_of(params.lambda_t()), ONE, sign);
    let fidelity = psi.fidelity(&target.fock(space)?);
    let mut warnings = Vec::new();
    tail_warnings(psi.tail_mass(), &mut warnings);
    Ok(GenerationResult {
        state: OutputState::Fock(FockState::Pure(psi)),
        success_probability: p,
        fidelity_vs_target: fidelity,
        target,
        engine: Engine::Fock,
        warnings,
    })
}

/// Reflected beam mixed with `b0|0> + b1|1>` on a balanced splitter, both
/// outputs counted; success on `outcome`.
pub fn run_pnrd_scheme(
    params: &SchemeParams,
    ancilla: &AncillaQubit,
    outcome: PnrdOutcome,
    space: &FockSpace,
) -> Result<GenerationResult> {
    params.validate()?;
    check_dim(space, 3)?;
    let joint = tapped_squeezed_vacuum(params.r, params.t, space)?;
    let bs = BeamSplitter::new(0.5, 2 * space.dim)?;
    let (k1, k2) = outcome.counts();
    let kappa = bs.effective_projection(
        &ancilla.to_fock(space.dim),
        &FockVector::basis(k1, space.dim),
        &FockVector::basis(k2, space.dim),
    );
    let (out, p) = joint.project(Mode::B, &kappa)?;
    let p = p * kappa.norm_sqr();
    let out = out.with_canonical_phase();
    let (cp, cm) = params.normalized_target();
    let target = CatTarget::new(alpha_of(params.lambda_t()), cp, cm);
    let fidelity = out.fidelity(&target.fock(space)?);
    let mut warnings = Vec::new();
    tail_warnings(out.tail_mass(), &mut warnings);
    Ok(GenerationResult {
        state: OutputState::Fock(FockState::Pure(out)),
        success_probability: p,
        fidelity_vs_target: fidelity,
        target,
        engine: Engine::Fock,
        warnings,
    })
}

/// On/off scheme: reflected beam split on a balanced splitter, one output
/// detected directly (B), the other after `D(beta)` (C); success when both
/// click.
pub fn run_onoff_scheme(
    params: &SchemeParams,
    det_b: &DetectorModel,
    det_c: &DetectorModel,
    engine: Engine,
    space: &FockSpace,
) -> Result<GenerationResult> {
    params.validate()?;
    det_b.validate()?;
    det_c.validate()?;
    if (det_c.displacement - params.beta).norm() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "detector C displacement {} differs from scheme beta {}",
            det_c.displacement, params.beta
        )));
    }
    if det_b.displacement != ZERO {
        return Err(Error::InvalidParameter(
            "detector B is undisplaced in this scheme".into(),
        ));
    }
    let (cp, cm) = params.normalized_target();
    let target = CatTarget::new(alpha_of(params.lambda_t()), cp, cm);
    let mut warnings = Vec::new();
    let (state, p) = match engine {
        Engine::Fock => {
            check_dim(space, 3)?;
            let joint = tapped_squeezed_vacuum(params.r, params.t, space)?;
            let (_, on_b) = space.povm_onoff(det_b);
            let (_, on_c) = space.povm_onoff(det_c);
            let bs = BeamSplitter::new(0.5, 2 * space.dim)?;
            let effective = bs.effective_povm(&space.vacuum(), &on_b, &on_c);
            let (rho, p) = joint.condition_on_outcome(Mode::B, &effective)?;
            tail_warnings(joint.tail_mass(), &mut warnings);
            (OutputState::Fock(FockState::Mixed(rho)), p)
        }
        Engine::Gaussian => {
            let input = scheme_input_cf(params.r, params.t)?;
            let (mix, p) = conditional_output_cf(&input, det_b, det_c)?;
            (OutputState::Gaussian(mix), p)
        }
    };
    let fidelity = state.fidelity_with(&target, space)?;
    Ok(GenerationResult {
        state,
        success_probability: p,
        fidelity_vs_target: fidelity,
        target,
        engine,
        warnings,
    })
}

/// On/off scheme with the displacement chosen by [`optimal_beta`] and both
/// detectors sharing efficiency `eta` and dark-count parameter `nu`.
pub fn run_onoff_optimal(
    params: &SchemeParams,
    eta: f64,
    nu: f64,
    engine: Engine,
    space: &FockSpace,
) -> Result<GenerationResult> {
    let opt = optimal_beta(params)?;
    let params = params.with_beta(opt.beta);
    let det_b = DetectorModel::new(eta, nu, ZERO)?;
    let det_c = DetectorModel::new(eta, nu, opt.beta)?;
    let mut result = run_onoff_scheme(&params, &det_b, &det_c, engine, space)?;
    result.warnings.extend(opt.warnings);
    Ok(result)
}

/// Acceptance window `[x0 - epsilon, x0 + epsilon]` for the `x` quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneWindow {
    pub x0: f64,
    pub epsilon: f64,
}

impl HomodyneWindow {
    pub fn new(x0: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "homodyne window x0 = {x0}, epsilon = {epsilon}"
            )));
        }
        Ok(Self { x0, epsilon })
    }
}

impl Default for HomodyneWindow {
    fn default() -> Self {
        Self {
            x0: 0.0,
            epsilon: 0.05,
        }
    }
}

/// `E = int_{window} |x><x| dx` in the number basis.
pub fn window_povm(window: &HomodyneWindow, dim: usize) -> FockOperator {
    let (a, b) = (window.x0 - window.epsilon, window.x0 + window.epsilon);
    let panels = ((b - a) / 0.1).ceil().max(1.0) as usize;
    let order = 24 + dim / 2;
    let width = (b - a) / panels as f64;
    let mut e = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..panels {
        let lo = a + k as f64 * width;
        for (x, w) in gauss_legendre(order, lo, lo + width) {
            let psi = quadrature_wavefunctions(dim, x);
            for m in 0..dim {
                let wm = w * psi[m];
                for n in m..dim {
                    e[(m, n)] += wm * psi[n];
                }
            }
        }
    }
    for m in 0..dim {
        for n in 0..m {
            e[(m, n)] = e[(n, m)];
        }
    }
    FockOperator::hermitian(e.map(|v| C64::new(v, 0.0)))
}

/// One amplifier input: a state approximating `|alpha> + e^{i phase}|-alpha>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifierInput {
    pub state: FockState,
    pub alpha: f64,
    pub phase: f64,
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if TAU - w < 1e-12 {
        0.0
    } else {
        w
    }
}

fn phase_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

/// Interferes two cat-like states on an inverse balanced splitter, measures
/// the `x` quadrature of the second output inside `window` and keeps the
/// first. Inputs with phases `phi_1 + phi_2 = pi` give
/// `|sqrt2 alpha> + e^{i(phi_1 - phi_2)} |-sqrt2 alpha>` as `epsilon -> 0`.
pub fn amplify_pair(
    left: &AmplifierInput,
    right: &AmplifierInput,
    window: &HomodyneWindow,
    space: &FockSpace,
) -> Result<(GenerationResult, AmplifierInput)> {
    check_dim(space, 2)?;
    let mut warnings = Vec::new();
    if phase_distance(left.phase + right.phase, PI) > PHASE_TOL {
        warnings.push(format!(
            "input phases {:.6} + {:.6} differ from pi; output is not an amplified cat",
            left.phase, right.phase
        ));
    }
    if (left.alpha - right.alpha).abs() > 1e-9 * left.alpha.max(right.alpha).max(1.0) {
        warnings.push(format!(
            "unequal input amplitudes {} and {}",
            left.alpha, right.alpha
        ));
    }
    let dim = space.dim;
    let lc = FockState::pure_components(&resize_state(&left.state, dim), COMPONENT_CUTOFF);
    let rc = FockState::pure_components(&resize_state(&right.state, dim), COMPONENT_CUTOFF);
    let bs = BeamSplitter::from_angle(-FRAC_PI_4, 2 * dim);
    let e = window_povm(window, dim);
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    let mut dropped = 0.0;
    for (wl, vl) in &lc {
        for (wr, vr) in &rc {
            let out = bs.apply(&TwoModeState::product(vl, vr));
            dropped += wl * wr * out.tail_mass();
            let part = out.partial_apply(Mode::B, &e)?;
            rho += part.entries() * C64::new(wl * wr, 0.0);
        }
    }
    let rho = FockOperator::hermitian(rho);
    let p = rho.trace().re;
    if !(p > DEFAULT_PROBABILITY_FLOOR) {
        return Err(Error::ZeroProbability {
            probability: p,
            floor: DEFAULT_PROBABILITY_FLOOR,
        });
    }
    let rho = rho.scaled(1.0 / p);
    tail_warnings(dropped, &mut warnings);
    let alpha = (left.alpha + right.alpha) / SQRT_2;
    let phase = wrap_phase(left.phase - right.phase);
    let target = CatTarget::with_phase(alpha, phase);
    let state = FockState::Mixed(rho);
    let fidelity = if alpha == 0.0 {
        state.fidelity_with(&space.vacuum())
    } else {
        state.fidelity_with(&target.fock(space)?)
    };
    let next = AmplifierInput {
        state: state.clone(),
        alpha,
        phase,
    };
    Ok((
        GenerationResult {
            state: OutputState::Fock(state),
            success_probability: p,
            fidelity_vs_target: fidelity,
            target,
            engine: Engine::Fock,
            warnings,
        },
        next,
    ))
}

fn resize_state(s: &FockState, dim: usize) -> FockState {
    match s {
        FockState::Pure(v) => FockState::Pure(v.resized(dim)),
        FockState::Mixed(rho) => FockState::Mixed(rho.resized(dim)),
    }
}

/// Amplitude in `[lo, hi]` whose cat `|a> + e^{i phase}|-a>` best matches
/// `state`, by golden-section search; returns `(amplitude, fidelity)`.
pub fn best_matching_amplitude(
    state: &FockState,
    phase: f64,
    lo: f64,
    hi: f64,
    space: &FockSpace,
) -> Result<(f64, f64)> {
    let f = |a: f64| -> Result<f64> {
        Ok(state.fidelity_with(&CatTarget::with_phase(a, phase).fock(space)?))
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Node of an amplification tree: a cat with `phase` and `amplitude`,
/// produced from its two children (or prepared directly at a leaf).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeNode {
    pub phase: f64,
    pub amplitude: f64,
    pub children: Vec<CascadeNode>,
}

impl CascadeNode {
    pub fn leaf(phase: f64, amplitude: f64) -> Self {
        Self {
            phase: wrap_phase(phase),
            amplitude,
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn leaves(&self) -> Vec<&CascadeNode> {
        if self.is_leaf() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    /// Phase obtained by applying `phi_1 - phi_2` bottom-up from the leaves.
    pub fn phase_from_leaves(&self) -> f64 {
        match self.children.as_slice() {
            [] => self.phase,
            [a, b] => wrap_phase(a.phase_from_leaves() - b.phase_from_leaves()),
            _ => f64::NAN,
        }
    }

    /// Checks child count, the `phi_1 + phi_2 = pi` rule, output phase and
    /// amplitude bookkeeping at every internal node.
    pub fn validate(&self) -> Result<()> {
        match self.children.as_slice() {
            [] => Ok(()),
            [a, b] => {
                if phase_distance(a.phase + b.phase, PI) > PHASE_TOL {
                    return Err(Error::InfeasibleCascade(format!(
                        "child phases {} + {} != pi",
                        a.phase, b.phase
                    )));
                }
                if phase_distance(a.phase - b.phase, self.phase) > PHASE_TOL {
                    return Err(Error::InfeasibleCascade(format!(
                        "node phase {} != {} - {}",
                        self.phase, a.phase, b.phase
                    )));
                }
                let amp = a.amplitude.hypot(b.amplitude);
                if (amp - self.amplitude).abs() > 1e-9 * amp.max(1.0) {
                    return Err(Error::InfeasibleCascade(format!(
                        "node amplitude {} != {amp}",
                        self.amplitude
                    )));
                }
                a.validate()?;
                b.validate()
            }
            other => Err(Error::InfeasibleCascade(format!(
                "node with {} children",
                other.len()
            ))),
        }
    }
}

/// Full binary tree reaching `target_amplitude` with `target_phase` from
/// leaves of `base_amplitude`.
pub fn plan_cascade(
    target_amplitude: f64,
    target_phase: f64,
    base_amplitude: f64,
) -> Result<CascadeNode> {
    if !(base_amplitude > 0.0 && target_amplitude > 0.0) {
        return Err(Error::InfeasibleCascade(format!(
            "amplitudes must be positive (target {target_amplitude}, base {base_amplitude})"
        )));
    }
    let ratio = target_amplitude / base_amplitude;
    let k = (2.0 * ratio.log2()).round();
    if k < 1.0 || (ratio - 2f64.powf(k / 2.0)).abs() > 1e-9 * ratio {
        return Err(Error::InfeasibleCascade(format!(
            "amplitude ratio {ratio} is not sqrt(2)^k for an integer k >= 1"
        )));
    }
    Ok(build_tree(
        k as usize,
        wrap_phase(target_phase),
        base_amplitude,
    ))
}

fn build_tree(depth: usize, phase: f64, base: f64) -> CascadeNode {
    let amplitude = base * 2f64.powf(depth as f64 / 2.0);
    if depth == 0 {
        return CascadeNode::leaf(phase, amplitude);
    }
    let left = wrap_phase((PI + phase) / 2.0);
    let right = wrap_phase((PI - phase) / 2.0);
    CascadeNode {
        phase,
        amplitude,
        children: vec![
            build_tree(depth - 1, left, base),
            build_tree(depth - 1, right, base),
        ],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSource {
    /// Exact `|alpha> + e^{i phi}|-alpha>`.
    ExactCat,
    /// `S(r)|1>` for odd leaves (`phi = pi`), exact cats elsewhere.
    SqueezedPhoton,
}

/// Normalized `S(r)|1>`, proportional to `a S(r)|0>`, with `r` chosen so the
/// quasi-coherent amplitude at unit transmittance is `alpha`.
pub fn squeezed_photon(alpha: f64, space: &FockSpace) -> Result<FockVector> {
    let r = lambda_t_for_alpha(alpha).atanh();
    let big = FockSpace {
        dim: space.dim + 1,
        ..*space
    };
    let sv = big.squeezed_vacuum(r)?;
    let amps: Vec<C64> = (0..space.dim)
        .map(|n| sv.amps()[n + 1] * ((n + 1) as f64).sqrt())
        .collect();
    Ok(FockVector::from_amps(amps)
        .with_tail_mass(sv.tail_mass())
        .normalized()?
        .with_canonical_phase())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// Distance from the root (root = 0).
    pub depth: usize,
    pub amplitude: f64,
    pub phase: f64,
    pub success_probability: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub result: GenerationResult,
    /// Internal nodes in post-order.
    pub stages: Vec<StageReport>,
    /// Product of every stage's success probability.
    pub total_success_probability: f64,
}

pub fn run_cascade(
    tree: &CascadeNode,
    window: &HomodyneWindow,
    source: LeafSource,
    space: &FockSpace,
) -> Result<CascadeReport> {
    tree.validate()?;
    if tree.is_leaf() {
        return Err(Error::InfeasibleCascade(
            "tree has no amplification stage".into(),
        ));
    }
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let (result, _) = run_node(tree, 0, window, source, space, &mut stages, &mut warnings)?;
    let mut result = result.ok_or_else(|| Error::InfeasibleCascade("empty cascade".into()))?;
    let total = stages.iter().map(|s| s.success_probability).product();
    warnings.append(&mut result.warnings);
    warnings.dedup();
    result.warnings = warnings;
    Ok(CascadeReport {
        result,
        stages,
        total_success_probability: total,
    })
}

type NodeOutput = (Option<GenerationResult>, AmplifierInput);

fn run_node(
    node: &CascadeNode,
    depth: usize,
    window: &HomodyneWindow,
    source: LeafSource,
    space: &FockSpace,
    stages: &mut Vec<StageReport>,
    warnings: &mut Vec<String>,
) -> Result<NodeOutput> {
    if node.is_leaf() {
        let odd = phase_distance(node.phase, PI) < PHASE_TOL;
        let state = match source {
            LeafSource::SqueezedPhoton if odd => squeezed_photon(node.amplitude, space)?,
            LeafSource::SqueezedPhoton => {
                let msg = "leaves with phase other than pi use exact cats".to_string();
                if !warnings.contains(&msg) {
                    warnings.push(msg);
                }
                CatTarget::with_phase(node.amplitude, node.phase).fock(space)?
            }
            LeafSource::ExactCat => {
                CatTarget::with_phase(node.amplitude, node.phase).fock(space)?
            }
        };
        return Ok((
            None,
            AmplifierInput {
                state: FockState::Pure(state),
                alpha: node.amplitude,
                phase: node.phase,
            },
        ));
    }
    let (_, left) = run_node(
        &node.children[0],
        depth + 1,
        window,
        source,
        space,
        stages,
        warnings,
    )?;
    let (_, right) = run_node(
        &node.children[1],
        depth + 1,
        window,
        source,
        space,
        stages,
        warnings,
    )?;
    let (result, out) = amplify_pair(&left, &right, window, space)?;
    stages.push(StageReport {
        depth,
        amplitude: out.alpha,
        phase: out.phase,
        success_probability: result.success_probability,
        fidelity: result.fidelity_vs_target,
    });
    Ok((Some(result), out))
}
