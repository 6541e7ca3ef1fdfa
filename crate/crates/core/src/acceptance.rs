//! Regression criteria for the reproduced figures and engine properties.
//! Each criterion returns a pass flag and a one-line summary of the measured
//! values; both the `acceptance` test target and the `check` CLI subcommand
//! run this list.

use num_complex::Complex64 as C64;
use std::f64::consts::{PI, SQRT_2};

use crate::analytics::{
    decomposition_coeffs, fidelity_closed_form, lambda_t_for_alpha, optimal_beta, p_m,
    qubit_ancilla_coeffs, PnrdOutcome, SchemeParams,
};
use crate::error::{Error, Result};
use crate::fock::{DetectorModel, FockSpace, FockState, FockVector};
use crate::gaussian::{branch_probabilities, scheme_input_cf};
use crate::protocols::{
    amplify_pair, best_matching_amplitude, fock_branch_probabilities, photon_subtracted,
    photon_subtracted_all, plan_cascade, run_cascade, run_onoff_optimal, run_onoff_scheme,
    run_pnrd_scheme, AmplifierInput, CatTarget, Engine, HomodyneWindow, LeafSource,
};
use crate::wigner::{wigner_at, wigner_from_gaussian_mixture, wigner_from_state, GridSpec};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Detector efficiency and dark-count parameter of the realistic panels.
pub const REALISTIC_ETA: f64 = 0.1;
pub const REALISTIC_NU: f64 = 1e-7;

/// Depth-2 cascade from `alpha = 0.7` with a `0.1` window: frozen output of
/// the Fock brute-force run.
pub const CASCADE_FIXTURE_FIDELITY: f64 = 0.998987657129;
pub const CASCADE_FIXTURE_PROBABILITY: f64 = 7.468428170280e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// One figure panel: squeezing, transmittance, detectors, target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub label: &'static str,
    pub t: f64,
    pub eta: f64,
    pub nu: f64,
    pub c_plus: C64,
    pub c_minus: C64,
    pub expected: f64,
    pub tolerance: f64,
}

impl Panel {
    pub fn params(&self) -> SchemeParams {
        SchemeParams::new(0.3, self.t).with_target(self.c_plus, self.c_minus)
    }
}

pub fn figure_panels() -> [Panel; 4] {
    [
        Panel {
            label: "a",
            t: 0.999,
            eta: 1.0,
            nu: 0.0,
            c_plus: ONE,
            c_minus: C64::new(0.0, 1.0),
            expected: 0.993,
            tolerance: 0.002,
        },
        Panel {
            label: "b",
            t: 0.95,
            eta: REALISTIC_ETA,
            nu: REALISTIC_NU,
            c_plus: ONE,
            c_minus: C64::new(0.0, 1.0),
            expected: 0.952,
            tolerance: 0.005,
        },
        Panel {
            label: "c",
            t: 0.95,
            eta: REALISTIC_ETA,
            nu: REALISTIC_NU,
            c_plus: C64::new(3.0, 0.0),
            c_minus: -ONE,
            expected: 0.978,
            tolerance: 0.005,
        },
        Panel {
            label: "d",
            t: 0.95,
            eta: REALISTIC_ETA,
            nu: REALISTIC_NU,
            c_plus: ONE,
            c_minus: ZERO,
            expected: 0.994,
            tolerance: 0.005,
        },
    ]
}

type Check = fn() -> Result<(bool, String)>;

pub fn criteria() -> Vec<(u8, &'static str, Check)> {
    vec![
        (1, "on/off panel fidelities", panel_fidelities as Check),
        (2, "closed-form fidelity vs overlap oracle", fidelity_sweep),
        (
            3,
            "detection weights vs brute-force conditioning",
            detection_weights,
        ),
        (4, "POVM completeness and branch closure", closure),
        (5, "dual-engine equivalence", dual_engine),
        (6, "displacement near-optimality", beta_optimality),
        (7, "homodyne amplification", amplification),
        (8, "structural checks", structural),
    ]
}

pub fn run_criterion(id: u8, name: &'static str, check: Check) -> CriterionOutcome {
    let (passed, detail) = match check() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
    }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    criteria()
        .into_iter()
        .map(|(id, name, check)| run_criterion(id, name, check))
        .collect()
}

fn panel_fidelities() -> Result<(bool, String)> {
    let space = FockSpace::new(32);
    let mut ok = true;
    let mut parts = Vec::new();
    for panel in figure_panels() {
        let r = run_onoff_optimal(&panel.params(), panel.eta, panel.nu, Engine::Fock, &space)?;
        let pass = (r.fidelity_vs_target - panel.expected).abs() <= panel.tolerance;
        ok &= pass;
        parts.push(format!(
            "({}) {:.4} vs {}±{}",
            panel.label, r.fidelity_vs_target, panel.expected, panel.tolerance
        ));
    }
    // the same ideal-detector panel through the number-resolving route
    let p = figure_panels()[0].params();
    let ancilla = qubit_ancilla_coeffs(&p, PnrdOutcome::ZeroTwo)?;
    let pnrd = run_pnrd_scheme(&p, &ancilla, PnrdOutcome::ZeroTwo, &space)?;
    ok &= pnrd.fidelity_vs_target >= 0.99;
    parts.push(format!("pnrd(a) {:.4} >= 0.99", pnrd.fidelity_vs_target));
    Ok((ok, parts.join(", ")))
}

/// `|<alpha|phi_+>|^2` with `phi_+ = c2 Psi_2 + c1 Psi_1` assembled from
/// states conditioned in the number basis.
pub fn overlap_oracle(params: &SchemeParams, space: &FockSpace) -> Result<f64> {
    let mut psi = photon_subtracted_all(params.r, params.t, &[1, 2], space)?;
    let (psi2, _) = psi.pop().expect("two states");
    let (psi1, _) = psi.pop().expect("two states");
    overlap_from_branches(params, &psi1, &psi2, space)
}

/// Same overlap from already conditioned `|Psi_1>` and `|Psi_2>`.
pub fn overlap_from_branches(
    params: &SchemeParams,
    psi1: &FockVector,
    psi2: &FockVector,
    space: &FockSpace,
) -> Result<f64> {
    let d = decomposition_coeffs(params)?;
    let phi = FockVector::superpose(C64::new(d.c2, 0.0), psi2, C64::new(d.c1, 0.0), psi1);
    let coh = space.coherent(C64::new(d.alpha, 0.0))?;
    Ok(coh.inner(&phi).norm_sqr())
}

fn fidelity_sweep() -> Result<(bool, String)> {
    let space = FockSpace::new(64);
    let t = 0.95;
    let mut worst: f64 = 0.0;
    let mut min_below_one = f64::INFINITY;
    for i in 1..=50 {
        let alpha = 1.6 * i as f64 / 50.0;
        let r = (lambda_t_for_alpha(alpha) / t).atanh();
        let p = SchemeParams::new(r, t);
        let oracle = overlap_oracle(&p, &space)?;
        worst = worst.max((oracle - fidelity_closed_form(&p)).abs());
        if alpha < 1.0 {
            min_below_one = min_below_one.min(oracle);
        }
    }
    Ok((
        worst < 1e-8 && min_below_one > 0.99,
        format!("max |closed - oracle| = {worst:.2e} (< 1e-8), min F for alpha<1 = {min_below_one:.5} (> 0.99)"),
    ))
}

pub const ORACLE_GRID: [(f64, f64); 9] = [
    (0.1, 0.9),
    (0.1, 0.95),
    (0.1, 0.999),
    (0.3, 0.9),
    (0.3, 0.95),
    (0.3, 0.999),
    (0.6, 0.9),
    (0.6, 0.95),
    (0.6, 0.999),
];

fn detection_weights() -> Result<(bool, String)> {
    let space = FockSpace::new(48);
    let mut worst: f64 = 0.0;
    for (r, t) in ORACLE_GRID {
        let p = SchemeParams::new(r, t);
        for m in 0..=3 {
            let (_, brute) = photon_subtracted(r, t, m, &space)?;
            worst = worst.max((brute - p_m(&p, m)).abs());
        }
    }
    Ok((
        worst < 1e-9,
        format!("max |closed - brute| = {worst:.2e} (< 1e-9) over 9 points, m <= 3"),
    ))
}

fn closure() -> Result<(bool, String)> {
    let space = FockSpace::new(32);
    let detectors = [
        DetectorModel::ideal(),
        DetectorModel::new(0.1, 1e-7, ZERO)?,
        DetectorModel::new(0.1, 1e-7, C64::new(0.15, -0.1))?,
        DetectorModel::new(0.6, 0.05, C64::new(-0.4, 0.3))?,
        DetectorModel::ideal().with_displacement(C64::new(1.2, 0.0)),
    ];
    let mut povm_defect: f64 = 0.0;
    for det in &detectors {
        let (off, on) = space.povm_onoff(det);
        let sum = off.plus(&on);
        povm_defect = povm_defect.max(
            (sum.entries() - space.identity().entries())
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max),
        );
    }
    let space = FockSpace::new(48);
    let mut branch_defect: f64 = 0.0;
    let mut engine_gap: f64 = 0.0;
    for (r, t) in [(0.3, 0.95), (0.6, 0.9), (0.1, 0.999)] {
        let input = scheme_input_cf(r, t)?;
        for (eta, nu) in [(1.0, 0.0), (0.1, 1e-7), (0.5, 0.01)] {
            for beta in [ZERO, C64::new(0.2, 0.1), C64::new(-1.0, 0.5)] {
                let det_b = DetectorModel::new(eta, nu, ZERO)?;
                let det_c = DetectorModel::new(eta, nu, beta)?;
                let p = branch_probabilities(&input, &det_b, &det_c)?;
                let q = fock_branch_probabilities(r, t, &det_b, &det_c, &space)?;
                for (pi, qi) in p.iter().flatten().zip(q.iter().flatten()) {
                    engine_gap = engine_gap.max((pi - qi).abs());
                }
                for probs in [p, q] {
                    let total: f64 = probs.iter().flatten().sum();
                    branch_defect = branch_defect.max((total - 1.0).abs());
                }
            }
        }
    }
    Ok((
        povm_defect < 1e-12 && branch_defect < 1e-9 && engine_gap < 1e-9,
        format!("max |off + on - I| = {povm_defect:.2e} (< 1e-12), max |sum p - 1| = {branch_defect:.2e} (< 1e-9), max Fock/Gaussian branch gap = {engine_gap:.2e} (< 1e-9)"),
    ))
}

fn dual_engine() -> Result<(bool, String)> {
    let space = FockSpace::new(32);
    let spec = GridSpec::square(5.0, 81);
    let mut wigner_diff: f64 = 0.0;
    for panel in figure_panels() {
        let p = panel.params();
        let f = run_onoff_optimal(&p, 1.0, 0.0, Engine::Fock, &space)?;
        let g = run_onoff_optimal(&p, 1.0, 0.0, Engine::Gaussian, &space)?;
        let wf = wigner_from_state(f.state.as_fock().expect("fock output"), &spec)?;
        let wg =
            wigner_from_gaussian_mixture(g.state.as_gaussian().expect("gaussian output"), &spec)?;
        wigner_diff = wigner_diff.max(wf.max_abs_difference(&wg)?);
    }
    let mut fid_diff: f64 = 0.0;
    for panel in &figure_panels()[1..] {
        let p = panel.params();
        let f = run_onoff_optimal(&p, panel.eta, panel.nu, Engine::Fock, &space)?;
        let g = run_onoff_optimal(&p, panel.eta, panel.nu, Engine::Gaussian, &space)?;
        fid_diff = fid_diff.max((f.fidelity_vs_target - g.fidelity_vs_target).abs());
    }
    Ok((
        wigner_diff < 1e-6 && fid_diff < 1e-4,
        format!("ideal Wigner max diff = {wigner_diff:.2e} (< 1e-6), imperfect fidelity max diff = {fid_diff:.2e} (< 1e-4)"),
    ))
}

fn beta_optimality() -> Result<(bool, String)> {
    let space = FockSpace::new(32);
    let panel = figure_panels()[1];
    let p = panel.params();
    let beta = optimal_beta(&p)?.beta;
    let det_b = DetectorModel::new(panel.eta, panel.nu, ZERO)?;
    let fid = |scale: f64| -> Result<f64> {
        let b = beta * scale;
        let det_c = DetectorModel::new(panel.eta, panel.nu, b)?;
        Ok(
            run_onoff_scheme(&p.with_beta(b), &det_b, &det_c, Engine::Gaussian, &space)?
                .fidelity_vs_target,
        )
    };
    let base = fid(1.0)?;
    let mut max_gain = f64::NEG_INFINITY;
    for k in 0..=8 {
        let scale = 0.8 + 0.05 * k as f64;
        max_gain = max_gain.max(fid(scale)? - base);
    }
    let singular = matches!(
        optimal_beta(&p.with_target(ONE, -ONE)),
        Err(Error::SingularTarget { .. })
    );
    Ok((
        max_gain <= 0.002 && singular,
        format!("max gain over ±20% = {max_gain:.2e} (<= 0.002), c+ = -c- singular: {singular}"),
    ))
}

fn amplification() -> Result<(bool, String)> {
    let space = FockSpace::new(40);
    let alpha = 0.95;
    let input = |phase: f64| -> Result<AmplifierInput> {
        Ok(AmplifierInput {
            state: FockState::Pure(CatTarget::with_phase(alpha, phase).fock(&space)?),
            alpha,
            phase,
        })
    };
    let (pair, _) = amplify_pair(
        &input(0.0)?,
        &input(PI)?,
        &HomodyneWindow::new(0.0, 0.05)?,
        &space,
    )?;
    let f_pair = pair.fidelity_vs_target;

    let tree = plan_cascade(2.0 * 0.7, 0.0, 0.7)?;
    let rep = run_cascade(
        &tree,
        &HomodyneWindow::new(0.0, 0.1)?,
        LeafSource::ExactCat,
        &space,
    )?;
    let (amp, _) = best_matching_amplitude(
        rep.result.state.as_fock().expect("fock output"),
        0.0,
        0.7,
        2.1,
        &space,
    )?;
    let doubled = (amp / 0.7 - 2.0).abs() < 0.01;
    let fixture = (rep.result.fidelity_vs_target - CASCADE_FIXTURE_FIDELITY).abs() < 1e-8
        && ((rep.total_success_probability - CASCADE_FIXTURE_PROBABILITY)
            / CASCADE_FIXTURE_PROBABILITY)
            .abs()
            < 1e-6;

    let deep = plan_cascade(2.0 * SQRT_2 * 0.5, PI, 0.5)?;
    deep.validate()?;
    let root = deep.phase_from_leaves();
    let bookkeeping = deep.leaves().len() == 8 && ((root - PI).abs() < 1e-12);

    Ok((
        f_pair > 0.999 && doubled && fixture && bookkeeping,
        format!(
            "pair F = {f_pair:.5} (> 0.999), two-stage amplitude ratio = {:.4} (2 ± 0.01), fixture match: {fixture}, depth-3 leaves = {} root phase = {root:.6}",
            amp / 0.7,
            deep.leaves().len()
        ),
    ))
}

fn structural() -> Result<(bool, String)> {
    let space = FockSpace::new(32);
    let odd = space.parity_cat(C64::new(0.95, 0.0), false)?.to_density();
    let w0 = wigner_at(&odd, 0.0, 0.0);

    let spec = GridSpec::default();
    let mut worst_norm: f64 = 0.0;
    let vac = wigner_from_state(&FockState::Pure(space.vacuum()), &spec)?;
    worst_norm = worst_norm.max((vac.norm_estimate - 1.0).abs());
    for panel in figure_panels() {
        let r = run_onoff_optimal(&panel.params(), panel.eta, panel.nu, Engine::Fock, &space)?;
        let g = wigner_from_state(r.state.as_fock().expect("fock output"), &spec)?;
        worst_norm = worst_norm.max((g.norm_estimate - 1.0).abs());
    }

    let run = || -> Result<(String, String)> {
        let panel = figure_panels()[1];
        let r = run_onoff_optimal(&panel.params(), panel.eta, panel.nu, Engine::Fock, &space)?;
        let csv = wigner_from_state(
            r.state.as_fock().expect("fock output"),
            &GridSpec::square(5.0, 41),
        )?
        .to_csv_string();
        let fid = format!(
            "{:.17e} {:.17e}",
            r.fidelity_vs_target, r.success_probability
        );
        Ok((csv, fid))
    };
    let deterministic = run()? == run()?;

    Ok((
        w0 < 0.0 && worst_norm <= 1e-3 && deterministic,
        format!("odd cat W(0,0) = {w0:.5} (< 0), max |norm - 1| = {worst_norm:.2e} (<= 1e-3), identical reruns: {deterministic}"),
    ))
}
