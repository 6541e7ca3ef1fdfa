use catsynth::acceptance::figure_panels;
use catsynth::fock::{FockSpace, FockState};
use catsynth::protocols::{run_onoff_optimal, CatTarget, Engine};
use catsynth::wigner::{
    fidelity_from_states, overlap_integral, wigner_from_gaussian_mixture, wigner_from_state,
    GridSpec,
};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[test]
fn refining_the_default_grid_barely_moves_the_norm() {
    let s = FockSpace::new(32);
    let spec = GridSpec::default();
    for panel in figure_panels() {
        let r = run_onoff_optimal(&panel.params(), panel.eta, panel.nu, Engine::Fock, &s).unwrap();
        let state = r.state.as_fock().unwrap();
        let coarse = wigner_from_state(state, &spec).unwrap();
        let fine = wigner_from_state(state, &spec.refined()).unwrap();
        assert!(
            (coarse.norm_estimate - fine.norm_estimate).abs() < 1e-4,
            "{}",
            panel.label
        );
        assert!((coarse.norm_estimate - 1.0).abs() < 1e-3);
    }
}

#[test]
fn phase_space_overlap_reproduces_panel_fidelity() {
    let s = FockSpace::new(32);
    let spec = GridSpec::default();
    for panel in figure_panels() {
        let r = run_onoff_optimal(&panel.params(), panel.eta, panel.nu, Engine::Fock, &s).unwrap();
        let target = r.target.fock(&s).unwrap();
        let w_out = wigner_from_state(r.state.as_fock().unwrap(), &spec).unwrap();
        let w_target = wigner_from_state(&FockState::Pure(target.clone()), &spec).unwrap();
        let via_grid = overlap_integral(&w_out, &w_target).unwrap();
        let direct = fidelity_from_states(r.state.as_fock().unwrap(), &target);
        assert!(
            (via_grid - direct).abs() < 1e-4,
            "{}: {via_grid} vs {direct}",
            panel.label
        );
        assert!((via_grid - panel.expected).abs() < panel.tolerance);
    }
}

#[test]
fn overlap_identity_for_cat_pairs() {
    let s = FockSpace::new(32);
    let spec = GridSpec::default();
    let a = CatTarget::new(0.95, C64::new(1.0, 0.0), C64::new(0.0, 1.0))
        .fock(&s)
        .unwrap();
    let b = CatTarget::with_phase(1.2, PI).fock(&s).unwrap();
    let wa = wigner_from_state(&FockState::Pure(a.clone()), &spec).unwrap();
    let wb = wigner_from_state(&FockState::Pure(b.clone()), &spec).unwrap();
    assert!((overlap_integral(&wa, &wb).unwrap() - a.fidelity(&b)).abs() < 1e-4);
    assert!((overlap_integral(&wa, &wa).unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn negativity_respects_the_lower_bound() {
    let s = FockSpace::new(32);
    let spec = GridSpec::default();
    let bound = -1.0 / (2.0 * PI) * (1.0 + 1e-6);
    for m in [1, 3, 5] {
        let w = wigner_from_state(&FockState::Pure(s.number_state(m).unwrap()), &spec).unwrap();
        assert!(w.min_value() >= bound);
    }
    let odd = CatTarget::with_phase(0.95, PI).fock(&s).unwrap();
    let w = wigner_from_state(&FockState::Pure(odd), &spec).unwrap();
    assert!(w.min_value() >= bound && w.min_value() < 0.0);
}

#[test]
fn engines_agree_pointwise_on_ideal_panels() {
    let s = FockSpace::new(32);
    let spec = GridSpec::square(5.0, 81);
    for panel in figure_panels() {
        let p = panel.params();
        let f = run_onoff_optimal(&p, 1.0, 0.0, Engine::Fock, &s).unwrap();
        let g = run_onoff_optimal(&p, 1.0, 0.0, Engine::Gaussian, &s).unwrap();
        let wf = wigner_from_state(f.state.as_fock().unwrap(), &spec).unwrap();
        let wg = wigner_from_gaussian_mixture(g.state.as_gaussian().unwrap(), &spec).unwrap();
        assert!(
            wf.max_abs_difference(&wg).unwrap() < 1e-6,
            "{}",
            panel.label
        );
    }
}
