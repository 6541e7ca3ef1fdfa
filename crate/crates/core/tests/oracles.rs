use catsynth::acceptance::{overlap_oracle, ORACLE_GRID};
use catsynth::analytics::{
    decomposition_coeffs, fidelity_closed_form, p_m, phi_pm_state, SchemeParams, Sign,
};
use catsynth::fock::{FockSpace, FockVector};
use catsynth::protocols::photon_subtracted;
use num_complex::Complex64 as C64;

fn space() -> FockSpace {
    FockSpace::new(48)
}

#[test]
fn decomposition_weights_match_projections_onto_conditioned_states() {
    let s = space();
    for (r, t) in ORACLE_GRID {
        let p = SchemeParams::new(r, t);
        let d = decomposition_coeffs(&p).unwrap();
        let phi = phi_pm_state(&p, Sign::Plus, &s).unwrap();
        let (psi1, _) = photon_subtracted(r, t, 1, &s).unwrap();
        let (psi2, _) = photon_subtracted(r, t, 2, &s).unwrap();
        assert!(
            (psi1.inner(&phi).norm() - d.c1).abs() < 1e-8,
            "c1 at ({r}, {t})"
        );
        assert!(
            (psi2.inner(&phi).norm() - d.c2).abs() < 1e-8,
            "c2 at ({r}, {t})"
        );
    }
}

#[test]
fn quasi_coherent_states_are_weighted_branch_sums() {
    let s = space();
    for (r, t) in ORACLE_GRID {
        let p = SchemeParams::new(r, t);
        let d = decomposition_coeffs(&p).unwrap();
        let (psi1, _) = photon_subtracted(r, t, 1, &s).unwrap();
        let (psi2, _) = photon_subtracted(r, t, 2, &s).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let phi = phi_pm_state(&p, sign, &s).unwrap();
            let sum = FockVector::superpose(
                C64::new(d.c2, 0.0),
                &psi2,
                C64::new(sign.value() * d.c1, 0.0),
                &psi1,
            );
            let f = phi.fidelity(&sum);
            assert!(f > 1.0 - 1e-8, "({r}, {t}) {sign:?}: {f}");
        }
    }
}

#[test]
fn closed_form_fidelity_matches_overlap_on_grid() {
    let s = space();
    for (r, t) in ORACLE_GRID {
        let p = SchemeParams::new(r, t);
        let oracle = overlap_oracle(&p, &s).unwrap();
        assert!(
            (oracle - fidelity_closed_form(&p)).abs() < 1e-8,
            "({r}, {t})"
        );
    }
}

#[test]
fn closed_form_fidelity_matches_series_overlap_at_high_transmittance() {
    let s = space();
    let p = SchemeParams::new(0.3, 0.999);
    let d = decomposition_coeffs(&p).unwrap();
    let phi = phi_pm_state(&p, Sign::Plus, &s).unwrap();
    let coh = s.coherent(C64::new(d.alpha, 0.0)).unwrap();
    let overlap = coh.inner(&phi).norm_sqr();
    let closed = fidelity_closed_form(&p);
    assert!((overlap - closed).abs() < 1e-9);
    assert!((closed - 0.9937).abs() < 5e-5, "{closed}");
}

#[test]
fn detection_weights_match_projection_probabilities() {
    let s = space();
    for (r, t) in ORACLE_GRID {
        let p = SchemeParams::new(r, t);
        for m in 0..=3 {
            let (_, brute) = photon_subtracted(r, t, m, &s).unwrap();
            assert!((brute - p_m(&p, m)).abs() < 1e-9, "m={m} at ({r}, {t})");
        }
    }
}

#[test]
fn conditioned_states_have_alternating_parity() {
    let s = space();
    for m in 0..=3 {
        let (psi, _) = photon_subtracted(0.6, 0.9, m, &s).unwrap();
        let wrong: f64 = psi
            .amps()
            .iter()
            .enumerate()
            .filter(|(n, _)| n % 2 != m % 2)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!(wrong < 1e-24, "m={m}: {wrong}");
    }
}
