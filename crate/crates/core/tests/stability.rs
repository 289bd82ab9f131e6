use mrgark::stability::{
    conditional_stability_weight, is_algebraically_stable, is_stability_decoupled, min_eigenvalue, p_blocks,
    psd_verdict, rk_p_matrix, stability_report, stability_step_bound, Partitioning, DECOUPLING_TOL, PSD_TOL,
};
use mrgark::schemes::{self, make};
use mrgark::tableau::{FlatGarkTableau, Mat};

/// `AᵀB + BA − bbᵀ` of the full single tableau.
fn single_tableau_p(flat: &FlatGarkTableau) -> Mat {
    let a = flat.full_a();
    let b = flat.full_b();
    let bm = Mat::from_diagonal(&b);
    a.transpose() * &bm + &bm * &a - &b * b.transpose()
}

#[test]
fn block_p_equals_single_tableau_p() {
    for name in ["mrk-radau1a-3", "add-stable-2", "add-stable-3-radau", "ssp2-mr-lastslow", "mis"] {
        for m in 1..=4 {
            let flat = make(name, m).unwrap().flat();
            let diff = (p_blocks(&flat).full() - single_tableau_p(&flat)).amax();
            assert!(diff < 1e-14, "{name} M={m}: {diff}");
        }
    }
}

#[test]
fn classical_algebraic_stability() {
    assert!(psd_verdict(&rk_p_matrix(&schemes::radau1a()), PSD_TOL).0);
    assert!(psd_verdict(&rk_p_matrix(&schemes::radau2a()), PSD_TOL).0);
    assert!(!psd_verdict(&rk_p_matrix(&schemes::ssp2()), PSD_TOL).0);
    // The RADAU-IIA P matrix is singular.
    let lam = min_eigenvalue(&rk_p_matrix(&schemes::radau2a()));
    assert!(lam.abs() < 1e-15);
}

#[test]
fn add_stable_2_is_unconditionally_stable() {
    for m in 1..=4 {
        let flat = make("add-stable-2", m).unwrap().flat();
        assert!(is_stability_decoupled(&flat, DECOUPLING_TOL), "M={m}");
        assert!(is_algebraically_stable(&flat, PSD_TOL).0, "M={m}");
        assert_eq!(conditional_stability_weight(&flat, 1e4), Some(0.0));
    }
}

#[test]
fn consistency_and_decoupling_are_incompatible_for_radau1a() {
    for m in 2..=4 {
        let s = make("mrk-radau1a-3", m).unwrap();
        let (cf, cs) = s.multirate().unwrap().internal_consistency_residuals();
        assert!(cf.max(cs) < 1e-15);
        assert!(!is_stability_decoupled(&s.flat(), DECOUPLING_TOL));
    }
}

#[test]
fn table3_schemes_are_decoupled() {
    for spec in ["table3-2stage", "table3-2stage:ssp2", "ssp2-mr-decoupled"] {
        for m in 1..=4 {
            let s = mrgark::schemes::make_id(&mrgark::SchemeId::new(spec, m).unwrap()).unwrap();
            assert!(is_stability_decoupled(&s.flat(), DECOUPLING_TOL), "{spec} M={m}");
        }
    }
}

#[test]
fn component_partitioning_uses_diagonal_blocks() {
    let flat = make("add-stable-3-radau", 2).unwrap().flat();
    let additive = stability_report(&flat, Partitioning::Additive, None, 1e4);
    let component = stability_report(&flat, Partitioning::Component, None, 1e4);
    assert_eq!(component.algebraically_stable, component.fast_block_psd && component.slow_block_psd);
    assert_eq!(additive.algebraically_stable, additive.full_p_psd);
    assert!(additive.p_fs_norm > 0.0);
}

#[test]
fn conditional_weight_is_the_feasibility_threshold() {
    let flat = make("mrk-radau1a-3", 2).unwrap().flat();
    let r = conditional_stability_weight(&flat, 1e4).expect("feasible below r_max");
    assert!(r > 0.0);
    let weighted = |r: f64| {
        let mut p = p_blocks(&flat).full();
        let nf = flat.n_fast();
        for (k, w) in flat.b_f().iter().enumerate() {
            p[(k, k)] += r * flat.ratio() as f64 * w;
        }
        for (k, w) in flat.b_s().iter().enumerate() {
            p[(nf + k, nf + k)] += r * w;
        }
        p
    };
    // Independent check with a Cholesky factorization.
    assert!(weighted(r * 1.01).cholesky().is_some());
    assert!(weighted(r * 0.99).cholesky().is_none());
}

#[test]
fn step_bound_rules() {
    assert_eq!(stability_step_bound(-2.0, 4.0), Some(1.0));
    assert_eq!(stability_step_bound(-2.0, 0.0), Some(f64::INFINITY));
    assert_eq!(stability_step_bound(0.5, 1.0), None);
    let flat = make("add-stable-2", 2).unwrap().flat();
    let rep = stability_report(&flat, Partitioning::Additive, Some(-11.0), 1e4);
    assert_eq!(rep.step_bound, Some(f64::INFINITY));
}
