use nalgebra::DVector;
use redimlab::benchmark::{decomposed_labels, MmBenchmark};
use redimlab::mm::{h0_decomposed, MmParams, ScenarioKind, FAR_RIGHT_BC};
use redimlab::pde::{write_profiles_csv, Profile1D, SolverConfig};
use redimlab::validation::{write_validation, ValidationOptions};

fn small_cfg() -> SolverConfig {
    SolverConfig {
        n_interior: 49,
        ..SolverConfig::default()
    }
}

#[test]
fn scenarios_share_left_boundary_and_differ_on_the_right() {
    let b = MmBenchmark::new(MmParams::default()).unwrap();
    let far = &b.scenarios.far;
    let near = &b.scenarios.near;
    assert_eq!(far.right_bc, FAR_RIGHT_BC.to_vec());
    assert_eq!(far.left_bc, near.left_bc);
    let w = b.map.to_decomposed(&DVector::from_row_slice(&near.right_bc)).unwrap();
    assert!(h0_decomposed(&b.map, &b.model, &w).unwrap().amax() < 1e-8);
    // projection moves only the fast coordinate
    let w_far = b.map.to_decomposed(&DVector::from_row_slice(&far.right_bc)).unwrap();
    assert!((w.slow - w_far.slow).amax() < 1e-12);
}

#[test]
fn stationary_profiles_converge_with_boundary_values_kept() {
    let b = MmBenchmark::new(MmParams::default()).unwrap();
    for kind in [ScenarioKind::Far, ScenarioKind::Near] {
        let run = b.run(kind, &small_cfg(), 2).unwrap();
        let p = &run.march.profile;
        assert_eq!(p.converged, Some(true));
        assert!(run.march.rhs_norm < 1e-9);
        assert_eq!(p.right_bc.as_slice(), b.scenarios.get(kind).right_bc.as_slice());
        assert_eq!(run.report.len(), 49);
        assert!(run.report.turning_points.is_empty());
    }
}

#[test]
fn equilibrium_is_a_stationary_profile() {
    let b = MmBenchmark::new(MmParams::default()).unwrap();
    let initial = Profile1D::constant(&b.equilibrium, 19).unwrap();
    let sys = redimlab::pde::semidiscretize(&b.model, b.params.delta, &initial).unwrap();
    let r = redimlab::pde::march_to_steady(&sys, &small_cfg(), &initial).unwrap();
    assert_eq!(r.steps, 0);
    assert_eq!(r.profile.converged, Some(true));
}

#[test]
fn profile_file_carries_metadata_and_both_coordinate_systems() {
    let b = MmBenchmark::new(MmParams::default()).unwrap();
    let cfg = small_cfg();
    let run = b.run(ScenarioKind::Far, &cfg, 1).unwrap();
    let mut out = Vec::new();
    write_profiles_csv(
        &mut out,
        &b.metadata(&cfg),
        std::slice::from_ref(&run.march.profile),
        b.model.labels(),
        Some((&b.map, &decomposed_labels())),
    )
    .unwrap();
    let text = String::from_utf8(out).unwrap();
    for key in ["parameters", "grid", "integrator", "epsilon", "z_equation", "code_version"] {
        assert!(text.contains(&format!("# {key}: ")), "missing {key}");
    }
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,x,X,Y,Z,U,V,W");
    // interior points plus the two boundary rows
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 51);
}

#[test]
fn seeds_change_only_seeded_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let opts = |seed| ValidationOptions {
        seed,
        n_interior: 49,
        ..ValidationOptions::default()
    };
    assert!(write_validation(a.path(), &opts(1)).unwrap().criterion_passed("A8"));
    assert!(write_validation(b.path(), &opts(2)).unwrap().criterion_passed("A8"));
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "gql.json"), read(b.path(), "gql.json"));
    assert_ne!(read(a.path(), "summary.csv"), read(b.path(), "summary.csv"));
}
