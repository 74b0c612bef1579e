use std::sync::Arc;

use feec::fespace::{FeSpace, Geometry};
use feec::projection::{de_rham_cochain, random_global_form, whitney_interpolant, Input, Projector};
use feec::simplicial::SimplicialComplex;
use feec::suite::{run_suite, MeshSource, Stage, SuiteConfig};
use feec::weights::Weights;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(stages: Vec<Stage>) -> SuiteConfig {
    SuiteConfig { mesh: MeshSource::Structured { n: 2, m: 2 }, stages, samples: 3, ..SuiteConfig::default() }
}

#[test]
fn fixed_seed_gives_identical_reports() {
    let cfg = SuiteConfig { seed: 11, ..small(vec![Stage::Whitney, Stage::Weights, Stage::Projection]) };
    let a = run_suite(&cfg).unwrap();
    let b = run_suite(&cfg).unwrap();
    assert!(a.passed());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn csv_has_one_row_per_check() {
    let out = run_suite(&small(vec![Stage::Complex, Stage::Dimensions])).unwrap();
    let csv = out.to_csv();
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, out.reports.iter().map(|r| r.checks.len()).sum::<usize>());
    assert!(csv.starts_with("op,mesh,r,k,id,max_err,tol,pass"));
}

#[test]
fn mesh_files_round_trip_through_the_suite() {
    let complex = SimplicialComplex::structured(2, 3).unwrap();
    let text = serde_json::to_string(&complex.to_mesh_file()).unwrap();
    let mesh = serde_json::from_str(&text).unwrap();
    let cfg = SuiteConfig {
        mesh: MeshSource::File { label: "square".into(), mesh },
        r: 1..=1,
        ..small(vec![Stage::Complex, Stage::Whitney, Stage::Projection])
    };
    let out = run_suite(&cfg).unwrap();
    assert!(out.passed(), "{:?}", out.failures());
    assert!(out.reports.iter().all(|r| r.mesh == "square"));
}

#[test]
fn interval_and_tetrahedra_pass_the_algebraic_stages() {
    for (n, m) in [(1, 4), (3, 1)] {
        let cfg = SuiteConfig {
            mesh: MeshSource::Structured { n, m },
            ..small(vec![Stage::Complex, Stage::Dimensions, Stage::Exactness, Stage::Whitney])
        };
        let out = run_suite(&cfg).unwrap();
        assert!(out.passed(), "n={n}: {:?}", out.failures());
    }
}

#[test]
fn corrupted_orientation_is_reported() {
    let cfg = SuiteConfig { flip_boundary: true, ..small(vec![Stage::Complex]) };
    let out = run_suite(&cfg).unwrap();
    assert!(out.find("complex", "dd_zero").iter().any(|c| !c.pass));
}

#[test]
fn invalid_configurations_are_rejected() {
    let cfg = SuiteConfig { r: 0..=1, ..SuiteConfig::default() };
    assert!(run_suite(&cfg).is_err());
    let cfg = SuiteConfig { mesh: MeshSource::Structured { n: 4, m: 1 }, ..SuiteConfig::default() };
    assert!(run_suite(&cfg).is_err());
}

fn projector(r: usize) -> Projector {
    let geo = Geometry::new(SimplicialComplex::structured(2, 2).unwrap());
    Projector::new(Arc::new(FeSpace::new(geo.clone(), r)), Arc::new(Weights::new(geo, r)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projection_commutes_with_d(seed in any::<u64>(), r in 1usize..=2, k in 0usize..2, deg in 0u32..4) {
        let p = projector(r);
        let geo = p.fe.geo.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_global_form(&geo, k, deg, &mut rng);
        let lhs = p.project(k, &Input::Form(&u), None).unwrap().d();
        let rhs = p.project(k + 1, &Input::Form(&u.d()), None).unwrap();
        prop_assert!(lhs.distance(&rhs) <= 1e-9 * u.norm().max(1.0));
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), r in 1usize..=2, k in 0usize..=2) {
        let p = projector(r);
        let geo = p.fe.geo.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_global_form(&geo, k, r as u32 + 1, &mut rng);
        let once = p.project(k, &Input::Form(&u), None).unwrap();
        let twice = p.project(k, &Input::Form(&once), None).unwrap();
        prop_assert!(once.distance(&twice) <= 1e-9 * once.norm().max(1.0));
    }

    #[test]
    fn de_rham_inverts_whitney_interpolation(seed in any::<u64>(), k in 0usize..=2) {
        let geo = Geometry::new(SimplicialComplex::structured(2, 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..geo.complex.count(k)).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let w = whitney_interpolant(&geo.complex, k, &x, &|c| geo.cell(c));
        let back = de_rham_cochain(&geo, &w).unwrap();
        for (a, b) in back.coeffs.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
