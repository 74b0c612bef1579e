use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::simplicial::SimplicialComplex;

fn setup(n: usize, m: usize, r: usize) -> Projector {
    let geo = Geometry::new(SimplicialComplex::structured(n, m).unwrap());
    let fe = Arc::new(FeSpace::new(geo.clone(), r));
    let w = Arc::new(Weights::new(geo, r));
    Projector::new(fe, w)
}

#[test]
fn u_is_dual_to_the_extensions() {
    let p = setup(2, 2, 2);
    let complex = p.fe.complex();
    for k in 0..=2 {
        for dim in k..=2 {
            let idx = complex.count(dim) / 2;
            let us = p.u_op(k, dim, idx).unwrap();
            let gs = p.fe.g_basis(k, dim, idx).unwrap();
            assert_eq!(us.len(), gs.len());
            let star: BTreeSet<usize> = complex.star_cells(complex.simplex(dim, idx)).into_iter().collect();
            for (i, u) in us.iter().enumerate() {
                assert!(u.support().is_subset(&star));
                for (j, g) in gs.iter().enumerate() {
                    let e = p.fe.extend(k, dim, idx, g).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    let v = e.inner(u);
                    assert!((v - expect).abs() < 1e-9, "k {k} dim {dim} {i} {j}: {v}");
                }
            }
        }
    }
}

#[test]
fn complement_u_is_a_coderivative() {
    let p = setup(2, 2, 2);
    let fe = &p.fe;
    for k in 0..2 {
        for dim in k + 1..=2 {
            let sp = fe.form_spaces(k, dim, 1).unwrap().unwrap();
            let f = &sp.forms[k];
            let ne = f.exact.len();
            let us = p.u_op(k, dim, 1).unwrap();
            // fresh solve with the symbolic derivative of each complement form
            let dg: Vec<PolyForm<f64>> = f.complement.iter().map(PolyForm::d).collect();
            let up = p.bubble_solve(k + 1, dim, 1, &dg).unwrap();
            for (i, w) in up.iter().enumerate() {
                let lhs = w.coderivative().unwrap();
                assert!(lhs.distance(&us[ne + i]) < 1e-9);
            }
        }
    }
}

#[test]
fn reproduces_the_finite_element_space() {
    for r in 1..=2 {
        let p = setup(2, 2, r);
        for k in 0..=2 {
            for key in p.fe.global_dofs(k).unwrap().into_iter().step_by(5) {
                let psi = p.fe.psi(k, key).unwrap();
                let out = p.project(k, &Input::Form(&psi), None).unwrap();
                assert!(out.distance(&psi) < 1e-9, "r {r} k {k} {key:?}: {}", out.distance(&psi));
            }
            let phi = p.geo().whitney(k, 3);
            let out = p.project(k, &Input::Form(&phi), None).unwrap();
            assert!(out.distance(&phi) < 1e-9);
        }
    }
}

#[test]
fn constants_are_preserved() {
    let p = setup(2, 2, 2);
    let geo = p.geo();
    let one = PiecewiseForm {
        k: 0,
        pieces: (0..geo.complex.count(2)).map(|c| (c, PolyForm::scalar(&geo.cell(c), crate::polyform::Poly::constant(3, 1.0)))).collect(),
        conformity: Conformity::Trace,
    };
    assert!(p.project(0, &Input::Form(&one), None).unwrap().distance(&one) < 1e-10);
}

#[test]
fn commutes_with_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for r in 1..=2 {
        let p = setup(2, 2, r);
        for k in 0..2 {
            let u = random_global_form(p.geo(), k, r as u32 + 2, &mut rng);
            let lhs = p.project(k, &Input::Form(&u), None).unwrap().d();
            let du = u.d();
            let rhs = p.project(k + 1, &Input::Form(&du), None).unwrap();
            let err = lhs.distance(&rhs);
            assert!(err < 1e-9 * (1.0 + du.norm()), "r {r} k {k}: {err}");
        }
    }
}

#[test]
fn lowest_order_case_is_the_weight_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = setup(2, 2, 1);
    for k in 0..=2 {
        let u = random_global_form(p.geo(), k, 2, &mut rng);
        let a = p.project(k, &Input::Form(&u), None).unwrap();
        let b = p.pi_low(k, &Input::Form(&u), None).unwrap();
        assert!(a.distance(&b) < 1e-10);
    }
}

#[test]
fn depends_only_on_the_second_extended_star() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = setup(2, 3, 2);
    let complex = p.fe.complex();
    let cell = 0;
    let near: BTreeSet<usize> = complex.extended_star2_cells(complex.simplex(2, cell)).into_iter().collect();
    for k in 0..=2 {
        let op = p.local_operator(k, cell).unwrap();
        assert!(op.footprint().is_subset(&near));
        let u = random_global_form(p.geo(), k, 3, &mut rng);
        let mut v = u.clone();
        let noise = random_global_form(p.geo(), k, 2, &mut rng);
        for (c, f) in v.pieces.iter_mut() {
            if !near.contains(c) {
                *f = f.add(&noise.pieces[c]);
            }
        }
        let a = op.apply(&Input::Form(&u));
        let b = op.apply(&Input::Form(&v));
        assert!(canonical(&a, &b) < 1e-12);
    }
}

fn canonical(a: &PolyForm<f64>, b: &PolyForm<f64>) -> f64 {
    crate::polyform::canonical_distance(a, b)
}

#[test]
fn local_norm_is_finite_and_at_least_one() {
    let p = setup(2, 2, 1);
    let complex = p.fe.complex();
    let dom = complex.extended_star2_cells(complex.simplex(2, 0));
    for k in 0..=2 {
        let nrm = p.local_norm(k, 0, &dom, 2).unwrap();
        assert!(nrm.is_finite() && nrm >= 1.0 - 1e-9, "k {k}: {nrm}");
    }
}
