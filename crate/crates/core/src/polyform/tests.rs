use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scalar::Rational;
use crate::simplicial::{Simplex, SimplicialComplex};

fn triangle<S: Scalar>() -> Arc<Carrier<S>> {
    Arc::new(Carrier::from_points(vec![0, 1, 2], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], true))
}

fn tetrahedron<S: Scalar>() -> Arc<Carrier<S>> {
    Arc::new(Carrier::from_points(
        vec![0, 1, 2, 3],
        vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.25, 1.0, 0.0], vec![0.5, 0.5, 2.0]],
        true,
    ))
}

fn random_poly(nvars: usize, deg: u32, rng: &mut ChaCha8Rng) -> Poly<f64> {
    let mut p = Poly::zero(nvars);
    for m in monomials_of_degree(nvars, deg) {
        p.add_term(m, rng.gen_range(-1.0..1.0));
    }
    p
}

fn random_form(c: &Arc<Carrier<f64>>, k: usize, deg: u32, rng: &mut ChaCha8Rng) -> PolyForm<f64> {
    let mut f = PolyForm::zero(c, k);
    for s in index_sets(c.dim, k) {
        f.add_scaled(&PolyForm::basis(c, s).mul_poly(&random_poly(c.nvars(), deg, rng)), &1.0);
    }
    f
}

fn random_rational_form(c: &Arc<Carrier<Rational>>, k: usize, deg: u32, rng: &mut ChaCha8Rng) -> PolyForm<Rational> {
    let mut f = PolyForm::zero(c, k);
    for s in index_sets(c.dim, k) {
        let mut p = Poly::zero(c.nvars());
        for m in monomials_of_degree(c.nvars(), deg) {
            p.add_term(m, Rational::from_i64(rng.gen_range(-9..=9)));
        }
        f.add_scaled(&PolyForm::basis(c, s).mul_poly(&p), &<Rational as Scalar>::one());
    }
    f
}

fn close(a: &PolyForm<f64>, b: &PolyForm<f64>) -> bool {
    canonical_distance(a, b) < 1e-12
}

#[test]
fn derivative_of_hat_is_its_gradient() {
    let c = triangle::<f64>();
    let d = PolyForm::barycentric(&c, 0).d();
    // λ_0 = 1 - x - y
    let expect = PolyForm::basis(&c, 1).add(&PolyForm::basis(&c, 2)).scaled(&-1.0);
    assert!(close(&d, &expect));
}

#[test]
fn d_of_x_dy() {
    let c = triangle::<f64>();
    let x = PolyForm::coordinate(&c, 0);
    let xdy = x.wedge(&PolyForm::basis(&c, 2)).unwrap();
    assert!(close(&xdy.d(), &PolyForm::basis(&c, 3)));
}

#[test]
fn dd_vanishes_exactly_in_rational_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = tetrahedron::<Rational>();
    for k in 0..2 {
        let u = random_rational_form(&c, k, 3, &mut rng);
        assert!(u.d().d().is_zero());
    }
}

#[test]
fn top_degree_derivative_is_an_error() {
    let c = triangle::<f64>();
    assert!(PolyForm::basis(&c, 3).exterior_derivative().is_err());
}

#[test]
fn koszul_examples() {
    let c = triangle::<f64>();
    let origin = [0.0, 0.0];
    let x = PolyForm::coordinate(&c, 0);
    let y = PolyForm::coordinate(&c, 1);
    assert!(close(&PolyForm::basis(&c, 1).koszul(Some(&origin)).unwrap(), &x));
    let k2 = PolyForm::basis(&c, 3).koszul(Some(&origin)).unwrap();
    let expect = x.wedge(&PolyForm::basis(&c, 2)).unwrap().sub(&y.wedge(&PolyForm::basis(&c, 1)).unwrap());
    assert!(close(&k2, &expect));
    assert!(PolyForm::scalar(&c, Poly::constant(3, 1.0)).koszul(None).is_err());
}

#[test]
fn koszul_squares_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = tetrahedron::<Rational>();
    for k in 2..=3 {
        let u = random_rational_form(&c, k, 2, &mut rng);
        assert!(u.koszul(None).unwrap().koszul(None).unwrap().is_zero());
    }
}

#[test]
fn hodge_star_examples() {
    let c = triangle::<f64>();
    assert!(close(&PolyForm::basis(&c, 1).hodge_star().unwrap(), &PolyForm::basis(&c, 2)));
    assert!(close(&PolyForm::basis(&c, 2).hodge_star().unwrap(), &PolyForm::basis(&c, 1).scaled(&-1.0)));
    let t = tetrahedron::<f64>();
    assert!(close(&PolyForm::basis(&t, 0b011).hodge_star().unwrap(), &PolyForm::basis(&t, 0b100)));
}

#[test]
fn double_star_sign_and_pointwise_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = tetrahedron::<f64>();
    for k in 0..=3 {
        let u = random_form(&t, k, 2, &mut rng);
        let v = random_form(&t, k, 1, &mut rng);
        let ss = u.hodge_star().unwrap().hodge_star().unwrap();
        let sign = if (k * (3 - k)) % 2 == 0 { 1.0 } else { -1.0 };
        assert!(close(&ss, &u.scaled(&sign)));
        // u ∧ ⋆v = ⟨u, v⟩ vol, so integrating both sides agrees
        let lhs = u.wedge(&v.hodge_star().unwrap()).unwrap().integrate().unwrap();
        assert!((lhs - u.inner(&v)).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn coderivative_examples() {
    let c = triangle::<f64>();
    let x = PolyForm::coordinate(&c, 0);
    let xdx = x.wedge(&PolyForm::basis(&c, 1)).unwrap();
    let got = xdx.coderivative().unwrap();
    assert!(close(&got, &PolyForm::scalar(&c, Poly::constant(3, -1.0))));
    assert!(PolyForm::basis(&c, 2).coderivative().unwrap().is_zero());
    assert!(PolyForm::scalar(&c, Poly::constant(3, 1.0)).coderivative().is_err());
}

#[test]
fn coderivative_squares_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = tetrahedron::<Rational>();
    for k in 2..=3 {
        let u = random_rational_form(&t, k, 3, &mut rng);
        assert!(u.coderivative().unwrap().coderivative().unwrap().is_zero());
    }
}

#[test]
fn coderivative_is_adjoint_for_bubble_weighted_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = tetrahedron::<f64>();
    let mut bubble = Poly::constant(4, 1.0);
    for i in 0..4 {
        bubble = bubble.mul(&Poly::var(4, i));
    }
    for k in 0..3 {
        let u = random_form(&t, k, 2, &mut rng);
        let v = random_form(&t, k + 1, 1, &mut rng).mul_poly(&bubble);
        let lhs = u.d().inner(&v);
        let rhs = u.inner(&v.coderivative().unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "k={k}: {lhs} vs {rhs}");
    }
}

#[test]
fn trace_examples() {
    let c = triangle::<f64>();
    let opposite = Arc::new(Carrier::from_points(vec![1, 2], vec![vec![1.0, 0.0], vec![0.0, 1.0]], false));
    let dl0 = PolyForm::barycentric(&c, 0).d();
    assert!(dl0.trace(&opposite).unwrap().is_zero());
    let too_small = Arc::new(Carrier::<f64>::from_points(vec![1], vec![vec![1.0, 0.0]], false));
    assert!(PolyForm::basis(&c, 1).trace(&too_small).unwrap().is_zero());
}

#[test]
fn trace_commutes_with_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = tetrahedron::<f64>();
    let pts = t.points.clone();
    let face = Arc::new(Carrier::from_points(vec![0, 2, 3], vec![pts[0].clone(), pts[2].clone(), pts[3].clone()], false));
    let edge = Arc::new(Carrier::from_points(vec![1, 3], vec![pts[1].clone(), pts[3].clone()], false));
    for k in 0..2 {
        let u = random_form(&t, k, 2, &mut rng);
        assert!(close(&u.d().trace(&face).unwrap(), &u.trace(&face).unwrap().d()));
        // trace through the face and directly agree
        assert!(close(&u.trace(&face).unwrap().trace(&Arc::new(Carrier::from_points(vec![0, 3], vec![pts[0].clone(), pts[3].clone()], false))).unwrap(),
            &u.trace(&Arc::new(Carrier::from_points(vec![0, 3], vec![pts[0].clone(), pts[3].clone()], false))).unwrap()));
    }
    let u = random_form(&t, 0, 3, &mut rng);
    assert!(close(&u.d().trace(&edge).unwrap(), &u.trace(&edge).unwrap().d()));
}

#[test]
fn wedge_examples() {
    let c = triangle::<f64>();
    let dx = PolyForm::basis(&c, 1);
    let dy = PolyForm::basis(&c, 2);
    assert!(dx.wedge(&dx).unwrap().is_zero());
    assert!(close(&dx.wedge(&dy).unwrap(), &dy.wedge(&dx).unwrap().scaled(&-1.0)));
    let l0 = PolyForm::barycentric(&c, 0);
    let dl1 = PolyForm::barycentric(&c, 1).d();
    assert!(close(&l0.wedge(&dl1).unwrap(), &dl1.mul_poly(&Poly::var(3, 0))));
    assert!(dx.wedge(&PolyForm::basis(&c, 3)).is_err());
}

#[test]
fn graded_anticommutativity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = tetrahedron::<f64>();
    for (a, b) in [(1, 1), (1, 2), (0, 2)] {
        let u = random_form(&t, a, 1, &mut rng);
        let v = random_form(&t, b, 2, &mut rng);
        let sign = if (a * b) % 2 == 0 { 1.0 } else { -1.0 };
        assert!(close(&u.wedge(&v).unwrap(), &v.wedge(&u).unwrap().scaled(&sign)));
    }
}

#[test]
fn whitney_forms_on_a_triangle() {
    let c = triangle::<f64>();
    assert!(close(&whitney_local(&c, &[1]), &PolyForm::barycentric(&c, 1)));
    let l0 = PolyForm::barycentric(&c, 0);
    let l1 = PolyForm::barycentric(&c, 1);
    let expect = l0.wedge(&l1.d()).unwrap().sub(&l1.wedge(&l0.d()).unwrap());
    assert!(close(&whitney_local(&c, &[0, 1]), &expect));
}

#[test]
fn edge_whitney_forms_integrate_to_one() {
    let mesh = SimplicialComplex::build(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        vec![vec![0, 1, 2], vec![1, 2, 3]],
    )
    .unwrap();
    for cell in mesh.cells() {
        let cc = Arc::new(Carrier::<Rational>::of(&mesh, cell));
        for e in mesh.simplices(1) {
            let Some(local) = cc.local_indices(e.vertices()) else { continue };
            let phi = whitney_local(&cc, &local);
            for f in mesh.simplices(1) {
                if cc.local_indices(f.vertices()).is_none() {
                    continue;
                }
                let fc = Arc::new(Carrier::of(&mesh, f));
                let v = phi.trace(&fc).unwrap().integrate().unwrap();
                let expect = if e == f { <Rational as Scalar>::one() } else { <Rational as Scalar>::zero() };
                assert_eq!(v, expect, "edge {e:?} on {f:?}");
            }
        }
    }
    let _ = Simplex::new(vec![0]);
}

#[test]
fn volume_form_has_unit_norm() {
    let face = Arc::new(Carrier::<f64>::from_points(vec![0, 1, 2], vec![vec![0.0, 0.0, 1.0], vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 3.0]], false));
    let vol = PolyForm::volume_form(&face);
    assert!((vol.inner(&vol) - face.volume).abs() < 1e-12);
    assert!((vol.integrate().unwrap() - face.volume).abs() < 1e-12);
}

#[test]
fn exact_and_quadrature_integration_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = tetrahedron::<f64>();
    let u = random_form(&t, 3, 5, &mut rng);
    let exact = u.integrate().unwrap();
    let quad = crate::quadrature::integrate(&u).unwrap();
    assert!((exact - quad).abs() < 1e-12 * (1.0 + exact.abs()));
    let v = random_form(&t, 1, 3, &mut rng);
    let w = random_form(&t, 1, 4, &mut rng);
    let a = v.inner(&w);
    let b = crate::quadrature::cell_inner(&v, &w).unwrap();
    assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
}

#[test]
fn json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = tetrahedron::<f64>();
    let u = random_form(&t, 2, 2, &mut rng);
    let json = serde_json::to_string(&u.to_json()).unwrap();
    let back = PolyForm::from_json(&t, &serde_json::from_str(&json).unwrap()).unwrap();
    assert!(close(&u, &back));
    assert_eq!(u.to_json().terms[0].index.len(), 2);
}

#[test]
fn canonical_equality_sees_through_partition_of_unity() {
    let c = triangle::<Rational>();
    let one = PolyForm::scalar(&c, Poly::constant(3, <Rational as Scalar>::one()));
    let mut s = Poly::zero(3);
    for i in 0..3 {
        s.add_term(mono_unit(i), <Rational as Scalar>::one());
    }
    assert!(one.equals(&PolyForm::scalar(&c, s)));
}
