//! Collapsed-coordinate Gauss-Jacobi rules on simplices and L² pairings.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FeecError, Result};
use crate::densela::Mat;
use crate::polyform::{bary_moment_ref, index_list, index_sets, Carrier, PiecewiseForm, PolyForm};
use crate::scalar::factorial;

/// Nodes in barycentric coordinates; weights sum to the reference volume 1/d!.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: u32,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss-Jacobi nodes/weights on [0,1] for the weight (1-t)^a, weights normalized to sum 1.
fn gauss_jacobi(q: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    // three-term recurrence for Jacobi(a, 0) on [-1, 1]
    let b = 0.0;
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        let n = i as f64;
        let s = 2.0 * n + a + b;
        jac[(i, i)] = if i == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        if i + 1 < q {
            let n1 = n + 1.0;
            let s1 = 2.0 * n1 + a + b;
            let num = 4.0 * n1 * (n1 + a) * (n1 + b) * (n1 + a + b);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            let off = (num / den).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| ((eig.eigenvalues[i] + 1.0) / 2.0, eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

impl QuadratureRule {
    /// Conical product rule on the reference d-simplex exact for polynomials of degree ≤ `degree`.
    pub fn new(dim: usize, degree: u32) -> Self {
        if dim == 0 {
            return QuadratureRule { dim, degree: u32::MAX, points: vec![vec![1.0]], weights: vec![1.0] };
        }
        let q = degree as usize / 2 + 1;
        let rules: Vec<(Vec<f64>, Vec<f64>)> =
            (0..dim).map(|j| gauss_jacobi(q, (dim - 1 - j) as f64)).collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            // x_1 = t_1, (x_2..) = (1 - t_1) * (point of the (d-1)-simplex)
            let mut x = vec![0.0; dim];
            let mut rest = 1.0;
            let mut w = 1.0;
            for j in 0..dim {
                let t = rules[j].0[idx[j]];
                w *= rules[j].1[idx[j]];
                x[j] = rest * t;
                rest *= 1.0 - t;
            }
            let mut bary = Vec::with_capacity(dim + 1);
            bary.push(1.0 - x.iter().sum::<f64>());
            bary.extend(x);
            points.push(bary);
            weights.push(w);
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] < q {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == dim {
                    break;
                }
            }
            if j == dim {
                break;
            }
        }
        let vol = 1.0 / factorial::<f64>(dim);
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w *= vol / total;
        }
        QuadratureRule { dim, degree, points, weights }
    }

    /// Largest relative error over all monomials of degree ≤ `degree` plus a random
    /// combination, against the factorial moment identity.
    pub fn audit(&self, seed: u64) -> f64 {
        let nv = self.dim + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut combo_exact = 0.0;
        let mut combo_quad = 0.0;
        let degree = self.degree.min(40);
        for deg in 0..=degree {
            for m in crate::polyform::monomials_of_degree(nv, deg) {
                let exact: f64 = bary_moment_ref::<f64>(m, nv);
                let exps = crate::polyform::mono_exps(m, nv);
                let quad: f64 = self
                    .points
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| w * p.iter().zip(&exps).map(|(x, &e)| x.powi(e as i32)).product::<f64>())
                    .sum();
                worst = worst.max((quad - exact).abs() / exact);
                let c: f64 = rng.gen_range(-1.0..1.0);
                combo_exact += c * exact;
                combo_quad += c * quad;
            }
        }
        worst.max((combo_quad - combo_exact).abs() / combo_exact.abs().max(1e-300))
    }
}

static RULES: Lazy<Mutex<HashMap<(usize, u32), Arc<QuadratureRule>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Shared rule for dimension `dim` exact to `degree` (odd degrees are rounded up).
pub fn rule(dim: usize, degree: u32) -> Arc<QuadratureRule> {
    let degree = degree + (degree + 1) % 2;
    let mut cache = RULES.lock().expect("quadrature cache poisoned");
    cache.entry((dim, degree)).or_insert_with(|| Arc::new(QuadratureRule::new(dim, degree))).clone()
}

/// Default extra degree used for callback (non-polynomial) integrands.
pub const CALLBACK_DEGREE: u32 = 16;

/// ∫ over the carrier of a top-degree form, using a rule exact to the form's degree.
pub fn integrate(u: &PolyForm<f64>) -> Result<f64> {
    let m = u.dim();
    if u.k != m {
        return Err(FeecError::Degree { op: "integrate", k: u.k });
    }
    let deg = u.poly_degree();
    let rule = rule(m, deg);
    if rule.degree < deg {
        return Err(FeecError::QuadratureDegree { needed: deg as usize, available: rule.degree as usize });
    }
    let full = if m == 0 { 0 } else { (1u32 << m) - 1 };
    let vals = u.values_at(&[full], &rule.points);
    let s: f64 = vals[0].iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
    Ok(s * u.carrier.edge_det)
}

/// ∫_τ f dvol for a scalar polynomial on the carrier.
pub fn integrate_scalar(u: &PolyForm<f64>) -> f64 {
    let m = u.dim();
    let rule = rule(m, u.poly_degree());
    let vals = u.values_at(&[0], &rule.points);
    let s: f64 = vals[0].iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
    s * u.carrier.volume * factorial::<f64>(m)
}

/// Pointwise Euclidean pairing integrated over one n-cell by quadrature.
pub fn cell_inner(u: &PolyForm<f64>, v: &PolyForm<f64>) -> Result<f64> {
    if u.k != v.k {
        return Err(FeecError::Degree { op: "l2_inner", k: v.k });
    }
    let n = u.dim();
    let rule = rule(n, u.poly_degree() + v.poly_degree());
    let sets = index_sets(n, u.k);
    let a = u.values_at(&sets, &rule.points);
    let b = v.values_at(&sets, &rule.points);
    let mut s = 0.0;
    for (ra, rb) in a.iter().zip(&b) {
        for q in 0..rule.weights.len() {
            s += rule.weights[q] * ra[q] * rb[q];
        }
    }
    Ok(s * u.carrier.volume * factorial::<f64>(n))
}

/// det G⁻¹[I, J] for all pairs of k-index sets of a carrier; the identity for n-cells.
pub fn metric_weights(carrier: &Carrier<f64>, k: usize) -> Mat {
    let sets = index_sets(carrier.dim, k);
    let ns = sets.len();
    if carrier.ambient || carrier.dim == 0 || k == 0 {
        return Mat::identity(ns, ns);
    }
    let g = &carrier.metric_inv;
    Mat::from_fn(ns, ns, |a, b| {
        let ri = index_list(sets[a]);
        let cj = index_list(sets[b]);
        let minor: Vec<Vec<f64>> = ri.iter().map(|&r| cj.iter().map(|&c| g[r][c]).collect()).collect();
        crate::densela::determinant(&minor)
    })
}

/// Gram matrix G_ij = ∫ w ⟨a_i, b_j⟩ over one carrier, with an optional scalar weight w.
///
/// All forms must live on the same carrier and have the same degree k.
pub fn gram(a: &[PolyForm<f64>], b: &[PolyForm<f64>], weight: Option<&PolyForm<f64>>) -> Mat {
    if a.is_empty() || b.is_empty() {
        return Mat::zeros(a.len(), b.len());
    }
    let carrier = &a[0].carrier;
    let k = a[0].k;
    let m = carrier.dim;
    let deg = a.iter().map(PolyForm::poly_degree).max().unwrap_or(0)
        + b.iter().map(PolyForm::poly_degree).max().unwrap_or(0)
        + weight.map_or(0, PolyForm::poly_degree);
    let rule = rule(m, deg);
    let sets = index_sets(m, k);
    let ns = sets.len();
    let nq = rule.weights.len();
    let wq: Vec<f64> = match weight {
        Some(w) => {
            let vals = w.values_at(&[0], &rule.points);
            rule.weights.iter().zip(&vals[0]).map(|(a, b)| a * b).collect()
        }
        None => rule.weights.clone(),
    };
    let metric = metric_weights(carrier, k);
    let eval = |forms: &[PolyForm<f64>]| -> Mat {
        let mut out = Mat::zeros(forms.len(), ns * nq);
        for (i, f) in forms.iter().enumerate() {
            debug_assert_eq!(f.k, k);
            let vals = f.values_at(&sets, &rule.points);
            for (s, row) in vals.iter().enumerate() {
                for (q, v) in row.iter().enumerate() {
                    out[(i, s * nq + q)] = *v;
                }
            }
        }
        out
    };
    let ea = eval(a);
    let eb = eval(b);
    // apply the metric and weights to the `a` side
    let mut wa = Mat::zeros(a.len(), ns * nq);
    for i in 0..a.len() {
        for t in 0..ns {
            for s in 0..ns {
                let g = metric[(s, t)];
                if g == 0.0 {
                    continue;
                }
                for q in 0..nq {
                    wa[(i, t * nq + q)] += g * ea[(i, s * nq + q)] * wq[q];
                }
            }
        }
    }
    wa * eb.transpose() * (carrier.volume * factorial::<f64>(m))
}

/// ⟨u, v⟩ over the listed cells (all common cells when `domain` is None).
pub fn l2_inner(u: &PiecewiseForm, v: &PiecewiseForm, domain: Option<&[usize]>) -> Result<f64> {
    if u.k != v.k {
        return Err(FeecError::Degree { op: "l2_inner", k: v.k });
    }
    let mut s = 0.0;
    for (c, f) in &u.pieces {
        if domain.is_some_and(|d| !d.contains(c)) {
            continue;
        }
        if let Some(g) = v.pieces.get(c) {
            s += cell_inner(f, g)?;
        }
    }
    Ok(s)
}

/// A k-form given pointwise: x ↦ coefficients ordered as `index_sets(n, k)`.
pub type Callback<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

/// ⟨u, f⟩ over one cell with a callback f, using degree deg(u) + `extra`.
pub fn cell_inner_callback(u: &PolyForm<f64>, f: Callback<'_>, extra: u32) -> f64 {
    let n = u.dim();
    let rule = rule(n, u.poly_degree() + extra);
    let sets = index_sets(n, u.k);
    let a = u.values_at(&sets, &rule.points);
    let mut s = 0.0;
    for (q, bary) in rule.points.iter().enumerate() {
        let x = u.carrier.point_at(bary);
        let fv = f(&x);
        for (i, row) in a.iter().enumerate() {
            s += rule.weights[q] * row[q] * fv[i];
        }
    }
    s * u.carrier.volume * factorial::<f64>(n)
}

pub fn l2_inner_callback(u: &PiecewiseForm, f: Callback<'_>, domain: Option<&[usize]>, extra: u32) -> f64 {
    u.pieces
        .iter()
        .filter(|(c, _)| domain.is_none_or(|d| d.contains(c)))
        .map(|(_, g)| cell_inner_callback(g, f, extra))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyform::Poly;

    #[test]
    fn rules_are_exact_to_their_degree() {
        for dim in 1..=3 {
            for deg in [1u32, 4, 9, 14] {
                let r = QuadratureRule::new(dim, deg);
                assert!(r.audit(1) < 1e-13, "dim {dim} deg {deg}: {}", r.audit(1));
                let total: f64 = r.weights.iter().sum();
                assert!((total - 1.0 / factorial::<f64>(dim)).abs() < 1e-15);
            }
        }
    }

    fn reference_triangle() -> Arc<Carrier<f64>> {
        Arc::new(Carrier::from_points(vec![0, 1, 2], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], true))
    }

    #[test]
    fn product_of_two_hats() {
        let c = reference_triangle();
        let p = PolyForm::scalar(&c, Poly::var(3, 0).mul(&Poly::var(3, 1)));
        assert!((integrate_scalar(&p) - 1.0 / 24.0).abs() < 1e-15);
        let one = PolyForm::scalar(&c, Poly::constant(3, 1.0));
        assert!((integrate_scalar(&one) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_integrand_vanishes() {
        // equilateral triangle, symmetric in vertices 0 and 1
        let c = Arc::new(Carrier::from_points(
            vec![0, 1, 2],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]],
            true,
        ));
        let mut p = Poly::var(3, 0);
        p.add_scaled(&Poly::var(3, 1), &-1.0);
        assert!(integrate_scalar(&PolyForm::scalar(&c, p)).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_frame() {
        let c = reference_triangle();
        let dx = PolyForm::basis(&c, 1);
        let dy = PolyForm::basis(&c, 2);
        assert!((cell_inner(&dx, &dx).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cell_inner(&dx, &dy).unwrap(), 0.0);
        assert!(cell_inner(&dx, &PolyForm::scalar(&c, Poly::constant(3, 1.0))).is_err());
    }

    #[test]
    fn callback_matches_polynomial() {
        let c = reference_triangle();
        let u = PolyForm::coordinate(&c, 0).d();
        let f = |x: &[f64]| vec![x[0] * x[1], 1.0];
        let got = cell_inner_callback(&u, &f, 4);
        // ∫ x y over the reference triangle = 1/24
        assert!((got - 1.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn gram_matches_exact_moments_on_a_face() {
        let c = Arc::new(Carrier::from_points(
            vec![0, 1, 2],
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.2, 0.0], vec![0.3, 1.0, 0.5]],
            false,
        ));
        let forms: Vec<PolyForm<f64>> = (0..3)
            .map(|i| PolyForm::barycentric(&c, i).d().mul_poly(&Poly::var(3, (i + 1) % 3)))
            .collect();
        let g = gram(&forms, &forms, None);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - forms[i].inner(&forms[j])).abs() < 1e-13);
            }
        }
    }
}
