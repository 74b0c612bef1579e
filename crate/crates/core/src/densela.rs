//! Small dense linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{FeecError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Numerical cutoffs shared by all local solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative asymmetry accepted by [`solve_spd`].
    pub symmetry: f64,
    /// Singular values below `rank * σ_max` count as zero.
    pub rank: f64,
    /// Directions with relative norm below this are dropped by [`orthonormalize`].
    pub drop: f64,
}

pub const TOL: Tolerances = Tolerances { symmetry: 1e-12, rank: 1e-9, drop: 1e-10 };

pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    Mat::from_fn(n, n, |i, j| a[i][j]).determinant()
}

fn symmetry_defect(a: &Mat) -> f64 {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() / scale
}

/// Solves A X = B for symmetric positive definite A.
pub fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(FeecError::Dimension(format!(
            "solve_spd: {}x{} system with {} rhs rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    if symmetry_defect(a) > TOL.symmetry {
        return Err(FeecError::NotSpd { pivot: 0, value: f64::NAN });
    }
    let sym = (a + a.transpose()) * 0.5;
    match sym.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => {
            let (pivot, value) = first_bad_pivot(&sym);
            Err(FeecError::NotSpd { pivot, value })
        }
    }
}

pub fn solve_spd_vec(a: &Mat, b: &Vector) -> Result<Vector> {
    let x = solve_spd(a, &Mat::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

/// Index and value of the first non-positive pivot of an LDLᵀ sweep.
fn first_bad_pivot(a: &Mat) -> (usize, f64) {
    let n = a.nrows();
    let mut l = a.clone();
    for k in 0..n {
        let p = l[(k, k)];
        if p <= 0.0 || !p.is_finite() {
            return (k, p);
        }
        for i in k + 1..n {
            let f = l[(i, k)] / p;
            for j in k + 1..n {
                l[(i, j)] -= f * l[(k, j)];
            }
        }
    }
    (n, 0.0)
}

/// General square solve with LU; errors on a singular matrix.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| FeecError::Dimension("singular matrix".into()))
}

pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

pub fn rank(a: &Mat, tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// 2-norm condition number; infinite when singular.
pub fn condition_number(a: &Mat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Orthonormal basis (columns) of ker A, using the relative rank cutoff `tol`.
pub fn nullspace(a: &Mat, tol: f64) -> Mat {
    let n = a.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if a.nrows() == 0 || a.amax() == 0.0 {
        return Mat::identity(n, n);
    }
    // pad to at least n rows so the SVD returns a full right basis
    let rows = a.nrows().max(n);
    let mut padded = Mat::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> =
        (0..n).filter(|&i| svd.singular_values[i] <= tol * smax).collect();
    let mut out = Mat::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}

/// Result of [`orthonormalize`]: coefficient columns C with Cᵀ G C = I.
#[derive(Clone, Debug)]
pub struct Orthonormalized {
    pub coeffs: Mat,
    pub dropped: usize,
}

/// Orthonormalizes the vectors whose Gram matrix is `gram`, dropping dependent directions.
///
/// Modified Gram-Schmidt in the given inner product, done twice for stability.
pub fn orthonormalize(gram: &Mat) -> Orthonormalized {
    let n = gram.nrows();
    let scale = (0..n).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    let mut cols: Vec<Vector> = Vec::new();
    let mut dropped = 0;
    for i in 0..n {
        let mut v = Vector::zeros(n);
        v[i] = 1.0;
        let norm0 = gram[(i, i)].max(0.0).sqrt();
        for _ in 0..2 {
            for c in &cols {
                let proj = (c.transpose() * gram * &v)[0];
                v -= c * proj;
            }
        }
        let nrm = (v.transpose() * gram * &v)[0].max(0.0).sqrt();
        if nrm <= TOL.drop * scale.sqrt().max(norm0) || nrm == 0.0 {
            dropped += 1;
            continue;
        }
        cols.push(v / nrm);
    }
    let mut coeffs = Mat::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        coeffs.set_column(j, c);
    }
    Orthonormalized { coeffs, dropped }
}

/// Orthonormal basis for the span via the eigen-decomposition of the Gram matrix.
///
/// Better suited than [`orthonormalize`] when the spanning set is badly conditioned.
pub fn orthonormal_span(gram: &Mat, tol: f64) -> Mat {
    let n = gram.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 {
        return Mat::zeros(n, 0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let keep: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > tol * lmax).collect();
    let mut out = Mat::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &(eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt()));
    }
    out
}

/// Largest λ with A x = λ B x, B symmetric positive definite.
pub fn max_generalized_eigenvalue(a: &Mat, b: &Mat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let l = (b + b.transpose()) * 0.5;
    let ch = l.cholesky().ok_or(FeecError::NotSpd { pivot: 0, value: f64::NAN })?;
    let linv = ch.l().try_inverse().ok_or(FeecError::NotSpd { pivot: 0, value: 0.0 })?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigen().eigenvalues.max())
}

/// Smallest λ with A x = λ B x, B symmetric positive definite.
pub fn min_generalized_eigenvalue(a: &Mat, b: &Mat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let l = (b + b.transpose()) * 0.5;
    let ch = l.cholesky().ok_or(FeecError::NotSpd { pivot: 0, value: f64::NAN })?;
    let linv = ch.l().try_inverse().ok_or(FeecError::NotSpd { pivot: 0, value: 0.0 })?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigen().eigenvalues.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rational_rank(a: &[Vec<i64>]) -> usize {
        let mut m: Vec<Vec<BigRational>> = a
            .iter()
            .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
            .collect();
        let rows = m.len();
        let cols = if rows == 0 { 0 } else { m[0].len() };
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..rows).find(|&r| !m[r][c].is_zero()) else { continue };
            m.swap(rank, p);
            let piv = m[rank][c].clone();
            for r in 0..rows {
                if r != rank && !m[r][c].is_zero() {
                    let f = m[r][c].clone() / piv.clone();
                    for j in c..cols {
                        let t = m[rank][j].clone() * f.clone();
                        m[r][j] = m[r][j].clone() - t;
                    }
                }
            }
            rank += 1;
        }
        let _ = BigRational::one();
        rank
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat {
        let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + Mat::identity(n, n) * 0.1
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Mat::from_column_slice(3, 1, &[1.0, -2.0, 3.5]);
        assert_eq!(solve_spd(&Mat::identity(3, 3), &b).unwrap(), b);
    }

    #[test]
    fn small_spd_by_inspection() {
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = solve_spd_vec(&a, &Vector::from_vec(vec![3.0, 3.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(40, &mut rng);
        let b = Vector::from_fn(40, |_, _| rng.gen_range(-1.0..1.0));
        let x = solve_spd_vec(&a, &b).unwrap();
        assert!((&a * x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match solve_spd(&a, &Mat::identity(2, 2)) {
            Err(FeecError::NotSpd { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn nullspace_edge_cases() {
        assert_eq!(nullspace(&Mat::zeros(3, 4), TOL.rank).ncols(), 4);
        assert_eq!(nullspace(&Mat::identity(5, 5), TOL.rank).ncols(), 0);
    }

    #[test]
    fn rank_matches_rational_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let rows = rng.gen_range(1..=12);
            let cols = rng.gen_range(1..=12);
            let true_rank = rng.gen_range(0..=rows.min(cols));
            // product of integer factors gives a controlled rank
            let l: Vec<Vec<i64>> = (0..rows).map(|_| (0..true_rank).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            let r: Vec<Vec<i64>> = (0..true_rank).map(|_| (0..cols).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            let a: Vec<Vec<i64>> = (0..rows)
                .map(|i| (0..cols).map(|j| (0..true_rank).map(|t| l[i][t] * r[t][j]).sum()).collect())
                .collect();
            let m = Mat::from_fn(rows, cols, |i, j| a[i][j] as f64);
            let exact = rational_rank(&a);
            assert_eq!(rank(&m, TOL.rank), exact, "trial {trial}");
            let ns = nullspace(&m, TOL.rank);
            assert_eq!(ns.ncols(), cols - exact);
            if ns.ncols() > 0 {
                assert!((&m * &ns).amax() <= 1e-9 * m.amax().max(1.0));
                let g = ns.transpose() * &ns;
                assert!((g - Mat::identity(ns.ncols(), ns.ncols())).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn orthonormalize_drops_duplicates() {
        // vectors e1, e1, e2 in the Euclidean inner product
        let g = Mat::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let o = orthonormalize(&g);
        assert_eq!(o.dropped, 1);
        assert_eq!(o.coeffs.ncols(), 2);
    }

    #[test]
    fn orthonormal_input_is_kept() {
        let o = orthonormalize(&Mat::identity(4, 4));
        assert_eq!(o.dropped, 0);
        assert!((o.coeffs.abs() - Mat::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn orthonormalize_random_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_spd(10, &mut rng);
        let vecs = Mat::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let gram = vecs.transpose() * &m * &vecs;
        let o = orthonormalize(&gram);
        let g2 = o.coeffs.transpose() * &gram * &o.coeffs;
        assert!((g2 - Mat::identity(o.coeffs.ncols(), o.coeffs.ncols())).amax() < 1e-10);
        let s = orthonormal_span(&gram, TOL.rank);
        let g3 = s.transpose() * &gram * &s;
        assert!((g3 - Mat::identity(s.ncols(), s.ncols())).amax() < 1e-10);
    }

    #[test]
    fn generalized_eigen_extremes() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 6.0]));
        let b = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        assert!((max_generalized_eigenvalue(&a, &b).unwrap() - 3.0).abs() < 1e-12);
        assert!((min_generalized_eigenvalue(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    }
}
