//! Combinatorial, dimension, exactness and Whitney checks.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densela::Mat;
use crate::fespace::{binomial, trace_free_dim, trimmed_basis, trimmed_dim, FeSpace, Geometry, PatchSpace, SimplexSpaces};
use crate::polyform::{bubble_on, whitney_form, Carrier, PolyForm};
use crate::projection::{de_rham, random_global_form, whitney_interpolant};
use crate::quadrature::gram;
use crate::scalar::{Rational, Scalar};
use crate::simplicial::{Cochain, Simplex, SimplicialComplex};

use super::{Report, SuiteConfig};

pub(super) fn complex_checks(complex: &SimplicialComplex, mesh: &str) -> Report {
    let n = complex.dim();
    let mut rep = Report::new("complex", mesh, None, None);
    rep.check("dd_zero", complex.boundary_boundary_defect() as f64, 0.0);

    // 𝖽𝖽 applied to every basis cochain
    let mut worst: f64 = 0.0;
    for k in 0..n.saturating_sub(1) {
        for i in 0..complex.count(k) {
            let mut x = Cochain::zeros(k, complex.count(k));
            x.coeffs[i] = 1.0;
            let dd = complex.coboundary(&x).and_then(|y| complex.coboundary(&y));
            match dd {
                Ok(z) => worst = worst.max(z.coeffs.iter().fold(0.0, |a, b| a.max(b.abs()))),
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    rep.check("dd_cochain", worst, 0.0);

    // boundary signs against the alternating formula in sorted vertex order
    let mut bad = 0usize;
    for k in 1..=n {
        for (i, s) in complex.simplices(k).iter().enumerate() {
            for &(f, sign) in complex.boundary_of(k, i) {
                let face = complex.simplex(k - 1, f);
                let missing = s.vertices().iter().position(|v| !face.vertices().contains(v)).unwrap_or(0);
                let expect = if missing % 2 == 0 { 1 } else { -1 };
                bad += (sign != expect) as usize;
            }
        }
    }
    rep.check("aux0", bad as f64, 0.0);

    let min_vol = (0..complex.count(n)).map(|c| complex.cell_volume(c)).fold(f64::INFINITY, f64::min);
    rep.check("volume_positive", if min_vol > 0.0 { 0.0 } else { 1.0 }, 0.0);

    let euler: i64 = (0..=n).map(|k| if k % 2 == 0 { 1 } else { -1 } * complex.count(k) as i64).sum();
    rep.check("euler_characteristic", (euler - 1).abs() as f64, 0.0);

    let mut violations = 0usize;
    for k in 0..=n {
        for s in complex.simplices(k) {
            let patch = complex.patch(&complex.extended_star_cells(s));
            violations += !complex.contractibility_proxy(&patch).0 as usize;
        }
    }
    rep.check("es_contractible_proxy", violations as f64, 0.0);

    let shape = complex.shape_report();
    rep.constant("shape_regularity", shape.shape_regularity_constant);
    rep.constant("h_min", shape.h_min);
    rep.constant("h_max", shape.h_max);
    rep.constant("vertices", complex.count(0) as f64);
    rep.constant("cells", complex.count(n) as f64);
    rep
}

/// Reference d-simplex {0, e_1, ..., e_d} with its ambient chart.
pub(crate) fn reference_simplex(d: usize) -> Arc<Carrier<f64>> {
    let pts: Vec<Vec<f64>> =
        (0..=d).map(|i| (0..d).map(|j| if i == j + 1 { 1.0 } else { 0.0 }).collect()).collect();
    Arc::new(Carrier::from_points((0..=d).collect(), pts, true))
}

/// dim P_s Λ^j(ℝ^d) = C(s+d, d) C(d, j), zero for negative s.
fn full_poly_dim(s: i64, d: usize, j: usize) -> usize {
    if s < 0 || j > d {
        return 0;
    }
    binomial(s as usize + d, d) * binomial(d, j)
}

pub(super) fn dimension_checks(cfg: &SuiteConfig, geo: &Arc<Geometry>, mesh: &str) -> Vec<Report> {
    let n = geo.dim();
    let mut out = Vec::new();
    for r in cfg.rs() {
        let spaces: Vec<Option<SimplexSpaces>> =
            (0..=n).map(|d| SimplexSpaces::build(reference_simplex(d), r).ok()).collect();
        let fe = FeSpace::new(geo.clone(), r);
        for k in cfg.ks(n) {
            let mut rep = Report::new("dimensions", mesh, Some(r), Some(k));
            // trace-free spaces of every face dimension
            let mut err716 = 0usize;
            for (d, sp) in spaces.iter().enumerate() {
                let expect = if k > d { 0 } else { full_poly_dim(r as i64 + k as i64 - d as i64 - 1, d, d - k) };
                let got = match sp {
                    Some(sp) if k <= d => sp.forms[k].trace_free.len(),
                    Some(_) => 0,
                    None => usize::MAX,
                };
                err716 = err716.max(got.abs_diff(expect));
                if k <= d {
                    err716 = err716.max(trace_free_dim(d, r, k).abs_diff(expect));
                }
            }
            rep.check("dim716", err716 as f64, 0.0);

            // dim P_r^-Λ^k(T) as a sum over faces, against the closed formula and the basis size
            let sum: usize = (k..=n).map(|d| binomial(n + 1, d + 1) * trace_free_dim(d, r, k)).sum();
            let closed = binomial(r + n, r + k) * binomial(r + k - 1, k);
            let basis = trimmed_basis(&reference_simplex(n), r, k);
            let g = gram(&basis, &basis, None);
            let rank = crate::densela::rank(&g, 1e-12);
            let err917 = sum.abs_diff(closed).max(trimmed_dim(n, r, k).abs_diff(closed)).max(rank.abs_diff(closed));
            rep.check("dim917", err917 as f64, 0.0);

            let global: usize = (k..=n).map(|d| geo.complex.count(d) * trace_free_dim(d, r, k)).sum();
            match fe.dimension(k) {
                Ok(dim) => rep.check("global_dimension", dim.abs_diff(global) as f64, 0.0),
                Err(e) => rep.push(super::Check::failed("global_dimension", &e)),
            }
            match fe.unisolvence_report(k) {
                Ok((cond, cells)) => {
                    rep.check("unisolvence", cond, 1e12);
                    rep.constant("dof_condition_max", cond);
                    rep.constant("cells", cells as f64);
                }
                Err(e) => rep.push(super::Check::failed("unisolvence", &e)),
            }
            rep.constant("dimension", global as f64);
            out.push(rep);
        }
    }
    out
}

/// Rank of d on the span of `forms` (L²-scaled), via the pencil (⟨du,dv⟩, ⟨u,v⟩).
fn d_rank(mass: &Mat, stiff: &Mat) -> usize {
    if mass.nrows() == 0 {
        return 0;
    }
    let ev = pencil_eigenvalues(stiff, mass);
    let top = ev.iter().cloned().fold(0.0, f64::max);
    ev.iter().filter(|&&e| e > 1e-9 * top.max(f64::MIN_POSITIVE)).count()
}

/// Eigenvalues of A x = λ B x with B symmetric positive definite.
pub(crate) fn pencil_eigenvalues(a: &Mat, b: &Mat) -> Vec<f64> {
    let bs = (b + b.transpose()) * 0.5;
    let Some(ch) = bs.cholesky() else { return vec![f64::NAN] };
    let linv = ch.l().try_inverse().unwrap_or_else(|| Mat::zeros(b.nrows(), b.ncols()));
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    c.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// max |nullity_ℓ − rank_{ℓ−1} − [ℓ = 0]| over the trimmed complex on a union of cells.
fn patch_exactness_defect(geo: &Geometry, cells: &[usize], r: usize) -> usize {
    let n = geo.dim();
    let mut prev_rank = 0usize;
    let mut worst = 0usize;
    for l in 0..=n {
        let v = PatchSpace::new(geo, cells, r, l, false);
        let mass = PatchSpace::pair_matrix(&v, false, &v, false, None);
        let rank = if l == n { 0 } else { d_rank(&mass, &PatchSpace::pair_matrix(&v, true, &v, true, None)) };
        let nullity = v.len() - rank;
        worst = worst.max(nullity.abs_diff(prev_rank + (l == 0) as usize));
        prev_rank = rank;
    }
    worst
}

pub(super) fn exactness_checks(cfg: &SuiteConfig, geo: &Arc<Geometry>, mesh: &str) -> Vec<Report> {
    let n = geo.dim();
    let complex = &geo.complex;
    let mut out = Vec::new();
    for r in cfg.rs() {
        let mut rep = Report::new("exact_sequence", mesh, Some(r), None);
        // trace-free and mean-zero local sequences on reference faces
        let mut local = 0usize;
        let mut breve = 0usize;
        for d in 1..=n {
            let Ok(sp) = SimplexSpaces::build(reference_simplex(d), r) else {
                local = usize::MAX;
                continue;
            };
            let mut prev = (0usize, 0usize);
            for k in 0..=d {
                let tf = &sp.forms[k].trace_free;
                let br = sp.forms[k].breve();
                let rank_of = |fs: &[PolyForm<f64>]| {
                    if k == d || fs.is_empty() {
                        0
                    } else {
                        let dfs: Vec<PolyForm<f64>> = fs.iter().map(PolyForm::d).collect();
                        d_rank(&gram(fs, fs, None), &gram(&dfs, &dfs, None))
                    }
                };
                let (rt, rb) = (rank_of(tf), rank_of(&br));
                // at the top degree the integral takes one more dimension when volume forms are trace-free
                let top = (k == d && !tf.is_empty()) as usize;
                local = local.max((tf.len() - rt).abs_diff(prev.0 + top));
                breve = breve.max((br.len() - rb).abs_diff(prev.1));
                prev = (rt, rb);
            }
        }
        rep.check("exactPr0", local as f64, 0.0);
        rep.check("exactPrcup", breve as f64, 0.0);

        let mut patch = 0usize;
        let mut count = 0usize;
        for k in 0..=n {
            for s in complex.simplices(k) {
                patch = patch.max(patch_exactness_defect(geo, &complex.extended_star_cells(s), r));
                count += 1;
            }
        }
        rep.check("patch_exact", patch as f64, 0.0);
        rep.constant("patches", count as f64);
        let all: Vec<usize> = (0..complex.count(n)).collect();
        rep.check("global_exact", patch_exactness_defect(geo, &all, r) as f64, 0.0);

        // ⟨du, v⟩ = ⟨u, δv⟩ when v carries a bubble factor
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x1a7 + r as u64));
        let bubble = bubble_on(&all, &|c| geo.cell(c));
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let u = random_global_form(geo, k, r as u32 + 1, &mut rng);
            let w = random_global_form(geo, k + 1, r as u32, &mut rng);
            let mut v = w.clone();
            for (c, f) in v.pieces.iter_mut() {
                *f = f.mul_poly(&bubble.pieces[c].terms[&0]);
            }
            let lhs = u.d().inner(&v);
            let rhs = match v.coderivative() {
                Ok(dv) => u.inner(&dv),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(super::rel((lhs - rhs).abs(), u.d().norm() * v.norm()));
        }
        rep.check("intparts", worst, 1e-10);
        out.push(rep);
    }
    out
}

fn rational_cells(complex: &SimplicialComplex) -> HashMap<usize, Arc<Carrier<Rational>>> {
    let n = complex.dim();
    (0..complex.count(n)).map(|c| (c, Arc::new(Carrier::of(complex, complex.simplex(n, c))))).collect()
}

/// Whitney identities R φ_σ = σ*, R W = I and d W = W 𝖽, generic over the scalar field.
fn whitney_identities<S: Scalar>(
    complex: &SimplicialComplex,
    k: usize,
    cell: &dyn Fn(usize) -> Arc<Carrier<S>>,
    face: &dyn Fn(&Simplex) -> Arc<Carrier<S>>,
    rng: &mut ChaCha8Rng,
) -> crate::Result<(f64, f64, f64)> {
    let n = complex.dim();
    let mut wd: f64 = 0.0;
    for (i, s) in complex.simplices(k).iter().enumerate() {
        let phi = whitney_form(complex, s, cell);
        for (j, v) in de_rham(complex, &phi, face)?.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            wd = wd.max((v.to_f64() - expect).abs());
        }
    }
    let x: Vec<S> = (0..complex.count(k)).map(|_| S::from_i64(rng.gen_range(-9..=9))).collect();
    let w = whitney_interpolant(complex, k, &x, cell);
    let rw = de_rham(complex, &w, face)?;
    let wd0 = rw.iter().zip(&x).map(|(a, b)| (a.clone() - b.clone()).abs_f64()).fold(0.0, f64::max);
    let mut wcommute = 0.0;
    if k < n {
        let dx: Vec<S> = complex
            .simplices(k + 1)
            .iter()
            .enumerate()
            .map(|(t, _)| {
                complex.boundary_of(k + 1, t).iter().fold(S::zero(), |acc, &(f, s)| acc + S::from_i64(s as i64) * x[f].clone())
            })
            .collect();
        let lhs = w.d();
        let rhs = whitney_interpolant(complex, k + 1, &dx, cell);
        let mut diff = lhs;
        diff.add_scaled(&rhs, &S::from_i64(-1));
        wcommute = diff
            .pieces
            .values()
            .flat_map(|f| f.canonical(f.poly_degree()).into_values().map(|c| c.abs_f64()))
            .fold(0.0, f64::max);
    }
    Ok((wd, wd0, wcommute))
}

pub(super) fn whitney_checks(cfg: &SuiteConfig, geo: &Arc<Geometry>, mesh: &str) -> Vec<Report> {
    let complex = &geo.complex;
    let n = complex.dim();
    let mut out = Vec::new();
    let rational = cfg.rational.then(|| rational_cells(complex));
    for k in cfg.ks(n) {
        let mut rep = Report::new("whitney", mesh, None, Some(k));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x3d1 + k as u64));
        let res = match &rational {
            Some(cells) => whitney_identities::<Rational>(
                complex,
                k,
                &|c| cells[&c].clone(),
                &|s| Arc::new(Carrier::of(complex, s)),
                &mut rng,
            ),
            None => whitney_identities::<f64>(complex, k, &|c| geo.cell(c), &|s| geo.carrier_of(s), &mut rng),
        };
        let tol = if cfg.rational { 0.0 } else { 1e-12 };
        match res {
            Ok((wd, wd0, wc)) => {
                rep.check("Wd", wd, tol);
                rep.check("Wd0", wd0, tol);
                if k < n {
                    rep.check("Wcommute", wc, tol);
                }
            }
            Err(e) => rep.push(super::Check::failed("Wd", &e)),
        }
        rep.constant("rational", cfg.rational as u8 as f64);

        // Stokes: R(du) = 𝖽 R(u) on random polynomial forms
        if k < n {
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let u = random_global_form(geo, k, 3, &mut rng);
                let ru = de_rham(complex, &u, &|s| geo.carrier_of(s));
                let rdu = de_rham(complex, &u.d(), &|s| geo.carrier_of(s));
                match (ru, rdu) {
                    (Ok(ru), Ok(rdu)) => {
                        let dru = complex.coboundary(&Cochain { k, coeffs: ru }).map(|c| c.coeffs);
                        match dru {
                            Ok(dru) => {
                                for (a, b) in dru.iter().zip(&rdu) {
                                    worst = worst.max((a - b).abs());
                                }
                            }
                            Err(_) => worst = f64::INFINITY,
                        }
                    }
                    _ => worst = f64::INFINITY,
                }
            }
            rep.check("drcommute", worst, 1e-10);
        }
        out.push(rep);
    }
    out
}
