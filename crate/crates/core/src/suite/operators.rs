//! Checks of the weights, the extension and U operators, and the projection itself.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fespace::DofKey;
use crate::polyform::{canonical_distance, index_sets, PiecewiseForm, PolyForm};
use crate::projection::{de_rham_cochain, random_global_form, Input};
use crate::quadrature::CALLBACK_DEGREE;
use crate::simplicial::{subsets, Simplex};

use super::{rel, Check, Level, Report, SuiteConfig};

const TOL: f64 = 1e-9;

fn seed(cfg: &SuiteConfig, tag: u64, r: usize, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ (tag << 16) ^ ((r as u64) << 8) ^ k as u64)
}

/// Global DOFs whose simplex is a face of one of the cells.
fn dofs_near(level: &Level, k: usize, cells: &[usize]) -> crate::Result<Vec<DofKey>> {
    let complex = &level.geo.complex;
    let n = complex.dim();
    let mut seen = BTreeSet::new();
    for &c in cells {
        for dim in k..=n {
            for sub in subsets(complex.simplex(n, c).vertices(), dim + 1) {
                seen.insert((dim, complex.index_of(&Simplex(sub)).expect("face")));
            }
        }
    }
    let mut out = Vec::new();
    for (dim, idx) in seen {
        out.extend(level.fe.simplex_dofs(k, dim, idx)?);
    }
    Ok(out)
}

/// Random element of M_r^k: a combination of all ψ that are not face-integral duals.
fn random_m_element(level: &Level, k: usize, rng: &mut ChaCha8Rng) -> crate::Result<(PiecewiseForm, BTreeMap<DofKey, f64>)> {
    let coeffs: BTreeMap<DofKey, f64> = level
        .fe
        .global_dofs(k)?
        .into_iter()
        .filter(|key| !key.is_volume(k))
        .map(|key| (key, rng.gen_range(-1.0..1.0)))
        .collect();
    Ok((level.fe.assemble(k, &coeffs, Some(&all_cells(level)))?, coeffs))
}

fn random_fe_element(level: &Level, k: usize, rng: &mut ChaCha8Rng) -> crate::Result<PiecewiseForm> {
    let coeffs: BTreeMap<DofKey, f64> =
        level.fe.global_dofs(k)?.into_iter().map(|key| (key, rng.gen_range(-1.0..1.0))).collect();
    level.fe.assemble(k, &coeffs, Some(&all_cells(level)))
}

fn all_cells(level: &Level) -> Vec<usize> {
    (0..level.geo.complex.count(level.geo.dim())).collect()
}

pub(super) fn weight_checks(cfg: &SuiteConfig, level: &Level, mesh: &str) -> Vec<Report> {
    let geo = &level.geo;
    let complex = &geo.complex;
    let n = complex.dim();
    let r = level.fe.r;
    let weights = &level.proj.weights;
    let mut out = Vec::new();
    for k in cfg.ks(n) {
        let mut rep = Report::new("weights", mesh, Some(r), Some(k));
        let mut degree = 0u32;
        let mut unknowns = 0usize;
        for s in 0..complex.count(k) {
            let w = match weights.get(k, s) {
                Ok(w) => w,
                Err(e) => {
                    rep.push(Check::failed("ZZ0r", &e));
                    continue;
                }
            };
            let sigma = complex.simplex(k, s);
            let znorm = w.z.norm();

            // ⟨Z, ψ⟩ = ∫_σ tr ψ over every basis function overlapping the patch
            match dofs_near(level, k, &w.patch) {
                Ok(keys) => {
                    let mut worst: f64 = 0.0;
                    for key in keys {
                        match level.fe.psi(k, key) {
                            Ok(psi) => {
                                let lhs = w.z.inner(&psi);
                                let rhs = geo.face_integral(&psi, k, s);
                                worst = worst.max((lhs - rhs).abs() / (znorm * psi.norm()).max(f64::MIN_POSITIVE));
                            }
                            Err(e) => rep.push(Check::failed("ZZ0r", &e)),
                        }
                    }
                    rep.check("ZZ0r", worst, TOL);
                }
                Err(e) => rep.push(Check::failed("ZZ0r", &e)),
            }

            // normal continuity: ⋆Z has single-valued traces and vanishes on the patch boundary
            match w.z.hodge_star(n) {
                Ok(sz) => {
                    let defect = sz.conformity_defect(complex, &|f| geo.carrier_of(f), true);
                    rep.check("ZZ1r", rel(defect, znorm), TOL);
                }
                Err(e) => rep.push(Check::failed("ZZ1r", &e)),
            }

            // δZ^k(σ) = Z^{k-1}(∂σ)
            if k >= 1 {
                let mut rhs = PiecewiseForm::zero(k - 1, w.z.conformity);
                let mut ok = true;
                for &(f, sign) in complex.boundary_of(k, s) {
                    match weights.get(k - 1, f) {
                        Ok(wf) => rhs.add_scaled(&wf.z, &(sign as f64)),
                        Err(e) => {
                            rep.push(Check::failed("ZZ2r", &e));
                            ok = false;
                        }
                    }
                }
                if ok {
                    match w.z.coderivative() {
                        Ok(dz) => rep.check("ZZ2r", rel(dz.distance(&rhs), rhs.norm()), TOL),
                        Err(e) => rep.push(Check::failed("ZZ2r", &e)),
                    }
                }
            }

            let es: BTreeSet<usize> = complex.extended_star_cells(sigma).into_iter().collect();
            let outside = w.z.support().difference(&es).count();
            rep.check("ZZ3r", outside as f64, 0.0);
            let bubble_out = w.bubble_cells.iter().filter(|c| !es.contains(c)).count();
            rep.check("bubble_support", bubble_out as f64, 0.0);

            if k == 1 {
                rep.check("compat_k1", w.log.compat, crate::weights::COMPAT_TOL);
            } else if k >= 2 {
                rep.check("compat_dk", w.log.compat, crate::weights::COMPAT_TOL);
            }
            if k >= 1 && k < n {
                rep.check("potential_eta", w.log.potential_residual, crate::weights::POTENTIAL_TOL);
            }
            if k >= 1 {
                rep.check("kernel_rhs", w.log.kernel_rhs, TOL);
                rep.check("solve_residual", w.log.solve_residual, TOL);
            }
            degree = degree.max(w.log.degree);
            unknowns = unknowns.max(w.log.unknowns);
            rep.constant("z_norm_max", rep.constants.get("z_norm_max").copied().unwrap_or(0.0).max(znorm));
        }
        rep.constant("z_degree_max", degree as f64);
        rep.constant("unknowns_max", unknowns as f64);
        out.push(rep);
    }
    out
}

pub(super) fn extension_checks(cfg: &SuiteConfig, level: &Level, mesh: &str) -> Vec<Report> {
    let geo = &level.geo;
    let complex = &geo.complex;
    let n = complex.dim();
    let fe = &level.fe;
    let r = fe.r;
    let mut out = Vec::new();
    for k in cfg.ks(n) {
        let mut rep = Report::new("extension", mesh, Some(r), Some(k));
        let mut rng = seed(cfg, 0xe1, r, k);
        for dim in k..=n {
            for idx in 0..complex.count(dim) {
                if let Err(e) = extension_at(level, k, dim, idx, &mut rng, &mut rep) {
                    rep.push(Check::failed("trE", &e));
                }
            }
        }
        // M_r^k decomposition round trip
        let res = random_m_element(level, k, &mut rng).and_then(|(u, coeffs)| {
            let got = fe.m_decompose(k, &u, 1e-9)?;
            let worst = coeffs.iter().map(|(key, v)| (got.get(key).copied().unwrap_or(0.0) - v).abs()).fold(0.0, f64::max);
            let back = fe.assemble(k, &got, Some(&all_cells(level)))?;
            Ok(worst.max(rel(back.distance(&u), u.norm())))
        });
        rep.record("m_decompose", TOL, res, |e| *e);
        out.push(rep);
    }
    out
}

fn random_combination(basis: &[PolyForm<f64>], rng: &mut ChaCha8Rng) -> Option<PolyForm<f64>> {
    let first = basis.first()?;
    let mut f = PolyForm::zero(&first.carrier, first.k);
    for b in basis {
        f.add_scaled(b, &rng.gen_range(-1.0..1.0));
    }
    Some(f)
}

fn extension_at(
    level: &Level,
    k: usize,
    dim: usize,
    idx: usize,
    rng: &mut ChaCha8Rng,
    rep: &mut Report,
) -> crate::Result<()> {
    let fe = &level.fe;
    let complex = &level.geo.complex;
    let Some(sp) = fe.form_spaces(k, dim, idx)? else { return Ok(()) };
    let fs = &sp.forms[k];
    let tau = complex.simplex(dim, idx);
    let star: BTreeSet<usize> = complex.star_cells(tau).into_iter().collect();

    // tr E ρ = ρ on the trace-free space
    if let Some(rho) = random_combination(&fs.trace_free, rng) {
        let e = fe.extend(k, dim, idx, &rho)?;
        let t = e.trace(&sp.carrier).unwrap_or_else(|| PolyForm::zero(&sp.carrier, k));
        rep.check("trE", rel(canonical_distance(&t, &rho), rho.max_abs_coeff()), 1e-10);
    }
    // E tr v = v on G(σ)
    let mut worst: f64 = 0.0;
    for key in fe.simplex_dofs(k, dim, idx)? {
        let v = fe.psi(k, key)?;
        let t = v.trace(&sp.carrier).expect("σ lies in its star");
        let e = fe.extend(k, dim, idx, &t)?;
        worst = worst.max(rel(e.distance(&v), v.norm()));
    }
    rep.check("trEsig", worst, 1e-10);
    // d E ρ = E dρ on the mean-zero space
    if k < dim {
        if let Some(rho) = random_combination(&fs.breve(), rng) {
            let lhs = fe.extend(k, dim, idx, &rho)?.d();
            let rhs = fe.extend(k + 1, dim, idx, &rho.d())?;
            rep.check("commuteE", rel(lhs.distance(&rhs), lhs.norm()), 1e-10);
        }
    }

    // U operators
    let us = level.proj.u_op(k, dim, idx)?;
    let gs = fe.g_basis(k, dim, idx)?;
    if us.len() != gs.len() {
        rep.check("UU2-1", f64::INFINITY, TOL);
        return Ok(());
    }
    let support_out: usize = us.iter().map(|u| u.support().difference(&star).count()).sum();
    rep.check("UU3", support_out as f64, 0.0);

    let cells: Vec<usize> = star.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for key in dofs_near(level, k, &cells)? {
        if key.is_volume(k) {
            continue;
        }
        let psi = fe.psi(k, key)?;
        let Some(t) = psi.trace(&sp.carrier) else { continue };
        for (u, g) in us.iter().zip(&gs) {
            let lhs = psi.inner(u);
            let rhs = fs.ddc_inner(&t, g);
            worst = worst.max(rel((lhs - rhs).abs(), psi.norm() * u.norm()));
        }
    }
    rep.check("UU2-1", worst, TOL);

    if !fs.complement.is_empty() {
        let dg: Vec<PolyForm<f64>> = fs.complement.iter().map(PolyForm::d).collect();
        let up = level.proj.bubble_solve(k + 1, dim, idx, &dg)?;
        let ne = fs.exact.len();
        let mut worst: f64 = 0.0;
        for (i, w) in up.iter().enumerate() {
            let lhs = w.coderivative()?;
            worst = worst.max(rel(lhs.distance(&us[ne + i]), us[ne + i].norm()));
        }
        rep.check("UU3-2", worst, TOL);
    }
    Ok(())
}

/// Evaluates a global polynomial form through the piece on cell 0, extended to all of ℝⁿ.
fn as_callback(u: &PiecewiseForm) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
    let piece = u.pieces.values().next().expect("form with pieces");
    let sets = index_sets(piece.carrier.dim, u.k);
    move |x: &[f64]| {
        let vals = piece.eval(&piece.carrier.barycentric(x));
        sets.iter().map(|s| vals.get(s).copied().unwrap_or(0.0)).collect()
    }
}

pub(super) fn projection_checks(cfg: &SuiteConfig, level: &Level, mesh: &str) -> Vec<Report> {
    let n = level.geo.dim();
    let mut out = Vec::new();
    for k in cfg.ks(n) {
        let mut rep = Report::new("projection", mesh, Some(level.fe.r), Some(k));
        if let Err(e) = projection_at(cfg, level, k, &mut rep) {
            rep.push(Check::failed("projection", &e));
        }
        out.push(rep);
    }
    out
}

fn projection_at(cfg: &SuiteConfig, level: &Level, k: usize, rep: &mut Report) -> crate::Result<()> {
    let geo = &level.geo;
    let complex = &geo.complex;
    let n = complex.dim();
    let fe = &level.fe;
    let proj = &level.proj;
    let r = fe.r;
    let mut rng = seed(cfg, 0x9a, r, k);

    // idempotence on the whole basis
    let mut worst: f64 = 0.0;
    for key in fe.global_dofs(k)? {
        let psi = fe.psi(k, key)?;
        let p = proj.project(k, &Input::Form(&psi), None)?;
        worst = worst.max(rel(p.distance(&psi), psi.norm()));
    }
    rep.check("idempotence", worst, TOL);

    let mut worst: f64 = 0.0;
    for s in 0..complex.count(k) {
        let phi = geo.whitney(k, s);
        let p = proj.project(k, &Input::Form(&phi), None)?;
        worst = worst.max(rel(p.distance(&phi), phi.norm()));
    }
    rep.check("whitney_reproduction", worst, TOL);

    if k == 0 {
        let mut one = PiecewiseForm::zero(0, crate::polyform::Conformity::Trace);
        for c in all_cells(level) {
            let carrier = geo.cell(c);
            one.pieces.insert(c, PolyForm::scalar(&carrier, crate::polyform::Poly::constant(carrier.nvars(), 1.0)));
        }
        let p = proj.project(0, &Input::Form(&one), None)?;
        rep.check("pi_one", rel(p.distance(&one), one.norm()), TOL);
    }

    // commutation with d on global polynomials of degree r + 2
    if k < n {
        let mut worst_pi: f64 = 0.0;
        let mut worst_q: f64 = 0.0;
        let mut worst_low: f64 = 0.0;
        for i in 0..cfg.samples {
            let u = random_global_form(geo, k, r as u32 + 2, &mut rng);
            let du = u.d();
            let scale = u.norm().max(du.norm());
            let lhs = proj.project(k, &Input::Form(&u), None)?.d();
            let rhs = proj.project(k + 1, &Input::Form(&du), None)?;
            worst_pi = worst_pi.max(rel(lhs.distance(&rhs), scale));
            if i < 3 {
                let lhs = proj.q_op(k, &Input::Form(&u), None)?.d();
                let rhs = proj.q_op(k + 1, &Input::Form(&du), None)?;
                worst_q = worst_q.max(rel(lhs.distance(&rhs), scale));
                let lhs = proj.pi_low(k, &Input::Form(&u), None)?.d();
                let rhs = proj.pi_low(k + 1, &Input::Form(&du), None)?;
                worst_low = worst_low.max(rel(lhs.distance(&rhs), scale));
            }
        }
        rep.check("commutePi", worst_pi, TOL);
        rep.check("commuteQ", worst_q, TOL);
        rep.check("commute_Pi1r", worst_low, TOL);
        rep.constant("commute_samples", cfg.samples as f64);
    }

    // locality: footprint and perturbation outside the neighbourhood
    let mut foot_out = 0usize;
    let mut perturb: f64 = 0.0;
    let u = random_global_form(geo, k, r as u32 + 1, &mut rng);
    let noise = random_global_form(geo, k, r as u32 + 1, &mut rng);
    for cell in 0..complex.count(n) {
        let op = proj.local_operator(k, cell)?;
        let t = complex.simplex(n, cell);
        let hood: BTreeSet<usize> = if r == 1 {
            complex.extended_star_cells(t).into_iter().collect()
        } else {
            complex.extended_star2_cells(t).into_iter().collect()
        };
        foot_out += op.footprint().difference(&hood).count();
        let mut v = u.clone();
        for (c, f) in v.pieces.iter_mut() {
            if !hood.contains(c) {
                f.add_scaled(&noise.pieces[c], &10.0);
            }
        }
        let a = op.apply(&Input::Form(&u));
        let b = op.apply(&Input::Form(&v));
        perturb = perturb.max(rel(canonical_distance(&a, &b), a.max_abs_coeff()));
    }
    rep.check("locality", foot_out as f64 + if perturb <= 1e-12 { 0.0 } else { 1.0 }, 0.0);
    rep.constant("locality_perturbation", perturb);

    if r == 1 {
        let p = proj.project(k, &Input::Form(&u), None)?;
        let q = proj.pi_low(k, &Input::Form(&u), None)?;
        rep.check("r1_coincide", rel(p.distance(&q), u.norm()), TOL);
    }

    // Q is the identity on M_r^k and maps into it
    let (m, _) = random_m_element(level, k, &mut rng)?;
    let qm = proj.q_op(k, &Input::Form(&m), None)?;
    rep.check("Q_identity", rel(qm.distance(&m), m.norm()), TOL);
    let qu = proj.q_op(k, &Input::Form(&u), None)?;
    let integrals = de_rham_cochain(geo, &qu)?;
    let worst = integrals.coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    rep.check("Q_lands_in_M", rel(worst, u.norm()), TOL);

    // Π_{1,r} is the Whitney interpolant on the finite element space
    let v = random_fe_element(level, k, &mut rng)?;
    let low = proj.pi_low(k, &Input::Form(&v), None)?;
    let x = de_rham_cochain(geo, &v)?;
    let w = crate::projection::whitney_interpolant(complex, k, &x.coeffs, &|c| geo.cell(c));
    rep.check("Pi1r_prksprk", rel(low.distance(&w), v.norm()), TOL);

    // callback path against the exact path on a global polynomial
    let f = as_callback(&u);
    let extra = r as u32 + 1;
    let cb = Input::Callback { k, f: &f, extra };
    let a = proj.project(k, &cb, None)?;
    let b = proj.project(k, &Input::Form(&u), None)?;
    rep.check("callback_vs_exact", rel(a.distance(&b), u.norm()), TOL);
    rep.constant("callback_degree", CALLBACK_DEGREE as f64);

    // local operator norm on an interior cell
    let cell = super::scaling::center_cell(complex);
    let t = complex.simplex(n, cell);
    let domain = if r == 1 { complex.extended_star_cells(t) } else { complex.extended_star2_cells(t) };
    let nrm = proj.local_norm(k, cell, &domain, r as u32 + 1)?;
    rep.constant("norm_max", nrm);
    Ok(())
}
