//! Scaling laws measured on congruent simplices of uniformly refined structured meshes.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::densela::{self, Mat};
use crate::fespace::{Geometry, PatchSpace};
use crate::polyform::{bubble_on, PiecewiseForm};
use crate::simplicial::{Simplex, SimplicialComplex};

use super::algebra::pencil_eigenvalues;
use super::{Check, Level, Report, SuiteConfig};

/// Which scaling laws to measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalingSelect {
    pub z: bool,
    pub u: bool,
    pub whitney: bool,
    pub norm: bool,
    /// also measure operator norms in three dimensions (slow)
    pub norm_3d: bool,
    pub dr0: bool,
    pub bubble1: bool,
    pub poincare: bool,
    /// largest r measured in three dimensions
    pub max_r_3d: usize,
}

impl Default for ScalingSelect {
    fn default() -> Self {
        ScalingSelect {
            z: true,
            u: true,
            whitney: true,
            norm: true,
            norm_3d: false,
            dr0: true,
            bubble1: true,
            poincare: true,
            max_r_3d: 1,
        }
    }
}

/// Coarsest mesh of the refinement family. Four cells per side keep every extended star of the
/// centre cell congruent to its refinements.
const BASE: usize = 4;
/// Operator norms see es²(T), which needs twice the room.
const NORM_BASE: usize = 8;

const EXPONENT_TOL: f64 = 0.1;
const DRIFT_TOL: f64 = 0.25;
const POINCARE_DRIFT_TOL: f64 = 0.2;

/// Vertex closest to the centre of the unit cube.
pub fn center_vertex(complex: &SimplicialComplex) -> usize {
    let d = |v: usize| complex.point(v).iter().map(|x| (x - 0.5) * (x - 0.5)).sum::<f64>();
    (0..complex.count(0)).min_by(|&a, &b| d(a).total_cmp(&d(b))).expect("non-empty mesh")
}

/// First cell around the centre vertex.
pub fn center_cell(complex: &SimplicialComplex) -> usize {
    let c = center_vertex(complex);
    complex.star_cells(&Simplex(vec![c]))[0]
}

/// Vertex offsets of the centre cell in units of the mesh size.
fn pattern(n: usize) -> Vec<Vec<f64>> {
    let coarse = SimplicialComplex::structured(n, 2).expect("structured mesh");
    let cell = coarse.simplex(n, center_cell(&coarse));
    cell.vertices().iter().map(|&v| coarse.point(v).iter().map(|x| (x - 0.5) * 2.0).collect()).collect()
}

/// Vertices of the centre cell of `structured(n, m)`, in an order that does not depend on m.
pub fn congruent_cell(complex: &SimplicialComplex, m: usize) -> Vec<usize> {
    let n = complex.dim();
    let h = 1.0 / m as f64;
    pattern(n)
        .iter()
        .map(|o| {
            let target: Vec<f64> = o.iter().map(|x| 0.5 + x * h).collect();
            (0..complex.count(0))
                .find(|&v| complex.point(v).iter().zip(&target).all(|(a, b)| (a - b).abs() < 1e-9 * h))
                .expect("pattern vertex in the mesh")
        })
        .collect()
}

/// Least-squares slope of log N against log h.
fn exponent(hs: &[f64], ns: &[f64]) -> f64 {
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Exponent check: |e - e*| ≤ 0.1 max(|e*|, 1).
fn exponent_check(rep: &mut Report, id: &str, hs: &[f64], ns: &[f64], expect: f64) {
    if ns.iter().any(|v| !(v.is_finite() && *v > 0.0)) || hs.len() < 2 {
        rep.check(id, f64::INFINITY, 0.0);
        return;
    }
    let e = exponent(hs, ns);
    rep.check(id, (e - expect).abs(), EXPONENT_TOL * expect.abs().max(1.0));
    rep.constant(&format!("{id}_exponent"), e);
    rep.constant(&format!("{id}_expected"), expect);
    drift_constants(rep, id, hs, ns, expect);
}

/// Records C_l = N_l / h_l^e and returns max_l |C_l / C_0 - 1|.
fn drift_constants(rep: &mut Report, id: &str, hs: &[f64], ns: &[f64], expect: f64) -> f64 {
    let cs: Vec<f64> = hs.iter().zip(ns).map(|(h, v)| v / h.powf(expect)).collect();
    for (l, c) in cs.iter().enumerate() {
        rep.constant(&format!("{id}_C{l}"), *c);
    }
    cs.iter().map(|c| (c / cs[0] - 1.0).abs()).fold(0.0, f64::max)
}

fn drift_check(rep: &mut Report, id: &str, hs: &[f64], ns: &[f64], expect: f64, tol: f64) {
    if ns.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        rep.check(id, f64::INFINITY, tol);
        return;
    }
    let drift = drift_constants(rep, id, hs, ns, expect);
    rep.check(id, drift, tol);
}

struct Family {
    hs: Vec<f64>,
    geos: Vec<Arc<Geometry>>,
    /// pattern-ordered centre cell vertices per level
    cells: Vec<Vec<usize>>,
    levels: BTreeMap<(usize, usize), Level>,
}

impl Family {
    fn new(n: usize, base: usize, count: usize) -> crate::Result<Self> {
        let mut hs = Vec::new();
        let mut geos = Vec::new();
        let mut cells = Vec::new();
        for l in 0..count {
            let m = base << l;
            let complex = SimplicialComplex::structured(n, m)?;
            cells.push(congruent_cell(&complex, m));
            hs.push(1.0 / m as f64);
            geos.push(Geometry::new(complex));
        }
        Ok(Family { hs, geos, cells, levels: BTreeMap::new() })
    }

    /// Index of the congruent d-face at level l.
    fn face(&self, l: usize, d: usize) -> (usize, Simplex) {
        let s = Simplex::new(self.cells[l][..=d].to_vec());
        (self.geos[l].complex.index_of(&s).expect("face of the centre cell"), s)
    }

    fn cell(&self, l: usize) -> usize {
        self.face(l, self.geos[l].dim()).0
    }

    fn level(&mut self, l: usize, r: usize) -> &Level {
        let geo = self.geos[l].clone();
        self.levels.entry((l, r)).or_insert_with(|| Level::new(geo, r, Default::default()))
    }
}

/// sup over u in P_r^-Λ^k(st σ) of |∫_σ tr u| / ‖u‖.
fn face_functional_norm(geo: &Geometry, sigma: &Simplex, r: usize) -> crate::Result<f64> {
    let cells = geo.complex.star_cells(sigma);
    let v = PatchSpace::new(geo, &cells, r, sigma.dim(), false);
    let m = PatchSpace::pair_matrix(&v, false, &v, false, None);
    let f = v.face_integrals(geo, sigma, false);
    let x = densela::solve_spd_vec(&m, &f)?;
    Ok(f.dot(&x).max(0.0).sqrt())
}

/// Largest ‖√𝔟 dρ‖ / ‖𝔟 dρ‖ over ρ in P_r^-Λ^k(es σ) with dρ ≠ 0.
fn bubble_equivalence(geo: &Geometry, sigma: &Simplex, r: usize) -> crate::Result<f64> {
    let cells = geo.complex.extended_star_cells(sigma);
    let v = PatchSpace::new(geo, &cells, r, sigma.dim(), false);
    let b = bubble_on(&cells, &|c| geo.cell(c));
    let mut b2 = b.clone();
    for f in b2.pieces.values_mut() {
        *f = f.mul_poly(&f.terms[&0]);
    }
    let a = PatchSpace::pair_matrix(&v, true, &v, true, Some(&b));
    let bb = PatchSpace::pair_matrix(&v, true, &v, true, Some(&b2));
    let q = densela::orthonormal_span(&bb, 1e-10);
    if q.ncols() == 0 {
        return Ok(f64::NAN);
    }
    let c: Mat = q.transpose() * a * &q;
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigen().eigenvalues.max().max(0.0).sqrt())
}

/// Smallest nonzero λ with (dv, dw) = λ (v, w) on P_r^-Λ^k(es σ) with vanishing boundary trace.
fn poincare_eigenvalue(geo: &Geometry, sigma: &Simplex, r: usize) -> f64 {
    let cells = geo.complex.extended_star_cells(sigma);
    let v = PatchSpace::new(geo, &cells, r, sigma.dim(), true);
    let m = PatchSpace::pair_matrix(&v, false, &v, false, None);
    let s = PatchSpace::pair_matrix(&v, true, &v, true, None);
    let ev = pencil_eigenvalues(&s, &m);
    let top = ev.iter().cloned().fold(0.0, f64::max);
    ev.into_iter().filter(|&e| e > 1e-9 * top).fold(f64::INFINITY, f64::min)
}

fn frobenius(forms: &[PiecewiseForm]) -> f64 {
    forms.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
}

pub(super) fn scaling_checks(cfg: &SuiteConfig, n: usize, mesh: &str) -> Vec<Report> {
    let sel = cfg.scaling;
    let label = format!("structured n={n} m={BASE}*2^l, l<{}", cfg.levels.max(2));
    let count = cfg.levels.max(2);
    let mut out = Vec::new();
    let _ = mesh;
    let mut fam = match Family::new(n, BASE, count) {
        Ok(f) => f,
        Err(e) => {
            let mut rep = Report::new("scaling", &label, None, None);
            rep.push(Check::failed("scaling_family", &e));
            return vec![rep];
        }
    };
    let mut norm_fam = if sel.norm && (n < 3 || sel.norm_3d) { Family::new(n, NORM_BASE, count).ok() } else { None };
    let rs: Vec<usize> = cfg.rs().into_iter().filter(|&r| n < 3 || r <= sel.max_r_3d).collect();

    for (ri, &r) in rs.iter().enumerate() {
        for k in cfg.ks(n) {
            let mut rep = Report::new("scaling", &label, Some(r), Some(k));
            let hs = fam.hs.clone();
            let kf = -(n as f64) / 2.0 + k as f64;

            if sel.z {
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let (idx, _) = fam.face(l, k);
                        fam.level(l, r).proj.weights.get(k, idx).map(|w| w.z.norm()).unwrap_or(f64::NAN)
                    })
                    .collect();
                exponent_check(&mut rep, "ZZ4r", &hs, &ns, kf);
            }

            if sel.u && k >= 1 {
                for dim in k..=n {
                    let ns: Vec<f64> = (0..count)
                        .map(|l| {
                            let (idx, _) = fam.face(l, dim);
                            let lv = fam.level(l, r);
                            let ne = match lv.fe.form_spaces(k, dim, idx) {
                                Ok(Some(sp)) => sp.forms[k].exact.len(),
                                _ => return f64::NAN,
                            };
                            if ne == 0 {
                                return 0.0;
                            }
                            lv.proj.u_op(k, dim, idx).map(|us| frobenius(&us[..ne])).unwrap_or(f64::NAN)
                        })
                        .collect();
                    if ns.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    exponent_check(&mut rep, "UU4", &hs, &ns, (dim as f64 - n as f64) / 2.0);
                    let key = format!("UU4_dim{dim}_exponent");
                    if let Some(&e) = rep.constants.get("UU4_exponent") {
                        rep.constant(&key, e);
                    }
                }
            }

            if sel.whitney && ri == 0 {
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let (idx, _) = fam.face(l, k);
                        fam.geos[l].whitney(k, idx).norm()
                    })
                    .collect();
                drift_check(&mut rep, "Wbound", &hs, &ns, n as f64 / 2.0 - k as f64, DRIFT_TOL);
            }

            if sel.dr0 {
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let (_, s) = fam.face(l, k);
                        face_functional_norm(&fam.geos[l], &s, r).unwrap_or(f64::NAN)
                    })
                    .collect();
                exponent_check(&mut rep, "dr0", &hs, &ns, kf);
            }

            if sel.bubble1 && k < n {
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let (_, s) = fam.face(l, k);
                        bubble_equivalence(&fam.geos[l], &s, r).unwrap_or(f64::NAN)
                    })
                    .collect();
                drift_check(&mut rep, "bubble1", &hs, &ns, 0.0, DRIFT_TOL);
            }

            if sel.poincare && k < n {
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let (_, s) = fam.face(l, k);
                        1.0 / (fam.hs[l] * poincare_eigenvalue(&fam.geos[l], &s, r).sqrt())
                    })
                    .collect();
                drift_check(&mut rep, "poincare", &hs, &ns, 0.0, POINCARE_DRIFT_TOL);
            }

            if let Some(nf) = norm_fam.as_mut() {
                let hs = nf.hs.clone();
                let ns: Vec<f64> = (0..count)
                    .map(|l| {
                        let cell = nf.cell(l);
                        let geo = nf.geos[l].clone();
                        let t = geo.complex.simplex(n, cell).clone();
                        let domain = if r == 1 {
                            geo.complex.extended_star_cells(&t)
                        } else {
                            geo.complex.extended_star2_cells(&t)
                        };
                        nf.level(l, r).proj.local_norm(k, cell, &domain, r as u32 + 1).unwrap_or(f64::NAN)
                    })
                    .collect();
                drift_check(&mut rep, "norm_drift", &hs, &ns, 0.0, DRIFT_TOL);
            }
            out.push(rep);
        }
    }
    out
}
