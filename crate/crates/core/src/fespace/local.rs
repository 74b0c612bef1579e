//! Spaces attached to a single simplex: the trimmed basis, its trace-free part and the
//! splitting of that part into kernel and complement of d.

use std::sync::Arc;

use crate::densela::{self, Mat};
use crate::error::{FeecError, Result};
use crate::polyform::{
    mono_exps, mono_from, monomials_of_degree, whitney_local, Carrier, IndexSet, Mono, Poly, PolyForm,
};
use crate::quadrature::gram;
use crate::scalar::Scalar;
use crate::simplicial::subsets;

use super::binomial;

/// Basis λ^α φ_σ of P_r^-Λ^k on a carrier, |α| = r - 1, α_i = 0 below min σ.
pub fn trimmed_basis<S: Scalar>(carrier: &Arc<Carrier<S>>, r: usize, k: usize) -> Vec<PolyForm<S>> {
    assert!(r >= 1, "trimmed spaces start at r = 1");
    let nv = carrier.nvars();
    if k + 1 > nv {
        return Vec::new();
    }
    let verts: Vec<usize> = (0..nv).collect();
    let monos = monomials_of_degree(nv, (r - 1) as u32);
    let mut out = Vec::new();
    for sigma in subsets(&verts, k + 1) {
        let phi = whitney_local(carrier, &sigma);
        for &m in &monos {
            if mono_exps(m, nv).iter().take(sigma[0]).any(|&e| e > 0) {
                continue;
            }
            out.push(phi.mul_poly(&Poly::monomial(nv, m, S::one())));
        }
    }
    out
}

/// dim P_r^-Λ^k(R^m).
pub fn trimmed_dim(m: usize, r: usize, k: usize) -> usize {
    if k > m || r == 0 {
        return 0;
    }
    binomial(r + m, r + k) * binomial(r + k - 1, k)
}

/// dim P_sΛ^j(R^d), zero for negative s.
pub fn full_dim(s: i64, d: usize, j: usize) -> usize {
    if s < 0 || j > d {
        return 0;
    }
    binomial(s as usize + d, d) * binomial(d, j)
}

/// dim of the trace-free part of P_r^-Λ^k on an m-simplex.
pub fn trace_free_dim(m: usize, r: usize, k: usize) -> usize {
    if k > m {
        return 0;
    }
    full_dim(r as i64 + k as i64 - m as i64 - 1, m, m - k)
}

/// The spaces of one form degree on one simplex.
#[derive(Clone, Debug)]
pub struct FormSpaces {
    pub k: usize,
    /// trimmed basis of the whole local space
    pub full: Vec<PolyForm<f64>>,
    /// L²-orthonormal basis of the trace-free subspace
    pub trace_free: Vec<PolyForm<f64>>,
    /// L²-orthonormal basis of its d-kernel
    pub kernel: Vec<PolyForm<f64>>,
    /// the L² complement of the kernel, orthonormal for the graph inner product
    pub complement: Vec<PolyForm<f64>>,
    /// d applied to the complement one degree down
    pub exact: Vec<PolyForm<f64>>,
    /// volume form (pointwise norm one) when k equals the simplex dimension; pairing with it integrates
    pub volume: Option<PolyForm<f64>>,
}

impl FormSpaces {
    /// Orthonormal basis of the mean-zero trace-free space: exact part, then complement.
    pub fn breve(&self) -> Vec<PolyForm<f64>> {
        self.exact.iter().chain(&self.complement).cloned().collect()
    }

    /// Basis used for degrees of freedom: the volume form (if any) followed by `breve`.
    pub fn dof_basis(&self) -> Vec<PolyForm<f64>> {
        self.volume.iter().chain(&self.exact).chain(&self.complement).cloned().collect()
    }

    pub fn dof_count(&self) -> usize {
        self.volume.is_some() as usize + self.exact.len() + self.complement.len()
    }

    /// Matrix of the graph-type inner product ⟨P a, P b⟩ + ⟨da, db⟩, P the projection onto the kernel.
    pub fn ddc_gram(&self, a: &[PolyForm<f64>], b: &[PolyForm<f64>]) -> Mat {
        let ga = gram(a, &self.kernel, None);
        let gb = gram(b, &self.kernel, None);
        let da: Vec<PolyForm<f64>> = a.iter().map(PolyForm::d).collect();
        let db: Vec<PolyForm<f64>> = b.iter().map(PolyForm::d).collect();
        let mut out = ga * gb.transpose();
        if a.first().is_some_and(|f| f.k < f.dim()) {
            out += gram(&da, &db, None);
        }
        out
    }

    pub fn ddc_inner(&self, u: &PolyForm<f64>, v: &PolyForm<f64>) -> f64 {
        self.ddc_gram(std::slice::from_ref(u), std::slice::from_ref(v))[(0, 0)]
    }
}

/// All form degrees on one simplex for a fixed polynomial degree r.
#[derive(Clone, Debug)]
pub struct SimplexSpaces {
    pub carrier: Arc<Carrier<f64>>,
    pub r: usize,
    pub forms: Vec<FormSpaces>,
}

fn combine(basis: &[PolyForm<f64>], coeffs: &Mat, carrier: &Arc<Carrier<f64>>, k: usize) -> Vec<PolyForm<f64>> {
    (0..coeffs.ncols())
        .map(|j| {
            let mut f = PolyForm::zero(carrier, k);
            for (i, b) in basis.iter().enumerate() {
                let c = coeffs[(i, j)];
                if c != 0.0 {
                    f.add_scaled(b, &c);
                }
            }
            f
        })
        .collect()
}

/// Coefficient matrix with rows indexed by canonical (index set, monomial) keys.
fn coefficient_matrix(forms: &[Vec<PolyForm<f64>>], deg: u32) -> Mat {
    // forms[col] is a list of blocks (e.g. traces on several facets) stacked vertically
    let mut keys: std::collections::BTreeMap<(usize, IndexSet, Mono), usize> = Default::default();
    let canon: Vec<Vec<std::collections::BTreeMap<(IndexSet, Mono), f64>>> =
        forms.iter().map(|blocks| blocks.iter().map(|f| f.canonical(deg)).collect()).collect();
    for col in &canon {
        for (b, map) in col.iter().enumerate() {
            for &(s, m) in map.keys() {
                let next = keys.len();
                keys.entry((b, s, m)).or_insert(next);
            }
        }
    }
    let mut out = Mat::zeros(keys.len(), forms.len());
    for (j, col) in canon.iter().enumerate() {
        for (b, map) in col.iter().enumerate() {
            for (&(s, m), &v) in map {
                out[(keys[&(b, s, m)], j)] = v;
            }
        }
    }
    out
}

impl SimplexSpaces {
    pub fn build(carrier: Arc<Carrier<f64>>, r: usize) -> Result<Self> {
        let m = carrier.nvars() - 1;
        let facets: Vec<Arc<Carrier<f64>>> = if m == 0 {
            Vec::new()
        } else {
            subsets(&(0..=m).collect::<Vec<_>>(), m)
                .into_iter()
                .map(|loc| {
                    let verts = loc.iter().map(|&i| carrier.vertices[i]).collect();
                    let pts = loc.iter().map(|&i| carrier.points[i].clone()).collect();
                    Arc::new(Carrier::from_points(verts, pts, false))
                })
                .collect()
        };
        let mut forms: Vec<FormSpaces> = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let full = trimmed_basis(&carrier, r, k);
            if full.len() != trimmed_dim(m, r, k) {
                return Err(FeecError::Dimension(format!(
                    "trimmed basis on {:?}: {} functions, expected {}",
                    carrier.vertices,
                    full.len(),
                    trimmed_dim(m, r, k)
                )));
            }
            // trace-free part: null space of the facet traces
            let trace_free = if k < m {
                let traces: Vec<Vec<PolyForm<f64>>> = full
                    .iter()
                    .map(|f| facets.iter().map(|fc| f.trace(fc).expect("facet")).collect())
                    .collect();
                let tmat = coefficient_matrix(&traces, r as u32);
                let null = densela::nullspace(&tmat, densela::TOL.rank);
                combine(&full, &null, &carrier, k)
            } else {
                full.clone()
            };
            let g = gram(&trace_free, &trace_free, None);
            let on = densela::orthonormal_span(&g, 1e-13);
            let trace_free = combine(&trace_free, &on, &carrier, k);
            let expected = trace_free_dim(m, r, k);
            if trace_free.len() != expected {
                return Err(FeecError::Unisolvence {
                    face: carrier.vertices.clone(),
                    detail: format!("trace-free space of {k}-forms has dimension {}, expected {expected}", trace_free.len()),
                });
            }
            // kernel and complement of d, in L²-orthonormal coordinates
            let (kernel, comp) = if k < m && !trace_free.is_empty() {
                let dforms: Vec<Vec<PolyForm<f64>>> = trace_free.iter().map(|f| vec![f.d()]).collect();
                let dmat = coefficient_matrix(&dforms, r as u32);
                let null = densela::nullspace(&dmat, densela::TOL.rank);
                let comp = densela::nullspace(&null.transpose(), densela::TOL.rank);
                let comp = if null.ncols() == 0 { Mat::identity(trace_free.len(), trace_free.len()) } else { comp };
                (combine(&trace_free, &null, &carrier, k), combine(&trace_free, &comp, &carrier, k))
            } else {
                (trace_free.clone(), Vec::new())
            };
            let complement = if comp.is_empty() {
                comp
            } else {
                let d: Vec<PolyForm<f64>> = comp.iter().map(PolyForm::d).collect();
                let on = densela::orthonormalize(&gram(&d, &d, None));
                if on.dropped > 0 {
                    return Err(FeecError::Unisolvence {
                        face: carrier.vertices.clone(),
                        detail: format!("d is not injective on the complement of its kernel ({k}-forms)"),
                    });
                }
                combine(&comp, &on.coeffs, &carrier, k)
            };
            let exact: Vec<PolyForm<f64>> =
                if k == 0 { Vec::new() } else { forms[k - 1].complement.iter().map(PolyForm::d).collect() };
            let volume = (k == m).then(|| PolyForm::volume_form(&carrier));
            let counted = volume.is_some() as usize + exact.len() + complement.len();
            if counted != trace_free.len() {
                return Err(FeecError::Unisolvence {
                    face: carrier.vertices.clone(),
                    detail: format!(
                        "{k}-forms: volume + exact + complement = {counted}, trace-free dimension {}",
                        trace_free.len()
                    ),
                });
            }
            forms.push(FormSpaces { k, full, trace_free, kernel, complement, exact, volume });
        }
        Ok(SimplexSpaces { carrier, r, forms })
    }

    pub fn dim(&self) -> usize {
        self.carrier.nvars() - 1
    }

    /// Spaces of k-forms; empty spaces for k above the simplex dimension.
    pub fn form(&self, k: usize) -> Option<&FormSpaces> {
        self.forms.get(k)
    }
}

/// Monomial λ^α on a carrier from (local vertex, exponent) pairs.
pub fn bary_monomial(nvars: usize, alpha: &[(usize, u32)]) -> Poly<f64> {
    let mut exps = vec![0u32; nvars];
    for &(v, e) in alpha {
        exps[v] += e;
    }
    Poly::monomial(nvars, mono_from(&exps), 1.0)
}
