//! Local weight families Z^k(σ) supported on extended stars.
//!
//! A weight represents the k-face integral of P_r^-Λ^k functions near σ as an L² pairing:
//! ⟨Z^k(σ), u⟩ = ∫_σ tr u for u in P_r^-Λ^k(es_h(σ)). The family satisfies
//! δZ^k(σ) = Z^{k-1}(∂σ), which is what makes the lowest order projection commute with d.
//!
//! Construction: for a vertex, Z^0 = η + δ(𝔟 dv) with η the normalized indicator of
//! es_h(σ). For k ≥ 1, a potential η with δη = Z^{k-1}(∂σ) is found by solving
//! dω = (-1)^k ⋆z for ω with vanishing trace on ∂es_h(σ) and taking η = ⋆⁻¹ω; then
//! v solves ⟨𝔟dv, du⟩ = ∫_σ tr u - ⟨η, u⟩ and Z^k = η + δ(𝔟 dv). Here 𝔟 is the sum of
//! the element bubbles over the patch.

use std::collections::BTreeSet;
use std::sync::Arc;

use once_cell::sync::OnceCell;

use crate::densela::{self, Mat, Vector};
use crate::error::{FeecError, Result};
use crate::fespace::{Geometry, PatchSpace};
use crate::polyform::{bubble_on, Conformity, PiecewiseForm, PolyForm};
use crate::simplicial::Simplex;

/// Deliberate defects used as negative controls for the verification checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// add one cell outside es_h(σ) to the bubble patch
    pub bubble_extra_cell: bool,
    /// use the unnormalized indicator of es_h(σ) for vertex weights
    pub skip_mean_zero: bool,
}

/// Numbers recorded while building one weight.
#[derive(Clone, Debug, Default)]
pub struct ZLog {
    pub degree: u32,
    /// relative residual of dω = ±⋆z
    pub potential_residual: f64,
    /// relative size of the right-hand side on the kernel of d
    pub kernel_rhs: f64,
    /// relative compatibility defect of Z^{k-1}(∂σ): its mean for k = 1, δ of it for k ≥ 2
    pub compat: f64,
    /// relative residual of the bubble-weighted solve
    pub solve_residual: f64,
    pub unknowns: usize,
}

#[derive(Clone, Debug)]
pub struct Weight {
    pub k: usize,
    pub simplex: usize,
    pub z: PiecewiseForm,
    /// cells of es_h(σ)
    pub patch: Vec<usize>,
    /// cells carrying the bubble of the correction
    pub bubble_cells: Vec<usize>,
    pub log: ZLog,
}

pub const COMPAT_TOL: f64 = 1e-10;
pub const POTENTIAL_TOL: f64 = 1e-8;

/// Lazily built weights Z^k(σ) for all k and σ at one polynomial degree.
pub struct Weights {
    pub geo: Arc<Geometry>,
    pub r: usize,
    pub faults: Faults,
    cache: Vec<Vec<OnceCell<Arc<Weight>>>>,
}

/// Solves the singular SPD system K x = b whose kernel is spanned by the rows of C.
fn solve_augmented(k: &Mat, c: Option<&Mat>, b: &Vector) -> Result<(Vector, f64)> {
    let a = match c {
        Some(c) if c.nrows() > 0 => {
            let ctc = c.transpose() * c;
            let s = k.trace() / ctc.trace().max(f64::MIN_POSITIVE);
            k + ctc * s
        }
        _ => k.clone(),
    };
    let x = densela::solve_spd_vec(&a, b)?;
    let res = (k * &x - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    Ok((x, res))
}

fn scalar_constant(geo: &Geometry, cells: &[usize], value: f64) -> PiecewiseForm {
    let mut out = PiecewiseForm::zero(0, Conformity::Trace);
    for &c in cells {
        let carrier = geo.cell(c);
        out.pieces.insert(c, PolyForm::scalar(&carrier, crate::polyform::Poly::constant(carrier.nvars(), value)));
    }
    out
}

impl Weights {
    pub fn new(geo: Arc<Geometry>, r: usize) -> Self {
        Self::with_faults(geo, r, Faults::default())
    }

    pub fn with_faults(geo: Arc<Geometry>, r: usize, faults: Faults) -> Self {
        let n = geo.dim();
        let cache = (0..=n).map(|k| (0..geo.complex.count(k)).map(|_| OnceCell::new()).collect()).collect();
        Weights { geo, r, faults, cache }
    }

    /// Z^k of the k-simplex `idx`, built on first use together with the weights it depends on.
    pub fn get(&self, k: usize, idx: usize) -> Result<Arc<Weight>> {
        self.cache[k][idx]
            .get_or_try_init(|| {
                let w = if k == 0 { self.lowest(idx)? } else { self.step(k, idx)? };
                Ok(Arc::new(w))
            })
            .cloned()
    }

    /// Cells of the bubble patch: es_h(σ), plus one outside cell under the fault.
    fn patch_cells(&self, sigma: &Simplex) -> Vec<usize> {
        let complex = &self.geo.complex;
        let mut cells = complex.extended_star_cells(sigma);
        if self.faults.bubble_extra_cell {
            let inside: BTreeSet<usize> = cells.iter().copied().collect();
            if let Some(extra) = complex.grow(&cells).into_iter().find(|c| !inside.contains(c)) {
                cells.push(extra);
                cells.sort_unstable();
            }
        }
        cells
    }

    fn lowest(&self, idx: usize) -> Result<Weight> {
        let geo = &*self.geo;
        let sigma = geo.complex.simplex(0, idx).clone();
        let es = geo.complex.extended_star_cells(&sigma);
        let cells = self.patch_cells(&sigma);
        let volume: f64 = es.iter().map(|&c| geo.complex.cell_volume(c)).sum();
        let height = if self.faults.skip_mean_zero { 1.0 } else { 1.0 / volume };
        let eta = scalar_constant(geo, &es, height);
        let space = PatchSpace::new(geo, &cells, self.r, 0, false);
        let one = scalar_constant(geo, &cells, 1.0);
        let rhs = space.point_values(geo, sigma.0[0]) - space.load(false, &eta, None);
        let kernel_rhs = (1.0 - eta.inner(&one)).abs();
        let c = space.load(false, &one, None);
        let constants = Mat::from_row_slice(1, c.len(), c.as_slice());
        let (z, solve_residual) = self.bubble_correction(&space, &cells, &eta, &rhs, Some(&constants))?;
        Ok(Weight {
            k: 0,
            simplex: idx,
            log: ZLog {
                degree: z.poly_degree(),
                kernel_rhs,
                solve_residual,
                unknowns: space.len(),
                ..ZLog::default()
            },
            z,
            patch: es,
            bubble_cells: cells,
        })
    }

    /// η + δ(𝔟 dv) with v solving the bubble-weighted problem; the kernel of d is fixed through `kernel`.
    fn bubble_correction(
        &self,
        space: &PatchSpace,
        cells: &[usize],
        eta: &PiecewiseForm,
        rhs: &Vector,
        kernel: Option<&Mat>,
    ) -> Result<(PiecewiseForm, f64)> {
        let geo = &*self.geo;
        let bubble = bubble_on(cells, &|c| geo.cell(c));
        let stiff = PatchSpace::pair_matrix(space, true, space, true, Some(&bubble));
        let (v, residual) = solve_augmented(&stiff, kernel, rhs)?;
        let dv = space.combine(v.as_slice()).d();
        let mut z = eta.clone();
        for (&c, f) in &dv.pieces {
            let b = &bubble.pieces[&c];
            let weighted = f.mul_poly(&b.terms[&0]);
            let corr = weighted.coderivative()?;
            match z.pieces.get_mut(&c) {
                Some(g) => *g = g.add(&corr),
                None => {
                    z.pieces.insert(c, corr);
                }
            }
        }
        z.conformity = Conformity::StarTrace;
        Ok((z, residual))
    }

    fn step(&self, k: usize, idx: usize) -> Result<Weight> {
        let geo = &*self.geo;
        let n = geo.dim();
        let complex = &geo.complex;
        let sigma = complex.simplex(k, idx).clone();
        let es = complex.extended_star_cells(&sigma);
        let cells = self.patch_cells(&sigma);
        let volume: f64 = es.iter().map(|&c| complex.cell_volume(c)).sum();

        // z = Z^{k-1}(∂σ) with the signs of the boundary matrix
        let mut zprev = PiecewiseForm::zero(k - 1, Conformity::Broken);
        let mut scale = 0.0;
        for &(f, sign) in complex.boundary_of(k, idx) {
            let w = self.get(k - 1, f)?;
            zprev.add_scaled(&w.z, &(sign as f64));
            scale += w.z.norm();
        }
        scale = scale.max(f64::MIN_POSITIVE);
        let compat = if k == 1 {
            let mean: f64 = zprev.pieces.values().map(crate::quadrature::integrate_scalar).sum();
            let compat = mean.abs() / (scale * volume.sqrt());
            if compat <= COMPAT_TOL {
                zprev.add_scaled(&scalar_constant(geo, &es, 1.0), &(-mean / volume));
            }
            compat
        } else {
            zprev.coderivative()?.norm() / scale
        };
        if compat > COMPAT_TOL {
            let id = if k == 1 { "compat_k1" } else { "compat_dk" };
            return Err(FeecError::Check { id: id.into(), max_err: compat, tol: COMPAT_TOL });
        }

        // potential: dω = (-1)^k ⋆z with ω vanishing on ∂es_h(σ)
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let target = zprev.hodge_star(n)?.scaled(&sign);
        let rp = zprev.poly_degree() as usize + 1;
        let wspace = PatchSpace::new(geo, &es, rp, n - k, true);
        let stiff = PatchSpace::pair_matrix(&wspace, true, &wspace, true, None);
        let load = wspace.load(true, &target, None);
        let constraint = (n > k).then(|| {
            let nu = PatchSpace::new(geo, &es, rp, n - k - 1, true);
            PatchSpace::pair_matrix(&nu, true, &wspace, false, None)
        });
        let (omega, _) = solve_augmented(&stiff, constraint.as_ref(), &load)?;
        let omega = wspace.combine(omega.as_slice());
        let potential_residual = omega.d().distance(&target) / target.norm().max(f64::MIN_POSITIVE);
        if potential_residual > POTENTIAL_TOL {
            return Err(FeecError::Check { id: "potential_eta".into(), max_err: potential_residual, tol: POTENTIAL_TOL });
        }
        let mut eta = PiecewiseForm::zero(k, Conformity::StarTrace);
        for (&c, f) in &omega.pieces {
            eta.pieces.insert(c, f.inverse_hodge_star()?);
        }

        if k == n {
            let unknowns = wspace.len();
            return Ok(Weight {
                k,
                simplex: idx,
                log: ZLog { degree: eta.poly_degree(), potential_residual, compat, unknowns, ..ZLog::default() },
                z: eta,
                patch: es,
                bubble_cells: Vec::new(),
            });
        }

        let space = PatchSpace::new(geo, &cells, self.r, k, false);
        let rhs = space.face_integrals(geo, &sigma, false) - space.load(false, &eta, None);
        let nu = PatchSpace::new(geo, &cells, self.r, k - 1, false);
        let nu_rhs = nu.face_integrals(geo, &sigma, true) - nu.load(true, &eta, None);
        let nu_scale = nu.face_integrals(geo, &sigma, true).amax() + nu.load(true, &eta, None).amax();
        let kernel_rhs = nu_rhs.amax() / nu_scale.max(f64::MIN_POSITIVE);
        let mut constraint = PatchSpace::pair_matrix(&nu, true, &space, false, None);
        // drop the all-zero rows of d on constants
        let keep: Vec<usize> = (0..constraint.nrows()).filter(|&i| constraint.row(i).amax() > 0.0).collect();
        constraint = constraint.select_rows(keep.iter());
        let (z, solve_residual) = self.bubble_correction(&space, &cells, &eta, &rhs, Some(&constraint))?;
        Ok(Weight {
            k,
            simplex: idx,
            log: ZLog {
                degree: z.poly_degree(),
                potential_residual,
                kernel_rhs,
                compat,
                solve_residual,
                unknowns: space.len() + wspace.len(),
            },
            z,
            patch: es,
            bubble_cells: cells,
        })
    }

    /// Lowest-order coefficient ⟨Z^k(σ), u⟩ for every k-simplex σ whose weight meets u.
    pub fn pairing(&self, k: usize, idx: usize, u: &PiecewiseForm) -> Result<f64> {
        Ok(self.get(k, idx)?.z.inner(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplicial::SimplicialComplex;

    fn check_family(n: usize, m: usize, r: usize) {
        let geo = Geometry::new(SimplicialComplex::structured(n, m).unwrap());
        let weights = Weights::new(geo.clone(), r);
        for k in 0..=n {
            for idx in 0..geo.complex.count(k) {
                let w = weights.get(k, idx).unwrap();
                let sigma = geo.complex.simplex(k, idx).clone();
                let space = PatchSpace::new(&geo, &w.patch, r, k, false);
                let exact = space.face_integrals(&geo, &sigma, false);
                let mut worst: f64 = 0.0;
                for i in 0..space.len() {
                    let u = space.function(i);
                    let err = (w.z.inner(&u) - exact[i]).abs() / (w.z.norm() * u.norm());
                    worst = worst.max(err);
                }
                assert!(worst < 1e-9, "n {n} r {r} k {k} σ {idx}: {worst}");
                let support = w.z.numerical_support(1e-12);
                assert!(support.iter().all(|c| w.patch.contains(c)));
                if k > 0 {
                    let mut zprev = PiecewiseForm::zero(k - 1, Conformity::Broken);
                    for &(f, s) in geo.complex.boundary_of(k, idx) {
                        zprev.add_scaled(&weights.get(k - 1, f).unwrap().z, &(s as f64));
                    }
                    let dz = w.z.coderivative().unwrap();
                    let err = dz.distance(&zprev) / zprev.norm();
                    assert!(err < 1e-9, "δZ: n {n} r {r} k {k}: {err}");
                }
            }
        }
    }

    #[test]
    fn weights_reproduce_face_integrals_1d() {
        check_family(1, 4, 2);
    }

    #[test]
    fn weights_reproduce_face_integrals_2d() {
        check_family(2, 2, 1);
        check_family(2, 2, 2);
    }
}
