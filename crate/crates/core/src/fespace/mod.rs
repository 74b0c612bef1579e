//! Trimmed finite element spaces P_r^-Λ^k with geometrically decomposed degrees of freedom.
//!
//! Each simplex τ carries the functionals u ↦ ⟨⟨tr_τ u, y⟩⟩ for y in a basis of its
//! trace-free space, which is the volume form (when k = dim τ) followed by an orthonormal
//! basis of the mean-zero part. The dual basis ψ_{τ,y} is built cell by cell.

mod cell;
mod local;
mod patch;

use std::collections::BTreeMap;
use std::sync::Arc;

use once_cell::sync::OnceCell;

pub use cell::CellSpace;
pub use local::{bary_monomial, full_dim, trace_free_dim, trimmed_basis, trimmed_dim, FormSpaces, SimplexSpaces};
pub use patch::{AfwFunction, PatchSpace};

use crate::densela::Mat;
use crate::error::{FeecError, Result};
use crate::polyform::{whitney_form, Carrier, Conformity, PiecewiseForm, PolyForm};
use crate::simplicial::{Simplex, SimplicialComplex};

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// A mesh together with lazily built charts of all its simplices.
pub struct Geometry {
    pub complex: SimplicialComplex,
    carriers: Vec<Vec<OnceCell<Arc<Carrier<f64>>>>>,
}

impl Geometry {
    pub fn new(complex: SimplicialComplex) -> Arc<Self> {
        let carriers = (0..=complex.dim()).map(|k| (0..complex.count(k)).map(|_| OnceCell::new()).collect()).collect();
        Arc::new(Geometry { complex, carriers })
    }

    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn carrier(&self, k: usize, idx: usize) -> Arc<Carrier<f64>> {
        self.carriers[k][idx]
            .get_or_init(|| Arc::new(Carrier::of(&self.complex, self.complex.simplex(k, idx))))
            .clone()
    }

    pub fn carrier_of(&self, s: &Simplex) -> Arc<Carrier<f64>> {
        let idx = self.complex.index_of(s).expect("simplex of the mesh");
        self.carrier(s.dim(), idx)
    }

    pub fn cell(&self, c: usize) -> Arc<Carrier<f64>> {
        self.carrier(self.dim(), c)
    }

    /// Global Whitney form of the k-simplex `idx`.
    pub fn whitney(&self, k: usize, idx: usize) -> PiecewiseForm {
        whitney_form(&self.complex, self.complex.simplex(k, idx), &|c| self.cell(c))
    }

    /// ∫_σ tr u for a piecewise form whose pieces cover a cell containing σ.
    pub fn face_integral(&self, u: &PiecewiseForm, k: usize, idx: usize) -> f64 {
        let fc = self.carrier(k, idx);
        match u.trace(&fc) {
            Some(t) => crate::quadrature::integrate(&t).expect("top-degree trace"),
            None => 0.0,
        }
    }
}

/// Identifies the degree of freedom with basis element `index` on a simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DofKey {
    pub dim: usize,
    pub simplex: usize,
    pub index: usize,
}

impl DofKey {
    /// The volume functional, i.e. the face integral, of a k-simplex.
    pub fn is_volume(&self, k: usize) -> bool {
        self.dim == k && self.index == 0
    }
}

/// P_r^-Λ^k(T_h) for all k at one polynomial degree r.
pub struct FeSpace {
    pub geo: Arc<Geometry>,
    pub r: usize,
    spaces: Vec<Vec<OnceCell<Arc<SimplexSpaces>>>>,
    cells: Vec<Vec<OnceCell<Arc<CellSpace>>>>,
}

impl FeSpace {
    pub fn new(geo: Arc<Geometry>, r: usize) -> Self {
        assert!(r >= 1, "polynomial degree r must be at least 1");
        let n = geo.dim();
        let spaces = (0..=n).map(|k| (0..geo.complex.count(k)).map(|_| OnceCell::new()).collect()).collect();
        let cells = (0..=n).map(|_| (0..geo.complex.count(n)).map(|_| OnceCell::new()).collect()).collect();
        FeSpace { geo, r, spaces, cells }
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.geo.complex
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    /// Local spaces of the simplex (dim, idx).
    pub fn spaces(&self, dim: usize, idx: usize) -> Result<Arc<SimplexSpaces>> {
        self.spaces[dim][idx]
            .get_or_try_init(|| SimplexSpaces::build(self.geo.carrier(dim, idx), self.r).map(Arc::new))
            .cloned()
    }

    pub fn form_spaces(&self, k: usize, dim: usize, idx: usize) -> Result<Option<Arc<SimplexSpaces>>> {
        if k > dim {
            return Ok(None);
        }
        self.spaces(dim, idx).map(Some)
    }

    /// Orthonormal basis 𝔭 of the mean-zero trace-free space of the simplex.
    pub fn g_basis(&self, k: usize, dim: usize, idx: usize) -> Result<Vec<PolyForm<f64>>> {
        Ok(match self.form_spaces(k, dim, idx)? {
            Some(s) => s.forms[k].breve(),
            None => Vec::new(),
        })
    }

    /// Degrees of freedom of k-forms attached to one simplex.
    pub fn simplex_dofs(&self, k: usize, dim: usize, idx: usize) -> Result<Vec<DofKey>> {
        Ok(match self.form_spaces(k, dim, idx)? {
            Some(s) => (0..s.forms[k].dof_count()).map(|index| DofKey { dim, simplex: idx, index }).collect(),
            None => Vec::new(),
        })
    }

    /// Position of the first 𝔭 element among the simplex DOFs.
    pub fn breve_offset(&self, k: usize, dim: usize) -> usize {
        (dim == k) as usize
    }

    /// All global degrees of freedom in a fixed order.
    pub fn global_dofs(&self, k: usize) -> Result<Vec<DofKey>> {
        let mut out = Vec::new();
        for dim in k..=self.dim() {
            for idx in 0..self.complex().count(dim) {
                out.extend(self.simplex_dofs(k, dim, idx)?);
            }
        }
        Ok(out)
    }

    pub fn dimension(&self, k: usize) -> Result<usize> {
        Ok(self.global_dofs(k)?.len())
    }

    pub fn cell_space(&self, k: usize, cell: usize) -> Result<Arc<CellSpace>> {
        self.cells[k][cell].get_or_try_init(|| CellSpace::build(self, k, cell).map(Arc::new)).cloned()
    }

    /// Global basis function ψ for one DOF, as pieces on the star of its simplex.
    pub fn psi(&self, k: usize, key: DofKey) -> Result<PiecewiseForm> {
        let s = self.complex().simplex(key.dim, key.simplex).clone();
        let mut out = PiecewiseForm::zero(k, Conformity::Trace);
        for c in self.complex().star_cells(&s) {
            let cs = self.cell_space(k, c)?;
            out.pieces.insert(c, cs.psi_of(&key).expect("dof of a face of the cell").clone());
        }
        Ok(out)
    }

    /// Values of all DOFs of the simplex on a form defined near it.
    pub fn dof_values(&self, k: usize, dim: usize, idx: usize, u: &PiecewiseForm) -> Result<Vec<f64>> {
        let Some(sp) = self.form_spaces(k, dim, idx)? else { return Ok(Vec::new()) };
        let fs = &sp.forms[k];
        let Some(t) = u.trace(&sp.carrier) else { return Ok(vec![0.0; fs.dof_count()]) };
        let g = fs.ddc_gram(&[t], &fs.dof_basis());
        Ok(g.row(0).iter().copied().collect())
    }

    /// Extension E_σ ρ = Σ_y ⟨⟨ρ, y⟩⟩ ψ_{σ,y} of a trace-free form on σ.
    pub fn extend(&self, k: usize, dim: usize, idx: usize, rho: &PolyForm<f64>) -> Result<PiecewiseForm> {
        let sp = self.form_spaces(k, dim, idx)?.ok_or(FeecError::Degree { op: "extend", k })?;
        let fs = &sp.forms[k];
        let coeffs = fs.ddc_gram(std::slice::from_ref(rho), &fs.dof_basis());
        let mut out = PiecewiseForm::zero(k, Conformity::Trace);
        for (index, &c) in coeffs.row(0).iter().enumerate() {
            if c != 0.0 {
                out.add_scaled(&self.psi(k, DofKey { dim, simplex: idx, index })?, &c);
            }
        }
        Ok(out)
    }

    /// Assembles Σ c_i ψ_i on the given cells (all cells touched by the DOFs when None).
    pub fn assemble(&self, k: usize, coeffs: &BTreeMap<DofKey, f64>, cells: Option<&[usize]>) -> Result<PiecewiseForm> {
        let mut targets: Vec<usize> = match cells {
            Some(c) => c.to_vec(),
            None => {
                let mut all = Vec::new();
                for key in coeffs.keys() {
                    all.extend(self.complex().star_cells(self.complex().simplex(key.dim, key.simplex)));
                }
                all
            }
        };
        targets.sort_unstable();
        targets.dedup();
        let mut out = PiecewiseForm::zero(k, Conformity::Trace);
        for c in targets {
            let cs = self.cell_space(k, c)?;
            let mut f = PolyForm::zero(&cs.carrier, k);
            for (pos, key) in cs.dofs.iter().enumerate() {
                if let Some(&v) = coeffs.get(key) {
                    if v != 0.0 {
                        f.add_scaled(&cs.psi[pos], &v);
                    }
                }
            }
            out.pieces.insert(c, f);
        }
        Ok(out)
    }

    /// All DOF values of a conforming FE function.
    pub fn interpolate_dofs(&self, k: usize, u: &PiecewiseForm) -> Result<BTreeMap<DofKey, f64>> {
        let mut out = BTreeMap::new();
        for dim in k..=self.dim() {
            for idx in 0..self.complex().count(dim) {
                let vals = self.dof_values(k, dim, idx, u)?;
                for (index, v) in vals.into_iter().enumerate() {
                    out.insert(DofKey { dim, simplex: idx, index }, v);
                }
            }
        }
        Ok(out)
    }

    /// Coefficients of u ∈ M_r^k in the basis {ψ_{σ,g}}; fails if a k-face integral is not zero.
    pub fn m_decompose(&self, k: usize, u: &PiecewiseForm, tol: f64) -> Result<BTreeMap<DofKey, f64>> {
        let all = self.interpolate_dofs(k, u)?;
        let scale = u.norm().max(f64::MIN_POSITIVE);
        let mut out = BTreeMap::new();
        for (key, v) in all {
            if key.is_volume(k) {
                if v.abs() > tol * scale {
                    return Err(FeecError::Check { id: "m_space".into(), max_err: v.abs() / scale, tol });
                }
            } else {
                out.insert(key, v);
            }
        }
        Ok(out)
    }

    /// DOF matrix statistics over all cells: (largest condition number, number of cells).
    pub fn unisolvence_report(&self, k: usize) -> Result<(f64, usize)> {
        let n = self.complex().count(self.dim());
        let mut worst: f64 = 0.0;
        for c in 0..n {
            worst = worst.max(self.cell_space(k, c)?.condition);
        }
        Ok((worst, n))
    }

    pub fn mass_matrix(&self, forms: &[PiecewiseForm]) -> Mat {
        Mat::from_fn(forms.len(), forms.len(), |i, j| forms[i].inner(&forms[j]))
    }
}
