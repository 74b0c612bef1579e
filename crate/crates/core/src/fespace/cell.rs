use std::sync::Arc;

use crate::densela::{self, Mat};
use crate::error::{FeecError, Result};
use crate::polyform::{Carrier, PolyForm};
use crate::simplicial::{subsets, Simplex};

use super::{trimmed_basis, DofKey, FeSpace};

/// Local DOF matrix of one cell and the dual basis it determines.
#[derive(Clone, Debug)]
pub struct CellSpace {
    pub cell: usize,
    pub k: usize,
    pub carrier: Arc<Carrier<f64>>,
    /// trimmed basis w_j on the cell
    pub basis: Vec<PolyForm<f64>>,
    pub dofs: Vec<DofKey>,
    /// D[(dof, j)] = dof(w_j)
    pub dof_matrix: Mat,
    /// D⁻¹; column i holds the coefficients of ψ_i in the trimmed basis
    pub dual: Mat,
    pub condition: f64,
    /// ψ_i restricted to the cell
    pub psi: Vec<PolyForm<f64>>,
}

impl CellSpace {
    pub(super) fn build(fe: &FeSpace, k: usize, cell: usize) -> Result<Self> {
        let complex = fe.complex();
        let n = complex.dim();
        let carrier = fe.geo.cell(cell);
        let basis = trimmed_basis(&carrier, fe.r, k);
        let nb = basis.len();
        let verts = complex.simplex(n, cell).vertices().to_vec();
        let mut dofs = Vec::with_capacity(nb);
        let mut rows: Vec<Mat> = Vec::new();
        for dim in k..=n {
            for sub in subsets(&verts, dim + 1) {
                let idx = complex.index_of(&Simplex(sub)).expect("face of the mesh");
                let sp = fe.spaces(dim, idx)?;
                let fs = &sp.forms[k];
                let ys = fs.dof_basis();
                if ys.is_empty() {
                    continue;
                }
                let traces: Vec<PolyForm<f64>> = if dim == n {
                    basis.clone()
                } else {
                    basis.iter().map(|w| w.trace(&sp.carrier).expect("face of the cell")).collect()
                };
                // rows: one per y, columns: basis functions
                rows.push(fs.ddc_gram(&ys, &traces));
                dofs.extend((0..ys.len()).map(|index| DofKey { dim, simplex: idx, index }));
            }
        }
        if dofs.len() != nb {
            return Err(FeecError::Unisolvence {
                face: verts,
                detail: format!("{} degrees of freedom for a {nb}-dimensional space of {k}-forms", dofs.len()),
            });
        }
        let mut d = Mat::zeros(nb, nb);
        let mut r0 = 0;
        for block in rows {
            d.view_mut((r0, 0), (block.nrows(), nb)).copy_from(&block);
            r0 += block.nrows();
        }
        let condition = densela::condition_number(&d);
        if !condition.is_finite() || condition > 1e12 {
            return Err(FeecError::Unisolvence {
                face: verts,
                detail: format!("DOF matrix of {k}-forms is singular (condition {condition:e})"),
            });
        }
        let dual = densela::solve(&d, &Mat::identity(nb, nb))?;
        let psi = (0..nb)
            .map(|i| {
                let mut f = PolyForm::zero(&carrier, k);
                for (j, w) in basis.iter().enumerate() {
                    let c = dual[(j, i)];
                    if c != 0.0 {
                        f.add_scaled(w, &c);
                    }
                }
                f
            })
            .collect();
        Ok(CellSpace { cell, k, carrier, basis, dofs, dof_matrix: d, dual, condition, psi })
    }

    pub fn position(&self, key: &DofKey) -> Option<usize> {
        self.dofs.iter().position(|d| d == key)
    }

    pub fn psi_of(&self, key: &DofKey) -> Option<&PolyForm<f64>> {
        self.position(key).map(|p| &self.psi[p])
    }
}
