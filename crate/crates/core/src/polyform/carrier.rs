//! Affine charts of simplices.
//!
//! An n-cell uses ambient coordinates, so `dx_I` is the Euclidean basis. A lower
//! dimensional simplex [x_0..x_m] uses the chart y ↦ x_0 + Σ y_i (x_i - x_0); forms on
//! it are expressed in `dy_I` and the induced metric enters only through inner products.

use crate::scalar::Scalar;
use crate::simplicial::{simplex_volume, Simplex, SimplicialComplex};

#[derive(Clone, Debug)]
pub struct Carrier<S: Scalar> {
    /// global vertex ids, increasing
    pub vertices: Vec<usize>,
    /// local coordinate dimension m
    pub dim: usize,
    pub ambient: bool,
    /// local coordinates of the vertices
    pub local_coords: Vec<Vec<S>>,
    /// ∇λ_i in local coordinates
    pub grads: Vec<Vec<S>>,
    /// λ_i(y) = offsets[i] + grads[i]·y
    pub offsets: Vec<S>,
    /// det of the local edge matrix [y_1 - y_0, ..., y_m - y_0]; its sign is the orientation
    pub edge_det: S,
    /// ambient vertex coordinates
    pub points: Vec<Vec<f64>>,
    /// inverse of the chart metric G = JᵀJ
    pub metric_inv: Vec<Vec<f64>>,
    /// unsigned m-volume (1 for a vertex)
    pub volume: f64,
}

/// Solves A X = B by Gaussian elimination over an exact or floating field.
pub(crate) fn solve_generic<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<Vec<S>>) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col].abs_f64().partial_cmp(&a[j][col].abs_f64()).unwrap()
        })?;
        if a[piv][col].is_zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col && !a[row][col].is_zero() {
                let f = a[row][col].clone() / a[col][col].clone();
                for c in col..n {
                    let v = a[col][c].clone() * f.clone();
                    a[row][c] = a[row][c].clone() - v;
                }
                for c in 0..b[row].len() {
                    let v = b[col][c].clone() * f.clone();
                    b[row][c] = b[row][c].clone() - v;
                }
            }
        }
    }
    for row in 0..n {
        let p = a[row][row].clone();
        for c in 0..b[row].len() {
            b[row][c] = b[row][c].clone() / p.clone();
        }
    }
    Some(b)
}

pub(crate) fn det_generic<S: Scalar>(mut a: Vec<Vec<S>>) -> S {
    let n = a.len();
    let mut det = S::one();
    for col in 0..n {
        let piv = match (col..n).find(|&i| !a[i][col].is_zero()) {
            Some(p) => p,
            None => return S::zero(),
        };
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det = det * a[col][col].clone();
        for row in col + 1..n {
            if !a[row][col].is_zero() {
                let f = a[row][col].clone() / a[col][col].clone();
                for c in col..n {
                    let v = a[col][c].clone() * f.clone();
                    a[row][c] = a[row][c].clone() - v;
                }
            }
        }
    }
    det
}

impl<S: Scalar> Carrier<S> {
    /// Carrier of σ in the complex: ambient chart for n-cells, affine chart otherwise.
    pub fn of(complex: &SimplicialComplex, s: &Simplex) -> Self {
        let points: Vec<Vec<f64>> = s.0.iter().map(|&v| complex.point(v).to_vec()).collect();
        Self::from_points(s.0.clone(), points, s.dim() == complex.dim())
    }

    pub fn from_points(vertices: Vec<usize>, points: Vec<Vec<f64>>, ambient: bool) -> Self {
        let m = points.len() - 1;
        assert!(points.len() <= super::poly::MAX_VARS, "too many vertices for the monomial packing");
        let local_coords: Vec<Vec<S>> = if ambient {
            points.iter().map(|p| p.iter().map(|&x| S::from_f64(x)).collect()).collect()
        } else {
            (0..=m)
                .map(|i| (0..m).map(|j| if i == j + 1 { S::one() } else { S::zero() }).collect())
                .collect()
        };
        let dim = if ambient { points[0].len() } else { m };
        assert!(!ambient || dim == m, "ambient chart requires a full-dimensional simplex");
        // rows [1, y_i] ; columns of the inverse give (offset_i, grad_i)
        let a: Vec<Vec<S>> = local_coords
            .iter()
            .map(|y| std::iter::once(S::one()).chain(y.iter().cloned()).collect())
            .collect();
        let ident: Vec<Vec<S>> = (0..=m)
            .map(|i| (0..=m).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        let inv = solve_generic(a, ident).expect("nondegenerate simplex");
        let offsets = (0..=m).map(|i| inv[0][i].clone()).collect();
        let grads = (0..=m).map(|i| (1..=m).map(|r| inv[r][i].clone()).collect()).collect();
        let edges: Vec<Vec<S>> = (0..m)
            .map(|r| (1..=m).map(|i| local_coords[i][r].clone() - local_coords[0][r].clone()).collect())
            .collect();
        let edge_det = if m == 0 { S::one() } else { det_generic(edges) };
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let volume = simplex_volume(&refs);
        let metric_inv = if ambient || m == 0 {
            (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        } else {
            let e: Vec<Vec<f64>> = (1..=m)
                .map(|i| points[i].iter().zip(&points[0]).map(|(a, b)| a - b).collect())
                .collect();
            let g = nalgebra::DMatrix::from_fn(m, m, |i, j| {
                e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            let gi = g.try_inverse().expect("nondegenerate face");
            (0..m).map(|i| (0..m).map(|j| gi[(i, j)]).collect()).collect()
        };
        Carrier {
            vertices,
            dim,
            ambient,
            local_coords,
            grads,
            offsets,
            edge_det,
            points,
            metric_inv,
            volume,
        }
    }

    pub fn nvars(&self) -> usize {
        self.vertices.len()
    }

    /// Local vertex positions of `sub` inside this carrier, or None if not a face.
    pub fn local_indices(&self, sub: &[usize]) -> Option<Vec<usize>> {
        sub.iter().map(|v| self.vertices.iter().position(|w| w == v)).collect()
    }

    /// Barycentric coordinates of an ambient point (ambient carriers only).
    pub fn barycentric(&self, x: &[f64]) -> Vec<f64> {
        assert!(self.ambient);
        (0..self.nvars())
            .map(|i| {
                self.offsets[i].to_f64()
                    + self.grads[i].iter().zip(x).map(|(g, xi)| g.to_f64() * xi).sum::<f64>()
            })
            .collect()
    }

    /// Ambient point with the given barycentric coordinates.
    pub fn point_at(&self, bary: &[f64]) -> Vec<f64> {
        let n = self.points[0].len();
        (0..n).map(|j| bary.iter().zip(&self.points).map(|(b, p)| b * p[j]).sum()).collect()
    }

    pub fn barycenter_local(&self) -> Vec<S> {
        let w = S::one() / S::from_i64(self.nvars() as i64);
        (0..self.dim)
            .map(|j| {
                self.local_coords.iter().fold(S::zero(), |acc, y| acc + y[j].clone() * w.clone())
            })
            .collect()
    }

    pub fn to_f64(&self) -> Carrier<f64> {
        let conv = |v: &Vec<Vec<S>>| -> Vec<Vec<f64>> {
            v.iter().map(|r| r.iter().map(|x| x.to_f64()).collect()).collect()
        };
        Carrier {
            vertices: self.vertices.clone(),
            dim: self.dim,
            ambient: self.ambient,
            local_coords: conv(&self.local_coords),
            grads: conv(&self.grads),
            offsets: self.offsets.iter().map(|x| x.to_f64()).collect(),
            edge_det: self.edge_det.to_f64(),
            points: self.points.clone(),
            metric_inv: self.metric_inv.clone(),
            volume: self.volume,
        }
    }
}
