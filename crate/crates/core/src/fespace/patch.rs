use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::densela::{Mat, Vector};
use crate::polyform::{whitney_local, Conformity, PiecewiseForm, PolyForm};
use crate::quadrature::gram;
use crate::simplicial::{subsets, Simplex};

use super::{bary_monomial, Geometry};

/// Global trimmed basis function λ^α φ_σ attached to the patch simplex f = supp α ∪ σ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AfwFunction {
    pub face: Simplex,
    /// (global vertex, exponent)
    pub alpha: Vec<(usize, u32)>,
    pub sigma: Vec<usize>,
}

/// P_r^-Λ^k on a union of cells, optionally with vanishing trace on the patch boundary.
#[derive(Clone, Debug)]
pub struct PatchSpace {
    pub k: usize,
    pub r: usize,
    pub cells: Vec<usize>,
    pub boundary_condition: bool,
    pub functions: Vec<AfwFunction>,
    /// per cell: (function index, restriction)
    pub local: BTreeMap<usize, Vec<(usize, PolyForm<f64>)>>,
}

/// Exponent vectors of total degree `total` over `len` slots, with the first `forced` slots at least one.
fn compositions(len: usize, total: u32, forced: usize) -> Vec<Vec<u32>> {
    if (forced as u32) > total {
        return Vec::new();
    }
    let free = total - forced as u32;
    let mut out = Vec::new();
    let mut cur = vec![0u32; len];
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
    }
    if len == 0 {
        if free == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, free, &mut cur, &mut out);
    for v in &mut out {
        for e in v.iter_mut().take(forced) {
            *e += 1;
        }
    }
    out
}

impl PatchSpace {
    pub fn new(geo: &Geometry, cells: &[usize], r: usize, k: usize, boundary_condition: bool) -> Self {
        assert!(r >= 1);
        let complex = &geo.complex;
        let n = complex.dim();
        let patch = complex.patch(cells);
        let mut functions = Vec::new();
        for dim in k..=n {
            for &fidx in &patch.simplices[dim] {
                if boundary_condition && dim < n && patch.is_boundary(dim, fidx) {
                    continue;
                }
                let f = complex.simplex(dim, fidx);
                for sigma in subsets(f.vertices(), k + 1) {
                    let lo = sigma[0];
                    let rest: Vec<usize> = f.vertices().iter().copied().filter(|v| !sigma.contains(v)).collect();
                    if rest.iter().any(|&v| v < lo) {
                        continue;
                    }
                    // slots: vertices outside σ first (forced ≥ 1), then σ's vertices
                    let slots: Vec<usize> = rest.iter().chain(sigma.iter()).copied().collect();
                    for exps in compositions(slots.len(), (r - 1) as u32, rest.len()) {
                        let alpha: Vec<(usize, u32)> =
                            slots.iter().zip(&exps).filter(|(_, &e)| e > 0).map(|(&v, &e)| (v, e)).collect();
                        functions.push(AfwFunction { face: f.clone(), alpha, sigma: sigma.clone() });
                    }
                }
            }
        }
        let by_face: HashMap<&Simplex, Vec<usize>> = functions.iter().enumerate().fold(HashMap::new(), |mut m, (i, f)| {
            m.entry(&f.face).or_default().push(i);
            m
        });
        let local: BTreeMap<usize, Vec<(usize, PolyForm<f64>)>> = patch
            .cells
            .par_iter()
            .map(|&c| {
                let carrier = geo.cell(c);
                let verts = complex.simplex(n, c).vertices().to_vec();
                let nv = verts.len();
                let mut whitney: HashMap<Vec<usize>, PolyForm<f64>> = HashMap::new();
                let mut list = Vec::new();
                for dim in k..=n {
                    for sub in subsets(&verts, dim + 1) {
                        let Some(ids) = by_face.get(&Simplex(sub)) else { continue };
                        for &i in ids {
                            let fun = &functions[i];
                            let loc_sigma = carrier.local_indices(&fun.sigma).expect("σ in cell");
                            let phi = whitney
                                .entry(loc_sigma.clone())
                                .or_insert_with(|| whitney_local(&carrier, &loc_sigma))
                                .clone();
                            let alpha: Vec<(usize, u32)> = fun
                                .alpha
                                .iter()
                                .map(|&(v, e)| (carrier.local_indices(&[v]).expect("vertex in cell")[0], e))
                                .collect();
                            list.push((i, phi.mul_poly(&bary_monomial(nv, &alpha))));
                        }
                    }
                }
                (c, list)
            })
            .collect();
        PatchSpace { k, r, cells: patch.cells.clone(), boundary_condition, functions, local }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn function(&self, i: usize) -> PiecewiseForm {
        let mut out = PiecewiseForm::zero(self.k, Conformity::Trace);
        for (&c, list) in &self.local {
            for (j, f) in list {
                if *j == i {
                    out.pieces.insert(c, f.clone());
                }
            }
        }
        out
    }

    pub fn combine(&self, coeffs: &[f64]) -> PiecewiseForm {
        let mut out = PiecewiseForm::zero(self.k, Conformity::Trace);
        for (&c, list) in &self.local {
            let carrier = &list.first().map(|(_, f)| f.carrier.clone());
            let Some(carrier) = carrier else { continue };
            let mut f = PolyForm::zero(carrier, self.k);
            for (j, g) in list {
                if coeffs[*j] != 0.0 {
                    f.add_scaled(g, &coeffs[*j]);
                }
            }
            out.pieces.insert(c, f);
        }
        out
    }

    fn cell_forms(&self, c: usize, derivative: bool) -> (Vec<usize>, Vec<PolyForm<f64>>) {
        let list = self.local.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        let ids = list.iter().map(|(i, _)| *i).collect();
        let forms = list.iter().map(|(_, f)| if derivative { f.d() } else { f.clone() }).collect();
        (ids, forms)
    }

    /// M_ij = ∫ w ⟨D a_i, D b_j⟩ with D = d or the identity, summed over the common cells.
    pub fn pair_matrix(a: &PatchSpace, da: bool, b: &PatchSpace, db: bool, weight: Option<&PiecewiseForm>) -> Mat {
        let blocks: Vec<(Vec<usize>, Vec<usize>, Mat)> = a
            .local
            .par_iter()
            .filter(|(c, _)| b.local.contains_key(c))
            .map(|(&c, _)| {
                let (ia, fa) = a.cell_forms(c, da);
                let (ib, fb) = b.cell_forms(c, db);
                let w = weight.and_then(|w| w.pieces.get(&c));
                (ia, ib, gram(&fa, &fb, w))
            })
            .collect();
        let mut out = Mat::zeros(a.len(), b.len());
        for (ia, ib, g) in blocks {
            for (p, &i) in ia.iter().enumerate() {
                for (q, &j) in ib.iter().enumerate() {
                    out[(i, j)] += g[(p, q)];
                }
            }
        }
        out
    }

    /// v_i = ⟨f, D w_i⟩ over the patch cells.
    pub fn load(&self, derivative: bool, f: &PiecewiseForm, weight: Option<&PiecewiseForm>) -> Vector {
        let blocks: Vec<(Vec<usize>, Mat)> = self
            .local
            .par_iter()
            .filter_map(|(&c, _)| {
                let g = f.pieces.get(&c)?;
                let (ids, forms) = self.cell_forms(c, derivative);
                let w = weight.and_then(|w| w.pieces.get(&c));
                Some((ids, gram(&forms, std::slice::from_ref(g), w)))
            })
            .collect();
        let mut out = Vector::zeros(self.len());
        for (ids, g) in blocks {
            for (p, &i) in ids.iter().enumerate() {
                out[i] += g[(p, 0)];
            }
        }
        out
    }

    /// ∫_σ tr D w_i for a simplex σ of the patch, D = d or the identity.
    pub fn face_integrals(&self, geo: &Geometry, sigma: &Simplex, derivative: bool) -> Vector {
        let mut out = Vector::zeros(self.len());
        let Some(cell) = self.cells.iter().copied().find(|&c| geo.complex.simplex(geo.dim(), c).contains(sigma)) else {
            return out;
        };
        let fc = geo.carrier_of(sigma);
        for (i, f) in &self.local[&cell] {
            let g = if derivative { f.d() } else { f.clone() };
            let t = g.trace(&fc).expect("face of the cell");
            out[*i] = crate::quadrature::integrate(&t).expect("top-degree trace");
        }
        out
    }

    /// Values w_i(p) of 0-forms at a vertex of the patch.
    pub fn point_values(&self, geo: &Geometry, vertex: usize) -> Vector {
        let mut out = Vector::zeros(self.len());
        let s = Simplex(vec![vertex]);
        let Some(cell) = self.cells.iter().copied().find(|&c| geo.complex.simplex(geo.dim(), c).contains(&s)) else {
            return out;
        };
        let carrier = geo.cell(cell);
        let loc = carrier.local_indices(&[vertex]).expect("vertex")[0];
        let mut bary = vec![0.0; carrier.nvars()];
        bary[loc] = 1.0;
        for (i, f) in &self.local[&cell] {
            out[*i] = f.eval(&bary).get(&0).copied().unwrap_or(0.0);
        }
        out
    }
}
