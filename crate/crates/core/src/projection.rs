//! De Rham and Whitney maps, the weight-based lowest order projection Π_{1,r}, the patch
//! operators U, the correction Q and the commuting projection π = Π_{1,r} + Q(I - Π_{1,r}).
//!
//! On each cell T the projection is a finite sum of pairings with fixed weights times fixed
//! output forms. [`LocalOperator`] stores exactly that, which makes locality visible and
//! lets many inputs share one setup.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use once_cell::sync::OnceCell;
use rayon::prelude::*;

use crate::densela::{self, Mat};
use crate::error::{FeecError, Result};
use crate::fespace::{DofKey, FeSpace, Geometry};
use crate::polyform::{cell_bubble, index_sets, Carrier, Conformity, PiecewiseForm, PolyForm};
use crate::quadrature::{self, gram, Callback};
use crate::scalar::Scalar;
use crate::simplicial::{subsets, Cochain, Simplex, SimplicialComplex};
use crate::weights::Weights;

/// de Rham map R^k u(σ) = ∫_σ tr u, exact for polynomial pieces and any scalar field.
pub fn de_rham<S: Scalar>(
    complex: &SimplicialComplex,
    u: &PiecewiseForm<S>,
    carrier_of: &dyn Fn(&Simplex) -> Arc<Carrier<S>>,
) -> Result<Vec<S>> {
    let k = u.k;
    let mut out = Vec::with_capacity(complex.count(k));
    for s in complex.simplices(k) {
        let fc = carrier_of(s);
        let v = match u.trace(&fc) {
            Some(t) => t.integrate()?,
            None => S::zero(),
        };
        out.push(v);
    }
    Ok(out)
}

/// Whitney interpolant W^k X = Σ X(σ) φ_σ.
pub fn whitney_interpolant<S: Scalar>(
    complex: &SimplicialComplex,
    k: usize,
    x: &[S],
    cell_carrier: &dyn Fn(usize) -> Arc<Carrier<S>>,
) -> PiecewiseForm<S> {
    let mut out = PiecewiseForm::zero(k, Conformity::Trace);
    for (i, c) in x.iter().enumerate() {
        if !c.is_zero() {
            let phi = crate::polyform::whitney_form(complex, complex.simplex(k, i), cell_carrier);
            out.add_scaled(&phi, c);
        }
    }
    out
}

/// Floating de Rham cochain of a piecewise form.
pub fn de_rham_cochain(geo: &Geometry, u: &PiecewiseForm) -> Result<Cochain> {
    let coeffs = de_rham(&geo.complex, u, &|s| geo.carrier_of(s))?;
    Ok(Cochain { k: u.k, coeffs })
}

/// Input of a projection: an exact piecewise polynomial or a pointwise callback.
#[derive(Clone, Copy)]
pub enum Input<'a> {
    Form(&'a PiecewiseForm),
    /// coefficients ordered as `index_sets(n, k)`; paired by quadrature of degree deg(weight) + `extra`
    Callback { k: usize, f: Callback<'a>, extra: u32 },
}

impl Input<'_> {
    pub fn k(&self) -> usize {
        match self {
            Input::Form(u) => u.k,
            Input::Callback { k, .. } => *k,
        }
    }

    pub fn pair(&self, w: &PiecewiseForm) -> f64 {
        match self {
            Input::Form(u) => u.inner(w),
            Input::Callback { f, extra, .. } => quadrature::l2_inner_callback(w, *f, None, *extra),
        }
    }

    pub fn is_callback(&self) -> bool {
        matches!(self, Input::Callback { .. })
    }
}

/// π restricted to one cell: πu|_T = Σ_o outputs[o] · (coeff · [⟨u, f⟩]_f)_o.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    pub cell: usize,
    pub k: usize,
    pub functionals: Vec<PiecewiseForm>,
    pub outputs: Vec<PolyForm<f64>>,
    /// outputs × functionals
    pub coeff: Mat,
}

impl LocalOperator {
    pub fn apply(&self, u: &Input) -> PolyForm<f64> {
        let vals: Vec<f64> = self.functionals.iter().map(|f| u.pair(f)).collect();
        self.combine(&vals)
    }

    fn combine(&self, vals: &[f64]) -> PolyForm<f64> {
        let mut out = PolyForm::zero(&self.outputs[0].carrier, self.k);
        for (o, f) in self.outputs.iter().enumerate() {
            let c: f64 = (0..vals.len()).map(|j| self.coeff[(o, j)] * vals[j]).sum();
            if c != 0.0 {
                out.add_scaled(f, &c);
            }
        }
        out
    }

    /// Cells on which some functional has a piece.
    pub fn footprint(&self) -> BTreeSet<usize> {
        self.functionals.iter().flat_map(|f| f.pieces.keys().copied()).collect()
    }

    /// Matrix of functional values on a list of inputs that each live on a single cell.
    pub fn functional_matrix(&self, inputs: &[(usize, PolyForm<f64>)]) -> Mat {
        let mut by_cell: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (j, (c, _)) in inputs.iter().enumerate() {
            by_cell.entry(*c).or_default().push(j);
        }
        let mut out = Mat::zeros(self.functionals.len(), inputs.len());
        for (c, ids) in by_cell {
            let fs: Vec<(usize, &PolyForm<f64>)> =
                self.functionals.iter().enumerate().filter_map(|(i, f)| f.pieces.get(&c).map(|p| (i, p))).collect();
            if fs.is_empty() {
                continue;
            }
            let a: Vec<PolyForm<f64>> = fs.iter().map(|(_, p)| (*p).clone()).collect();
            let b: Vec<PolyForm<f64>> = ids.iter().map(|&j| inputs[j].1.clone()).collect();
            let g = gram(&a, &b, None);
            for (p, (i, _)) in fs.iter().enumerate() {
                for (q, &j) in ids.iter().enumerate() {
                    out[(*i, j)] = g[(p, q)];
                }
            }
        }
        out
    }

    /// sup ‖πu‖_{L²(T)} / ‖u‖ over inputs given by an L²-orthonormal list of single-cell forms.
    pub fn norm_on(&self, inputs: &[(usize, PolyForm<f64>)]) -> f64 {
        if self.outputs.is_empty() {
            return 0.0;
        }
        let f = self.functional_matrix(inputs);
        let carrier = &self.outputs[0].carrier;
        let n = carrier.dim;
        let deg = self.outputs.iter().map(PolyForm::poly_degree).max().unwrap_or(0) * 2;
        let rule = quadrature::rule(n, deg);
        let sets = index_sets(n, self.k);
        let nq = rule.weights.len();
        let scale = carrier.volume * crate::scalar::factorial::<f64>(n);
        let mut o = Mat::zeros(sets.len() * nq, self.outputs.len());
        for (j, out) in self.outputs.iter().enumerate() {
            let vals = out.values_at(&sets, &rule.points);
            for (s, row) in vals.iter().enumerate() {
                for q in 0..nq {
                    o[(s * nq + q, j)] = row[q] * (rule.weights[q] * scale).sqrt();
                }
            }
        }
        let a = o * &self.coeff * f;
        let aat = &a * a.transpose();
        aat.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
    }
}

/// Patch operator values and the pairings ⟨φ_σ', U⟩ needed by Q on one simplex.
#[derive(Debug)]
struct Correction {
    /// U(τ, g) for g in the breve basis order
    u: Vec<PiecewiseForm>,
    /// for each g: (k-simplex σ', ⟨φ_σ', U(τ, g)⟩)
    phi_pairs: Vec<Vec<(usize, f64)>>,
}

/// The commuting projection at one polynomial degree, for all form degrees.
pub struct Projector {
    pub fe: Arc<FeSpace>,
    pub weights: Arc<Weights>,
    corrections: Vec<Vec<Vec<OnceCell<Arc<Correction>>>>>,
    locals: Vec<Vec<OnceCell<Arc<LocalOperator>>>>,
}

impl Projector {
    pub fn new(fe: Arc<FeSpace>, weights: Arc<Weights>) -> Self {
        assert_eq!(fe.r, weights.r, "space and weights must share r");
        let n = fe.dim();
        let complex = fe.complex();
        let corrections = (0..=n)
            .map(|_| (0..=n).map(|d| (0..complex.count(d)).map(|_| OnceCell::new()).collect()).collect())
            .collect();
        let locals = (0..=n).map(|_| (0..complex.count(n)).map(|_| OnceCell::new()).collect()).collect();
        Projector { fe, weights, corrections, locals }
    }

    pub fn r(&self) -> usize {
        self.fe.r
    }

    fn geo(&self) -> &Geometry {
        &self.fe.geo
    }

    /// Π_{1,r} u on the given cells (all cells when None).
    pub fn pi_low(&self, k: usize, u: &Input, cells: Option<&[usize]>) -> Result<PiecewiseForm> {
        let geo = self.geo();
        let complex = &geo.complex;
        let n = complex.dim();
        let targets = self.targets(cells);
        let mut sigmas = BTreeSet::new();
        for &c in &targets {
            for sub in subsets(complex.simplex(n, c).vertices(), k + 1) {
                sigmas.insert(complex.index_of(&Simplex(sub)).expect("face"));
            }
        }
        let mut out = PiecewiseForm::zero(k, Conformity::Trace);
        for s in sigmas {
            let c = u.pair(&self.weights.get(k, s)?.z);
            let mut phi = geo.whitney(k, s);
            phi.pieces.retain(|cell, _| targets.contains(cell));
            out.add_scaled(&phi, &c);
        }
        Ok(out)
    }

    fn targets(&self, cells: Option<&[usize]>) -> Vec<usize> {
        match cells {
            Some(c) => c.to_vec(),
            None => (0..self.fe.complex().count(self.fe.dim())).collect(),
        }
    }

    /// U(τ, g) for all g in the breve basis of the simplex (dim, idx), in that order.
    pub fn u_op(&self, k: usize, dim: usize, idx: usize) -> Result<Vec<PiecewiseForm>> {
        Ok(self.correction(k, dim, idx)?.u.clone())
    }

    fn correction(&self, k: usize, dim: usize, idx: usize) -> Result<Arc<Correction>> {
        self.corrections[k][dim][idx]
            .get_or_try_init(|| {
                let fs = match self.fe.form_spaces(k, dim, idx)? {
                    Some(sp) => sp,
                    None => return Ok(Arc::new(Correction { u: Vec::new(), phi_pairs: Vec::new() })),
                };
                let f = &fs.forms[k];
                let mut u = self.bubble_solve(k, dim, idx, &f.exact)?;
                if !f.complement.is_empty() {
                    let up = self.correction(k + 1, dim, idx)?;
                    for i in 0..f.complement.len() {
                        u.push(up.u[i].coderivative()?);
                    }
                }
                let geo = self.geo();
                let complex = &geo.complex;
                let star = complex.star_cells(complex.simplex(dim, idx));
                let mut near = BTreeSet::new();
                for &c in &star {
                    for sub in subsets(complex.simplex(complex.dim(), c).vertices(), k + 1) {
                        near.insert(complex.index_of(&Simplex(sub)).expect("face"));
                    }
                }
                let phis: Vec<(usize, PiecewiseForm)> = near.into_iter().map(|s| (s, geo.whitney(k, s))).collect();
                let phi_pairs = u
                    .iter()
                    .map(|w| phis.iter().map(|(s, p)| (*s, p.inner(w))).collect())
                    .collect();
                Ok(Arc::new(Correction { u, phi_pairs }))
            })
            .cloned()
    }

    /// 𝖻_τ β with β ∈ M_r^k(st_h(τ)) and ⟨𝖻_τ β, m⟩ = ⟨g, tr_τ m⟩_τ for all m ∈ M_r^k(st_h(τ)).
    pub fn bubble_solve(&self, k: usize, dim: usize, idx: usize, gs: &[PolyForm<f64>]) -> Result<Vec<PiecewiseForm>> {
        if gs.is_empty() {
            return Ok(Vec::new());
        }
        let fe = &*self.fe;
        let geo = self.geo();
        let complex = &geo.complex;
        let tau = complex.simplex(dim, idx).clone();
        let tau_carrier = geo.carrier(dim, idx);
        let n = complex.dim();
        let star = complex.star_cells(&tau);
        // basis of M_r^k on the star: all ψ except face-integral duals
        let mut index: BTreeMap<DofKey, usize> = BTreeMap::new();
        let mut per_cell: Vec<(usize, Vec<(usize, PolyForm<f64>)>)> = Vec::new();
        for &c in &star {
            let cs = fe.cell_space(k, c)?;
            let mut list = Vec::new();
            for (pos, key) in cs.dofs.iter().enumerate() {
                if key.is_volume(k) {
                    continue;
                }
                let next = index.len();
                let i = *index.entry(*key).or_insert(next);
                list.push((i, cs.psi[pos].clone()));
            }
            per_cell.push((c, list));
        }
        let nb = index.len();
        let mut a = Mat::zeros(nb, nb);
        let mut rhs = Mat::zeros(nb, gs.len());
        let mut traced = vec![false; nb];
        for (c, list) in &per_cell {
            let b = cell_bubble(&geo.cell(*c));
            let forms: Vec<PolyForm<f64>> = list.iter().map(|(_, f)| f.clone()).collect();
            let g = gram(&forms, &forms, Some(&b));
            for (p, (i, _)) in list.iter().enumerate() {
                for (q, (j, _)) in list.iter().enumerate() {
                    a[(*i, *j)] += g[(p, q)];
                }
            }
            let traces: Vec<(usize, PolyForm<f64>)> = list
                .iter()
                .filter(|(i, _)| !traced[*i])
                .map(|(i, f)| (*i, if dim == n { f.clone() } else { f.trace(&tau_carrier).expect("τ is a face of its star") }))
                .collect();
            if traces.is_empty() {
                continue;
            }
            let tf: Vec<PolyForm<f64>> = traces.iter().map(|(_, f)| f.clone()).collect();
            let gt = gram(&tf, gs, None);
            for (p, (i, _)) in traces.iter().enumerate() {
                traced[*i] = true;
                for j in 0..gs.len() {
                    rhs[(*i, j)] = gt[(p, j)];
                }
            }
        }
        let beta = densela::solve_spd(&a, &rhs)?;
        let mut out = Vec::with_capacity(gs.len());
        for j in 0..gs.len() {
            let mut u = PiecewiseForm::zero(k, Conformity::StarTrace);
            for (c, list) in &per_cell {
                let carrier = geo.cell(*c);
                let mut f = PolyForm::zero(&carrier, k);
                for (i, p) in list {
                    f.add_scaled(p, &beta[(*i, j)]);
                }
                let b = cell_bubble(&carrier);
                u.pieces.insert(*c, f.mul_poly(&b.terms[&0]));
            }
            out.push(u);
        }
        Ok(out)
    }

    /// Q u = Σ_σ Σ_g ⟨u, U(σ,g)⟩ E_σ g on the given cells.
    pub fn q_op(&self, k: usize, u: &Input, cells: Option<&[usize]>) -> Result<PiecewiseForm> {
        let fe = &*self.fe;
        let complex = fe.complex();
        let n = complex.dim();
        let targets = self.targets(cells);
        let mut coeffs = BTreeMap::new();
        for &c in &targets {
            for dim in k..=n {
                for sub in subsets(complex.simplex(n, c).vertices(), dim + 1) {
                    let idx = complex.index_of(&Simplex(sub)).expect("face");
                    let off = fe.breve_offset(k, dim);
                    if coeffs.contains_key(&DofKey { dim, simplex: idx, index: off }) {
                        continue;
                    }
                    for (i, w) in self.correction(k, dim, idx)?.u.iter().enumerate() {
                        coeffs.insert(DofKey { dim, simplex: idx, index: off + i }, u.pair(w));
                    }
                }
            }
        }
        fe.assemble(k, &coeffs, Some(&targets))
    }

    /// π restricted to one cell, built once and cached.
    pub fn local_operator(&self, k: usize, cell: usize) -> Result<Arc<LocalOperator>> {
        self.locals[k][cell].get_or_try_init(|| self.build_local(k, cell).map(Arc::new)).cloned()
    }

    fn build_local(&self, k: usize, cell: usize) -> Result<LocalOperator> {
        let fe = &*self.fe;
        let geo = self.geo();
        let complex = &geo.complex;
        let n = complex.dim();
        let verts = complex.simplex(n, cell).vertices().to_vec();
        let cs = fe.cell_space(k, cell)?;
        let mut functionals: Vec<PiecewiseForm> = Vec::new();
        let mut z_index: HashMap<usize, usize> = HashMap::new();
        let mut outputs: Vec<PolyForm<f64>> = Vec::new();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut z_of = |s: usize, functionals: &mut Vec<PiecewiseForm>| -> Result<usize> {
            if let Some(&i) = z_index.get(&s) {
                return Ok(i);
            }
            functionals.push(self.weights.get(k, s)?.z.clone());
            z_index.insert(s, functionals.len() - 1);
            Ok(functionals.len() - 1)
        };
        // lowest order part
        for sub in subsets(&verts, k + 1) {
            let s = complex.index_of(&Simplex(sub)).expect("face");
            let zi = z_of(s, &mut functionals)?;
            let phi = geo.whitney(k, s);
            outputs.push(phi.pieces[&cell].clone());
            entries.push((outputs.len() - 1, zi, 1.0));
        }
        // correction Σ ⟨u - Π u, U⟩ ψ
        for dim in k..=n {
            for sub in subsets(&verts, dim + 1) {
                let idx = complex.index_of(&Simplex(sub)).expect("face");
                let corr = self.correction(k, dim, idx)?;
                let off = fe.breve_offset(k, dim);
                for (i, w) in corr.u.iter().enumerate() {
                    let key = DofKey { dim, simplex: idx, index: off + i };
                    outputs.push(cs.psi_of(&key).expect("dof of the cell").clone());
                    let o = outputs.len() - 1;
                    functionals.push(w.clone());
                    entries.push((o, functionals.len() - 1, 1.0));
                    for &(s, pair) in &corr.phi_pairs[i] {
                        if pair != 0.0 {
                            let zi = z_of(s, &mut functionals)?;
                            entries.push((o, zi, -pair));
                        }
                    }
                }
            }
        }
        let mut coeff = Mat::zeros(outputs.len(), functionals.len());
        for (o, f, v) in entries {
            coeff[(o, f)] += v;
        }
        Ok(LocalOperator { cell, k, functionals, outputs, coeff })
    }

    /// π u on the given cells (all cells when None).
    pub fn project(&self, k: usize, u: &Input, cells: Option<&[usize]>) -> Result<PiecewiseForm> {
        if u.k() != k {
            return Err(FeecError::Degree { op: "project", k: u.k() });
        }
        let targets = self.targets(cells);
        let pieces: Result<Vec<(usize, PolyForm<f64>)>> = targets
            .par_iter()
            .map(|&c| Ok((c, self.local_operator(k, c)?.apply(u))))
            .collect();
        Ok(PiecewiseForm { k, pieces: pieces?.into_iter().collect(), conformity: Conformity::Trace })
    }

    /// π applied to many inputs at once on one cell.
    pub fn project_many(&self, k: usize, inputs: &[PiecewiseForm], cell: usize) -> Result<Vec<PolyForm<f64>>> {
        let op = self.local_operator(k, cell)?;
        Ok(inputs.iter().map(|u| op.apply(&Input::Form(u))).collect())
    }

    /// Exact local operator norm on cell T over broken polynomial inputs of degree `degree`
    /// supported on `domain`.
    pub fn local_norm(&self, k: usize, cell: usize, domain: &[usize], degree: u32) -> Result<f64> {
        let op = self.local_operator(k, cell)?;
        let inputs = orthonormal_inputs(self.geo(), domain, k, degree);
        Ok(op.norm_on(&inputs))
    }
}

/// L²-orthonormal basis of broken P_p Λ^k on each listed cell.
pub fn orthonormal_inputs(geo: &Geometry, cells: &[usize], k: usize, degree: u32) -> Vec<(usize, PolyForm<f64>)> {
    let mut out = Vec::new();
    for &c in cells {
        let carrier = geo.cell(c);
        let nv = carrier.nvars();
        let mut forms = Vec::new();
        for set in index_sets(carrier.dim, k) {
            for m in crate::polyform::monomials_of_degree(nv, degree) {
                let mut f = PolyForm::zero(&carrier, k);
                f.terms.insert(set, crate::polyform::Poly::monomial(nv, m, 1.0));
                forms.push(f);
            }
        }
        let g = gram(&forms, &forms, None);
        let on = densela::orthonormal_span(&g, 1e-13);
        for j in 0..on.ncols() {
            let mut f = PolyForm::zero(&carrier, k);
            for (i, b) in forms.iter().enumerate() {
                f.add_scaled(b, &on[(i, j)]);
            }
            out.push((c, f));
        }
    }
    out
}

/// A global polynomial k-form Σ_I p_I(x) dx_I with random coefficients of total degree ≤ `degree`,
/// written out on every cell.
pub fn random_global_form(geo: &Geometry, k: usize, degree: u32, rng: &mut impl rand::Rng) -> PiecewiseForm {
    let n = geo.dim();
    let sets = index_sets(n, k);
    // monomials x^e with |e| ≤ degree
    let mut exps: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..n {
        exps = exps
            .into_iter()
            .flat_map(|e| {
                let used: u32 = e.iter().sum();
                (0..=degree - used).map(move |a| {
                    let mut f = e.clone();
                    f.push(a);
                    f
                })
            })
            .collect();
    }
    let coeffs: Vec<Vec<f64>> = sets.iter().map(|_| exps.iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut out = PiecewiseForm::zero(k, Conformity::Trace);
    for c in 0..geo.complex.count(n) {
        let carrier = geo.cell(c);
        let nv = carrier.nvars();
        let xs: Vec<crate::polyform::Poly<f64>> =
            (0..n).map(|j| PolyForm::coordinate(&carrier, j).terms.remove(&0).unwrap_or_else(|| crate::polyform::Poly::zero(nv))).collect();
        let mut f = PolyForm::zero(&carrier, k);
        for (si, &set) in sets.iter().enumerate() {
            let mut p = crate::polyform::Poly::zero(nv);
            for (ei, e) in exps.iter().enumerate() {
                let mut m = crate::polyform::Poly::constant(nv, coeffs[si][ei]);
                for (j, &a) in e.iter().enumerate() {
                    for _ in 0..a {
                        m = m.mul(&xs[j]);
                    }
                }
                p.add_assign(&m);
            }
            f.terms.insert(set, p);
        }
        out.pieces.insert(c, f);
    }
    out
}

#[cfg(test)]
mod tests;
