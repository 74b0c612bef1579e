//! Symbolic polynomial differential forms on simplices.
//!
//! A [`PolyForm`] is Σ_I p_I dy_I on a [`Carrier`], with each p_I a polynomial in the
//! carrier's barycentric coordinates and I an increasing index set encoded as a bitmask.

mod carrier;
mod piecewise;
mod poly;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use carrier::Carrier;
pub(crate) use carrier::det_generic;
pub use piecewise::{
    bubble, bubble_on, canonical_distance, cell_bubble, whitney_form, BubbleKind, Conformity, PiecewiseForm,
};
pub use poly::{mono_degree, mono_exp, mono_exps, mono_from, mono_unit, monomials_of_degree, Mono, Poly};

use crate::error::{FeecError, Result};
use crate::scalar::{factorial, Scalar};

/// Increasing index set as a bitmask.
pub type IndexSet = u32;

pub fn index_sets(dim: usize, k: usize) -> Vec<IndexSet> {
    (0u32..(1u32 << dim)).filter(|m| m.count_ones() as usize == k).collect()
}

pub fn index_list(set: IndexSet) -> Vec<usize> {
    (0..32).filter(|i| set & (1 << i) != 0).collect()
}

/// Sign of dy_I ∧ dy_J relative to dy_{I∪J}; zero if the sets overlap.
pub fn wedge_sign(a: IndexSet, b: IndexSet) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0;
    for j in index_list(b) {
        inversions += (a >> (j + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug)]
pub struct PolyForm<S: Scalar> {
    pub carrier: Arc<Carrier<S>>,
    pub k: usize,
    pub terms: BTreeMap<IndexSet, Poly<S>>,
}

/// JSON term `{I, mono, coeff}` with 1-based increasing I.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FormTerm {
    #[serde(rename = "I")]
    pub index: Vec<usize>,
    pub mono: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FormJson {
    pub k: usize,
    pub r: u32,
    pub terms: Vec<FormTerm>,
}

impl<S: Scalar> PolyForm<S> {
    pub fn zero(carrier: &Arc<Carrier<S>>, k: usize) -> Self {
        PolyForm { carrier: carrier.clone(), k, terms: BTreeMap::new() }
    }

    pub fn nvars(&self) -> usize {
        self.carrier.nvars()
    }

    pub fn dim(&self) -> usize {
        self.carrier.dim
    }

    /// Scalar (0-form) with the given polynomial.
    pub fn scalar(carrier: &Arc<Carrier<S>>, p: Poly<S>) -> Self {
        let mut f = Self::zero(carrier, 0);
        if !p.is_zero() {
            f.terms.insert(0, p);
        }
        f
    }

    /// Constant k-form dy_I.
    pub fn basis(carrier: &Arc<Carrier<S>>, set: IndexSet) -> Self {
        let mut f = Self::zero(carrier, set.count_ones() as usize);
        f.terms.insert(set, Poly::constant(carrier.nvars(), S::one()));
        f
    }

    /// λ_i as a 0-form.
    pub fn barycentric(carrier: &Arc<Carrier<S>>, i: usize) -> Self {
        Self::scalar(carrier, Poly::var(carrier.nvars(), i))
    }

    /// The local coordinate y_j = Σ_i λ_i y_j(x_i) as a 0-form.
    pub fn coordinate(carrier: &Arc<Carrier<S>>, j: usize) -> Self {
        let mut p = Poly::zero(carrier.nvars());
        for (i, y) in carrier.local_coords.iter().enumerate() {
            p.add_term(mono_unit(i), y[j].clone());
        }
        Self::scalar(carrier, p)
    }

    /// Unit-norm volume form with the carrier's vertex-order orientation (f64 use only).
    pub fn volume_form(carrier: &Arc<Carrier<S>>) -> Self {
        let m = carrier.dim;
        let full: IndexSet = (1u32 << m) - 1;
        let sign = if carrier.edge_det.to_f64() < 0.0 { -1.0 } else { 1.0 };
        let det_g_inv = crate::densela::determinant(&carrier.metric_inv);
        let scale = sign / det_g_inv.sqrt();
        let mut f = Self::zero(carrier, m);
        f.terms.insert(full, Poly::constant(carrier.nvars(), S::from_f64(scale)));
        f
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(Poly::is_zero)
    }

    pub fn poly_degree(&self) -> u32 {
        self.terms.values().map(Poly::degree).max().unwrap_or(0)
    }

    fn insert_add(&mut self, set: IndexSet, p: Poly<S>) {
        if p.is_zero() {
            return;
        }
        let nv = self.nvars();
        let e = self.terms.entry(set).or_insert_with(|| Poly::zero(nv));
        e.add_assign(&p);
        if e.is_zero() {
            self.terms.remove(&set);
        }
    }

    fn check_same(&self, other: &Self) {
        debug_assert!(
            Arc::ptr_eq(&self.carrier, &other.carrier) || self.carrier.vertices == other.carrier.vertices,
            "forms live on different carriers"
        );
        assert_eq!(self.k, other.k, "forms of different degree");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        let mut out = self.clone();
        for (&s, p) in &other.terms {
            out.insert_add(s, p.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(&-S::one()))
    }

    pub fn add_scaled(&mut self, other: &Self, c: &S) {
        self.check_same(other);
        for (&s, p) in &other.terms {
            self.insert_add(s, p.scaled(c));
        }
    }

    pub fn scaled(&self, c: &S) -> Self {
        let mut out = Self::zero(&self.carrier, self.k);
        for (&s, p) in &self.terms {
            out.insert_add(s, p.scaled(c));
        }
        out
    }

    /// Multiplication by a scalar polynomial.
    pub fn mul_poly(&self, q: &Poly<S>) -> Self {
        let mut out = Self::zero(&self.carrier, self.k);
        for (&s, p) in &self.terms {
            out.insert_add(s, p.mul(q));
        }
        out
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.k + other.k > self.dim() {
            return Err(FeecError::Degree { op: "wedge", k: self.k + other.k });
        }
        let mut out = Self::zero(&self.carrier, self.k + other.k);
        for (&a, p) in &self.terms {
            for (&b, q) in &other.terms {
                let s = wedge_sign(a, b);
                if s != 0 {
                    out.insert_add(a | b, p.mul(q).scaled(&S::from_i64(s as i64)));
                }
            }
        }
        Ok(out)
    }

    /// ∂p/∂y_j
    fn coordinate_derivative(&self, p: &Poly<S>, j: usize) -> Poly<S> {
        let mut out = Poly::zero(self.nvars());
        for i in 0..self.nvars() {
            let g = &self.carrier.grads[i][j];
            if !g.is_zero() {
                out.add_scaled(&p.partial(i), g);
            }
        }
        out
    }

    pub fn exterior_derivative(&self) -> Result<Self> {
        if self.k >= self.dim() {
            return Err(FeecError::Degree { op: "exterior derivative", k: self.k });
        }
        let mut out = Self::zero(&self.carrier, self.k + 1);
        for (&set, p) in &self.terms {
            for j in 0..self.dim() {
                if set & (1 << j) != 0 {
                    continue;
                }
                let s = wedge_sign(1 << j, set);
                let dp = self.coordinate_derivative(p, j);
                out.insert_add(set | (1 << j), dp.scaled(&S::from_i64(s as i64)));
            }
        }
        Ok(out)
    }

    /// Exterior derivative, or the zero (k+1)-form when k equals the carrier dimension.
    pub fn d(&self) -> Self {
        self.exterior_derivative().unwrap_or_else(|_| Self::zero(&self.carrier, self.k + 1))
    }

    /// Koszul operator: contraction with y - base (base defaults to the barycenter).
    pub fn koszul(&self, base: Option<&[S]>) -> Result<Self> {
        if self.k == 0 {
            return Err(FeecError::Degree { op: "koszul", k: 0 });
        }
        let base: Vec<S> = match base {
            Some(b) => b.to_vec(),
            None => self.carrier.barycenter_local(),
        };
        let nv = self.nvars();
        let xs: Vec<Poly<S>> = (0..self.dim())
            .map(|j| {
                let mut p = Poly::zero(nv);
                for (i, y) in self.carrier.local_coords.iter().enumerate() {
                    p.add_term(mono_unit(i), y[j].clone() - base[j].clone());
                }
                p
            })
            .collect();
        let mut out = Self::zero(&self.carrier, self.k - 1);
        for (&set, p) in &self.terms {
            for (pos, j) in index_list(set).into_iter().enumerate() {
                let sign = if pos % 2 == 0 { S::one() } else { -S::one() };
                out.insert_add(set & !(1 << j), p.mul(&xs[j]).scaled(&sign));
            }
        }
        Ok(out)
    }

    /// Euclidean Hodge star on an ambient carrier.
    pub fn hodge_star(&self) -> Result<Self> {
        if !self.carrier.ambient {
            return Err(FeecError::Dimension("Hodge star is only defined on n-cells".into()));
        }
        let n = self.dim();
        let full: IndexSet = (1u32 << n) - 1;
        let mut out = Self::zero(&self.carrier, n - self.k);
        for (&set, p) in &self.terms {
            let comp = full & !set;
            let s = wedge_sign(set, comp);
            out.insert_add(comp, p.scaled(&S::from_i64(s as i64)));
        }
        Ok(out)
    }

    pub fn inverse_hodge_star(&self) -> Result<Self> {
        let n = self.dim();
        let j = self.k;
        let s = if (j * (n - j)) % 2 == 0 { S::one() } else { -S::one() };
        Ok(self.hodge_star()?.scaled(&s))
    }

    /// δ_k w = (-1)^k ⋆⁻¹ d ⋆ w
    pub fn coderivative(&self) -> Result<Self> {
        if self.k == 0 {
            return Err(FeecError::Degree { op: "coderivative", k: 0 });
        }
        let star = self.hodge_star()?;
        let d = star.d();
        let out = d.inverse_hodge_star()?;
        Ok(if self.k % 2 == 0 { out } else { out.scaled(&-S::one()) })
    }

    /// Pullback to a face carrier. Returns the zero form when the face is too small.
    pub fn trace(&self, face: &Arc<Carrier<S>>) -> Result<Self> {
        let local = self.carrier.local_indices(&face.vertices).ok_or_else(|| {
            FeecError::Dimension(format!(
                "{:?} is not a face of {:?}",
                face.vertices, self.carrier.vertices
            ))
        })?;
        let mut out = Self::zero(face, self.k);
        if self.k > face.dim {
            return Ok(out);
        }
        let mut map = vec![None; self.nvars()];
        for (j, &i) in local.iter().enumerate() {
            map[i] = Some(j);
        }
        // P[a][b] = ∂y_a / ∂z_b, columns are local edge vectors of the face
        let y = &self.carrier.local_coords;
        let p: Vec<Vec<S>> = (0..self.dim())
            .map(|a| {
                (0..face.dim)
                    .map(|b| y[local[b + 1]][a].clone() - y[local[0]][a].clone())
                    .collect()
            })
            .collect();
        // in a face chart z, the face vertices sit at 0, e_1, ... so P is the pullback
        // matrix only when the face uses the affine chart
        let p = if face.ambient {
            // same simplex: chart change between two ambient charts is the identity
            (0..self.dim())
                .map(|a| (0..face.dim).map(|b| if a == b { S::one() } else { S::zero() }).collect())
                .collect()
        } else {
            p
        };
        let targets = index_sets(face.dim, self.k);
        for (&set, poly) in &self.terms {
            let restricted = poly.restrict(&map, face.nvars());
            if restricted.is_zero() {
                continue;
            }
            let rows = index_list(set);
            for &t in &targets {
                let cols = index_list(t);
                let minor: Vec<Vec<S>> = rows
                    .iter()
                    .map(|&r| cols.iter().map(|&c| p[r][c].clone()).collect())
                    .collect();
                let det = if rows.is_empty() { S::one() } else { det_generic(minor) };
                if !det.is_zero() {
                    out.insert_add(t, restricted.scaled(&det));
                }
            }
        }
        Ok(out)
    }

    /// Coefficients at a barycentric point.
    pub fn eval(&self, bary: &[S]) -> BTreeMap<IndexSet, S> {
        self.terms.iter().map(|(&s, p)| (s, p.eval(bary))).collect()
    }

    /// ∫ over the carrier of a top-degree form, oriented by the vertex order.
    pub fn integrate(&self) -> Result<S> {
        let m = self.dim();
        if self.k != m {
            return Err(FeecError::Degree { op: "integrate", k: self.k });
        }
        let full: IndexSet = if m == 0 { 0 } else { (1u32 << m) - 1 };
        let p = match self.terms.get(&full) {
            Some(p) => p,
            None => return Ok(S::zero()),
        };
        let nv = self.nvars();
        let mut acc = S::zero();
        for (&mono, c) in &p.terms {
            acc = acc + c.clone() * bary_moment_ref::<S>(mono, nv);
        }
        Ok(acc * self.carrier.edge_det.clone())
    }

    /// Canonical coefficient map: every component homogenized to a common degree.
    pub fn canonical(&self, deg: u32) -> BTreeMap<(IndexSet, Mono), S> {
        let mut out = BTreeMap::new();
        for (&s, p) in &self.terms {
            for (m, c) in p.homogenized(deg) {
                if !c.is_zero() {
                    out.insert((s, m), c);
                }
            }
        }
        out
    }

    /// Exact symbolic equality (after canonicalization).
    pub fn equals(&self, other: &Self) -> bool {
        let deg = self.poly_degree().max(other.poly_degree());
        self.k == other.k && self.canonical(deg) == other.canonical(deg)
    }

    pub fn map_scalar<T: Scalar>(&self, carrier: &Arc<Carrier<T>>, f: impl Fn(&S) -> T) -> PolyForm<T> {
        PolyForm {
            carrier: carrier.clone(),
            k: self.k,
            terms: self
                .terms
                .iter()
                .map(|(&s, p)| (s, p.map_scalar(&f)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(Poly::max_abs).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> FormJson {
        let mut terms = Vec::new();
        for (&s, p) in &self.terms {
            for (&m, c) in &p.terms {
                terms.push(FormTerm {
                    index: index_list(s).into_iter().map(|i| i + 1).collect(),
                    mono: mono_exps(m, self.nvars()),
                    coeff: c.to_f64(),
                });
            }
        }
        FormJson { k: self.k, r: self.poly_degree(), terms }
    }

    pub fn from_json(carrier: &Arc<Carrier<S>>, json: &FormJson) -> Result<Self> {
        let mut out = Self::zero(carrier, json.k);
        for t in &json.terms {
            if t.index.len() != json.k || t.mono.len() != carrier.nvars() {
                return Err(FeecError::Dimension("term does not match carrier".into()));
            }
            let set = t.index.iter().fold(0u32, |acc, &i| acc | (1 << (i - 1)));
            out.insert_add(set, Poly::monomial(carrier.nvars(), mono_from(&t.mono), S::from_f64(t.coeff)));
        }
        Ok(out)
    }
}

/// ∫ λ^α over the reference m-simplex: α! / (|α| + m)!
pub fn bary_moment_ref<S: Scalar>(mono: Mono, nvars: usize) -> S {
    let m = nvars - 1;
    let mut num = S::one();
    let mut total = 0usize;
    for i in 0..nvars {
        let e = mono_exp(mono, i) as usize;
        total += e;
        num = num * factorial::<S>(e);
    }
    num / factorial::<S>(total + m)
}

/// ∫_σ λ^α dvol = |σ| m! α! / (|α| + m)!
pub fn bary_moment(mono: Mono, nvars: usize, volume: f64) -> f64 {
    let m = nvars - 1;
    volume * factorial::<f64>(m) * bary_moment_ref::<f64>(mono, nvars)
}

impl PolyForm<f64> {
    /// L² inner product over the carrier, exact via barycentric moments.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.k, other.k, "inner product of forms of different degree");
        let nv = self.nvars();
        let vol = self.carrier.volume;
        let ip = |p: &Poly<f64>, q: &Poly<f64>| -> f64 {
            let mut acc = 0.0;
            for (&a, ca) in &p.terms {
                for (&b, cb) in &q.terms {
                    acc += ca * cb * bary_moment(a + b, nv, vol);
                }
            }
            acc
        };
        let ginv = &self.carrier.metric_inv;
        let orthonormal = self.carrier.ambient || self.carrier.dim == 0;
        let mut acc = 0.0;
        for (&i, p) in &self.terms {
            for (&j, q) in &other.terms {
                let w = if orthonormal {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let ri = index_list(i);
                    let cj = index_list(j);
                    let minor: Vec<Vec<f64>> =
                        ri.iter().map(|&r| cj.iter().map(|&c| ginv[r][c]).collect()).collect();
                    if ri.is_empty() {
                        1.0
                    } else {
                        crate::densela::determinant(&minor)
                    }
                };
                if w != 0.0 {
                    acc += w * ip(p, q);
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Drops negligible coefficients.
    pub fn pruned(&self, tol: f64) -> Self {
        PolyForm {
            carrier: self.carrier.clone(),
            k: self.k,
            terms: self
                .terms
                .iter()
                .map(|(&s, p)| (s, p.pruned(tol)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    /// Coefficient values at many barycentric points: out[set_pos][point].
    pub fn values_at(&self, sets: &[IndexSet], points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let nv = self.nvars();
        let maxdeg = self.poly_degree() as usize;
        // powers[var][e][pt]
        let powers: Vec<Vec<Vec<f64>>> = (0..nv)
            .map(|v| {
                let mut rows = vec![vec![1.0; points.len()]];
                for e in 1..=maxdeg {
                    let prev = &rows[e - 1];
                    let next: Vec<f64> = prev.iter().zip(points).map(|(a, p)| a * p[v]).collect();
                    rows.push(next);
                }
                rows
            })
            .collect();
        sets.iter()
            .map(|s| {
                let mut vals = vec![0.0; points.len()];
                if let Some(p) = self.terms.get(s) {
                    for (&m, &c) in &p.terms {
                        let exps = mono_exps(m, nv);
                        for (q, val) in vals.iter_mut().enumerate() {
                            let mut t = c;
                            for (v, &e) in exps.iter().enumerate() {
                                if e > 0 {
                                    t *= powers[v][e as usize][q];
                                }
                            }
                            *val += t;
                        }
                    }
                }
                vals
            })
            .collect()
    }
}

/// Whitney form φ_σ = k! Σ_j (-1)^j λ_{i_j} dλ_{i_0} ∧ .. ^ .. ∧ dλ_{i_k} on a carrier,
/// where `local` lists the local vertex positions of σ.
pub fn whitney_local<S: Scalar>(carrier: &Arc<Carrier<S>>, local: &[usize]) -> PolyForm<S> {
    let k = local.len() - 1;
    let dl: Vec<PolyForm<S>> =
        local.iter().map(|&i| PolyForm::barycentric(carrier, i).d()).collect();
    let mut out = PolyForm::zero(carrier, k);
    for j in 0..=k {
        let mut w = PolyForm::barycentric(carrier, local[j]);
        for (i, f) in dl.iter().enumerate() {
            if i != j {
                w = w.wedge(f).expect("degree within carrier dimension");
            }
        }
        let sign = if j % 2 == 0 { S::one() } else { -S::one() };
        out.add_scaled(&w, &sign);
    }
    out.scaled(&factorial::<S>(k))
}

#[cfg(test)]
mod tests;
