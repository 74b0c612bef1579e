use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{whitney_local, Carrier, Poly, PolyForm};
use crate::scalar::Scalar;
use crate::simplicial::{Simplex, SimplicialComplex};

/// What is known about inter-element continuity of a piecewise form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conformity {
    /// No continuity assumed.
    Broken,
    /// Traces agree on shared faces (H Λ^k conforming).
    Trace,
    /// Star-traces agree across faces and vanish on the boundary of the support.
    StarTrace,
}

/// A form given cell by cell; cells missing from `pieces` carry zero.
#[derive(Clone, Debug)]
pub struct PiecewiseForm<S: Scalar = f64> {
    pub k: usize,
    pub pieces: BTreeMap<usize, PolyForm<S>>,
    pub conformity: Conformity,
}

/// max |a - b| over canonical coefficients.
pub fn canonical_distance(a: &PolyForm<f64>, b: &PolyForm<f64>) -> f64 {
    let deg = a.poly_degree().max(b.poly_degree());
    let ca = a.canonical(deg);
    let mut cb = b.canonical(deg);
    let mut worst: f64 = 0.0;
    for (key, va) in ca {
        let vb = cb.remove(&key).unwrap_or(0.0);
        worst = worst.max((va - vb).abs());
    }
    cb.values().fold(worst, |w, v| w.max(v.abs()))
}

impl<S: Scalar> PiecewiseForm<S> {
    pub fn zero(k: usize, conformity: Conformity) -> Self {
        PiecewiseForm { k, pieces: BTreeMap::new(), conformity }
    }

    pub fn single(cell: usize, form: PolyForm<S>, conformity: Conformity) -> Self {
        let k = form.k;
        let mut pieces = BTreeMap::new();
        pieces.insert(cell, form);
        PiecewiseForm { k, pieces, conformity }
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.pieces.iter().filter(|(_, f)| !f.is_zero()).map(|(&c, _)| c).collect()
    }

    pub fn add_scaled(&mut self, other: &PiecewiseForm<S>, c: &S) {
        assert_eq!(self.k, other.k, "adding forms of different degree");
        if other.conformity != self.conformity {
            self.conformity = Conformity::Broken;
        }
        for (&cell, f) in &other.pieces {
            match self.pieces.get_mut(&cell) {
                Some(g) => g.add_scaled(f, c),
                None => {
                    self.pieces.insert(cell, f.scaled(c));
                }
            }
        }
    }

    pub fn scaled(&self, c: &S) -> Self {
        PiecewiseForm {
            k: self.k,
            pieces: self.pieces.iter().map(|(&i, f)| (i, f.scaled(c))).collect(),
            conformity: self.conformity,
        }
    }

    /// Cellwise map to a new degree; conformity is not tracked through it.
    pub fn map(&self, k: usize, f: impl Fn(&PolyForm<S>) -> PolyForm<S>) -> Self {
        PiecewiseForm {
            k,
            pieces: self.pieces.iter().map(|(&i, g)| (i, f(g))).collect(),
            conformity: Conformity::Broken,
        }
    }

    /// Cellwise exterior derivative; conforming inputs give conforming outputs.
    pub fn d(&self) -> Self {
        PiecewiseForm {
            k: self.k + 1,
            pieces: self.pieces.iter().map(|(&i, f)| (i, f.d())).collect(),
            conformity: self.conformity,
        }
    }

    /// Cellwise coderivative. It is the distributional δ only for star-trace conforming fields.
    pub fn coderivative(&self) -> crate::Result<Self> {
        let mut pieces = BTreeMap::new();
        for (&i, f) in &self.pieces {
            pieces.insert(i, f.coderivative()?);
        }
        Ok(PiecewiseForm { k: self.k - 1, pieces, conformity: Conformity::Broken })
    }

    pub fn hodge_star(&self, n: usize) -> crate::Result<Self> {
        let mut pieces = BTreeMap::new();
        for (&i, f) in &self.pieces {
            pieces.insert(i, f.hodge_star()?);
        }
        Ok(PiecewiseForm { k: n - self.k, pieces, conformity: Conformity::Broken })
    }

    /// Trace onto a face, read off from any piece whose cell contains it.
    pub fn trace(&self, face: &Arc<Carrier<S>>) -> Option<PolyForm<S>> {
        self.pieces
            .values()
            .find(|f| f.carrier.local_indices(&face.vertices).is_some())
            .map(|f| f.trace(face).expect("face of the cell"))
    }

    pub fn poly_degree(&self) -> u32 {
        self.pieces.values().map(PolyForm::poly_degree).max().unwrap_or(0)
    }

    /// Exact equality of all pieces after canonicalization; missing pieces count as zero.
    pub fn equals(&self, other: &Self) -> bool {
        let cells: BTreeSet<usize> = self.pieces.keys().chain(other.pieces.keys()).copied().collect();
        cells.into_iter().all(|c| match (self.pieces.get(&c), other.pieces.get(&c)) {
            (Some(a), Some(b)) => a.equals(b),
            (Some(a), None) | (None, Some(a)) => a.is_zero(),
            (None, None) => true,
        })
    }
}

impl PiecewiseForm<f64> {
    /// Cells whose piece has a coefficient above `tol`.
    pub fn numerical_support(&self, tol: f64) -> BTreeSet<usize> {
        self.pieces.iter().filter(|(_, f)| f.max_abs_coeff() > tol).map(|(&c, _)| c).collect()
    }

    pub fn inner(&self, other: &PiecewiseForm) -> f64 {
        self.pieces
            .iter()
            .filter_map(|(c, f)| other.pieces.get(c).map(|g| crate::quadrature::cell_inner(f, g).expect("same degree")))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn norm_on(&self, cells: &BTreeSet<usize>) -> f64 {
        self.pieces
            .iter()
            .filter(|(c, _)| cells.contains(c))
            .map(|(_, f)| crate::quadrature::cell_inner(f, f).expect("same degree"))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// L² distance, with missing pieces treated as zero.
    pub fn distance(&self, other: &PiecewiseForm) -> f64 {
        let mut diff = self.clone();
        diff.add_scaled(other, &-1.0);
        diff.norm()
    }

    pub fn pruned(&self, tol: f64) -> Self {
        PiecewiseForm {
            k: self.k,
            pieces: self
                .pieces
                .iter()
                .map(|(&c, f)| (c, f.pruned(tol)))
                .filter(|(_, f)| !f.is_zero())
                .collect(),
            conformity: self.conformity,
        }
    }

    /// Largest trace mismatch over facets shared by two cells. With `with_zero_outside`,
    /// facets between a listed and an unlisted cell are compared against zero. Facets on the
    /// domain boundary are not checked.
    pub fn conformity_defect(
        &self,
        complex: &SimplicialComplex,
        carrier_of: &dyn Fn(&Simplex) -> Arc<Carrier<f64>>,
        with_zero_outside: bool,
    ) -> f64 {
        let n = complex.dim();
        let mut worst: f64 = 0.0;
        let mut seen = BTreeSet::new();
        for &cell in self.pieces.keys() {
            for (facet, _) in complex.simplex(n, cell).facets() {
                if !seen.insert(facet.clone()) {
                    continue;
                }
                let star = complex.star_cells(&facet);
                let fc = carrier_of(&facet);
                let traces: Vec<PolyForm<f64>> = star
                    .iter()
                    .filter_map(|c| self.pieces.get(c).map(|f| f.trace(&fc).expect("facet trace")))
                    .collect();
                if traces.len() < star.len() && !with_zero_outside {
                    continue;
                }
                let mut all = traces;
                while all.len() < star.len() {
                    all.push(PolyForm::zero(&fc, self.k));
                }
                for t in &all[1..] {
                    worst = worst.max(canonical_distance(&all[0], t));
                }
            }
        }
        worst
    }
}

/// Global Whitney form φ_σ as pieces on the cells of st(σ).
pub fn whitney_form<S: Scalar>(
    complex: &SimplicialComplex,
    sigma: &Simplex,
    cell_carrier: &dyn Fn(usize) -> Arc<Carrier<S>>,
) -> PiecewiseForm<S> {
    let mut out = PiecewiseForm::zero(sigma.dim(), Conformity::Trace);
    for c in complex.star_cells(sigma) {
        let carrier = cell_carrier(c);
        let local = carrier.local_indices(sigma.vertices()).expect("star cell contains σ");
        out.pieces.insert(c, whitney_local(&carrier, &local));
    }
    out
}

/// Which superposition of element bubbles to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BubbleKind {
    /// b_T of a single n-cell.
    Cell,
    /// Sum over st(τ).
    Star,
    /// Sum over es(σ).
    ExtendedStar,
}

/// Product of the barycentric coordinates of a cell.
pub fn cell_bubble<S: Scalar>(carrier: &Arc<Carrier<S>>) -> PolyForm<S> {
    let nv = carrier.nvars();
    let mut p = Poly::constant(nv, S::one());
    for i in 0..nv {
        p = p.mul(&Poly::var(nv, i));
    }
    PolyForm::scalar(carrier, p)
}

pub fn bubble(
    kind: BubbleKind,
    complex: &SimplicialComplex,
    sigma: &Simplex,
    cell_carrier: &dyn Fn(usize) -> Arc<Carrier<f64>>,
) -> PiecewiseForm {
    let cells = match kind {
        BubbleKind::Cell => {
            assert_eq!(sigma.dim(), complex.dim(), "cell bubble needs an n-simplex");
            vec![complex.index_of(sigma).expect("cell in complex")]
        }
        BubbleKind::Star => complex.star_cells(sigma),
        BubbleKind::ExtendedStar => complex.extended_star_cells(sigma),
    };
    bubble_on(&cells, cell_carrier)
}

/// Σ b_T over the listed cells.
pub fn bubble_on(cells: &[usize], cell_carrier: &dyn Fn(usize) -> Arc<Carrier<f64>>) -> PiecewiseForm {
    let mut out = PiecewiseForm::zero(0, Conformity::Trace);
    for &c in cells {
        out.pieces.insert(c, cell_bubble(&cell_carrier(c)));
    }
    out
}
