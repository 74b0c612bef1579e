//! Simplicial complexes of a triangulation, chains/cochains and patch queries.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{FeecError, Result};

/// An oriented simplex given by strictly increasing global vertex ids.
///
/// The default orientation is the one induced by the global vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Simplex(pub Vec<usize>);

impl Simplex {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Simplex(ids)
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, other: &Simplex) -> bool {
        other.0.iter().all(|v| self.0.binary_search(v).is_ok())
    }

    /// Faces obtained by dropping one vertex, with the sign (-1)^j of the boundary formula.
    pub fn facets(&self) -> impl Iterator<Item = (Simplex, i32)> + '_ {
        (0..self.0.len()).map(move |j| {
            let mut v = self.0.clone();
            v.remove(j);
            (Simplex(v), if j % 2 == 0 { 1 } else { -1 })
        })
    }
}

/// Coefficient vector over Δ_k, used for both chains and cochains.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub k: usize,
    pub coeffs: Vec<f64>,
}

pub type Cochain = Chain;

impl Chain {
    pub fn zeros(k: usize, len: usize) -> Self {
        Chain { k, coeffs: vec![0.0; len] }
    }

    pub fn basis(k: usize, len: usize, idx: usize) -> Self {
        let mut c = Self::zeros(k, len);
        c.coeffs[idx] = 1.0;
        c
    }

    /// Pairing of a cochain with a chain of the same degree.
    pub fn pair(&self, chain: &Chain) -> f64 {
        self.coeffs.iter().zip(&chain.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Mesh size statistics used as the empirical home of the shape-regularity constant.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub shape_regularity_constant: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub star_sizes: Vec<Vec<usize>>,
}

/// JSON mesh file: `{dim, vertices, cells}` with 0-based ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

/// Simplicial complex of a conforming triangulation in ℝⁿ.
///
/// Immutable after construction, all queries take `&self`.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    n: usize,
    coords: Vec<Vec<f64>>,
    simplices: Vec<Vec<Simplex>>,
    index: Vec<HashMap<Simplex, usize>>,
    /// boundary[k][i] = faces of the k-simplex i with alternating signs (k ≥ 1)
    boundary: Vec<Vec<Vec<(usize, i32)>>>,
    /// star[k][i] = n-cells containing the k-simplex i
    star: Vec<Vec<Vec<usize>>>,
    /// vertex -> n-cells containing it
    cell_orientation: Vec<i32>,
    h: Vec<Vec<f64>>,
    rho: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Unsigned k-volume of the simplex spanned by `pts` (k+1 points) via the Gram determinant.
pub fn simplex_volume(pts: &[&[f64]]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let e: Vec<Vec<f64>> = (1..=k)
        .map(|i| pts[i].iter().zip(pts[0]).map(|(a, b)| a - b).collect())
        .collect();
    let g = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let det = g.determinant().max(0.0);
    let mut fact = 1.0;
    for i in 2..=k {
        fact *= i as f64;
    }
    det.sqrt() / fact
}

fn permutation_parity(v: &[usize]) -> i32 {
    let mut sign = 1;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                sign = -sign;
            }
        }
    }
    sign
}

impl SimplicialComplex {
    /// Builds the full complex from vertex coordinates and n-cells.
    pub fn build(vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let n = match vertices.first() {
            Some(v) => v.len(),
            None => return Err(FeecError::Dimension("no vertices".into())),
        };
        if vertices.iter().any(|v| v.len() != n) {
            return Err(FeecError::Dimension("vertices of mixed dimension".into()));
        }
        if cells.is_empty() {
            return Err(FeecError::Dimension("no cells".into()));
        }
        let mut cell_orientation = Vec::with_capacity(cells.len());
        let mut top = Vec::with_capacity(cells.len());
        let mut seen = HashMap::new();
        for (ci, c) in cells.iter().enumerate() {
            if c.len() != n + 1 {
                return Err(FeecError::Dimension(format!(
                    "cell {ci} has {} vertices, expected {}",
                    c.len(),
                    n + 1
                )));
            }
            for &v in c {
                if v >= vertices.len() {
                    return Err(FeecError::VertexOutOfRange { index: v, count: vertices.len() });
                }
            }
            let s = Simplex::new(c.clone());
            if s.0.len() != n + 1 {
                return Err(FeecError::DegenerateCell { cell: ci, volume: 0.0 });
            }
            let pts: Vec<&[f64]> = s.0.iter().map(|&v| vertices[v].as_slice()).collect();
            let vol = simplex_volume(&pts);
            let scale = pts.iter().skip(1).map(|p| dist(p, pts[0])).fold(0.0, f64::max);
            if !(vol > 1e-12 * scale.powi(n as i32)) {
                return Err(FeecError::DegenerateCell { cell: ci, volume: vol });
            }
            if seen.insert(s.clone(), ci).is_some() {
                return Err(FeecError::DuplicateCell(ci));
            }
            cell_orientation.push(permutation_parity(c));
            top.push(s);
        }

        let mut simplices: Vec<Vec<Simplex>> = vec![Vec::new(); n + 1];
        let mut index: Vec<HashMap<Simplex, usize>> = vec![HashMap::new(); n + 1];
        for (i, s) in top.iter().enumerate() {
            index[n].insert(s.clone(), i);
        }
        simplices[n] = top;
        for k in (0..n).rev() {
            let mut set = BTreeSet::new();
            for s in &simplices[k + 1] {
                for (f, _) in s.facets() {
                    set.insert(f);
                }
            }
            simplices[k] = set.into_iter().collect();
            for (i, s) in simplices[k].iter().enumerate() {
                index[k].insert(s.clone(), i);
            }
        }
        let mut boundary = vec![Vec::new(); n + 1];
        for k in 1..=n {
            boundary[k] = simplices[k]
                .iter()
                .map(|s| s.facets().map(|(f, sg)| (index[k - 1][&f], sg)).collect())
                .collect();
        }
        let mut star: Vec<Vec<Vec<usize>>> =
            (0..=n).map(|k| vec![Vec::new(); simplices[k].len()]).collect();
        for (ci, c) in simplices[n].iter().enumerate() {
            for k in 0..=n {
                for sub in subsets(&c.0, k + 1) {
                    let idx = index[k][&Simplex(sub)];
                    star[k][idx].push(ci);
                }
            }
        }
        let mut complex = SimplicialComplex {
            n,
            coords: vertices,
            simplices,
            index,
            boundary,
            star,
            cell_orientation,
            h: Vec::new(),
            rho: Vec::new(),
        };
        complex.compute_sizes();
        Ok(complex)
    }

    pub fn from_mesh_file(file: &MeshFile) -> Result<Self> {
        let c = Self::build(file.vertices.clone(), file.cells.clone())?;
        if c.n != file.dim {
            return Err(FeecError::MeshFile(format!(
                "declared dim {} but vertices have {} coordinates",
                file.dim, c.n
            )));
        }
        Ok(c)
    }

    pub fn to_mesh_file(&self) -> MeshFile {
        MeshFile {
            dim: self.n,
            vertices: self.coords.clone(),
            cells: self.simplices[self.n].iter().map(|s| s.0.clone()).collect(),
        }
    }

    /// Freudenthal (Kuhn) triangulation of [0,1]^n with m divisions per axis.
    pub fn structured(n: usize, m: usize) -> Result<Self> {
        if !(1..=3).contains(&n) || m == 0 {
            return Err(FeecError::Dimension(format!("structured mesh needs n in 1..=3 and m >= 1 (got n={n}, m={m})")));
        }
        let side = m + 1;
        let id = |idx: &[usize]| idx.iter().rev().fold(0, |acc, &i| acc * side + i);
        let mut vertices = Vec::new();
        let total = side.pow(n as u32);
        for lin in 0..total {
            let mut rem = lin;
            let mut p = vec![0.0; n];
            for x in p.iter_mut() {
                *x = (rem % side) as f64 / m as f64;
                rem /= side;
            }
            vertices.push(p);
        }
        let perms = permutations(n);
        let mut cells = Vec::new();
        for lin in 0..m.pow(n as u32) {
            let mut rem = lin;
            let mut corner = vec![0usize; n];
            for c in corner.iter_mut() {
                *c = rem % m;
                rem /= m;
            }
            for perm in &perms {
                let mut cur = corner.clone();
                let mut cell = vec![id(&cur)];
                for &axis in perm {
                    cur[axis] += 1;
                    cell.push(id(&cur));
                }
                cells.push(cell);
            }
        }
        Self::build(vertices, cells)
    }

    fn compute_sizes(&mut self) {
        let n = self.n;
        let mut h = vec![Vec::new(); n + 1];
        for k in 0..=n {
            h[k] = (0..self.simplices[k].len())
                .map(|i| {
                    let verts: Vec<usize> = if k == 0 {
                        let mut set = BTreeSet::new();
                        for &c in &self.star[0][i] {
                            set.extend(self.simplices[n][c].0.iter().copied());
                        }
                        set.into_iter().collect()
                    } else {
                        self.simplices[k][i].0.clone()
                    };
                    let mut d: f64 = 0.0;
                    for a in 0..verts.len() {
                        for b in a + 1..verts.len() {
                            d = d.max(dist(&self.coords[verts[a]], &self.coords[verts[b]]));
                        }
                    }
                    d
                })
                .collect();
        }
        self.rho = self.simplices[n]
            .iter()
            .map(|c| {
                let pts: Vec<&[f64]> = c.0.iter().map(|&v| self.coords[v].as_slice()).collect();
                let vol = simplex_volume(&pts);
                if n == 1 {
                    return vol;
                }
                let area: f64 = (0..=n)
                    .map(|j| {
                        let f: Vec<&[f64]> =
                            pts.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, p)| *p).collect();
                        simplex_volume(&f)
                    })
                    .sum();
                2.0 * n as f64 * vol / area
            })
            .collect();
        self.h = h;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn point(&self, v: usize) -> &[f64] {
        &self.coords[v]
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        &self.simplices[k]
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, Vec::len)
    }

    pub fn simplex(&self, k: usize, i: usize) -> &Simplex {
        &self.simplices[k][i]
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.index.get(s.dim())?.get(s).copied()
    }

    pub fn cells(&self) -> &[Simplex] {
        &self.simplices[self.n]
    }

    /// Orientation of input cell i relative to its sorted vertex order.
    pub fn cell_orientation(&self, i: usize) -> i32 {
        self.cell_orientation[i]
    }

    /// h_σ: diameter of σ for dim σ > 0, diameter of st(σ) for vertices.
    pub fn h(&self, k: usize, i: usize) -> f64 {
        self.h[k][i]
    }

    /// Inscribed-ball diameter of cell i.
    pub fn rho(&self, cell: usize) -> f64 {
        self.rho[cell]
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        let pts: Vec<&[f64]> = self.simplices[self.n][cell].0.iter().map(|&v| self.coords[v].as_slice()).collect();
        simplex_volume(&pts)
    }

    pub fn simplex_volume(&self, s: &Simplex) -> f64 {
        let pts: Vec<&[f64]> = s.0.iter().map(|&v| self.coords[v].as_slice()).collect();
        simplex_volume(&pts)
    }

    /// Signed faces of the k-simplex i.
    pub fn boundary_of(&self, k: usize, i: usize) -> &[(usize, i32)] {
        &self.boundary[k][i]
    }

    /// Test hook for negative controls: flips one sign of the boundary matrix ∂_k.
    pub fn flip_boundary_sign(&mut self, k: usize, simplex: usize, face_pos: usize) {
        self.boundary[k][simplex][face_pos].1 *= -1;
    }

    /// Boundary map ∂_k on chains.
    pub fn boundary(&self, c: &Chain) -> Result<Chain> {
        let k = c.k;
        if k == 0 || k > self.n {
            return Err(FeecError::Degree { op: "boundary", k });
        }
        let mut out = Chain::zeros(k - 1, self.count(k - 1));
        for (i, &a) in c.coeffs.iter().enumerate() {
            if a != 0.0 {
                for &(f, s) in &self.boundary[k][i] {
                    out.coeffs[f] += s as f64 * a;
                }
            }
        }
        Ok(out)
    }

    /// Coboundary 𝖽^k X(τ) = X(∂τ), the transpose of ∂_{k+1}.
    pub fn coboundary(&self, x: &Cochain) -> Result<Cochain> {
        let k = x.k;
        if k >= self.n {
            return Err(FeecError::Degree { op: "coboundary", k });
        }
        let coeffs = self.boundary[k + 1]
            .iter()
            .map(|faces| faces.iter().map(|&(f, s)| s as f64 * x.coeffs[f]).sum())
            .collect();
        Ok(Cochain { k: k + 1, coeffs })
    }

    /// Largest absolute entry of the integer matrix ∂_k ∂_{k+1}, over all k.
    pub fn boundary_boundary_defect(&self) -> i64 {
        let mut worst = 0i64;
        for k in 1..self.n {
            for faces in &self.boundary[k + 1] {
                let mut acc: HashMap<usize, i64> = HashMap::new();
                for &(f, s) in faces {
                    for &(g, t) in &self.boundary[k][f] {
                        *acc.entry(g).or_default() += (s * t) as i64;
                    }
                }
                worst = worst.max(acc.values().map(|v| v.abs()).max().unwrap_or(0));
            }
        }
        worst
    }

    /// Largest absolute entry of 𝖽^{k+1}𝖽^k applied to all basis cochains.
    pub fn coboundary_coboundary_defect(&self) -> i64 {
        // (𝖽𝖽)^T = ∂∂ entrywise, so the matrices have the same entries
        self.boundary_boundary_defect()
    }

    /// n-cells containing σ.
    pub fn star_cells(&self, s: &Simplex) -> Vec<usize> {
        match self.index_of(s) {
            Some(i) => self.star[s.dim()][i].clone(),
            None => Vec::new(),
        }
    }

    /// n-cells meeting σ in at least one vertex.
    pub fn extended_star_cells(&self, s: &Simplex) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for &v in &s.0 {
            set.extend(self.star[0][v].iter().copied());
        }
        set.into_iter().collect()
    }

    /// es²(σ): union of es(T) over cells T ⊆ es(σ).
    pub fn extended_star2_cells(&self, s: &Simplex) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for c in self.extended_star_cells(s) {
            set.extend(self.extended_star_cells(&self.simplices[self.n][c]));
        }
        set.into_iter().collect()
    }

    /// st_h, es_h and es²_h of σ.
    pub fn star_sets(&self, s: &Simplex) -> StarSets {
        StarSets {
            star: self.star_cells(s),
            extended: self.extended_star_cells(s),
            extended2: self.extended_star2_cells(s),
        }
    }

    /// All n-cells adjacent (sharing a vertex) with any cell of `cells`.
    pub fn grow(&self, cells: &[usize]) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for &c in cells {
            set.extend(self.extended_star_cells(&self.simplices[self.n][c]));
        }
        set.into_iter().collect()
    }

    pub fn shape_report(&self) -> ShapeReport {
        let n = self.n;
        let mut c_s: f64 = 0.0;
        for (i, _) in self.simplices[n].iter().enumerate() {
            c_s = c_s.max(self.h[n][i] / self.rho[i]);
        }
        let all_h = self.h.iter().skip(1).flatten().copied();
        let (h_min, h_max) = all_h.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
        ShapeReport {
            shape_regularity_constant: c_s,
            h_min,
            h_max,
            star_sizes: (0..=n).map(|k| self.star[k].iter().map(Vec::len).collect()).collect(),
        }
    }

    /// Sub-complex spanned by a set of n-cells.
    pub fn patch(&self, cells: &[usize]) -> Patch {
        let n = self.n;
        let mut cells: Vec<usize> = cells.to_vec();
        cells.sort_unstable();
        cells.dedup();
        let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
        let mut facet_count: HashMap<usize, usize> = HashMap::new();
        for &c in &cells {
            let cell = &self.simplices[n][c];
            for k in 0..=n {
                for sub in subsets(&cell.0, k + 1) {
                    let idx = self.index[k][&Simplex(sub)];
                    members[k].insert(idx);
                    if k + 1 == n {
                        *facet_count.entry(idx).or_default() += 1;
                    }
                }
            }
        }
        let mut on_boundary: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
        if n >= 1 {
            for (&f, &cnt) in &facet_count {
                if cnt == 1 {
                    let facet = &self.simplices[n - 1][f];
                    for k in 0..n {
                        for sub in subsets(&facet.0, k + 1) {
                            on_boundary[k].insert(self.index[k][&Simplex(sub)]);
                        }
                    }
                }
            }
        }
        Patch {
            cells,
            simplices: members.into_iter().map(|s| s.into_iter().collect()).collect(),
            boundary: on_boundary,
        }
    }

    /// Necessary proxy for contractibility of a patch: connected and Euler characteristic 1.
    pub fn contractibility_proxy(&self, patch: &Patch) -> (bool, i64) {
        let chi: i64 = (0..=self.n)
            .map(|k| if k % 2 == 0 { 1 } else { -1 } * patch.simplices[k].len() as i64)
            .sum();
        // union-find over cells through shared facets
        let cells = &patch.cells;
        let pos: HashMap<usize, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut parent: Vec<usize> = (0..cells.len()).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            let mut i = i;
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        if self.n >= 1 {
            for &f in &patch.simplices[self.n - 1] {
                let owners: Vec<usize> = self.star[self.n - 1][f]
                    .iter()
                    .filter_map(|c| pos.get(c).copied())
                    .collect();
                for w in owners.windows(2) {
                    let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                    parent[a] = b;
                }
            }
        }
        let roots: BTreeSet<usize> = (0..cells.len()).map(|i| find(&mut parent, i)).collect();
        (roots.len() == 1 && chi == 1, chi)
    }
}

/// st_h(σ) ⊆ es_h(σ) ⊆ es²_h(σ) as sorted cell index lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarSets {
    pub star: Vec<usize>,
    pub extended: Vec<usize>,
    pub extended2: Vec<usize>,
}

/// Sub-triangulation given by a set of n-cells, with its simplices and boundary complex.
#[derive(Clone, Debug)]
pub struct Patch {
    pub cells: Vec<usize>,
    /// simplices[k] = sorted global indices of the k-simplices of the patch
    pub simplices: Vec<Vec<usize>>,
    /// boundary[k] = k-simplices lying in the boundary of the patch
    pub boundary: Vec<BTreeSet<usize>>,
}

impl Patch {
    pub fn is_boundary(&self, k: usize, idx: usize) -> bool {
        self.boundary[k].contains(&idx)
    }
}

/// All increasing sub-tuples of length `len`.
pub fn subsets(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], len: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, len, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if len <= items.len() {
        rec(items, len, 0, &mut Vec::with_capacity(len), &mut out);
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> SimplicialComplex {
        SimplicialComplex::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_counts() {
        let c = triangle();
        assert_eq!((c.count(0), c.count(1), c.count(2)), (3, 3, 1));
    }

    #[test]
    fn shared_edge_stored_once() {
        let c = SimplicialComplex::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![vec![0, 1, 2], vec![1, 3, 2]],
        )
        .unwrap();
        assert_eq!(c.count(1), 5);
        assert_eq!(c.cell_orientation(1), -1);
    }

    #[test]
    fn structured_square_counts_match_enumeration() {
        let c = SimplicialComplex::structured(2, 2).unwrap();
        // oracle: exhaustive count of distinct edges from the cell list
        let mut edges = BTreeSet::new();
        for cell in c.cells() {
            for e in subsets(&cell.0, 2) {
                edges.insert(e);
            }
        }
        assert_eq!(c.count(0), 9);
        assert_eq!(edges.len(), 16);
        assert_eq!(c.count(1), 16);
        assert_eq!(c.count(2), 8);
        assert_eq!(c.count(0) as i64 - c.count(1) as i64 + c.count(2) as i64, 1);
    }

    #[test]
    fn structured_interval_and_cube() {
        let c1 = SimplicialComplex::structured(1, 4).unwrap();
        assert_eq!((c1.count(0), c1.count(1)), (5, 4));
        let c3 = SimplicialComplex::structured(3, 1).unwrap();
        assert_eq!((c3.count(0), c3.count(3)), (8, 6));
        let vol: f64 = (0..6).map(|i| c3.cell_volume(i)).sum();
        assert!((vol - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors_on_bad_cells() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            SimplicialComplex::build(v.clone(), vec![vec![0, 1, 2]]),
            Err(FeecError::DegenerateCell { .. })
        ));
        assert!(matches!(
            SimplicialComplex::build(v.clone(), vec![vec![0, 1, 3], vec![3, 1, 0]]),
            Err(FeecError::DuplicateCell(1))
        ));
        assert!(matches!(
            SimplicialComplex::build(v, vec![vec![0, 1]]),
            Err(FeecError::Dimension(_))
        ));
    }

    #[test]
    fn boundary_formula() {
        let c = triangle();
        let t = Chain::basis(2, 1, 0);
        let b = c.boundary(&t).unwrap();
        // ∂[0,1,2] = [1,2] - [0,2] + [0,1]
        let e = |a, b| c.index_of(&Simplex(vec![a, b])).unwrap();
        assert_eq!(b.coeffs[e(1, 2)], 1.0);
        assert_eq!(b.coeffs[e(0, 2)], -1.0);
        assert_eq!(b.coeffs[e(0, 1)], 1.0);
        let bb = c.boundary(&b).unwrap();
        assert!(bb.coeffs.iter().all(|&x| x == 0.0));
        let eb = c.boundary(&Chain::basis(1, 3, e(0, 1))).unwrap();
        assert_eq!(eb.coeffs, vec![-1.0, 1.0, 0.0]);
        assert!(c.boundary(&Chain::basis(0, 3, 0)).is_err());
    }

    #[test]
    fn coboundary_on_edge() {
        let c = SimplicialComplex::build(vec![vec![0.0], vec![1.0]], vec![vec![0, 1]]).unwrap();
        let x1 = Cochain::basis(0, 2, 1);
        assert_eq!(c.coboundary(&x1).unwrap().coeffs, vec![1.0]);
        assert!(c.coboundary(&Cochain::basis(1, 1, 0)).is_err());
    }

    #[test]
    fn coboundary_matches_definition_on_fan() {
        // five triangles around the origin
        let mut v = vec![vec![0.0, 0.0]];
        for i in 0..5 {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 5.0;
            v.push(vec![a.cos(), a.sin()]);
        }
        let cells: Vec<Vec<usize>> = (0..5).map(|i| vec![0, 1 + i, 1 + (i + 1) % 5]).collect();
        let c = SimplicialComplex::build(v, cells).unwrap();
        assert_eq!(c.boundary_boundary_defect(), 0);
        for k in 0..2 {
            for s in 0..c.count(k) {
                let x = Cochain::basis(k, c.count(k), s);
                let dx = c.coboundary(&x).unwrap();
                // oracle: evaluate X(∂τ) by the alternating formula on vertex lists
                for (t, tau) in c.simplices(k + 1).iter().enumerate() {
                    let mut val = 0.0;
                    for (f, sg) in tau.facets() {
                        if c.index_of(&f) == Some(s) {
                            val += sg as f64;
                        }
                    }
                    assert_eq!(dx.coeffs[t], val);
                }
                if k == 0 {
                    let ddx = c.coboundary(&dx).unwrap();
                    assert!(ddx.coeffs.iter().all(|&a| a == 0.0));
                }
            }
        }
    }

    #[test]
    fn star_sets_nesting() {
        let c = SimplicialComplex::structured(2, 4).unwrap();
        let center = c.coords().iter().position(|p| p == &vec![0.5, 0.5]).unwrap();
        let s = Simplex(vec![center]);
        let st = c.star_sets(&s);
        assert_eq!(st.star.len(), 6);
        assert_eq!(st.star, st.extended);
        assert!(st.extended2.len() > st.extended.len());
        assert!(st.extended.iter().all(|x| st.extended2.contains(x)));
        let t = triangle();
        for k in 0..=2 {
            for s in t.simplices(k) {
                let ss = t.star_sets(s);
                assert_eq!(ss.star, vec![0]);
                assert_eq!(ss.extended2, vec![0]);
            }
        }
    }

    #[test]
    fn star_is_antitone() {
        let c = SimplicialComplex::structured(2, 3).unwrap();
        for e in c.simplices(1) {
            let st_e = c.star_cells(e);
            for &v in &e.0 {
                let st_v = c.star_cells(&Simplex(vec![v]));
                assert!(st_e.iter().all(|x| st_v.contains(x)));
            }
        }
    }

    #[test]
    fn patch_boundary_and_proxy() {
        let c = SimplicialComplex::structured(2, 4).unwrap();
        let center = c.coords().iter().position(|p| p == &vec![0.5, 0.5]).unwrap();
        let p = c.patch(&c.extended_star_cells(&Simplex(vec![center])));
        assert!(!p.is_boundary(0, center));
        assert_eq!(p.boundary[1].len(), 6);
        assert_eq!(c.contractibility_proxy(&p), (true, 1));
    }

    #[test]
    fn shape_report_is_finite() {
        let r = SimplicialComplex::structured(3, 2).unwrap().shape_report();
        assert!(r.shape_regularity_constant.is_finite() && r.shape_regularity_constant > 1.0);
        assert!(r.h_min > 0.0 && r.h_max >= r.h_min);
    }
}
