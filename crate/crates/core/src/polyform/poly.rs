//! Sparse polynomials in barycentric coordinates.

use std::collections::BTreeMap;

use crate::scalar::Scalar;

/// Packed exponent vector, 8 bits per variable.
pub type Mono = u64;

/// Monomials pack one 8-bit exponent per variable.
pub const MAX_VARS: usize = 8;

pub fn mono_exp(m: Mono, i: usize) -> u32 {
    ((m >> (8 * i)) & 0xff) as u32
}

pub fn mono_degree(m: Mono, nvars: usize) -> u32 {
    (0..nvars).map(|i| mono_exp(m, i)).sum()
}

pub fn mono_from(exps: &[u32]) -> Mono {
    exps.iter().enumerate().fold(0, |acc, (i, &e)| {
        debug_assert!(e < 256);
        acc | ((e as u64) << (8 * i))
    })
}

pub fn mono_unit(i: usize) -> Mono {
    1u64 << (8 * i)
}

pub fn mono_exps(m: Mono, nvars: usize) -> Vec<u32> {
    (0..nvars).map(|i| mono_exp(m, i)).collect()
}

/// All exponent vectors in `nvars` variables with total degree exactly `deg`.
pub fn monomials_of_degree(nvars: usize, deg: u32) -> Vec<Mono> {
    fn rec(nvars: usize, i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Mono>) {
        if i + 1 == nvars {
            cur.push(left);
            out.push(mono_from(cur));
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(nvars, i + 1, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        return out;
    }
    rec(nvars, 0, deg, &mut Vec::new(), &mut out);
    out
}

/// Polynomial in the barycentric coordinates λ_0..λ_m of a carrier simplex.
///
/// The representation is not unique because Σλ = 1; see [`Poly::homogenized`].
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S: Scalar> {
    pub nvars: usize,
    pub terms: BTreeMap<Mono, S>,
}

impl<S: Scalar> Poly<S> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: S) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(0, c);
        }
        p
    }

    pub fn monomial(nvars: usize, m: Mono, c: S) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    /// λ_i
    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(nvars, mono_unit(i), S::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&m| mono_degree(m, self.nvars)).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Mono, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add_assign(&mut self, other: &Poly<S>) {
        for (&m, c) in &other.terms {
            self.add_term(m, c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &Poly<S>, s: &S) {
        if s.is_zero() {
            return;
        }
        for (&m, c) in &other.terms {
            self.add_term(m, c.clone() * s.clone());
        }
    }

    pub fn scaled(&self, s: &S) -> Poly<S> {
        let mut p = Self::zero(self.nvars);
        p.add_scaled(self, s);
        p
    }

    pub fn neg(&self) -> Poly<S> {
        self.scaled(&-S::one())
    }

    pub fn mul(&self, other: &Poly<S>) -> Poly<S> {
        let mut p = Self::zero(self.nvars);
        for (&a, ca) in &self.terms {
            for (&b, cb) in &other.terms {
                p.add_term(a + b, ca.clone() * cb.clone());
            }
        }
        p
    }

    /// ∂/∂λ_i treating the barycentric coordinates as independent.
    pub fn partial(&self, i: usize) -> Poly<S> {
        let mut p = Self::zero(self.nvars);
        for (&m, c) in &self.terms {
            let e = mono_exp(m, i);
            if e > 0 {
                p.add_term(m - mono_unit(i), c.clone() * S::from_i64(e as i64));
            }
        }
        p
    }

    /// Restriction to a face: `map[i]` is the new index of λ_i or `None` if λ_i vanishes there.
    pub fn restrict(&self, map: &[Option<usize>], new_nvars: usize) -> Poly<S> {
        let mut p = Self::zero(new_nvars);
        'terms: for (&m, c) in &self.terms {
            let mut nm = 0u64;
            for (i, target) in map.iter().enumerate() {
                let e = mono_exp(m, i);
                match target {
                    Some(j) => nm += (e as u64) << (8 * j),
                    None if e > 0 => continue 'terms,
                    None => {}
                }
            }
            p.add_term(nm, c.clone());
        }
        p
    }

    pub fn eval(&self, bary: &[S]) -> S {
        let mut acc = S::zero();
        for (&m, c) in &self.terms {
            let mut t = c.clone();
            for (i, b) in bary.iter().enumerate().take(self.nvars) {
                for _ in 0..mono_exp(m, i) {
                    t = t * b.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Rewrites as a homogeneous polynomial of degree `deg` (≥ self.degree()).
    ///
    /// Homogeneous barycentric polynomials of fixed degree are linearly independent
    /// on the simplex, so this is a canonical form.
    pub fn homogenized(&self, deg: u32) -> BTreeMap<Mono, S> {
        let sum: Poly<S> = {
            let mut s = Self::zero(self.nvars);
            for i in 0..self.nvars {
                s.add_term(mono_unit(i), S::one());
            }
            s
        };
        let mut by_degree: BTreeMap<u32, Poly<S>> = BTreeMap::new();
        for (&m, c) in &self.terms {
            by_degree
                .entry(mono_degree(m, self.nvars))
                .or_insert_with(|| Self::zero(self.nvars))
                .add_term(m, c.clone());
        }
        let mut out = Self::zero(self.nvars);
        for (d, mut p) in by_degree {
            assert!(d <= deg, "homogenization degree below polynomial degree");
            for _ in d..deg {
                p = p.mul(&sum);
            }
            out.add_assign(&p);
        }
        out.terms
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Poly<T> {
        let mut p = Poly::zero(self.nvars);
        for (&m, c) in &self.terms {
            p.add_term(m, f(c));
        }
        p
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.abs_f64()).fold(0.0, f64::max)
    }
}

impl Poly<f64> {
    /// Drops coefficients below `tol` in absolute value.
    pub fn pruned(&self, tol: f64) -> Poly<f64> {
        let mut p = self.clone();
        p.terms.retain(|_, c| c.abs() > tol);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_enumeration_counts() {
        assert_eq!(monomials_of_degree(3, 2).len(), 6);
        assert_eq!(monomials_of_degree(4, 3).len(), 20);
        assert_eq!(monomials_of_degree(1, 5), vec![mono_from(&[5])]);
    }

    #[test]
    fn homogenization_is_canonical() {
        // λ0 + λ1 + λ2 = 1 on a triangle
        let mut p = Poly::<f64>::zero(3);
        for i in 0..3 {
            p.add_term(mono_unit(i), 1.0);
        }
        let one = Poly::constant(3, 1.0);
        assert_eq!(p.homogenized(2), one.homogenized(2));
    }

    #[test]
    fn restriction_drops_vanishing_vars() {
        let p = Poly::<f64>::var(3, 0).mul(&Poly::var(3, 2)).scaled(&2.0);
        let q = p.restrict(&[Some(0), None, Some(1)], 2);
        assert_eq!(q.terms.get(&mono_from(&[1, 1])), Some(&2.0));
        let z = p.restrict(&[Some(0), Some(1), None], 2);
        assert!(z.is_zero());
    }
}
