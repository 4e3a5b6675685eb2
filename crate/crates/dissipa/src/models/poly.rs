//! Matrix-valued polynomials in `ξ`, used to turn displayed symbols into
//! coefficient families `{L^α}`.

use std::collections::BTreeMap;

use crate::denselin::RMat;
use crate::symbolkit::{CoefficientSystem, MultiIndex, SystemError};

/// Scalar polynomial `Σ c_α ξ^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    d: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    pub fn zero(d: usize) -> Self {
        Poly {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        let mut p = Self::zero(d);
        p.terms.insert(MultiIndex::new(vec![0; d]), c);
        p
    }

    /// `ξ_i`.
    pub fn var(d: usize, i: usize) -> Self {
        let mut p = Self::zero(d);
        p.terms.insert(MultiIndex::unit(d, i), 1.0);
        p
    }

    /// `|ξ|²`.
    pub fn norm_sq(d: usize) -> Self {
        (0..d).fold(Self::zero(d), |acc, i| {
            acc.add(&Self::var(d, i).mul(&Self::var(d, i)))
        })
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            *out.terms.entry(a.clone()).or_insert(0.0) += c;
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Self::zero(self.d);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let e: Vec<u32> = a
                    .entries()
                    .iter()
                    .zip(b.entries())
                    .map(|(x, y)| x + y)
                    .collect();
                *out.terms.entry(MultiIndex::new(e)).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.monomial(xi)).sum()
    }
}

/// `Σ_α M_α ξ^α` with `n × n` matrix coefficients.
#[derive(Debug, Clone)]
pub struct MatPoly {
    n: usize,
    d: usize,
    terms: BTreeMap<MultiIndex, RMat>,
}

impl MatPoly {
    pub fn new(n: usize, d: usize) -> Self {
        MatPoly {
            n,
            d,
            terms: BTreeMap::new(),
        }
    }

    /// Add `p(ξ)` to entry `(r, c)`.
    pub fn add_entry(&mut self, r: usize, c: usize, p: &Poly) -> &mut Self {
        for (a, v) in &p.terms {
            let m = self
                .terms
                .entry(a.clone())
                .or_insert_with(|| RMat::zeros(self.n, self.n));
            m[(r, c)] += v;
        }
        self
    }

    /// Add `p(ξ) M`.
    pub fn add_scaled(&mut self, m: &RMat, p: &Poly) -> &mut Self {
        for (a, v) in &p.terms {
            let acc = self
                .terms
                .entry(a.clone())
                .or_insert_with(|| RMat::zeros(self.n, self.n));
            *acc += m * *v;
        }
        self
    }

    pub fn eval(&self, xi: &[f64]) -> RMat {
        let mut out = RMat::zeros(self.n, self.n);
        for (a, m) in &self.terms {
            out += m * a.monomial(xi);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

/// `A⁰ U_t + lhs(D) U = rhs(D) U` with `D^α ↔ ξ^α`, i.e.
/// `L^α = lhs_α − rhs_α`.
pub fn system_from_sides(
    mass: Option<RMat>,
    lhs: &MatPoly,
    rhs: &MatPoly,
) -> Result<CoefficientSystem, SystemError> {
    let terms = lhs
        .terms
        .iter()
        .map(|(a, m)| (a.clone(), m.clone()))
        .chain(rhs.terms.iter().map(|(a, m)| (a.clone(), -m)));
    CoefficientSystem::from_terms(lhs.n, lhs.d, mass, terms)
}
