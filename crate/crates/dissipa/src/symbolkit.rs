//! Constant-coefficient systems `U_t + Σ_α L^α D^α U = 0` and their
//! Fourier symbols, split into odd (transport) and even (viscosity) parts.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denselin::{self, eig_general, CMat, LinalgError, RMat};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SystemError {
    #[error("matrix `{what}` has shape {got:?}, expected {want:?}")]
    Shape {
        what: String,
        got: (usize, usize),
        want: (usize, usize),
    },
    #[error("multi-index {alpha:?} has length {got}, expected spatial dimension {d}")]
    IndexDim {
        alpha: Vec<u32>,
        got: usize,
        d: usize,
    },
    #[error("multi-index {alpha:?} has order {order} above the declared maximum {m}")]
    OrderTooHigh { alpha: Vec<u32>, order: u32, m: u32 },
    #[error("system has no derivative term (every multi-index has order 0)")]
    NoDerivative,
    #[error("mass matrix is not symmetric positive definite: {0}")]
    Mass(String),
    #[error("spatial dimension must be at least 1")]
    ZeroDim,
    #[error("state dimension must be at least 1")]
    ZeroState,
    #[error("non-finite entry in `{0}`")]
    NonFinite(String),
    #[error("frequency must be non-zero with {d} finite components")]
    BadFrequency { d: usize },
    #[error("document error: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Error)]
pub enum SymbolError {
    #[error("eigensolver failed at xi = {xi:?}: {source}")]
    Eigen { xi: Vec<f64>, source: LinalgError },
    #[error("dispersion residual {residual:e} above bound {bound:e} at xi = {xi:?}")]
    Residual {
        xi: Vec<f64>,
        residual: f64,
        bound: f64,
    },
}

/// Multi-index `α = (α_1, …, α_d)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `x^α = Π x_i^{α_i}`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &v)| v.powi(a as i32))
            .product()
    }

    /// All multi-indices of dimension `d` and exact order `k`.
    pub fn all_of_order(d: usize, k: u32) -> Vec<MultiIndex> {
        fn rec(d: usize, k: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() == d - 1 {
                cur.push(k);
                out.push(MultiIndex(cur.clone()));
                cur.pop();
                return;
            }
            for a in (0..=k).rev() {
                cur.push(a);
                rec(d, k - a, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if d > 0 {
            rec(d, k, &mut Vec::new(), &mut out);
        }
        out
    }

    /// Unit index `e_i` in dimension `d`.
    pub fn unit(d: usize, i: usize) -> MultiIndex {
        let mut v = vec![0; d];
        v[i] = 1;
        MultiIndex(v)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// The family `{L^α}` together with the mass matrix `A⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSystem {
    n: usize,
    d: usize,
    m: u32,
    mass: RMat,
    coeffs: BTreeMap<MultiIndex, RMat>,
}

fn check_finite(what: &str, m: &RMat) -> Result<(), SystemError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SystemError::NonFinite(what.to_string()))
    }
}

impl CoefficientSystem {
    pub fn new(
        n: usize,
        d: usize,
        m: u32,
        mass: Option<RMat>,
        coeffs: BTreeMap<MultiIndex, RMat>,
    ) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::ZeroState);
        }
        if d == 0 {
            return Err(SystemError::ZeroDim);
        }
        let mass = mass.unwrap_or_else(|| RMat::identity(n, n));
        if mass.shape() != (n, n) {
            return Err(SystemError::Shape {
                what: "mass".into(),
                got: mass.shape(),
                want: (n, n),
            });
        }
        check_finite("mass", &mass)?;
        let asym = (&mass - mass.transpose()).norm();
        if asym > 1e-12 * mass.norm() {
            return Err(SystemError::Mass(format!("asymmetry {asym:e}")));
        }
        match denselin::min_eig_sym_real(&mass) {
            Ok(l) if l > 0.0 => {}
            Ok(l) => return Err(SystemError::Mass(format!("smallest eigenvalue {l:e}"))),
            Err(e) => return Err(SystemError::Mass(e.to_string())),
        }
        let mut has_derivative = false;
        for (alpha, mat) in &coeffs {
            if alpha.dim() != d {
                return Err(SystemError::IndexDim {
                    alpha: alpha.0.clone(),
                    got: alpha.dim(),
                    d,
                });
            }
            if alpha.order() > m {
                return Err(SystemError::OrderTooHigh {
                    alpha: alpha.0.clone(),
                    order: alpha.order(),
                    m,
                });
            }
            if mat.shape() != (n, n) {
                return Err(SystemError::Shape {
                    what: format!("L^{:?}", alpha.0),
                    got: mat.shape(),
                    want: (n, n),
                });
            }
            check_finite(&format!("L^{:?}", alpha.0), mat)?;
            if alpha.order() >= 1 {
                has_derivative = true;
            }
        }
        if !has_derivative {
            return Err(SystemError::NoDerivative);
        }
        Ok(CoefficientSystem {
            n,
            d,
            m,
            mass,
            coeffs,
        })
    }

    /// Build from a list of terms, summing repeated multi-indices and taking
    /// `m` as the largest order present.
    pub fn from_terms<I>(
        n: usize,
        d: usize,
        mass: Option<RMat>,
        terms: I,
    ) -> Result<Self, SystemError>
    where
        I: IntoIterator<Item = (MultiIndex, RMat)>,
    {
        let mut coeffs: BTreeMap<MultiIndex, RMat> = BTreeMap::new();
        for (alpha, mat) in terms {
            if mat.shape() != (n, n) {
                return Err(SystemError::Shape {
                    what: format!("L^{:?}", alpha.0),
                    got: mat.shape(),
                    want: (n, n),
                });
            }
            match coeffs.get_mut(&alpha) {
                Some(acc) => *acc += mat,
                None => {
                    coeffs.insert(alpha, mat);
                }
            }
        }
        coeffs.retain(|_, v| v.iter().any(|&x| x != 0.0));
        let m = coeffs.keys().map(|a| a.order()).max().unwrap_or(0);
        Self::new(n, d, m, mass, coeffs)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn mass(&self) -> &RMat {
        &self.mass
    }
    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, RMat> {
        &self.coeffs
    }

    /// Relaxation block `L^0` (zero if absent).
    pub fn relaxation(&self) -> RMat {
        self.coeffs
            .get(&MultiIndex(vec![0; self.d]))
            .cloned()
            .unwrap_or_else(|| RMat::zeros(self.n, self.n))
    }

    pub fn has_relaxation(&self) -> bool {
        self.relaxation().iter().any(|&x| x != 0.0)
    }

    /// Same system with `A⁰` folded into the coefficients: `(I, (A⁰)^{-1} L^α)`.
    pub fn fold_mass(&self) -> CoefficientSystem {
        let lu = self.mass.clone().lu();
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, l)| (a.clone(), lu.solve(l).expect("mass is positive definite")))
            .collect();
        CoefficientSystem {
            n: self.n,
            d: self.d,
            m: self.m,
            mass: RMat::identity(self.n, self.n),
            coeffs,
        }
    }
}

/// A non-zero frequency `ξ` with radius `|ξ|` and direction `ω = ξ/|ξ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub xi: Vec<f64>,
    pub radius: f64,
    pub direction: Vec<f64>,
}

impl FrequencyPoint {
    pub fn new(xi: Vec<f64>) -> Result<Self, SystemError> {
        let d = xi.len();
        if d == 0 || xi.iter().any(|x| !x.is_finite()) {
            return Err(SystemError::BadFrequency { d });
        }
        let radius = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(radius > 0.0) {
            return Err(SystemError::BadFrequency { d });
        }
        let direction = xi.iter().map(|x| x / radius).collect();
        Ok(FrequencyPoint {
            xi,
            radius,
            direction,
        })
    }

    /// `ξ = r·ω` for a unit direction (renormalised).
    pub fn from_polar(radius: f64, direction: &[f64]) -> Result<Self, SystemError> {
        let d = direction.len();
        let nrm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(radius > 0.0) || !(nrm > 0.0) || !radius.is_finite() {
            return Err(SystemError::BadFrequency { d });
        }
        let direction: Vec<f64> = direction.iter().map(|x| x / nrm).collect();
        let xi = direction.iter().map(|w| w * radius).collect();
        Ok(FrequencyPoint {
            xi,
            radius,
            direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Real transport symbol `A(ξ)` and viscosity symbol `B(ξ)` at one frequency.
#[derive(Debug, Clone)]
pub struct SymbolPair {
    pub a_sym: RMat,
    pub b_sym: RMat,
    pub at: FrequencyPoint,
}

impl SymbolPair {
    /// `i|ξ|A(ξ) + B(ξ)`.
    pub fn combined(&self) -> CMat {
        let r = self.at.radius;
        self.a_sym.map(|x| Complex64::new(0.0, r * x)) + denselin::to_complex(&self.b_sym)
    }
}

fn sign_pow(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Odd/even splitting of the symbol at `p`:
/// `A = Σ_{|α| odd} |ξ|^{|α|-1} (-1)^{(|α|-1)/2} ω^α L^α`,
/// `B = Σ_{|α| even} |ξ|^{|α|} (-1)^{|α|/2} ω^α L^α`.
pub fn assemble_symbols(sys: &CoefficientSystem, p: &FrequencyPoint) -> SymbolPair {
    assert_eq!(p.dim(), sys.d, "frequency dimension mismatch");
    let n = sys.n;
    let mut a = RMat::zeros(n, n);
    let mut b = RMat::zeros(n, n);
    for (alpha, l) in &sys.coeffs {
        let k = alpha.order();
        let w = alpha.monomial(&p.direction);
        if w == 0.0 {
            continue;
        }
        if k % 2 == 1 {
            let f = p.radius.powi(k as i32 - 1) * sign_pow((k - 1) / 2) * w;
            a += l * f;
        } else {
            let f = p.radius.powi(k as i32) * sign_pow(k / 2) * w;
            b += l * f;
        }
    }
    SymbolPair {
        a_sym: a,
        b_sym: b,
        at: p.clone(),
    }
}

/// `Σ_α (iξ)^α L^α`; `ξ = 0` returns the `L^0` block.
pub fn raw_symbol(sys: &CoefficientSystem, xi: &[f64]) -> CMat {
    assert_eq!(xi.len(), sys.d, "frequency dimension mismatch");
    let mut s = CMat::zeros(sys.n, sys.n);
    for (alpha, l) in &sys.coeffs {
        let mut c = Complex64::new(1.0, 0.0);
        for (&a, &x) in alpha.entries().iter().zip(xi) {
            c *= Complex64::new(0.0, x).powu(a);
        }
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        s += l.map(|v| c * v);
    }
    s
}

/// `−(A⁰)^{-1}(i|ξ|A(ξ) + B(ξ))`, whose eigenvalues are the dispersion roots.
pub fn dispersion_matrix(sys: &CoefficientSystem, p: &FrequencyPoint) -> CMat {
    let sp = assemble_symbols(sys, p);
    let m = sp.combined();
    let mass = denselin::to_complex(&sys.mass);
    let sol = mass.lu().solve(&m).expect("mass is positive definite");
    -sol
}

/// Eigenpairs of the dispersion relation with the pencil residual checked.
pub fn dispersion_decomposition(
    sys: &CoefficientSystem,
    p: &FrequencyPoint,
) -> Result<denselin::SpectralDecomposition, SymbolError> {
    let sp = assemble_symbols(sys, p);
    let pencil_rhs = sp.combined();
    let mass = denselin::to_complex(&sys.mass);
    let mat = -mass
        .clone()
        .lu()
        .solve(&pencil_rhs)
        .expect("mass is positive definite");
    let dec = eig_general(&mat).map_err(|e| SymbolError::Eigen {
        xi: p.xi.clone(),
        source: e,
    })?;
    let rhs_norm = denselin::norm2(&pencil_rhs);
    let mass_norm = denselin::norm2(&mass);
    for (k, &lam) in dec.values.iter().enumerate() {
        let phi = dec.vectors.column(k);
        let r = (&mass * phi * lam + &pencil_rhs * phi).norm();
        let bound = 1e-9 * (lam.norm() * mass_norm + rhs_norm).max(f64::MIN_POSITIVE);
        if !(r <= bound) {
            return Err(SymbolError::Residual {
                xi: p.xi.clone(),
                residual: r,
                bound,
            });
        }
    }
    Ok(dec)
}

/// Roots `λ` of `det(λA⁰ + i|ξ|A(ξ) + B(ξ)) = 0`.
pub fn dispersion_eigenvalues(
    sys: &CoefficientSystem,
    p: &FrequencyPoint,
) -> Result<Vec<Complex64>, SymbolError> {
    dispersion_decomposition(sys, p).map(|d| d.values)
}

// ---------------------------------------------------------------------------
// text document

#[derive(Serialize, Deserialize)]
struct CoeffDoc {
    alpha: Vec<u32>,
    matrix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    n: usize,
    d: usize,
    m: u32,
    mass: Vec<f64>,
    #[serde(default)]
    coeff: Vec<CoeffDoc>,
}

fn row_major(m: &RMat) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            v.push(m[(r, c)]);
        }
    }
    v
}

fn from_row_major(n: usize, data: &[f64], what: &str) -> Result<RMat, SystemError> {
    if data.len() != n * n {
        return Err(SystemError::Document(format!(
            "`{what}` has {} entries, expected {}",
            data.len(),
            n * n
        )));
    }
    Ok(RMat::from_row_slice(n, n, data))
}

impl CoefficientSystem {
    /// Serialize to the TOML document described in the README.
    pub fn to_document(&self) -> String {
        let doc = SystemDoc {
            n: self.n,
            d: self.d,
            m: self.m,
            mass: row_major(&self.mass),
            coeff: self
                .coeffs
                .iter()
                .map(|(a, l)| CoeffDoc {
                    alpha: a.0.clone(),
                    matrix: row_major(l),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("system document serializes")
    }

    pub fn from_document(text: &str) -> Result<Self, SystemError> {
        let doc: SystemDoc =
            toml::from_str(text).map_err(|e| SystemError::Document(e.to_string()))?;
        let mass = from_row_major(doc.n, &doc.mass, "mass")?;
        let mut coeffs = BTreeMap::new();
        for c in doc.coeff {
            let mat = from_row_major(doc.n, &c.matrix, "matrix")?;
            let key = MultiIndex(c.alpha);
            if coeffs.insert(key.clone(), mat).is_some() {
                return Err(SystemError::Document(format!(
                    "duplicate alpha {:?}",
                    key.0
                )));
            }
        }
        Self::new(doc.n, doc.d, doc.m, Some(mass), coeffs)
    }
}
