//! Dense small-matrix kernels.
//!
//! General complex eigendecomposition is hand-written (balancing, Householder
//! Hessenberg reduction, Wilkinson-shifted QR, triangular back substitution).
//! Hermitian eigenproblems and SVD are delegated to `nalgebra`.

mod eig;
mod expm;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

pub use eig::eig_general;
pub use expm::matrix_exp;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("eigensolver did not converge after {iterations} iterations (n = {n})")]
    NoConvergence { n: usize, iterations: usize },
    #[error("eigenpair residual {residual:e} exceeds bound {bound:e}")]
    Residual { residual: f64, bound: f64 },
    #[error("matrix is not Hermitian: asymmetry {asymmetry:e} relative to norm {norm:e}")]
    NotHermitian { asymmetry: f64, norm: f64 },
    #[error("eigenvector matrix ill-conditioned (cond = {cond:e}); matrix treated as defective")]
    Defective { cond: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("matrix exponential out of range (norm {norm:e})")]
    Range { norm: f64 },
    #[error("empty matrix")]
    Empty,
}

/// Eigenvalues, unit right eigenvectors (columns) and per-pair residuals.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
    pub residuals: Vec<f64>,
}

/// One group of (numerically) equal eigenvalues with its spectral projection.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub representative: Complex64,
    pub projection: CMat,
    pub multiplicity: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EigenClusterSet {
    pub clusters: Vec<EigenCluster>,
    /// Condition number of the eigenvector matrix used to build the projections.
    pub vector_cond: f64,
}

pub const DEFAULT_REL_GAP: f64 = 1e-6;
pub const MAX_VECTOR_COND: f64 = 1e8;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn norm2_real(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn sym_part(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

pub fn herm_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Hermitian eigendecomposition with ascending real eigenvalues.
pub fn eig_hermitian(m: &CMat) -> Result<SpectralDecomposition, LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let norm = m.norm();
    let asym = (m - m.adjoint()).norm();
    if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian {
            asymmetry: asym,
            norm,
        });
    }
    let eig = SymmetricEigen::new(herm_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
        values.push(Complex64::new(eig.eigenvalues[k], 0.0));
    }
    let residuals = pair_residuals(m, &values, &vectors);
    Ok(SpectralDecomposition {
        values,
        vectors,
        residuals,
    })
}

/// Real symmetric eigendecomposition: ascending values, orthonormal real vectors.
pub fn eig_symmetric(m: &RMat) -> Result<(Vec<f64>, RMat), LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let norm = m.norm();
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian {
            asymmetry: asym,
            norm,
        });
    }
    let eig = SymmetricEigen::new(sym_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = RMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
        values.push(eig.eigenvalues[k]);
    }
    Ok((values, vectors))
}

pub(crate) fn pair_residuals(m: &CMat, values: &[Complex64], vectors: &CMat) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(k, &lam)| {
            let v = vectors.column(k);
            (m * v - v * lam).norm()
        })
        .collect()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eig_sym(m: &CMat) -> Result<f64, LinalgError> {
    let h = herm_part(m);
    let dec = eig_hermitian(&h)?;
    Ok(dec.values[0].re)
}

pub fn min_eig_sym_real(m: &RMat) -> Result<f64, LinalgError> {
    let (vals, _) = eig_symmetric(&sym_part(m))?;
    Ok(vals[0])
}

/// Group eigenvalues by single-linkage clustering at `rel_gap·(diameter + 1)`
/// and build the spectral projection of each group.
pub fn cluster_projections(
    dec: &SpectralDecomposition,
    rel_gap: f64,
) -> Result<EigenClusterSet, LinalgError> {
    let n = dec.values.len();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let vals = &dec.values;
    let mut diam: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            diam = diam.max((vals[i] - vals[j]).norm());
        }
    }
    let thresh = rel_gap * (diam + 1.0);

    // single linkage via union-find
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let nx = p[k];
            p[k] = r;
            k = nx;
        }
        r
    }
    for i in 0..n {
        for j in 0..i {
            if (vals[i] - vals[j]).norm() <= thresh {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }

    let sv = dec.vectors.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_VECTOR_COND) {
        return Err(LinalgError::Defective { cond });
    }
    let vinv = dec
        .vectors
        .clone()
        .try_inverse()
        .ok_or(LinalgError::Defective {
            cond: f64::INFINITY,
        })?;

    let clusters = groups
        .into_iter()
        .map(|members| {
            let mut p = CMat::zeros(n, n);
            let mut sum = Complex64::new(0.0, 0.0);
            for &k in &members {
                p += dec.vectors.column(k) * vinv.row(k);
                sum += vals[k];
            }
            EigenCluster {
                representative: sum / members.len() as f64,
                projection: p,
                multiplicity: members.len(),
                members,
            }
        })
        .collect();
    Ok(EigenClusterSet {
        clusters,
        vector_cond: cond,
    })
}

/// Symmetric positive definite square root.
pub fn spd_sqrt(m: &RMat) -> Result<RMat, LinalgError> {
    let (vals, vecs) = eig_symmetric(m)?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(vals[0] > 1e-14 * scale) {
        return Err(LinalgError::NotPositiveDefinite { min_eig: vals[0] });
    }
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.sqrt()));
    let r = &vecs * DMatrix::from_diagonal(&d) * vecs.transpose();
    Ok(sym_part(&r))
}

/// Inverse of the SPD square root, computed from the same eigenbasis.
pub fn spd_inv_sqrt(m: &RMat) -> Result<RMat, LinalgError> {
    let (vals, vecs) = eig_symmetric(m)?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(vals[0] > 1e-14 * scale) {
        return Err(LinalgError::NotPositiveDefinite { min_eig: vals[0] });
    }
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| 1.0 / v.sqrt()));
    let r = &vecs * DMatrix::from_diagonal(&d) * vecs.transpose();
    Ok(sym_part(&r))
}

/// Orthonormal basis (columns) of the numerical kernel: right singular
/// vectors whose singular value is at most `rank_tol·‖M‖`.
pub fn kernel_basis(m: &CMat, rank_tol: f64) -> CMat {
    let (r, c) = m.shape();
    // pad to at least square so the SVD returns a full right basis
    let rows = r.max(c);
    let mut padded = CMat::zeros(rows, c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cut = rank_tol * smax;
    let cols: Vec<_> = (0..c)
        .filter(|&k| svd.singular_values[k] <= cut)
        .map(|k| vt.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        CMat::zeros(c, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

pub fn kernel_basis_real(m: &RMat, rank_tol: f64) -> RMat {
    let (r, c) = m.shape();
    let rows = r.max(c);
    let mut padded = RMat::zeros(rows, c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cut = rank_tol * smax;
    let cols: Vec<_> = (0..c)
        .filter(|&k| svd.singular_values[k] <= cut)
        .map(|k| vt.row(k).transpose())
        .collect();
    if cols.is_empty() {
        RMat::zeros(c, 0)
    } else {
        RMat::from_columns(&cols)
    }
}

pub fn default_rank_tol(n: usize) -> f64 {
    1e-10 * n as f64
}
