use num_complex::Complex64;

use super::{pair_residuals, CMat, LinalgError, SpectralDecomposition};

const ITER_PER_DIM: usize = 200;
const RESIDUAL_BOUND: f64 = 1e-9;

#[inline]
fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Diagonal similarity `D^{-1} A D` (powers of two) reducing the row/column
/// norm imbalance. Returns the diagonal of `D`.
fn balance(a: &mut CMat) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut d = vec![1.0; n];
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += abs1(a[(j, i)]);
                    r += abs1(a[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                d[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            return d;
        }
    }
}

/// Householder reduction to upper Hessenberg form, accumulating `Q`.
fn hessenberg(h: &mut CMat, q: &mut CMat) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let m = n - k - 1;
        let mut v: Vec<Complex64> = (0..m).map(|i| h[(k + 1 + i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // rows k+1.. : H <- (I - 2vv*) H
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..m {
                s += v[i].conj() * h[(k + 1 + i, j)];
            }
            s *= 2.0;
            for i in 0..m {
                h[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // columns k+1.. : H <- H (I - 2vv*), Q likewise
        for mat in [&mut *h, &mut *q] {
            for r in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    s += mat[(r, k + 1 + i)] * v[i];
                }
                s *= 2.0;
                for i in 0..m {
                    mat[(r, k + 1 + i)] -= s * v[i].conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Rotation `G = [[c, s], [-conj(s), c]]` with `G (f, g)^T = (r, 0)^T`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let r = fn_.hypot(gn);
    let c = fn_ / r;
    let s = (f / fn_) * g.conj() / r;
    (c, s)
}

/// Reduce Hessenberg `h` to upper triangular Schur form, accumulating into `z`.
fn schur(h: &mut CMat, z: &mut CMat) -> Result<(), LinalgError> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let hnorm = h.iter().fold(0.0f64, |a, x| a.max(abs1(*x)));
    let small = f64::MIN_POSITIVE * (n as f64) / eps;
    let budget = ITER_PER_DIM * n;
    let mut total = 0usize;
    let mut hi = n.saturating_sub(1);
    let mut since_deflation = 0usize;
    while hi > 0 {
        // look for a negligible subdiagonal entry
        let mut l = hi;
        while l > 0 {
            let sub = abs1(h[(l, l - 1)]);
            let mut tst = abs1(h[(l - 1, l - 1)]) + abs1(h[(l, l)]);
            if tst == 0.0 {
                tst = hnorm;
            }
            if sub <= (eps * tst).max(small) {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > budget {
            return Err(LinalgError::NoConvergence {
                n,
                iterations: total,
            });
        }

        let mu = if since_deflation % 11 == 10 {
            // exceptional shift
            h[(hi, hi)] + Complex64::new(0.75 * abs1(h[(hi, hi - 1)]), 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let m1 = (a + d) * 0.5 + disc;
            let m2 = (a + d) * 0.5 - disc;
            if (m1 - d).norm() < (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };

        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = Complex64::new(0.0, 0.0);
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = l + idx;
            let top = (k + 2).min(hi);
            for r in 0..=top {
                let x = h[(r, k)];
                let y = h[(r, k + 1)];
                h[(r, k)] = x * c + s.conj() * y;
                h[(r, k + 1)] = -s * x + y * c;
            }
            for r in 0..n {
                let x = z[(r, k)];
                let y = z[(r, k + 1)];
                z[(r, k)] = x * c + s.conj() * y;
                z[(r, k + 1)] = -s * x + y * c;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}

/// Eigenvectors of upper triangular `t` by back substitution.
fn triangular_vectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let tnorm = t.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE * 1e3);
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for m in j + 1..=k {
                s += t[(j, m)] * x[(m, k)];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < smin {
                den = Complex64::new(smin, 0.0);
            }
            x[(j, k)] = -s / den;
            // rescale to avoid overflow on nearly defective input
            let big = x.column(k).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if big > 1e100 {
                let f = 1.0 / big;
                for m in j..=k {
                    x[(m, k)] *= f;
                }
            }
        }
    }
    x
}

/// Full eigendecomposition of a general complex matrix.
///
/// Unit-norm right eigenvectors; each residual is `‖M v − λ v‖`, and the
/// call fails if any residual exceeds `1e-9·‖M‖`.
pub fn eig_general(m: &CMat) -> Result<SpectralDecomposition, LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut h = m.clone();
    let d = balance(&mut h);
    let mut z = CMat::identity(n, n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z)?;
    let values: Vec<Complex64> = (0..n).map(|k| h[(k, k)]).collect();
    let x = triangular_vectors(&h);
    let mut vectors = &z * x;
    for r in 0..n {
        for c in 0..n {
            vectors[(r, c)] *= d[r];
        }
    }
    for c in 0..n {
        let nrm = vectors.column(c).norm();
        if nrm > 0.0 {
            vectors.column_mut(c).unscale_mut(nrm);
        }
    }
    let residuals = pair_residuals(m, &values, &vectors);
    let mnorm = super::norm2(m);
    let bound = RESIDUAL_BOUND * mnorm.max(f64::MIN_POSITIVE);
    if let Some(&worst) = residuals.iter().max_by(|a, b| a.total_cmp(b)) {
        if !(worst <= bound) {
            return Err(LinalgError::Residual {
                residual: worst,
                bound,
            });
        }
    }
    Ok(SpectralDecomposition {
        values,
        vectors,
        residuals,
    })
}
