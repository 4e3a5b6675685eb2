use num_complex::Complex64;

use super::{CMat, LinalgError};

// degree-13 diagonal Padé coefficients
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;
const MAX_NORM: f64 = 1e150;

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(t·M)` by scaling and squaring with the degree-13 Padé approximant.
pub fn matrix_exp(m: &CMat, t: f64) -> Result<CMat, LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if !t.is_finite() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::Range {
            norm: f64::INFINITY,
        });
    }
    let a = m * Complex64::new(t, 0.0);
    let nrm = norm1(&a);
    if nrm > MAX_NORM {
        return Err(LinalgError::Range { norm: nrm });
    }
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);

    let id = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| Complex64::new(x, 0.0);
    let inner_u = &a6 * r(B13[13]) + &a4 * r(B13[11]) + &a2 * r(B13[9]);
    let u = &a
        * (&a6 * inner_u + &a6 * r(B13[7]) + &a4 * r(B13[5]) + &a2 * r(B13[3]) + &id * r(B13[1]));
    let inner_v = &a6 * r(B13[12]) + &a4 * r(B13[10]) + &a2 * r(B13[8]);
    let v = &a6 * inner_v + &a6 * r(B13[6]) + &a4 * r(B13[4]) + &a2 * r(B13[2]) + &id * r(B13[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut e = q.lu().solve(&p).ok_or(LinalgError::Range { norm: nrm })?;
    for _ in 0..s {
        e = &e * &e;
    }
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::Range { norm: nrm });
    }
    Ok(e)
}
