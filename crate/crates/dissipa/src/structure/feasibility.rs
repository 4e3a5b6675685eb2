use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::denselin::{self, RMat};
use crate::symbolkit::{assemble_symbols, CoefficientSystem, FrequencyPoint};

const SAMPLE_DRAWS: usize = 1000;
const NULL_TOL: f64 = 1e-10;
const FORCED_TOL: f64 = 1e-8;
const PROPORTIONAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Unknown,
}

/// Two diagonal entries tied by `s_ii = ratio · s_jj` with `ratio < 0`
/// on the whole solution space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignConflict {
    pub first: usize,
    pub second: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityCertificate {
    pub verdict: Feasibility,
    /// Dimension of the space of symmetric `S` satisfying the constraints.
    pub solution_dim: usize,
    /// Entries `(i, j)`, `i ≤ j`, that vanish on the whole solution space.
    pub forced_zero: Vec<(usize, usize)>,
    pub sign_conflicts: Vec<SignConflict>,
    #[serde(skip)]
    pub witness: Option<RMat>,
    pub forced_constraints: String,
}

impl FeasibilityCertificate {
    pub fn forces_zero(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.forced_zero.contains(&key)
    }
}

fn unknowns(n: usize) -> Vec<(usize, usize)> {
    let mut u = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            u.push((i, j));
        }
    }
    u
}

fn index_of(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = (i.min(j), i.max(j));
    // row-wise packed upper triangle
    a * n - a * (a + 1) / 2 + b
}

/// Null space of the linear conditions `S M − (S M)ᵀ = 0` for every `M`,
/// over symmetric `S`, as packed upper-triangle columns.
pub fn solve_symmetry_constraints(n: usize, mats: &[RMat]) -> RMat {
    let vars = unknowns(n);
    let nv = vars.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for m in mats {
        let scale = m.norm();
        if scale == 0.0 {
            continue;
        }
        let m = m / scale;
        for i in 0..n {
            for j in i + 1..n {
                // (S M)_ij − (S M)_ji = Σ_k S_ik M_kj − Σ_k S_jk M_ki
                let mut row = vec![0.0; nv];
                for k in 0..n {
                    row[index_of(n, i, k)] += m[(k, j)];
                    row[index_of(n, j, k)] -= m[(k, i)];
                }
                if row.iter().any(|&x| x != 0.0) {
                    rows.push(row);
                }
            }
        }
    }
    if rows.is_empty() {
        return RMat::identity(nv, nv);
    }
    let c = RMat::from_fn(rows.len(), nv, |r, k| rows[r][k]);
    denselin::kernel_basis_real(&c, NULL_TOL * nv as f64)
}

fn unpack(n: usize, coords: &[f64]) -> RMat {
    let mut s = RMat::zeros(n, n);
    for (k, &(i, j)) in unknowns(n).iter().enumerate() {
        s[(i, j)] = coords[k];
        s[(j, i)] = coords[k];
    }
    s
}

fn positive_definite(s: &RMat) -> Option<RMat> {
    let nrm = s.norm();
    if nrm == 0.0 {
        return None;
    }
    let (vals, _) = denselin::eig_symmetric(s).ok()?;
    let lo = vals[0];
    let hi = *vals.last().unwrap();
    let tol = 1e-10 * nrm;
    if lo > tol {
        Some(s / nrm)
    } else if hi < -tol {
        Some(-s / nrm)
    } else {
        None
    }
}

fn describe(fz: &[(usize, usize)], sc: &[SignConflict]) -> String {
    let mut parts: Vec<String> = fz
        .iter()
        .map(|(i, j)| format!("s{}{} = 0", i + 1, j + 1))
        .collect();
    for c in sc {
        parts.push(format!(
            "s{a}{a} = {r:.6e} * s{b}{b}",
            a = c.first + 1,
            b = c.second + 1,
            r = c.ratio
        ));
    }
    if parts.is_empty() {
        "none".to_string()
    } else {
        parts.join(", ")
    }
}

/// Diagonal `D` (powers of two) balancing the off-diagonal row and column
/// sums of `Σ |M_k|/‖M_k‖` under `M ↦ D⁻¹ M D`.
fn balancing(n: usize, mats: &[RMat]) -> Vec<f64> {
    let mut m = RMat::zeros(n, n);
    for a in mats {
        let s = a.norm();
        if s > 0.0 {
            m += a.abs() / s;
        }
    }
    let mut d = vec![1.0; n];
    for _ in 0..64 {
        let mut changed = false;
        for i in 0..n {
            let r: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| m[(i, j)] * d[j] / d[i])
                .sum();
            let c: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| m[(j, i)] * d[i] / d[j])
                .sum();
            if r > 0.0 && c > 0.0 {
                let f = (r / c).sqrt().log2().round().exp2();
                if f != 1.0 {
                    d[i] *= f;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Feasibility is invariant under `M ↦ D⁻¹ M D`, `S ↦ D S D`; the
/// constraints are solved in balanced coordinates and mapped back.
fn certify(n: usize, mats: &[RMat], seed: u64) -> FeasibilityCertificate {
    let d = balancing(n, mats);
    if d.iter().all(|&x| x == 1.0) {
        return certify_raw(n, mats, seed);
    }
    let dm = RMat::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
    let dinv = RMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        d.iter().map(|x| 1.0 / x),
    ));
    let scaled: Vec<RMat> = mats.iter().map(|a| &dinv * a * &dm).collect();
    let mut c = certify_raw(n, &scaled, seed);
    for sc in &mut c.sign_conflicts {
        sc.ratio *= d[sc.second] * d[sc.second] / (d[sc.first] * d[sc.first]);
    }
    c.witness = c.witness.map(|w| {
        let s = &dinv * w * &dinv;
        let nrm = s.norm();
        s / nrm
    });
    c.forced_constraints = describe(&c.forced_zero, &c.sign_conflicts);
    c
}

fn certify_raw(n: usize, mats: &[RMat], seed: u64) -> FeasibilityCertificate {
    let basis = solve_symmetry_constraints(n, mats);
    let vars = unknowns(n);
    let dim = basis.ncols();
    let row_norm = |k: usize| basis.row(k).norm();
    let forced_zero: Vec<(usize, usize)> = vars
        .iter()
        .enumerate()
        .filter(|(k, _)| row_norm(*k) <= FORCED_TOL)
        .map(|(_, &v)| v)
        .collect();
    let forced_diag: Vec<usize> = (0..n).filter(|&i| forced_zero.contains(&(i, i))).collect();

    let mut sign_conflicts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if forced_diag.contains(&i) || forced_diag.contains(&j) {
                continue;
            }
            let ri = basis.row(index_of(n, i, i)).transpose();
            let rj = basis.row(index_of(n, j, j)).transpose();
            let ratio = ri.dot(&rj) / rj.norm_squared();
            let miss = (&ri - &rj * ratio).norm();
            if miss <= PROPORTIONAL_TOL * ri.norm() && ratio < 0.0 {
                sign_conflicts.push(SignConflict {
                    first: i,
                    second: j,
                    ratio,
                });
            }
        }
    }

    let forced_constraints = describe(&forced_zero, &sign_conflicts);

    if dim == 0 || !forced_diag.is_empty() || !sign_conflicts.is_empty() {
        return FeasibilityCertificate {
            verdict: Feasibility::Infeasible,
            solution_dim: dim,
            forced_zero,
            sign_conflicts,
            witness: None,
            forced_constraints,
        };
    }

    // deterministic candidate: projection of the identity onto the solution space
    let mut id = vec![0.0; vars.len()];
    for i in 0..n {
        id[index_of(n, i, i)] = 1.0;
    }
    let idv = nalgebra::DVector::from_vec(id);
    let proj = &basis * (basis.transpose() * &idv);
    let mut witness = positive_definite(&unpack(n, proj.as_slice()));
    if witness.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..SAMPLE_DRAWS {
            let coef = nalgebra::DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let x = &basis * coef;
            if let Some(w) = positive_definite(&unpack(n, x.as_slice())) {
                witness = Some(w);
                break;
            }
        }
    }
    FeasibilityCertificate {
        verdict: if witness.is_some() {
            Feasibility::Feasible
        } else {
            Feasibility::Unknown
        },
        solution_dim: dim,
        forced_zero,
        sign_conflicts,
        witness,
        forced_constraints,
    }
}

/// Constant symmetric `S` with every `S L^α` symmetric.
pub fn friedrichs_feasibility(sys: &CoefficientSystem, seed: u64) -> FeasibilityCertificate {
    let mats: Vec<RMat> = sys.coeffs().values().cloned().collect();
    certify(sys.n(), &mats, seed)
}

/// Symmetric `S` making `S A(ξ)` and `S B(ξ)` symmetric at one frequency.
pub fn pointwise_symmetrizer_feasibility(
    sys: &CoefficientSystem,
    p: &FrequencyPoint,
    seed: u64,
) -> FeasibilityCertificate {
    let sp = assemble_symbols(sys, p);
    certify(sys.n(), &[sp.a_sym, sp.b_sym], seed)
}
