//! Catalog of linearized physical systems: coefficient families, symbol
//! symmetrizers, reference compensators and the verdicts each one should
//! produce.
//!
//! All parameters default to 1 with zero background velocity unless a
//! model relation fixes them otherwise.

mod dnsf;
mod fluids;
pub mod poly;
mod qhd;
pub mod random;

use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::denselin::RMat;
use crate::structure::{Feasibility, MatrixFn, SymmetrizerFn};
use crate::symbolkit::{CoefficientSystem, FrequencyPoint, SystemError};

pub use dnsf::{build_dnsf, dnsf_inspection_delta, DnsfParams};
pub use fluids::{
    build_efk1d, build_efk_md, build_nsfk3d, build_nsk2d, efk1d_reference, nsfk_inspection_delta,
    nsk_reference, EfkParams, NsfkParams, NskParams,
};
pub use qhd::{
    build_qhd_full, build_qhd_iso, qhd_full_obstruction_poly, qhd_full_threshold,
    qhd_full_transport_symmetrizer, qhd_iso_reference, QhdFullParams, QhdIsoParams,
};
pub use random::{random_symmetrizable, RandomSystem};

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    Unknown(String),
    #[error("parameter `{name}` = {value} violates {rule}")]
    Parameter {
        name: String,
        value: f64,
        rule: String,
    },
    #[error("invalid parameter document: {0}")]
    Document(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Decay type `(p, q)` in `Re λ ≤ −c|ξ|^{2p}/(1+|ξ|²)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecayType {
    pub p: u32,
    pub q: u32,
}

/// Verdicts the analysis pipeline should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expected {
    /// `None` when the coupling question is not posed (no symmetrizer).
    pub coupled: Option<bool>,
    pub decay_type: Option<DecayType>,
    pub friedrichs: Feasibility,
    pub symbol_symmetrizable: bool,
}

/// A catalog entry. The reference compensator acts on the symmetrized pair
/// `(A_S, B_S)` produced by the bundled symmetrizer.
#[derive(Clone)]
pub struct ModelBundle {
    pub name: String,
    pub system: CoefficientSystem,
    pub symmetrizer: Option<SymmetrizerFn>,
    pub reference_compensator: Option<MatrixFn>,
    pub expected: Expected,
    /// Parameters actually used, as a TOML table.
    pub params: String,
}

impl fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelBundle")
            .field("name", &self.name)
            .field("n", &self.system.n())
            .field("d", &self.system.d())
            .field(
                "symmetrizer",
                &self.symmetrizer.as_ref().map(|s| s.label.clone()),
            )
            .field(
                "reference_compensator",
                &self.reference_compensator.is_some(),
            )
            .field("expected", &self.expected)
            .finish()
    }
}

impl ModelBundle {
    pub fn reference_at(&self, p: &FrequencyPoint) -> Option<RMat> {
        self.reference_compensator.as_ref().map(|k| k(p))
    }
}

pub const MODEL_NAMES: [&str; 8] = [
    "nsk2d", "nsfk3d", "efk1d", "efk-md", "dnsf1d", "dnsf3d", "qhd-iso", "qhd-full",
];

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "nsk2d" => "isothermal Navier-Stokes-Korteweg, d = 2",
        "nsfk3d" => "Navier-Stokes-Fourier-Korteweg, d = 3",
        "efk1d" => "Euler-Fourier-Korteweg, d = 1",
        "efk-md" => "Euler-Fourier-Korteweg, d = 2 or 3 (not genuinely coupled)",
        "dnsf1d" => "dispersive Navier-Stokes-Fourier, d = 1",
        "dnsf3d" => "dispersive Navier-Stokes-Fourier, d = 3",
        "qhd-iso" => "isentropic quantum hydrodynamics with momentum relaxation, d = 3",
        "qhd-full" => {
            "full quantum hydrodynamics with energy relaxation, d = 3 (not symbol symmetrizable)"
        }
        _ => return None,
    })
}

fn parse<P: DeserializeOwned + Default>(doc: Option<&str>) -> Result<P, ModelError> {
    match doc {
        None => Ok(P::default()),
        Some(s) if s.trim().is_empty() => Ok(P::default()),
        Some(s) => toml::from_str(s).map_err(|e| ModelError::Document(e.to_string())),
    }
}

/// Build a catalog model by CLI name. `params` is a TOML table overriding
/// the defaults; `dim` selects the dimension of `efk-md` (default 2).
pub fn build_model(
    name: &str,
    params: Option<&str>,
    dim: Option<usize>,
) -> Result<ModelBundle, ModelError> {
    match name {
        "nsk2d" => build_nsk2d(&parse(params)?),
        "nsfk3d" => build_nsfk3d(&parse(params)?),
        "efk1d" => build_efk1d(&parse(params)?),
        "efk-md" => build_efk_md(&parse(params)?, dim.unwrap_or(2)),
        "dnsf1d" => build_dnsf(&parse(params)?, 1),
        "dnsf3d" => build_dnsf(&parse(params)?, 3),
        "qhd-iso" => build_qhd_iso(&parse(params)?),
        "qhd-full" => build_qhd_full(&parse(params)?),
        other => Err(ModelError::Unknown(other.to_string())),
    }
}

pub(crate) fn positive(name: &str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Parameter {
            name: name.into(),
            value,
            rule: "> 0".into(),
        })
    }
}

pub(crate) fn non_negative(name: &str, value: f64) -> Result<(), ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Parameter {
            name: name.into(),
            value,
            rule: ">= 0".into(),
        })
    }
}

/// Background velocity of length `d`; an empty list means rest.
pub(crate) fn velocity(u: &[f64], d: usize) -> Result<Vec<f64>, ModelError> {
    if u.is_empty() {
        return Ok(vec![0.0; d]);
    }
    if u.len() != d {
        return Err(ModelError::Parameter {
            name: "u".into(),
            value: u.len() as f64,
            rule: format!("length = {d}"),
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::Parameter {
            name: "u".into(),
            value: f64::NAN,
            rule: "finite".into(),
        });
    }
    Ok(u.to_vec())
}

pub(crate) fn to_toml<P: Serialize>(p: &P) -> String {
    toml::to_string(p).unwrap_or_default()
}

/// `E_ij − E_ji`.
pub(crate) fn skew_unit(n: usize, i: usize, j: usize) -> RMat {
    let mut m = RMat::zeros(n, n);
    m[(i, j)] = 1.0;
    m[(j, i)] = -1.0;
    m
}

pub(crate) fn diag(v: &[f64]) -> RMat {
    RMat::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

pub(crate) fn matrix_fn<F>(f: F) -> MatrixFn
where
    F: Fn(&FrequencyPoint) -> RMat + Send + Sync + 'static,
{
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds() {
        for name in MODEL_NAMES {
            let b = build_model(name, None, None).unwrap();
            assert_eq!(b.name, name);
            assert!(describe(name).is_some());
        }
        assert!(matches!(
            build_model("nope", None, None),
            Err(ModelError::Unknown(_))
        ));
    }

    #[test]
    fn parameter_documents_override() {
        let b = build_model("nsk2d", Some("rho = 2.0\nk = 0.5\n"), None).unwrap();
        assert!(b.params.contains("rho = 2.0"));
        assert!(matches!(
            build_model("nsk2d", Some("rho = -1.0"), None),
            Err(ModelError::Parameter { .. })
        ));
        assert!(matches!(
            build_model("nsk2d", Some("bogus = 1.0"), None),
            Err(ModelError::Document(_))
        ));
    }
}
