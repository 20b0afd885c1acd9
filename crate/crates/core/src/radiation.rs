//! Per-element radiation patterns of the reflecting elements.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::SurfacePose;
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    /// Gain proportional to the cosine between the normal and the arrival direction.
    Directive,
    /// Constant gain over the front half-space.
    #[serde(alias = "half-space-isotropic")]
    Isotropic,
}

impl PatternKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternKind::Directive => "directive",
            PatternKind::Isotropic => "isotropic",
        }
    }
}

impl std::fmt::Display for PatternKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "directive" => Ok(PatternKind::Directive),
            "isotropic" | "half-space-isotropic" => Ok(PatternKind::Isotropic),
            other => Err(Error::invalid(format!("unknown radiation pattern '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationPattern {
    pub kind: PatternKind,
    /// Element area in m².
    pub element_area: f64,
    pub wavelength: f64,
}

impl RadiationPattern {
    /// Pattern with the default element area `(λ/2)²`.
    pub fn new(kind: PatternKind, wavelength: f64) -> Result<Self> {
        Self::with_area(kind, 0.25 * wavelength * wavelength, wavelength)
    }

    pub fn with_area(kind: PatternKind, element_area: f64, wavelength: f64) -> Result<Self> {
        if !(element_area > 0.0 && element_area.is_finite()) {
            return Err(Error::invalid("element area must be positive"));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        Ok(Self { kind, element_area, wavelength })
    }

    /// Gain for a unit direction given the surface normal directly.
    ///
    /// `direction` is the arrival (or departure) vector; the element sees it
    /// from the front when `⟨n, −direction⟩ > 0`.
    pub fn gain_for_normal(&self, normal: &Vector3<f64>, direction: &Vector3<f64>) -> Result<f64> {
        if (direction.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!(
                "direction must be unit norm, got norm {}",
                direction.norm()
            )));
        }
        let cosine = -normal.dot(direction);
        if cosine <= 0.0 {
            return Ok(0.0);
        }
        let aperture = self.element_area * 4.0 * PI / (self.wavelength * self.wavelength);
        Ok(match self.kind {
            PatternKind::Directive => aperture * cosine,
            PatternKind::Isotropic => aperture * 2.0,
        })
    }

    /// Incident gain `G^I` for the DOA `f`.
    pub fn incident_gain(&self, pose: &SurfacePose, doa: &Vector3<f64>) -> Result<f64> {
        self.gain_for_normal(&pose.normal()?, doa)
    }

    /// Reflective gain `G^R` for the DOD `s`.
    pub fn reflective_gain(&self, pose: &SurfacePose, dod: &Vector3<f64>) -> Result<f64> {
        self.gain_for_normal(&pose.normal()?, dod)
    }
}
