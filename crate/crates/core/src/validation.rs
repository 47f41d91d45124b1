//! Format and structure gatekeepers.
//!
//! Format runs four stages in order (existence, topology, completeness,
//! causality) and stops at the first stage that records a violation. Structure
//! is only evaluated on format-valid prescriptions and adds surface-count,
//! thickness and edge-thickness rules.

use serde::Serialize;
use thiserror::Error;

use crate::prescription::{Prescription, SurfaceTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Existence,
    Topology,
    Completeness,
    Causality,
    Structure,
    Plausibility,
}

impl Stage {
    pub fn is_format(self) -> bool {
        matches!(
            self,
            Stage::Existence | Stage::Topology | Stage::Completeness | Stage::Causality
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub stage: Stage,
    pub code: &'static str,
    pub message: String,
    pub surface: Option<usize>,
}

impl Violation {
    fn new(stage: Stage, code: &'static str, message: impl Into<String>, surface: Option<usize>) -> Self {
        Violation {
            stage,
            code,
            message: message.into(),
            surface,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub r_fmt: u8,
    /// Absent unless the format check passed.
    pub r_stru: Option<u8>,
    pub violations: Vec<Violation>,
    /// Non-fatal notes, e.g. an edge-thickness check skipped for lack of
    /// semi-diameters.
    pub warnings: Vec<String>,
    /// First stage that failed, if any.
    pub terminated_at: Option<Stage>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.r_fmt == 1 && self.r_stru == Some(1)
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("semi-diameter {height} exceeds |R| = {radius}")]
    ApertureExceedsRadius { radius: f64, height: f64 },
}

/// Sag of a spherical surface of radius `radius` at height `h`, signed like
/// the radius. Plano surfaces have zero sag.
pub fn sag(radius: f64, h: f64) -> Result<f64, GeometryError> {
    if radius.is_infinite() {
        return Ok(0.0);
    }
    let r = radius.abs();
    if h > r {
        return Err(GeometryError::ApertureExceedsRadius { radius: r, height: h });
    }
    Ok(radius.signum() * (r - (r * r - h * h).sqrt()))
}

/// Edge thickness of an element with the given center thickness and front/back
/// radii, measured at height `h`.
pub fn edge_thickness(center: f64, r1: f64, r2: f64, h: f64) -> Result<f64, GeometryError> {
    Ok(center - sag(r1, h)? + sag(r2, h)?)
}

fn saturated_sag(radius: f64, h: f64) -> f64 {
    sag(radius, h.min(radius.abs())).unwrap_or(0.0)
}

/// Runs the format stages, and the structure rules when the format passes.
pub fn validate(p: &Prescription) -> ValidationReport {
    let mut report = check_format(p);
    if report.r_fmt == 1 {
        let structure = check_structure(p);
        report.r_stru = structure.r_stru;
        report.violations.extend(structure.violations);
        report.warnings.extend(structure.warnings);
        report.terminated_at = structure.terminated_at;
    }
    report
}

pub fn check_format(p: &Prescription) -> ValidationReport {
    type Check = fn(&Prescription) -> Vec<Violation>;
    let stages: [(Stage, Check); 4] = [
        (Stage::Existence, existence),
        (Stage::Topology, topology),
        (Stage::Completeness, completeness),
        (Stage::Causality, causality),
    ];
    for (stage, check) in stages {
        let violations = check(p);
        if !violations.is_empty() {
            return ValidationReport {
                r_fmt: 0,
                r_stru: None,
                violations,
                warnings: Vec::new(),
                terminated_at: Some(stage),
            };
        }
    }
    ValidationReport {
        r_fmt: 1,
        r_stru: None,
        violations: Vec::new(),
        warnings: Vec::new(),
        terminated_at: None,
    }
}

fn existence(p: &Prescription) -> Vec<Violation> {
    let mut v = Vec::new();
    match p.header.effl {
        None => v.push(Violation::new(Stage::Existence, "missing_effl", "SPEC EFFL is missing", None)),
        Some(f) if !(f > 0.0) => v.push(Violation::new(
            Stage::Existence,
            "invalid_effl",
            format!("SPEC EFFL must be positive, got {f}"),
            None,
        )),
        Some(_) => {}
    }
    if p.surfaces.is_empty() {
        v.push(Violation::new(Stage::Existence, "missing_surfaces", "no surface table", None));
    }
    v
}

fn topology(p: &Prescription) -> Vec<Violation> {
    let mut v = Vec::new();
    let n = p.surfaces.len();
    if p.surfaces[0].tag != SurfaceTag::Object {
        v.push(Violation::new(Stage::Topology, "missing_object", "first surface is not OBJ", Some(0)));
    }
    if n < 2 || p.surfaces[n - 1].tag != SurfaceTag::Image {
        v.push(Violation::new(Stage::Topology, "missing_image", "last surface is not IMA", Some(n - 1)));
    }
    for (i, s) in p.surfaces.iter().enumerate().take(n.saturating_sub(1)).skip(1) {
        match s.tag {
            SurfaceTag::Object => v.push(Violation::new(
                Stage::Topology,
                "embedded_object",
                "OBJ may only appear as the first surface",
                Some(i),
            )),
            SurfaceTag::Image => v.push(Violation::new(
                Stage::Topology,
                "embedded_image",
                "IMA may only appear as the last surface",
                Some(i),
            )),
            _ => {}
        }
    }
    let stops: Vec<usize> = p
        .surfaces
        .iter()
        .enumerate()
        .filter(|(_, s)| s.tag == SurfaceTag::Stop)
        .map(|(i, _)| i)
        .collect();
    match stops.as_slice() {
        [] => v.push(Violation::new(Stage::Topology, "missing_stop", "missing stop", None)),
        [i] if *i == 0 || *i == n - 1 => v.push(Violation::new(
            Stage::Topology,
            "misplaced_stop",
            "stop must lie strictly between OBJ and IMA",
            Some(*i),
        )),
        [_] => {}
        [_, rest @ ..] => {
            for &i in rest {
                v.push(Violation::new(Stage::Topology, "multiple_stops", "more than one stop", Some(i)));
            }
        }
    }
    v
}

fn completeness(p: &Prescription) -> Vec<Violation> {
    let mut v = Vec::new();
    for (i, s) in p.surfaces.iter().enumerate() {
        let missing = |what: &str| {
            Violation::new(Stage::Completeness, "missing_value", format!("surface {i}: missing {what}"), Some(i))
        };
        if s.radius.is_none() {
            v.push(missing("radius"));
        }
        if s.tag == SurfaceTag::Image {
            continue;
        }
        match s.thickness {
            None => v.push(missing("thickness")),
            Some(t) if t.is_infinite() && s.tag != SurfaceTag::Object => v.push(Violation::new(
                Stage::Completeness,
                "infinite_thickness",
                format!("surface {i}: only OBJ may have infinite thickness"),
                Some(i),
            )),
            Some(_) => {}
        }
        match &s.material {
            None => v.push(missing("material")),
            Some(m) if !m.is_physical() => v.push(Violation::new(
                Stage::Completeness,
                "invalid_material",
                format!("surface {i}: material constants missing or out of range"),
                Some(i),
            )),
            Some(_) => {}
        }
    }
    v
}

fn causality(p: &Prescription) -> Vec<Violation> {
    let mut v = Vec::new();
    let last = p.surfaces.len() - 2;
    let s = &p.surfaces[last];
    if !s.material.as_ref().is_some_and(|m| m.is_air()) {
        v.push(Violation::new(
            Stage::Causality,
            "glass_before_image",
            "medium preceding the image plane must be air",
            Some(last),
        ));
    }
    if !s.thickness.is_some_and(|t| t > 0.0) {
        v.push(Violation::new(
            Stage::Causality,
            "nonpositive_bfl",
            "back focal distance must be positive",
            Some(last),
        ));
    }
    v
}

/// Structure rules. Assumes `check_format` passed.
pub fn check_structure(p: &Prescription) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let n = p.surfaces.len();
    if n < 3 {
        violations.push(Violation::new(
            Stage::Structure,
            "too_few_surfaces",
            "at least three surfaces are required",
            None,
        ));
    }
    for i in 1..n.saturating_sub(1) {
        let s = &p.surfaces[i];
        let (Some(t), Some(m)) = (s.thickness, s.material.as_ref()) else {
            continue;
        };
        if m.is_glass() && !(t > 0.0) {
            violations.push(Violation::new(
                Stage::Structure,
                "nonpositive_center_thickness",
                format!("surface {i}: glass thickness must be positive, got {t}"),
                Some(i),
            ));
        } else if m.is_air() && t < 0.0 {
            violations.push(Violation::new(
                Stage::Structure,
                "negative_air_gap",
                format!("surface {i}: air gap must not be negative, got {t}"),
                Some(i),
            ));
        }
    }
    if n >= 2 {
        let last = &p.surfaces[n - 2];
        if !last.material.as_ref().is_some_and(|m| m.is_air()) {
            violations.push(Violation::new(
                Stage::Structure,
                "glass_before_image",
                "medium preceding the image plane must be air",
                Some(n - 2),
            ));
        }
        if !last.thickness.is_some_and(|t| t > 0.0) {
            violations.push(Violation::new(
                Stage::Structure,
                "nonpositive_bfl",
                "back focal distance must be positive",
                Some(n - 2),
            ));
        }
    }

    // Edge thickness of every glass gap bounded by two surfaces.
    for i in 1..n.saturating_sub(2) {
        let front = &p.surfaces[i];
        let back = &p.surfaces[i + 1];
        if !front.material.as_ref().is_some_and(|m| m.is_glass()) {
            continue;
        }
        let (Some(t), Some(r1), Some(r2)) = (front.thickness, front.radius, back.radius) else {
            continue;
        };
        let h = match (front.semi_diameter, back.semi_diameter) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                warnings.push(format!(
                    "surfaces {i}-{}: no semi-diameter, edge thickness not checked",
                    i + 1
                ));
                continue;
            }
        };
        let edge = match edge_thickness(t, r1, r2, h) {
            Ok(edge) => edge,
            Err(e) => {
                violations.push(Violation::new(
                    Stage::Plausibility,
                    "aperture_exceeds_radius",
                    format!("surfaces {i}-{}: {e}", i + 1),
                    Some(i),
                ));
                // a hemisphere is the deepest a surface can go
                t - saturated_sag(r1, h) + saturated_sag(r2, h)
            }
        };
        if edge < 0.0 {
            violations.push(Violation::new(
                Stage::Plausibility,
                "negative_edge_thickness",
                format!("surfaces {i}-{}: edge thickness {edge} at height {h}", i + 1),
                Some(i),
            ));
        }
    }

    let terminated_at = violations.iter().map(|v| v.stage).min();
    ValidationReport {
        r_fmt: 1,
        r_stru: Some(u8::from(violations.is_empty())),
        violations,
        warnings,
        terminated_at,
    }
}
