//! Optical lexicographic reward.
//!
//! `r_lex = r_fmt * r_stru * (r_ray + delta_pass * r_rms)` where
//! `r_ray = 0.6 s_f + 0.4 s_c`. Each stage is evaluated only when every
//! earlier stage passed; skipped stages are `None` (JSON `null`).
//!
//! `r_ray` is the same quantity some write as the physics score `S_phy`.

use serde::Serialize;

use crate::prescription::{parse_with, GlassCatalog, MaskedPrescription, Prescription, SpecHeader, SpecError, Specification};
use crate::tracer::{first_order_of, spot_paraxial, OpticalSystem};
use crate::validation::{check_format, check_structure, ValidationReport};

pub const W_FOCAL: f64 = 0.6;
pub const W_CONVERGENCE: f64 = 0.4;
/// Strict and loose focal-error decay constants.
pub const ALPHA_STRICT: f64 = 0.02;
pub const ALPHA_LOOSE: f64 = 0.10;
/// Image-height decay constant, mm.
pub const BETA_MM: f64 = 1.0;
/// Gate thresholds: relative EFFL error and |y_img| in mm, both exclusive.
pub const GATE_EPSILON: f64 = 0.05;
pub const GATE_Y_IMG_MM: f64 = 0.1;
/// Spot tolerance floor (mm) and fraction of the focal length.
pub const GAMMA_FLOOR_MM: f64 = 0.05;
pub const GAMMA_FRACTION: f64 = 0.01;

/// `0.7 exp(-eps/0.02) + 0.3 exp(-eps/0.10)`; zero for infinite error.
pub fn score_focal(epsilon: f64) -> f64 {
    if epsilon.is_infinite() {
        return 0.0;
    }
    0.7 * (-epsilon / ALPHA_STRICT).exp() + 0.3 * (-epsilon / ALPHA_LOOSE).exp()
}

pub fn score_convergence(y_img: f64) -> f64 {
    (-y_img.abs() / BETA_MM).exp()
}

pub fn gate(epsilon: f64, y_img: f64) -> u8 {
    u8::from(epsilon < GATE_EPSILON && y_img.abs() < GATE_Y_IMG_MM)
}

/// Spot tolerance `max(0.05 mm, 0.01 f)`.
pub fn gamma(f_effl: f64) -> f64 {
    GAMMA_FLOOR_MM.max(GAMMA_FRACTION * f_effl)
}

pub fn score_rms(sigma_max: f64, f_effl: f64) -> f64 {
    (-sigma_max / gamma(f_effl)).exp()
}

/// Relative focal error; infinite for an afocal system.
pub fn focal_error(effl_calc: f64, effl_target: f64) -> f64 {
    if effl_calc.is_infinite() {
        f64::INFINITY
    } else {
        (effl_calc - effl_target).abs() / effl_target
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardOptions {
    /// Scale the spot tolerance with the traced focal length instead of the
    /// target (ablation switch).
    pub gamma_from_calculated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_fmt: u8,
    pub r_stru: Option<u8>,
    pub s_f: Option<f64>,
    pub s_c: Option<f64>,
    pub r_ray: Option<f64>,
    pub delta_pass: Option<u8>,
    pub r_rms: Option<f64>,
    pub r_lex: f64,
    pub epsilon: Option<f64>,
    pub y_img_abs: Option<f64>,
    pub sigma_max: Option<f64>,
    pub gamma: Option<f64>,
    pub note: Vec<String>,
}

impl RewardBreakdown {
    /// Zero reward from a failed format stage.
    pub fn rejected(note: impl Into<String>) -> Self {
        RewardBreakdown {
            r_fmt: 0,
            r_stru: None,
            s_f: None,
            s_c: None,
            r_ray: None,
            delta_pass: None,
            r_rms: None,
            r_lex: 0.0,
            epsilon: None,
            y_img_abs: None,
            sigma_max: None,
            gamma: None,
            note: vec![note.into()],
        }
    }

    fn total(&self) -> f64 {
        let r_stru = f64::from(self.r_stru.unwrap_or(0));
        let r_ray = self.r_ray.unwrap_or(0.0);
        let delta = f64::from(self.delta_pass.unwrap_or(0));
        let r_rms = self.r_rms.unwrap_or(0.0);
        f64::from(self.r_fmt) * r_stru * (r_ray + delta * r_rms)
    }
}

fn rejected_by_format(report: &ValidationReport) -> RewardBreakdown {
    let mut b = RewardBreakdown::rejected("format check failed");
    b.note.extend(report.violations.iter().map(|v| v.message.clone()));
    b
}

pub fn score(p: &Prescription, spec: &Specification) -> RewardBreakdown {
    score_with(p, spec, &RewardOptions::default())
}

pub fn score_with(p: &Prescription, spec: &Specification, opts: &RewardOptions) -> RewardBreakdown {
    let format = check_format(p);
    if format.r_fmt == 0 {
        return rejected_by_format(&format);
    }
    let mut b = RewardBreakdown {
        r_fmt: 1,
        note: Vec::new(),
        ..RewardBreakdown::rejected("")
    };
    let structure = check_structure(p);
    b.r_stru = structure.r_stru;
    if structure.r_stru != Some(1) {
        b.note.push("structure check failed".to_string());
        b.note.extend(structure.violations.iter().map(|v| v.message.clone()));
        return b;
    }

    let sys = match OpticalSystem::from_prescription(p) {
        Ok(sys) => sys,
        Err(e) => {
            b.note.push(format!("trace failed: {e}"));
            return b;
        }
    };
    let trace = first_order_of(&sys, spec);
    let epsilon = focal_error(trace.effl_calc, spec.effl_target);
    if trace.afocal {
        b.note.push("afocal system".to_string());
    }
    let s_f = score_focal(epsilon);
    let s_c = score_convergence(trace.y_img);
    b.s_f = Some(s_f);
    b.s_c = Some(s_c);
    b.r_ray = Some(W_FOCAL * s_f + W_CONVERGENCE * s_c);
    b.epsilon = Some(epsilon);
    b.y_img_abs = Some(trace.y_img.abs());
    let f_effl = if opts.gamma_from_calculated && trace.effl_calc.is_finite() && trace.effl_calc > 0.0 {
        trace.effl_calc
    } else {
        spec.effl_target
    };
    b.gamma = Some(gamma(f_effl));
    let delta = gate(epsilon, trace.y_img);
    b.delta_pass = Some(delta);

    if delta == 1 {
        match spot_paraxial(&sys, spec) {
            Ok(spot) => {
                b.sigma_max = Some(spot.sigma_max);
                b.r_rms = Some(score_rms(spot.sigma_max, f_effl));
            }
            Err(e) => {
                b.r_rms = Some(0.0);
                b.note.push(format!("spot trace failed: {e}"));
            }
        }
    }
    b.r_lex = b.total();
    b
}

/// Parses and scores a document. The demand comes from the document's own
/// SPEC lines with `overrides` taking precedence.
///
/// Unparseable or format-invalid text scores zero. An `Err` means the demand
/// could not be resolved for a format-valid document.
pub fn score_text(
    text: &str,
    overrides: &SpecHeader,
    catalog: &GlassCatalog,
    opts: &RewardOptions,
) -> Result<RewardBreakdown, SpecError> {
    let p = match parse_with(text, catalog) {
        Ok(p) => p,
        Err(e) => return Ok(RewardBreakdown::rejected(format!("parse error: {e}"))),
    };
    let format = check_format(&p);
    if format.r_fmt == 0 {
        return Ok(rejected_by_format(&format));
    }
    let spec = p.header.resolve(overrides)?;
    Ok(score_with(&p, &spec, opts))
}

/// Scores an answer to a completion prompt: the answer must reproduce every
/// visible field of the masked base exactly, then runs the usual pipeline.
pub fn score_completion(
    masked: &MaskedPrescription,
    answer: &Prescription,
    spec: &Specification,
) -> RewardBreakdown {
    match masked.complete(answer) {
        Ok(done) => score(&done, spec),
        Err(e) => RewardBreakdown::rejected(format!("completion rejected: {e}")),
    }
}
