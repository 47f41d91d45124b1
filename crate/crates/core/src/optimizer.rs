//! Local refinement by damped least squares.
//!
//! Variables are the curvatures of curved surfaces and/or the air gaps; the
//! gap in front of the image plane is always free so defocus can be removed.
//! Glasses are never varied and plano surfaces stay plano.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::prescription::{Prescription, Specification, SurfaceTag};
use crate::reward::{score, RewardBreakdown};
use crate::tracer::{first_order_of, spot_paraxial, spot_real, OpticalSystem, PUPIL_SAMPLES};
use crate::validation::{edge_thickness, validate, GeometryError};

/// Residual assigned to a quantity that could not be traced; contributes
/// 1e6 to the merit.
const FAILED_RESIDUAL: f64 = 1e3;
/// Thicknesses are clamped to this after every step, mm.
const MIN_THICKNESS: f64 = 1e-3;
/// Two fields of five pupil samples.
const SPOT_RESIDUALS: usize = 2 * PUPIL_SAMPLES.len();
const LAMBDA_BASE: f64 = 1e-3;
const LAMBDA_GROWTH: f64 = 4.0;
/// Largest damping exponent tried before giving up on an iteration.
const MAX_DAMPING_STEPS: i32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeVariables {
    Radii,
    AirGaps,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotModel {
    Paraxial,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeritConfig {
    pub w_effl: f64,
    pub w_spot: f64,
    pub penalty_scale: f64,
    pub free_variables: FreeVariables,
    pub max_iters: usize,
    pub rel_tolerance: f64,
    pub spot: SpotModel,
}

impl Default for MeritConfig {
    fn default() -> Self {
        MeritConfig {
            w_effl: 1.0,
            w_spot: 1.0,
            penalty_scale: 1e3,
            free_variables: FreeVariables::Both,
            max_iters: 200,
            rel_tolerance: 1e-9,
            spot: SpotModel::Paraxial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    #[serde(serialize_with = "as_oddl")]
    pub refined: Prescription,
    pub merit_initial: f64,
    pub merit_final: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    /// Merit after the start and after every accepted step.
    pub merit_history: Vec<f64>,
    pub converged: bool,
    pub reward_before: RewardBreakdown,
    pub reward_after: RewardBreakdown,
}

fn as_oddl<S: Serializer>(p: &Prescription, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_oddl())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("starting prescription is not format- and structure-valid: {0}")]
    InvalidStart(String),
    #[error("no damping level decreases the merit function")]
    NotImprovable(Box<OptimizeResult>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Variable {
    Curvature(usize),
    Thickness(usize),
}

fn variables(p: &Prescription, free: FreeVariables) -> Vec<Variable> {
    let n = p.surfaces.len();
    let image_gap = n - 2;
    let mut vars = Vec::new();
    if matches!(free, FreeVariables::Radii | FreeVariables::Both) {
        for i in p.interior_indices() {
            if p.surfaces[i].radius.is_some_and(f64::is_finite) {
                vars.push(Variable::Curvature(i));
            }
        }
    }
    for i in p.interior_indices() {
        let s = &p.surfaces[i];
        let air = s.material.as_ref().is_some_and(|m| m.is_air());
        let gaps = matches!(free, FreeVariables::AirGaps | FreeVariables::Both);
        if i == image_gap || (gaps && air) {
            vars.push(Variable::Thickness(i));
        }
    }
    vars
}

fn read(p: &Prescription, vars: &[Variable]) -> DVector<f64> {
    DVector::from_iterator(
        vars.len(),
        vars.iter().map(|v| match *v {
            Variable::Curvature(i) => 1.0 / p.surfaces[i].radius.unwrap_or(f64::INFINITY),
            Variable::Thickness(i) => p.surfaces[i].thickness.unwrap_or(0.0),
        }),
    )
}

fn write(p: &Prescription, vars: &[Variable], x: &DVector<f64>) -> Prescription {
    let mut out = p.clone();
    for (v, &value) in vars.iter().zip(x.iter()) {
        match *v {
            Variable::Curvature(i) => {
                out.surfaces[i].radius = Some(if value == 0.0 { f64::INFINITY } else { 1.0 / value });
            }
            Variable::Thickness(i) => out.surfaces[i].thickness = Some(value),
        }
    }
    out
}

fn project(vars: &[Variable], x: &mut DVector<f64>) {
    for (v, value) in vars.iter().zip(x.iter_mut()) {
        if matches!(v, Variable::Thickness(_)) && *value < MIN_THICKNESS {
            *value = MIN_THICKNESS;
        }
    }
}

/// Residual vector `[sqrt(w_effl) eps, spot residuals.., penalties..]`.
/// Its length depends only on the prescription layout.
fn residuals(p: &Prescription, spec: &Specification, cfg: &MeritConfig) -> Vec<f64> {
    let mut r = Vec::new();
    let sys = OpticalSystem::from_prescription(p);
    match &sys {
        Ok(sys) => {
            let fo = first_order_of(sys, spec);
            if fo.afocal {
                r.push(FAILED_RESIDUAL);
            } else {
                r.push(cfg.w_effl.sqrt() * (fo.effl_calc - spec.effl_target) / spec.effl_target);
            }
            let spot = match cfg.spot {
                SpotModel::Paraxial => spot_paraxial(sys, spec),
                SpotModel::Real => spot_real(sys, spec),
            };
            match spot {
                Ok(spot) => {
                    for fan in &spot.hits {
                        // sum of squares over the fan equals w_spot sigma^2,
                        // but stays smooth where sigma reaches zero
                        let n = fan.len() as f64;
                        let centroid = fan.iter().map(|h| h.h).sum::<f64>() / n;
                        let w = (cfg.w_spot / n).sqrt();
                        r.extend(fan.iter().map(|h| w * (h.h - centroid)));
                    }
                }
                Err(_) => push_failed(&mut r, SPOT_RESIDUALS),
            }
        }
        Err(_) => push_failed(&mut r, 1 + SPOT_RESIDUALS),
    }

    let weight = cfg.penalty_scale.sqrt();
    let penalty = |margin: f64| weight * (-margin).max(0.0);
    let n = p.surfaces.len();
    for i in p.interior_indices() {
        let s = &p.surfaces[i];
        let t = s.thickness.unwrap_or(0.0);
        r.push(penalty(t));
        let glass = s.material.as_ref().is_some_and(|m| m.is_glass());
        if glass && i + 1 < n && p.surfaces[i + 1].tag != SurfaceTag::Image {
            let back = &p.surfaces[i + 1];
            let h = match (s.semi_diameter, back.semi_diameter) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            let margin = match (h, s.radius, back.radius) {
                (Some(h), Some(r1), Some(r2)) => match edge_thickness(t, r1, r2, h) {
                    Ok(edge) => edge,
                    Err(GeometryError::ApertureExceedsRadius { radius, height }) => radius - height,
                },
                _ => 0.0,
            };
            r.push(penalty(margin));
        }
    }
    r.push(penalty(p.surfaces[n - 2].thickness.unwrap_or(0.0)));
    r
}

fn push_failed(r: &mut Vec<f64>, slots: usize) {
    r.push(FAILED_RESIDUAL);
    r.extend(std::iter::repeat_n(0.0, slots - 1));
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// `w_effl eps^2 + w_spot sum sigma_k^2 + penalty sum max(0, -margin)^2`.
pub fn merit(p: &Prescription, spec: &Specification, cfg: &MeritConfig) -> f64 {
    sum_sq(&residuals(p, spec, cfg))
}

pub fn refine(p: &Prescription, spec: &Specification, cfg: &MeritConfig) -> Result<OptimizeResult, OptimizeError> {
    let report = validate(p);
    if !report.passed() {
        let why = report
            .violations
            .iter()
            .map(|v| v.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(OptimizeError::InvalidStart(why));
    }
    let vars = variables(p, cfg.free_variables);
    let eval = |x: &DVector<f64>| residuals(&write(p, &vars, x), spec, cfg);

    let mut x = read(p, &vars);
    let mut r = eval(&x);
    let merit_initial = sum_sq(&r);
    let mut m = merit_initial;
    let mut history = vec![m];
    let mut damping = 0i32;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if m == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jac = jacobian(&eval, &x, &r);
        let res = DVector::from_column_slice(&r);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let grad = &jt * &res;
        let scale = DVector::from_iterator(normal.nrows(), (0..normal.nrows()).map(|i| {
            let d = normal[(i, i)];
            if d > 0.0 { d } else { 1.0 }
        }));

        let mut step = None;
        while damping <= MAX_DAMPING_STEPS {
            let lambda = LAMBDA_BASE * LAMBDA_GROWTH.powi(damping);
            let mut lhs = normal.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += lambda * scale[i];
            }
            if let Some(chol) = lhs.cholesky() {
                let delta = chol.solve(&(-&grad));
                let mut trial = &x + delta;
                project(&vars, &mut trial);
                let r_trial = eval(&trial);
                let m_trial = sum_sq(&r_trial);
                if m_trial < m {
                    step = Some((trial, r_trial, m_trial));
                    damping = (damping - 1).max(0);
                    break;
                }
            }
            damping += 1;
        }

        let Some((trial, r_trial, m_trial)) = step else {
            converged = accepted > 0;
            break;
        };
        accepted += 1;
        let rel = (m - m_trial) / m;
        x = trial;
        r = r_trial;
        m = m_trial;
        history.push(m);
        if rel < cfg.rel_tolerance {
            converged = true;
            break;
        }
    }

    let refined = write(p, &vars, &x);
    let result = OptimizeResult {
        reward_before: score(p, spec),
        reward_after: score(&refined, spec),
        refined,
        merit_initial,
        merit_final: m,
        iterations,
        accepted_steps: accepted,
        merit_history: history,
        converged,
    };
    if accepted == 0 && !converged {
        return Err(OptimizeError::NotImprovable(Box::new(result)));
    }
    Ok(result)
}

/// Forward differences with step `max(1e-6, 1e-6 |x_j|)`.
fn jacobian<F>(eval: &F, x: &DVector<f64>, r: &[f64]) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> Vec<f64>,
{
    let mut jac = DMatrix::zeros(r.len(), x.len());
    for j in 0..x.len() {
        let h = 1e-6f64.max(1e-6 * x[j].abs());
        let mut probe = x.clone();
        probe[j] += h;
        let r_probe = eval(&probe);
        for (i, (&a, &b)) in r_probe.iter().zip(r).enumerate() {
            jac[(i, j)] = (a - b) / h;
        }
    }
    jac
}
