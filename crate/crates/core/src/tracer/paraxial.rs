use serde::Serialize;

use super::{OpticalSystem, RayState, TraceError};
use crate::prescription::{Prescription, Specification};

/// Exit slopes below `AFOCAL_RELATIVE * y0` (y0 in mm) count as afocal.
const AFOCAL_RELATIVE: f64 = 1e-12;

/// Refraction at one surface followed by transfer to the next.
///
/// `u' = (n u - y (n' - n) c) / n'`, `y_next = y + u' t`.
pub fn paraxial_step(s: RayState, curvature: f64, n_before: f64, n_after: f64, thickness: f64) -> RayState {
    let power = (n_after - n_before) * curvature;
    let u = (n_before * s.u - s.y * power) / n_after;
    RayState {
        y: s.y + u * thickness,
        u,
    }
}

/// Heights at every surface (image plane last) and slopes after every
/// refracting surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ParaxialPath {
    pub heights: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl ParaxialPath {
    pub fn image_height(&self) -> f64 {
        *self.heights.last().expect("path has an image plane")
    }

    pub fn exit_slope(&self) -> f64 {
        *self.slopes.last().expect("path has a refracting surface")
    }
}

pub fn trace_paraxial(sys: &OpticalSystem, launch: RayState) -> ParaxialPath {
    let m = sys.optical_len();
    let mut heights = Vec::with_capacity(m + 1);
    let mut slopes = Vec::with_capacity(m);
    let mut state = launch;
    heights.push(state.y);
    for k in 0..m {
        let s = &sys.surfaces[k];
        state = paraxial_step(state, s.curvature, sys.index_before(k), s.index_after, s.thickness);
        heights.push(state.y);
        slopes.push(state.u);
    }
    ParaxialPath { heights, slopes }
}

/// First-order properties from a marginal ray launched parallel to the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceReport {
    /// Effective focal length, infinite for an afocal system.
    pub effl_calc: f64,
    /// Distance from the last refracting surface to the paraxial focus.
    pub bfl_calc: f64,
    /// Marginal-ray height on the stated image plane.
    pub y_img: f64,
    /// First vertex to image plane.
    pub totr: f64,
    pub afocal: bool,
    /// Launch height used (EPD / 2).
    pub y0: f64,
}

/// Traces `(y0 = EPD/2, u0 = 0)` from the first surface after the object.
pub fn trace_first_order(p: &Prescription, spec: &Specification) -> Result<TraceReport, TraceError> {
    let sys = OpticalSystem::from_prescription(p)?;
    Ok(first_order(&sys, spec.epd() / 2.0))
}

/// First-order trace of an already resolved system.
pub fn first_order_of(sys: &OpticalSystem, spec: &Specification) -> TraceReport {
    first_order(sys, spec.epd() / 2.0)
}

pub(crate) fn first_order(sys: &OpticalSystem, y0: f64) -> TraceReport {
    let path = trace_paraxial(sys, RayState::new(y0, 0.0));
    let u_final = path.exit_slope();
    let y_last = path.heights[path.heights.len() - 2];
    let afocal = u_final.abs() < AFOCAL_RELATIVE * y0.abs();
    let (effl_calc, bfl_calc) = if afocal {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (-y0 / u_final, -y_last / u_final)
    };
    TraceReport {
        effl_calc,
        bfl_calc,
        y_img: path.image_height(),
        totr: sys.surfaces[..sys.optical_len()].iter().map(|s| s.thickness).sum(),
        afocal,
        y0,
    }
}
