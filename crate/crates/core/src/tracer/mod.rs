//! Ray tracing: paraxial y-u recursion, first-order properties, stop-aimed
//! spot sampling and exact meridional real rays.
//!
//! Sign convention: light travels in +z, a radius is positive when its center
//! of curvature lies to the right of the vertex, and `u` is the slope dy/dz.

mod paraxial;
mod real;
mod spot;

pub use paraxial::{first_order_of, paraxial_step, trace_first_order, trace_paraxial, ParaxialPath, TraceReport};
pub use real::{trace_real_meridional, RealRayPath};
pub use spot::{solve_stop_ray, spot_paraxial, spot_real, SpotHit, SpotReport, PUPIL_SAMPLES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prescription::{curvature_of, Prescription, Specification, SurfaceTag};

/// Paraxial ray: height above the axis (mm) and slope dy/dz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub y: f64,
    pub u: f64,
}

impl RayState {
    pub fn new(y: f64, u: f64) -> Self {
        RayState { y, u }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("prescription must start with OBJ and end with IMA")]
    Topology,
    #[error("no optical surfaces between OBJ and IMA")]
    NoOpticalSurfaces,
    #[error("surface {surface}: missing or invalid {what}")]
    Incomplete { surface: usize, what: &'static str },
    #[error("prescription has no stop")]
    MissingStop,
    #[error("stop height does not depend on the launch height")]
    DegeneratePupil,
    #[error("total internal reflection at surface {surface}")]
    TotalInternalReflection { surface: usize },
    #[error("ray misses surface {surface}")]
    MissedSurface { surface: usize },
}

/// One surface of a resolved system.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSurface {
    pub tag: SurfaceTag,
    pub radius: f64,
    pub curvature: f64,
    /// Distance to the next surface; zero on the image plane.
    pub thickness: f64,
    /// Index of the medium after this surface.
    pub index_after: f64,
    pub semi_diameter: Option<f64>,
}

/// Fully numeric view of a prescription, starting at the first surface after
/// the object and ending with the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSystem {
    pub object_index: f64,
    pub surfaces: Vec<TraceSurface>,
    pub stop: Option<usize>,
}

impl OpticalSystem {
    pub fn from_prescription(p: &Prescription) -> Result<Self, TraceError> {
        let n = p.surfaces.len();
        if n < 2 || p.surfaces[0].tag != SurfaceTag::Object || p.surfaces[n - 1].tag != SurfaceTag::Image {
            return Err(TraceError::Topology);
        }
        if n < 3 {
            return Err(TraceError::NoOpticalSurfaces);
        }
        let index_of = |i: usize| -> Result<f64, TraceError> {
            p.surfaces[i]
                .material
                .as_ref()
                .and_then(|m| m.n_d)
                .filter(|n| n.is_finite() && *n >= 1.0)
                .ok_or(TraceError::Incomplete { surface: i, what: "material" })
        };
        let object_index = index_of(0)?;
        let mut surfaces = Vec::with_capacity(n - 1);
        for (i, s) in p.surfaces.iter().enumerate().skip(1) {
            let radius = s
                .radius
                .filter(|r| !r.is_nan())
                .ok_or(TraceError::Incomplete { surface: i, what: "radius" })?;
            let (thickness, index_after) = if s.tag == SurfaceTag::Image {
                (0.0, 1.0)
            } else {
                let t = s
                    .thickness
                    .filter(|t| t.is_finite())
                    .ok_or(TraceError::Incomplete { surface: i, what: "thickness" })?;
                (t, index_of(i)?)
            };
            surfaces.push(TraceSurface {
                tag: s.tag,
                radius,
                curvature: curvature_of(radius),
                thickness,
                index_after,
                semi_diameter: s.semi_diameter,
            });
        }
        let stop = surfaces.iter().position(|s| s.tag == SurfaceTag::Stop);
        Ok(OpticalSystem {
            object_index,
            surfaces,
            stop,
        })
    }

    /// Number of refracting surfaces (everything before the image plane).
    pub fn optical_len(&self) -> usize {
        self.surfaces.len() - 1
    }

    /// Index of the medium in front of surface `k`.
    pub fn index_before(&self, k: usize) -> f64 {
        if k == 0 {
            self.object_index
        } else {
            self.surfaces[k - 1].index_after
        }
    }

    /// Axial position of each surface vertex, the first surface at z = 0.
    pub fn vertex_positions(&self) -> Vec<f64> {
        let mut z = 0.0;
        self.surfaces
            .iter()
            .map(|s| {
                let here = z;
                z += s.thickness;
                here
            })
            .collect()
    }

    /// Stop semi-diameter; when the stop row carries none, the height of the
    /// axial marginal ray (launched at EPD/2) on the stop plane is used.
    pub fn stop_radius(&self, spec: &Specification) -> Result<f64, TraceError> {
        let stop = self.stop.ok_or(TraceError::MissingStop)?;
        if let Some(h) = self.surfaces[stop].semi_diameter.filter(|h| h.is_finite()) {
            return Ok(h);
        }
        let path = trace_paraxial(self, RayState::new(spec.epd() / 2.0, 0.0));
        let h = path.heights[stop].abs();
        if h < 1e-12 {
            Err(TraceError::DegeneratePupil)
        } else {
            Ok(h)
        }
    }

    /// Prescription row number of surface `k` of this system.
    pub(crate) fn row(k: usize) -> usize {
        k + 1
    }
}
