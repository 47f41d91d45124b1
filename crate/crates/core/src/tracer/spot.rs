use serde::Serialize;

use super::paraxial::trace_paraxial;
use super::real::trace_real_meridional;
use super::{OpticalSystem, RayState, TraceError};
use crate::prescription::Specification;

/// Normalized pupil coordinates of the sampled meridional fan.
pub const PUPIL_SAMPLES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

const DEGENERATE_PUPIL: f64 = 1e-12;

/// Launch state on the first surface whose paraxial trace reaches height
/// `rho * stop_radius` on the stop plane, with slope `tan(field_angle)`.
///
/// The stop height is affine in the launch height, so two basis rays
/// (y0 = 0 and y0 = 1) determine it.
pub fn solve_stop_ray(
    sys: &OpticalSystem,
    field_angle: f64,
    rho: f64,
    stop_radius: f64,
) -> Result<RayState, TraceError> {
    let stop = sys.stop.ok_or(TraceError::MissingStop)?;
    let u0 = field_angle.tan();
    let target = rho * stop_radius;
    if stop == 0 {
        return Ok(RayState::new(target, u0));
    }
    let offset = trace_paraxial(sys, RayState::new(0.0, u0)).heights[stop];
    let unit = trace_paraxial(sys, RayState::new(1.0, u0)).heights[stop];
    let gain = unit - offset;
    if gain.abs() < DEGENERATE_PUPIL {
        return Err(TraceError::DegeneratePupil);
    }
    Ok(RayState::new((target - offset) / gain, u0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotHit {
    pub rho: f64,
    pub h: f64,
}

/// Per-field RMS spot radii over the meridional fan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotReport {
    /// Sampled field angles, degrees.
    pub fields: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_max: f64,
    pub hits: Vec<Vec<SpotHit>>,
}

impl SpotReport {
    fn from_hits(fields: Vec<f64>, hits: Vec<Vec<SpotHit>>) -> Self {
        let sigma: Vec<f64> = hits.iter().map(|fan| rms_about_centroid(fan)).collect();
        let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
        SpotReport {
            fields,
            sigma,
            sigma_max,
            hits,
        }
    }
}

fn rms_about_centroid(fan: &[SpotHit]) -> f64 {
    let n = fan.len() as f64;
    let centroid = fan.iter().map(|h| h.h).sum::<f64>() / n;
    (fan.iter().map(|h| (h.h - centroid).powi(2)).sum::<f64>() / n).sqrt()
}

/// Sampled field angles in degrees: on axis and the half field.
fn sampled_fields(spec: &Specification) -> Vec<f64> {
    vec![0.0, spec.fov_full / 2.0]
}

/// Field angle in degrees with its `(rho, launch)` fan.
type Fan = (f64, Vec<(f64, RayState)>);

fn launches(sys: &OpticalSystem, spec: &Specification) -> Result<Vec<Fan>, TraceError> {
    let stop_radius = sys.stop_radius(spec)?;
    sampled_fields(spec)
        .into_iter()
        .map(|deg| {
            let fan = PUPIL_SAMPLES
                .iter()
                .map(|&rho| solve_stop_ray(sys, deg.to_radians(), rho, stop_radius).map(|l| (rho, l)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((deg, fan))
        })
        .collect()
}

/// Paraxial fan traced to the prescription's own image plane.
pub fn spot_paraxial(sys: &OpticalSystem, spec: &Specification) -> Result<SpotReport, TraceError> {
    let mut fields = Vec::new();
    let mut hits = Vec::new();
    for (deg, fan) in launches(sys, spec)? {
        fields.push(deg);
        hits.push(
            fan.into_iter()
                .map(|(rho, launch)| SpotHit {
                    rho,
                    h: trace_paraxial(sys, launch).image_height(),
                })
                .collect(),
        );
    }
    Ok(SpotReport::from_hits(fields, hits))
}

/// Same fan with exact meridional rays; launches are the paraxial stop
/// solutions.
pub fn spot_real(sys: &OpticalSystem, spec: &Specification) -> Result<SpotReport, TraceError> {
    let mut fields = Vec::new();
    let mut hits = Vec::new();
    for (deg, fan) in launches(sys, spec)? {
        fields.push(deg);
        let mut row = Vec::with_capacity(fan.len());
        for (rho, launch) in fan {
            let path = trace_real_meridional(sys, launch)?;
            row.push(SpotHit {
                rho,
                h: path.image_height,
            });
        }
        hits.push(row);
    }
    Ok(SpotReport::from_hits(fields, hits))
}
