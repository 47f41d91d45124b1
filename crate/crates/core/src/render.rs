//! SVG lens layout with real meridional ray fans.

use std::fmt::Write as _;

use thiserror::Error;

use crate::prescription::{Prescription, Specification, SurfaceTag};
use crate::tracer::{solve_stop_ray, trace_real_meridional, OpticalSystem, TraceError, PUPIL_SAMPLES};

const WIDTH_PX: f64 = 960.0;
const MARGIN_PX: f64 = 24.0;
const FIELD_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("no surface carries a semi-diameter")]
    NoApertures,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

struct Frame {
    scale: f64,
    z0: f64,
    y_top: f64,
}

impl Frame {
    fn x(&self, z: f64) -> f64 {
        MARGIN_PX + (z - self.z0) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN_PX + (self.y_top - y) * self.scale
    }
}

/// Draws surfaces, stop, axis, image plane and one ray fan per distinct field
/// angle in `{0, FOV/2}`. Rays that miss a surface or reflect totally are
/// omitted. Output is byte-stable for fixed input.
pub fn render_svg(p: &Prescription, spec: &Specification) -> Result<String, RenderError> {
    let sys = OpticalSystem::from_prescription(p)?;
    if sys.surfaces.iter().all(|s| s.semi_diameter.is_none()) {
        return Err(RenderError::NoApertures);
    }
    let stop_radius = sys.stop_radius(spec)?;
    let z = sys.vertex_positions();
    let z_image = *z.last().expect("system has an image plane");

    let mut fields = vec![0.0];
    if spec.fov_full > 0.0 {
        fields.push(spec.fov_full / 2.0);
    }
    let mut fans = Vec::new();
    for &deg in &fields {
        let mut fan = Vec::new();
        for &rho in &PUPIL_SAMPLES {
            let launch = solve_stop_ray(&sys, deg.to_radians(), rho, stop_radius)?;
            if let Ok(path) = trace_real_meridional(&sys, launch) {
                fan.push((launch.u, path.points));
            }
        }
        fans.push(fan);
    }

    let lead = 0.1 * z_image.abs().max(1.0);
    let mut y_max = sys
        .surfaces
        .iter()
        .filter_map(|s| s.semi_diameter)
        .fold(0.0, f64::max);
    for fan in &fans {
        for (_, pts) in fan {
            for &(_, y) in pts {
                y_max = y_max.max(y.abs());
            }
        }
    }
    let z_min = -lead;
    let z_max = z_image + lead;
    let y_top = 1.1 * y_max;
    let scale = (WIDTH_PX - 2.0 * MARGIN_PX) / (z_max - z_min);
    let frame = Frame {
        scale,
        z0: z_min,
        y_top,
    };
    let height_px = 2.0 * MARGIN_PX + 2.0 * y_top * scale;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.3}\" height=\"{:.3}\" viewBox=\"0 0 {:.3} {:.3}\">",
        WIDTH_PX, height_px, WIDTH_PX, height_px
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<line class=\"axis\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>",
        frame.x(z_min),
        frame.y(0.0),
        frame.x(z_max),
        frame.y(0.0)
    );

    for (k, s) in sys.surfaces[..sys.optical_len()].iter().enumerate() {
        let Some(h) = s.semi_diameter else { continue };
        let h = if s.radius.is_finite() { h.min(s.radius.abs()) } else { h };
        let sag = if s.curvature == 0.0 {
            0.0
        } else {
            let r = s.radius;
            r - r.signum() * (r * r - h * h).max(0.0).sqrt()
        };
        let (xa, ya) = (frame.x(z[k] + sag), frame.y(h));
        let (xb, yb) = (frame.x(z[k] + sag), frame.y(-h));
        if s.curvature == 0.0 {
            let _ = writeln!(
                svg,
                "<path class=\"surface\" d=\"M {xa:.3} {ya:.3} L {xb:.3} {yb:.3}\" fill=\"none\" stroke=\"black\"/>"
            );
        } else {
            let rr = s.radius.abs() * scale;
            // center to the right bulges left, which is a counter-clockwise
            // sweep from top to bottom in screen coordinates
            let sweep = if s.radius > 0.0 { 0 } else { 1 };
            let _ = writeln!(
                svg,
                "<path class=\"surface\" d=\"M {xa:.3} {ya:.3} A {rr:.3} {rr:.3} 0 0 {sweep} {xb:.3} {yb:.3}\" fill=\"none\" stroke=\"black\"/>"
            );
        }
        if s.tag == SurfaceTag::Stop {
            let tick = 0.08 * y_max;
            for sign in [1.0, -1.0] {
                let _ = writeln!(
                    svg,
                    "<line class=\"stop\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\" stroke-width=\"2\"/>",
                    frame.x(z[k] + sag),
                    frame.y(sign * h),
                    frame.x(z[k] + sag),
                    frame.y(sign * (h + tick))
                );
            }
        }
    }

    let image = &sys.surfaces[sys.optical_len()];
    let h_img = image.semi_diameter.unwrap_or(y_max);
    let _ = writeln!(
        svg,
        "<line class=\"image\" x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\" stroke-width=\"1.5\"/>",
        frame.x(z_image),
        frame.y(h_img),
        frame.x(z_image),
        frame.y(-h_img)
    );

    for (f, fan) in fans.iter().enumerate() {
        let color = FIELD_COLORS[f % FIELD_COLORS.len()];
        for (slope, pts) in fan {
            let (z_start, y_start) = pts[0];
            let mut coords = format!("{:.3},{:.3}", frame.x(z_start - lead), frame.y(y_start - slope * lead));
            for &(pz, py) in pts {
                let _ = write!(coords, " {:.3},{:.3}", frame.x(pz), frame.y(py));
            }
            let _ = writeln!(
                svg,
                "<polyline class=\"ray\" points=\"{coords}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.8\"/>"
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
