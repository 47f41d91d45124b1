use super::{OpticalSystem, RayState, TraceError};

/// Exact meridional ray through a system.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRayPath {
    /// `(z, y)` of the launch point and of every surface intersection, the
    /// image plane last. The first surface vertex sits at z = 0.
    pub points: Vec<(f64, f64)>,
    pub image_height: f64,
    /// Prescription rows whose semi-diameter the ray exceeded.
    pub vignetted: Vec<usize>,
}

/// Traces a real ray launched on the first surface's vertex plane at height
/// `launch.y` with slope `launch.u`.
///
/// Intersections use the stable near-root form of the sphere equation
/// measured from each vertex plane; refraction is vector Snell's law.
pub fn trace_real_meridional(sys: &OpticalSystem, launch: RayState) -> Result<RealRayPath, TraceError> {
    let norm = (1.0 + launch.u * launch.u).sqrt();
    let mut dir = (1.0 / norm, launch.u / norm);
    let mut pos = (0.0, launch.y);
    let mut points = vec![pos];
    let mut vignetted = Vec::new();
    let vertices = sys.vertex_positions();

    for (k, s) in sys.surfaces.iter().enumerate() {
        let row = OpticalSystem::row(k);
        if dir.0 <= 0.0 {
            return Err(TraceError::MissedSurface { surface: row });
        }
        // transfer to the vertex plane
        let to_plane = (vertices[k] - pos.0) / dir.0;
        let y = pos.1 + to_plane * dir.1;
        let c = s.curvature;
        let b = dir.0 - c * y * dir.1;
        let disc = b * b - c * c * y * y;
        if disc < 0.0 || b + disc.sqrt() <= 0.0 {
            return Err(TraceError::MissedSurface { surface: row });
        }
        let along = c * y * y / (b + disc.sqrt());
        let z_local = along * dir.0;
        pos = (vertices[k] + z_local, y + along * dir.1);
        points.push(pos);
        if s.semi_diameter.is_some_and(|h| pos.1.abs() > h) {
            vignetted.push(row);
        }
        if k == sys.optical_len() {
            break;
        }

        let normal = (1.0 - c * z_local, -c * pos.1);
        let mu = sys.index_before(k) / s.index_after;
        let cos_i = dir.0 * normal.0 + dir.1 * normal.1;
        let cos_t_sq = 1.0 - mu * mu * (1.0 - cos_i * cos_i);
        if cos_t_sq < 0.0 {
            return Err(TraceError::TotalInternalReflection { surface: row });
        }
        let g = cos_t_sq.sqrt() - mu * cos_i;
        dir = (mu * dir.0 + g * normal.0, mu * dir.1 + g * normal.1);
    }

    Ok(RealRayPath {
        image_height: pos.1,
        points,
        vignetted,
    })
}
