//! Lens prescription data model.
//!
//! A [`Prescription`] is the surface table exactly as written in an ODDL
//! document: fields may be absent (`-`) or masked (`MASK`), and nothing is
//! checked beyond syntax. Structural and physical checks live in
//! [`crate::validation`]; the tracer resolves a validated prescription into a
//! fully numeric system.

mod catalog;
mod mask;
mod oddl;

pub use catalog::{lookup_material, CatalogError, GlassCatalog};
pub use mask::{mask, CompletionError, MaskError, MaskField, MaskSite, MaskedPrescription};
pub use oddl::{parse, parse_masked, parse_masked_with, parse_with, serialize, ParseError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Refractive index of air (and vacuum) at the d-line.
pub const AIR_INDEX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MaterialKind {
    Air,
    Glass,
}

/// Optical medium following a surface.
///
/// Catalog glasses carry their catalog `name`; inline glasses (`G:<n_d>:<v_d>`)
/// have no name. `n_d`/`v_d` are `None` only for masked values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub kind: MaterialKind,
    pub name: Option<String>,
    pub n_d: Option<f64>,
    pub v_d: Option<f64>,
}

impl Material {
    pub fn air() -> Self {
        Material {
            kind: MaterialKind::Air,
            name: None,
            n_d: Some(AIR_INDEX),
            v_d: None,
        }
    }

    pub fn catalog_glass(name: impl Into<String>, n_d: f64, v_d: f64) -> Self {
        Material {
            kind: MaterialKind::Glass,
            name: Some(name.into()),
            n_d: Some(n_d),
            v_d: Some(v_d),
        }
    }

    pub fn inline_glass(n_d: f64, v_d: f64) -> Self {
        Material {
            kind: MaterialKind::Glass,
            name: None,
            n_d: Some(n_d),
            v_d: Some(v_d),
        }
    }

    pub fn is_air(&self) -> bool {
        self.kind == MaterialKind::Air
    }

    pub fn is_glass(&self) -> bool {
        self.kind == MaterialKind::Glass
    }

    /// Whether the material satisfies the physical range invariants
    /// (air is exactly 1.0; glass has 1 < n_d < 2.5 and 10 < v_d < 100).
    pub fn is_physical(&self) -> bool {
        match self.kind {
            MaterialKind::Air => self.n_d == Some(AIR_INDEX),
            MaterialKind::Glass => match (self.n_d, self.v_d) {
                (Some(n), Some(v)) => n > 1.0 && n < 2.5 && v > 10.0 && v < 100.0,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceTag {
    Object,
    Stop,
    Image,
    Standard(u32),
}

impl SurfaceTag {
    pub fn label(&self) -> String {
        match self {
            SurfaceTag::Object => "OBJ".to_string(),
            SurfaceTag::Stop => "STO".to_string(),
            SurfaceTag::Image => "IMA".to_string(),
            SurfaceTag::Standard(i) => i.to_string(),
        }
    }
}

/// One row of the surface table.
///
/// `thickness` is the axial distance to the next surface and `material` the
/// medium filling that gap. An infinite radius is a plano surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub tag: SurfaceTag,
    pub radius: Option<f64>,
    pub thickness: Option<f64>,
    pub material: Option<Material>,
    pub semi_diameter: Option<f64>,
}

impl Surface {
    pub fn new(tag: SurfaceTag, radius: f64, thickness: f64, material: Material) -> Self {
        Surface {
            tag,
            radius: Some(radius),
            thickness: Some(thickness),
            material: Some(material),
            semi_diameter: None,
        }
    }

    pub fn with_semi_diameter(mut self, h: f64) -> Self {
        self.semi_diameter = Some(h);
        self
    }

    /// Curvature 1/R, zero for a plano surface.
    pub fn curvature(&self) -> Option<f64> {
        self.radius.map(curvature_of)
    }
}

pub(crate) fn curvature_of(radius: f64) -> f64 {
    if radius.is_infinite() {
        0.0
    } else {
        1.0 / radius
    }
}

/// `SPEC` lines as they appear in a document; every key is optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecHeader {
    pub effl: Option<f64>,
    pub fno: Option<f64>,
    pub fov: Option<f64>,
    pub totr: Option<f64>,
}

impl SpecHeader {
    /// Resolves a demand from this header, with every key present in
    /// `overrides` taking precedence.
    pub fn resolve(&self, overrides: &SpecHeader) -> Result<Specification, SpecError> {
        let effl = overrides.effl.or(self.effl).ok_or(SpecError::Missing("EFFL"))?;
        let fno = overrides.fno.or(self.fno).ok_or(SpecError::Missing("FNO"))?;
        let fov = overrides.fov.or(self.fov).ok_or(SpecError::Missing("FOV"))?;
        let totr = overrides.totr.or(self.totr);
        Specification::new(effl, fov, fno, totr)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("specification is missing {0}")]
    Missing(&'static str),
    #[error("invalid specification: {0}")]
    Invalid(String),
}

/// The design demand: target focal length, full diagonal field of view and
/// F-number, plus an optional total-track limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Specification {
    /// Target effective focal length, mm.
    pub effl_target: f64,
    /// Full field of view, degrees.
    pub fov_full: f64,
    pub f_number: f64,
    /// Optional total-track upper bound, mm.
    pub totr_max: Option<f64>,
}

impl Specification {
    pub fn new(
        effl_target: f64,
        fov_full: f64,
        f_number: f64,
        totr_max: Option<f64>,
    ) -> Result<Self, SpecError> {
        if !(effl_target.is_finite() && effl_target > 0.0) {
            return Err(SpecError::Invalid(format!("EFFL must be positive, got {effl_target}")));
        }
        if !(f_number.is_finite() && f_number > 0.0) {
            return Err(SpecError::Invalid(format!("FNO must be positive, got {f_number}")));
        }
        if !(fov_full.is_finite() && (0.0..180.0).contains(&fov_full)) {
            return Err(SpecError::Invalid(format!("FOV must lie in [0, 180), got {fov_full}")));
        }
        if let Some(t) = totr_max {
            if !(t > 0.0) {
                return Err(SpecError::Invalid(format!("TOTR must be positive, got {t}")));
            }
        }
        Ok(Specification {
            effl_target,
            fov_full,
            f_number,
            totr_max,
        })
    }

    /// Entrance pupil diameter EFFL / F#.
    pub fn epd(&self) -> f64 {
        self.effl_target / self.f_number
    }

    /// Half field angle in radians.
    pub fn half_field(&self) -> f64 {
        (self.fov_full / 2.0).to_radians()
    }
}

/// Surface table plus the document's own specification header.
///
/// Surfaces are stored in propagation order, object side first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    pub header: SpecHeader,
    pub surfaces: Vec<Surface>,
}

impl Prescription {
    pub fn new(header: SpecHeader, surfaces: Vec<Surface>) -> Self {
        Prescription { header, surfaces }
    }

    pub fn stop_index(&self) -> Option<usize> {
        self.surfaces.iter().position(|s| s.tag == SurfaceTag::Stop)
    }

    /// Indices of rows that are neither object nor image.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.surfaces
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s.tag, SurfaceTag::Object | SurfaceTag::Image))
            .map(|(i, _)| i)
    }

    pub fn to_oddl(&self) -> String {
        serialize(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_derives_pupil() {
        let s = Specification::new(100.0, 20.0, 4.0, None).unwrap();
        assert_eq!(s.epd(), 25.0);
        assert!((s.half_field() - 10f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn spec_rejects_out_of_range() {
        assert!(Specification::new(0.0, 20.0, 4.0, None).is_err());
        assert!(Specification::new(10.0, 180.0, 4.0, None).is_err());
        assert!(Specification::new(10.0, 20.0, -1.0, None).is_err());
        assert!(Specification::new(10.0, 0.0, 1.0, None).is_ok());
    }

    #[test]
    fn overrides_win() {
        let header = SpecHeader {
            effl: Some(50.0),
            fno: Some(2.0),
            fov: Some(10.0),
            totr: None,
        };
        let over = SpecHeader {
            effl: Some(75.0),
            ..Default::default()
        };
        let s = header.resolve(&over).unwrap();
        assert_eq!(s.effl_target, 75.0);
        assert_eq!(s.f_number, 2.0);
        assert_eq!(
            SpecHeader::default().resolve(&SpecHeader::default()),
            Err(SpecError::Missing("EFFL"))
        );
    }

    #[test]
    fn material_ranges() {
        assert!(Material::air().is_physical());
        assert!(Material::inline_glass(1.5, 60.0).is_physical());
        assert!(!Material::inline_glass(2.6, 60.0).is_physical());
        assert!(!Material::inline_glass(1.5, 5.0).is_physical());
        assert!(!Material::inline_glass(1.0, 50.0).is_physical());
    }
}
