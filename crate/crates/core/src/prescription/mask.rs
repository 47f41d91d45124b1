//! Prescription completion: hide a seeded subset of numeric fields and check
//! candidate completions against the visible ones.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::oddl::write_document;
use super::{MaterialKind, Prescription, SurfaceTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskField {
    Radius,
    Thickness,
    RefractiveIndex,
    AbbeNumber,
    SemiDiameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MaskSite {
    pub surface: usize,
    pub field: MaskField,
}

/// A prescription with some fields replaced by `MASK`.
///
/// Masked fields are `None` in `base`; `mask_sites` lists them in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedPrescription {
    pub base: Prescription,
    pub mask_sites: Vec<MaskSite>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("prescription has no lens surfaces to mask")]
    NothingToMask,
    #[error("mask ratio must lie in [0, 1], got {0}")]
    InvalidRatio(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletionError {
    #[error("completion has {found} surfaces, expected {expected}")]
    SurfaceCount { expected: usize, found: usize },
    #[error("surface {surface}: tag changed")]
    TagChanged { surface: usize },
    #[error("surface {surface}: visible field {field} was altered")]
    VisibleFieldChanged { surface: usize, field: String },
    #[error("surface {surface}: masked {field:?} left unfilled")]
    Unfilled { surface: usize, field: MaskField },
}

/// Every site a mask may cover: radius, thickness and glass constants of each
/// row that is neither object nor image.
fn eligible_sites(p: &Prescription) -> Vec<MaskSite> {
    let mut sites = Vec::new();
    for (i, s) in p.surfaces.iter().enumerate() {
        if matches!(s.tag, SurfaceTag::Object | SurfaceTag::Image) {
            continue;
        }
        let mut push = |present: bool, field| {
            if present {
                sites.push(MaskSite { surface: i, field });
            }
        };
        push(s.radius.is_some(), MaskField::Radius);
        push(s.thickness.is_some(), MaskField::Thickness);
        if let Some(m) = s.material.as_ref().filter(|m| m.kind == MaterialKind::Glass) {
            push(m.n_d.is_some(), MaskField::RefractiveIndex);
            push(m.v_d.is_some(), MaskField::AbbeNumber);
        }
    }
    sites
}

/// Masks `ceil(ratio * N)` of the N eligible numeric fields, chosen by a
/// ChaCha8 stream seeded with `seed`.
pub fn mask(p: &Prescription, ratio: f64, seed: u64) -> Result<MaskedPrescription, MaskError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(MaskError::InvalidRatio(ratio));
    }
    if p.interior_indices().next().is_none() {
        return Err(MaskError::NothingToMask);
    }
    let eligible = eligible_sites(p);
    let count = ((ratio * eligible.len() as f64).ceil() as usize).min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, eligible.len(), count).into_vec();
    chosen.sort_unstable();
    let mask_sites: Vec<MaskSite> = chosen.into_iter().map(|i| eligible[i]).collect();

    let mut base = p.clone();
    for site in &mask_sites {
        let s = &mut base.surfaces[site.surface];
        match site.field {
            MaskField::Radius => s.radius = None,
            MaskField::Thickness => s.thickness = None,
            MaskField::SemiDiameter => s.semi_diameter = None,
            MaskField::RefractiveIndex | MaskField::AbbeNumber => {
                if let Some(m) = s.material.as_mut() {
                    // A masked catalog glass is written inline, so the name goes.
                    m.name = None;
                    if site.field == MaskField::RefractiveIndex {
                        m.n_d = None;
                    } else {
                        m.v_d = None;
                    }
                }
            }
        }
    }
    Ok(MaskedPrescription { base, mask_sites })
}

impl MaskedPrescription {
    pub fn is_masked(&self, surface: usize, field: MaskField) -> bool {
        self.mask_sites
            .iter()
            .any(|m| m.surface == surface && m.field == field)
    }

    /// ODDL text with `MASK` at every masked site.
    pub fn to_oddl(&self) -> String {
        write_document(&self.base, &self.mask_sites)
    }

    /// Checks that `answer` keeps every visible field of the base exactly and
    /// fills every masked one, returning the completed prescription.
    pub fn complete(&self, answer: &Prescription) -> Result<Prescription, CompletionError> {
        let expected = self.base.surfaces.len();
        if answer.surfaces.len() != expected {
            return Err(CompletionError::SurfaceCount {
                expected,
                found: answer.surfaces.len(),
            });
        }
        for (i, (b, a)) in self.base.surfaces.iter().zip(&answer.surfaces).enumerate() {
            if b.tag != a.tag {
                return Err(CompletionError::TagChanged { surface: i });
            }
            let bm = b.material.as_ref();
            let am = a.material.as_ref();
            let checks = [
                (MaskField::Radius, b.radius, a.radius),
                (MaskField::Thickness, b.thickness, a.thickness),
                (MaskField::RefractiveIndex, bm.and_then(|m| m.n_d), am.and_then(|m| m.n_d)),
                (MaskField::AbbeNumber, bm.and_then(|m| m.v_d), am.and_then(|m| m.v_d)),
                (MaskField::SemiDiameter, b.semi_diameter, a.semi_diameter),
            ];
            for (field, visible, given) in checks {
                if self.is_masked(i, field) {
                    if given.is_none() {
                        return Err(CompletionError::Unfilled { surface: i, field });
                    }
                } else if !same_value(visible, given) {
                    return Err(CompletionError::VisibleFieldChanged {
                        surface: i,
                        field: format!("{field:?}"),
                    });
                }
            }
            if bm.map(|m| m.kind) != am.map(|m| m.kind) {
                return Err(CompletionError::VisibleFieldChanged {
                    surface: i,
                    field: "material".to_string(),
                });
            }
        }
        if self.base.header != answer.header {
            return Err(CompletionError::VisibleFieldChanged {
                surface: 0,
                field: "SPEC header".to_string(),
            });
        }
        Ok(answer.clone())
    }
}

fn same_value(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y || (x.is_nan() && y.is_nan()),
        (None, None) => true,
        _ => false,
    }
}
