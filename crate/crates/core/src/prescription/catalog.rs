use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

use super::Material;

const BUILTIN_CATALOG: &str = include_str!("../../data/glass_catalog.txt");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("catalog line {line}: duplicate glass {name}")]
    Duplicate { line: usize, name: String },
    #[error("unknown material {0:?}")]
    UnknownMaterial(String),
    #[error("reading catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Glass name to (n_d, v_d) table.
///
/// The on-disk format is one `NAME n_d v_d` entry per line with `#` comments.
/// Names are matched case-insensitively. `AIR` and `VAC` are always known and
/// never looked up in the table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlassCatalog {
    entries: BTreeMap<String, (f64, f64)>,
}

impl GlassCatalog {
    /// Catalog shipped with the crate.
    pub fn builtin() -> &'static GlassCatalog {
        static CATALOG: OnceLock<GlassCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            GlassCatalog::from_text(BUILTIN_CATALOG).expect("builtin glass catalog is well formed")
        })
    }

    /// Raw text of the shipped catalog file.
    pub fn builtin_text() -> &'static str {
        BUILTIN_CATALOG
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CatalogError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(CatalogError::Malformed {
                    line,
                    message: format!("expected `NAME n_d v_d`, got {} columns", cols.len()),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CatalogError::Malformed {
                        line,
                        message: format!("invalid number {s:?}"),
                    })
            };
            let name = cols[0].to_ascii_uppercase();
            let value = (num(cols[1])?, num(cols[2])?);
            if entries.insert(name.clone(), value).is_some() {
                return Err(CatalogError::Duplicate { line, name });
            }
        }
        Ok(GlassCatalog { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn lookup(&self, name: &str) -> Result<Material, CatalogError> {
        let key = name.to_ascii_uppercase();
        if key == "AIR" || key == "VAC" {
            return Ok(Material::air());
        }
        self.entries
            .get(&key)
            .map(|&(n, v)| Material::catalog_glass(key.clone(), n, v))
            .ok_or_else(|| CatalogError::UnknownMaterial(name.to_string()))
    }
}

/// Looks a material up in the builtin catalog.
pub fn lookup_material(name: &str) -> Result<Material, CatalogError> {
    GlassCatalog::builtin().lookup(name)
}
