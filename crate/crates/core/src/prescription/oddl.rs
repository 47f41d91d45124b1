//! ODDL, the line-oriented lens data format.
//!
//! ```text
//! # comment
//! SPEC EFFL 100
//! SPEC FNO 4
//! SPEC FOV 20
//! SPEC TOTR 120          # optional
//! SURF OBJ INF INF AIR
//! SURF 1   40.94 8.74 N-LAK7 23
//! SURF STO INF 1 AIR 14.432
//! SURF 3   -43.33 73.587 AIR 22
//! SURF IMA INF - -
//! ```
//!
//! Surface rows are `SURF <tag> <radius> <thickness> <material> [semi-diameter]`.
//! Keywords are case-insensitive. `INF` is infinity, `-` an absent value and
//! `MASK` a placeholder left for completion. A material is a catalog name,
//! `AIR`/`VAC`, or an inline glass `G:<n_d>:<v_d>`.

use thiserror::Error;

use super::catalog::{CatalogError, GlassCatalog};
use super::mask::{MaskField, MaskSite, MaskedPrescription};
use super::{Material, MaterialKind, Prescription, SpecHeader, Surface, SurfaceTag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown material {name:?}")]
    UnknownMaterial {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("line {line}: SPEC {key} given more than once")]
    DuplicateSpec { line: usize, key: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownMaterial { line, .. }
            | ParseError::DuplicateSpec { line, .. } => *line,
        }
    }
}

/// Parses a document against the builtin glass catalog.
pub fn parse(text: &str) -> Result<Prescription, ParseError> {
    parse_with(text, GlassCatalog::builtin())
}

pub fn parse_with(text: &str, catalog: &GlassCatalog) -> Result<Prescription, ParseError> {
    Parser::new(catalog).run(text).map(|(p, _)| p)
}

/// Parses a document that may contain `MASK` placeholders, recording where
/// they occur.
pub fn parse_masked(text: &str) -> Result<MaskedPrescription, ParseError> {
    parse_masked_with(text, GlassCatalog::builtin())
}

pub fn parse_masked_with(
    text: &str,
    catalog: &GlassCatalog,
) -> Result<MaskedPrescription, ParseError> {
    Parser::new(catalog)
        .run(text)
        .map(|(base, mask_sites)| MaskedPrescription { base, mask_sites })
}

/// Renders a prescription as ODDL. Numbers use the shortest decimal form that
/// parses back to the same `f64`.
pub fn serialize(p: &Prescription) -> String {
    write_document(p, &[])
}

pub(crate) fn write_document(p: &Prescription, masks: &[MaskSite]) -> String {
    let masked = |surface: usize, field: MaskField| {
        masks.iter().any(|m| m.surface == surface && m.field == field)
    };
    let mut out = String::new();
    let h = &p.header;
    for (key, value) in [("EFFL", h.effl), ("FNO", h.fno), ("FOV", h.fov), ("TOTR", h.totr)] {
        if let Some(v) = value {
            out.push_str(&format!("SPEC {key} {}\n", format_number(v)));
        }
    }
    for (i, s) in p.surfaces.iter().enumerate() {
        let field = |v: Option<f64>, f: MaskField| {
            if masked(i, f) {
                "MASK".to_string()
            } else {
                v.map_or_else(|| "-".to_string(), format_number)
            }
        };
        let material = match &s.material {
            _ if masked(i, MaskField::RefractiveIndex) || masked(i, MaskField::AbbeNumber) => {
                let m = s.material.as_ref();
                format!(
                    "G:{}:{}",
                    field(m.and_then(|m| m.n_d), MaskField::RefractiveIndex),
                    field(m.and_then(|m| m.v_d), MaskField::AbbeNumber)
                )
            }
            None => "-".to_string(),
            Some(m) => format_material(m),
        };
        out.push_str(&format!(
            "SURF {} {} {} {}",
            s.tag.label(),
            field(s.radius, MaskField::Radius),
            field(s.thickness, MaskField::Thickness),
            material
        ));
        if s.semi_diameter.is_some() || masked(i, MaskField::SemiDiameter) {
            out.push(' ');
            out.push_str(&field(s.semi_diameter, MaskField::SemiDiameter));
        }
        out.push('\n');
    }
    out
}

fn format_material(m: &Material) -> String {
    match m.kind {
        MaterialKind::Air => "AIR".to_string(),
        MaterialKind::Glass => match (&m.name, m.n_d, m.v_d) {
            (Some(name), Some(_), Some(_)) => name.clone(),
            (_, n, v) => {
                let f = |x: Option<f64>| x.map_or_else(|| "-".to_string(), format_number);
                format!("G:{}:{}", f(n), f(v))
            }
        },
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v == f64::INFINITY {
        "INF".to_string()
    } else if v == f64::NEG_INFINITY {
        "-INF".to_string()
    } else {
        format!("{v}")
    }
}

/// A field token after classification.
enum Value {
    Number(f64),
    Absent,
    Masked,
}

struct Parser<'c> {
    catalog: &'c GlassCatalog,
    header: SpecHeader,
    surfaces: Vec<Surface>,
    masks: Vec<MaskSite>,
}

impl<'c> Parser<'c> {
    fn new(catalog: &'c GlassCatalog) -> Self {
        Parser {
            catalog,
            header: SpecHeader::default(),
            surfaces: Vec::new(),
            masks: Vec::new(),
        }
    }

    fn run(mut self, text: &str) -> Result<(Prescription, Vec<MaskSite>), ParseError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut saw_content = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let tokens = tokenize(content);
            let Some(&(col, keyword)) = tokens.first() else {
                continue;
            };
            saw_content = true;
            match keyword.to_ascii_uppercase().as_str() {
                "SPEC" => self.spec_line(line, &tokens)?,
                "SURF" => self.surface_line(line, &tokens)?,
                other => {
                    return Err(syntax(line, col, format!("expected SPEC or SURF, found {other:?}")))
                }
            }
        }
        if !saw_content {
            return Err(syntax(1, 1, "empty document".to_string()));
        }
        Ok((Prescription::new(self.header, self.surfaces), self.masks))
    }

    fn spec_line(&mut self, line: usize, tokens: &[(usize, &str)]) -> Result<(), ParseError> {
        if tokens.len() != 3 {
            let col = tokens.get(3).map_or(end_column(tokens), |t| t.0);
            return Err(syntax(line, col, "expected `SPEC <key> <value>`".to_string()));
        }
        let (kcol, key) = tokens[1];
        let key = key.to_ascii_uppercase();
        let (vcol, vtok) = tokens[2];
        let value = match classify(vtok) {
            Some(Value::Number(v)) if v.is_finite() => v,
            _ => return Err(syntax(line, vcol, format!("expected a finite number, found {vtok:?}"))),
        };
        let slot = match key.as_str() {
            "EFFL" => &mut self.header.effl,
            "FNO" => &mut self.header.fno,
            "FOV" => &mut self.header.fov,
            "TOTR" => &mut self.header.totr,
            _ => return Err(syntax(line, kcol, format!("unknown SPEC key {key:?}"))),
        };
        if slot.is_some() {
            return Err(ParseError::DuplicateSpec { line, key });
        }
        *slot = Some(value);
        Ok(())
    }

    fn surface_line(&mut self, line: usize, tokens: &[(usize, &str)]) -> Result<(), ParseError> {
        if tokens.len() < 5 || tokens.len() > 6 {
            let col = tokens.get(6).map_or(end_column(tokens), |t| t.0);
            return Err(syntax(
                line,
                col,
                "expected `SURF <tag> <radius> <thickness> <material> [semi-diameter]`".to_string(),
            ));
        }
        let index = self.surfaces.len();
        let tag = parse_tag(line, tokens[1])?;
        let radius = self.numeric(line, tokens[2], index, MaskField::Radius)?;
        let thickness = self.numeric(line, tokens[3], index, MaskField::Thickness)?;
        let material = self.material(line, tokens[4], index)?;
        let semi_diameter = match tokens.get(5) {
            Some(&t) => self.numeric(line, t, index, MaskField::SemiDiameter)?,
            None => None,
        };
        if let Some(h) = semi_diameter {
            if h <= 0.0 {
                return Err(syntax(line, tokens[5].0, "semi-diameter must be positive".to_string()));
            }
        }
        self.surfaces.push(Surface {
            tag,
            radius,
            thickness,
            material,
            semi_diameter,
        });
        Ok(())
    }

    fn numeric(
        &mut self,
        line: usize,
        (col, tok): (usize, &str),
        surface: usize,
        field: MaskField,
    ) -> Result<Option<f64>, ParseError> {
        match classify(tok) {
            Some(Value::Number(v)) => Ok(Some(v)),
            Some(Value::Absent) => Ok(None),
            Some(Value::Masked) => {
                self.masks.push(MaskSite { surface, field });
                Ok(None)
            }
            None => Err(syntax(line, col, format!("expected a number, INF, `-` or MASK, found {tok:?}"))),
        }
    }

    fn material(
        &mut self,
        line: usize,
        (col, tok): (usize, &str),
        surface: usize,
    ) -> Result<Option<Material>, ParseError> {
        if tok == "-" {
            return Ok(None);
        }
        if let Some(rest) = tok.strip_prefix("G:").or_else(|| tok.strip_prefix("g:")) {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(syntax(line, col, format!("inline glass must be G:<n_d>:<v_d>, found {tok:?}")));
            }
            let n_col = col + 2;
            let v_col = n_col + parts[0].chars().count() + 1;
            let n_d = self.glass_value(line, (n_col, parts[0]), surface, MaskField::RefractiveIndex)?;
            let v_d = self.glass_value(line, (v_col, parts[1]), surface, MaskField::AbbeNumber)?;
            return Ok(Some(Material {
                kind: MaterialKind::Glass,
                name: None,
                n_d,
                v_d,
            }));
        }
        match self.catalog.lookup(tok) {
            Ok(m) => Ok(Some(m)),
            Err(CatalogError::UnknownMaterial(name)) => Err(ParseError::UnknownMaterial {
                line,
                column: col,
                name,
            }),
            Err(e) => Err(syntax(line, col, e.to_string())),
        }
    }

    fn glass_value(
        &mut self,
        line: usize,
        (col, tok): (usize, &str),
        surface: usize,
        field: MaskField,
    ) -> Result<Option<f64>, ParseError> {
        match classify(tok) {
            Some(Value::Number(v)) if v.is_finite() => Ok(Some(v)),
            Some(Value::Absent) => Ok(None),
            Some(Value::Masked) => {
                self.masks.push(MaskSite { surface, field });
                Ok(None)
            }
            _ => Err(syntax(line, col, format!("expected a finite number or MASK, found {tok:?}"))),
        }
    }
}

fn parse_tag(line: usize, (col, tok): (usize, &str)) -> Result<SurfaceTag, ParseError> {
    match tok.to_ascii_uppercase().as_str() {
        "OBJ" | "OBJECT" => Ok(SurfaceTag::Object),
        "STO" | "STOP" => Ok(SurfaceTag::Stop),
        "IMA" | "IMAGE" => Ok(SurfaceTag::Image),
        other => match other.parse::<u32>() {
            Ok(n) if n > 0 && other.bytes().all(|b| b.is_ascii_digit()) => Ok(SurfaceTag::Standard(n)),
            _ => Err(syntax(
                line,
                col,
                format!("surface tag must be OBJ, STO, IMA or a positive integer, found {tok:?}"),
            )),
        },
    }
}

fn classify(tok: &str) -> Option<Value> {
    match tok.to_ascii_uppercase().as_str() {
        "-" => return Some(Value::Absent),
        "MASK" => return Some(Value::Masked),
        "INF" | "+INF" => return Some(Value::Number(f64::INFINITY)),
        "-INF" => return Some(Value::Number(f64::NEG_INFINITY)),
        _ => {}
    }
    // Rust's float parser also accepts "inf"/"nan" spellings; only decimals pass here.
    if !tok
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Value::Number)
}

/// Splits on whitespace, keeping the 1-based character column of each token.
fn tokenize(content: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in content.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                tokens.push((c + 1, &content[b..byte]));
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        tokens.push((c + 1, &content[b..]));
    }
    tokens
}

fn end_column(tokens: &[(usize, &str)]) -> usize {
    tokens
        .last()
        .map_or(1, |(c, t)| c + t.chars().count())
}

fn syntax(line: usize, column: usize, message: String) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message,
    }
}
