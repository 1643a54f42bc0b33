//! Parametric fonts: JSON files that restyle the built-in glyph skeletons.

use crate::error::RenderError;
use crate::synth::glyphs;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Style parameters applied to the glyph skeletons. `thickness` scales the
/// base stroke width, `slant` shears x by y relative to the baseline,
/// `width` scales glyph width around its center, `serif` adds horizontal
/// caps to near-vertical stroke ends. `omit` lists deliberately missing
/// glyphs (used to exercise coverage errors).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FontSpec {
    pub name: String,
    #[serde(default = "default_thickness")]
    pub thickness: f32,
    #[serde(default)]
    pub slant: f32,
    #[serde(default = "default_width")]
    pub width: f32,
    #[serde(default)]
    pub serif: bool,
    #[serde(default)]
    pub omit: String,
}

fn default_thickness() -> f32 {
    1.0
}
fn default_width() -> f32 {
    1.0
}

impl FontSpec {
    pub fn covers(&self, c: char) -> bool {
        glyphs::strokes(c).is_some() && !self.omit.contains(c)
    }

    /// Skeleton strokes of `c` with this font's slant/width applied, still in
    /// design units.
    pub fn styled_strokes(&self, c: char) -> Option<Vec<Vec<(f32, f32)>>> {
        if !self.covers(c) {
            return None;
        }
        let skel = glyphs::strokes(c)?;
        let cx = glyphs::GRID_W * 0.5;
        let mut out: Vec<Vec<(f32, f32)>> = skel
            .iter()
            .map(|stroke| {
                stroke
                    .iter()
                    .map(|&(x, y)| {
                        let xw = cx + (x - cx) * self.width;
                        let xs = xw - self.slant * (y - glyphs::BASELINE);
                        (xs, y)
                    })
                    .collect()
            })
            .collect();
        if self.serif {
            let mut extra = Vec::new();
            for stroke in &out {
                let first = stroke[0];
                let last = stroke[stroke.len() - 1];
                if first == last {
                    continue; // closed loop, no open ends
                }
                for ((px, py), (ox, oy)) in [(first, stroke[1]), (last, stroke[stroke.len() - 2])]
                {
                    let dx = (ox - px).abs();
                    let dy = (oy - py).abs();
                    if dy > dx * 1.5 {
                        extra.push(vec![(px - 0.7, py), (px + 0.7, py)]);
                    }
                }
            }
            out.extend(extra);
        }
        Some(out)
    }

    /// Stroke radius in design units.
    pub fn stroke_radius(&self) -> f32 {
        0.55 * self.thickness
    }
}

pub struct LoadedFont {
    pub id: u32,
    pub spec: FontSpec,
    pub path: PathBuf,
}

/// Ordered font collection loaded from a registry file mapping
/// font id -> font file path (relative to the registry).
pub struct FontRegistry {
    fonts: Vec<LoadedFont>,
}

impl FontRegistry {
    pub fn load(registry_path: &Path) -> Result<Self, RenderError> {
        let text = std::fs::read_to_string(registry_path)?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text)?;
        let base = registry_path.parent().unwrap_or(Path::new("."));
        let mut fonts = Vec::new();
        for (id_str, rel) in map {
            let id: u32 = id_str.parse().map_err(|_| RenderError::InvalidStyle {
                field: "font_id",
                value: -1.0,
            })?;
            let path = base.join(&rel);
            let spec: FontSpec = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            fonts.push(LoadedFont { id, spec, path });
        }
        fonts.sort_by_key(|f| f.id);
        Ok(Self { fonts })
    }

    pub fn len(&self) -> usize {
        self.fonts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fonts.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.fonts.iter().map(|f| f.id).collect()
    }

    pub fn get(&self, id: u32) -> Result<&FontSpec, RenderError> {
        self.fonts
            .iter()
            .find(|f| f.id == id)
            .map(|f| &f.spec)
            .ok_or(RenderError::UnknownFont(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slant_and_width_transform_points() {
        let spec = FontSpec {
            name: "t".into(),
            thickness: 1.0,
            slant: 0.2,
            width: 0.5,
            serif: false,
            omit: String::new(),
        };
        let plain = FontSpec {
            name: "p".into(),
            thickness: 1.0,
            slant: 0.0,
            width: 1.0,
            serif: false,
            omit: String::new(),
        };
        let a = spec.styled_strokes('l').unwrap();
        let b = plain.styled_strokes('l').unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn omit_removes_coverage() {
        let spec = FontSpec {
            name: "t".into(),
            thickness: 1.0,
            slant: 0.0,
            width: 1.0,
            serif: false,
            omit: "Qx".into(),
        };
        assert!(!spec.covers('Q'));
        assert!(!spec.covers('x'));
        assert!(spec.covers('a'));
    }
}
