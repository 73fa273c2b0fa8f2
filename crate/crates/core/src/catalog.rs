//! The twelve moving shapes, their movement paths, and the frame plan.
//!
//! A catalog is data: the shipped one lives in `assets/catalog.json` and is
//! compiled in, but any document with the same schema can replace it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_path, NormalizeConfig, NormalizedPath, Point, PolyPath};
use crate::template::path_distance;

/// Motion bounding boxes smaller than this in either axis are rejected.
pub const MIN_MOTION_EXTENT: f64 = 50.0;
/// Default minimum pairwise template distance for [`validate_catalog`].
pub const DEFAULT_SEPARATION: f64 = 40.0;
pub const FRAME_COUNT: usize = 3;

const SHIPPED_CATALOG: &str = include_str!("../assets/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
}

impl ShapeId {
    pub const ALL: [ShapeId; 12] = [
        ShapeId::A,
        ShapeId::B,
        ShapeId::C,
        ShapeId::D,
        ShapeId::E,
        ShapeId::F,
        ShapeId::G,
        ShapeId::H,
        ShapeId::I,
        ShapeId::J,
        ShapeId::K,
        ShapeId::L,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ShapeId> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"][self.index()]
    }

    pub fn display_name(self) -> &'static str {
        [
            "Circle",
            "Open Hexagon",
            "Triangle",
            "Pie",
            "Rectangle",
            "Eye",
            "Open Rectangle",
            "Ring",
            "Star",
            "Open Pentagon",
            "Pentagon",
            "Hexagon",
        ][self.index()]
    }
}

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ShapeId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown shape id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePlan {
    pub frame_count: usize,
    pub frame_duration_ms: f64,
    pub canvas: Canvas,
}

impl Default for FramePlan {
    fn default() -> Self {
        Self {
            frame_count: FRAME_COUNT,
            frame_duration_ms: 4000.0,
            canvas: Canvas { w: 1280, h: 720 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub id: ShapeId,
    pub name: String,
    pub color: [u8; 3],
    /// Outline in local coordinates; rendering only.
    pub glyph: Vec<Point>,
    pub start: Point,
    /// Movement waypoints in canvas coordinates, beginning at `start`.
    pub motion: PolyPath,
}

impl ShapeSpec {
    /// Position after the fraction `u` of the frame, moving at constant speed.
    pub fn position_at(&self, u: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Range(u));
        }
        Ok(self.motion.point_at_length(u * self.motion.arc_length()))
    }

    pub fn template(&self, config: &NormalizeConfig) -> Result<NormalizedPath> {
        normalize_path(&self.motion, config)
    }

    fn check(&self, canvas: Canvas) -> Result<()> {
        let subject = format!("shape {}", self.id);
        if self.motion.arc_length() <= 0.0 {
            return Err(Error::invariant(subject, "motion has zero length"));
        }
        if self.motion.first().distance(self.start) > 1e-9 {
            return Err(Error::invariant(subject, "motion does not begin at start"));
        }
        let bb = self.motion.bbox();
        if bb.min_x < 0.0
            || bb.min_y < 0.0
            || bb.max_x > canvas.w as f64
            || bb.max_y > canvas.h as f64
        {
            return Err(Error::invariant(subject, "motion leaves the canvas"));
        }
        if bb.width() < MIN_MOTION_EXTENT || bb.height() < MIN_MOTION_EXTENT {
            return Err(Error::invariant(
                subject,
                format!(
                    "motion bounding box {:.1}x{:.1} below the {MIN_MOTION_EXTENT} px minimum",
                    bb.width(),
                    bb.height()
                ),
            ));
        }
        if self.glyph.len() < 2 {
            return Err(Error::invariant(subject, "glyph needs at least 2 points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    version: String,
    plan: FramePlan,
    shapes: Vec<ShapeSpec>,
}

#[derive(Serialize, Deserialize)]
struct CatalogDoc {
    version: String,
    canvas: Canvas,
    frame_duration_ms: f64,
    shapes: Vec<ShapeSpec>,
}

impl Catalog {
    /// Builds a catalog, sorting shapes by id and checking every rule.
    pub fn new(version: impl Into<String>, plan: FramePlan, mut shapes: Vec<ShapeSpec>) -> Result<Self> {
        if plan.frame_count != FRAME_COUNT {
            return Err(Error::invariant("frame plan", "frame_count must be 3"));
        }
        if !(plan.frame_duration_ms.is_finite() && plan.frame_duration_ms > 0.0) {
            return Err(Error::invariant("frame plan", "frame_duration_ms must be > 0"));
        }
        if shapes.len() != ShapeId::ALL.len() {
            return Err(Error::invariant(
                "catalog",
                format!("{} shapes, expected 12", shapes.len()),
            ));
        }
        shapes.sort_by_key(|s| s.id);
        for (expected, shape) in ShapeId::ALL.iter().zip(&shapes) {
            if shape.id != *expected {
                return Err(Error::invariant(
                    "catalog",
                    format!("shape {expected} missing or duplicated"),
                ));
            }
            shape.check(plan.canvas)?;
        }
        Ok(Self {
            version: version.into(),
            plan,
            shapes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CatalogDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("catalog: {e}")))?;
        let plan = FramePlan {
            frame_count: FRAME_COUNT,
            frame_duration_ms: doc.frame_duration_ms,
            canvas: doc.canvas,
        };
        Catalog::new(doc.version, plan, doc.shapes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("catalog serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("catalog serializes")
    }

    fn to_doc(&self) -> CatalogDoc {
        CatalogDoc {
            version: self.version.clone(),
            canvas: self.plan.canvas,
            frame_duration_ms: self.plan.frame_duration_ms,
            shapes: self.shapes.clone(),
        }
    }

    /// The catalog compiled into the crate.
    pub fn shipped() -> Self {
        Catalog::from_json(SHIPPED_CATALOG).expect("shipped catalog is valid")
    }

    pub fn shipped_json() -> &'static str {
        SHIPPED_CATALOG
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn shapes(&self) -> &[ShapeSpec] {
        &self.shapes
    }

    pub fn shape(&self, id: ShapeId) -> &ShapeSpec {
        &self.shapes[id.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistance {
    pub a: ShapeId,
    pub b: ShapeId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub threshold: f64,
    pub min_pair: PairDistance,
    pub below_threshold: Vec<PairDistance>,
    pub passed: bool,
}

/// Pairwise template distance between every two shapes of the catalog.
pub fn validate_catalog(
    catalog: &Catalog,
    threshold: f64,
    config: &NormalizeConfig,
) -> Result<SeparationReport> {
    let templates = catalog
        .shapes()
        .iter()
        .map(|s| s.template(config))
        .collect::<Result<Vec<_>>>()?;
    let mut min_pair: Option<PairDistance> = None;
    let mut below = Vec::new();
    for i in 0..templates.len() {
        for j in i + 1..templates.len() {
            let pair = PairDistance {
                a: ShapeId::ALL[i],
                b: ShapeId::ALL[j],
                distance: path_distance(&templates[i], &templates[j])?,
            };
            if pair.distance < threshold {
                below.push(pair.clone());
            }
            if min_pair.as_ref().is_none_or(|m| pair.distance < m.distance) {
                min_pair = Some(pair);
            }
        }
    }
    Ok(SeparationReport {
        threshold,
        min_pair: min_pair.expect("12 shapes give 66 pairs"),
        passed: below.is_empty(),
        below_threshold: below,
    })
}
