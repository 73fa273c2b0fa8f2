use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{resample, BBox, Point, PolyPath, NUM_POINTS};

pub const FEATURE_COUNT: usize = 7;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "start_x",
    "start_y",
    "end_x",
    "end_y",
    "bbox_area",
    "diag_len",
    "diag_slope",
];

/// Start point, end point and bounding-box shape of a path in canvas px.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub start_x: f64,
    pub start_y: f64,
    pub end_x: f64,
    pub end_y: f64,
    pub bbox_area: f64,
    pub diag_len: f64,
    pub diag_slope: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.start_x,
            self.start_y,
            self.end_x,
            self.end_y,
            self.bbox_area,
            self.diag_len,
            self.diag_slope,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            start_x: v[0],
            start_y: v[1],
            end_x: v[2],
            end_y: v[3],
            bbox_area: v[4],
            diag_len: v[5],
            diag_slope: v[6],
        }
    }

    pub fn get(&self, feature: usize) -> f64 {
        self.to_array()[feature]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.bbox_area >= 0.0
            && self.diag_len >= 0.0
            && self.diag_slope >= 0.0
    }
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

/// Features of a point sequence as given; callers resample first.
///
/// Slope is height over width with the width clamped to at least 1 px.
pub fn extract_features(points: &[Point]) -> Result<FeatureVector> {
    if points.len() < 2 {
        return Err(Error::DegeneratePath("fewer than 2 points"));
    }
    let bb = BBox::of(points);
    let (w, h) = (bb.width(), bb.height());
    let (start, end) = (points[0], points[points.len() - 1]);
    Ok(FeatureVector {
        start_x: start.x,
        start_y: start.y,
        end_x: end.x,
        end_y: end.y,
        bbox_area: w * h,
        diag_len: w.hypot(h),
        diag_slope: h / w.max(1.0),
    })
}

/// Resamples to the standard 64 points in canvas coordinates, then extracts.
pub fn path_features(path: &PolyPath) -> Result<FeatureVector> {
    extract_features(resample(path, NUM_POINTS)?.points())
}
