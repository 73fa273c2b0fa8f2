//! Path geometry: resampling, fitting to a square, and centering.
//!
//! Recognition never looks at timestamps. A [`RawTrace`] is reduced to its
//! ordered points, and [`normalize_path`] maps any non-degenerate polyline
//! to a [`NormalizedPath`] of exactly `points` vertices whose bounding box is
//! `square × square` and whose centroid is the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per normalized path.
pub const NUM_POINTS: usize = 64;
/// Side of the square that normalized paths are fitted to, in px.
pub const SQUARE_SIZE: f64 = 300.0;
/// Bounding boxes thinner than this in either axis are not scaled.
pub const MIN_DIMENSION: f64 = 1.0;
/// Raw traces with fewer samples are rejected before normalization.
pub const MIN_TRACE_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// One gaze (or pointer) sample; `t` is milliseconds since frame start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSample {
    pub t: f64,
    pub p: Point,
}

impl TimedSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self {
            t,
            p: Point::new(x, y),
        }
    }
}

/// Samples captured during one frame, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    samples: Vec<TimedSample>,
}

impl RawTrace {
    pub fn new(samples: Vec<TimedSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidTrace(format!(
                "{} samples, at least 2 required",
                samples.len()
            )));
        }
        let mut prev = 0.0;
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || s.t < 0.0 || !s.p.is_finite() {
                return Err(Error::InvalidTrace(format!("sample {i} is not finite")));
            }
            if s.t < prev {
                return Err(Error::InvalidTrace(format!(
                    "timestamp of sample {i} goes backwards"
                )));
            }
            prev = s.t;
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TimedSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Drops timestamps, keeping the points in order.
    pub fn to_path(&self) -> PolyPath {
        PolyPath {
            points: self.samples.iter().map(|s| s.p).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn of(points: &[Point]) -> Self {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// An ordered polyline of at least two finite points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct PolyPath {
    points: Vec<Point>,
}

impl PolyPath {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegeneratePath("fewer than 2 points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegeneratePath("non-finite coordinate"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.points)
    }

    pub fn centroid(&self) -> Point {
        centroid(&self.points)
    }

    /// Cumulative arc length at each vertex; starts at 0.
    pub(crate) fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += w[0].distance(w[1]);
            out.push(acc);
        }
        out
    }

    /// Point at arc-length distance `s` from the start, clamped to the path.
    pub fn point_at_length(&self, s: f64) -> Point {
        let cum = self.cumulative_lengths();
        point_at(&self.points, &cum, s)
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

impl TryFrom<Vec<Point>> for PolyPath {
    type Error = Error;

    fn try_from(points: Vec<Point>) -> Result<Self> {
        PolyPath::new(points)
    }
}

impl From<PolyPath> for Vec<Point> {
    fn from(p: PolyPath) -> Self {
        p.points
    }
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

fn point_at(points: &[Point], cum: &[f64], s: f64) -> Point {
    let total = cum[cum.len() - 1];
    if s <= 0.0 {
        return points[0];
    }
    if s >= total {
        return points[points.len() - 1];
    }
    // first segment whose end reaches s
    let j = cum.partition_point(|&c| c < s).max(1) - 1;
    let seg = cum[j + 1] - cum[j];
    if seg <= 0.0 {
        return points[j + 1];
    }
    points[j].lerp(points[j + 1], (s - cum[j]) / seg)
}

/// Resamples `path` to `n` points spaced equally along its arc length.
///
/// The first and last input points are kept exactly; interior points are
/// linearly interpolated on the segment that contains their arc position.
pub fn resample(path: &PolyPath, n: usize) -> Result<PolyPath> {
    if n < 2 {
        return Err(Error::Config(format!("cannot resample to {n} points")));
    }
    let cum = path.cumulative_lengths();
    let total = cum[cum.len() - 1];
    if total <= 0.0 {
        return Err(Error::DegeneratePath("zero arc length"));
    }
    let step = total / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(path.first());
    let mut j = 0;
    for i in 1..n - 1 {
        let target = step * i as f64;
        while j + 2 < cum.len() && cum[j + 1] < target {
            j += 1;
        }
        let seg = cum[j + 1] - cum[j];
        let p = if seg > 0.0 {
            path.points[j].lerp(path.points[j + 1], (target - cum[j]) / seg)
        } else {
            path.points[j + 1]
        };
        out.push(p);
    }
    out.push(path.last());
    Ok(PolyPath { points: out })
}

/// Scales each axis independently (about the origin) so the bounding box
/// becomes `size × size`.
pub fn scale_to_square(path: &PolyPath, size: f64, min_dimension: f64) -> Result<PolyPath> {
    let bb = path.bbox();
    let (w, h) = (bb.width(), bb.height());
    if w < min_dimension || h < min_dimension {
        return Err(Error::DegenerateBBox {
            width: w,
            height: h,
            min: min_dimension,
        });
    }
    let (sx, sy) = (size / w, size / h);
    Ok(PolyPath {
        points: path
            .points
            .iter()
            .map(|p| Point::new(p.x * sx, p.y * sy))
            .collect(),
    })
}

/// Shifts the path so its centroid (mean of its points) is the origin.
pub fn translate_to_origin(path: &PolyPath) -> PolyPath {
    let c = path.centroid();
    PolyPath {
        points: path
            .points
            .iter()
            .map(|p| Point::new(p.x - c.x, p.y - c.y))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeConfig {
    pub points: usize,
    pub square: f64,
    pub min_dimension: f64,
    pub min_samples: usize,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            points: NUM_POINTS,
            square: SQUARE_SIZE,
            min_dimension: MIN_DIMENSION,
            min_samples: MIN_TRACE_SAMPLES,
        }
    }
}

/// A path ready for template comparison: fixed point count, fitted to the
/// square, centroid at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<Point>")]
pub struct NormalizedPath {
    points: Vec<Point>,
}

const NORMALIZED_TOLERANCE: f64 = 1e-6;

impl NormalizedPath {
    /// Re-validates stored points, e.g. after loading a template document.
    pub fn from_points(points: Vec<Point>, config: &NormalizeConfig) -> Result<Self> {
        if points.len() != config.points {
            return Err(Error::invariant(
                "normalized path",
                format!("{} points, expected {}", points.len(), config.points),
            ));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invariant("normalized path", "non-finite point"));
        }
        let bb = BBox::of(&points);
        if (bb.width() - config.square).abs() > NORMALIZED_TOLERANCE
            || (bb.height() - config.square).abs() > NORMALIZED_TOLERANCE
        {
            return Err(Error::invariant(
                "normalized path",
                format!(
                    "bounding box {}x{}, expected {}",
                    bb.width(),
                    bb.height(),
                    config.square
                ),
            ));
        }
        let c = centroid(&points);
        if c.x.abs() > NORMALIZED_TOLERANCE || c.y.abs() > NORMALIZED_TOLERANCE {
            return Err(Error::invariant(
                "normalized path",
                format!("centroid ({}, {}) is not the origin", c.x, c.y),
            ));
        }
        Ok(Self { points })
    }

    /// Wraps points without checking the bounding-box and centroid rules.
    /// Intended for synthetic candidates in tests and benchmarks.
    pub fn from_points_unchecked(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<NormalizedPath> for Vec<Point> {
    fn from(p: NormalizedPath) -> Self {
        p.points
    }
}

/// Sampling, scaling and translation.
///
/// The source is fitted to the square once before resampling, so equal
/// spacing is measured in the fitted frame and the result does not depend
/// on the source's position or per-axis scale. The resampled points are
/// fitted again (resampling can cut the extreme corners) and centered.
pub fn normalize_path(path: &PolyPath, config: &NormalizeConfig) -> Result<NormalizedPath> {
    if path.arc_length() <= 0.0 {
        return Err(Error::DegeneratePath("zero arc length"));
    }
    let fitted = scale_to_square(path, config.square, config.min_dimension)?;
    let sampled = resample(&fitted, config.points)?;
    let scaled = scale_to_square(&sampled, config.square, config.min_dimension)?;
    Ok(NormalizedPath {
        points: translate_to_origin(&scaled).points,
    })
}

/// [`normalize_path`] for a captured trace, after the minimum-sample check.
pub fn normalize_trace(trace: &RawTrace, config: &NormalizeConfig) -> Result<NormalizedPath> {
    if trace.len() < config.min_samples {
        return Err(Error::InsufficientSamples {
            got: trace.len(),
            min: config.min_samples,
        });
    }
    normalize_path(&trace.to_path(), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(pts: &[(f64, f64)]) -> PolyPath {
        PolyPath::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn resample_straight_segment() {
        let r = resample(&path(&[(0.0, 0.0), (630.0, 0.0)]), 64).unwrap();
        assert_eq!(r.len(), 64);
        for (i, p) in r.points().iter().enumerate() {
            assert!((p.x - 10.0 * i as f64).abs() < 1e-9, "{i}: {p:?}");
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn resample_is_idempotent_on_equispaced_input() {
        let pts: Vec<(f64, f64)> = (0..64).map(|i| (i as f64 * 3.0, 7.0)).collect();
        let r = resample(&path(&pts), 64).unwrap();
        for (p, &(x, y)) in r.points().iter().zip(&pts) {
            assert!((p.x - x).abs() < 1e-6 && (p.y - y).abs() < 1e-6);
        }
    }

    #[test]
    fn resample_right_angle_matches_dense_walk() {
        // oracle: walk the polyline in 10,000 equal steps and pick the step
        // nearest to each target arc position
        let src = path(&[(0.0, 0.0), (300.0, 0.0), (300.0, 300.0)]);
        let r = resample(&src, 64).unwrap();
        let steps = 10_000;
        let dense: Vec<Point> = (0..=steps)
            .map(|k| {
                let s = 600.0 * k as f64 / steps as f64;
                if s <= 300.0 {
                    Point::new(s, 0.0)
                } else {
                    Point::new(300.0, s - 300.0)
                }
            })
            .collect();
        for (i, p) in r.points().iter().enumerate() {
            let target = i as f64 * 600.0 / 63.0;
            let k = (target / 600.0 * steps as f64).round() as usize;
            assert!(p.distance(dense[k]) <= 600.0 / steps as f64, "{i}");
            // and the arc position itself
            let arc = if p.y == 0.0 { p.x } else { 300.0 + p.y };
            assert!((arc - target).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_rejects_coincident_points() {
        let err = resample(&path(&[(5.0, 5.0), (5.0, 5.0), (5.0, 5.0)]), 64).unwrap_err();
        assert!(matches!(err, Error::DegeneratePath(_)));
    }

    #[test]
    fn resample_skips_zero_length_segments() {
        let r = resample(&path(&[(0.0, 0.0), (0.0, 0.0), (10.0, 0.0), (10.0, 0.0)]), 11).unwrap();
        for (i, p) in r.points().iter().enumerate() {
            assert!((p.x - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_per_axis() {
        let s = scale_to_square(&path(&[(0.0, 0.0), (100.0, 50.0)]), 300.0, 1.0).unwrap();
        assert_eq!(s.points()[1], Point::new(300.0, 300.0));
        let bb = s.bbox();
        assert_eq!((bb.min_x, bb.min_y, bb.max_x, bb.max_y), (0.0, 0.0, 300.0, 300.0));
    }

    #[test]
    fn scale_identity_and_square() {
        let p = path(&[(10.0, 20.0), (310.0, 20.0), (310.0, 320.0)]);
        let s = scale_to_square(&p, 300.0, 1.0).unwrap();
        for (a, b) in s.points().iter().zip(p.points()) {
            assert!(a.distance(*b) < 1e-6);
        }
        let unit = path(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
        let s = scale_to_square(&unit, 300.0, 1.0).unwrap();
        assert_eq!(s.points()[2], Point::new(300.0, 300.0));
    }

    #[test]
    fn scale_rejects_thin_paths() {
        let err = scale_to_square(&path(&[(0.0, 0.0), (100.0, 0.5)]), 300.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateBBox { .. }));
    }

    #[test]
    fn translate_examples() {
        let t = translate_to_origin(&path(&[(0.0, 0.0), (300.0, 0.0), (150.0, 300.0)]));
        assert_eq!(
            t.points(),
            &[
                Point::new(-150.0, -100.0),
                Point::new(150.0, -100.0),
                Point::new(0.0, 200.0)
            ]
        );
        assert_eq!(translate_to_origin(&t), t);
    }

    #[test]
    fn normalize_rejects_short_traces() {
        let samples: Vec<_> = (0..31)
            .map(|i| TimedSample::new(i as f64 * 33.0, i as f64 * 10.0, (i % 5) as f64 * 20.0))
            .collect();
        let trace = RawTrace::new(samples).unwrap();
        let err = normalize_trace(&trace, &NormalizeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { got: 31, min: 32 }));
    }

    #[test]
    fn normalize_matches_stage_composition_for_fitted_input() {
        // a source already fitted to the square: the pre-fit is the identity
        let p = path(&[(0.0, 0.0), (300.0, 0.0), (0.0, 150.0), (300.0, 300.0)]);
        let n = normalize_path(&p, &NormalizeConfig::default()).unwrap();
        let staged = translate_to_origin(
            &scale_to_square(&resample(&p, 64).unwrap(), 300.0, 1.0).unwrap(),
        );
        for (a, b) in n.points().iter().zip(staged.points()) {
            assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn raw_trace_validation() {
        assert!(RawTrace::new(vec![TimedSample::new(0.0, 0.0, 0.0)]).is_err());
        assert!(RawTrace::new(vec![
            TimedSample::new(5.0, 0.0, 0.0),
            TimedSample::new(4.0, 1.0, 0.0)
        ])
        .is_err());
        assert!(RawTrace::new(vec![
            TimedSample::new(0.0, 0.0, 0.0),
            TimedSample::new(0.0, f64::NAN, 0.0)
        ])
        .is_err());
    }

    #[test]
    fn point_at_length_walks_segments() {
        let p = path(&[(0.0, 0.0), (100.0, 0.0), (100.0, 300.0)]);
        assert_eq!(p.point_at_length(100.0), Point::new(100.0, 0.0));
        assert_eq!(p.point_at_length(250.0), Point::new(100.0, 150.0));
        assert_eq!(p.point_at_length(1e9), Point::new(100.0, 300.0));
    }
}
