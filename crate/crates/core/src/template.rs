//! Nearest-template recognition by mean point-to-point distance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ShapeId};
use crate::error::{Error, Result};
use crate::geometry::{normalize_trace, NormalizeConfig, NormalizedPath, RawTrace};

/// Default rejection threshold in normalized px.
pub const DEFAULT_TAU: f64 = 75.0;

/// Mean Euclidean distance between index-aligned points of two paths.
pub fn path_distance(candidate: &NormalizedPath, template: &NormalizedPath) -> Result<f64> {
    let (c, t) = (candidate.points(), template.points());
    if c.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: c.len(),
            right: t.len(),
        });
    }
    if c.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = c.iter().zip(t).map(|(a, b)| a.distance(*b)).sum();
    Ok(sum / c.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    Global,
    User(String),
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Global => f.write_str("global"),
            Owner::User(u) => write!(f, "user:{u}"),
        }
    }
}

impl std::str::FromStr for Owner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Owner::Global),
            _ => match s.strip_prefix("user:") {
                Some(u) if !u.is_empty() => Ok(Owner::User(u.to_owned())),
                _ => Err(Error::Parse(format!("bad owner {s:?}"))),
            },
        }
    }
}

impl Serialize for Owner {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Owner {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DefaultCatalog,
    UserTrained,
}

/// Templates for all twelve shapes, at least one each.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    owner: Owner,
    provenance: Provenance,
    templates: BTreeMap<ShapeId, Vec<NormalizedPath>>,
}

impl TemplateSet {
    pub fn new(
        owner: Owner,
        provenance: Provenance,
        templates: BTreeMap<ShapeId, Vec<NormalizedPath>>,
    ) -> Result<Self> {
        let missing: Vec<ShapeId> = ShapeId::ALL
            .iter()
            .copied()
            .filter(|id| templates.get(id).is_none_or(|v| v.is_empty()))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingShape(missing));
        }
        let len = templates.values().flatten().map(NormalizedPath::len).next();
        if templates.values().flatten().any(|p| Some(p.len()) != len) {
            return Err(Error::invariant("template set", "paths differ in point count"));
        }
        Ok(Self {
            owner,
            provenance,
            templates,
        })
    }

    /// One template per shape: its normalized movement path.
    pub fn from_catalog(catalog: &Catalog, config: &NormalizeConfig) -> Result<Self> {
        let templates = catalog
            .shapes()
            .iter()
            .map(|s| Ok((s.id, vec![s.template(config)?])))
            .collect::<Result<_>>()?;
        TemplateSet::new(Owner::Global, Provenance::DefaultCatalog, templates)
    }

    pub fn owner(&self) -> &Owner {
        &self.owner
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn templates(&self) -> &BTreeMap<ShapeId, Vec<NormalizedPath>> {
        &self.templates
    }

    pub fn for_shape(&self, id: ShapeId) -> &[NormalizedPath] {
        &self.templates[&id]
    }

    pub fn len(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A new set holding this set's templates followed by `other`'s.
    pub fn appended(&self, other: &TemplateSet) -> TemplateSet {
        let mut templates = self.templates.clone();
        for (id, paths) in &other.templates {
            templates.entry(*id).or_default().extend(paths.iter().cloned());
        }
        TemplateSet {
            owner: other.owner.clone(),
            provenance: other.provenance,
            templates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum TemplateMatch {
    Matched { shape: ShapeId, distance: f64 },
    /// No template within the threshold; `nearest` is the best distance seen.
    Rejected { nearest: ShapeId, distance: f64 },
}

impl TemplateMatch {
    pub fn shape(&self) -> Option<ShapeId> {
        match *self {
            TemplateMatch::Matched { shape, .. } => Some(shape),
            TemplateMatch::Rejected { .. } => None,
        }
    }

    pub fn distance(&self) -> f64 {
        match *self {
            TemplateMatch::Matched { distance, .. } | TemplateMatch::Rejected { distance, .. } => {
                distance
            }
        }
    }

    /// The closest shape whether or not it passed the threshold.
    pub fn nearest(&self) -> ShapeId {
        match *self {
            TemplateMatch::Matched { shape, .. } => shape,
            TemplateMatch::Rejected { nearest, .. } => nearest,
        }
    }
}

/// Assigns the shape owning the globally nearest template. Ties go to the
/// earlier shape id; minima above `tau` are rejected.
pub fn classify_template(
    candidate: &NormalizedPath,
    set: &TemplateSet,
    tau: f64,
) -> Result<TemplateMatch> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("rejection threshold must be > 0, got {tau}")));
    }
    let mut best: Option<(ShapeId, f64)> = None;
    for (&id, paths) in &set.templates {
        for t in paths {
            let d = path_distance(candidate, t)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id, d));
            }
        }
    }
    let (shape, distance) = best.expect("template sets are never empty");
    Ok(if distance > tau {
        TemplateMatch::Rejected {
            nearest: shape,
            distance,
        }
    } else {
        TemplateMatch::Matched { shape, distance }
    })
}

/// Normalizes captured traces into a user-owned template set.
pub fn train_templates(
    traces: &BTreeMap<ShapeId, Vec<RawTrace>>,
    owner: &str,
    config: &NormalizeConfig,
) -> Result<TemplateSet> {
    let missing: Vec<ShapeId> = ShapeId::ALL
        .iter()
        .copied()
        .filter(|id| traces.get(id).is_none_or(|v| v.is_empty()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingShape(missing));
    }
    let mut templates = BTreeMap::new();
    for (&shape, list) in traces {
        let paths = list
            .iter()
            .map(|t| {
                normalize_trace(t, config).map_err(|e| Error::TrainingTrace {
                    shape,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        templates.insert(shape, paths);
    }
    TemplateSet::new(
        Owner::User(owner.to_owned()),
        Provenance::UserTrained,
        templates,
    )
}
