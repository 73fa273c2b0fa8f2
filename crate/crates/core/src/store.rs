//! On-disk persistence. Every document is JSON, written to a temporary file
//! in the target directory and renamed into place.
//!
//! ```text
//! <root>/catalog.json
//! <root>/templates/<owner>.json
//! <root>/models/<owner>.json
//! <root>/users.json
//! <root>/traces/*.jsonl
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auth::{validate_user_id, Enrollment};
use crate::catalog::{Catalog, ShapeId};
use crate::dtree::{feature_index, Node, TreeModel, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::geometry::{NormalizeConfig, NormalizedPath, Point, RawTrace};
use crate::template::{Owner, Provenance, TemplateSet};
use crate::trace_io;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreRoot {
    base: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct TemplatesDoc {
    version: u32,
    owner: Owner,
    provenance: Provenance,
    templates: BTreeMap<ShapeId, Vec<Vec<Point>>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    owner: Owner,
    max_depth: usize,
    sample_count: usize,
    depth: usize,
    root: RawNode,
}

/// Loose node shape so that structural problems surface as invariant
/// violations instead of parse errors.
#[derive(Serialize, Deserialize, Default)]
struct RawNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<Box<RawNode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<Box<RawNode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<ShapeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<BTreeMap<ShapeId, usize>>,
}

impl RawNode {
    fn from_node(node: &Node) -> Self {
        match node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => RawNode {
                feature: Some(FEATURE_NAMES[*feature].to_owned()),
                threshold: Some(*threshold),
                left: Some(Box::new(RawNode::from_node(left))),
                right: Some(Box::new(RawNode::from_node(right))),
                ..Default::default()
            },
            Node::Leaf { label, counts } => RawNode {
                label: Some(*label),
                counts: Some(counts.clone()),
                ..Default::default()
            },
        }
    }

    fn into_node(self) -> Result<Node> {
        match self {
            RawNode {
                feature: Some(f),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                label: None,
                counts: None,
            } => Ok(Node::Split {
                feature: feature_index(&f)
                    .ok_or_else(|| Error::invariant("tree model", format!("unknown feature {f:?}")))?,
                threshold,
                left: Box::new(left.into_node()?),
                right: Box::new(right.into_node()?),
            }),
            RawNode {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                label: Some(label),
                counts,
            } => Ok(Node::Leaf {
                label,
                counts: counts.unwrap_or_default(),
            }),
            RawNode { label: None, feature: None, .. } => {
                Err(Error::invariant("tree model", "leaf without label"))
            }
            _ => Err(Error::invariant(
                "tree model",
                "node must be either {feature, threshold, left, right} or {label, counts}",
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct UsersDoc {
    version: u32,
    users: BTreeMap<String, Enrollment>,
}

fn owner_key(owner: &Owner) -> String {
    match owner {
        Owner::Global => "global".to_owned(),
        Owner::User(u) => format!("user-{u}"),
    }
}

impl StoreRoot {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.base.join("catalog.json")
    }

    pub fn templates_path(&self, owner: &Owner) -> PathBuf {
        self.base.join("templates").join(format!("{}.json", owner_key(owner)))
    }

    pub fn model_path(&self, owner: &Owner) -> PathBuf {
        self.base.join("models").join(format!("{}.json", owner_key(owner)))
    }

    pub fn users_path(&self) -> PathBuf {
        self.base.join("users.json")
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.base.join("traces")
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let dir = path.parent().unwrap_or(&self.base);
        fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::storage(dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::storage(path, e))?;
        tmp.as_file().sync_all().map_err(|e| Error::storage(path, e))?;
        tmp.persist(path).map_err(|e| Error::storage(path, e.error))?;
        Ok(path.to_owned())
    }

    fn write_json(&self, path: &Path, value: &impl Serialize) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::storage(path, e))?;
        bytes.push(b'\n');
        self.write_atomic(path, &bytes)
    }

    fn read(&self, path: &Path, what: &str) -> Result<String> {
        match fs::read_to_string(path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::NotFound(format!("{what} at {}", path.display())))
            }
            Err(e) => Err(Error::storage(path, e)),
        }
    }

    fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
    }

    pub fn save_catalog(&self, catalog: &Catalog) -> Result<PathBuf> {
        self.write_json(&self.catalog_path(), &catalog.to_value())
    }

    pub fn load_catalog(&self) -> Result<Catalog> {
        Catalog::from_json(&self.read(&self.catalog_path(), "catalog")?)
    }

    pub fn save_templates(&self, set: &TemplateSet) -> Result<PathBuf> {
        let doc = TemplatesDoc {
            version: FORMAT_VERSION,
            owner: set.owner().clone(),
            provenance: set.provenance(),
            templates: set
                .templates()
                .iter()
                .map(|(id, paths)| (*id, paths.iter().map(|p| p.points().to_vec()).collect()))
                .collect(),
        };
        self.write_json(&self.templates_path(set.owner()), &doc)
    }

    pub fn load_templates(&self, owner: &Owner) -> Result<TemplateSet> {
        let doc: TemplatesDoc = Self::parse(&self.read(&self.templates_path(owner), "templates")?, "templates")?;
        if doc.owner != *owner {
            return Err(Error::invariant("template set", format!("stored owner is {}", doc.owner)));
        }
        let config = NormalizeConfig::default();
        let templates = doc
            .templates
            .into_iter()
            .map(|(id, paths)| {
                let paths = paths
                    .into_iter()
                    .map(|p| NormalizedPath::from_points(p, &config))
                    .collect::<Result<Vec<_>>>()?;
                Ok((id, paths))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        TemplateSet::new(doc.owner, doc.provenance, templates).map_err(|e| match e {
            Error::MissingShape(ids) => Error::invariant(
                "template set",
                format!("missing shapes {}", ids.iter().map(|i| i.as_str()).collect::<Vec<_>>().join(",")),
            ),
            e => e,
        })
    }

    pub fn try_load_templates(&self, owner: &Owner) -> Result<Option<TemplateSet>> {
        match self.load_templates(owner) {
            Ok(t) => Ok(Some(t)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save_model(&self, owner: &Owner, model: &TreeModel) -> Result<PathBuf> {
        let doc = ModelDoc {
            version: FORMAT_VERSION,
            owner: owner.clone(),
            max_depth: model.max_depth(),
            sample_count: model.sample_count(),
            depth: model.depth(),
            root: RawNode::from_node(model.root()),
        };
        self.write_json(&self.model_path(owner), &doc)
    }

    pub fn load_model(&self, owner: &Owner) -> Result<TreeModel> {
        let doc: ModelDoc = Self::parse(&self.read(&self.model_path(owner), "model")?, "model")?;
        let model = TreeModel::new(doc.root.into_node()?, doc.sample_count, doc.max_depth)?;
        if model.depth() != doc.depth {
            return Err(Error::invariant(
                "tree model",
                format!("recorded depth {} but tree has depth {}", doc.depth, model.depth()),
            ));
        }
        Ok(model)
    }

    pub fn try_load_model(&self, owner: &Owner) -> Result<Option<TreeModel>> {
        match self.load_model(owner) {
            Ok(m) => Ok(Some(m)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save_enrollments(&self, users: &BTreeMap<String, Enrollment>) -> Result<PathBuf> {
        for (key, e) in users {
            if *key != e.user {
                return Err(Error::invariant("enrollment", format!("key {key:?} holds user {:?}", e.user)));
            }
        }
        self.write_json(
            &self.users_path(),
            &UsersDoc {
                version: FORMAT_VERSION,
                users: users.clone(),
            },
        )
    }

    /// All enrollments; an absent users file is an empty store.
    pub fn load_enrollments(&self) -> Result<BTreeMap<String, Enrollment>> {
        let text = match self.read(&self.users_path(), "users") {
            Ok(t) => t,
            Err(Error::NotFound(_)) => return Ok(BTreeMap::new()),
            Err(e) => return Err(e),
        };
        let doc: UsersDoc = Self::parse(&text, "users")?;
        for (key, e) in &doc.users {
            validate_user_id(key).map_err(|_| Error::invariant("enrollment", format!("bad user id {key:?}")))?;
            if *key != e.user {
                return Err(Error::invariant("enrollment", format!("key {key:?} holds user {:?}", e.user)));
            }
        }
        Ok(doc.users)
    }

    pub fn save_enrollment(&self, enrollment: &Enrollment) -> Result<PathBuf> {
        let mut all = self.load_enrollments()?;
        all.insert(enrollment.user.clone(), enrollment.clone());
        self.save_enrollments(&all)
    }

    pub fn load_enrollment(&self, user: &str) -> Result<Enrollment> {
        self.load_enrollments()?
            .remove(user)
            .ok_or_else(|| Error::NotFound(format!("user {user:?}")))
    }

    pub fn save_trace(&self, name: &str, trace: &RawTrace) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(Error::Config(format!("bad trace name {name:?}")));
        }
        let path = self.traces_dir().join(format!("{name}.jsonl"));
        self.write_atomic(&path, trace_io::to_jsonl(trace).as_bytes())
    }
}
