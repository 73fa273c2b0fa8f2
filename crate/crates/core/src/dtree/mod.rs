//! Bounding-box features and decision-tree recognition.

mod cv;
mod dataset;
mod features;
mod tree;

pub use cv::{cross_validate, stratified_folds, CvReport};
pub use dataset::{DatasetSource, LabeledDataset};
pub use features::{
    extract_features, feature_index, path_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES,
};
pub use tree::{classify_tree, train_tree, Node, TreeConfig, TreeModel};

use crate::catalog::Catalog;
use crate::error::Result;

/// One feature vector per shape, from its resampled movement path.
pub fn catalog_dataset(catalog: &Catalog) -> Result<LabeledDataset> {
    let rows = catalog
        .shapes()
        .iter()
        .map(|s| Ok((path_features(&s.motion)?, s.id)))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(rows, DatasetSource::Simulated)
}

/// The default model: trained on the catalog's own feature vectors.
pub fn catalog_model(catalog: &Catalog) -> Result<TreeModel> {
    train_tree(&catalog_dataset(catalog)?, &TreeConfig::default())
}
