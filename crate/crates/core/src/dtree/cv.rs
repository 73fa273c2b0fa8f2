//! Seeded, stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::ShapeId;
use crate::dtree::dataset::LabeledDataset;
use crate::dtree::tree::{classify_tree, train_tree, TreeConfig};
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Assigns each sample a fold in `0..k`.
///
/// Each class is shuffled on its own, then the classes are dealt round-robin
/// across folds in shape order, so per-fold class counts differ by at most
/// one and fold sizes differ by at most one.
pub fn stratified_folds(data: &LabeledDataset, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; data.len()];
    let mut next = 0;
    for id in ShapeId::ALL {
        let mut members: Vec<usize> = data
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| *l == id)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

pub fn cross_validate(
    data: &LabeledDataset,
    k: usize,
    seed: u64,
    config: &TreeConfig,
) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if data.len() < k {
        return Err(Error::TooFewSamples {
            samples: data.len(),
            folds: k,
        });
    }
    let fold_of = stratified_folds(data, k, seed);
    let mut confusion = ConfusionMatrix::new();
    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| fold_of[i] == fold);
        let model = train_tree(&data.subset(&train)?, config)?;
        for i in test {
            let (fv, truth) = data.samples()[i];
            confusion.record(truth, classify_tree(&model, &fv));
        }
    }
    Ok(CvReport {
        folds: k,
        seed,
        accuracy: confusion.accuracy(),
        confusion,
    })
}
