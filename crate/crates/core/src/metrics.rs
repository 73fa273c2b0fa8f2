use serde::Serialize;

use crate::catalog::ShapeId;

const N: usize = ShapeId::ALL.len();

/// Counts of (true shape, predicted shape) over the twelve shapes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[usize; N]; N],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, truth: ShapeId, predicted: ShapeId) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn count(&self, truth: ShapeId, predicted: ShapeId) -> usize {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn trials(&self, truth: ShapeId) -> usize {
        self.counts[truth.index()].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..N).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Rows divided by the true-class count; untested classes stay all zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn per_class_accuracy(&self) -> Vec<(ShapeId, Option<f64>)> {
        ShapeId::ALL
            .iter()
            .map(|&id| {
                let n = self.trials(id);
                (id, (n > 0).then(|| self.count(id, id) as f64 / n as f64))
            })
            .collect()
    }
}

impl Serialize for ConfusionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.row_normalized().serialize(s)
    }
}
