use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::catalog::ShapeId;
use crate::dtree::features::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Simulated,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<(FeatureVector, ShapeId)>,
    source: DatasetSource,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    start_x: f64,
    start_y: f64,
    end_x: f64,
    end_y: f64,
    bbox_area: f64,
    diag_len: f64,
    diag_slope: f64,
    label: ShapeId,
}

impl LabeledDataset {
    pub fn new(samples: Vec<(FeatureVector, ShapeId)>, source: DatasetSource) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = samples.iter().position(|(f, _)| !f.is_valid()) {
            return Err(Error::invariant("dataset", format!("row {i} has invalid features")));
        }
        Ok(Self { samples, source })
    }

    pub fn samples(&self) -> &[(FeatureVector, ShapeId)] {
        &self.samples
    }

    pub fn source(&self) -> DatasetSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        LabeledDataset::new(
            indices.iter().map(|&i| self.samples[i]).collect(),
            self.source,
        )
    }

    /// CSV with header `start_x,start_y,end_x,end_y,bbox_area,diag_len,diag_slope,label`.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(format!("dataset: {e}")))?;
        let expected = [
            "start_x",
            "start_y",
            "end_x",
            "end_y",
            "bbox_area",
            "diag_len",
            "diag_slope",
            "label",
        ];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "dataset header must be {}",
                expected.join(",")
            )));
        }
        let samples = rdr
            .deserialize::<CsvRow>()
            .map(|row| {
                let r = row.map_err(|e| Error::Parse(format!("dataset: {e}")))?;
                let fv = FeatureVector::from_array([
                    r.start_x,
                    r.start_y,
                    r.end_x,
                    r.end_y,
                    r.bbox_area,
                    r.diag_len,
                    r.diag_slope,
                ]);
                Ok((fv, r.label))
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, DatasetSource::File)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (fv, label) in &self.samples {
            w.serialize(CsvRow {
                start_x: fv.start_x,
                start_y: fv.start_y,
                end_x: fv.end_x,
                end_y: fv.end_y,
                bbox_area: fv.bbox_area,
                diag_len: fv.diag_len,
                diag_slope: fv.diag_slope,
                label: *label,
            })
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}
