//! Self-describing model files.
//!
//! Layout: a magic line, one line of JSON header (task, dimension, labels,
//! templates, feature strings, training configuration), then the mean, the
//! covariance diagonal when present, and the averaged mean as little-endian
//! `f64` arrays of `dimension` entries each.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ChainFeaturizer, ChainTemplates, FeatureIndex, TreeFeaturizer, TreeTemplates};
use crate::error::{Error, Result};
use crate::learn::TrainConfig;
use crate::model::LinearModel;

pub const MAGIC: &str = "structconf-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Chain,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub version: u32,
    pub task: Task,
    pub dimension: usize,
    pub update_count: usize,
    pub has_sigma: bool,
    /// Chain label names in id order; empty for trees.
    pub labels: Vec<String>,
    pub chain_templates: Option<ChainTemplates>,
    pub tree_templates: Option<TreeTemplates>,
    pub train: TrainConfig,
    /// Interned feature strings in id order.
    pub features: Vec<String>,
}

/// A trained model with everything needed to featurize new sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub header: ModelHeader,
    pub model: LinearModel,
}

impl StoredModel {
    pub fn chain(featurizer: &ChainFeaturizer, model: LinearModel, train: TrainConfig) -> Self {
        Self {
            header: ModelHeader {
                version: FORMAT_VERSION,
                task: Task::Chain,
                dimension: model.dimension(),
                update_count: model.update_count,
                has_sigma: model.sigma_diag.is_some(),
                labels: featurizer.labels().map(str::to_owned).collect(),
                chain_templates: Some(*featurizer.templates()),
                tree_templates: None,
                train,
                features: featurizer.index().names().map(str::to_owned).collect(),
            },
            model,
        }
    }

    pub fn tree(featurizer: &TreeFeaturizer, model: LinearModel, train: TrainConfig) -> Self {
        Self {
            header: ModelHeader {
                version: FORMAT_VERSION,
                task: Task::Tree,
                dimension: model.dimension(),
                update_count: model.update_count,
                has_sigma: model.sigma_diag.is_some(),
                labels: Vec::new(),
                chain_templates: None,
                tree_templates: Some(*featurizer.templates()),
                train,
                features: featurizer.index().names().map(str::to_owned).collect(),
            },
            model,
        }
    }

    fn index(&self) -> FeatureIndex {
        FeatureIndex::from_names(self.header.features.iter().cloned())
    }

    /// A featurizer with the stored labels and a frozen index.
    pub fn chain_featurizer(&self) -> Result<ChainFeaturizer> {
        let templates = self
            .header
            .chain_templates
            .ok_or_else(|| Error::ModelFormat("not a chain model".into()))?;
        ChainFeaturizer::new(templates, self.header.labels.iter().cloned(), self.index())
    }

    pub fn tree_featurizer(&self) -> Result<TreeFeaturizer> {
        let templates = self
            .header
            .tree_templates
            .ok_or_else(|| Error::ModelFormat("not a tree model".into()))?;
        Ok(TreeFeaturizer::new(templates, self.index()))
    }
}

fn write_floats(out: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_floats(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::ModelFormat(format!("truncated weight array: {e}")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight")))
        .collect())
}

pub fn write_model(mut out: impl Write, stored: &StoredModel) -> Result<()> {
    let m = &stored.model;
    if stored.header.dimension != m.dimension() {
        return Err(Error::ShapeMismatch {
            expected: stored.header.dimension,
            actual: m.dimension(),
        });
    }
    writeln!(out, "{MAGIC}")?;
    serde_json::to_writer(&mut out, &stored.header)?;
    writeln!(out)?;
    write_floats(&mut out, &m.mu)?;
    if let Some(sigma) = &m.sigma_diag {
        write_floats(&mut out, sigma)?;
    }
    write_floats(&mut out, &m.avg_mu)?;
    out.flush()?;
    Ok(())
}

pub fn read_model(input: impl Read) -> Result<StoredModel> {
    let mut input = BufReader::new(input);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::ModelFormat("missing model file marker".into()));
    }
    line.clear();
    input.read_line(&mut line)?;
    let header: ModelHeader = serde_json::from_str(line.trim_end())?;
    if header.version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            header.version
        )));
    }
    let n = header.dimension;
    let mu = read_floats(&mut input, n)?;
    let sigma = if header.has_sigma {
        Some(read_floats(&mut input, n)?)
    } else {
        None
    };
    let avg = read_floats(&mut input, n)?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", rest.len())));
    }
    let model = LinearModel::from_parts(mu, sigma, avg, header.update_count)?;
    Ok(StoredModel { header, model })
}

pub fn save_model(path: impl AsRef<Path>, stored: &StoredModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), stored)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StoredModel> {
    read_model(File::open(path)?)
}
