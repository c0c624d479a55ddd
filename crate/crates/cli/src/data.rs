//! Corpus loading and featurization shared by the subcommands.

use std::path::Path;

use structconf::corpus::{
    read_conll_chain, read_conll_dependency, ChainColumns, ChainFeaturizer, RawSentence,
};
use structconf::store::{StoredModel, Task};
use structconf::{ChainInstance, Result, TreeInstance};

use crate::{ColumnsArg, CorpusArgs, TaskArg};

pub fn columns(args: &CorpusArgs) -> ChainColumns {
    match args.columns {
        ColumnsArg::Last => ChainColumns::default(),
        ColumnsArg::Chunking => ChainColumns::chunking(),
        ColumnsArg::Ner => ChainColumns::ner(),
    }
}

pub fn read_corpus(task: Task, path: &Path, args: &CorpusArgs) -> Result<Vec<RawSentence>> {
    let sentences = match task {
        Task::Chain => read_conll_chain(path, &columns(args))?,
        Task::Tree => read_conll_dependency(path)?,
    };
    log::info!("read {} sentences from {}", sentences.len(), path.display());
    Ok(sentences)
}

pub fn task(arg: TaskArg) -> Task {
    match arg {
        TaskArg::Chain => Task::Chain,
        TaskArg::Tree => Task::Tree,
    }
}

/// Sentences featurized with a stored model's frozen feature index.
pub enum Featurized {
    Chain {
        featurizer: ChainFeaturizer,
        instances: Vec<ChainInstance>,
    },
    Tree(Vec<TreeInstance>),
}

pub fn featurize(stored: &StoredModel, sentences: &[RawSentence]) -> Result<Featurized> {
    Ok(match stored.header.task {
        Task::Chain => {
            let mut featurizer = stored.chain_featurizer()?;
            let instances = featurizer.extract_all(sentences)?;
            Featurized::Chain {
                featurizer,
                instances,
            }
        }
        Task::Tree => Featurized::Tree(stored.tree_featurizer()?.extract_all(sentences)?),
    })
}

/// Whether a sentence carries gold output for its task.
pub fn has_gold(task: Task, sentence: &RawSentence) -> bool {
    match task {
        Task::Chain => sentence.tags().is_some(),
        Task::Tree => sentence.heads().is_some(),
    }
}

/// Display form of unit output `value`: a tag for chains, a head index for trees.
pub fn output_name(featurized: &Featurized, value: usize) -> String {
    match featurized {
        Featurized::Chain { featurizer, .. } => {
            featurizer.label_name(value).unwrap_or("?").to_owned()
        }
        Featurized::Tree(_) => value.to_string(),
    }
}
