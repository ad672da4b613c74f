//! Sources of Q&A answers for documents chosen for annotation.

use std::path::{Path, PathBuf};

use narrative_core::corpus::QaDataset;

use crate::error::{CliError, Context, Result};
use crate::io;

pub trait QaProvider {
    /// Answers for exactly `ids`, in that order.
    fn answers(&self, ids: &[String]) -> Result<QaDataset>;
}

/// Replays answers prepared ahead of time; a document without prepared
/// answers is an error, never a guess.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    source: PathBuf,
    prepared: QaDataset,
}

impl ReplayProvider {
    pub fn open(source: &Path) -> Result<Self> {
        Ok(Self {
            source: source.to_owned(),
            prepared: io::read_qa(source)?,
        })
    }
}

impl QaProvider for ReplayProvider {
    fn answers(&self, ids: &[String]) -> Result<QaDataset> {
        if let Some(missing) = ids.iter().find(|id| self.prepared.get(id).is_none()) {
            return Err(CliError::Data(format!(
                "{} has no prepared answers for `{missing}`",
                self.source.display()
            )));
        }
        self.prepared.select_ids(ids).context("replayed answers")
    }
}
