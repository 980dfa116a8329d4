//! Model checkpoints: a self-describing JSON document holding the algorithm
//! tag, hyperparameters, seed, training fingerprint, training index and
//! fitted parameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RecommenderModel;
use crate::error::{Error, Result};

const FORMAT: &str = "recfair-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: RecommenderModel,
}

pub fn save_checkpoint(model: &RecommenderModel, path: &Path) -> Result<()> {
    let doc = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        model: model.clone(),
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &doc)?;
    Ok(())
}

/// Loads a checkpoint, rejecting foreign documents and checkpoints whose
/// fingerprint no longer matches their training index.
pub fn load_checkpoint(path: &Path) -> Result<RecommenderModel> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let doc: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
    if doc.format != FORMAT || doc.version != VERSION {
        return Err(Error::InvalidArgument(format!(
            "{} is not a version {VERSION} model checkpoint",
            path.display()
        )));
    }
    if doc.model.index().fingerprint() != doc.model.fingerprint {
        return Err(Error::InvalidArgument(format!(
            "{}: training fingerprint mismatch",
            path.display()
        )));
    }
    Ok(doc.model)
}
