use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, SolidRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, validation: 0.15, test: 0.15 }
    }
}

/// Record indices of each subset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Published split lists, by solid id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<String>,
    #[serde(default)]
    pub validation: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl SplitFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DataError::Schema(format!("split file: {e}")))
    }
}

/// Assigns every record to train, validation or test.
///
/// With an explicit split file the ratios and seed are ignored: ids are
/// looked up by name, ids missing from `records` are ignored, and a record
/// the file does not mention is an error. Otherwise records are shuffled
/// with `seed` and cut at `round(n·train)` and `round(n·validation)`.
pub fn split(
    records: &[SolidRecord],
    ratios: SplitRatios,
    seed: u64,
    explicit: Option<&SplitFile>,
) -> Result<Split, DataError> {
    if let Some(file) = explicit {
        return split_from_file(records, file);
    }
    let parts = [ratios.train, ratios.validation, ratios.test];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::Ratios(format!(
            "{} / {} / {} must be non-negative and sum to 1",
            ratios.train, ratios.validation, ratios.test
        )));
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * ratios.train).round() as usize;
    let n_train = n_train.min(n);
    let n_val = (((n as f64) * ratios.validation).round() as usize).min(n - n_train);
    Ok(Split {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

fn split_from_file(records: &[SolidRecord], file: &SplitFile) -> Result<Split, DataError> {
    let index: HashMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut assigned = vec![false; records.len()];
    let mut pick = |ids: &[String]| -> Result<Vec<usize>, DataError> {
        let mut out = Vec::new();
        for id in ids {
            if let Some(&i) = index.get(id.as_str()) {
                if std::mem::replace(&mut assigned[i], true) {
                    return Err(DataError::Schema(format!("split file lists {id} more than once")));
                }
                out.push(i);
            }
        }
        Ok(out)
    };
    let split = Split { train: pick(&file.train)?, validation: pick(&file.validation)?, test: pick(&file.test)? };
    if let Some(i) = assigned.iter().position(|a| !a) {
        return Err(DataError::Schema(format!("split file does not assign solid {}", records[i].id)));
    }
    Ok(split)
}
