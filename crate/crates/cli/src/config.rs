//! Merged run configuration: built-in defaults, then an optional JSON file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qfeat::ansatz::ModelKind;
use qfeat::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated in memory from a named hypersphere scenario.
    Scenario {
        name: String,
        seed: u64,
        n_train: Option<usize>,
        n_val: Option<usize>,
        n_test: Option<usize>,
    },
    /// A directory holding `train.csv`, `val.csv` and `test.csv`.
    Csv {
        dir: PathBuf,
        label_column: String,
        n_classes: Option<usize>,
        /// Fit a min-max scaler on the training split and apply it everywhere.
        scale: bool,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Scenario {
            name: "sphere-3sigma".into(),
            seed: 7,
            n_train: None,
            n_val: None,
            n_test: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub experiment: String,
    pub model: ModelKind,
    pub qubits: usize,
    /// Input dimension; taken from the data when absent.
    pub d_inp: Option<usize>,
    /// Output dimension; 1 for two classes, otherwise the class count.
    pub d_out: Option<usize>,
    pub layers: usize,
    pub psi0_seed: u64,
    pub train: TrainConfig,
    pub data: DataSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "experiment".into(),
            model: ModelKind::Acls,
            qubits: 2,
            d_inp: None,
            d_out: None,
            layers: 3,
            psi0_seed: 42,
            train: TrainConfig::default(),
            data: DataSource::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
