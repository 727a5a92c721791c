use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::PolarCode;
use crate::decoders::{ArchKind, ArchitectureSpec};
use crate::neuralnet::AdamConfig;
use crate::{Error, Result};

/// Declarative description of an experiment grid. Missing keys take the
/// defaults below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub archs: Vec<ArchKind>,
    /// Training fractions of the codebook.
    pub p_list: Vec<f64>,
    /// Candidate training SNRs (dB) for NVE selection.
    pub train_snr_grid_db: Vec<f64>,
    /// Evaluation SNRs (dB); also the validation set for NVE.
    pub eval_snr_grid_db: Vec<f64>,
    pub num_train_samples: usize,
    pub num_test_samples: usize,
    /// Samples per validation point when computing NVE.
    pub num_val_samples: usize,
    pub batch_size: usize,
    /// Mini-batch gradient steps per training run.
    pub max_steps: u64,
    /// Train without channel noise and report BER against training steps.
    pub noiseless: bool,
    pub seed: u64,
    pub adam: AdamConfig,
    pub dropout: f64,
    pub mlp_hidden: Vec<usize>,
    pub cnn_channels: Vec<usize>,
    pub rnn_hidden: usize,
    /// Measure per-sample forward/backward times (not reproducible byte-for-byte).
    pub timing: bool,
    pub timing_repetitions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 8,
            k: 4,
            archs: ArchKind::ALL.to_vec(),
            p_list: vec![0.4, 0.6, 0.8, 1.0],
            train_snr_grid_db: (0..12).map(|i| -2.0 + 2.0 * i as f64).collect(),
            eval_snr_grid_db: (0..=8).map(f64::from).collect(),
            num_train_samples: 1_000_000,
            num_test_samples: 100_000,
            num_val_samples: 10_000,
            batch_size: 128,
            max_steps: 20_000,
            noiseless: false,
            seed: 1,
            adam: AdamConfig::default(),
            dropout: 0.1,
            mlp_hidden: vec![64, 32, 16],
            cnn_channels: vec![8, 16, 32],
            rnn_hidden: 256,
            timing: false,
            timing_repetitions: 1000,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(format!("{name} must not be empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("{name} entries must be finite")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        PolarCode::construct(self.n, self.k)?;
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::config(
                "every p must lie in (0, 1] and p_list must not be empty",
            ));
        }
        if self.p_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("p_list must be strictly increasing"));
        }
        check_grid("train_snr_grid_db", &self.train_snr_grid_db)?;
        check_grid("eval_snr_grid_db", &self.eval_snr_grid_db)?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.num_train_samples == 0 || self.num_test_samples == 0 || self.num_val_samples == 0 {
            return Err(Error::config("sample counts must be at least 1"));
        }
        if self.timing && self.timing_repetitions < 100 {
            return Err(Error::config("timing_repetitions must be at least 100"));
        }
        let mut seen = Vec::new();
        for &kind in &self.archs {
            if seen.contains(&kind) {
                return Err(Error::config(format!("architecture {kind} listed twice")));
            }
            seen.push(kind);
            self.arch_spec(kind).validate()?;
        }
        Ok(())
    }

    pub fn arch_spec(&self, kind: ArchKind) -> ArchitectureSpec {
        ArchitectureSpec {
            kind,
            n: self.n,
            k: self.k,
            mlp_hidden: self.mlp_hidden.clone(),
            cnn_channels: self.cnn_channels.clone(),
            rnn_hidden: self.rnn_hidden,
            dropout: self.dropout,
        }
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
