use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{Grid, NveRow};
use crate::decoders::{ArchitectureSpec, NetworkModel};
use crate::{Error, Result};

/// Normalised validation error: the mean over validation points of
/// `BER_NND / BER_MAP`.
pub fn compute_nve(ber_nnd: &[f64], ber_map: &[f64]) -> Result<f64> {
    if ber_nnd.len() != ber_map.len() {
        return Err(Error::argument(format!(
            "NVE needs equal-length BER lists, got {} and {}",
            ber_nnd.len(),
            ber_map.len()
        )));
    }
    if ber_nnd.is_empty() {
        return Err(Error::argument("NVE needs at least one validation point"));
    }
    if let Some(index) = ber_map.iter().position(|&b| b == 0.0) {
        return Err(Error::UndefinedRatio { index });
    }
    let sum: f64 = ber_nnd.iter().zip(ber_map).map(|(n, m)| n / m).sum();
    Ok(sum / ber_nnd.len() as f64)
}

/// Outcome of training-SNR selection for one architecture and training fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrSelection {
    pub rho_t_db: f64,
    /// One row per candidate training SNR, in grid order.
    pub table: Vec<NveRow>,
    /// The model trained at the selected SNR.
    pub model: NetworkModel,
}

/// Trains one model per point of `config.train_snr_grid_db`, scores each by
/// NVE over `config.eval_snr_grid_db` and returns the minimiser (ties go to
/// the lower SNR). Validation points where the MAP BER estimate is zero are
/// left out of every NVE and listed in each row's `dropped_points`.
pub fn select_training_snr(
    arch: &ArchitectureSpec,
    p: f64,
    config: &ExperimentConfig,
) -> Result<SnrSelection> {
    if arch.n != config.n || arch.k != config.k {
        return Err(Error::config(
            "architecture and experiment disagree on (N, K)",
        ));
    }
    let grid = Grid::new(config, None)?;
    let subset = grid.subset(p)?;
    let mut table = Vec::new();
    let mut best: Option<(f64, f64, NetworkModel)> = None;
    for &rho in &config.train_snr_grid_db {
        let cell = grid.run_cell(arch, &subset, Some(rho))?;
        let row = grid.nve_row(arch.kind, p, rho, &cell.val_ber)?;
        if let Some(nve) = row.nve {
            if best.as_ref().is_none_or(|(_, b, _)| nve < *b) {
                best = Some((rho, nve, cell.model));
            }
        }
        table.push(row);
    }
    let (rho_t_db, _, model) = best.ok_or_else(|| {
        Error::config("no validation point has a non-zero MAP BER; NVE undefined")
    })?;
    Ok(SnrSelection {
        rho_t_db,
        table,
        model,
    })
}
