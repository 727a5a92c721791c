//! Grid runner.
//!
//! A cell is one training run, identified by `(architecture, p, ρ_t)`; its
//! seed is derived from the root seed and those values, so cells can run in
//! any order or in parallel. Finished cells are stored under `cells/` in the
//! output directory and reused by later runs with the same config hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::eval::{codebook_ber, nnd_ber, Restrict};
use super::nve::compute_nve;
use super::subset::{make_training_subset, TrainingSubset};
use super::timing::{time_per_sample, Direction};
use super::train::{train_from, Checkpoint, LossPoint, TrainSetup};
use crate::codec::{Codebook, PolarCode};
use crate::decoders::{ArchKind, ArchitectureSpec, NetworkModel};
use crate::map_oracle::map_ber_with_book;
use crate::rng::{self, derive_seed};
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub build_id: String,
    pub mode: String,
}

/// Noiseless BER of one cell after `step` training steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub arch: ArchKind,
    pub p: f64,
    /// `None` for noiseless training.
    pub rho_t_db: Option<f64>,
    pub step: u64,
    pub ber_train_subset: f64,
    pub ber_full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub arch: ArchKind,
    pub p: f64,
    pub rho_t_db: f64,
    pub ebn0_db: f64,
    /// Full-codebook BER.
    pub ber: f64,
    pub ber_map: f64,
    pub ber_train_subset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub arch: ArchKind,
    pub ebn0_db: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NveRow {
    pub arch: ArchKind,
    pub p: f64,
    pub rho_t_db: f64,
    /// `None` when every validation point was dropped.
    pub nve: Option<f64>,
    /// Validation SNRs left out because their MAP BER estimate is zero.
    pub dropped_points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoChoice {
    pub arch: ArchKind,
    pub p: f64,
    pub rho_t_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub arch: ArchKind,
    pub n: usize,
    pub direction: Direction,
    pub us_per_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompleteCell {
    pub arch: ArchKind,
    pub p: f64,
    pub rho_t_db: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub metadata: Metadata,
    pub config: ExperimentConfig,
    pub map_ber: Vec<MapRow>,
    pub ber_vs_step: Vec<StepRow>,
    pub ber_vs_snr: Vec<BerRow>,
    pub nve: Vec<NveRow>,
    pub chosen_rho_t: Vec<RhoChoice>,
    pub timing: Vec<TimingRow>,
    pub incomplete: Vec<IncompleteCell>,
}

impl EvalReport {
    pub fn is_complete(&self) -> bool {
        self.incomplete.is_empty()
    }
}

/// Stored result of one training cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct CellRecord {
    config_hash: String,
    pub steps: Vec<StepRow>,
    pub loss: Vec<LossPoint>,
    /// NND BER at each evaluation SNR on the validation streams (noisy cells).
    pub val_ber: Vec<f64>,
}

pub(crate) struct CellOutcome {
    pub model: NetworkModel,
    pub record: CellRecord,
}

impl std::ops::Deref for CellOutcome {
    type Target = CellRecord;

    fn deref(&self) -> &CellRecord {
        &self.record
    }
}

/// Shared state of one experiment: code, codebook, seeds, MAP baselines and
/// the optional cell store.
pub(crate) struct Grid<'a> {
    config: &'a ExperimentConfig,
    book: Codebook,
    config_hash: String,
    store: Option<PathBuf>,
    /// MAP BER on the validation streams, one entry per evaluation SNR.
    map_val: Vec<f64>,
}

fn cell_seed(root: u64, kind: ArchKind, p: f64, rho: Option<f64>) -> u64 {
    let rho_bits = rho.map_or(u64::MAX, f64::to_bits);
    let s = derive_seed(root, rng::domain::CELL);
    let s = derive_seed(s, kind as u64 + 1);
    let s = derive_seed(s, p.to_bits());
    derive_seed(s, rho_bits)
}

fn val_seed(root: u64, snr_index: usize) -> u64 {
    derive_seed(derive_seed(root, rng::domain::VALIDATION), snr_index as u64)
}

fn test_seed(root: u64, snr_index: usize) -> u64 {
    derive_seed(derive_seed(root, rng::domain::EVAL), snr_index as u64)
}

impl<'a> Grid<'a> {
    pub fn new(config: &'a ExperimentConfig, store: Option<PathBuf>) -> Result<Self> {
        config.validate()?;
        let book = Codebook::enumerate(&PolarCode::construct(config.n, config.k)?)?;
        let map_val = if config.noiseless {
            Vec::new()
        } else {
            config
                .eval_snr_grid_db
                .iter()
                .enumerate()
                .map(|(i, &snr)| {
                    map_ber_with_book(&book, snr, config.num_val_samples, val_seed(config.seed, i))
                })
                .collect::<Result<_>>()?
        };
        Ok(Grid {
            config,
            book,
            config_hash: config.hash(),
            store,
            map_val,
        })
    }

    pub fn subset(&self, p: f64) -> Result<TrainingSubset> {
        make_training_subset(
            &self.book,
            p,
            derive_seed(self.config.seed, rng::domain::SUBSET),
        )
    }

    fn cell_path(&self, kind: ArchKind, p: f64, rho: Option<f64>) -> Option<PathBuf> {
        let c = self.config;
        let pi = c.p_list.iter().position(|&v| v == p)?;
        let ri = match rho {
            Some(r) => c
                .train_snr_grid_db
                .iter()
                .position(|&v| v == r)?
                .to_string(),
            None => "none".into(),
        };
        Some(self.store.as_ref()?.join(format!("{kind}_p{pi}_rho{ri}")))
    }

    fn load_cell(&self, base: &Path) -> Option<CellOutcome> {
        let text = std::fs::read_to_string(base.with_extension("json")).ok()?;
        let record: CellRecord = serde_json::from_str(&text).ok()?;
        if record.config_hash != self.config_hash {
            return None;
        }
        let model = NetworkModel::load(&base.with_extension("model.json")).ok()?;
        Some(CellOutcome { model, record })
    }

    /// Trains (or reloads) one cell.
    pub fn run_cell(
        &self,
        spec: &ArchitectureSpec,
        subset: &TrainingSubset,
        rho: Option<f64>,
    ) -> Result<CellOutcome> {
        let c = self.config;
        let base = self.cell_path(spec.kind, subset.fraction, rho);
        if let Some(found) = base.as_deref().and_then(|b| self.load_cell(b)) {
            return Ok(found);
        }
        let seed = cell_seed(c.seed, spec.kind, subset.fraction, rho);
        let model = NetworkModel::build(spec, &mut rng::stream(seed, rng::domain::INIT, 0))?;
        let mut ckpt = Checkpoint::new(model, c.adam);
        let setup = TrainSetup {
            rho_t_db: rho,
            batch_size: c.batch_size,
            num_train_samples: c.num_train_samples,
            seed,
        };

        let book = &self.book;
        let step_row = |ckpt: &Checkpoint| -> Result<StepRow> {
            Ok(StepRow {
                arch: spec.kind,
                p: subset.fraction,
                rho_t_db: rho,
                step: ckpt.step(),
                ber_train_subset: codebook_ber(&ckpt.model, book, Some(&subset.indices))?,
                ber_full: codebook_ber(&ckpt.model, book, None)?,
            })
        };
        let mut steps = vec![step_row(&ckpt)?];
        let trained = train_from(&mut ckpt, subset, book, &setup, c.max_steps, |ck| {
            steps.push(step_row(ck)?);
            Ok(())
        });
        let loss = match trained {
            Ok(loss) => loss,
            Err(e) => {
                if let (Error::Numerical(_), Some(b)) = (&e, &base) {
                    ckpt.save(&b.with_extension("diverged.json"))?;
                }
                return Err(e);
            }
        };

        let val_ber = match rho {
            Some(_) => c
                .eval_snr_grid_db
                .iter()
                .enumerate()
                .map(|(i, &snr)| {
                    nnd_ber(
                        &ckpt.model,
                        book,
                        snr,
                        c.num_val_samples,
                        val_seed(c.seed, i),
                        Restrict::Full,
                    )
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let record = CellRecord {
            config_hash: self.config_hash.clone(),
            steps,
            loss,
            val_ber,
        };
        if let Some(b) = &base {
            ckpt.model.save(&b.with_extension("model.json"))?;
            std::fs::write(b.with_extension("json"), serde_json::to_string(&record)?)?;
        }
        Ok(CellOutcome {
            model: ckpt.model,
            record,
        })
    }

    /// NVE over the validation points whose MAP BER is non-zero.
    pub fn nve_row(&self, kind: ArchKind, p: f64, rho: f64, val_ber: &[f64]) -> Result<NveRow> {
        let mut nnd = Vec::new();
        let mut map = Vec::new();
        let mut dropped_points = Vec::new();
        for ((&snr, &m), &b) in self
            .config
            .eval_snr_grid_db
            .iter()
            .zip(&self.map_val)
            .zip(val_ber)
        {
            if m == 0.0 {
                dropped_points.push(snr);
            } else {
                nnd.push(b);
                map.push(m);
            }
        }
        let nve = if map.is_empty() {
            None
        } else {
            Some(compute_nve(&nnd, &map)?)
        };
        Ok(NveRow {
            arch: kind,
            p,
            rho_t_db: rho,
            nve,
            dropped_points,
        })
    }
}

fn fmt_rho(rho: Option<f64>) -> String {
    rho.map_or_else(|| "inf".to_string(), |r| r.to_string())
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs the configured grid, writes `report.json`, `ber_vs_step.csv`,
/// `ber_vs_snr.csv`, `nve.csv` and `timing.csv` into `out_dir`, and returns
/// the report. Cells that fail are listed in `EvalReport::incomplete`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<EvalReport> {
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;
    let grid = Grid::new(config, Some(cells_dir))?;
    let c = config;

    let subsets: Vec<TrainingSubset> = c
        .p_list
        .iter()
        .map(|&p| grid.subset(p))
        .collect::<Result<_>>()?;
    let rhos: Vec<Option<f64>> = if c.noiseless {
        vec![None]
    } else {
        c.train_snr_grid_db.iter().copied().map(Some).collect()
    };
    let mut jobs: Vec<(ArchKind, usize, Option<f64>)> = Vec::new();
    for &a in &c.archs {
        for pi in 0..subsets.len() {
            jobs.extend(rhos.iter().map(|&r| (a, pi, r)));
        }
    }
    let outcomes: Vec<Result<CellOutcome>> = jobs
        .par_iter()
        .map(|&(kind, pi, rho)| grid.run_cell(&c.arch_spec(kind), &subsets[pi], rho))
        .collect();

    let mut report = EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        metadata: Metadata {
            config_hash: config.hash(),
            seed: c.seed,
            build_id: concat!("nnd-core ", env!("CARGO_PKG_VERSION")).to_string(),
            mode: if c.noiseless { "noiseless" } else { "noisy" }.to_string(),
        },
        config: config.clone(),
        map_ber: Vec::new(),
        ber_vs_step: Vec::new(),
        ber_vs_snr: Vec::new(),
        nve: Vec::new(),
        chosen_rho_t: Vec::new(),
        timing: Vec::new(),
        incomplete: Vec::new(),
    };

    // Group outcomes by (arch, p); `jobs` is ordered with rho innermost.
    let mut outcomes = outcomes.into_iter();
    let mut selected: Vec<(ArchKind, usize, f64, NetworkModel)> = Vec::new();
    for &kind in &c.archs {
        for (pi, subset) in subsets.iter().enumerate() {
            let p = subset.fraction;
            let mut best: Option<(f64, f64, NetworkModel)> = None;
            for &rho in &rhos {
                let outcome = match outcomes.next().expect("one outcome per job") {
                    Ok(o) => o,
                    Err(e) => {
                        report.incomplete.push(IncompleteCell {
                            arch: kind,
                            p,
                            rho_t_db: rho,
                            error: e.to_string(),
                        });
                        continue;
                    }
                };
                report.ber_vs_step.extend(outcome.steps.iter().cloned());
                if let Some(r) = rho {
                    let row = grid.nve_row(kind, p, r, &outcome.val_ber)?;
                    if let Some(nve) = row.nve {
                        if best.as_ref().is_none_or(|(_, b, _)| nve < *b) {
                            best = Some((r, nve, outcome.model));
                        }
                    }
                    report.nve.push(row);
                }
            }
            if let Some((rho, _, model)) = best {
                report.chosen_rho_t.push(RhoChoice {
                    arch: kind,
                    p,
                    rho_t_db: rho,
                });
                selected.push((kind, pi, rho, model));
            } else if !c.noiseless {
                report.incomplete.push(IncompleteCell {
                    arch: kind,
                    p,
                    rho_t_db: None,
                    error: "no training SNR produced a defined NVE".into(),
                });
            }
        }
    }

    if !c.noiseless {
        let map_test: Vec<f64> = c
            .eval_snr_grid_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                map_ber_with_book(&grid.book, snr, c.num_test_samples, test_seed(c.seed, i))
            })
            .collect::<Result<_>>()?;
        for &kind in &c.archs {
            for (&snr, &ber) in c.eval_snr_grid_db.iter().zip(&map_test) {
                report.map_ber.push(MapRow {
                    arch: kind,
                    ebn0_db: snr,
                    ber,
                });
            }
        }
        for (kind, pi, rho, model) in &selected {
            let subset = &subsets[*pi];
            for (i, &snr) in c.eval_snr_grid_db.iter().enumerate() {
                let seed = test_seed(c.seed, i);
                report.ber_vs_snr.push(BerRow {
                    arch: *kind,
                    p: subset.fraction,
                    rho_t_db: *rho,
                    ebn0_db: snr,
                    ber: nnd_ber(
                        model,
                        &grid.book,
                        snr,
                        c.num_test_samples,
                        seed,
                        Restrict::Full,
                    )?,
                    ber_map: map_test[i],
                    ber_train_subset: nnd_ber(
                        model,
                        &grid.book,
                        snr,
                        c.num_test_samples,
                        seed,
                        Restrict::Subset(subset),
                    )?,
                });
            }
        }
    }

    if c.timing {
        for &kind in &c.archs {
            let model = NetworkModel::build(
                &c.arch_spec(kind),
                &mut rng::stream(c.seed, rng::domain::INIT, 0),
            )?;
            for direction in [Direction::Forward, Direction::Backward] {
                report.timing.push(TimingRow {
                    arch: kind,
                    n: c.n,
                    direction,
                    us_per_sample: time_per_sample(&model, direction, c.timing_repetitions)?,
                });
            }
        }
    }

    write_outputs(&report, out_dir)?;
    Ok(report)
}

fn write_outputs(report: &EvalReport, out_dir: &Path) -> Result<()> {
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    write_csv(
        &out_dir.join("ber_vs_step.csv"),
        "arch,p,rho_t_db,step,ber_train_subset,ber_full",
        report.ber_vs_step.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.arch,
                r.p,
                fmt_rho(r.rho_t_db),
                r.step,
                r.ber_train_subset,
                r.ber_full
            )
        }),
    )?;
    write_csv(
        &out_dir.join("ber_vs_snr.csv"),
        "arch,p,rho_t_db,ebn0_db,ber,ber_map",
        report.ber_vs_snr.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.arch, r.p, r.rho_t_db, r.ebn0_db, r.ber, r.ber_map
            )
        }),
    )?;
    write_csv(
        &out_dir.join("timing.csv"),
        "arch,n,direction,us_per_sample",
        report
            .timing
            .iter()
            .map(|r| format!("{},{},{},{}", r.arch, r.n, r.direction, r.us_per_sample)),
    )?;
    write_csv(
        &out_dir.join("nve.csv"),
        "arch,p,rho_t_db,nve",
        report.nve.iter().map(|r| {
            let mut s = format!("{},{},{},", r.arch, r.p, r.rho_t_db);
            match r.nve {
                Some(v) => write!(s, "{v}").unwrap(),
                None => s.push_str("nan"),
            }
            s
        }),
    )?;
    Ok(())
}
