//! The training loop with logging, per-epoch checkpoints and a state dump
//! when the loss stops being finite.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dan_core::image::Triplet;
use dan_core::train::{StepLog, TrainConfig, Trainer};

use crate::checkpoint::save_checkpoint;
use crate::config::RunConfig;
use crate::dataset::{load_dataset, specify_histograms};
use crate::error::{io_err, Error, Result};

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub fn epoch_checkpoint(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join(format!("epoch_{epoch:03}.ckpt"))
}

#[derive(Debug)]
pub struct TrainReport {
    pub log: Vec<StepLog>,
    pub final_checkpoint: PathBuf,
    pub trainer: Trainer,
}

impl TrainReport {
    /// Mean loss of each epoch that took at least one step.
    pub fn epoch_means(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for l in &self.log {
            match out.last_mut() {
                Some((e, s, n)) if *e == l.epoch => {
                    *s += l.loss;
                    *n += 1;
                }
                _ => out.push((l.epoch, l.loss, 1)),
            }
        }
        out.into_iter().map(|(e, s, n)| (e, s / n as f64)).collect()
    }
}

/// Runs `config.epochs` epochs over `data`, or fewer if `max_steps` is
/// reached first. Writes the step log, a checkpoint after every epoch and
/// a final checkpoint into `out_dir`.
pub fn train_epochs(
    config: &TrainConfig,
    data: &[Triplet],
    out_dir: &Path,
    max_steps: Option<u64>,
    mut progress: impl FnMut(&StepLog),
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(dan_core::Error::Contract("training set is empty".into()).into());
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut trainer = Trainer::new(*config)?;
    let mut log = Vec::new();
    let mut csv = String::from("epoch,step,loss,lr\n");
    let log_path = out_dir.join(LOG_FILE);
    for epoch in 0..config.epochs {
        if max_steps.is_some_and(|m| trainer.steps >= m) {
            break;
        }
        let result = trainer.run_epoch(data, epoch, max_steps, |s| {
            let _ = writeln!(csv, "{},{},{:e},{:e}", s.epoch, s.step, s.loss, s.lr);
            progress(s);
            log.push(*s);
        });
        std::fs::write(&log_path, &csv).map_err(io_err(&log_path))?;
        if let Err(cause) = result {
            return Err(match cause {
                dan_core::Error::Numeric { .. } => dump_state(&trainer, epoch, cause, out_dir)?,
                other => other.into(),
            });
        }
        save_checkpoint(&trainer.store, &epoch_checkpoint(out_dir, epoch))?;
    }
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    save_checkpoint(&trainer.store, &final_checkpoint)?;
    Ok(TrainReport {
        log,
        final_checkpoint,
        trainer,
    })
}

/// Saves the parameters that produced the non-finite loss, which are still
/// the pre-update values, plus a short text description.
fn dump_state(trainer: &Trainer, epoch: usize, cause: dan_core::Error, out_dir: &Path) -> Result<Error> {
    let ckpt = out_dir.join("failure.ckpt");
    save_checkpoint(&trainer.store, &ckpt)?;
    let mut text = format!(
        "epoch {epoch}\nsteps completed {}\nerror {cause}\nadam t {}\n",
        trainer.steps, trainer.adam.t
    );
    for (_, p) in trainer.store.iter() {
        let finite = p.value.all_finite() && p.grad.all_finite();
        let _ = writeln!(text, "{} max|w| {:e} finite {finite}", p.name, p.value.max_abs());
    }
    let path = out_dir.join("failure.txt");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(Error::Diverged {
        epoch,
        step: trainer.steps + 1,
        cause,
        dump: ckpt.display().to_string(),
    })
}

/// Loads, preprocesses and trains as described by a run configuration.
pub fn train_from_config(
    config: &RunConfig,
    max_steps: Option<u64>,
    progress: impl FnMut(&StepLog),
) -> Result<TrainReport> {
    let mut items = load_dataset(&config.data_dir)?;
    if items.is_empty() {
        return Err(crate::dataset::DatasetError::Empty(config.data_dir.display().to_string()).into());
    }
    specify_histograms(&mut items, &config.histogram)?;
    let data: Vec<Triplet> = items.into_iter().map(|(_, t)| t).collect();
    train_epochs(&config.train, &data, &config.out_dir, max_steps, progress)
}
