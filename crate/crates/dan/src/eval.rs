//! Interpolation of frame pairs and dataset scoring.

use std::fmt::Write as _;
use std::path::Path;

use dan_core::image::ImageU8;
use dan_core::metrics::{average_frames, evaluate, MetricReport};
use dan_core::model::DanModel;
use dan_core::ParamStore;

use crate::checkpoint::load_checkpoint;
use crate::dataset::{load_triplet, read_manifest};
use crate::error::{io_err, Result};

pub const CSV_HEADER: &str = "name,psnr,ssim,ie,baseline_psnr,baseline_ssim,baseline_ie,error";

/// A trained network ready for inference.
pub struct Interpolator {
    pub model: DanModel,
    pub store: ParamStore<f32>,
}

impl Interpolator {
    pub fn new(store: ParamStore<f32>) -> Result<Self> {
        Ok(Interpolator {
            model: DanModel::from_store(&store)?,
            store,
        })
    }

    pub fn load(ckpt: &Path) -> Result<Self> {
        Self::new(load_checkpoint(ckpt)?)
    }

    pub fn interpolate(&self, prev: &ImageU8, next: &ImageU8) -> Result<ImageU8> {
        if !prev.same_dims(next) {
            return Err(dan_core::Error::Dimension {
                op: "interpolate",
                left: vec![prev.height(), prev.width()],
                right: vec![next.height(), next.width()],
            }
            .into());
        }
        let out = self
            .model
            .interpolate(&self.store, &prev.to_unit_tensor(), &next.to_unit_tensor())?;
        Ok(ImageU8::from_unit_tensor(&out)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub result: std::result::Result<(MetricReport, MetricReport), String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

fn mean_of(reports: &[&MetricReport]) -> MetricReport {
    let n = reports.len() as f64;
    MetricReport {
        psnr: reports.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
        ie: reports.iter().map(|r| r.ie).sum::<f64>() / n,
    }
}

impl EvalReport {
    /// Means of the model and baseline scores over the rows that succeeded.
    pub fn mean(&self) -> Option<(MetricReport, MetricReport)> {
        let ok: Vec<_> = self.rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        if ok.is_empty() {
            return None;
        }
        let model: Vec<_> = ok.iter().map(|(m, _)| m).collect();
        let base: Vec<_> = ok.iter().map(|(_, b)| b).collect();
        Some((mean_of(&model), mean_of(&base)))
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let line = |s: &mut String, name: &str, m: &MetricReport, b: &MetricReport| {
            let _ = writeln!(
                s,
                "{name},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},",
                m.psnr, m.ssim, m.ie, b.psnr, b.ssim, b.ie
            );
        };
        for r in &self.rows {
            match &r.result {
                Ok((m, b)) => line(&mut s, &r.name, m, b),
                Err(e) => {
                    let _ = writeln!(s, "{},,,,,,,\"{}\"", r.name, e.replace('"', "'"));
                }
            }
        }
        if let Some((m, b)) = self.mean() {
            line(&mut s, "mean", &m, &b);
        }
        s
    }
}

/// Scores the model and the average-of-inputs baseline against the middle
/// frame of every listed triplet. A triplet that cannot be read or scored
/// becomes an error row.
pub fn eval_dataset(interp: &Interpolator, root: &Path) -> Result<EvalReport> {
    let rows = read_manifest(root)?
        .into_iter()
        .map(|name| {
            let result = score(interp, root, &name).map_err(|e| e.to_string());
            EvalRow { name, result }
        })
        .collect();
    Ok(EvalReport { rows })
}

fn score(interp: &Interpolator, root: &Path, name: &str) -> Result<(MetricReport, MetricReport)> {
    let t = load_triplet(root, name)?;
    let pred = interp.interpolate(&t.prev, &t.next)?;
    let base = average_frames(&t.prev, &t.next)?;
    Ok((evaluate(&pred, &t.mid)?, evaluate(&base, &t.mid)?))
}

pub fn write_csv(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv()).map_err(io_err(path))
}
