//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use dan::bench::bench_attention_scaling;
use dan::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use dan::dataset::write_dataset;
use dan::eval::{eval_dataset, EvalReport, Interpolator};
use dan::train::train_epochs;
use dan::verify::{CheckResult, Suite};
use dan_core::attention::Scheme;
use dan_core::image::make_synthetic_triplet;
use dan_core::rng::seeded_normal;
use dan_core::train::TrainConfig;
use dan_core::ParamStore;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn print(line: &Line) {
    println!(
        "criterion {} {:<28} {}  {}",
        line.id,
        line.name,
        if line.pass { "PASS" } else { "FAIL" },
        line.detail
    );
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Runs the named verification checks and requires all of them to pass
/// within `limit`.
fn suite_criterion(id: u32, name: &'static str, checks: &[&str], limit: Duration) -> Line {
    let suite = Suite::default();
    let start = Instant::now();
    let results: Vec<CheckResult> = checks
        .iter()
        .flat_map(|c| suite.run(Some(c), |_| {}).into_iter().filter(|r| r.name == *c))
        .collect();
    let took = start.elapsed();
    let found = results.len() == checks.len();
    let pass = found && results.iter().all(CheckResult::passed) && took < limit;
    let mut detail: Vec<String> = results
        .iter()
        .map(|r| {
            let bound = serde_json::to_value(r.bound).unwrap();
            format!("{} {:e} {} {:e}", r.name, r.measured, bound.as_str().unwrap(), r.tolerance)
        })
        .collect();
    if !found {
        detail.push("missing checks".into());
    }
    detail.push(format!("time {} (limit {})", secs(took), secs(limit)));
    Line {
        id,
        name,
        pass,
        detail: detail.join("; "),
    }
}

fn scaling() -> Line {
    let start = Instant::now();
    let wide = [4096, 32768, 262144];
    let targets = [
        (Scheme::Dense, vec![1024, 4096, 16384], 2.0, 0.05),
        (Scheme::Dal, wide.to_vec(), 4.0 / 3.0, 0.15),
        (Scheme::Interlaced, wide.to_vec(), 1.5, 0.15),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (scheme, sizes, want, tol) in targets {
        let fitted = bench_attention_scaling(&[scheme], &sizes, 32, 2, 7)
            .map_err(|e| e.to_string())
            .and_then(|r| {
                if !r.skipped.is_empty() {
                    return Err(format!("skipped sizes {:?}", r.skipped));
                }
                r.exponent(scheme).ok_or_else(|| "no fit".to_string())
            });
        match fitted {
            Ok(e) => {
                pass &= (e - want).abs() <= tol;
                detail.push(format!("{scheme} {e:.4} (want {want:.2} ± {tol})"));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{scheme} error: {e}"));
            }
        }
    }
    let took = start.elapsed();
    let limit = Duration::from_secs(600);
    pass &= took < limit;
    detail.push(format!("time {} (limit {})", secs(took), secs(limit)));
    Line {
        id: 4,
        name: "complexity scaling",
        pass,
        detail: detail.join("; "),
    }
}

const TRAIN_TRIPLETS: u64 = 96;
const VALIDATION_TRIPLETS: u64 = 32;
const STEPS: u64 = 200;

struct Run {
    report: EvalReport,
    checkpoint: Vec<u8>,
    took: Duration,
}

/// 200 steps of the default configuration on 64×64 synthetic translation
/// triplets, then evaluation on held-out triplets.
fn desk_run(root: &Path, tag: &str) -> Result<Run, String> {
    let start = Instant::now();
    let train: Vec<_> = (0..TRAIN_TRIPLETS)
        .map(|s| make_synthetic_triplet(64, 64, s, 4))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let val: Vec<_> = (0..VALIDATION_TRIPLETS)
        .map(|i| Ok((format!("v{i:02}"), make_synthetic_triplet(64, 64, 1_000_000 + i, 4)?)))
        .collect::<Result<_, dan_core::Error>>()
        .map_err(|e| e.to_string())?;
    let val_dir = root.join("validation");
    if !val_dir.exists() {
        write_dataset(&val_dir, &val).map_err(|e| e.to_string())?;
    }
    let out = root.join(tag);
    let config = TrainConfig::default();
    let trained = train_epochs(&config, &train, &out, Some(STEPS), |_| {}).map_err(|e| e.to_string())?;
    if trained.trainer.steps != STEPS {
        return Err(format!("took {} steps", trained.trainer.steps));
    }
    let interp = Interpolator::load(&trained.final_checkpoint).map_err(|e| e.to_string())?;
    let report = eval_dataset(&interp, &val_dir).map_err(|e| e.to_string())?;
    let checkpoint = std::fs::read(&trained.final_checkpoint).map_err(|e| e.to_string())?;
    Ok(Run {
        report,
        checkpoint,
        took: start.elapsed(),
    })
}

fn learning(run: &Result<Run, String>) -> Line {
    let limit = Duration::from_secs(1800);
    let (pass, detail) = match run {
        Ok(r) => match r.report.mean() {
            Some((m, b)) if r.report.failures() == 0 => (
                m.psnr >= b.psnr + 1.0 && r.took < limit,
                format!(
                    "model {:.3} dB, average-of-inputs {:.3} dB, margin {:+.3} dB (want >= +1.0); time {} (limit {})",
                    m.psnr,
                    b.psnr,
                    m.psnr - b.psnr,
                    secs(r.took),
                    secs(limit)
                ),
            ),
            _ => (false, format!("{} validation triplets failed", r.report.failures())),
        },
        Err(e) => (false, format!("run failed: {e}")),
    };
    Line {
        id: 7,
        name: "desk-scale learning",
        pass,
        detail,
    }
}

/// The metric columns of the evaluation CSV, every column after the name.
fn metric_columns(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.split_once(',').map_or("", |(_, rest)| rest).to_string())
        .collect()
}

fn determinism(a: &Result<Run, String>, b: &Result<Run, String>) -> Line {
    let (pass, detail) = match (a, b) {
        (Ok(a), Ok(b)) => {
            let ckpt = a.checkpoint == b.checkpoint;
            let csv = metric_columns(&a.report.to_csv()) == metric_columns(&b.report.to_csv());
            (
                ckpt && csv,
                format!(
                    "checkpoints ({} bytes) identical: {ckpt}; CSV metric columns identical: {csv}",
                    a.checkpoint.len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => (false, format!("run failed: {e}")),
    };
    Line {
        id: 8,
        name: "determinism",
        pass,
        detail,
    }
}

fn persistence(dir: &Path) -> Line {
    let suite = suite_criterion(
        9,
        "persistence",
        &["roundtrip.checkpoint", "roundtrip.checkpoint_corruption_rejected"],
        Duration::from_secs(60),
    );
    let file = (|| -> Result<(bool, bool), String> {
        let mut store = ParamStore::<f32>::new();
        for (i, shape) in [&[4, 3, 3, 3][..], &[4], &[16, 8]].into_iter().enumerate() {
            store
                .add(format!("t{i}"), seeded_normal(shape, i as u64, 1.0).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        }
        let path = dir.join("persist.ckpt");
        save_checkpoint(&store, &path).map_err(|e| e.to_string())?;
        let back = load_checkpoint(&path).map_err(|e| e.to_string())?;
        let bitwise = store.len() == back.len()
            && store.iter().zip(back.iter()).all(|((_, a), (_, b))| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            });
        let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        let rejected = matches!(load_checkpoint(&path), Err(CheckpointError::Crc { .. }));
        Ok((bitwise, rejected))
    })();
    let (pass, detail) = match file {
        Ok((bitwise, rejected)) => (
            suite.pass && bitwise && rejected,
            format!("{}; file round trip bitwise: {bitwise}; flipped byte rejected by CRC: {rejected}", suite.detail),
        ),
        Err(e) => (false, format!("{}; file round trip failed: {e}", suite.detail)),
    };
    Line { pass, detail, ..suite }
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut lines = Vec::new();
    let mut emit = |l: Line| {
        print(&l);
        lines.push(l.pass);
    };
    emit(suite_criterion(
        1,
        "oracle equivalence",
        &["oracle.single_group_vs_dense_f32"],
        Duration::from_secs(10),
    ));
    emit(suite_criterion(
        2,
        "block-diagonal law",
        &["jacobian.long_range_off_block_zero"],
        Duration::from_secs(30),
    ));
    emit(suite_criterion(
        3,
        "full-coverage law",
        &["jacobian.dal_full_coverage"],
        Duration::from_secs(300),
    ));
    emit(scaling());
    emit(suite_criterion(
        5,
        "gradient correctness",
        &[
            "gradient.dal_forward",
            "gradient.srdn_forward",
            "gradient.blendnet_forward",
            "gradient.total_loss",
        ],
        Duration::from_secs(600),
    ));
    emit(suite_criterion(
        6,
        "loss/metric ground truths",
        &[
            "loss.zero_at_target",
            "metric.psnr_uniform_gap_one",
            "metric.ssim_identity",
            "metric.ie_uniform_gap_five",
        ],
        Duration::from_secs(60),
    ));
    let first = desk_run(dir.path(), "run_a");
    emit(learning(&first));
    let second = desk_run(dir.path(), "run_b");
    emit(determinism(&first, &second));
    emit(persistence(dir.path()));
    let failed = lines.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
