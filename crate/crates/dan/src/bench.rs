//! Multiply-add counts of the attention schemes as the position count grows.
//!
//! The attention-term exponent is fitted on the pairwise affinity and mixing
//! counts alone. The projection counts, `4·d·C` per position and stage, are
//! reported in their own column and left out of the fit.

use std::fmt::Write as _;
use std::time::Instant;

use dan_core::attention::{counted_forward, flops_estimate, scheme_groupings, AttentionWeights, MacCount, Scheme};
use dan_core::attention::choose_factorization;
use dan_core::rng::seeded_normal;
use dan_core::Tensor;

/// Largest position count the dense scheme is run at.
pub const DENSE_CAP: usize = 16384;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub scheme: Scheme,
    pub n: usize,
    pub channels: usize,
    pub k: usize,
    pub macs: MacCount,
    pub predicted: f64,
    /// Informational only.
    pub wall_ms: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("dense attention is capped at {DENSE_CAP} positions, got {0}")]
    DenseTooLarge(usize),
    #[error("{0} positions have no factorization into three groups larger than one")]
    Degenerate(usize),
    #[error(transparent)]
    Core(#[from] dan_core::Error),
}

pub fn bench_one(scheme: Scheme, n: usize, channels: usize, k: usize, seed: u64) -> Result<BenchRecord, BenchError> {
    if scheme == Scheme::Dense && n > DENSE_CAP {
        return Err(BenchError::DenseTooLarge(n));
    }
    if scheme == Scheme::Dal && choose_factorization(n)?.degenerate {
        return Err(BenchError::Degenerate(n));
    }
    let stages = scheme_groupings(scheme, n)?
        .into_iter()
        .enumerate()
        .map(|(i, g)| Ok((g, AttentionWeights::<f32>::seeded(channels, k, seed + 4 * i as u64 + 1)?)))
        .collect::<Result<Vec<_>, dan_core::Error>>()?;
    let x: Tensor<f32> = seeded_normal(&[channels, n], seed, 1.0)?;
    let mut macs = MacCount::default();
    let start = Instant::now();
    counted_forward(&x, &stages, &mut macs)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(BenchRecord {
        scheme,
        n,
        channels,
        k,
        macs,
        predicted: flops_estimate(1, n, channels, k, scheme)?,
        wall_ms,
    })
}

/// Least-squares slope of `ln(attention MACs)` against `ln(n)`.
pub fn fit_exponent(records: &[&BenchRecord]) -> Option<f64> {
    if records.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| ((r.n as f64).ln(), (r.macs.attention as f64).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Sizes skipped per scheme, with the reason.
    pub skipped: Vec<(Scheme, usize, String)>,
}

impl BenchReport {
    pub fn exponent(&self, scheme: Scheme) -> Option<f64> {
        let rs: Vec<_> = self.records.iter().filter(|r| r.scheme == scheme).collect();
        fit_exponent(&rs)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,n,channels,k,projection_macs,attention_macs,predicted_flops,wall_ms\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.3}",
                r.scheme, r.n, r.channels, r.k, r.macs.projection, r.macs.attention, r.predicted, r.wall_ms
            );
        }
        s
    }

    pub fn fit_csv(&self) -> String {
        let mut s = String::from("scheme,points,attention_exponent\n");
        for scheme in Scheme::ALL {
            let points = self.records.iter().filter(|r| r.scheme == scheme).count();
            if let Some(e) = self.exponent(scheme) {
                let _ = writeln!(s, "{scheme},{points},{e:.6}");
            }
        }
        s
    }
}

/// Runs every scheme at every size. Sizes a scheme cannot run at are
/// recorded as skipped rather than failing the whole benchmark.
pub fn bench_attention_scaling(
    schemes: &[Scheme],
    sizes: &[usize],
    channels: usize,
    k: usize,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    let mut report = BenchReport {
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for &scheme in schemes {
        for &n in sizes {
            match bench_one(scheme, n, channels, k, seed) {
                Ok(r) => report.records.push(r),
                Err(e @ (BenchError::DenseTooLarge(_) | BenchError::Degenerate(_))) => {
                    report.skipped.push((scheme, n, e.to_string()))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_closed_forms() {
        let (c, k) = (8, 2);
        let d = (c / k) as u64;
        let r = bench_one(Scheme::Dense, 64, c, k, 1).unwrap();
        assert_eq!(r.macs.attention, 2 * 64 * 64 * d);
        assert_eq!(r.macs.projection, 4 * d * c as u64 * 64);
        let r = bench_one(Scheme::Dal, 64, c, k, 1).unwrap();
        assert_eq!(r.macs.attention, 3 * 2 * 64 * 4 * d);
        let r = bench_one(Scheme::Interlaced, 64, c, k, 1).unwrap();
        assert_eq!(r.macs.attention, 2 * 2 * 64 * 8 * d);
    }

    #[test]
    fn dense_cap_and_degenerate_sizes_are_skipped() {
        let rep = bench_attention_scaling(&[Scheme::Dense, Scheme::Dal], &[32768, 7], 4, 2, 0).unwrap();
        assert!(rep.skipped.iter().any(|s| s.0 == Scheme::Dense && s.1 == 32768));
        assert!(rep.skipped.iter().any(|s| s.0 == Scheme::Dal && s.1 == 7));
    }

    #[test]
    fn counters_are_reproducible() {
        let a = bench_one(Scheme::Dal, 512, 4, 2, 3).unwrap();
        let b = bench_one(Scheme::Dal, 512, 4, 2, 3).unwrap();
        assert_eq!(a.macs, b.macs);
    }
}
