//! Grouped self-attention over the columns of a `[C, N]` feature matrix,
//! and the three-stage long/short-range layer built from it.
//!
//! Every stage projects its input with `W_f, W_g, W_h: [d, C]`, forms the
//! per-group affinity `softmax_i((W_f x_i)ᵀ(W_g x_j) / √d)` and mixes the
//! values `W_h x_i` with it before projecting back with `W_v: [C, d]`.

mod affinity;
mod counting;
mod grouping;
mod layer;
mod permutation;

pub use affinity::{effective_affinity, effective_affinity_bounded, stage_matrix, EffectiveAffinity, VERIFICATION_BOUND};
pub use counting::{counted_forward, counted_stage, MacCount};
pub use grouping::{GroupMode, Grouping};
pub use layer::{
    block_attention, dal_forward, dal_forward_taped, dense_self_attention, grouped_attention,
    grouped_attention_taped, grouped_attention_with_map, AttentionWeights, DalPlan, DalTrace, StageParams,
    StageVars,
};
pub use permutation::{apply_permutation, interlace_permutation, Permutation};

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Shape parameters of one three-stage attention layer.
///
/// `n = p·q` and `q = pp·qp`; the stage group sizes are `qp`, `pp` and `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionConfig {
    pub channels: usize,
    pub reduction: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub pp: usize,
    pub qp: usize,
}

impl AttentionConfig {
    pub fn new(channels: usize, reduction: usize, n: usize, p: usize, pp: usize) -> Result<Self> {
        check_channels(channels, reduction)?;
        if p == 0 || n == 0 || n % p != 0 {
            return Err(Error::Factorization { n, parts: p });
        }
        let q = n / p;
        if pp == 0 || q % pp != 0 {
            return Err(Error::Factorization { n: q, parts: pp });
        }
        Ok(AttentionConfig {
            channels,
            reduction,
            n,
            p,
            q,
            pp,
            qp: q / pp,
        })
    }

    /// Uses [`choose_factorization`] for `n`.
    pub fn for_positions(channels: usize, reduction: usize, n: usize) -> Result<Self> {
        let f = choose_factorization(n)?;
        Self::new(channels, reduction, n, f.p, f.pp)
    }

    pub fn key_dim(&self) -> usize {
        self.channels / self.reduction
    }
}

fn check_channels(channels: usize, reduction: usize) -> Result<()> {
    if channels == 0 || reduction == 0 || channels % reduction != 0 {
        return Err(Error::contract(alloc::format!(
            "channel reduction {reduction} must divide channel count {channels}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub p: usize,
    pub q: usize,
    pub pp: usize,
    pub qp: usize,
    /// Some group size is 1, so a stage does no mixing.
    pub degenerate: bool,
}

/// Picks `n = p·pp·qp` minimizing the largest group size, then the sum of
/// group sizes, then preferring `p ≤ pp ≤ qp`, then the smallest `(p, pp)`.
pub fn choose_factorization(n: usize) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Factorization { n, parts: 0 });
    }
    let mut best: Option<((usize, usize, bool, usize, usize), Factorization)> = None;
    for p in (1..=n).filter(|p| n % p == 0) {
        let q = n / p;
        for pp in (1..=q).filter(|pp| q % pp == 0) {
            let qp = q / pp;
            let key = (p.max(pp).max(qp), p + pp + qp, !(p <= pp && pp <= qp), p, pp);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                let degenerate = n > 1 && (p == 1 || pp == 1 || qp == 1);
                best = Some((key, Factorization { p, q, pp, qp, degenerate }));
            }
        }
    }
    Ok(best.expect("n ≥ 1 has the trivial factorization").1)
}

/// The `(p, q)` split with `p ≤ q` closest to `√n`, used by the two-stage
/// interlaced scheme.
pub fn choose_interlace_split(n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::Factorization { n, parts: 0 });
    }
    let p = (1..=n).filter(|p| n % p == 0 && p * p <= n).max().unwrap_or(1);
    Ok((p, n / p))
}

/// Stage groupings of each scheme on `n` positions: one dense group; a
/// long-range stage with `p` parts then short-range blocks of `p`; or the
/// three stages of [`DalPlan`].
pub fn scheme_groupings(scheme: Scheme, n: usize) -> Result<alloc::vec::Vec<Grouping>> {
    Ok(match scheme {
        Scheme::Dense => alloc::vec![Grouping::dense(n)?],
        Scheme::Interlaced => {
            let (p, _) = choose_interlace_split(n)?;
            alloc::vec![Grouping::long_range(n, p)?, Grouping::short_range(n, p)?]
        }
        Scheme::Dal => {
            let f = choose_factorization(n)?;
            let cfg = AttentionConfig::new(1, 1, n, f.p, f.pp)?;
            DalPlan::new(&cfg)?.stages.to_vec()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Dense,
    Interlaced,
    Dal,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dense, Scheme::Interlaced, Scheme::Dal];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dense => "dense",
            Scheme::Interlaced => "interlaced",
            Scheme::Dal => "dal",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::contract(alloc::format!("unknown attention scheme {s}")))
    }
}

/// Analytic cost of one attention layer split into the projection term and
/// the pairwise affinity term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlopBreakdown {
    pub projection: f64,
    pub attention: f64,
}

impl FlopBreakdown {
    pub fn total(&self) -> f64 {
        self.projection + self.attention
    }
}

pub fn flops_breakdown(h: usize, w: usize, c: usize, k: usize, scheme: Scheme) -> Result<FlopBreakdown> {
    check_channels(c, k)?;
    if h == 0 || w == 0 {
        return Err(Error::contract("image extent must be positive"));
    }
    let n = (h * w) as f64;
    let (c, k) = (c as f64, k as f64);
    let (proj, pair) = match scheme {
        Scheme::Dense => (4.0, 2.0 * n * n),
        Scheme::Interlaced => (4.0, 3.0 * n * libm::sqrt(n)),
        Scheme::Dal => (12.0, 6.0 * n * libm::cbrt(n)),
    };
    Ok(FlopBreakdown {
        projection: proj * n * c * c / k,
        attention: pair * c / k,
    })
}

/// Total of [`flops_breakdown`].
pub fn flops_estimate(h: usize, w: usize, c: usize, k: usize, scheme: Scheme) -> Result<f64> {
    flops_breakdown(h, w, c, k, scheme).map(|b| b.total())
}
