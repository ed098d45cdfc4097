use alloc::format;
use alloc::string::String;

use super::grouping::Grouping;
use super::permutation::{interlace_permutation, Permutation};
use super::AttentionConfig;
use crate::error::{Error, Result};
use crate::rng::seeded_normal;
use crate::scalar::Scalar;
use crate::tape::{ParamId, ParamStore, Tape, Var};
use crate::tensor::Tensor;

/// Projection matrices of one attention stage.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights<T = f32> {
    pub wf: Tensor<T>,
    pub wg: Tensor<T>,
    pub wh: Tensor<T>,
    pub wv: Tensor<T>,
}

impl<T: Scalar> AttentionWeights<T> {
    pub fn new(wf: Tensor<T>, wg: Tensor<T>, wh: Tensor<T>, wv: Tensor<T>) -> Result<Self> {
        let (d, c) = wf.dims2("attention weights")?;
        for w in [&wg, &wh] {
            if w.shape() != [d, c] {
                return Err(Error::dim("attention weights", wf.shape(), w.shape()));
            }
        }
        if wv.shape() != [c, d] {
            return Err(Error::dim("attention weights", &[c, d], wv.shape()));
        }
        Ok(AttentionWeights { wf, wg, wh, wv })
    }

    /// Gaussian initialization: the `[d, C]` projections with standard
    /// deviation `1/√C`, the output projection with `1/√d`.
    pub fn seeded(channels: usize, reduction: usize, seed: u64) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(Error::contract(format!(
                "channel reduction {reduction} must divide channel count {channels}"
            )));
        }
        let d = channels / reduction;
        let sc = 1.0 / libm::sqrt(channels as f64);
        let sd = 1.0 / libm::sqrt(d as f64);
        Self::new(
            seeded_normal(&[d, channels], seed, sc)?,
            seeded_normal(&[d, channels], seed.wrapping_add(1), sc)?,
            seeded_normal(&[d, channels], seed.wrapping_add(2), sc)?,
            seeded_normal(&[channels, d], seed.wrapping_add(3), sd)?,
        )
    }

    pub fn channels(&self) -> usize {
        self.wf.shape()[1]
    }

    pub fn key_dim(&self) -> usize {
        self.wf.shape()[0]
    }

    /// Adds the four matrices to `store` as `{prefix}.wf` and so on.
    pub fn register(&self, store: &mut ParamStore<T>, prefix: &str) -> Result<StageParams> {
        let name = |s: &str| -> String { format!("{prefix}.{s}") };
        Ok(StageParams {
            wf: store.add(name("wf"), self.wf.clone())?,
            wg: store.add(name("wg"), self.wg.clone())?,
            wh: store.add(name("wh"), self.wh.clone())?,
            wv: store.add(name("wv"), self.wv.clone())?,
        })
    }

    pub fn from_store(store: &ParamStore<T>, ids: &StageParams) -> Result<Self> {
        Self::new(
            store.get(ids.wf).value.clone(),
            store.get(ids.wg).value.clone(),
            store.get(ids.wh).value.clone(),
            store.get(ids.wv).value.clone(),
        )
    }
}

/// Parameter handles of one stage inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageParams {
    pub wf: ParamId,
    pub wg: ParamId,
    pub wh: ParamId,
    pub wv: ParamId,
}

/// Tape handles of one stage's weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageVars {
    pub wf: Var,
    pub wg: Var,
    pub wh: Var,
    pub wv: Var,
}

impl StageVars {
    pub fn params<T: Scalar>(tape: &mut Tape<T>, store: &ParamStore<T>, ids: &StageParams) -> Self {
        StageVars {
            wf: tape.param(store, ids.wf),
            wg: tape.param(store, ids.wg),
            wh: tape.param(store, ids.wh),
            wv: tape.param(store, ids.wv),
        }
    }

    pub fn constants<T: Scalar>(tape: &mut Tape<T>, w: &AttentionWeights<T>) -> Result<Self> {
        Ok(StageVars {
            wf: tape.constant(w.wf.clone())?,
            wg: tape.constant(w.wg.clone())?,
            wh: tape.constant(w.wh.clone())?,
            wv: tape.constant(w.wv.clone())?,
        })
    }
}

/// One grouped attention stage on the tape. Returns the output `[C, N]` and
/// the per-group affinities `[parts, q, q]`, indexed in the grouping's order.
pub fn grouped_attention_taped<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    grouping: &Grouping,
    w: &StageVars,
) -> Result<(Var, Var)> {
    let n = tape.value(x).dims2("grouped_attention")?.1;
    if grouping.positions() != n {
        return Err(Error::Factorization {
            n,
            parts: grouping.parts,
        });
    }
    let d = tape.value(w.wf).shape()[0];
    let permuted = !grouping.perm.is_identity();
    let xg = if permuted {
        tape.gather_cols(x, grouping.perm.forward())?
    } else {
        x
    };
    let f = tape.matmul(w.wf, xg)?;
    let g = tape.matmul(w.wg, xg)?;
    let h = tape.matmul(w.wh, xg)?;
    let s = tape.group_scores(f, g, grouping.parts, 1.0 / libm::sqrt(d as f64))?;
    let a = tape.softmax_cols(s)?;
    let y = tape.group_mix(h, a)?;
    let z = tape.matmul(w.wv, y)?;
    let out = if permuted {
        tape.gather_cols(z, grouping.perm.inverse())?
    } else {
        z
    };
    Ok((out, a))
}

/// The three stage groupings of the long/short-range layer, each expressed
/// on the original position order.
#[derive(Clone, Debug, PartialEq)]
pub struct DalPlan {
    pub config: AttentionConfig,
    /// Level-1 interlacing by `p`: slice `s` holds positions `≡ s (mod p)`.
    pub level_one: Permutation,
    /// Inner long-range, inner short-range, outer short-range.
    pub stages: [Grouping; 3],
}

impl DalPlan {
    pub fn new(config: &AttentionConfig) -> Result<Self> {
        let AttentionConfig { n, p, q, pp, .. } = *config;
        let level_one = interlace_permutation(n, p)?;
        let inner_long = Grouping::long_range_within(n, q, pp)?.after(&level_one)?;
        let inner_short = Grouping::short_range(n, pp)?.after(&level_one)?;
        let outer_short = Grouping::short_range(n, p)?;
        Ok(DalPlan {
            config: *config,
            level_one,
            stages: [inner_long, inner_short, outer_short],
        })
    }
}

/// Output of [`dal_forward_taped`] with the affinity of every stage.
#[derive(Clone, Copy, Debug)]
pub struct DalTrace {
    pub out: Var,
    pub affinities: [Var; 3],
}

pub fn dal_forward_taped<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    plan: &DalPlan,
    w: &[StageVars; 3],
) -> Result<DalTrace> {
    let (c, n) = tape.value(x).dims2("dal_forward")?;
    if c != plan.config.channels || n != plan.config.n {
        return Err(Error::dim("dal_forward", &[plan.config.channels, plan.config.n], &[c, n]));
    }
    let (z1, a1) = grouped_attention_taped(tape, x, &plan.stages[0], &w[0])?;
    let (z2, a2) = grouped_attention_taped(tape, z1, &plan.stages[1], &w[1])?;
    let (z3, a3) = grouped_attention_taped(tape, z2, &plan.stages[2], &w[2])?;
    Ok(DalTrace {
        out: z3,
        affinities: [a1, a2, a3],
    })
}

fn check_weights<T: Scalar>(x: &Tensor<T>, w: &AttentionWeights<T>, op: &'static str) -> Result<()> {
    let (c, _) = x.dims2(op)?;
    if w.channels() != c {
        return Err(Error::dim(op, x.shape(), w.wf.shape()));
    }
    Ok(())
}

/// [`grouped_attention`] that also returns the per-group affinities.
pub fn grouped_attention_with_map<T: Scalar>(
    x: &Tensor<T>,
    grouping: &Grouping,
    w: &AttentionWeights<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check_weights(x, w, "grouped_attention")?;
    let mut tape = Tape::new();
    let xv = tape.input(x.clone(), false)?;
    let wv = StageVars::constants(&mut tape, w)?;
    let (out, a) = grouped_attention_taped(&mut tape, xv, grouping, &wv)?;
    Ok((tape.value(out).clone(), tape.value(a).clone()))
}

pub fn grouped_attention<T: Scalar>(x: &Tensor<T>, grouping: &Grouping, w: &AttentionWeights<T>) -> Result<Tensor<T>> {
    grouped_attention_with_map(x, grouping, w).map(|(z, _)| z)
}

/// Attention within one group: every column attends to every column.
pub fn block_attention<T: Scalar>(x_p: &Tensor<T>, w: &AttentionWeights<T>) -> Result<Tensor<T>> {
    dense_self_attention(x_p, w)
}

/// Single-group attention over all positions.
pub fn dense_self_attention<T: Scalar>(x: &Tensor<T>, w: &AttentionWeights<T>) -> Result<Tensor<T>> {
    let (_, n) = x.dims2("dense_self_attention")?;
    grouped_attention(x, &Grouping::dense(n)?, w)
}

/// Inner long-range, inner short-range and outer short-range attention in
/// sequence, each stage with its own weights.
pub fn dal_forward<T: Scalar>(
    x: &Tensor<T>,
    config: &AttentionConfig,
    w_ll: &AttentionWeights<T>,
    w_ls: &AttentionWeights<T>,
    w_s: &AttentionWeights<T>,
) -> Result<Tensor<T>> {
    for w in [w_ll, w_ls, w_s] {
        check_weights(x, w, "dal_forward")?;
        if w.key_dim() != config.key_dim() {
            return Err(Error::dim("dal_forward", &[config.key_dim()], &[w.key_dim()]));
        }
    }
    let plan = DalPlan::new(config)?;
    let mut tape = Tape::new();
    let xv = tape.input(x.clone(), false)?;
    let ws = [
        StageVars::constants(&mut tape, w_ll)?,
        StageVars::constants(&mut tape, w_ls)?,
        StageVars::constants(&mut tape, w_s)?,
    ];
    let trace = dal_forward_taped(&mut tape, xv, &plan, &ws)?;
    Ok(tape.value(trace.out).clone())
}
