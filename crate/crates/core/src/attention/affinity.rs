use alloc::vec::Vec;

use super::grouping::Grouping;
use super::layer::{dal_forward_taped, AttentionWeights, DalPlan, StageVars};
use super::AttentionConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Largest position count [`effective_affinity`] will densify.
pub const VERIFICATION_BOUND: usize = 4096;

/// Dense `N×N` affinities of the three stages evaluated at one input.
///
/// Entry `(i, j)` is the weight of input position `i` in output position `j`,
/// so a stage maps `Z ↦ W_v W_h Z M` and the layer output is
/// `(W_v3 W_h3 W_v2 W_h2 W_v1 W_h1) X · M1 M2 M3`.
#[derive(Clone, Debug)]
pub struct EffectiveAffinity<T = f32> {
    pub stages: [Tensor<T>; 3],
    pub product: Tensor<T>,
}

/// Scatters per-group affinities `[parts, q, q]` into an `N×N` matrix.
pub fn stage_matrix<T: Scalar>(grouping: &Grouping, blocks: &Tensor<T>) -> Result<Tensor<T>> {
    let (parts, q, q2) = blocks.dims3("stage_matrix")?;
    if parts != grouping.parts || q != grouping.group_size || q != q2 {
        return Err(Error::dim("stage_matrix", &[grouping.parts, grouping.group_size], blocks.shape()));
    }
    let n = grouping.positions();
    let mut m = Tensor::zeros(&[n, n]);
    let a = blocks.data();
    for (p, members) in grouping.groups().enumerate() {
        for (i, &pi) in members.iter().enumerate() {
            for (j, &pj) in members.iter().enumerate() {
                m.data_mut()[pi * n + pj] = a[(p * q + i) * q + j];
            }
        }
    }
    Ok(m)
}

/// `left · M` where `M` has the block structure of `grouping`.
fn times_stage<T: Scalar>(left: &Tensor<T>, grouping: &Grouping, blocks: &Tensor<T>) -> Tensor<T> {
    let n = grouping.positions();
    let q = grouping.group_size;
    let a = blocks.data();
    let l = left.data();
    let mut out = Tensor::zeros(&[n, n]);
    let o = out.data_mut();
    for (p, members) in grouping.groups().enumerate() {
        for r in 0..n {
            let lrow = &l[r * n..(r + 1) * n];
            for (j, &pj) in members.iter().enumerate() {
                let mut acc = T::zero();
                for (i, &pi) in members.iter().enumerate() {
                    acc += lrow[pi] * a[(p * q + i) * q + j];
                }
                o[r * n + pj] = acc;
            }
        }
    }
    out
}

pub fn effective_affinity<T: Scalar>(
    x: &Tensor<T>,
    config: &AttentionConfig,
    weights: [&AttentionWeights<T>; 3],
) -> Result<EffectiveAffinity<T>> {
    effective_affinity_bounded(x, config, weights, VERIFICATION_BOUND)
}

pub fn effective_affinity_bounded<T: Scalar>(
    x: &Tensor<T>,
    config: &AttentionConfig,
    weights: [&AttentionWeights<T>; 3],
    bound: usize,
) -> Result<EffectiveAffinity<T>> {
    if config.n > bound {
        return Err(Error::VerificationSize { n: config.n, bound });
    }
    let plan = DalPlan::new(config)?;
    let mut tape = Tape::new();
    let xv = tape.input(x.clone(), false)?;
    let ws = [
        StageVars::constants(&mut tape, weights[0])?,
        StageVars::constants(&mut tape, weights[1])?,
        StageVars::constants(&mut tape, weights[2])?,
    ];
    let trace = dal_forward_taped(&mut tape, xv, &plan, &ws)?;
    let blocks: Vec<&Tensor<T>> = trace.affinities.iter().map(|&a| tape.value(a)).collect();
    let stages = [
        stage_matrix(&plan.stages[0], blocks[0])?,
        stage_matrix(&plan.stages[1], blocks[1])?,
        stage_matrix(&plan.stages[2], blocks[2])?,
    ];
    let m12 = times_stage(&stages[0], &plan.stages[1], blocks[1]);
    let product = times_stage(&m12, &plan.stages[2], blocks[2]);
    Ok(EffectiveAffinity { stages, product })
}
