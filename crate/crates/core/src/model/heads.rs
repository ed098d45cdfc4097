use alloc::format;

use super::{ConvParams, ModelConfig, RELU_GAIN};
use crate::attention::{dal_forward_taped, AttentionWeights, DalPlan, StageParams, StageVars};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::tape::{ParamStore, Tape, Var};

const STAGE_NAMES: [&str; 3] = ["ll", "ls", "s"];

/// Three attention stages and the 1×1 projection to one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpHeadParams {
    pub stages: [StageParams; 3],
    pub proj: ConvParams,
}

impl WarpHeadParams {
    pub fn init<T: Scalar>(
        cfg: &ModelConfig,
        prefix: &str,
        store: &mut ParamStore<T>,
        seeds: &mut CounterRng,
    ) -> Result<Self> {
        let mut stage = |name: &str| -> Result<StageParams> {
            AttentionWeights::<T>::seeded(cfg.channels, cfg.reduction, seeds.next_u64())?
                .register(store, &format!("{prefix}.{name}"))
        };
        let stages = [stage(STAGE_NAMES[0])?, stage(STAGE_NAMES[1])?, stage(STAGE_NAMES[2])?];
        let proj = ConvParams::init(store, &format!("{prefix}.proj"), [1, cfg.channels, 1, 1], 1.0, seeds)?;
        Ok(WarpHeadParams { stages, proj })
    }

    pub fn find<T: Scalar>(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let stage = |name: &str| -> Result<StageParams> {
            let id = |m: &str| super::lookup(store, &format!("{prefix}.{name}.{m}"));
            Ok(StageParams {
                wf: id("wf")?,
                wg: id("wg")?,
                wh: id("wh")?,
                wv: id("wv")?,
            })
        };
        Ok(WarpHeadParams {
            stages: [stage(STAGE_NAMES[0])?, stage(STAGE_NAMES[1])?, stage(STAGE_NAMES[2])?],
            proj: ConvParams::find(store, &format!("{prefix}.proj"))?,
        })
    }
}

/// Features `[C, H, W]` → attention over the `H·W` positions → 1×1
/// projection → sigmoid, giving a `[1, H, W]` frame in `[0, 1]`.
pub fn warp_head<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &WarpHeadParams,
    plan: &DalPlan,
    f: Var,
) -> Result<Var> {
    let shape = tape.value(f).shape().to_vec();
    let (c, h, w) = match shape[..] {
        [c, h, w] => (c, h, w),
        _ => return Err(Error::dim("warp_head", &shape, &[plan.config.channels, plan.config.n])),
    };
    if h * w != plan.config.n {
        return Err(Error::Factorization {
            n: h * w,
            parts: plan.config.p,
        });
    }
    let flat = tape.reshape(f, &[c, h * w])?;
    let ws = [0, 1, 2].map(|i| StageVars::params(tape, store, &p.stages[i]));
    let z = dal_forward_taped(tape, flat, plan, &ws)?.out;
    let z = tape.reshape(z, &[c, h, w])?;
    let y = p.proj.apply(tape, store, z)?;
    tape.sigmoid(y)
}

/// Three 3×3 convolutions on `[warp0; warp1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendParams {
    pub convs: [ConvParams; 3],
}

pub(crate) const BLEND_WIDTH: usize = 16;

impl BlendParams {
    pub fn init<T: Scalar>(store: &mut ParamStore<T>, seeds: &mut CounterRng) -> Result<Self> {
        let w = BLEND_WIDTH;
        Ok(BlendParams {
            convs: [
                ConvParams::init(store, "blend.conv0", [w, 2, 3, 3], RELU_GAIN, seeds)?,
                ConvParams::init(store, "blend.conv1", [w, w, 3, 3], RELU_GAIN, seeds)?,
                ConvParams::init(store, "blend.conv2", [1, w, 3, 3], 1.0, seeds)?,
            ],
        })
    }

    pub fn find<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        Ok(BlendParams {
            convs: [
                ConvParams::find(store, "blend.conv0")?,
                ConvParams::find(store, "blend.conv1")?,
                ConvParams::find(store, "blend.conv2")?,
            ],
        })
    }
}

/// Per-pixel convex combination `w⊙warp0 + (1−w)⊙warp1` with
/// `w = sigmoid(conv stack)`. Returns the blended frame and `w`.
pub fn blendnet_forward<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &BlendParams,
    warp0: Var,
    warp1: Var,
) -> Result<(Var, Var)> {
    if tape.value(warp0).shape() != tape.value(warp1).shape() {
        return Err(Error::dim("blendnet_forward", tape.value(warp0).shape(), tape.value(warp1).shape()));
    }
    let x = tape.concat(&[warp0, warp1])?;
    let h = p.convs[0].apply(tape, store, x)?;
    let h = tape.relu(h)?;
    let h = p.convs[1].apply(tape, store, h)?;
    let h = tape.relu(h)?;
    let logits = p.convs[2].apply(tape, store, h)?;
    let w = tape.sigmoid(logits)?;
    let diff = tape.sub(warp0, warp1)?;
    let mix = tape.mul(w, diff)?;
    let frame = tape.add(warp1, mix)?;
    Ok((frame, w))
}
