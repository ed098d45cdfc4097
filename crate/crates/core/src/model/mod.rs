//! The interpolation network: a siamese residual dense extractor, one
//! attention warp head per temporal direction and a blending network.

mod heads;
mod srdn;

pub use heads::{blendnet_forward, warp_head, BlendParams, WarpHeadParams};
pub use srdn::{rdb_forward, sfenet_forward, srdn_forward, RdbParams, SrdnParams};

use alloc::format;
use alloc::string::String;

use crate::attention::{AttentionConfig, DalPlan};
use crate::error::{Error, Result};
use crate::rng::{seeded_normal, CounterRng};
use crate::scalar::Scalar;
use crate::tape::{ParamId, ParamStore, Tape, Var};
use crate::tensor::{ConvSpec, Tensor};

/// Architecture hyperparameters. The attention factorization is derived
/// from the frame size at run time, so one parameter set serves any size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub channels: usize,
    pub rdb_count: usize,
    pub convs_per_rdb: usize,
    pub growth: usize,
    /// Channel reduction of the attention key dimension, `d = channels / reduction`.
    pub reduction: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 32,
            rdb_count: 4,
            convs_per_rdb: 4,
            growth: 16,
            reduction: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.rdb_count == 0 || self.convs_per_rdb == 0 || self.growth == 0 {
            return Err(Error::contract("model counts must be at least 1"));
        }
        if self.reduction == 0 || self.channels % self.reduction != 0 {
            return Err(Error::contract(format!(
                "channel reduction {} must divide channel count {}",
                self.reduction, self.channels
            )));
        }
        Ok(())
    }

    pub fn attention(&self, height: usize, width: usize) -> Result<AttentionConfig> {
        AttentionConfig::for_positions(self.channels, self.reduction, height * width)
    }
}

/// Weight and bias handles of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl ConvParams {
    /// Gaussian weights with standard deviation `gain / √fan_in`, zero bias.
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        shape: [usize; 4],
        gain: f64,
        seeds: &mut CounterRng,
    ) -> Result<Self> {
        let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
        let w = seeded_normal(&shape, seeds.next_u64(), gain / libm::sqrt(fan_in))?;
        Ok(ConvParams {
            weight: store.add(format!("{name}.weight"), w)?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[shape[0]]))?,
        })
    }

    pub fn find<T: Scalar>(store: &ParamStore<T>, name: &str) -> Result<Self> {
        Ok(ConvParams {
            weight: lookup(store, &format!("{name}.weight"))?,
            bias: lookup(store, &format!("{name}.bias"))?,
        })
    }

    /// Same-padded unit-stride convolution.
    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let k = tape.value(w).shape()[2];
        tape.conv2d(x, w, Some(b), ConvSpec::same(k))
    }
}

pub(crate) fn lookup<T: Scalar>(store: &ParamStore<T>, name: &str) -> Result<ParamId> {
    store
        .find(name)
        .ok_or_else(|| Error::contract(format!("parameter {name} is missing")))
}

/// He-style gain for layers followed by a ReLU.
pub(crate) const RELU_GAIN: f64 = core::f64::consts::SQRT_2;

/// All parameter handles of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct DanModel {
    pub config: ModelConfig,
    pub srdn: SrdnParams,
    pub heads: [WarpHeadParams; 2],
    pub blend: BlendParams,
}

/// Tape handles of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct DanOutput {
    pub frame: Var,
    pub warp0: Var,
    pub warp1: Var,
    pub f_fwd: Var,
    pub f_rev: Var,
    pub blend_weight: Var,
}

impl DanModel {
    /// Registers freshly initialized parameters in `store`.
    pub fn init<T: Scalar>(config: ModelConfig, seed: u64, store: &mut ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let mut seeds = CounterRng::new(seed);
        let srdn = SrdnParams::init(&config, store, &mut seeds)?;
        let heads = [
            WarpHeadParams::init(&config, "warp0", store, &mut seeds)?,
            WarpHeadParams::init(&config, "warp1", store, &mut seeds)?,
        ];
        let blend = BlendParams::init(store, &mut seeds)?;
        Ok(DanModel {
            config,
            srdn,
            heads,
            blend,
        })
    }

    /// Recovers the handles and the architecture from parameter names and
    /// shapes, e.g. after loading a checkpoint.
    pub fn from_store<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let shape = |name: &str| -> Result<alloc::vec::Vec<usize>> {
            Ok(store.get(lookup(store, name)?).value.shape().to_vec())
        };
        let channels = shape("srdn.sfe1.weight")?[0];
        let growth = shape("srdn.rdb0.conv0.weight")?[0];
        let rdb_count = (0..)
            .take_while(|i| store.find(&format!("srdn.rdb{i}.fusion.weight")).is_some())
            .count();
        let convs_per_rdb = (0..)
            .take_while(|g| store.find(&format!("srdn.rdb0.conv{g}.weight")).is_some())
            .count();
        let d = shape("warp0.ll.wf")?[0];
        if d == 0 || channels % d != 0 {
            return Err(Error::contract("attention key dimension must divide the channel count"));
        }
        let config = ModelConfig {
            channels,
            rdb_count,
            convs_per_rdb,
            growth,
            reduction: channels / d,
        };
        config.validate()?;
        Ok(DanModel {
            config,
            srdn: SrdnParams::find(&config, store)?,
            heads: [WarpHeadParams::find(store, "warp0")?, WarpHeadParams::find(store, "warp1")?],
            blend: BlendParams::find(store)?,
        })
    }

    /// `prev, next: [1, H, W]` frames in `[0, 1]`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        prev: Var,
        next: Var,
    ) -> Result<DanOutput> {
        let shape = tape.value(prev).shape().to_vec();
        let (h, w) = match shape[..] {
            [1, h, w] => (h, w),
            _ => return Err(Error::dim("dan_forward", &shape, &[1])),
        };
        let plan = DalPlan::new(&self.config.attention(h, w)?)?;
        let (f_fwd, f_rev) = srdn_forward(tape, store, &self.srdn, prev, next)?;
        let warp0 = warp_head(tape, store, &self.heads[0], &plan, f_fwd)?;
        let warp1 = warp_head(tape, store, &self.heads[1], &plan, f_rev)?;
        let (frame, blend_weight) = blendnet_forward(tape, store, &self.blend, warp0, warp1)?;
        Ok(DanOutput {
            frame,
            warp0,
            warp1,
            f_fwd,
            f_rev,
            blend_weight,
        })
    }

    /// Forward pass on plain tensors, returning the interpolated frame.
    pub fn interpolate<T: Scalar>(&self, store: &ParamStore<T>, prev: &Tensor<T>, next: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let a = tape.input(prev.clone(), false)?;
        let b = tape.input(next.clone(), false)?;
        let out = self.forward(&mut tape, store, a, b)?;
        Ok(tape.value(out.frame).clone())
    }
}

/// Parameter names in registration order, for reports.
pub fn parameter_names<T: Scalar>(store: &ParamStore<T>) -> alloc::vec::Vec<String> {
    store.iter().map(|(_, p)| p.name.clone()).collect()
}
