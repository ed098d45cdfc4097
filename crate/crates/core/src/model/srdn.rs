use alloc::format;
use alloc::vec::Vec;

use super::{ConvParams, ModelConfig, RELU_GAIN};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::tape::{ParamStore, Tape, Var};

/// One residual dense block: `convs_per_rdb` densely connected 3×3 convs
/// and a 1×1 local fusion back to `channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct RdbParams {
    pub convs: Vec<ConvParams>,
    pub fusion: ConvParams,
}

/// Shallow extraction, residual dense blocks and dense feature fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct SrdnParams {
    pub sfe1: ConvParams,
    pub sfe2: ConvParams,
    pub rdbs: Vec<RdbParams>,
    pub gff1: ConvParams,
    pub gff2: ConvParams,
}

impl SrdnParams {
    pub fn init<T: Scalar>(cfg: &ModelConfig, store: &mut ParamStore<T>, seeds: &mut CounterRng) -> Result<Self> {
        let c = cfg.channels;
        let sfe1 = ConvParams::init(store, "srdn.sfe1", [c, 2, 3, 3], 1.0, seeds)?;
        let sfe2 = ConvParams::init(store, "srdn.sfe2", [c, c, 3, 3], 1.0, seeds)?;
        let mut rdbs = Vec::with_capacity(cfg.rdb_count);
        for i in 0..cfg.rdb_count {
            let mut convs = Vec::with_capacity(cfg.convs_per_rdb);
            for g in 0..cfg.convs_per_rdb {
                let cin = c + g * cfg.growth;
                convs.push(ConvParams::init(
                    store,
                    &format!("srdn.rdb{i}.conv{g}"),
                    [cfg.growth, cin, 3, 3],
                    RELU_GAIN,
                    seeds,
                )?);
            }
            let wide = c + cfg.convs_per_rdb * cfg.growth;
            // small fusion keeps every block close to identity at the start
            let fusion = ConvParams::init(store, &format!("srdn.rdb{i}.fusion"), [c, wide, 1, 1], 0.1, seeds)?;
            rdbs.push(RdbParams { convs, fusion });
        }
        let gff1 = ConvParams::init(store, "srdn.gff1", [c, c * cfg.rdb_count, 1, 1], 1.0, seeds)?;
        let gff2 = ConvParams::init(store, "srdn.gff2", [c, c, 3, 3], 1.0, seeds)?;
        Ok(SrdnParams {
            sfe1,
            sfe2,
            rdbs,
            gff1,
            gff2,
        })
    }

    pub fn find<T: Scalar>(cfg: &ModelConfig, store: &ParamStore<T>) -> Result<Self> {
        let rdbs = (0..cfg.rdb_count)
            .map(|i| {
                Ok(RdbParams {
                    convs: (0..cfg.convs_per_rdb)
                        .map(|g| ConvParams::find(store, &format!("srdn.rdb{i}.conv{g}")))
                        .collect::<Result<_>>()?,
                    fusion: ConvParams::find(store, &format!("srdn.rdb{i}.fusion"))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SrdnParams {
            sfe1: ConvParams::find(store, "srdn.sfe1")?,
            sfe2: ConvParams::find(store, "srdn.sfe2")?,
            rdbs,
            gff1: ConvParams::find(store, "srdn.gff1")?,
            gff2: ConvParams::find(store, "srdn.gff2")?,
        })
    }
}

/// Two 3×3 convolutions over the stacked pair `[2, H, W]`. Returns the first
/// layer's output (kept for the global residual) and the second's.
pub fn sfenet_forward<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &SrdnParams,
    pair: Var,
) -> Result<(Var, Var)> {
    let f_m1 = p.sfe1.apply(tape, store, pair)?;
    let f0 = p.sfe2.apply(tape, store, f_m1)?;
    Ok((f_m1, f0))
}

pub fn rdb_forward<T: Scalar>(tape: &mut Tape<T>, store: &ParamStore<T>, p: &RdbParams, x: Var) -> Result<Var> {
    let mut stack = Vec::with_capacity(p.convs.len() + 1);
    stack.push(x);
    for conv in &p.convs {
        let input = if stack.len() == 1 { x } else { tape.concat(&stack)? };
        let y = conv.apply(tape, store, input)?;
        let y = tape.relu(y)?;
        stack.push(y);
    }
    let all = tape.concat(&stack)?;
    let fused = p.fusion.apply(tape, store, all)?;
    tape.add(x, fused)
}

fn extract<T: Scalar>(tape: &mut Tape<T>, store: &ParamStore<T>, p: &SrdnParams, pair: Var) -> Result<Var> {
    let (f_m1, f0) = sfenet_forward(tape, store, p, pair)?;
    let mut f = f0;
    let mut outs = Vec::with_capacity(p.rdbs.len());
    for rdb in &p.rdbs {
        f = rdb_forward(tape, store, rdb, f)?;
        outs.push(f);
    }
    let cat = if outs.len() == 1 { outs[0] } else { tape.concat(&outs)? };
    let g = p.gff1.apply(tape, store, cat)?;
    let g = p.gff2.apply(tape, store, g)?;
    tape.add(g, f_m1)
}

/// The same extractor applied to `[a; b]` and `[b; a]`.
pub fn srdn_forward<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &SrdnParams,
    a: Var,
    b: Var,
) -> Result<(Var, Var)> {
    if tape.value(a).shape() != tape.value(b).shape() {
        return Err(Error::dim("srdn_forward", tape.value(a).shape(), tape.value(b).shape()));
    }
    let ab = tape.concat(&[a, b])?;
    let ba = tape.concat(&[b, a])?;
    let fwd = extract(tape, store, p, ab)?;
    let rev = extract(tape, store, p, ba)?;
    Ok((fwd, rev))
}
