//! Self-checks of the numerical core, reported one JSON object per check.

use std::io::Write;

use serde::Serialize;

use dan_core::attention::{
    choose_factorization, counted_forward, dal_forward, dal_forward_taped, dense_self_attention, effective_affinity,
    grouped_attention, grouped_attention_with_map, AttentionConfig, AttentionWeights, DalPlan, Grouping, MacCount,
    StageVars,
};
use dan_core::gradcheck::{finite_diff_grad, relative_error};
use dan_core::image::ImageU8;
use dan_core::losses::{evaluate_loss, total_loss, LossWeights, PerceptualStack};
use dan_core::metrics::{interp_error, psnr, ssim};
use dan_core::model::{blendnet_forward, srdn_forward, BlendParams, ModelConfig, SrdnParams};
use dan_core::rng::{seeded_normal, seeded_uniform, CounterRng};
use dan_core::{ParamStore, Tape, Tensor, Var};

use crate::checkpoint::{decode, encode, CheckpointError};
use crate::pgm::{read_pgm, write_pgm};

/// Which way the reference softmax normalizes a group's logits. Columns is
/// correct: every output position's weights over the inputs sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoftmaxAxis {
    Columns,
    Rows,
}

/// Per-group affinities `[parts, q, q]`, entry `[g, i, j]` being the weight
/// of member `i` in output `j`, computed with plain loops.
pub fn reference_affinity(
    x: &Tensor<f64>,
    grouping: &Grouping,
    w: &AttentionWeights<f64>,
    axis: SoftmaxAxis,
) -> dan_core::Result<Tensor<f64>> {
    let (c, n) = x.dims2("reference_affinity")?;
    if grouping.positions() != n || w.channels() != c {
        return Err(dan_core::Error::Dimension {
            op: "reference_affinity",
            left: vec![c, n],
            right: vec![w.channels(), grouping.positions()],
        });
    }
    let d = w.key_dim();
    let q = grouping.group_size;
    let proj = |m: &Tensor<f64>, r: usize, pos: usize| (0..c).map(|k| m.at2(r, k) * x.at2(k, pos)).sum::<f64>();
    let mut out = Vec::with_capacity(grouping.parts * q * q);
    for members in grouping.groups() {
        let mut s = vec![0.0; q * q];
        for (i, &pi) in members.iter().enumerate() {
            for (j, &pj) in members.iter().enumerate() {
                s[i * q + j] = (0..d).map(|r| proj(&w.wf, r, pi) * proj(&w.wg, r, pj)).sum::<f64>() / (d as f64).sqrt();
            }
        }
        let normalize = |idx: &mut dyn Iterator<Item = usize>, s: &mut [f64]| {
            let idx: Vec<usize> = idx.collect();
            let m = idx.iter().map(|&k| s[k]).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = idx.iter().map(|&k| (s[k] - m).exp()).sum();
            for &k in &idx {
                s[k] = (s[k] - m).exp() / total;
            }
        };
        for a in 0..q {
            match axis {
                SoftmaxAxis::Columns => normalize(&mut (0..q).map(|i| i * q + a), &mut s),
                SoftmaxAxis::Rows => normalize(&mut (0..q).map(|j| a * q + j), &mut s),
            }
        }
        out.extend(s);
    }
    Tensor::new(vec![grouping.parts, q, q], out)
}

pub type AffinityFn = fn(&Tensor<f64>, &Grouping, &AttentionWeights<f64>) -> dan_core::Result<Tensor<f64>>;

fn library_affinity(x: &Tensor<f64>, g: &Grouping, w: &AttentionWeights<f64>) -> dan_core::Result<Tensor<f64>> {
    grouped_attention_with_map(x, g, w).map(|(_, a)| a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// How `measured` is compared with `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub bound: Bound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain fields serialize")
    }
}

struct Measure {
    value: f64,
    detail: Option<String>,
}

impl From<f64> for Measure {
    fn from(value: f64) -> Self {
        Measure { value, detail: None }
    }
}

type Outcome = Result<Measure, String>;

struct Check {
    name: &'static str,
    tolerance: f64,
    bound: Bound,
    run: Box<dyn Fn(&Suite) -> Outcome>,
}

/// The checks and the affinity implementation they inspect.
pub struct Suite {
    affinity: AffinityFn,
}

impl Default for Suite {
    fn default() -> Self {
        Suite {
            affinity: library_affinity,
        }
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Suite {
    /// Swaps the affinity under test, e.g. for a deliberately broken one.
    pub fn with_affinity(affinity: AffinityFn) -> Self {
        Suite { affinity }
    }

    pub fn names() -> Vec<&'static str> {
        checks().iter().map(|c| c.name).collect()
    }

    /// Runs every check whose name contains `filter`.
    pub fn run(&self, filter: Option<&str>, mut each: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
        let mut out = Vec::new();
        for c in checks() {
            if filter.is_some_and(|f| !c.name.contains(f)) {
                continue;
            }
            let r = match (c.run)(self) {
                Ok(m) => {
                    let ok = match c.bound {
                        Bound::Below => m.value < c.tolerance,
                        Bound::AtMost => m.value <= c.tolerance,
                        Bound::Above => m.value > c.tolerance,
                    };
                    CheckResult {
                        name: c.name.into(),
                        status: if ok { Status::Pass } else { Status::Fail },
                        measured: m.value,
                        tolerance: c.tolerance,
                        bound: c.bound,
                        detail: m.detail,
                    }
                }
                Err(e) => CheckResult {
                    name: c.name.into(),
                    status: Status::Fail,
                    measured: f64::NAN,
                    tolerance: c.tolerance,
                    bound: c.bound,
                    detail: Some(e),
                },
            };
            each(&r);
            out.push(r);
        }
        out
    }

    /// Writes the JSON lines and reports whether everything passed.
    pub fn report(&self, filter: Option<&str>, out: &mut impl Write) -> std::io::Result<bool> {
        let mut io = Ok(());
        let results = self.run(filter, |r| {
            if io.is_ok() {
                io = writeln!(out, "{}", r.to_json());
            }
        });
        io?;
        Ok(results.iter().all(CheckResult::passed))
    }
}

fn check(name: &'static str, tolerance: f64, bound: Bound, run: impl Fn(&Suite) -> Outcome + 'static) -> Check {
    Check {
        name,
        tolerance,
        bound,
        run: Box::new(run),
    }
}

fn checks() -> Vec<Check> {
    vec![
        check("oracle.single_group_vs_dense_f32", 1e-6, Bound::Below, |_| single_group_vs_dense()),
        check("oracle.grouped_vs_reference", 1e-12, Bound::Below, |_| grouped_vs_reference()),
        check("oracle.dal_vs_effective_affinity", 1e-10, Bound::Below, |_| dal_vs_effective()),
        check("jacobian.long_range_off_block_zero", 0.0, Bound::AtMost, |_| long_range_off_block()),
        check("jacobian.dal_full_coverage", 1e-12, Bound::Above, |_| dal_coverage()),
        check("stochasticity.affinity_columns", 1e-9, Bound::Below, |s| affinity_columns(s)),
        check("counter.closed_forms", 0.0, Bound::AtMost, |_| counter_closed_forms()),
        check("gradient.dal_forward", 1e-4, Bound::Below, |_| gradient_dal()),
        check("gradient.srdn_forward", 1e-4, Bound::Below, |_| gradient_srdn()),
        check("gradient.blendnet_forward", 1e-4, Bound::Below, |_| gradient_blendnet()),
        check("gradient.total_loss", 1e-4, Bound::Below, |_| gradient_total_loss()),
        check("roundtrip.pgm", 0.0, Bound::AtMost, |_| pgm_round_trip()),
        check("roundtrip.checkpoint", 0.0, Bound::AtMost, |_| checkpoint_round_trip()),
        check("roundtrip.checkpoint_corruption_rejected", 0.0, Bound::AtMost, |_| checkpoint_corruption()),
        check("metric.psnr_uniform_gap_one", 1e-3, Bound::Below, |_| {
            let a = ImageU8::filled(16, 16, 100).map_err(err)?;
            let b = ImageU8::filled(16, 16, 101).map_err(err)?;
            Ok((psnr(&a, &b).map_err(err)? - 48.1308).abs().into())
        }),
        check("metric.ssim_identity", 1e-12, Bound::Below, |_| {
            let a = noise_image(32, 24, 5);
            Ok((ssim(&a, &a).map_err(err)? - 1.0).abs().into())
        }),
        check("metric.ie_uniform_gap_five", 0.0, Bound::AtMost, |_| {
            let a = ImageU8::filled(16, 16, 10).map_err(err)?;
            let b = ImageU8::filled(16, 16, 15).map_err(err)?;
            Ok((interp_error(&a, &b).map_err(err)? - 5.0).abs().into())
        }),
        check("loss.zero_at_target", 0.0, Bound::AtMost, |_| {
            let t: Tensor<f64> = seeded_uniform(&[1, 16, 16], 6, 0.0, 1.0);
            let v = evaluate_loss(&t, &t, &LossWeights::default(), &PerceptualStack::new()).map_err(err)?;
            Ok(v.total.abs().into())
        }),
    ]
}

fn noise_image(w: usize, h: usize, seed: u64) -> ImageU8 {
    let mut rng = CounterRng::new(seed);
    ImageU8::from_fn(w, h, |_, _| rng.below(256) as u8).expect("positive size")
}

fn single_group_vs_dense() -> Outcome {
    let mut rng = CounterRng::new(0x5eed);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let c = 1 + rng.below(8);
        let n = 1 + rng.below(64);
        let k = if c % 2 == 0 && rng.coin() { 2 } else { 1 };
        let w = AttentionWeights::<f32>::seeded(c, k, 1000 + i).map_err(err)?;
        let x: Tensor<f32> = seeded_normal(&[c, n], 2000 + i, 1.0).map_err(err)?;
        let g = Grouping::long_range(n, 1).map_err(err)?;
        let a = grouped_attention(&x, &g, &w).map_err(err)?;
        let b = dense_self_attention(&x, &w).map_err(err)?;
        worst = worst.max(a.max_abs_diff(&b).map_err(err)? as f64);
    }
    Ok(worst.into())
}

/// Output of grouped attention rebuilt from the reference affinity.
fn reference_grouped(x: &Tensor<f64>, g: &Grouping, w: &AttentionWeights<f64>) -> dan_core::Result<Tensor<f64>> {
    let a = reference_affinity(x, g, w, SoftmaxAxis::Columns)?;
    let (c, n) = x.dims2("reference_grouped")?;
    let d = w.key_dim();
    let q = g.group_size;
    let h = dan_core::tensor::matmul(&w.wh, x)?;
    let mut y = Tensor::zeros(&[d, n]);
    for (gi, members) in g.groups().enumerate() {
        for (j, &pj) in members.iter().enumerate() {
            for r in 0..d {
                let v: f64 = members.iter().enumerate().map(|(i, &pi)| a.data()[gi * q * q + i * q + j] * h.at2(r, pi)).sum();
                y.data_mut()[r * n + pj] = v;
            }
        }
    }
    let z = dan_core::tensor::matmul(&w.wv, &y)?;
    debug_assert_eq!(z.shape(), &[c, n]);
    Ok(z)
}

fn grouped_vs_reference() -> Outcome {
    let mut worst = 0.0f64;
    for (i, (n, parts, long)) in [(12, 3, true), (12, 4, false), (64, 8, true), (64, 4, false), (30, 5, true)]
        .into_iter()
        .enumerate()
    {
        let w = AttentionWeights::<f64>::seeded(4, 2, 50 + i as u64).map_err(err)?;
        let x: Tensor<f64> = seeded_normal(&[4, n], 60 + i as u64, 1.0).map_err(err)?;
        let g = if long {
            Grouping::long_range(n, parts)
        } else {
            Grouping::short_range(n, n / parts)
        }
        .map_err(err)?;
        let z = grouped_attention(&x, &g, &w).map_err(err)?;
        let r = reference_grouped(&x, &g, &w).map_err(err)?;
        worst = worst.max(z.max_abs_diff(&r).map_err(err)?);
    }
    Ok(worst.into())
}

fn weights3(c: usize, k: usize, seed: u64) -> Result<[AttentionWeights<f64>; 3], String> {
    Ok([
        AttentionWeights::seeded(c, k, seed).map_err(err)?,
        AttentionWeights::seeded(c, k, seed + 10).map_err(err)?,
        AttentionWeights::seeded(c, k, seed + 20).map_err(err)?,
    ])
}

fn dal_vs_effective() -> Outcome {
    let mut worst = 0.0f64;
    for (n, seed) in [(64usize, 1u64), (27, 2), (16, 3)] {
        let cfg = AttentionConfig::for_positions(4, 2, n).map_err(err)?;
        let w = weights3(4, 2, 70 + seed)?;
        let x: Tensor<f64> = seeded_normal(&[4, n], 80 + seed, 1.0).map_err(err)?;
        let z = dal_forward(&x, &cfg, &w[0], &w[1], &w[2]).map_err(err)?;
        let eff = effective_affinity(&x, &cfg, [&w[0], &w[1], &w[2]]).map_err(err)?;
        let mut vx = x.clone();
        for wi in &w {
            vx = dan_core::tensor::matmul(&wi.wh, &vx).map_err(err)?;
            vx = dan_core::tensor::matmul(&wi.wv, &vx).map_err(err)?;
        }
        let want = dan_core::tensor::matmul(&vx, &eff.product).map_err(err)?;
        worst = worst.max(z.max_abs_diff(&want).map_err(err)?);
    }
    Ok(worst.into())
}

/// `out[i][j]` is the largest `|∂z[:, j] / ∂x[:, i]|`, by central differences.
fn position_jacobian(f: impl Fn(&Tensor<f64>) -> dan_core::Result<Tensor<f64>>, x: &Tensor<f64>) -> Result<Vec<Vec<f64>>, String> {
    let (c, n) = x.dims2("position_jacobian").map_err(err)?;
    let mut blocks = vec![vec![0.0f64; n]; n];
    for e in 0..c * n {
        let mut up = x.clone();
        up.data_mut()[e] += 1e-6;
        let mut dn = x.clone();
        dn.data_mut()[e] -= 1e-6;
        let (fu, fd) = (f(&up).map_err(err)?, f(&dn).map_err(err)?);
        let i = e % n;
        for (o, (a, b)) in fu.data().iter().zip(fd.data()).enumerate() {
            let j = o % n;
            blocks[i][j] = blocks[i][j].max(((a - b) / 2e-6).abs());
        }
    }
    Ok(blocks)
}

fn long_range_off_block() -> Outcome {
    let mut worst = 0.0f64;
    let mut missing_on_block = 0usize;
    for (n, parts) in [(16usize, 2usize), (64, 4), (256, 8), (256, 2)] {
        let w = AttentionWeights::<f64>::seeded(2, 1, 90 + parts as u64).map_err(err)?;
        let x: Tensor<f64> = seeded_normal(&[2, n], 91 + n as u64, 1.0).map_err(err)?;
        let g = Grouping::long_range(n, parts).map_err(err)?;
        let b = position_jacobian(|x| grouped_attention(x, &g, &w), &x)?;
        for (i, row) in b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i % parts == j % parts {
                    missing_on_block += usize::from(v == 0.0);
                } else {
                    worst = worst.max(v);
                }
            }
        }
    }
    Ok(Measure {
        value: worst,
        detail: (missing_on_block > 0).then(|| format!("{missing_on_block} diagonal blocks vanished")),
    })
}

fn dal_coverage() -> Outcome {
    let mut least = f64::INFINITY;
    for n in [27usize, 64] {
        if choose_factorization(n).map_err(err)?.degenerate {
            return Err(format!("{n} positions factor degenerately"));
        }
        let cfg = AttentionConfig::for_positions(2, 1, n).map_err(err)?;
        for seed in 0..5 {
            let w = weights3(2, 1, 100 + seed)?;
            let x: Tensor<f64> = seeded_normal(&[2, n], 200 + seed, 1.0).map_err(err)?;
            let b = position_jacobian(|x| dal_forward(x, &cfg, &w[0], &w[1], &w[2]), &x)?;
            least = least.min(b.iter().flatten().copied().fold(f64::INFINITY, f64::min));
        }
    }
    Ok(least.into())
}

fn affinity_columns(suite: &Suite) -> Outcome {
    let mut worst = 0.0f64;
    for (n, seed) in [(64usize, 3u64), (27, 4)] {
        let cfg = AttentionConfig::for_positions(4, 2, n).map_err(err)?;
        let plan = DalPlan::new(&cfg).map_err(err)?;
        let w = weights3(4, 2, 110 + seed)?;
        let x: Tensor<f64> = seeded_normal(&[4, n], 120 + seed, 1.0).map_err(err)?;
        for (g, wi) in plan.stages.iter().zip(&w) {
            let a = (suite.affinity)(&x, g, wi).map_err(err)?;
            let q = g.group_size;
            for part in 0..g.parts {
                for j in 0..q {
                    let s: f64 = (0..q).map(|i| a.data()[part * q * q + i * q + j]).sum();
                    worst = worst.max((s - 1.0).abs());
                }
            }
        }
    }
    Ok(worst.into())
}

fn counter_closed_forms() -> Outcome {
    let (c, k, n) = (8usize, 2usize, 64usize);
    let d = c / k;
    let cfg = AttentionConfig::for_positions(c, k, n).map_err(err)?;
    let plan = DalPlan::new(&cfg).map_err(err)?;
    let w = weights3(c, k, 130)?;
    let stages: Vec<_> = plan.stages.iter().cloned().zip(w.iter().cloned()).collect();
    let x: Tensor<f64> = seeded_normal(&[c, n], 131, 1.0).map_err(err)?;
    let mut count = MacCount::default();
    counted_forward(&x, &stages, &mut count).map_err(err)?;
    let want_attention: usize = plan.stages.iter().map(|g| 2 * n * g.group_size * d).sum();
    let want_projection = 3 * 4 * d * c * n;
    let off = count.attention.abs_diff(want_attention as u64) + count.projection.abs_diff(want_projection as u64);
    Ok((off as f64).into())
}

/// Largest relative error between backpropagated and central-difference
/// gradients over every parameter tensor in `store`.
fn param_gradcheck(
    store: &ParamStore<f64>,
    build: impl Fn(&mut Tape<f64>, &ParamStore<f64>) -> dan_core::Result<Var>,
) -> Outcome {
    let mut s = store.clone();
    s.zero_grad();
    let mut tape = Tape::new();
    let loss = build(&mut tape, &s).map_err(err)?;
    tape.backward(loss, &mut s).map_err(err)?;
    let mut worst = (0.0f64, String::new());
    for (id, p) in s.iter() {
        let fd = finite_diff_grad(
            |v| {
                let mut probe = s.clone();
                probe.get_mut(id).value = v.clone();
                let mut t = Tape::new();
                let l = build(&mut t, &probe)?;
                Ok(t.value(l).clone())
            },
            &p.value,
            1e-6,
        )
        .map_err(err)?;
        let e = relative_error(p.grad.data(), fd.data());
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, p.name.clone());
        }
    }
    Ok(Measure {
        value: worst.0,
        detail: Some(format!("worst parameter {}", worst.1)),
    })
}

/// `Σ z ⊙ r` for a fixed random `r`, a generic scalar read-out.
fn readout(tape: &mut Tape<f64>, z: Var, seed: u64) -> dan_core::Result<Var> {
    let r = seeded_normal(tape.value(z).shape(), seed, 1.0)?;
    let rv = tape.constant(r)?;
    let m = tape.mul(z, rv)?;
    tape.sum(m)
}

fn gradient_dal() -> Outcome {
    let cfg = AttentionConfig::new(4, 2, 16, 2, 2).map_err(err)?;
    let plan = DalPlan::new(&cfg).map_err(err)?;
    let mut store = ParamStore::new();
    let ids = weights3(4, 2, 140)?
        .iter()
        .enumerate()
        .map(|(i, w)| w.register(&mut store, &format!("s{i}")))
        .collect::<dan_core::Result<Vec<_>>>()
        .map_err(err)?;
    let x: Tensor<f64> = seeded_normal(&[4, 16], 141, 1.0).map_err(err)?;
    store.add("x", x).map_err(err)?;
    param_gradcheck(&store, |tape, s| {
        let xv = tape.param(s, s.find("x").expect("registered"));
        let sv = [0, 1, 2].map(|i| StageVars::params(tape, s, &ids[i]));
        let trace = dal_forward_taped(tape, xv, &plan, &sv)?;
        readout(tape, trace.out, 142)
    })
}

fn small_model() -> ModelConfig {
    ModelConfig {
        channels: 4,
        rdb_count: 2,
        convs_per_rdb: 2,
        growth: 2,
        reduction: 2,
    }
}

fn gradient_srdn() -> Outcome {
    let cfg = small_model();
    let mut store = ParamStore::new();
    let p = SrdnParams::init(&cfg, &mut store, &mut CounterRng::new(150)).map_err(err)?;
    // nonzero biases so their gradients are exercised away from the origin
    for prm in store.iter_mut() {
        if prm.name.ends_with(".bias") {
            let shape = prm.value.shape().to_vec();
            prm.value = seeded_normal(&shape, 151 + shape[0] as u64, 0.1).expect("positive stddev");
        }
    }
    let a: Tensor<f64> = seeded_uniform(&[1, 6, 6], 152, 0.0, 1.0);
    let b: Tensor<f64> = seeded_uniform(&[1, 6, 6], 153, 0.0, 1.0);
    param_gradcheck(&store, |tape, s| {
        let av = tape.input(a.clone(), false)?;
        let bv = tape.input(b.clone(), false)?;
        let (f, r) = srdn_forward(tape, s, &p, av, bv)?;
        let lf = readout(tape, f, 154)?;
        let lr = readout(tape, r, 155)?;
        tape.add(lf, lr)
    })
}

fn gradient_blendnet() -> Outcome {
    let mut store = ParamStore::new();
    let p = BlendParams::init(&mut store, &mut CounterRng::new(160)).map_err(err)?;
    store.add("warp0", seeded_uniform(&[1, 6, 6], 161, 0.0, 1.0)).map_err(err)?;
    store.add("warp1", seeded_uniform(&[1, 6, 6], 162, 0.0, 1.0)).map_err(err)?;
    param_gradcheck(&store, |tape, s| {
        let w0 = tape.param(s, s.find("warp0").expect("registered"));
        let w1 = tape.param(s, s.find("warp1").expect("registered"));
        let (frame, _) = blendnet_forward(tape, s, &p, w0, w1)?;
        readout(tape, frame, 163)
    })
}

fn gradient_total_loss() -> Outcome {
    let stack = PerceptualStack::<f64>::new();
    let mut store = ParamStore::new();
    store.add("pred", seeded_uniform(&[1, 8, 8], 170, 0.0, 1.0)).map_err(err)?;
    let target: Tensor<f64> = seeded_uniform(&[1, 8, 8], 171, 0.0, 1.0);
    param_gradcheck(&store, |tape, s| {
        let p = tape.param(s, s.find("pred").expect("registered"));
        let t = tape.input(target.clone(), false)?;
        Ok(total_loss(tape, p, t, &LossWeights::default(), &stack)?.total)
    })
}

fn pgm_round_trip() -> Outcome {
    let mut mismatches = 0usize;
    for (w, h, seed) in [(1, 1, 1), (7, 3, 2), (64, 48, 3)] {
        let img = noise_image(w, h, seed);
        let back = read_pgm(&write_pgm(&img)).map_err(err)?;
        mismatches += usize::from(back != img);
    }
    Ok((mismatches as f64).into())
}

fn sample_store() -> ParamStore<f32> {
    let mut s = ParamStore::new();
    s.add("a.weight", seeded_normal(&[3, 2, 3, 3], 180, 1.0).expect("positive stddev"))
        .expect("unique");
    s.add("a.bias", Tensor::from_fn(&[3], |i| f32::from_bits(0x7f7f_0000 + i as u32)))
        .expect("unique");
    s.add("b", Tensor::scalar(-0.0f32)).expect("unique");
    s
}

fn checkpoint_round_trip() -> Outcome {
    let s = sample_store();
    let back = decode(&encode(&s)).map_err(err)?;
    let bitwise = s.len() == back.len()
        && s.iter().zip(back.iter()).all(|((_, a), (_, b))| {
            a.name == b.name
                && a.value.shape() == b.value.shape()
                && a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    Ok(f64::from(u8::from(!bitwise)).into())
}

fn checkpoint_corruption() -> Outcome {
    let bytes = encode(&sample_store());
    let mut accepted = 0usize;
    // flip one byte at a time through the payload
    for pos in (16..bytes.len() - 4).step_by(7) {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x40;
        accepted += usize::from(!matches!(decode(&bad), Err(CheckpointError::Crc { .. })));
    }
    Ok((accepted as f64).into())
}
