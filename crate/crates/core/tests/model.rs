use dan_core::attention::DalPlan;
use dan_core::gradcheck::{finite_diff_grad, relative_error};
use dan_core::model::{blendnet_forward, rdb_forward, sfenet_forward, srdn_forward, warp_head, DanModel, ModelConfig};
use dan_core::rng::{seeded_normal, seeded_uniform};
use dan_core::{ParamStore, Result, Tape, Tensor};
use proptest::prelude::*;

fn small() -> ModelConfig {
    ModelConfig {
        channels: 8,
        rdb_count: 2,
        convs_per_rdb: 2,
        growth: 4,
        reduction: 2,
    }
}

fn frame(h: usize, w: usize, seed: u64) -> Tensor<f64> {
    seeded_uniform(&[1, h, w], seed, 0.0, 1.0)
}

fn set(store: &mut ParamStore<f64>, name: &str, f: impl Fn(&Tensor<f64>) -> Tensor<f64>) {
    let id = store.find(name).unwrap();
    let v = f(&store.get(id).value);
    store.get_mut(id).value = v;
}

fn zero_all(store: &mut ParamStore<f64>, prefix: &str) {
    let names: Vec<String> = store.iter().map(|(_, p)| p.name.clone()).collect();
    for n in names.iter().filter(|n| n.starts_with(prefix)) {
        set(store, n, |t| Tensor::zeros(t.shape()));
    }
}

#[test]
fn extractor_has_exactly_one_branch_of_weights() {
    let cfg = ModelConfig::default();
    let mut store = ParamStore::<f32>::new();
    DanModel::init(cfg, 0, &mut store).unwrap();
    let (c, g, gr, d) = (cfg.channels, cfg.convs_per_rdb, cfg.growth, cfg.rdb_count);
    let conv = |o: usize, i: usize, k: usize| o * i * k * k + o;
    let mut want = conv(c, 2, 3) + conv(c, c, 3);
    for _ in 0..d {
        want += (0..g).map(|j| conv(gr, c + j * gr, 3)).sum::<usize>();
        want += conv(c, c + g * gr, 1);
    }
    want += conv(c, c * d, 1) + conv(c, c, 3);
    let got: usize = store
        .iter()
        .filter(|(_, p)| p.name.starts_with("srdn."))
        .map(|(_, p)| p.value.len())
        .sum();
    assert_eq!(got, want);
}

#[test]
fn identical_inputs_give_identical_directions() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 1, &mut store).unwrap();
    let mut tape = Tape::new();
    let a = tape.input(frame(6, 6, 5), false).unwrap();
    let b = tape.input(frame(6, 6, 5), false).unwrap();
    let (f, r) = srdn_forward(&mut tape, &store, &m.srdn, a, b).unwrap();
    assert_eq!(tape.value(f), tape.value(r));
}

#[test]
fn swapping_inputs_swaps_directions() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 2, &mut store).unwrap();
    let mut tape = Tape::new();
    let a = tape.input(frame(6, 4, 1), false).unwrap();
    let b = tape.input(frame(6, 4, 2), false).unwrap();
    let (f1, r1) = srdn_forward(&mut tape, &store, &m.srdn, a, b).unwrap();
    let (f2, r2) = srdn_forward(&mut tape, &store, &m.srdn, b, a).unwrap();
    assert_eq!(tape.value(f1), tape.value(r2));
    assert_eq!(tape.value(r1), tape.value(f2));
    assert_ne!(tape.value(f1), tape.value(r1));
}

#[test]
fn rdb_with_zero_weights_is_identity() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 3, &mut store).unwrap();
    zero_all(&mut store, "srdn.rdb0.");
    let x = seeded_normal::<f64>(&[8, 5, 5], 9, 1.0).unwrap();
    let mut tape = Tape::new();
    let xv = tape.input(x.clone(), false).unwrap();
    let y = rdb_forward(&mut tape, &store, &m.srdn.rdbs[0], xv).unwrap();
    assert_eq!(tape.value(y), &x);
}

#[test]
fn rdb_single_conv_by_hand() {
    // G = 1, one channel in, growth 1: y = x + f·relu(k·x) with a 1×1 fusion
    let cfg = ModelConfig {
        channels: 1,
        rdb_count: 1,
        convs_per_rdb: 1,
        growth: 1,
        reduction: 1,
    };
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(cfg, 0, &mut store).unwrap();
    let mut k = Tensor::zeros(&[1, 1, 3, 3]);
    k.data_mut()[4] = 2.0;
    set(&mut store, "srdn.rdb0.conv0.weight", |_| k.clone());
    set(&mut store, "srdn.rdb0.conv0.bias", |_| Tensor::full(&[1], -1.0));
    set(&mut store, "srdn.rdb0.fusion.weight", |_| Tensor::new(vec![1, 2, 1, 1], vec![0.5, 3.0]).unwrap());
    set(&mut store, "srdn.rdb0.fusion.bias", |_| Tensor::full(&[1], 0.25));
    let x = Tensor::new(vec![1, 1, 2], vec![0.2, 1.5]).unwrap();
    let mut tape = Tape::new();
    let xv = tape.input(x, false).unwrap();
    let y = rdb_forward(&mut tape, &store, &m.srdn.rdbs[0], xv).unwrap();
    // 0.2: relu(-0.6) = 0 → 0.2 + 0.1 + 0 + 0.25; 1.5: relu(2) = 2 → 1.5 + 0.75 + 6 + 0.25
    let want = [0.55, 8.5];
    for (g, w) in tape.value(y).data().iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
}

#[test]
fn sfenet_constant_input_with_unit_kernels() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 4, &mut store).unwrap();
    set(&mut store, "srdn.sfe1.weight", |t| Tensor::ones(t.shape()));
    let mut tape = Tape::new();
    let pair = tape.input(Tensor::full(&[2, 5, 5], 0.3), false).unwrap();
    let (f_m1, f0) = sfenet_forward(&mut tape, &store, &m.srdn, pair).unwrap();
    let v = tape.value(f_m1);
    assert_eq!(v.shape(), &[8, 5, 5]);
    assert_eq!(tape.value(f0).shape(), &[8, 5, 5]);
    // 18 taps of 0.3 at interior positions, 12 at edges, 8 at corners
    assert!((v.data()[2 * 5 + 2] - 18.0 * 0.3).abs() < 1e-12);
    assert!((v.data()[2] - 12.0 * 0.3).abs() < 1e-12);
    assert!((v.data()[0] - 8.0 * 0.3).abs() < 1e-12);
}

#[test]
fn bias_only_extractor_propagates_the_constant() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 5, &mut store).unwrap();
    zero_all(&mut store, "srdn.");
    let b: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
    set(&mut store, "srdn.sfe1.bias", |_| Tensor::new(vec![8], b.clone()).unwrap());
    let mut tape = Tape::new();
    let a = tape.input(frame(4, 4, 1), false).unwrap();
    let c = tape.input(frame(4, 4, 2), false).unwrap();
    let (f, _) = srdn_forward(&mut tape, &store, &m.srdn, a, c).unwrap();
    // sfe2, every block and both fusion convs emit zeros; only the global residual survives
    for (ch, &bv) in b.iter().enumerate() {
        assert!(tape.value(f).data()[ch * 16..(ch + 1) * 16].iter().all(|&v| v == bv));
    }
}

#[test]
fn warp_head_zero_projection_is_one_half() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 6, &mut store).unwrap();
    set(&mut store, "warp0.proj.weight", |t| Tensor::zeros(t.shape()));
    let plan = DalPlan::new(&small().attention(4, 6).unwrap()).unwrap();
    let mut tape = Tape::new();
    let f = tape.input(seeded_normal(&[8, 4, 6], 3, 1.0).unwrap(), false).unwrap();
    let y = warp_head(&mut tape, &store, &m.heads[0], &plan, f).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 4, 6]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.5));
    let y1 = warp_head(&mut tape, &store, &m.heads[1], &plan, f).unwrap();
    assert!(tape.value(y1).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn warp_head_size_mismatch_is_a_factorization_error() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 6, &mut store).unwrap();
    let plan = DalPlan::new(&small().attention(4, 4).unwrap()).unwrap();
    let mut tape = Tape::new();
    let f = tape.input(Tensor::zeros(&[8, 4, 6]), false).unwrap();
    assert!(matches!(
        warp_head(&mut tape, &store, &m.heads[0], &plan, f),
        Err(dan_core::Error::Factorization { .. })
    ));
}

fn weighted_sum(tape: &mut Tape<f64>, y: dan_core::Var, seed: u64) -> Result<dan_core::Var> {
    let r = tape.constant(seeded_normal(tape.value(y).shape(), seed, 1.0)?)?;
    let p = tape.mul(y, r)?;
    tape.sum(p)
}

#[test]
fn warp_head_gradient_matches_finite_differences() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 7, &mut store).unwrap();
    let plan = DalPlan::new(&small().attention(4, 4).unwrap()).unwrap();
    let x = seeded_normal::<f64>(&[8, 4, 4], 11, 1.0).unwrap();
    let run = |x: &Tensor<f64>, grad: bool| {
        let mut tape = Tape::new();
        let f = tape.input(x.clone(), grad)?;
        let y = warp_head(&mut tape, &store, &m.heads[0], &plan, f)?;
        let l = weighted_sum(&mut tape, y, 1)?;
        let g = if grad { Some(tape.gradients(l)?.wrt(f).unwrap().clone()) } else { None };
        Ok::<_, dan_core::Error>((tape.value(l).clone(), g))
    };
    let analytic = run(&x, true).unwrap().1.unwrap();
    let fd = finite_diff_grad(|x| Ok(run(x, false)?.0), &x, 1e-6).unwrap();
    let err = relative_error(analytic.data(), fd.data());
    assert!(err < 1e-4, "relative error {err}");
}

fn blend_case(store: &ParamStore<f64>, m: &DanModel, w0: &Tensor<f64>, w1: &Tensor<f64>) -> Tensor<f64> {
    let mut tape = Tape::new();
    let a = tape.input(w0.clone(), false).unwrap();
    let b = tape.input(w1.clone(), false).unwrap();
    let (f, _) = blendnet_forward(&mut tape, store, &m.blend, a, b).unwrap();
    tape.value(f).clone()
}

#[test]
fn blend_of_equal_warps_is_that_warp() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 8, &mut store).unwrap();
    let w = frame(5, 7, 3);
    assert_eq!(blend_case(&store, &m, &w, &w), w);
}

#[test]
fn saturated_blend_weight_selects_the_first_warp() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 8, &mut store).unwrap();
    set(&mut store, "blend.conv2.weight", |t| Tensor::zeros(t.shape()));
    set(&mut store, "blend.conv2.bias", |_| Tensor::full(&[1], 20.0));
    let (w0, w1) = (frame(5, 5, 1), frame(5, 5, 2));
    let f = blend_case(&store, &m, &w0, &w1);
    assert!(f.max_abs_diff(&w0).unwrap() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blend_stays_between_its_inputs(seed in 0u64..1000) {
        let mut store = ParamStore::<f64>::new();
        let m = DanModel::init(small(), seed, &mut store).unwrap();
        let (w0, w1) = (frame(6, 6, seed + 1), frame(6, 6, seed + 2));
        let f = blend_case(&store, &m, &w0, &w1);
        for ((&v, &a), &b) in f.data().iter().zip(w0.data()).zip(w1.data()) {
            prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
        }
    }

    #[test]
    fn pipeline_outputs_stay_in_unit_range(seed in 0u64..1000) {
        let mut store = ParamStore::<f32>::new();
        let m = DanModel::init(small(), seed, &mut store).unwrap();
        let a = frame(8, 8, seed).cast();
        let b = frame(8, 8, seed ^ 7).cast();
        let mut tape = Tape::new();
        let (av, bv) = (tape.input(a, false).unwrap(), tape.input(b, false).unwrap());
        let o = m.forward(&mut tape, &store, av, bv).unwrap();
        for v in [o.frame, o.warp0, o.warp1, o.blend_weight] {
            prop_assert_eq!(tape.value(v).shape(), &[1, 8, 8]);
            prop_assert!(tape.value(v).data().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

#[test]
fn stationary_constant_scene_stays_in_range() {
    let mut store = ParamStore::<f32>::new();
    let m = DanModel::init(ModelConfig::default(), 0, &mut store).unwrap();
    let c = Tensor::<f32>::full(&[1, 8, 8], 0.6);
    let out = m.interpolate(&store, &c, &c).unwrap();
    assert_eq!(out.shape(), &[1, 8, 8]);
    assert!(out.data().iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn full_pipeline_gradient_matches_finite_differences() {
    let mut store = ParamStore::<f64>::new();
    let m = DanModel::init(small(), 9, &mut store).unwrap();
    let a = frame(8, 8, 21);
    let b = frame(8, 8, 22);
    let run = |store: &ParamStore<f64>, a: &Tensor<f64>| {
        let mut tape = Tape::new();
        let av = tape.input(a.clone(), true)?;
        let bv = tape.input(b.clone(), false)?;
        let o = m.forward(&mut tape, store, av, bv)?;
        let l = weighted_sum(&mut tape, o.frame, 5)?;
        Ok::<_, dan_core::Error>((tape, av, l))
    };
    let (tape, av, l) = run(&store, &a).unwrap();
    let mut grads = store.clone();
    let analytic = tape.backward(l, &mut grads).unwrap().wrt(av).unwrap().clone();
    let value = |s: &ParamStore<f64>, x: &Tensor<f64>| {
        let (t, _, l) = run(s, x)?;
        Ok(t.value(l).clone())
    };
    let fd = finite_diff_grad(|x| value(&store, x), &a, 1e-6).unwrap();
    let err = relative_error(analytic.data(), fd.data());
    assert!(err < 1e-3, "input relative error {err}");

    // one parameter tensor from each stage of the pipeline
    for name in ["srdn.sfe1.weight", "warp1.proj.weight", "warp0.s.wv", "blend.conv0.weight"] {
        let id = store.find(name).unwrap();
        let analytic = grads.get(id).grad.clone();
        let fd = finite_diff_grad(
            |w| {
                let mut s = store.clone();
                s.get_mut(id).value = w.clone();
                value(&s, &a)
            },
            &store.get(id).value,
            1e-6,
        )
        .unwrap();
        let err = relative_error(analytic.data(), fd.data());
        assert!(err < 1e-3, "{name} relative error {err}");
    }
}
