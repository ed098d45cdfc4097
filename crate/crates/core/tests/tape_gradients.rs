//! Every taped operation against central finite differences.
//!
//! 64-bit adjoints are compared with 64-bit differences at relative error
//! below 1e-7. 32-bit adjoints are compared with differences of the same
//! function evaluated in 64-bit, at relative error below 1e-4.

use dan_core::gradcheck::{finite_diff_grad, relative_error};
use dan_core::rng::seeded_normal;
use dan_core::tensor::ConvSpec;
use dan_core::{ParamStore, Result, Scalar, Tape, Tensor, Var};
use proptest::prelude::*;

type Build<T> = fn(&mut Tape<T>, Var, u64) -> Result<Var>;

fn weights<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    seeded_normal::<f64>(shape, seed, 1.0).unwrap().cast()
}

/// Reduces an arbitrary output to a scalar with fixed random weights.
fn project<T: Scalar>(t: &mut Tape<T>, y: Var, seed: u64) -> Result<Var> {
    let shape = t.value(y).shape().to_vec();
    let r = t.constant(weights(&shape, seed ^ 0xABCD))?;
    let p = t.mul(y, r)?;
    t.sum(p)
}

fn eval<T: Scalar>(build: Build<T>, x: &Tensor<T>, seed: u64) -> Result<Tensor<T>> {
    let mut t = Tape::new();
    let xv = t.input(x.clone(), false)?;
    let y = build(&mut t, xv, seed)?;
    let l = project(&mut t, y, seed)?;
    Ok(t.value(l).clone())
}

fn analytic<T: Scalar>(build: Build<T>, x: &Tensor<T>, seed: u64) -> Tensor<T> {
    let mut t = Tape::new();
    let xv = t.input(x.clone(), true).unwrap();
    let y = build(&mut t, xv, seed).unwrap();
    let l = project(&mut t, y, seed).unwrap();
    t.gradients(l).unwrap().wrt(xv).unwrap().clone()
}

fn check(b64: Build<f64>, b32: Build<f32>, shape: &[usize], seed: u64) -> (f64, f64) {
    let x64: Tensor<f64> = weights(shape, seed);
    let fd = finite_diff_grad(|x| eval(b64, x, seed), &x64, 1e-6).unwrap();
    let a64 = analytic(b64, &x64, seed);
    let a32 = analytic(b32, &x64.cast::<f32>(), seed);
    let x32_as_64 = x64.cast::<f32>().cast::<f64>();
    let fd32 = finite_diff_grad(|x| eval(b64, x, seed), &x32_as_64, 1e-6).unwrap();
    (
        relative_error(a64.data(), fd.data()),
        relative_error(a32.cast::<f64>().data(), fd32.data()),
    )
}

fn op_matmul<T: Scalar>(t: &mut Tape<T>, x: Var, s: u64) -> Result<Var> {
    // x: [2, 4]
    let w = t.constant(weights(&[3, 2], s + 1))?;
    let a = t.matmul(w, x)?;
    let b = t.constant(weights(&[4, 3], s + 2))?;
    let xb = t.matmul(x, b)?;
    let xt = t.transpose(x)?;
    let xx = t.matmul(xt, x)?;
    let y = t.matmul(a, xt)?;
    let s1 = project(t, xx, s + 3)?;
    let s2 = project(t, y, s + 4)?;
    let s3 = project(t, xb, s + 5)?;
    let s12 = t.add(s1, s2)?;
    t.add(s12, s3)
}

fn op_conv<T: Scalar>(t: &mut Tape<T>, x: Var, s: u64) -> Result<Var> {
    let w = t.constant(weights(&[2, 2, 3, 3], s + 3))?;
    let b = t.constant(weights(&[2], s + 4))?;
    let y1 = t.conv2d(x, w, Some(b), ConvSpec { stride: 1, padding: 1 })?;
    let y2 = t.conv2d(x, w, None, ConvSpec { stride: 2, padding: 1 })?;
    let s1 = project(t, y1, s + 5)?;
    let s2 = project(t, y2, s + 6)?;
    t.add(s1, s2)
}

fn op_conv_weight<T: Scalar>(t: &mut Tape<T>, w: Var, s: u64) -> Result<Var> {
    let x = t.constant(weights(&[2, 5, 4], s + 7))?;
    let y1 = t.conv2d(x, w, None, ConvSpec { stride: 1, padding: 1 })?;
    let y2 = t.conv2d(x, w, None, ConvSpec { stride: 2, padding: 0 })?;
    let s1 = project(t, y1, s + 8)?;
    let s2 = project(t, y2, s + 9)?;
    t.add(s1, s2)
}

fn op_elementwise<T: Scalar>(t: &mut Tape<T>, x: Var, s: u64) -> Result<Var> {
    let c = t.constant(weights(t.value(x).shape(), s + 10))?;
    let a = t.add(x, c)?;
    let b = t.sub(a, x)?;
    let m = t.mul(x, a)?;
    let r = t.relu(m)?;
    let g = t.sigmoid(r)?;
    let ab = t.abs(x)?;
    let sq = t.square(b)?;
    let af = t.affine(g, -1.5, 0.25)?;
    let sum = t.add(af, ab)?;
    let sum = t.add(sum, sq)?;
    let m1 = t.mean(sum)?;
    let m2 = project(t, sum, s + 11)?;
    t.add(m1, m2)
}

fn op_attention_kernels<T: Scalar>(t: &mut Tape<T>, x: Var, s: u64) -> Result<Var> {
    // x: [2, 6] viewed as [d, parts·q] with parts 2, q 3
    let g = t.constant(weights(&[2, 6], s + 12))?;
    let h = t.constant(weights(&[2, 6], s + 13))?;
    let perm = [3, 0, 5, 1, 4, 2];
    let xp = t.gather_cols(x, &perm)?;
    let sc = t.group_scores(xp, g, 2, 0.7)?;
    let sc2 = t.group_scores(g, xp, 2, 0.7)?;
    let sc = t.add(sc, sc2)?;
    let a = t.softmax_cols(sc)?;
    let y1 = t.group_mix(h, a)?;
    let y2 = t.group_mix(xp, a)?;
    let y = t.add(y1, y2)?;
    let back = t.gather_cols(y, &[1, 3, 5, 0, 4, 2])?;
    project(t, back, s + 14)
}

fn op_shape<T: Scalar>(t: &mut Tape<T>, x: Var, s: u64) -> Result<Var> {
    // x: [2, 3, 3]
    let c = t.constant(weights(&[1, 3, 3], s + 15))?;
    let cat = t.concat(&[x, c, x])?;
    let flat = t.reshape(cat, &[5, 9])?;
    let tr = t.transpose(flat)?;
    let gm = t.matmul(flat, tr)?;
    project(t, gm, s + 16)
}

macro_rules! grad_case {
    ($name:ident, $op:ident, $shape:expr) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]
            #[test]
            fn $name(seed in 0u64..1_000_000) {
                let (e64, e32) = check($op::<f64>, $op::<f32>, &$shape, seed);
                prop_assert!(e64 < 1e-7, "64-bit relative error {}", e64);
                prop_assert!(e32 < 1e-4, "32-bit relative error {}", e32);
            }
        }
    };
}

grad_case!(matmul_and_transpose, op_matmul, [2, 4]);
grad_case!(conv_input_and_bias, op_conv, [2, 3, 3]);
grad_case!(conv_weight, op_conv_weight, [2, 2, 3, 3]);
grad_case!(elementwise_ops, op_elementwise, [3, 5]);
grad_case!(gather_scores_softmax_mix, op_attention_kernels, [2, 6]);
grad_case!(concat_reshape, op_shape, [2, 3, 3]);

#[test]
fn backward_examples() {
    let mut store = ParamStore::<f64>::new();
    let p = store.add("p", weights(&[4, 2], 3)).unwrap();
    let mut tape = Tape::new();
    let v = tape.param(&store, p);
    let l = tape.sum(v).unwrap();
    tape.backward(l, &mut store).unwrap();
    assert!(store.get(p).grad.data().iter().all(|&g| g == 1.0));

    store.zero_grad();
    assert!(store.get(p).grad.data().iter().all(|&g| g == 0.0));
    assert!(!store.get(p).has_grad());

    let mut tape = Tape::new();
    let v = tape.param(&store, p);
    let sq = tape.mul(v, v).unwrap();
    let l = tape.sum(sq).unwrap();
    tape.backward(l, &mut store).unwrap();
    let want = store.get(p).value.scale(2.0);
    assert_eq!(store.get(p).grad, want);
    assert!(store.get(p).has_grad());
}

#[test]
fn composite_matmul_against_finite_differences() {
    let mut store = ParamStore::<f64>::new();
    let w = store.add("w", weights(&[3, 4], 5)).unwrap();
    let x: Tensor<f64> = weights(&[4, 2], 6);
    let mut tape = Tape::new();
    let wv = tape.param(&store, w);
    let xv = tape.constant(x.clone()).unwrap();
    let y = tape.matmul(wv, xv).unwrap();
    let l = tape.sum(y).unwrap();
    tape.backward(l, &mut store).unwrap();
    let fd = finite_diff_grad(
        |wt| {
            let y = dan_core::tensor::matmul(wt, &x)?;
            Ok(Tensor::scalar(y.sum()))
        },
        &store.get(w).value,
        1e-6,
    )
    .unwrap();
    assert!(relative_error(store.get(w).grad.data(), fd.data()) < 1e-6);
}

#[test]
fn shared_parameter_accumulates_once_per_use() {
    let mut store = ParamStore::<f64>::new();
    let p = store.add("p", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()).unwrap();
    let mut tape = Tape::new();
    let a = tape.param(&store, p);
    let b = tape.param(&store, p);
    assert_eq!(a, b);
    let s = tape.add(a, b).unwrap();
    let l = tape.sum(s).unwrap();
    tape.backward(l, &mut store).unwrap();
    assert_eq!(store.get(p).grad.data(), &[2.0, 2.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut tape = Tape::<f32>::new();
    let x = tape.input(Tensor::zeros(&[2, 2]), true).unwrap();
    assert!(matches!(tape.gradients(x), Err(dan_core::Error::Contract(_))));
}

#[test]
fn adjoints_visit_in_reverse_application_order() {
    let mut tape = Tape::<f64>::new();
    let x = tape.input(weights(&[3], 1), true).unwrap();
    let a = tape.square(x).unwrap();
    let b = tape.sigmoid(a).unwrap();
    let c = tape.mul(a, b).unwrap();
    let l = tape.sum(c).unwrap();
    let g = tape.gradients(l).unwrap();
    let order = g.visit_order();
    assert!(order.windows(2).all(|w| w[0] > w[1]));
    assert_eq!(order, &[l.index(), c.index(), b.index(), a.index(), x.index()]);
}

#[test]
fn non_finite_values_fail_fast() {
    let mut tape = Tape::<f32>::new();
    let x = tape.input(Tensor::full(&[2], 1e30), false).unwrap();
    let y = tape.square(x);
    assert!(matches!(y, Err(dan_core::Error::Numeric { op: "square" })));
}
