//! Training objective: `α·style + β·feature + γ·pixel`, with the feature and
//! style terms measured on a frozen random convolution stack.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::seeded_normal;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::{ConvSpec, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1e6,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().all(|w| *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::contract("loss weights must be non-negative"))
        }
    }
}

/// Three 3×3 stride-2 convolutions with ReLU, `1 → 16 → 32 → 64` channels,
/// no bias. Weights never change after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualStack<T = f32> {
    layers: [Tensor<T>; 3],
}

impl<T: Scalar> PerceptualStack<T> {
    pub const SEED: u64 = 0xDA17;
    pub const STDDEV: f64 = 0.1;
    pub const WIDTHS: [usize; 4] = [1, 16, 32, 64];
    const SPEC: ConvSpec = ConvSpec { stride: 2, padding: 1 };

    /// Layer `i` is drawn from `seeded_normal(SEED + i, 0.1)`.
    pub fn new() -> Self {
        let w = Self::WIDTHS;
        let layer = |i: usize| {
            seeded_normal(&[w[i + 1], w[i], 3, 3], Self::SEED + i as u64, Self::STDDEV)
                .expect("positive standard deviation")
        };
        PerceptualStack {
            layers: [layer(0), layer(1), layer(2)],
        }
    }

    pub fn layers(&self) -> &[Tensor<T>; 3] {
        &self.layers
    }

    /// Activations of all three layers for `x: [1, H, W]`.
    pub fn features(&self, tape: &mut Tape<T>, x: Var) -> Result<[Var; 3]> {
        let mut h = x;
        let mut out = [x; 3];
        for (i, w) in self.layers.iter().enumerate() {
            let wv = tape.constant(w.clone())?;
            let y = tape.conv2d(h, wv, None, Self::SPEC)?;
            h = tape.relu(y)?;
            out[i] = h;
        }
        Ok(out)
    }
}

impl<T: Scalar> Default for PerceptualStack<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<T: Scalar>(tape: &Tape<T>, a: Var, b: Var, op: &'static str) -> Result<()> {
    if tape.value(a).shape() != tape.value(b).shape() {
        return Err(Error::dim(op, tape.value(a).shape(), tape.value(b).shape()));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn pixel_loss<T: Scalar>(tape: &mut Tape<T>, pred: Var, target: Var) -> Result<Var> {
    same_shape(tape, pred, target, "pixel_loss")?;
    let d = tape.sub(pred, target)?;
    let a = tape.abs(d)?;
    tape.mean(a)
}

/// `G = F Fᵀ / (C·H·W)` for `F: [C, H, W]`.
pub fn gram_matrix<T: Scalar>(tape: &mut Tape<T>, f: Var) -> Result<Var> {
    let (c, h, w) = tape.value(f).dims3("gram_matrix")?;
    let flat = tape.reshape(f, &[c, h * w])?;
    let ft = tape.transpose(flat)?;
    let g = tape.matmul(flat, ft)?;
    tape.scale(g, 1.0 / (c * h * w) as f64)
}

fn mean_sq<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let d = tape.sub(a, b)?;
    let s = tape.square(d)?;
    tape.mean(s)
}

fn sum_sq<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let d = tape.sub(a, b)?;
    let s = tape.square(d)?;
    tape.sum(s)
}

fn sum_all<T: Scalar>(tape: &mut Tape<T>, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

/// Mean squared activation difference, summed over the three layers.
pub fn feature_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Var,
    target: Var,
    stack: &PerceptualStack<T>,
) -> Result<Var> {
    same_shape(tape, pred, target, "feature_loss")?;
    let fp = stack.features(tape, pred)?;
    let ft = stack.features(tape, target)?;
    feature_terms(tape, &fp, &ft)
}

fn feature_terms<T: Scalar>(tape: &mut Tape<T>, fp: &[Var; 3], ft: &[Var; 3]) -> Result<Var> {
    let terms = (0..3).map(|i| mean_sq(tape, fp[i], ft[i])).collect::<Result<Vec<_>>>()?;
    sum_all(tape, &terms)
}

/// Squared Frobenius distance between Gram matrices, summed over layers.
pub fn style_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Var,
    target: Var,
    stack: &PerceptualStack<T>,
) -> Result<Var> {
    same_shape(tape, pred, target, "style_loss")?;
    let fp = stack.features(tape, pred)?;
    let ft = stack.features(tape, target)?;
    style_terms(tape, &fp, &ft)
}

fn style_terms<T: Scalar>(tape: &mut Tape<T>, fp: &[Var; 3], ft: &[Var; 3]) -> Result<Var> {
    let terms = (0..3)
        .map(|i| {
            let gp = gram_matrix(tape, fp[i])?;
            let gt = gram_matrix(tape, ft[i])?;
            sum_sq(tape, gp, gt)
        })
        .collect::<Result<Vec<_>>>()?;
    sum_all(tape, &terms)
}

/// Handles of the weighted total and its three unweighted components.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub style: Var,
    pub feature: Var,
    pub pixel: Var,
}

pub fn total_loss<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Var,
    target: Var,
    weights: &LossWeights,
    stack: &PerceptualStack<T>,
) -> Result<LossTerms> {
    weights.validate()?;
    same_shape(tape, pred, target, "total_loss")?;
    let fp = stack.features(tape, pred)?;
    let ft = stack.features(tape, target)?;
    let style = style_terms(tape, &fp, &ft)?;
    let feature = feature_terms(tape, &fp, &ft)?;
    let pixel = pixel_loss(tape, pred, target)?;
    let a = tape.scale(style, weights.alpha)?;
    let b = tape.scale(feature, weights.beta)?;
    let c = tape.scale(pixel, weights.gamma)?;
    let total = sum_all(tape, &[a, b, c])?;
    Ok(LossTerms {
        total,
        style,
        feature,
        pixel,
    })
}

/// Loss values for plain tensors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub total: f64,
    pub style: f64,
    pub feature: f64,
    pub pixel: f64,
}

pub fn evaluate_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    weights: &LossWeights,
    stack: &PerceptualStack<T>,
) -> Result<LossValues> {
    let mut tape = Tape::new();
    let p = tape.input(pred.clone(), false)?;
    let t = tape.input(target.clone(), false)?;
    let terms = total_loss(&mut tape, p, t, weights, stack)?;
    let v = |x: Var| tape.value(x).data()[0].as_f64();
    Ok(LossValues {
        total: v(terms.total),
        style: v(terms.style),
        feature: v(terms.feature),
        pixel: v(terms.pixel),
    })
}
