//! A forward-only evaluation of grouped attention that keeps one group's
//! working set at a time and counts its multiply-adds. Used to measure how
//! cost scales with the position count at sizes the tape could not hold.

use alloc::vec;
use alloc::vec::Vec;

use super::grouping::Grouping;
use super::layer::AttentionWeights;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{self, Tensor};

/// Multiply-adds spent in the linear projections and in the pairwise
/// affinity and mixing products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MacCount {
    pub projection: u64,
    pub attention: u64,
}

impl MacCount {
    pub fn total(&self) -> u64 {
        self.projection + self.attention
    }
}

pub fn counted_stage<T: Scalar>(
    x: &Tensor<T>,
    grouping: &Grouping,
    w: &AttentionWeights<T>,
    count: &mut MacCount,
) -> Result<Tensor<T>> {
    let (c, n) = x.dims2("counted_stage")?;
    if w.channels() != c {
        return Err(Error::dim("counted_stage", x.shape(), w.wf.shape()));
    }
    if grouping.positions() != n {
        return Err(Error::Factorization {
            n,
            parts: grouping.parts,
        });
    }
    let d = w.key_dim();
    let q = grouping.group_size;
    let project = |m: &Tensor<T>, count: &mut MacCount| {
        let mut out = vec![T::zero(); d * n];
        tensor::gemm_nn(d, c, n, m.data(), x.data(), &mut out);
        count.projection += (d * c * n) as u64;
        out
    };
    let f = project(&w.wf, count);
    let g = project(&w.wg, count);
    let h = project(&w.wh, count);

    let scale = T::from_f64(1.0 / libm::sqrt(d as f64));
    let mut y = vec![T::zero(); d * n];
    // group members as rows of length d
    let (mut ft, mut gt, mut ht) = (vec![T::zero(); q * d], vec![T::zero(); q * d], vec![T::zero(); q * d]);
    let mut col: Vec<T> = vec![T::zero(); q];
    let mut acc = vec![T::zero(); d];
    for members in grouping.groups() {
        for (i, &pi) in members.iter().enumerate() {
            for r in 0..d {
                ft[i * d + r] = f[r * n + pi];
                gt[i * d + r] = g[r * n + pi];
                ht[i * d + r] = h[r * n + pi];
            }
        }
        for (j, &pj) in members.iter().enumerate() {
            let gj = &gt[j * d..(j + 1) * d];
            for (i, s) in col.iter_mut().enumerate() {
                *s = tensor::dot(&ft[i * d..(i + 1) * d], gj) * scale;
            }
            tensor::softmax_cols_in_place(q, 1, &mut col);
            acc.iter_mut().for_each(|v| *v = T::zero());
            for (i, &a) in col.iter().enumerate() {
                tensor::axpy(a, &ht[i * d..(i + 1) * d], &mut acc);
            }
            for (r, &v) in acc.iter().enumerate() {
                y[r * n + pj] = v;
            }
        }
        count.attention += (2 * q * q * d) as u64;
    }
    let mut z = Tensor::zeros(&[c, n]);
    tensor::gemm_nn(c, d, n, w.wv.data(), &y, z.data_mut());
    count.projection += (c * d * n) as u64;
    Ok(z)
}

/// Runs the stages in order.
pub fn counted_forward<T: Scalar>(
    x: &Tensor<T>,
    stages: &[(Grouping, AttentionWeights<T>)],
    count: &mut MacCount,
) -> Result<Tensor<T>> {
    let mut z = x.clone();
    for (g, w) in stages {
        z = counted_stage(&z, g, w, count)?;
    }
    Ok(z)
}
