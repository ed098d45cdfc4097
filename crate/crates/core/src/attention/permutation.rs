use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A bijection on `0..n` stored with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (j, &i) in forward.iter().enumerate() {
            if i >= n || inverse[i] != usize::MAX {
                return Err(Error::contract("permutation entries must be distinct indices in 0..n"));
            }
            inverse[i] = j;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(j, &i)| i == j)
    }

    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// Applying `self` and then `next` to the columns of a matrix.
    pub fn then(&self, next: &Permutation) -> Result<Permutation> {
        if next.len() != self.len() {
            return Err(Error::dim("permutation", &[self.len()], &[next.len()]));
        }
        Permutation::new(next.forward.iter().map(|&j| self.forward[j]).collect())
    }
}

/// The permutation that makes every stride-`p` class of `0..n` contiguous:
/// class `g = {g + j·p}` occupies slots `[g·(n/p), (g+1)·(n/p))`.
pub fn interlace_permutation(n: usize, p: usize) -> Result<Permutation> {
    if p == 0 || n == 0 || n % p != 0 {
        return Err(Error::Factorization { n, parts: p });
    }
    let q = n / p;
    let forward = (0..p).flat_map(|g| (0..q).map(move |j| g + j * p)).collect();
    Ok(Permutation {
        inverse: {
            let mut inv = vec![0; n];
            for g in 0..p {
                for j in 0..q {
                    inv[g + j * p] = g * q + j;
                }
            }
            inv
        },
        forward,
    })
}

/// Reorders the columns of `x: [C, N]`: output column `j` is input column
/// `perm.forward()[j]`.
pub fn apply_permutation<T: Scalar>(x: &Tensor<T>, perm: &Permutation) -> Result<Tensor<T>> {
    let (c, n) = x.dims2("apply_permutation")?;
    if perm.len() != n {
        return Err(Error::dim("apply_permutation", x.shape(), &[perm.len()]));
    }
    let src = x.data();
    let mut out = Tensor::zeros(&[c, n]);
    for (orow, irow) in out.data_mut().chunks_exact_mut(n).zip(src.chunks_exact(n)) {
        for (o, &i) in orow.iter_mut().zip(&perm.forward) {
            *o = irow[i];
        }
    }
    Ok(out)
}
