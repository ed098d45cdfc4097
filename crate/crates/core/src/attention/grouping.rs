use alloc::vec::Vec;

use super::permutation::{interlace_permutation, Permutation};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupMode {
    /// Members sit at a fixed large stride.
    LongRange,
    /// Members are adjacent.
    ShortRange,
}

/// How one attention stage partitions the positions.
///
/// After reordering the columns by `perm`, group `p` is the contiguous slice
/// `[p·group_size, (p+1)·group_size)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub mode: GroupMode,
    pub parts: usize,
    pub group_size: usize,
    pub perm: Permutation,
}

impl Grouping {
    /// `parts` groups, each holding the positions congruent modulo `parts`.
    pub fn long_range(n: usize, parts: usize) -> Result<Self> {
        let perm = interlace_permutation(n, parts)?;
        Ok(Grouping {
            mode: GroupMode::LongRange,
            parts,
            group_size: n / parts,
            perm,
        })
    }

    /// Long-range grouping applied independently inside each contiguous
    /// block of `block` positions, with `parts_per_block` groups per block.
    pub fn long_range_within(n: usize, block: usize, parts_per_block: usize) -> Result<Self> {
        if block == 0 || n % block != 0 {
            return Err(Error::Factorization { n, parts: block });
        }
        let inner = interlace_permutation(block, parts_per_block)?;
        let forward: Vec<usize> = (0..n / block)
            .flat_map(|b| inner.forward().iter().map(move |&i| b * block + i))
            .collect();
        Ok(Grouping {
            mode: GroupMode::LongRange,
            parts: (n / block) * parts_per_block,
            group_size: block / parts_per_block,
            perm: Permutation::new(forward)?,
        })
    }

    /// Contiguous groups of `size` positions.
    pub fn short_range(n: usize, size: usize) -> Result<Self> {
        if size == 0 || n % size != 0 {
            return Err(Error::Factorization { n, parts: size });
        }
        Ok(Grouping {
            mode: GroupMode::ShortRange,
            parts: n / size,
            group_size: size,
            perm: Permutation::identity(n),
        })
    }

    /// A single group over all positions.
    pub fn dense(n: usize) -> Result<Self> {
        Self::short_range(n, n)
    }

    pub fn positions(&self) -> usize {
        self.parts * self.group_size
    }

    /// The same partition expressed on columns that were first reordered by
    /// `outer`.
    pub fn after(&self, outer: &Permutation) -> Result<Self> {
        Ok(Grouping {
            mode: self.mode,
            parts: self.parts,
            group_size: self.group_size,
            perm: outer.then(&self.perm)?,
        })
    }

    /// Original position indices of every group, in group order.
    pub fn groups(&self) -> impl Iterator<Item = &[usize]> {
        self.perm.forward().chunks_exact(self.group_size)
    }
}
