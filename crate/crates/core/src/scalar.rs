use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Element type of a [`Tensor`](crate::Tensor).
///
/// `f32` is used for training and inference, `f64` for gradient and
/// oracle verification.
pub trait Scalar:
    Float
    + Default
    + Debug
    + Display
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c += a·b` for an `m×k` by `k×n` product over strided views; strides
    /// are in elements as (row, column) pairs.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], sa: (usize, usize), b: &[Self], sb: (usize, usize), c: &mut [Self], sc: (usize, usize));
}

/// Largest offset a strided `rows×cols` view touches, plus one.
fn extent(rows: usize, cols: usize, (rs, cs): (usize, usize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! gemm_impl {
    ($t:ty, $f:path) => {
        #[inline]
        fn gemm_acc(
            m: usize,
            k: usize,
            n: usize,
            a: &[$t],
            sa: (usize, usize),
            b: &[$t],
            sb: (usize, usize),
            c: &mut [$t],
            sc: (usize, usize),
        ) {
            assert!(extent(m, k, sa) <= a.len() && extent(k, n, sb) <= b.len() && extent(m, n, sc) <= c.len());
            if m == 0 || n == 0 || k == 0 {
                return;
            }
            // SAFETY: the assertion keeps every strided access inside its
            // slice, and `c` is exclusively borrowed.
            unsafe {
                $f(
                    m,
                    k,
                    n,
                    1.0,
                    a.as_ptr(),
                    sa.0 as isize,
                    sa.1 as isize,
                    b.as_ptr(),
                    sb.0 as isize,
                    sb.1 as isize,
                    1.0,
                    c.as_mut_ptr(),
                    sc.0 as isize,
                    sc.1 as isize,
                )
            }
        }
    };
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    gemm_impl!(f32, matrixmultiply::sgemm);
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    gemm_impl!(f64, matrixmultiply::dgemm);
}
