//! Dense row-major tensors and the numeric kernels shared by the forward
//! functions and the tape's adjoints.
//!
//! All reductions run in a fixed order, so every kernel is bitwise
//! deterministic for identical inputs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor, checking that every extent is positive and that the
    /// element count matches the shape. A rank-0 shape holds one element.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::contract("tensor extents must be positive"));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "tensor extents must be positive");
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let mut t = Self::zeros(shape);
        t.data.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.data.len() != 1 {
            return Err(Error::contract("item() on a tensor with more than one element"));
        }
        Ok(self.data[0])
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Element at a 2-D index.
    pub fn at2(&self, i: usize, j: usize) -> T {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        Ok(self.zip_map(other, "max_abs_diff", |a, b| a - b)?.max_abs())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(self, op: &'static str) -> Result<Self> {
        if self.all_finite() {
            Ok(self)
        } else {
            Err(Error::Numeric { op })
        }
    }

    /// Element-wise conversion to another precision.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Transpose of a matrix.
    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2("transpose")?;
        let mut out = Self::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }

    /// Column `j` of a matrix.
    pub fn column(&self, j: usize) -> Result<Vec<T>> {
        let (r, c) = self.dims2("column")?;
        if j >= c {
            return Err(Error::contract("column index out of range"));
        }
        Ok((0..r).map(|i| self.data[i * c + j]).collect())
    }

    /// `(rows, cols)` of a rank-2 tensor, a dimension error otherwise.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::dim(op, &self.shape, &[])),
        }
    }

    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::dim(op, &self.shape, &[])),
        }
    }
}

/// Matrix product `a · b` with the inner index reduced in ascending order.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.dims2("matmul").map_err(|_| Error::dim("matmul", a.shape(), b.shape()))?;
    let (k2, n) = b.dims2("matmul").map_err(|_| Error::dim("matmul", a.shape(), b.shape()))?;
    if k != k2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm_nn(m, k, n, a.data(), b.data(), out.data_mut());
    out.ensure_finite("matmul")
}

/// Stride and zero padding of a 2-D cross-correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn same(kernel: usize) -> Self {
        ConvSpec {
            stride: 1,
            padding: kernel / 2,
        }
    }
}

/// Resolved geometry of one convolution call.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(x: &[usize], k: &[usize], spec: ConvSpec) -> Result<Self> {
        let (cin, h, w) = match x {
            [c, h, w] => (*c, *h, *w),
            _ => return Err(Error::dim("conv2d", x, k)),
        };
        let (cout, kc, kh, kw) = match k {
            [o, c, kh, kw] => (*o, *c, *kh, *kw),
            _ => return Err(Error::dim("conv2d", x, k)),
        };
        if kc != cin {
            return Err(Error::dim("conv2d", x, k));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::contract("conv2d kernel extents must be odd"));
        }
        if spec.stride == 0 {
            return Err(Error::contract("conv2d stride must be positive"));
        }
        let (ph, pw) = (h + 2 * spec.padding, w + 2 * spec.padding);
        if kh > ph || kw > pw {
            return Err(Error::dim("conv2d", x, k));
        }
        Ok(ConvGeom {
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            stride: spec.stride,
            pad: spec.padding,
            oh: (ph - kh) / spec.stride + 1,
            ow: (pw - kw) / spec.stride + 1,
        })
    }

    /// Output columns `[lo, hi)` whose tap `kx` lands inside the input row.
    #[inline]
    fn ox_range(&self, kx: usize) -> (usize, usize) {
        let lo = if kx >= self.pad {
            0
        } else {
            (self.pad - kx).div_ceil(self.stride)
        };
        if self.w + self.pad <= kx {
            return (0, 0);
        }
        let hi = ((self.w - 1 + self.pad - kx) / self.stride + 1).min(self.ow);
        (lo.min(hi), hi)
    }

    #[inline]
    fn iy(&self, oy: usize, ky: usize) -> Option<usize> {
        let y = oy * self.stride + ky;
        (y >= self.pad && y - self.pad < self.h).then(|| y - self.pad)
    }
}

/// 2-D cross-correlation of `x: [C_in, H, W]` with `kernel: [C_out, C_in, kh, kw]`
/// using unit stride and the given zero padding.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, padding: usize) -> Result<Tensor<T>> {
    conv2d_ext(x, kernel, None, ConvSpec { stride: 1, padding })
}

/// [`conv2d`] with an optional per-output-channel bias and a stride.
pub fn conv2d_ext<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: ConvSpec,
) -> Result<Tensor<T>> {
    let g = ConvGeom::new(x.shape(), kernel.shape(), spec)?;
    if let Some(b) = bias {
        if b.len() != g.cout {
            return Err(Error::dim("conv2d bias", b.shape(), kernel.shape()));
        }
    }
    let mut out = Tensor::zeros(&[g.cout, g.oh, g.ow]);
    conv_forward(&g, x.data(), kernel.data(), bias.map(|b| b.data()), out.data_mut());
    out.ensure_finite("conv2d")
}

/// Softmax over the first of the last two axes: for an input `[.., q, q]`
/// every column of every trailing matrix sums to one.
pub fn softmax_cols<T: Scalar>(s: &Tensor<T>) -> Result<Tensor<T>> {
    if !s.all_finite() {
        return Err(Error::Numeric { op: "softmax_cols" });
    }
    let r = s.rank();
    if r < 2 {
        return Err(Error::dim("softmax_cols", s.shape(), &[]));
    }
    let (rows, cols) = (s.shape()[r - 2], s.shape()[r - 1]);
    let mut out = s.clone();
    softmax_cols_in_place(rows, cols, out.data_mut());
    Ok(out)
}

pub(crate) fn softmax_cols_in_place<T: Scalar>(rows: usize, cols: usize, data: &mut [T]) {
    let mut max = vec![T::neg_infinity(); cols];
    let mut sum = vec![T::zero(); cols];
    for block in data.chunks_exact_mut(rows * cols) {
        max.iter_mut().for_each(|m| *m = T::neg_infinity());
        sum.iter_mut().for_each(|s| *s = T::zero());
        for row in block.chunks_exact(cols) {
            for (m, &v) in max.iter_mut().zip(row) {
                *m = m.max(v);
            }
        }
        for row in block.chunks_exact_mut(cols) {
            for ((v, &m), s) in row.iter_mut().zip(&max).zip(sum.iter_mut()) {
                *v = (*v - m).exp();
                *s += *v;
            }
        }
        for row in block.chunks_exact_mut(cols) {
            for (v, &s) in row.iter_mut().zip(&sum) {
                *v /= s;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// kernels

/// `y += a * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight interleaved partial sums combined in a fixed order.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    T::gemm_acc(m, k, n, a, (k, 1), b, (n, 1), c, (n, 1));
}

/// `c[m×k] += a[m×n] · b[k×n]ᵀ`
pub(crate) fn gemm_nt<T: Scalar>(m: usize, n: usize, k: usize, a: &[T], b: &[T], c: &mut [T]) {
    T::gemm_acc(m, n, k, a, (n, 1), b, (1, n), c, (k, 1));
}

/// `c[k×n] += a[m×k]ᵀ · b[m×n]`
pub(crate) fn gemm_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    T::gemm_acc(k, m, n, a, (1, k), b, (n, 1), c, (n, 1));
}

impl ConvGeom {
    fn patch_rows(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    /// Unfolds `x` into `[cin·kh·kw, oh·ow]`, zero outside the image.
    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let plane = self.oh * self.ow;
        let mut cols = vec![T::zero(); self.patch_rows() * plane];
        for c in 0..self.cin {
            let iplane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let r = (c * self.kh + ky) * self.kw + kx;
                    let row = &mut cols[r * plane..(r + 1) * plane];
                    let (lo, hi) = self.ox_range(kx);
                    for oy in 0..self.oh {
                        let Some(iy) = self.iy(oy, ky) else { continue };
                        let irow = &iplane[iy * self.w..(iy + 1) * self.w];
                        let orow = &mut row[oy * self.ow..(oy + 1) * self.ow];
                        if self.stride == 1 {
                            let ix0 = lo + kx - self.pad;
                            orow[lo..hi].copy_from_slice(&irow[ix0..ix0 + (hi - lo)]);
                        } else {
                            for ox in lo..hi {
                                orow[ox] = irow[ox * self.stride + kx - self.pad];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`im2col`](Self::im2col): adds every patch entry back
    /// onto the pixel it was read from.
    fn col2im_add<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let plane = self.oh * self.ow;
        for c in 0..self.cin {
            let iplane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let r = (c * self.kh + ky) * self.kw + kx;
                    let row = &cols[r * plane..(r + 1) * plane];
                    let (lo, hi) = self.ox_range(kx);
                    for oy in 0..self.oh {
                        let Some(iy) = self.iy(oy, ky) else { continue };
                        let irow = &mut iplane[iy * self.w..(iy + 1) * self.w];
                        let orow = &row[oy * self.ow..(oy + 1) * self.ow];
                        if self.stride == 1 {
                            let ix0 = lo + kx - self.pad;
                            for (d, &v) in irow[ix0..ix0 + (hi - lo)].iter_mut().zip(&orow[lo..hi]) {
                                *d += v;
                            }
                        } else {
                            for ox in lo..hi {
                                irow[ox * self.stride + kx - self.pad] += orow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T], bias: Option<&[T]>, out: &mut [T]) {
    let plane = g.oh * g.ow;
    if let Some(b) = bias {
        for (o, oplane) in out.chunks_exact_mut(plane).enumerate() {
            oplane.iter_mut().for_each(|v| *v = b[o]);
        }
    }
    let r = g.patch_rows();
    if g.is_pointwise() {
        gemm_nn(g.cout, r, plane, w, x, out);
    } else {
        gemm_nn(g.cout, r, plane, w, &g.im2col(x), out);
    }
}

pub(crate) fn conv_backward_input<T: Scalar>(g: &ConvGeom, dout: &[T], w: &[T], dx: &mut [T]) {
    let plane = g.oh * g.ow;
    let r = g.patch_rows();
    if g.is_pointwise() {
        gemm_tn(g.cout, r, plane, w, dout, dx);
    } else {
        let mut dcols = vec![T::zero(); r * plane];
        gemm_tn(g.cout, r, plane, w, dout, &mut dcols);
        g.col2im_add(&dcols, dx);
    }
}

pub(crate) fn conv_backward_weight<T: Scalar>(g: &ConvGeom, x: &[T], dout: &[T], dw: &mut [T]) {
    let plane = g.oh * g.ow;
    let r = g.patch_rows();
    if g.is_pointwise() {
        gemm_nt(g.cout, plane, r, dout, x, dw);
    } else {
        gemm_nt(g.cout, plane, r, dout, &g.im2col(x), dw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let b = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let eye = t(&[2, 2], &[1., 0., 0., 1.]);
        assert_eq!(matmul(&eye, &b).unwrap(), b);
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        let ones = t(&[2, 1], &[1., 1.]);
        assert_eq!(matmul(&a, &ones).unwrap().data(), &[3., 7.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let err = matmul(&a, &a).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
    }

    #[test]
    fn conv_identity_kernel() {
        let x = Tensor::from_fn(&[1, 4, 5], |i| i as f64 * 0.5);
        let k = t(&[1, 1, 1, 1], &[1.]);
        assert_eq!(conv2d(&x, &k, 0).unwrap(), x);
    }

    #[test]
    fn conv_constant_image_interior() {
        let x = Tensor::full(&[1, 5, 5], 7.0f64);
        let k = Tensor::ones(&[1, 1, 3, 3]);
        let y = conv2d(&x, &k, 0).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 63.0));
        // with padding the corner sees four taps
        let y = conv2d(&x, &k, 1).unwrap();
        assert_eq!(y.shape(), &[1, 5, 5]);
        assert_eq!(y.data()[0], 28.0);
        assert_eq!(y.data()[12], 63.0);
    }

    #[test]
    fn conv_rejects_even_and_oversized_kernels() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4]);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(&[1, 1, 2, 2]), 0),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(&[1, 1, 7, 7]), 0),
            Err(Error::Dimension { .. })
        ));
    }

    /// Direct quadruple-loop reference for strided, padded, biased convolution.
    fn conv_reference(x: &Tensor<f64>, k: &Tensor<f64>, b: &[f64], s: usize, p: usize) -> Tensor<f64> {
        let (cin, h, w) = x.dims3("").unwrap();
        let (cout, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
        let oh = (h + 2 * p - kh) / s + 1;
        let ow = (w + 2 * p - kw) / s + 1;
        Tensor::from_fn(&[cout, oh, ow], |idx| {
            let (o, oy, ox) = (idx / (oh * ow), (idx / ow) % oh, idx % ow);
            let mut acc = b[o];
            for c in 0..cin {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * s + ky) as isize - p as isize;
                        let ix = (ox * s + kx) as isize - p as isize;
                        if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                            acc += k.data()[((o * cin + c) * kh + ky) * kw + kx]
                                * x.data()[(c * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn conv_matches_reference_across_strides() {
        let x = Tensor::from_fn(&[3, 7, 6], |i| ((i * 37 % 11) as f64 - 5.0) * 0.1);
        let k = Tensor::from_fn(&[2, 3, 3, 3], |i| ((i * 13 % 7) as f64 - 3.0) * 0.2);
        let b = t(&[2], &[0.5, -1.0]);
        for (s, p) in [(1, 0), (1, 1), (2, 1), (2, 0), (3, 2)] {
            let got = conv2d_ext(&x, &k, Some(&b), ConvSpec { stride: s, padding: p }).unwrap();
            let want = conv_reference(&x, &k, b.data(), s, p);
            assert_eq!(got.shape(), want.shape());
            assert!(got.max_abs_diff(&want).unwrap() < 1e-12, "stride {s} pad {p}");
        }
    }

    #[test]
    fn softmax_examples() {
        let z = softmax_cols(&Tensor::<f64>::zeros(&[2, 2])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.5));
        let s = t(&[2, 1], &[1.0, 0.0]);
        let a = softmax_cols(&s).unwrap();
        let e = core::f64::consts::E;
        assert!((a.data()[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((a.data()[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((a.data()[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn softmax_rejects_nan() {
        let s = t(&[2, 2], &[0.0, f64::NAN, 1.0, 2.0]);
        assert_eq!(softmax_cols(&s), Err(Error::Numeric { op: "softmax_cols" }));
    }

    #[test]
    fn tensor_rejects_bad_shapes() {
        assert!(Tensor::<f32>::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f32>::new(vec![0, 2], vec![]).is_err());
        assert!(Tensor::<f32>::new(vec![], vec![1.0]).unwrap().is_scalar());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_columns_sum_to_one_and_shift_invariant(
                vals in proptest::collection::vec(-20.0f64..20.0, 16),
                shift in -50.0f64..50.0,
                col in 0usize..4,
            ) {
                let s = Tensor::new(vec![4, 4], vals).unwrap();
                let a = softmax_cols(&s).unwrap();
                for j in 0..4 {
                    let sum: f64 = (0..4).map(|i| a.at2(i, j)).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-6);
                }
                prop_assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));
                let mut shifted = s.clone();
                for i in 0..4 {
                    shifted.data_mut()[i * 4 + col] += shift;
                }
                let b = softmax_cols(&shifted).unwrap();
                for i in 0..4 {
                    prop_assert!((a.at2(i, col) - b.at2(i, col)).abs() < 1e-12);
                }
            }

            #[test]
            fn kernels_are_bitwise_repeatable(
                vals in proptest::collection::vec(-1.0f32..1.0, 2 * 5 * 5),
                kv in proptest::collection::vec(-1.0f32..1.0, 3 * 2 * 3 * 3),
            ) {
                let x = Tensor::new(vec![2, 5, 5], vals).unwrap();
                let k = Tensor::new(vec![3, 2, 3, 3], kv).unwrap();
                prop_assert_eq!(conv2d(&x, &k, 1).unwrap(), conv2d(&x, &k, 1).unwrap());
                let a = x.clone().reshape(&[10, 5]).unwrap();
                let b = a.transpose().unwrap();
                prop_assert_eq!(matmul(&a, &b).unwrap(), matmul(&a, &b).unwrap());
            }
        }
    }
}
