//! Dense row-major tensors and the forward kernels used by the tape.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward root must be a scalar, got {len} elements")]
    NotScalar { len: usize },
    #[error("backward root is not connected to any differentiable leaf")]
    DetachedRoot,
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("index {index} out of range for {op} (extent {extent})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

fn mismatch(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}

/// An n-dimensional array of finite values in contiguous row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    /// Builds a tensor, checking that the extents cover `data` exactly and
    /// that every element is finite.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(mismatch("new", format!("zero extent in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(mismatch(
                "new",
                format!("shape {shape:?} needs {n} elements, got {}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "new" });
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor from values already known to be finite and correctly sized.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![value; n])
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Mutable access for in-place parameter updates.
    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Element at a multi-index.
    pub fn at(&self, index: &[usize]) -> T {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        let mut flat = 0;
        for (i, (&ix, &ext)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < ext, "index {ix} out of range on axis {i}");
            flat = flat * ext + ix;
        }
        self.data[flat]
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(TensorError::NotScalar {
                len: self.data.len(),
            })
        }
    }

    /// Last extent, the "feature" axis for row-wise ops.
    pub fn row_len(&self) -> usize {
        *self.shape.last().expect("tensors have rank >= 1")
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.row_len()
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {:?}", self.shape, shape),
            ));
        }
        Ok(Self::from_parts(shape.to_vec(), self.data.clone()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(mismatch(
                op,
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Matrix product of `[M, K]` and `[K, P]`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.ndim() != 2 || rhs.ndim() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(mismatch(
                "matmul",
                format!("{:?} x {:?}", self.shape, rhs.shape),
            ));
        }
        let (m, k, p) = (self.shape[0], self.shape[1], rhs.shape[1]);
        let mut out = vec![T::zero(); m * p];
        for i in 0..m {
            let row = &mut out[i * p..(i + 1) * p];
            for kk in 0..k {
                let a = self.data[i * k + kk];
                if a == T::zero() {
                    continue;
                }
                let b = &rhs.data[kk * p..(kk + 1) * p];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Ok(Self::from_parts(vec![m, p], out))
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.ndim() != 2 {
            return Err(mismatch("transpose", format!("rank {}", self.ndim())));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Ok(Self::from_parts(vec![c, r], out))
    }

    /// Row-wise softmax over the last axis, using max subtraction.
    pub fn softmax(&self) -> Self {
        let c = self.row_len();
        let mut out = self.data.clone();
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        Self::from_parts(self.shape.clone(), out)
    }

    /// Row-wise log-softmax over the last axis.
    pub fn log_softmax(&self) -> Self {
        let c = self.row_len();
        let mut out = self.data.clone();
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        Self::from_parts(self.shape.clone(), out)
    }

    /// Divides every trailing-axis vector by `max(norm, eps)`.
    pub fn l2_normalize(&self, eps: T) -> Self {
        let d = self.row_len();
        let mut out = self.data.clone();
        for row in out.chunks_mut(d) {
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            let denom = norm.max(eps);
            for v in row.iter_mut() {
                *v /= denom;
            }
        }
        Self::from_parts(self.shape.clone(), out)
    }

    /// 2-D convolution with zero padding.
    ///
    /// Accepts `[C, H, W]` or batched `[N, C, H, W]` input and a
    /// `[F, C, kh, kw]` kernel; the output keeps the input's rank.
    pub fn conv2d(&self, kernel: &Self, stride: usize, pad: usize) -> Result<Self> {
        let geom = ConvGeometry::new(self.shape(), kernel.shape(), stride, pad)?;
        let mut out = vec![T::zero(); geom.out_len()];
        geom.forward(&self.data, &kernel.data, &mut out);
        Ok(Self::from_parts(geom.out_shape(self.ndim() == 3), out))
    }

    /// 2x2 max pooling with stride 2 over the two trailing axes; odd
    /// trailing rows/columns are dropped.
    pub fn max_pool2(&self) -> Result<Self> {
        Ok(self.max_pool2_with_indices()?.0)
    }

    pub(crate) fn max_pool2_with_indices(&self) -> Result<(Self, Vec<usize>)> {
        if self.ndim() < 3 {
            return Err(mismatch("max_pool2", format!("rank {}", self.ndim())));
        }
        let nd = self.ndim();
        let (h, w) = (self.shape[nd - 2], self.shape[nd - 1]);
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(mismatch("max_pool2", format!("spatial {h}x{w} too small")));
        }
        let planes = self.data.len() / (h * w);
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut idx = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + 2 * i * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let cand = base + (2 * i + di) * w + 2 * j + dj;
                        if self.data[cand] > self.data[best] {
                            best = cand;
                        }
                    }
                    out.push(self.data[best]);
                    idx.push(best);
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[nd - 2] = oh;
        shape[nd - 1] = ow;
        Ok((Self::from_parts(shape, out), idx))
    }
}

/// Resolved extents of one convolution call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn new(x: &[usize], k: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let (n, c, h, w) = match *x {
            [c, h, w] => (1, c, h, w),
            [n, c, h, w] => (n, c, h, w),
            _ => return Err(mismatch("conv2d", format!("input rank {}", x.len()))),
        };
        let [f, kc, kh, kw] = *k else {
            return Err(mismatch("conv2d", format!("kernel shape {k:?}")));
        };
        if kc != c {
            return Err(mismatch(
                "conv2d",
                format!("input has {c} channels, kernel expects {kc}"),
            ));
        }
        if stride == 0 {
            return Err(TensorError::InvalidArgument {
                op: "conv2d",
                detail: "stride must be >= 1".into(),
            });
        }
        if kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(mismatch(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {h}x{w} (pad {pad})"),
            ));
        }
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        Ok(Self {
            n,
            c,
            h,
            w,
            f,
            kh,
            kw,
            oh,
            ow,
            stride,
            pad,
        })
    }

    pub fn out_len(&self) -> usize {
        self.n * self.f * self.oh * self.ow
    }

    pub fn out_shape(&self, unbatched: bool) -> Vec<usize> {
        if unbatched {
            vec![self.f, self.oh, self.ow]
        } else {
            vec![self.n, self.f, self.oh, self.ow]
        }
    }

    /// Input coordinate read by output `(oi, oj)` at kernel tap `(ki, kj)`.
    #[inline]
    fn src(&self, oi: usize, oj: usize, ki: usize, kj: usize) -> Option<(usize, usize)> {
        let r = (oi * self.stride + ki).checked_sub(self.pad)?;
        let c = (oj * self.stride + kj).checked_sub(self.pad)?;
        (r < self.h && c < self.w).then_some((r, c))
    }

    /// Visits every (output, input, kernel) flat index triple that contributes.
    #[inline]
    fn for_each_tap(&self, mut visit: impl FnMut(usize, usize, usize)) {
        let (c, h, w, kh, kw) = (self.c, self.h, self.w, self.kh, self.kw);
        for b in 0..self.n {
            for fi in 0..self.f {
                for oi in 0..self.oh {
                    for oj in 0..self.ow {
                        let o = ((b * self.f + fi) * self.oh + oi) * self.ow + oj;
                        for ci in 0..c {
                            for ki in 0..kh {
                                for kj in 0..kw {
                                    if let Some((r, col)) = self.src(oi, oj, ki, kj) {
                                        let xi = ((b * c + ci) * h + r) * w + col;
                                        let kidx = ((fi * c + ci) * kh + ki) * kw + kj;
                                        visit(o, xi, kidx);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward<T: Real>(&self, x: &[T], k: &[T], out: &mut [T]) {
        self.for_each_tap(|o, xi, ki| out[o] += x[xi] * k[ki]);
    }

    pub fn backward<T: Real>(
        &self,
        x: &[T],
        k: &[T],
        dy: &[T],
        mut dx: Option<&mut [T]>,
        mut dk: Option<&mut [T]>,
    ) {
        self.for_each_tap(|o, xi, ki| {
            let g = dy[o];
            if let Some(dx) = dx.as_deref_mut() {
                dx[xi] += g * k[ki];
            }
            if let Some(dk) = dk.as_deref_mut() {
                dk[ki] += g * x[xi];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_f64(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn matmul_identity_and_product() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(a.matmul(&Tensor::identity(2)).unwrap(), a);
        let b = t(&[2, 2], &[5., 6., 7., 8.]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::<f64>::ones(&[2, 3]);
        assert!(matches!(
            a.matmul(&a),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv2d_examples() {
        let x = t(&[1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let k = t(&[1, 1, 1, 1], &[1.]);
        assert_eq!(x.conv2d(&k, 1, 0).unwrap(), x);

        let x = t(&[1, 2, 2], &[1., 2., 3., 4.]);
        let k = Tensor::ones(&[1, 1, 2, 2]);
        let y = x.conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.]);

        let x = Tensor::<f64>::ones(&[3, 4, 4]);
        assert!(matches!(
            x.conv2d(&Tensor::ones(&[1, 1, 3, 3]), 1, 0),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv2d_output_extent_with_stride_and_pad() {
        let x = Tensor::<f64>::ones(&[2, 1, 7, 5]);
        let k = Tensor::ones(&[3, 1, 3, 3]);
        let y = x.conv2d(&k, 2, 1).unwrap();
        // floor((7+2-3)/2)+1 = 4, floor((5+2-3)/2)+1 = 3
        assert_eq!(y.shape(), &[2, 3, 4, 3]);
        // top-left output sees a 2x2 valid window
        assert_eq!(y.data()[0], 4.0);
    }

    #[test]
    fn softmax_examples() {
        let s = t(&[1, 3], &[0., 0., 0.]).softmax();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = t(&[1, 2], &[1000., 0.]).softmax();
        assert!(s.all_finite());
        assert!((s.data()[0] - 1.0).abs() < 1e-15);
        assert!(s.data()[1] < 1e-300 || s.data()[1] == 0.0);
        let s = t(&[1, 3], &[1., 2., 3.]).softmax();
        for (v, e) in s.data().iter().zip([0.09003057, 0.24472847, 0.66524096]) {
            assert!((v - e).abs() < 1e-8);
        }
    }

    #[test]
    fn l2_normalize_examples() {
        assert_eq!(t(&[2], &[3., 4.]).l2_normalize(1e-12).data(), &[0.6, 0.8]);
        assert_eq!(t(&[2], &[1., 0.]).l2_normalize(1e-12).data(), &[1., 0.]);
        assert_eq!(t(&[2], &[0., 0.]).l2_normalize(1e-12).data(), &[0., 0.]);
    }

    #[test]
    fn max_pool_picks_window_max_and_drops_odd_edge() {
        let x = t(&[1, 3, 3], &[1., 5., 0., 2., 3., 0., 9., 9., 9.]);
        let y = x.max_pool2().unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[5.]);
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(Tensor::<f64>::new(vec![2], vec![1.0]).is_err());
        assert!(Tensor::<f64>::new(vec![1], vec![f64::NAN]).is_err());
        assert!(Tensor::<f64>::new(vec![0], vec![]).is_err());
    }
}
