//! Dense NCHW tensors and the kernels the attention blocks are built from.
//!
//! Every forward kernel in [`ops`] has a matching vector-Jacobian product in
//! [`backward`]. There is no autodiff graph: blocks chain the backward kernels
//! by hand. [`op::Op`] exposes the kernels behind one uniform interface so
//! [`gradcheck`] can verify them.

pub mod backward;
pub mod gradcheck;
pub mod op;
pub mod ops;

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::Scalar;

pub use gradcheck::{gradcheck, GradCheckReport};
pub use op::{Differentiable, Op};

/// Extents in batch, channel, height, width order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn spatial(&self) -> usize {
        self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.n, self.c, self.h, self.w)
    }
}

impl From<[usize; 4]> for Shape {
    fn from(d: [usize; 4]) -> Self {
        Self::new(d[0], d[1], d[2], d[3])
    }
}

/// Row-major 4-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Shape>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.numel() {
            return shape_err(format!(
                "shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Shape>, value: T) -> Self {
        let shape = shape.into();
        Self { shape, data: vec![value; shape.numel()] }
    }

    pub fn from_fn(shape: impl Into<Shape>, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Self { shape, data }
    }

    /// Values drawn uniformly from `[lo, hi)`.
    pub fn random_uniform<R: Rng + ?Sized>(shape: impl Into<Shape>, lo: f64, hi: f64, rng: &mut R) -> Self {
        let shape = shape.into();
        let data = (0..shape.numel()).map(|_| T::lit(rng.gen_range(lo..hi))).collect();
        Self { shape, data }
    }

    /// Flat vector stored as shape `[1, 1, 1, len]`.
    pub fn from_vec(values: Vec<T>) -> Self {
        Self { shape: Shape::new(1, 1, 1, values.len()), data: values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        let s = self.shape;
        ((n * s.c + c) * s.h + h) * s.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.offset(n, c, h, w)]
    }

    /// Contiguous `h*w` plane of one (batch, channel) pair.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.shape.spatial();
        let start = (n * self.shape.c + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let hw = self.shape.spatial();
        let start = (n * self.shape.c + c) * hw;
        &mut self.data[start..start + hw]
    }

    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err(format!("elementwise shapes differ: {} vs {}", self.shape, other.shape));
        }
        Ok(Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return shape_err(format!("dot shapes differ: {} vs {}", self.shape, other.shape));
        }
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<T> {
        (self.shape == other.shape).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| (a - b).abs())
                .fold(T::zero(), T::max)
        })
    }

    /// Copies `len` channels starting at `start`.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        let s = self.shape;
        if start + len > s.c {
            return shape_err(format!("channel slice {start}..{} outside {} channels", start + len, s.c));
        }
        let hw = s.spatial();
        let mut data = Vec::with_capacity(s.n * len * hw);
        for n in 0..s.n {
            let base = (n * s.c + start) * hw;
            data.extend_from_slice(&self.data[base..base + len * hw]);
        }
        Ok(Self { shape: Shape::new(s.n, len, s.h, s.w), data })
    }

    /// Plain-text fixture: a header line `N C H W`, then one line of
    /// whitespace-separated values per image row, in row-major order.
    pub fn to_fixture(&self) -> String {
        let s = self.shape;
        let mut out = format!("{} {} {} {}\n", s.n, s.c, s.h, s.w);
        if s.w > 0 {
            for row in self.data.chunks(s.w) {
                let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }

    /// Parses the format written by [`Tensor::to_fixture`]. Line breaks after
    /// the header are not significant.
    pub fn from_fixture(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty tensor fixture".into()))?;
        let dims = parse_usizes(header)?;
        if dims.len() != 4 {
            return Err(Error::Parse(format!("fixture header needs 4 extents, got {}", dims.len())));
        }
        let mut values = Vec::new();
        for line in lines {
            for tok in line.split_whitespace() {
                values.push(parse_real::<T>(tok)?);
            }
        }
        Self::new([dims[0], dims[1], dims[2], dims[3]], values)
    }
}

impl<T: Scalar> Index<[usize; 4]> for Tensor<T> {
    type Output = T;
    fn index(&self, i: [usize; 4]) -> &T {
        &self.data[self.offset(i[0], i[1], i[2], i[3])]
    }
}

impl<T: Scalar> IndexMut<[usize; 4]> for Tensor<T> {
    fn index_mut(&mut self, i: [usize; 4]) -> &mut T {
        let o = self.offset(i[0], i[1], i[2], i[3]);
        &mut self.data[o]
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return shape_err(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn random_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| T::lit(rng.gen_range(lo..hi))).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Stored as a `[1, 1, rows, cols]` tensor for the uniform op interface.
    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor { shape: Shape::new(1, 1, self.rows, self.cols), data: self.data.clone() }
    }

    pub fn from_tensor(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.n != 1 || s.c != 1 {
            return shape_err(format!("matrix tensor must be [1, 1, rows, cols], got {s}"));
        }
        Self::new(s.h, s.w, t.data().to_vec())
    }
}

pub(crate) fn parse_usizes(line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
        .collect()
}

pub(crate) fn parse_real<T: Scalar>(tok: &str) -> Result<T> {
    let v: f64 = tok.parse().map_err(|e| Error::Parse(format!("`{tok}`: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value `{tok}`")));
    }
    Ok(T::lit(v))
}
