//! Periodic uniform grids on the unit torus, cell-centred fields and the
//! discrete operators shared by every solver.

use std::ops::{Index, IndexMut};

use crate::error::{Result, SolverError};
use crate::scalar::Real;

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    n: usize,
    length: T,
    dx: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(SolverError::InvalidInput(format!(
                "grid needs at least {MIN_CELLS} cells, got {n}"
            )));
        }
        let length = T::one();
        Ok(Self {
            n,
            length,
            dx: length / T::from_usize_lossy(n),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    /// Cell centre of cell `i`.
    #[inline]
    pub fn x(&self, i: usize) -> T {
        (T::from_usize_lossy(i) + T::lit(0.5)) * self.dx
    }

    /// Position of the face between cells `i` and `i + 1`.
    #[inline]
    pub fn x_face(&self, i: usize) -> T {
        T::from_usize_lossy(i + 1) * self.dx
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(T) -> T) -> Field1D<T> {
        Field1D::from_vec((0..self.n).map(|i| f(self.x(i))).collect())
    }
}

/// Cell-centred scalar field with periodic indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D<T> {
    values: Vec<T>,
}

impl<T: Real> Field1D<T> {
    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, T::zero())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Periodic access: `i` may be any integer offset.
    #[inline]
    pub fn at(&self, i: isize) -> T {
        let n = self.values.len() as isize;
        self.values[i.rem_euclid(n) as usize]
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.values.iter()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_vec(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<usize> for Field1D<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T> IndexMut<usize> for Field1D<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.values[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    #[default]
    Central,
    /// `(f[i+1] - f[i]) / dx`, i.e. the derivative on the face to the right of cell `i`.
    Forward,
    Backward,
}

pub fn ddx_periodic<T: Real>(f: &Field1D<T>, g: &Grid1D<T>, scheme: DiffScheme) -> Field1D<T> {
    let n = f.len() as isize;
    let dx = g.dx();
    let two_dx = dx + dx;
    let out = (0..n)
        .map(|i| match scheme {
            DiffScheme::Central => (f.at(i + 1) - f.at(i - 1)) / two_dx,
            DiffScheme::Forward => (f.at(i + 1) - f.at(i)) / dx,
            DiffScheme::Backward => (f.at(i) - f.at(i - 1)) / dx,
        })
        .collect();
    Field1D::from_vec(out)
}

/// Midpoint quadrature over the unit torus.
pub fn integrate<T: Real>(f: &Field1D<T>, g: &Grid1D<T>) -> T {
    f.iter().copied().sum::<T>() * g.dx()
}

/// Midpoint quadrature of an arbitrary per-cell expression.
pub fn integrate_with<T: Real>(g: &Grid1D<T>, f: impl Fn(usize) -> T) -> T {
    (0..g.n()).map(f).sum::<T>() * g.dx()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    dx: T,
    dy: T,
}

impl<T: Real> Grid2D<T> {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(SolverError::InvalidInput(format!(
                "grid needs at least {MIN_CELLS} cells per direction, got {nx}x{ny}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            dx: T::one() / T::from_usize_lossy(nx),
            dy: T::one() / T::from_usize_lossy(ny),
        })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }
    #[inline]
    pub fn dy(&self) -> T {
        self.dy
    }
    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    /// Flat index of cell `(i, j)` with periodic wrap; `i` runs along `x1`.
    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        let i = i.rem_euclid(self.nx as isize) as usize;
        let j = j.rem_euclid(self.ny as isize) as usize;
        i + self.nx * j
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        (T::from_usize_lossy(i) + T::lit(0.5)) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> T {
        (T::from_usize_lossy(j) + T::lit(0.5)) * self.dy
    }

    pub fn sample(&self, f: impl Fn(T, T) -> T) -> Field2D<T> {
        let mut values = Vec::with_capacity(self.cells());
        for j in 0..self.ny {
            for i in 0..self.nx {
                values.push(f(self.x(i), self.y(j)));
            }
        }
        Field2D { values }
    }
}

/// Cell-centred scalar field on a [`Grid2D`], stored with `x1` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D<T> {
    values: Vec<T>,
}

impl<T: Real> Field2D<T> {
    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(g: &Grid2D<T>, c: T) -> Self {
        Self {
            values: vec![c; g.cells()],
        }
    }

    pub fn zeros(g: &Grid2D<T>) -> Self {
        Self::constant(g, T::zero())
    }

    #[inline]
    pub fn get(&self, g: &Grid2D<T>, i: isize, j: isize) -> T {
        self.values[g.idx(i, j)]
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Two-component vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2D<T> {
    pub c1: Field2D<T>,
    pub c2: Field2D<T>,
}

impl<T: Real> VectorField2D<T> {
    pub fn zeros(g: &Grid2D<T>) -> Self {
        Self {
            c1: Field2D::zeros(g),
            c2: Field2D::zeros(g),
        }
    }

    pub fn max_abs(&self) -> T {
        self.c1
            .values()
            .iter()
            .chain(self.c2.values())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> (T, T) {
        let n = T::from_usize_lossy(self.c1.len());
        (
            self.c1.values().iter().copied().sum::<T>() / n,
            self.c2.values().iter().copied().sum::<T>() / n,
        )
    }
}

/// Symmetric 2x2 tensor per cell, stored by its independent entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2D<T> {
    pub d11: Vec<T>,
    pub d12: Vec<T>,
    pub d22: Vec<T>,
}

impl<T: Real> TensorField2D<T> {
    /// Frobenius norm `|D| = sqrt(D:D)` in cell `k`.
    #[inline]
    pub fn norm(&self, k: usize) -> T {
        self.norm_sq(k).sqrt()
    }

    #[inline]
    pub fn norm_sq(&self, k: usize) -> T {
        let (a, b, c) = (self.d11[k], self.d12[k], self.d22[k]);
        a * a + (b * b + b * b) + c * c
    }

    #[inline]
    pub fn trace(&self, k: usize) -> T {
        self.d11[k] + self.d22[k]
    }

    pub fn len(&self) -> usize {
        self.d11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d11.is_empty()
    }

    pub fn max_norm(&self) -> T {
        (0..self.len()).fold(T::zero(), |m, k| m.max(self.norm(k)))
    }
}

/// Central-difference partial derivatives `(d/dx1, d/dx2)` of a scalar field.
pub fn grad_central_2d<T: Real>(f: &Field2D<T>, g: &Grid2D<T>) -> (Vec<T>, Vec<T>) {
    let two_dx = g.dx() + g.dx();
    let two_dy = g.dy() + g.dy();
    let mut d1 = Vec::with_capacity(g.cells());
    let mut d2 = Vec::with_capacity(g.cells());
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            d1.push((f.get(g, i + 1, j) - f.get(g, i - 1, j)) / two_dx);
            d2.push((f.get(g, i, j + 1) - f.get(g, i, j - 1)) / two_dy);
        }
    }
    (d1, d2)
}

/// Symmetric gradient `(grad u + grad u^T) / 2` by central differences.
pub fn sym_grad_2d<T: Real>(u: &VectorField2D<T>, g: &Grid2D<T>) -> TensorField2D<T> {
    let (u1_x, u1_y) = grad_central_2d(&u.c1, g);
    let (u2_x, u2_y) = grad_central_2d(&u.c2, g);
    let half = T::lit(0.5);
    let d12 = u1_y.iter().zip(&u2_x).map(|(&a, &b)| half * (a + b)).collect();
    TensorField2D {
        d11: u1_x,
        d12,
        d22: u2_y,
    }
}

/// Central-difference divergence; equals the trace of [`sym_grad_2d`].
pub fn div_2d<T: Real>(u: &VectorField2D<T>, g: &Grid2D<T>) -> Field2D<T> {
    let two_dx = g.dx() + g.dx();
    let two_dy = g.dy() + g.dy();
    let mut out = Vec::with_capacity(g.cells());
    for j in 0..g.ny() as isize {
        for i in 0..g.nx() as isize {
            out.push(
                (u.c1.get(g, i + 1, j) - u.c1.get(g, i - 1, j)) / two_dx
                    + (u.c2.get(g, i, j + 1) - u.c2.get(g, i, j - 1)) / two_dy,
            );
        }
    }
    Field2D::from_vec(out)
}

pub fn integrate_2d<T: Real>(f: &Field2D<T>, g: &Grid2D<T>) -> T {
    f.values().iter().copied().sum::<T>() * g.cell_area()
}
