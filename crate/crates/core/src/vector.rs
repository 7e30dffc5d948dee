//! Fixed-capacity vectors and matrices for phase-space coordinates in
//! dimension 1, 2 or 3.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A vector in R^d with d ≤ [`MAX_DIM`]; unused slots are always zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    c: [f64; MAX_DIM],
    dim: u8,
}

impl Vector {
    /// The zero vector of dimension `dim`.
    ///
    /// # Panics
    /// If `dim` is zero or exceeds [`MAX_DIM`].
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside 1..={MAX_DIM}");
        Vector {
            c: [0.0; MAX_DIM],
            dim: dim as u8,
        }
    }

    /// Builds a vector from its coordinates.
    ///
    /// # Panics
    /// If the slice is empty or longer than [`MAX_DIM`].
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut v = Vector::zeros(xs.len());
        v.c[..xs.len()].copy_from_slice(xs);
        v
    }

    /// The vector with every coordinate equal to `value`.
    pub fn splat(dim: usize, value: f64) -> Self {
        let mut v = Vector::zeros(dim);
        for i in 0..dim {
            v.c[i] = value;
        }
        v
    }

    /// The `i`-th standard basis vector.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.c[i] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim as usize]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.dim as usize]
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.c[0] * other.c[0] + self.c[1] * other.c[1] + self.c[2] * other.c[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self + a * other`.
    #[inline]
    pub fn axpy(&self, a: f64, other: &Vector) -> Vector {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.c[i] += a * other.c[i];
        }
        out
    }

    #[inline]
    pub fn scale(&self, a: f64) -> Vector {
        let mut out = *self;
        for i in 0..MAX_DIM {
            out.c[i] *= a;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    /// Japanese bracket ⟨x⟩ = sqrt(1 + |x|²).
    #[inline]
    pub fn bracket(&self) -> f64 {
        (1.0 + self.norm_sq()).sqrt()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(self, rhs: Vector) -> Vector {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(self, rhs: Vector) -> Vector {
        self.axpy(-1.0, &rhs)
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, rhs: Vector) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(self, a: f64) -> Vector {
        self.scale(a)
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    #[inline]
    fn mul(self, v: Vector) -> Vector {
        v.scale(self)
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

/// A d×d matrix with d ≤ [`MAX_DIM`], stored row-major.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Matrix {
    m: [[f64; MAX_DIM]; MAX_DIM],
    dim: u8,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Matrix {
            m: [[0.0; MAX_DIM]; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Matrix::zeros(dim);
        for i in 0..dim {
            a.m[i][i] = 1.0;
        }
        a
    }

    /// `a I + b u uᵀ`.
    pub fn iso_plus_rank_one(a: f64, b: f64, u: &Vector) -> Self {
        let d = u.dim();
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.m[i][j] = b * u[i] * u[j];
            }
            out.m[i][i] += a;
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.m[i][j] = value;
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Matrix) -> Matrix {
        let mut out = *self;
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.m[i][j] += a * other.m[i][j];
            }
        }
        out
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }
}
