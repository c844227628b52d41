use super::{GeomError, MAX_DIM};

/// A point (or displacement) in R^n, n ∈ 1..=3, stored inline.
///
/// The world model uses n ∈ {2, 3}; n = 1 is accepted so the Gaussian
/// machinery can be exercised against one-dimensional quadrature oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointN {
    dim: usize,
    coords: [f64; MAX_DIM],
}

impl PointN {
    pub fn new(coords: &[f64]) -> Result<Self, GeomError> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GeomError::InvalidDimension(dim));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite("point coordinates"));
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Self { dim, coords: c })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        Self {
            dim,
            coords: [0.0; MAX_DIM],
        }
    }

    pub fn from_xy(x: f64, y: f64) -> Self {
        Self {
            dim: 2,
            coords: [x, y, 0.0],
        }
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Self {
        Self {
            dim: 3,
            coords: [x, y, z],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.coords[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.dim);
        self.coords[i] = v;
    }

    pub fn add(&self, other: &PointN) -> PointN {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.coords[i] += other.coords[i];
        }
        out
    }

    pub fn sub(&self, other: &PointN) -> PointN {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.coords[i] -= other.coords[i];
        }
        out
    }

    pub fn scale(&self, s: f64) -> PointN {
        let mut out = *self;
        for i in 0..self.dim {
            out.coords[i] *= s;
        }
        out
    }

    pub fn dot(&self, other: &PointN) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.coords[i] * other.coords[i];
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &PointN) -> f64 {
        self.sub(other).norm_sq()
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&c| c == 0.0)
    }
}
