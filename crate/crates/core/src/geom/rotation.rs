use super::{GeomError, PointN, MAX_DIM};

/// An orthonormal n×n matrix with determinant +1, stored row-major and
/// padded with the identity above dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { dim, m }
    }

    /// Planar rotation by `theta` radians (dim 2).
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut r = Self::identity(2);
        r.m[0][0] = c;
        r.m[0][1] = -s;
        r.m[1][0] = s;
        r.m[1][1] = c;
        r
    }

    /// Build from explicit rows, checking orthonormality and det +1.
    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Result<Self, GeomError> {
        if dim == 0 || dim > MAX_DIM || rows.len() != dim {
            return Err(GeomError::InvalidDimension(rows.len()));
        }
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate().take(MAX_DIM) {
            row[i] = 1.0;
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(GeomError::DimensionMismatch(row.len(), dim));
            }
            m[i][..dim].copy_from_slice(row);
        }
        let r = Self { dim, m };
        let tol = 1e-9;
        for i in 0..dim {
            for j in 0..dim {
                let mut dot = 0.0;
                for k in 0..dim {
                    dot += r.m[i][k] * r.m[j][k];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > tol {
                    return Err(GeomError::NonFinite("rows are not orthonormal"));
                }
            }
        }
        if (r.det() - 1.0).abs() > tol {
            return Err(GeomError::NonFinite("determinant is not +1"));
        }
        Ok(r)
    }

    /// Internal constructor for matrices already known to be special orthogonal.
    pub(crate) fn from_rows_unchecked(dim: usize, m: [[f64; MAX_DIM]; MAX_DIM]) -> Self {
        Self { dim, m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// The j-th column as a point (an axis of the rotated frame).
    pub fn column(&self, j: usize) -> PointN {
        let mut c = PointN::zeros(self.dim);
        for i in 0..self.dim {
            c.set(i, self.m[i][j]);
        }
        c
    }

    pub fn apply(&self, p: &PointN) -> PointN {
        debug_assert_eq!(self.dim, p.dim());
        let mut out = PointN::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.m[i][j] * p.get(j);
            }
            out.set(i, acc);
        }
        out
    }

    /// Apply the inverse (= transpose) rotation.
    pub fn apply_inverse(&self, p: &PointN) -> PointN {
        debug_assert_eq!(self.dim, p.dim());
        let mut out = PointN::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.m[j][i] * p.get(j);
            }
            out.set(i, acc);
        }
        out
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            2 => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
            _ => {
                let m = &self.m;
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }
}
