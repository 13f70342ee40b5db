//! Minimal dense linear algebra for the quadratic objective/kinetic pair and
//! the implicit method's Newton subsolver.
//!
//! Problem dimensions stay in the double digits, so plain O(n^3)
//! factorizations with no blocking are the right tool.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// a + s * b, elementwise.
pub(crate) fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row vectors; `None` unless the shape is square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return None;
        }
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend_from_slice(r);
        }
        Some(DenseMatrix { n, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], v))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        true
    }

    /// Lower Cholesky factor; `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solves `self * x = rhs` by LU with partial pivoting; `None` if singular.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = rhs.to_vec();
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-300 {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                x.swap(k, piv);
            }
            for i in (k + 1)..n {
                let m = a[i * n + k] / a[k * n + k];
                if m == 0.0 {
                    continue;
                }
                a[i * n + k] = 0.0;
                for j in (k + 1)..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
                x[i] -= m * x[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Some(x)
    }
}

/// Lower-triangular Cholesky factor of a positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solves `A x = rhs` given `A = L L^T`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.l[i * n + j] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                y[i] -= self.l[j * n + i] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Orthogonal factor of a Householder QR factorization, with the sign
/// convention that R's diagonal is nonnegative (makes the factor unique,
/// hence reproducible across runs).
pub(crate) fn qr_orthogonal(m: &DenseMatrix) -> DenseMatrix {
    let n = m.n();
    let mut r = m.clone();
    let mut q = DenseMatrix::identity(n);
    for k in 0..n {
        let mut col_norm = 0.0;
        for i in k..n {
            col_norm += r.get(i, k) * r.get(i, k);
        }
        let col_norm = col_norm.sqrt();
        if col_norm == 0.0 {
            continue;
        }
        let alpha = if r.get(k, k) > 0.0 { -col_norm } else { col_norm };
        let mut v = vec![0.0; n];
        for i in k..n {
            v[i] = r.get(i, k);
        }
        v[k] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply H = I - 2 v v^T / <v, v> to the left of R and the right of Q.
        for j in 0..n {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * r.get(i, j);
            }
            let s = 2.0 * s / vnorm2;
            for i in k..n {
                let val = r.get(i, j) - s * v[i];
                r.set(i, j, val);
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in k..n {
                s += q.get(i, j) * v[j];
            }
            let s = 2.0 * s / vnorm2;
            for j in k..n {
                let val = q.get(i, j) - s * v[j];
                q.set(i, j, val);
            }
        }
    }
    for j in 0..n {
        if r.get(j, j) < 0.0 {
            for i in 0..n {
                let val = -q.get(i, j);
                q.set(i, j, val);
            }
        }
    }
    q
}
