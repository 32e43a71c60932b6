//! Dense rank-3 and rank-4 tensors at a point. nalgebra covers the rank-2
//! objects; these cover the Cartan tensor, Christoffel symbols, curvature and
//! friends, with closure-based constructors in the spirit of `from_fn`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Tensor3 {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Tensor3 {
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Tensor4 {
        Tensor4 { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Tensor4 {
        let mut t = Tensor4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t[(i, j, k, l)] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

impl std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

/// Contract a rank-3 tensor against a vector in its first slot:
/// `out_jk = sum_i v_i T_ijk`.
pub fn contract3_first(t: &Tensor3, v: &DVector<f64>) -> DMatrix<f64> {
    let n = t.dim();
    DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| v[i] * t[(i, j, k)]).sum())
}

/// Apply a rank-3 tensor, viewed as a bilinear vector-valued map with output
/// in its first slot, to two vectors: `out_k = sum_ij T_kij a_i b_j`.
pub fn apply3(t: &Tensor3, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = t.dim();
    DVector::from_fn(n, |k, _| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += t[(k, i, j)] * a[i] * b[j];
            }
        }
        s
    })
}

/// Full contraction of a rank-3 tensor with three vectors.
pub fn contract3_full(t: &Tensor3, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let n = t.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                s += t[(i, j, k)] * a[i] * b[j] * c[k];
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let t = Tensor3::from_fn(3, |i, j, k| (100 * i + 10 * j + k) as f64);
        assert_eq!(t[(2, 1, 0)], 210.0);
        let t4 = Tensor4::from_fn(2, |i, j, k, l| (i + j + k + l) as f64);
        assert_eq!(t4[(1, 1, 1, 0)], 3.0);
    }

    #[test]
    fn contraction_helpers() {
        let t = Tensor3::from_fn(2, |i, j, k| if i == j && j == k { 1.0 } else { 0.0 });
        let v = DVector::from_vec(vec![2.0, 3.0]);
        let m = contract3_first(&t, &v);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 1)], 3.0);
        assert_eq!(contract3_full(&t, &v, &v, &v), 8.0 + 27.0);
    }
}
