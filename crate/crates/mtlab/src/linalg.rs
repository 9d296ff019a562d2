//! Small dense matrices stored row-major in flat vectors.

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.a[i * self.n..(i + 1) * self.n]
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

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul(&self, b: &Self) -> Self {
        let n = self.n;
        let mut c = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                for j in 0..n {
                    c.a[i * n + j] = c.a[i * n + j] + aik * b.get(k, j);
                }
            }
        }
        c
    }

    /// LU with partial pivoting; returns (lu, perm, sign) or None when singular.
    fn lu(&self) -> Option<(Vec<T>, Vec<usize>, T)> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            if a[p * n + k] == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] = a[i * n + j] - f * a[k * n + j];
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn det(&self) -> T {
        match self.lu() {
            None => T::zero(),
            Some((a, _, sign)) => (0..self.n).fold(sign, |acc, i| acc * a[i * self.n + i]),
        }
    }

    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        let (a, perm, _) = self.lu()?;
        let mut y: Vec<T> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - a[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - a[i * n + k] * y[k];
            }
            y[i] = y[i] / a[i * n + i];
        }
        Some(y)
    }

    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut inv = Self::zeros(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Some(inv)
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            n: self.n,
            a: self.a.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
        }
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |p, i| p * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse_of_triangular() {
        let m = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![0.0, 3.0, 4.0],
            vec![0.0, 0.0, 0.5],
        ]);
        assert!((m.det() - 3.0f64).abs() < 1e-14);
        let p = m.mul(&m.inverse().unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p.get(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_has_zero_det() {
        let m = Mat::from_rows(&[vec![1.0f32, 2.0], vec![2.0, 4.0]]);
        assert_eq!(m.det(), 0.0);
        assert!(m.inverse().is_none());
    }
}
