use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::AnisotropicBox;
use crate::linalg::Mat;

/// Sample positions x = B k for k in the index box lo + [0, shape).
///
/// B is an integer matrix (columns are lattice generators), so samples always sit on ℤⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub n: usize,
    pub radius: f64,
    /// Row-major n × n.
    pub basis: Vec<i64>,
    pub lo: Vec<i64>,
    pub shape: Vec<usize>,
}

impl FieldGrid {
    pub fn scaled(n: usize, radius: f64, spacing: i64, lo: Vec<i64>, shape: Vec<usize>) -> Self {
        let mut basis = vec![0; n * n];
        for i in 0..n {
            basis[i * n + i] = spacing;
        }
        FieldGrid {
            n,
            radius,
            basis,
            lo,
            shape,
        }
    }

    /// Unit lattice on the cube [−h, h]ⁿ.
    pub fn cube(n: usize, radius: f64, h: i64) -> Self {
        Self::scaled(n, radius, 1, vec![-h; n], vec![(2 * h + 1) as usize; n])
    }

    /// Unit lattice on the bounding cube of B_R.
    pub fn ball_box(n: usize, radius: f64) -> Self {
        Self::cube(n, radius, radius.floor() as i64)
    }

    /// A sublattice adapted to the plank family of θ, covering {x : |T_θ x|_∞ ≤ y_half}.
    ///
    /// B = round(T_θ^{-1}/4) when the sheared lattice keeps T_θ B close to I/4; the unit lattice otherwise.
    pub fn for_plank(theta: &AnisotropicBox<f64>, radius: f64, y_half: f64) -> Self {
        let n = theta.n();
        let tinv = theta.t_mat.inverse().expect("invertible");
        let mut basis = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                basis[i * n + j] = (0.25 * tinv.get(i, j)).round() as i64;
            }
        }
        let mut grid = FieldGrid {
            n,
            radius,
            basis,
            lo: vec![0; n],
            shape: vec![1; n],
        };
        let m = grid.index_map(theta);
        let ok = m.det().abs() > 1e-12
            && (0..n).all(|j| (0..n).map(|i| m.get(i, j).abs()).sum::<f64>() <= 0.4);
        if !ok {
            grid.basis = FieldGrid::scaled(n, radius, 1, vec![], vec![]).basis;
        }
        let m = grid.index_map(theta);
        let minv = m.inverse().expect("invertible");
        // index box holding M^{-1}[−y, y]ⁿ
        for i in 0..n {
            let ext: f64 = (0..n).map(|j| minv.get(i, j).abs()).sum::<f64>() * y_half;
            let h = ext.ceil() as i64;
            grid.lo[i] = -h;
            grid.shape[i] = (2 * h + 1) as usize;
        }
        grid
    }

    pub fn basis_mat(&self) -> Mat<f64> {
        Mat {
            n: self.n,
            a: self.basis.iter().map(|&v| v as f64).collect(),
        }
    }

    /// T_θ B, the map from index coordinates to tile coordinates.
    pub fn index_map(&self, theta: &AnisotropicBox<f64>) -> Mat<f64> {
        theta.t_mat.mul(&self.basis_mat())
    }

    pub fn covolume(&self) -> f64 {
        self.basis_mat().det().abs()
    }

    /// Spacing if B = sI, 0 otherwise.
    pub fn spacing(&self) -> f64 {
        let s = self.basis[0];
        let diag = (0..self.n)
            .all(|i| (0..self.n).all(|j| self.basis[i * self.n + j] == if i == j { s } else { 0 }));
        if diag {
            s as f64
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.n];
        for i in (0..self.n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<i64> {
        let mut k = vec![0i64; self.n];
        for i in (0..self.n).rev() {
            k[i] = self.lo[i] + (flat % self.shape[i]) as i64;
            flat /= self.shape[i];
        }
        k
    }

    pub fn flat_index(&self, k: &[i64]) -> Option<usize> {
        let mut f = 0usize;
        for i in 0..self.n {
            let d = k[i] - self.lo[i];
            if d < 0 || d as usize >= self.shape[i] {
                return None;
            }
            f = f * self.shape[i] + d as usize;
        }
        Some(f)
    }

    pub fn lattice_point(&self, k: &[i64]) -> Vec<i64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.basis[i * self.n + j] * k[j]).sum())
            .collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.lattice_point(&self.multi_index(flat))
            .into_iter()
            .map(|v| v as f64)
            .collect()
    }
}

/// Complex samples of a function on a [`FieldGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: FieldGrid,
    pub data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: FieldGrid) -> Self {
        let len = grid.len();
        Field {
            grid,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_fn(grid: FieldGrid, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        use rayon::prelude::*;
        let data = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)))
            .collect();
        Field { grid, data }
    }

    /// ‖f‖₂² as covolume × Σ|f|².
    pub fn norm_sq(&self) -> f64 {
        self.grid.covolume() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// ∫_{B_R} |f|² over samples inside the ball of the grid's radius.
    pub fn norm_sq_in_ball(&self) -> f64 {
        let r2 = self.grid.radius * self.grid.radius;
        let s: f64 = (0..self.data.len())
            .filter(|&i| self.grid.point(i).iter().map(|v| v * v).sum::<f64>() <= r2)
            .map(|i| self.data[i].norm_sqr())
            .sum();
        self.grid.covolume() * s
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        (self.grid.covolume() * self.data.iter().map(|z| z.norm().powf(p)).sum::<f64>())
            .powf(1.0 / p)
    }

    pub fn get(&self, k: &[i64]) -> Complex64 {
        self.grid
            .flat_index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.data[i])
    }

    pub fn scale(&mut self, a: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    pub fn add_assign(&mut self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::DomainError("field grids differ".into()));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn relative_l2_error(&self, reference: &Field) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.data.iter().map(|z| z.norm_sqr()).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Header {n, R, spacing, basis, lo, shape} then row-major complex64 samples, little endian.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let g = &self.grid;
        w.write_all(&(g.n as u32).to_le_bytes())?;
        w.write_all(&g.radius.to_le_bytes())?;
        w.write_all(&g.spacing().to_le_bytes())?;
        for &b in &g.basis {
            w.write_all(&b.to_le_bytes())?;
        }
        for &l in &g.lo {
            w.write_all(&l.to_le_bytes())?;
        }
        for &s in &g.shape {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        let n = u32::from_le_bytes(take(r)?) as usize;
        if !(1..=8).contains(&n) {
            return Err(LabError::DomainError(format!("bad field dimension {n}")));
        }
        let radius = f64::from_le_bytes(take(r)?);
        let _spacing = f64::from_le_bytes(take(r)?);
        let basis = (0..n * n)
            .map(|_| take(r).map(i64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let lo = (0..n)
            .map(|_| take(r).map(i64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let shape = (0..n)
            .map(|_| take(r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let grid = FieldGrid {
            n,
            radius,
            basis,
            lo,
            shape,
        };
        let data = (0..grid.len())
            .map(|_| {
                let re = f32::from_le_bytes(take(r)?) as f64;
                let im = f32::from_le_bytes(take(r)?) as f64;
                Ok(Complex64::new(re, im))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Field { grid, data })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.grid.n).map(|i| format!("x{i}")).collect();
        header.push("re".into());
        header.push("im".into());
        wr.write_record(&header)
            .map_err(|e| LabError::Io(e.to_string()))?;
        for (i, z) in self.data.iter().enumerate() {
            let mut rec: Vec<String> = self.grid.point(i).iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{}", z.re));
            rec.push(format!("{}", z.im));
            wr.write_record(&rec)
                .map_err(|e| LabError::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_boxes, CurveSpec};

    #[test]
    fn flat_and_multi_index_agree() {
        let g = FieldGrid {
            n: 3,
            radius: 4.0,
            basis: vec![1, 0, 0, 0, 1, 0, 0, 0, 1],
            lo: vec![-2, 0, 5],
            shape: vec![3, 4, 2],
        };
        for f in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(f)), Some(f));
        }
    }

    #[test]
    fn plank_grid_is_sheared_and_close_to_quarter() {
        let c = CurveSpec::<f64>::moment(2);
        let s = curvature_boxes(&c, 256.0).unwrap();
        let g = FieldGrid::for_plank(&s.boxes[7], 256.0, 10.0);
        assert_eq!(g.spacing(), 0.0);
        let m = g.index_map(&s.boxes[7]);
        for j in 0..2 {
            assert!((0..2).map(|i| m.get(i, j).abs()).sum::<f64>() <= 0.4);
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = FieldGrid::cube(2, 3.0, 3);
        let f = Field::from_fn(g, |x| Complex64::new(x[0], 0.5 * x[1]));
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let back = Field::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid, f.grid);
        assert!(back.relative_l2_error(&f) < 1e-7);
    }
}
