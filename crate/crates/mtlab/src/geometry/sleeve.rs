use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::curve::CurveSpec;
use crate::geometry::region::SlabSet;
use crate::linalg::{factorial, Mat};
use crate::scalar::Real;

/// A scale R snapped to a power of two, with the dyadic box size δ = 2^{-⌈log₂ R^{1/n}⌉}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub requested: f64,
    pub radius: f64,
    pub log2_radius: u32,
    pub box_exp: u32,
    pub delta: f64,
    /// True when the requested R was not a power of two and got rounded up.
    pub snapped: bool,
}

impl Scale {
    pub fn new(requested: f64, n: usize) -> Result<Self> {
        if !(requested >= 2.0) || !requested.is_finite() {
            return Err(LabError::ConfigError(format!(
                "scale R = {requested} must be a finite number ≥ 2"
            )));
        }
        let log2 = (requested.log2() - 1e-9).ceil().max(1.0) as u32;
        let radius = 2f64.powi(log2 as i32);
        let box_exp = log2.div_ceil(n as u32);
        Ok(Scale {
            requested,
            radius,
            log2_radius: log2,
            box_exp,
            delta: 2f64.powi(-(box_exp as i32)),
            snapped: radius != requested,
        })
    }

    /// δ / R^{-1/n}, which lies in (1/2, 1].
    pub fn box_factor(&self, n: usize) -> f64 {
        self.delta * self.radius.powf(1.0 / n as f64)
    }

    pub fn box_count(&self) -> usize {
        1usize << self.box_exp
    }
}

/// θ = A_θ[−1,1]ⁿ with A_θ(η) = Γ(ξ) + Σ_j δ^j Γ⁽ʲ⁾(ξ) η_j / j!.
#[derive(Clone, Debug)]
pub struct AnisotropicBox<T> {
    pub index: usize,
    pub xi: T,
    pub delta: T,
    pub center: Vec<T>,
    /// Linear part of A_θ; column j is δ^j Γ⁽ʲ⁾/j!.
    pub lin: Mat<T>,
    /// T_θ, the transpose of `lin`.
    pub t_mat: Mat<T>,
    pub det_t: T,
}

impl<T: Real> AnisotropicBox<T> {
    pub fn new(curve: &CurveSpec<T>, index: usize, xi: T, delta: T) -> Self {
        let n = curve.n;
        let mut t_mat = Mat::zeros(n);
        for j in 1..=n {
            let d = curve.derivative(j, xi);
            let s = delta.powi(j as i32) / T::lit(factorial(j));
            for k in 0..n {
                t_mat.set(j - 1, k, s * d[k]);
            }
        }
        let lin = t_mat.transpose();
        let det_t = t_mat.det();
        AnisotropicBox {
            index,
            xi,
            delta,
            center: curve.point(xi),
            lin,
            t_mat,
            det_t,
        }
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn map(&self, eta: &[T]) -> Vec<T> {
        let v = self.lin.mul_vec(eta);
        self.center.iter().zip(v).map(|(&c, x)| c + x).collect()
    }

    /// η with A_θ(η) = p.
    pub fn eta_of(&self, p: &[T]) -> Vec<T> {
        let d: Vec<T> = p.iter().zip(&self.center).map(|(&a, &b)| a - b).collect();
        self.lin.solve(&d).expect("box map is invertible")
    }

    /// Membership in A_θ[−s, s]ⁿ.
    pub fn contains(&self, p: &[T], s: T) -> bool {
        self.eta_of(p).iter().all(|e| e.abs() <= s)
    }

    /// T_θ x.
    pub fn dual(&self, x: &[T]) -> Vec<T> {
        self.t_mat.mul_vec(x)
    }

    /// |T| = |det T_θ|^{-1}.
    pub fn plank_volume(&self) -> T {
        T::one() / self.det_t.abs()
    }

    pub fn to_f64(&self) -> AnisotropicBox<f64> {
        AnisotropicBox {
            index: self.index,
            xi: self.xi.to_f64_lossy(),
            delta: self.delta.to_f64_lossy(),
            center: self.center.iter().map(|v| v.to_f64_lossy()).collect(),
            lin: self.lin.cast(),
            t_mat: self.t_mat.cast(),
            det_t: self.det_t.to_f64_lossy(),
        }
    }
}

/// The curvature sleeve Θ_Γ(R^{-1/n}) at a dyadic scale.
#[derive(Clone, Debug)]
pub struct Sleeve<T> {
    pub scale: Scale,
    pub boxes: Vec<AnisotropicBox<T>>,
}

impl<T: Real> Sleeve<T> {
    /// Every box containing p in A_θ[−1,1]ⁿ, lowest index first.
    pub fn boxes_containing(&self, p: &[T]) -> Vec<usize> {
        self.boxes
            .iter()
            .filter(|b| b.contains(p, T::one()))
            .map(|b| b.index)
            .collect()
    }
}

/// Boxes centred at ξ_i = a + (i + 1/2)δ covering the parameter interval.
pub fn curvature_boxes<T: Real>(curve: &CurveSpec<T>, r: f64) -> Result<Sleeve<T>> {
    let scale = Scale::new(r, curve.n)?;
    let (a, b) = (
        curve.interval.0.to_f64_lossy(),
        curve.interval.1.to_f64_lossy(),
    );
    let count = (((b - a) / scale.delta) - 1e-9).ceil().max(1.0) as usize;
    let boxes = (0..count)
        .map(|i| {
            let xi = a + (i as f64 + 0.5) * scale.delta;
            AnisotropicBox::new(curve, i, T::lit(xi), T::lit(scale.delta))
        })
        .collect();
    Ok(Sleeve { scale, boxes })
}

/// A dual tile T = T_θ^{-1}(m + [−1/2,1/2)ⁿ), optionally dilated about its centre.
#[derive(Clone, Debug)]
pub struct Plank {
    pub theta: usize,
    pub m: Vec<i64>,
    pub t_mat: Mat<f64>,
    pub dilation: f64,
}

impl Plank {
    pub fn new(theta: &AnisotropicBox<f64>, m: Vec<i64>) -> Self {
        Plank {
            theta: theta.index,
            m,
            t_mat: theta.t_mat.clone(),
            dilation: 1.0,
        }
    }

    pub fn dilated(&self, rho: f64) -> Self {
        Plank {
            dilation: self.dilation * rho,
            ..self.clone()
        }
    }

    pub fn region(&self) -> SlabSet {
        let n = self.m.len();
        let h = 0.5 * self.dilation;
        SlabSet {
            rows: (0..n).map(|i| self.t_mat.row(i).to_vec()).collect(),
            lo: self.m.iter().map(|&m| m as f64 - h).collect(),
            hi: self.m.iter().map(|&m| m as f64 + h).collect(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        let y: Vec<f64> = self.m.iter().map(|&v| v as f64).collect();
        self.t_mat.solve(&y).expect("invertible")
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.region().contains(x)
    }

    pub fn volume(&self) -> f64 {
        self.dilation.powi(self.m.len() as i32) / self.t_mat.det().abs()
    }
}

/// m = ⌊T_θ x + 1/2⌋, the index of the tile holding x.
pub fn plank_index(theta: &AnisotropicBox<f64>, x: &[f64]) -> Vec<i64> {
    theta
        .dual(x)
        .into_iter()
        .map(|y| (y + 0.5).floor() as i64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_box_counts() {
        let s2 = curvature_boxes(&CurveSpec::<f64>::moment(2), 256.0).unwrap();
        assert_eq!(s2.boxes.len(), 16);
        assert_eq!(s2.scale.delta, 1.0 / 16.0);
        let s3 = curvature_boxes(&CurveSpec::<f64>::moment(3), 512.0).unwrap();
        assert_eq!(s3.boxes.len(), 8);
        assert_eq!(s3.scale.delta, 1.0 / 8.0);
    }

    #[test]
    fn non_dyadic_scale_rounds_up() {
        let s = Scale::new(100.0, 2).unwrap();
        assert!(s.snapped);
        assert_eq!(s.radius, 128.0);
        assert_eq!(s.box_exp, 4);
        assert!(Scale::new(1.0, 2).is_err());
    }

    #[test]
    fn moment_plank_volume_is_exact_power() {
        // det L = 1 for the moment curve, so |T| = δ^{-n(n+1)/2}
        let s = curvature_boxes(&CurveSpec::<f64>::moment(3), 512.0).unwrap();
        for b in &s.boxes {
            assert!((b.plank_volume() - 8f64.powi(6)).abs() < 1e-6);
        }
    }

    #[test]
    fn plank_index_round_trips_center() {
        let s = curvature_boxes(&CurveSpec::<f64>::moment(2), 256.0).unwrap();
        let b = &s.boxes[5];
        let p = Plank::new(b, vec![3, -2]);
        assert_eq!(plank_index(b, &p.center()), vec![3, -2]);
    }
}
