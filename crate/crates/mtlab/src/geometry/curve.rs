use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{factorial, Mat};
use crate::scalar::Real;

/// The two curve families the lab knows how to differentiate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    /// Γ(ξ) = (ξ, ξ², …, ξⁿ).
    Moment,
    /// Γ(ξ) = (ξ, sin ξ, cos ξ − 1), only for n = 3.
    Helix,
}

/// A parametrized well-curved curve with derivatives up to order n+1.
#[derive(Clone, Debug)]
pub struct CurveSpec<T> {
    pub n: usize,
    pub kind: CurveKind,
    pub interval: (T, T),
    /// Lower bound for |det(Γ', …, Γ⁽ⁿ⁾)|.
    pub floor: T,
    /// Bound on sup_j sup_ξ |Γ⁽ʲ⁾(ξ)| for j ≤ n+1.
    pub c_norm: T,
}

impl<T: Real> CurveSpec<T> {
    pub fn moment(n: usize) -> Self {
        assert!(n >= 2, "dimension must be at least 2");
        let mut c = CurveSpec {
            n,
            kind: CurveKind::Moment,
            interval: (T::zero(), T::one()),
            floor: T::lit(0.5),
            c_norm: T::one(),
        };
        c.c_norm = c.sampled_c_norm(64);
        c
    }

    pub fn helix() -> Self {
        let mut c = CurveSpec {
            n: 3,
            kind: CurveKind::Helix,
            interval: (T::zero(), T::one()),
            floor: T::lit(0.5),
            c_norm: T::one(),
        };
        c.c_norm = c.sampled_c_norm(64);
        c
    }

    fn sampled_c_norm(&self, samples: usize) -> T {
        let mut best = T::zero();
        for s in 0..=samples {
            let xi = self.interval.0
                + (self.interval.1 - self.interval.0) * T::lit(s as f64 / samples as f64);
            for j in 0..=self.n + 1 {
                best = best.max(crate::linalg::norm(&self.derivative(j, xi)));
            }
        }
        best
    }

    /// d^j Γ(ξ).
    pub fn derivative(&self, j: usize, xi: T) -> Vec<T> {
        match self.kind {
            CurveKind::Moment => (1..=self.n)
                .map(|k| {
                    if j > k {
                        T::zero()
                    } else {
                        T::lit(factorial(k) / factorial(k - j)) * xi.powi((k - j) as i32)
                    }
                })
                .collect(),
            CurveKind::Helix => {
                let first = match j {
                    0 => xi,
                    1 => T::one(),
                    _ => T::zero(),
                };
                let phase = xi + T::FRAC_PI_2() * T::lit(j as f64);
                let cos_part = phase.cos() - if j == 0 { T::one() } else { T::zero() };
                vec![first, phase.sin(), cos_part]
            }
        }
    }

    pub fn point(&self, xi: T) -> Vec<T> {
        self.derivative(0, xi)
    }

    /// Matrix whose rows are Γ⁽¹⁾(ξ), …, Γ⁽ⁿ⁾(ξ).
    pub fn derivative_matrix(&self, xi: T) -> Mat<T> {
        let rows: Vec<Vec<T>> = (1..=self.n).map(|j| self.derivative(j, xi)).collect();
        Mat::from_rows(&rows)
    }

    pub fn wedge(&self, xi: T) -> T {
        self.derivative_matrix(xi).det()
    }

    pub fn check_well_curved(&self, xi: T) -> Result<()> {
        let det = self.wedge(xi);
        if det.abs() < self.floor {
            return Err(LabError::WellCurvedViolation {
                t: xi.to_f64_lossy(),
                det: det.abs().to_f64_lossy(),
                floor: self.floor.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// sup |Γ'| over the parameter interval (sampled at 257 points).
    pub fn max_speed(&self) -> T {
        (0..=256)
            .map(|s| {
                let xi = self.interval.0
                    + (self.interval.1 - self.interval.0) * T::lit(s as f64 / 256.0);
                crate::linalg::norm(&self.derivative(1, xi))
            })
            .fold(T::zero(), T::max)
    }

    pub fn speed(&self, xi: T) -> T {
        crate::linalg::norm(&self.derivative(1, xi))
    }

    pub fn contains_parameter(&self, xi: T) -> bool {
        xi >= self.interval.0 && xi <= self.interval.1
    }

    pub fn cast<U: Real>(&self) -> CurveSpec<U> {
        CurveSpec {
            n: self.n,
            kind: self.kind,
            interval: (
                U::lit(self.interval.0.to_f64_lossy()),
                U::lit(self.interval.1.to_f64_lossy()),
            ),
            floor: U::lit(self.floor.to_f64_lossy()),
            c_norm: U::lit(self.c_norm.to_f64_lossy()),
        }
    }
}
