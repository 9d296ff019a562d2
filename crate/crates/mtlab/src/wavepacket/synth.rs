use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::geometry::AnisotropicBox;
use crate::linalg::dot;
use crate::wavepacket::field::{Field, FieldGrid};

/// ψ(y) = ∫ e^{−t²/2σ²} e^{2πiyt} dt.
pub fn gaussian_profile(sigma: f64, y: f64) -> f64 {
    sigma * (2.0 * PI).sqrt() * (-2.0 * PI * PI * sigma * sigma * y * y).exp()
}

/// f = |det T_θ| e^{2πiΓ(θ)·x} Σ_k b_k Ψ(T_θ x − k) with a Gaussian frequency profile of width σ.
///
/// For σ ≤ 1/24 the profile is below 2e-8 outside θ/4, and the packet coefficients are a_m = Σ_k b_k Ψ(m − k).
#[derive(Clone, Debug)]
pub struct GaussianPacketSum {
    pub theta: AnisotropicBox<f64>,
    pub sigma: f64,
    pub terms: Vec<(Vec<i64>, Complex64)>,
}

impl GaussianPacketSum {
    pub fn psi(&self, y: &[f64]) -> f64 {
        y.iter().map(|&v| gaussian_profile(self.sigma, v)).product()
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        let y = self.theta.dual(x);
        let mut s = Complex64::new(0.0, 0.0);
        for (k, b) in &self.terms {
            let d: Vec<f64> = y.iter().zip(k).map(|(a, &c)| a - c as f64).collect();
            s += b * self.psi(&d);
        }
        s * self.theta.det_t.abs()
            * Complex64::from_polar(1.0, 2.0 * PI * dot(&self.theta.center, x))
    }

    pub fn coefficient(&self, m: &[i64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, b)| {
                let d: Vec<f64> = m.iter().zip(k).map(|(&a, &c)| (a - c) as f64).collect();
                b * self.psi(&d)
            })
            .sum()
    }

    pub fn sample(&self, grid: FieldGrid) -> Field {
        Field::from_fn(grid, |x| self.value(x))
    }

    /// Random unit-modulus-scale coefficients on k ∈ [−h, h]ⁿ.
    pub fn random(theta: &AnisotropicBox<f64>, sigma: f64, h: i64, rng: &mut impl Rng) -> Self {
        let n = theta.n();
        let side = 2 * h + 1;
        let terms = (0..side.pow(n as u32))
            .map(|mut c| {
                let k: Vec<i64> = (0..n)
                    .map(|_| {
                        let v = c % side - h;
                        c /= side;
                        v
                    })
                    .collect();
                let b = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (k, b)
            })
            .collect();
        GaussianPacketSum {
            theta: theta.clone(),
            sigma,
            terms,
        }
    }
}
