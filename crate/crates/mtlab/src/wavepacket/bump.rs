use std::f64::consts::PI;
use std::sync::OnceLock;

/// Tabulation range of the one-dimensional profile; beyond it |φ| < 1e-11.
pub const PHI_RANGE: f64 = 160.0;
const STEPS_PER_UNIT: usize = 128;
const FREQ_NODES: usize = 2048;

/// Smooth step: 0 at s ≤ 0, 1 at s ≥ 1.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// 1-D plateau: 1 on |t| ≤ 1/4, 0 on |t| ≥ 1/2.
pub fn plateau(t: f64) -> f64 {
    let a = t.abs();
    if a <= 0.25 {
        1.0
    } else if a >= 0.5 {
        0.0
    } else {
        smooth_step((0.5 - a) / 0.25)
    }
}

struct Table {
    val: Vec<f64>,
    der: Vec<f64>,
    l2: f64,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let dt = 0.5 / FREQ_NODES as f64;
        let nodes: Vec<(f64, f64)> = (0..FREQ_NODES)
            .map(|j| {
                let t = (j as f64 + 0.5) * dt;
                (t, plateau(t))
            })
            .collect();
        let count = (PHI_RANGE as usize) * STEPS_PER_UNIT + 1;
        let h = 1.0 / STEPS_PER_UNIT as f64;
        let mut val = vec![0.0; count];
        let mut der = vec![0.0; count];
        for i in 0..count {
            let x = i as f64 * h;
            let (mut c, mut s) = (0.0, 0.0);
            // midpoint rule on [0, 1/2] of an even, compactly supported integrand
            let (s0, c0) = (2.0 * PI * x * 0.5 * dt).sin_cos();
            let (sd, cd) = (2.0 * PI * x * dt).sin_cos();
            let (mut pr, mut pi) = (c0, s0);
            for &(t, w) in &nodes {
                c += w * pr;
                s += w * t * pi;
                let nr = pr * cd - pi * sd;
                pi = pr * sd + pi * cd;
                pr = nr;
            }
            val[i] = 2.0 * dt * c;
            der[i] = -4.0 * PI * dt * s;
        }
        let l2 = 2.0 * dt * nodes.iter().map(|(_, w)| w * w).sum::<f64>();
        Table { val, der, l2 }
    })
}

/// φ(x) = ∫ plateau(t) e^{2πixt} dt, by cubic Hermite interpolation of a cached table.
pub fn phi1(x: f64) -> f64 {
    let a = x.abs();
    if a >= PHI_RANGE {
        return 0.0;
    }
    let tb = table();
    let u = a * STEPS_PER_UNIT as f64;
    let i = u.floor() as usize;
    let s = u - i as f64;
    let h = 1.0 / STEPS_PER_UNIT as f64;
    let (y0, y1) = (tb.val[i], tb.val[i + 1]);
    let (d0, d1) = (tb.der[i] * h, tb.der[i + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * d1
}

/// ‖φ‖²_{L²(ℝ)} = ∫ plateau².
pub fn phi1_l2_sq() -> f64 {
    table().l2
}

/// The tensor bump Φ with Φ̂(η) = Π plateau(η_i).
#[derive(Clone, Copy, Debug, Default)]
pub struct BumpPair {
    pub n: usize,
}

impl BumpPair {
    pub fn new(n: usize) -> Self {
        BumpPair { n }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| phi1(v)).product()
    }

    pub fn phi_hat(&self, eta: &[f64]) -> f64 {
        eta.iter().map(|&v| plateau(v)).product()
    }

    pub fn l2_sq(&self) -> f64 {
        phi1_l2_sq().powi(self.n as i32)
    }

    pub fn sup(&self) -> f64 {
        phi1(0.0).powi(self.n as i32)
    }

    /// ‖Φ‖_p, from the tabulated profile.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let h = 1.0 / 64.0;
        let m = (PHI_RANGE / h) as i64;
        let one: f64 = (-m..=m)
            .map(|i| phi1(i as f64 * h).abs().powf(p))
            .sum::<f64>()
            * h;
        one.powf(self.n as f64 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_flat_and_support() {
        for i in 0..=100 {
            let t = -0.25 + 0.5 * i as f64 / 100.0;
            assert_eq!(plateau(t), 1.0);
            assert_eq!(plateau(0.5 + i as f64 * 0.01), 0.0);
        }
        // symmetric transition
        for s in [0.1, 0.3, 0.45] {
            assert!((smooth_step(s) + smooth_step(1.0 - s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_at_origin_is_plateau_integral() {
        assert!((phi1(0.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn phi_matches_direct_quadrature() {
        // independent Simpson rule on [0, 1/2]
        for &x in &[0.37, 1.9, 7.25, 22.6] {
            let m = 20000;
            let h = 0.5 / m as f64;
            let mut s = 0.0;
            for j in 0..=m {
                let t = j as f64 * h;
                let w = if j == 0 || j == m {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * plateau(t) * (2.0 * PI * x * t).cos();
            }
            let direct = 2.0 * s * h / 3.0;
            assert!(
                (phi1(x) - direct).abs() < 1e-10,
                "x={x}: {} vs {direct}",
                phi1(x)
            );
        }
    }

    #[test]
    fn lattice_sum_of_squares_equals_l2() {
        // Φ̂ vanishes outside (−1/2, 1/2) so Σ_m φ(m)² = ∫φ²
        let s: f64 = (-159..=159).map(|m| phi1(m as f64).powi(2)).sum();
        assert!((s - phi1_l2_sq()).abs() < 1e-10);
    }
}
