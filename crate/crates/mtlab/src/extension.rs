//! The extension operator Eg(x) = ∫ e^{2πix·Γ(ξ)} g(ξ) dλ(ξ) and its energy on balls.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::geometry::CurveSpec;
use crate::linalg::{dot, norm};
use crate::wavepacket::bump::phi1;
use crate::wavepacket::field::{Field, FieldGrid};

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Samples of g on Gauss–Legendre panels, with arclength quadrature weights.
#[derive(Clone, Debug)]
pub struct CurveDensity {
    pub curve: CurveSpec<f64>,
    pub xi: Vec<f64>,
    pub g: Vec<Complex64>,
    /// dλ weights: Gauss–Legendre weight × |Γ'(ξ)|.
    pub w: Vec<f64>,
    /// Widest panel in parameter units.
    pub panel: f64,
}

impl CurveDensity {
    /// Panels fine enough that the phase of e^{2πix·Γ} moves by at most π across a panel for |x| ≤ R.
    pub fn panel_width(curve: &CurveSpec<f64>, r: f64) -> f64 {
        1.0 / (2.0 * r * curve.max_speed())
    }

    pub fn from_fn(curve: &CurveSpec<f64>, r: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let (a, b) = curve.interval;
        Self::on_arcs(curve, r, &[(a, b, Complex64::new(1.0, 0.0))], f)
    }

    /// g = Σ_v a_v 1_{[s_v, e_v]} times the profile f.
    pub fn on_arcs(
        curve: &CurveSpec<f64>,
        r: f64,
        arcs: &[(f64, f64, Complex64)],
        f: impl Fn(f64) -> Complex64,
    ) -> Self {
        let h = Self::panel_width(curve, r);
        let mut out = CurveDensity {
            curve: curve.clone(),
            xi: vec![],
            g: vec![],
            w: vec![],
            panel: 0.0,
        };
        for &(s, e, coef) in arcs {
            let panels = ((e - s) / h).ceil().max(1.0) as usize;
            let ph = (e - s) / panels as f64;
            out.panel = out.panel.max(ph);
            for p in 0..panels {
                let mid = s + (p as f64 + 0.5) * ph;
                for k in 0..8 {
                    let (t, wt) = if k < 4 {
                        (-GL8_NODES[3 - k], GL8_WEIGHTS[3 - k])
                    } else {
                        (GL8_NODES[k - 4], GL8_WEIGHTS[k - 4])
                    };
                    let xi = mid + 0.5 * ph * t;
                    out.xi.push(xi);
                    out.g.push(coef * f(xi));
                    out.w.push(0.5 * ph * wt * curve.speed(xi));
                }
            }
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.g
            .iter()
            .zip(&self.w)
            .map(|(g, w)| w * g.norm_sqr())
            .sum()
    }

    pub fn total_measure(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let mut c = self.clone();
        c.g.iter_mut().for_each(|z| *z *= a);
        c
    }

    pub fn modulate(&self, x0: &[f64]) -> Self {
        let mut c = self.clone();
        for (z, &xi) in c.g.iter_mut().zip(&self.xi) {
            *z *= Complex64::from_polar(1.0, -2.0 * PI * dot(x0, &self.curve.point(xi)));
        }
        c
    }

    /// Pointwise sum of two densities on the same nodes.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.xi != other.xi {
            return Err(LabError::DomainError("densities on different nodes".into()));
        }
        let mut c = self.clone();
        c.g.iter_mut().zip(&other.g).for_each(|(a, b)| *a += b);
        Ok(c)
    }

    /// QuadratureError unless every panel keeps the phase change at |x| ≤ x_max within π.
    pub fn check_resolution(&self, x_max: f64) -> Result<()> {
        let phase = 2.0 * PI * x_max * self.curve.max_speed() * self.panel;
        if phase > PI * (1.0 + 1e-9) {
            return Err(LabError::QuadratureError(format!(
                "panel phase {phase:.3} exceeds π at |x| = {x_max}"
            )));
        }
        Ok(())
    }

    fn nodes(&self) -> Vec<(Vec<f64>, Complex64)> {
        self.xi
            .iter()
            .zip(self.g.iter().zip(&self.w))
            .map(|(&xi, (g, w))| (self.curve.point(xi), g * w))
            .collect()
    }
}

/// Eg at arbitrary points, by direct summation.
pub fn extend_points(g: &CurveDensity, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let x_max = points.iter().map(|p| norm(p)).fold(0.0, f64::max);
    g.check_resolution(x_max)?;
    let nodes = g.nodes();
    Ok(points
        .par_iter()
        .map(|x| {
            nodes
                .iter()
                .map(|(p, c)| c * Complex64::from_polar(1.0, 2.0 * PI * dot(x, p)))
                .sum()
        })
        .collect())
}

/// Eg on a grid; axis-aligned grids use per-axis phasor tables.
pub fn extend(g: &CurveDensity, grid: &FieldGrid) -> Result<Field> {
    let n = grid.n;
    let x_max = (0..n)
        .map(|i| {
            let a = grid.lo[i] as f64;
            let b = (grid.lo[i] + grid.shape[i] as i64 - 1) as f64;
            let s = grid.basis[i * n + i] as f64;
            (a * s).abs().max((b * s).abs()).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    g.check_resolution(x_max)?;
    extend_within(g, grid, f64::INFINITY)
}

/// Eg at the samples of the grid inside B_ρ, zero at the others.
pub fn extend_in_ball(g: &CurveDensity, grid: &FieldGrid, rho: f64) -> Result<Field> {
    g.check_resolution(rho)?;
    extend_within(g, grid, rho)
}

fn extend_within(g: &CurveDensity, grid: &FieldGrid, rho: f64) -> Result<Field> {
    let n = grid.n;
    let s = grid.spacing();
    if s == 0.0 {
        let r2 = rho * rho;
        let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
        let keep: Vec<usize> = (0..pts.len())
            .filter(|&i| pts[i].iter().map(|v| v * v).sum::<f64>() <= r2)
            .collect();
        let inner: Vec<Vec<f64>> = keep.iter().map(|&i| pts[i].clone()).collect();
        let vals = extend_points(g, &inner)?;
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (i, v) in keep.into_iter().zip(vals) {
            data[i] = v;
        }
        return Ok(Field {
            grid: grid.clone(),
            data,
        });
    }
    let nodes = g.nodes();
    let k = nodes.len();
    // tables[i][t * k + j] = e^{2πi s (lo_i + t) Γ_i(ξ_j)}
    let tables: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..grid.shape[i])
                .flat_map(|t| {
                    let x = s * (grid.lo[i] + t as i64) as f64;
                    nodes
                        .iter()
                        .map(move |(p, _)| Complex64::from_polar(1.0, 2.0 * PI * x * p[i]))
                })
                .collect()
        })
        .collect();
    let coef: Vec<Complex64> = nodes.iter().map(|(_, c)| *c).collect();
    let last = grid.shape[n - 1];
    let rows = grid.len() / last;
    let data: Vec<Complex64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|row| {
            let mut r = row;
            let mut pre = coef.clone();
            let mut r2 = 0.0;
            for i in (0..n - 1).rev() {
                let t = r % grid.shape[i];
                r /= grid.shape[i];
                r2 += (s * (grid.lo[i] + t as i64) as f64).powi(2);
                for (z, e) in pre.iter_mut().zip(&tables[i][t * k..(t + 1) * k]) {
                    *z *= e;
                }
            }
            let tl = &tables[n - 1];
            (0..last)
                .map(|t| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    if r2 + (s * (grid.lo[n - 1] + t as i64) as f64).powi(2) > rho * rho {
                        return acc;
                    }
                    for (z, e) in pre.iter().zip(&tl[t * k..(t + 1) * k]) {
                        acc += z * e;
                    }
                    acc
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(Field {
        grid: grid.clone(),
        data,
    })
}

/// ∫_{B_R} e^{2πix·v} dx.
pub fn ball_fourier(n: usize, r: f64, v: &[f64]) -> f64 {
    let t = norm(v);
    match n {
        2 => {
            if t < 1e-12 {
                PI * r * r
            } else {
                r * libm::j1(2.0 * PI * r * t) / t
            }
        }
        3 => {
            let z = 2.0 * PI * r * t;
            if z < 1e-3 {
                4.0 / 3.0 * PI * r.powi(3) * (1.0 - z * z / 10.0)
            } else {
                (z.sin() - z * z.cos()) / (2.0 * PI * PI * t.powi(3))
            }
        }
        _ => panic!("ball transform implemented for n = 2, 3"),
    }
}

/// ∫_{B_R} |Eg|² = Σ_{k,l} c_k c̄_l ∫_{B_R} e^{2πix·(Γ(ξ_k) − Γ(ξ_l))} dx.
pub fn ball_energy(g: &CurveDensity, r: f64) -> Result<f64> {
    g.check_resolution(r)?;
    let n = g.curve.n;
    let nodes = g.nodes();
    let partial: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let (pk, ck) = &nodes[k];
            let mut s = 0.5 * ck.norm_sqr() * ball_fourier(n, r, &vec![0.0; n]);
            let mut d = vec![0.0; n];
            for (pl, cl) in &nodes[k + 1..] {
                for i in 0..n {
                    d[i] = pk[i] - pl[i];
                }
                s += (ck * cl.conj()).re * ball_fourier(n, r, &d);
            }
            2.0 * s
        })
        .collect();
    Ok(partial.iter().sum())
}

/// ∫_{B_R}|Eg|² / (R^{n−1} ‖g‖²).
pub fn agmon_hormander_ratio(g: &CurveDensity, r: f64) -> Result<f64> {
    let gn = g.norm_sq();
    if gn == 0.0 {
        return Err(LabError::InvalidInstance("zero density".into()));
    }
    Ok(ball_energy(g, r)? / (r.powi(g.curve.n as i32 - 1) * gn))
}

/// Φ₁(x) = Φ(x / 2R) / Φ(0), Fourier-supported in [−1/4R, 1/4R]ⁿ.
pub fn phi_one(r: f64, x: &[f64]) -> f64 {
    x.iter().map(|&v| phi1(v / (2.0 * r)) / phi1(0.0)).product()
}

/// min_{B_R} Φ₁, attained on the sphere of radius R.
pub fn phi_one_min_on_ball(n: usize, r: f64) -> f64 {
    let mut best = f64::INFINITY;
    let steps = 720;
    if n == 2 {
        for k in 0..steps {
            let a = 2.0 * PI * k as f64 / steps as f64;
            best = best.min(phi_one(r, &[r * a.cos(), r * a.sin()]));
        }
    } else {
        for k in 0..=steps / 4 {
            let th = PI * k as f64 / (steps / 4) as f64;
            for l in 0..steps / 4 {
                let ph = 2.0 * PI * l as f64 / (steps / 4) as f64;
                let mut x = vec![
                    r * th.sin() * ph.cos(),
                    r * th.sin() * ph.sin(),
                    r * th.cos(),
                ];
                x.resize(n, 0.0);
                best = best.min(phi_one(r, &x));
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct Localized {
    pub field: Field,
    /// min |Φ₁| on B_R.
    pub floor: f64,
}

/// f = Φ₁ Eg on a grid covering B_{4R}.
pub fn localize(eg: &Field, r: f64) -> Result<Localized> {
    let g = &eg.grid;
    let n = g.n;
    for i in 0..n {
        let s = g.basis[i * n + i] as f64;
        let lo = g.lo[i] as f64 * s;
        let hi = (g.lo[i] + g.shape[i] as i64 - 1) as f64 * s;
        if lo > -4.0 * r || hi < 4.0 * r {
            return Err(LabError::DomainError(format!(
                "grid axis {i} spans [{lo}, {hi}], need B_(4R) with R = {r}"
            )));
        }
    }
    let mut field = eg.clone();
    for (i, z) in field.data.iter_mut().enumerate() {
        *z *= phi_one(r, &g.point(i));
    }
    Ok(Localized {
        field,
        floor: phi_one_min_on_ball(n, r),
    })
}

/// Disjoint parameter arcs of length 1/R, separated by gaps of 1/R, with random unimodular coefficients.
pub fn random_arcs(
    curve: &CurveSpec<f64>,
    r: f64,
    rng: &mut impl Rng,
) -> Vec<(f64, f64, Complex64)> {
    let (a, b) = curve.interval;
    let len = 1.0 / r;
    let count = ((b - a) / (2.0 * len)).floor() as usize;
    (0..count)
        .map(|v| {
            let s = a + (2 * v) as f64 * len + 0.5 * len;
            (
                s,
                s + len,
                Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density_at_origin_is_length() {
        let c = CurveSpec::<f64>::moment(2);
        let g = CurveDensity::from_fn(&c, 16.0, |_| Complex64::new(1.0, 0.0));
        // arclength of (t, t²) on [0,1]
        let exact = 0.5 * 5f64.sqrt() + 0.25 * (2.0 + 5f64.sqrt()).ln();
        assert!((g.total_measure() - exact).abs() < 1e-12);
        let e = extend_points(&g, &[vec![0.0, 0.0]]).unwrap();
        assert!((e[0].re - exact).abs() < 1e-12 && e[0].im.abs() < 1e-14);
    }

    #[test]
    fn ball_transform_at_zero_is_volume() {
        assert!((ball_fourier(2, 3.0, &[0.0, 0.0]) - 9.0 * PI).abs() < 1e-12);
        assert!((ball_fourier(3, 2.0, &[0.0, 0.0, 0.0]) - 32.0 * PI / 3.0).abs() < 1e-12);
        // continuity across the series cut-off
        let a = ball_fourier(3, 2.0, &[0.9e-4 / (4.0 * PI), 0.0, 0.0]);
        let b = ball_fourier(3, 2.0, &[1.1e-3 / (4.0 * PI), 0.0, 0.0]);
        assert!((a - b).abs() / a < 1e-6);
    }

    #[test]
    fn under_resolved_evaluation_is_rejected() {
        let c = CurveSpec::<f64>::moment(2);
        let g = CurveDensity::from_fn(&c, 8.0, |_| Complex64::new(1.0, 0.0));
        assert!(matches!(
            extend_points(&g, &[vec![64.0, 0.0]]),
            Err(LabError::QuadratureError(_))
        ));
    }

    #[test]
    fn zero_density_is_invalid() {
        let c = CurveSpec::<f64>::moment(2);
        let g = CurveDensity::from_fn(&c, 8.0, |_| Complex64::new(0.0, 0.0));
        assert!(matches!(
            agmon_hormander_ratio(&g, 8.0),
            Err(LabError::InvalidInstance(_))
        ));
    }

    #[test]
    fn phi_one_floor() {
        let m = phi_one_min_on_ball(2, 64.0);
        assert!(m > 0.5 && m < 1.0);
        assert!((phi_one(64.0, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
