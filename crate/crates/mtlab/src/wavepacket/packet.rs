use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::AnisotropicBox;
use crate::linalg::{dot, norm};
use crate::wavepacket::bump::{phi1, BumpPair};
use crate::wavepacket::field::{Field, FieldGrid};

/// Energy fraction outside θ/4 above which a strict decomposition fails.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Default truncation of |m|_∞.
pub const DEFAULT_M_RADIUS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacketCoeff {
    pub theta_index: usize,
    pub m: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

impl WavePacketCoeff {
    pub fn new(theta_index: usize, m: Vec<i64>, a: Complex64) -> Self {
        WavePacketCoeff {
            theta_index,
            m,
            re: a.re,
            im: a.im,
        }
    }

    pub fn a(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A list of packets serialised as a JSON array of {theta_index, m, re, im}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketSet {
    pub coeffs: Vec<WavePacketCoeff>,
}

impl PacketSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::ConfigError(e.to_string()))
    }
}

/// f_T(x) = |det T_θ| a e^{2πiΓ(θ)·x} Φ(T_θ x − m).
pub fn packet_value(theta: &AnisotropicBox<f64>, m: &[i64], a: Complex64, x: &[f64]) -> Complex64 {
    let y = theta.dual(x);
    let phi: f64 = y.iter().zip(m).map(|(v, &k)| phi1(v - k as f64)).product();
    let ph = 2.0 * PI * dot(&theta.center, x);
    a * theta.det_t.abs() * phi * Complex64::from_polar(1.0, ph)
}

/// ‖f_T‖₂² = |det T_θ| ‖Φ‖₂² |a|².
pub fn packet_l2_sq(theta: &AnisotropicBox<f64>, a: Complex64) -> f64 {
    theta.det_t.abs() * BumpPair::new(theta.n()).l2_sq() * a.norm_sqr()
}

/// ‖f_T‖_p = |a| |det T_θ|^{1−1/p} ‖Φ‖_p.
pub fn packet_lp_norm(theta: &AnisotropicBox<f64>, a: Complex64, p: f64) -> f64 {
    a.norm() * theta.det_t.abs().powf(1.0 - 1.0 / p) * BumpPair::new(theta.n()).lp_norm(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecomposeMode {
    /// Fail with SupportViolation when the leakage exceeds [`LEAKAGE_LIMIT`].
    Strict,
    /// Report the leakage and continue.
    Record,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub theta_index: usize,
    pub coeffs: Vec<WavePacketCoeff>,
    pub m_radius: usize,
    /// ‖f_θ‖₂².
    pub field_energy: f64,
    /// |det T_θ| Σ|a|² over kept coefficients.
    pub kept_energy: f64,
    pub tail_energy: f64,
    /// Fraction of coefficient energy outside θ/4.
    pub leakage: f64,
}

impl Decomposition {
    pub fn relative_tail(&self) -> f64 {
        if self.field_energy > 0.0 {
            self.tail_energy / self.field_energy
        } else {
            0.0
        }
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Gaussian-windowed sinc interpolation parameters for a bandwidth b < 1/2 (cycles per sample).
fn kernel_params(b: f64) -> (f64, i64) {
    let g = 0.5 - b;
    let sigma2 = 36.0 / (2.0 * PI * PI * g * g);
    let taps = (sigma2.sqrt() * 72f64.sqrt()).ceil() as i64;
    (sigma2, taps)
}

/// Σ over the box of data[k] Π_i w_i[k_i − start_i], clipped to the stored grid.
fn contract(
    data: &[Complex64],
    strides: &[usize],
    offset: usize,
    axis: usize,
    ranges: &[(usize, usize)],
    weights: &[Vec<f64>],
    wstart: &[usize],
) -> Complex64 {
    let (s, len) = ranges[axis];
    let w = &weights[axis][wstart[axis]..wstart[axis] + len];
    if axis + 1 == ranges.len() {
        let base = offset + s;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &wt) in w.iter().enumerate() {
            acc += data[base + t] * wt;
        }
        return acc;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, &wt) in w.iter().enumerate() {
        if wt != 0.0 {
            acc += contract(
                data,
                strides,
                offset + (s + t) * strides[axis],
                axis + 1,
                ranges,
                weights,
                wstart,
            ) * wt;
        }
    }
    acc
}

/// a_{m,θ} for |m|_∞ ≤ m_radius, from samples of f_θ.
///
/// With h = f e^{−2πiΓ(θ)·x} and g(y) = h(T_θ^{-1} y), the coefficients are a_m = |det T_θ|^{-1} g(m);
/// g is interpolated from the grid samples with a windowed sinc in index coordinates.
pub fn decompose(
    field: &Field,
    theta: &AnisotropicBox<f64>,
    m_radius: usize,
    mode: DecomposeMode,
) -> Result<Decomposition> {
    let grid = &field.grid;
    let n = grid.n;
    let map = grid.index_map(theta);
    let minv = map
        .inverse()
        .ok_or_else(|| LabError::DomainError("degenerate sampling lattice".into()))?;
    let band = (0..n)
        .map(|j| (0..n).map(|i| map.get(i, j).abs()).sum::<f64>() * 0.5)
        .fold(0.0, f64::max);
    if band >= 0.45 {
        return Err(LabError::DomainError(format!(
            "grid under-samples θ: index bandwidth {band:.3} ≥ 0.45"
        )));
    }
    let (sigma2, taps) = kernel_params(band);
    let det = theta.det_t.abs();
    let gamma = &theta.center;
    let demod: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|i| field.data[i] * Complex64::from_polar(1.0, -2.0 * PI * dot(gamma, &grid.point(i))))
        .collect();
    let strides = grid.strides();
    let side = 2 * m_radius + 1;
    let count = side.pow(n as u32);
    let dense: Vec<Complex64> = (0..count)
        .into_par_iter()
        .map(|flat| {
            let mut r = flat;
            let mut m = vec![0f64; n];
            for i in (0..n).rev() {
                m[i] = (r % side) as f64 - m_radius as f64;
                r /= side;
            }
            let kstar = minv.mul_vec(&m);
            let mut ranges = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            let mut wstart = Vec::with_capacity(n);
            for i in 0..n {
                let base = kstar[i].floor() as i64;
                let first = base - taps + 1;
                let w: Vec<f64> = (0..2 * taps)
                    .map(|t| {
                        let d = kstar[i] - (first + t) as f64;
                        sinc(d) * (-d * d / (2.0 * sigma2)).exp()
                    })
                    .collect();
                let lo = grid.lo[i];
                let hi = lo + grid.shape[i] as i64 - 1;
                let a = first.max(lo);
                let b = (first + 2 * taps - 1).min(hi);
                if a > b {
                    return Complex64::new(0.0, 0.0);
                }
                ranges.push(((a - lo) as usize, (b - a + 1) as usize));
                wstart.push((a - first) as usize);
                weights.push(w);
            }
            contract(&demod, &strides, 0, 0, &ranges, &weights, &wstart) / det
        })
        .collect();
    let total: f64 = dense.iter().map(|z| z.norm_sqr()).sum();
    let leakage = if total > 0.0 {
        (1.0 - inner_band_energy(&dense, n, m_radius) / total).max(0.0)
    } else {
        0.0
    };
    if mode == DecomposeMode::Strict && leakage > LEAKAGE_LIMIT {
        return Err(LabError::SupportViolation { leakage });
    }
    let mut coeffs = Vec::new();
    for (flat, &a) in dense.iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            let mut r = flat;
            let mut m = vec![0i64; n];
            for i in (0..n).rev() {
                m[i] = (r % side) as i64 - m_radius as i64;
                r /= side;
            }
            coeffs.push(WavePacketCoeff::new(theta.index, m, a));
        }
    }
    let field_energy = field.norm_sq();
    let kept_energy = det * total;
    Ok(Decomposition {
        theta_index: theta.index,
        coeffs,
        m_radius,
        field_energy,
        kept_energy,
        tail_energy: (field_energy - kept_energy).max(0.0),
        leakage,
    })
}

/// ∫_{[−1/4,1/4]ⁿ} |Σ a_m e^{−2πim·η}|² dη, exactly, via the Kronecker structure of the Gram matrix.
fn inner_band_energy(dense: &[Complex64], n: usize, m_radius: usize) -> f64 {
    let side = 2 * m_radius + 1;
    let s = |d: i64| -> f64 {
        if d == 0 {
            0.5
        } else {
            (PI * d as f64 / 2.0).sin() / (PI * d as f64)
        }
    };
    let smat: Vec<f64> = (0..side * side)
        .map(|k| s((k / side) as i64 - (k % side) as i64))
        .collect();
    let mut cur = dense.to_vec();
    for axis in 0..n {
        let inner: usize = side.pow((n - 1 - axis) as u32);
        let outer: usize = side.pow(axis as u32);
        let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
        for o in 0..outer {
            for i in 0..side {
                for j in 0..side {
                    let w = smat[i * side + j];
                    let src = (o * side + j) * inner;
                    let dst = (o * side + i) * inner;
                    for t in 0..inner {
                        next[dst + t] += cur[src + t] * w;
                    }
                }
            }
        }
        cur = next;
    }
    dense.iter().zip(&cur).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Σ_T f_T on a grid; `boxes` must contain every θ referenced by the coefficients.
pub fn reconstruct(
    coeffs: &[WavePacketCoeff],
    boxes: &[AnisotropicBox<f64>],
    grid: &FieldGrid,
) -> Field {
    let mut out = Field::zeros(grid.clone());
    let mut indices: Vec<usize> = coeffs.iter().map(|c| c.theta_index).collect();
    indices.sort_unstable();
    indices.dedup();
    for ti in indices {
        let theta = boxes
            .iter()
            .find(|b| b.index == ti)
            .expect("coefficient refers to a known box");
        let group: Vec<&WavePacketCoeff> = coeffs.iter().filter(|c| c.theta_index == ti).collect();
        let part = reconstruct_one(&group, theta, grid);
        out.data.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    out
}

fn reconstruct_one(
    group: &[&WavePacketCoeff],
    theta: &AnisotropicBox<f64>,
    grid: &FieldGrid,
) -> Vec<Complex64> {
    let n = grid.n;
    let lo: Vec<i64> = (0..n)
        .map(|i| group.iter().map(|c| c.m[i]).min().unwrap())
        .collect();
    let hi: Vec<i64> = (0..n)
        .map(|i| group.iter().map(|c| c.m[i]).max().unwrap())
        .collect();
    let shape: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a + 1) as usize)
        .collect();
    let volume: usize = shape.iter().product();
    let det = theta.det_t.abs();
    let gamma = &theta.center;
    if volume <= 4 * group.len() + 4096 {
        let mut dense = vec![Complex64::new(0.0, 0.0); volume];
        for c in group {
            let f = (0..n).fold(0usize, |acc, i| acc * shape[i] + (c.m[i] - lo[i]) as usize);
            dense[f] += c.a();
        }
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        let ranges: Vec<(usize, usize)> = shape.iter().map(|&s| (0, s)).collect();
        let wstart = vec![0usize; n];
        (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.point(p);
                let y = theta.dual(&x);
                let weights: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        (0..shape[i])
                            .map(|t| phi1(y[i] - (lo[i] + t as i64) as f64))
                            .collect()
                    })
                    .collect();
                let s = contract(&dense, &strides, 0, 0, &ranges, &weights, &wstart);
                s * det * Complex64::from_polar(1.0, 2.0 * PI * dot(gamma, &x))
            })
            .collect()
    } else {
        (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.point(p);
                group
                    .iter()
                    .map(|c| packet_value(theta, &c.m, c.a(), &x))
                    .sum()
            })
            .collect()
    }
}

/// (Σ_T ‖f_T‖₂², ‖Φ‖₂² ‖f_θ‖₂², ratio), ratio 1 when both vanish.
pub fn parseval_check(
    field: &Field,
    coeffs: &[WavePacketCoeff],
    theta: &AnisotropicBox<f64>,
) -> (f64, f64, f64) {
    let lhs: f64 = coeffs
        .iter()
        .filter(|c| c.theta_index == theta.index)
        .map(|c| packet_l2_sq(theta, c.a()))
        .sum();
    let rhs = BumpPair::new(field.grid.n).l2_sq() * field.norm_sq();
    let ratio = if rhs == 0.0 && lhs == 0.0 {
        1.0
    } else {
        lhs / rhs
    };
    (lhs, rhs, ratio)
}

/// w_{θ,N}(x) = |det T_θ| (1 + |T_θ x|)^{−N}.
#[derive(Clone, Debug)]
pub struct PacketWeight {
    pub theta: AnisotropicBox<f64>,
    pub decay: i32,
}

impl PacketWeight {
    pub fn new(theta: &AnisotropicBox<f64>, decay: i32) -> Self {
        PacketWeight {
            theta: theta.clone(),
            decay,
        }
    }

    /// N = 2n + 4.
    pub fn default_for(theta: &AnisotropicBox<f64>) -> Self {
        Self::new(theta, 2 * theta.n() as i32 + 4)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        packet_weight_eval(&self.theta, self.decay, x)
    }
}

pub fn packet_weight_eval(theta: &AnisotropicBox<f64>, decay: i32, x: &[f64]) -> f64 {
    theta.det_t.abs() * (1.0 + norm(&theta.dual(x))).powi(-decay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_boxes, CurveSpec};

    #[test]
    fn zero_field_decomposes_to_nothing() {
        let s = curvature_boxes(&CurveSpec::<f64>::moment(2), 256.0).unwrap();
        let g = FieldGrid::for_plank(&s.boxes[2], 256.0, 12.0);
        let d = decompose(
            &Field::zeros(g.clone()),
            &s.boxes[2],
            4,
            DecomposeMode::Strict,
        )
        .unwrap();
        assert!(d.coeffs.is_empty());
        let (l, r, q) = parseval_check(&Field::zeros(g), &d.coeffs, &s.boxes[2]);
        assert_eq!((l, r, q), (0.0, 0.0, 1.0));
    }

    #[test]
    fn empty_reconstruction_is_zero() {
        let s = curvature_boxes(&CurveSpec::<f64>::moment(2), 64.0).unwrap();
        let f = reconstruct(&[], &s.boxes, &FieldGrid::cube(2, 8.0, 8));
        assert!(f.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn packet_peak_at_tile_centre() {
        let s = curvature_boxes(&CurveSpec::<f64>::moment(2), 256.0).unwrap();
        let b = &s.boxes[4];
        let m = vec![2, -1];
        let c = b.t_mat.solve(&[2.0, -1.0]).unwrap();
        let v = packet_value(b, &m, Complex64::new(1.0, 0.0), &c);
        assert!((v.norm() - b.det_t.abs() * 0.5625).abs() < 1e-12 * b.det_t.abs());
    }

    #[test]
    fn weight_examples() {
        let s = curvature_boxes(&CurveSpec::<f64>::moment(2), 256.0).unwrap();
        let b = &s.boxes[1];
        assert_eq!(packet_weight_eval(b, 4, &[0.0, 0.0]), b.det_t.abs());
        let x = b.t_mat.solve(&[0.6, 0.8]).unwrap();
        assert!((packet_weight_eval(b, 4, &x) - b.det_t.abs() / 16.0).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let p = PacketSet {
            coeffs: vec![WavePacketCoeff::new(
                3,
                vec![1, -2],
                Complex64::new(0.5, -1.0),
            )],
        };
        let s = p.to_json();
        assert_eq!(s, r#"[{"theta_index":3,"m":[1,-2],"re":0.5,"im":-1.0}]"#);
        assert_eq!(PacketSet::from_json(&s).unwrap(), p);
    }
}
