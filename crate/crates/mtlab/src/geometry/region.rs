use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, Mat};

/// {x : lo_k ≤ a_k·x < hi_k, k = 1..K}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabSet {
    pub rows: Vec<Vec<f64>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SlabSet {
    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.rows
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(a, (&lo, &hi))| {
                let y = dot(a, x);
                lo <= y && y < hi
            })
    }

    /// Closed membership with absolute slack on every row value.
    pub fn contains_closed(&self, x: &[f64], slack: f64) -> bool {
        self.rows
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(a, (&lo, &hi))| {
                let y = dot(a, x);
                lo - slack <= y && y <= hi + slack
            })
    }

    /// Dilation by ρ about the centre of each row range.
    pub fn dilate(&self, rho: f64) -> SlabSet {
        let mut out = self.clone();
        for k in 0..self.rows.len() {
            let mid = 0.5 * (self.lo[k] + self.hi[k]);
            let h = 0.5 * (self.hi[k] - self.lo[k]) * rho;
            out.lo[k] = mid - h;
            out.hi[k] = mid + h;
        }
        out
    }

    pub fn contains_ball(&self, c: &[f64], r: f64) -> bool {
        self.rows
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(a, (&lo, &hi))| {
                let y = dot(a, c);
                let s = norm(a) * r;
                lo <= y - s && y + s <= hi
            })
    }

    pub fn misses_ball(&self, c: &[f64], r: f64) -> bool {
        self.rows
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(a, (&lo, &hi))| {
                let y = dot(a, c);
                let s = norm(a) * r;
                y + s < lo || y - s >= hi
            })
    }

    /// Volume of a bounded slab set (K = n rows), infinite otherwise.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        if self.rows.len() < n {
            return f64::INFINITY;
        }
        let d = Mat::from_rows(&self.rows).det().abs();
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product::<f64>()
            / d
    }

    /// All 2ⁿ vertices of a bounded slab set.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim();
        if self.rows.len() != n {
            return None;
        }
        let m = Mat::from_rows(&self.rows);
        let inv = m.inverse()?;
        Some(
            (0..1usize << n)
                .map(|mask| {
                    let y: Vec<f64> = (0..n)
                        .map(|k| {
                            if mask >> k & 1 == 1 {
                                self.hi[k]
                            } else {
                                self.lo[k]
                            }
                        })
                        .collect();
                    inv.mul_vec(&y)
                })
                .collect(),
        )
    }

    pub fn center(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        if self.rows.len() != n {
            return None;
        }
        let y: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect();
        Mat::from_rows(&self.rows).solve(&y)
    }

    fn x0_interval(&self, rest: &[f64]) -> Option<(f64, f64)> {
        let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
        for (row, (&lo, &hi)) in self.rows.iter().zip(self.lo.iter().zip(&self.hi)) {
            let s: f64 = row[1..].iter().zip(rest).map(|(p, q)| p * q).sum();
            let c = row[0];
            if c.abs() < 1e-300 {
                if !(lo <= s && s < hi) {
                    return None;
                }
                continue;
            }
            let (u, v) = ((lo - s) / c, (hi - s) / c);
            let (u, v) = if c > 0.0 { (u, v) } else { (v, u) };
            a = a.max(u);
            b = b.min(v);
        }
        (a <= b).then_some((a, b))
    }
}

/// A region in ℝⁿ queried by point membership and lattice enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Slabs(SlabSet),
    Ball { center: Vec<f64>, radius: f64 },
    Cube { center: Vec<f64>, side: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Slabs(s) => s.dim(),
            Region::Ball { center, .. } | Region::Cube { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Slabs(s) => s.contains(x),
            Region::Ball { center, radius } => {
                x.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    <= radius * radius
            }
            Region::Cube { center, side } => x
                .iter()
                .zip(center)
                .all(|(a, b)| (a - b) >= -0.5 * side && (a - b) < 0.5 * side),
        }
    }

    pub fn cube_corners(center: &[f64], side: f64) -> Vec<Vec<f64>> {
        let n = center.len();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| center[k] + if mask >> k & 1 == 1 { 0.5 } else { -0.5 } * side)
                    .collect()
            })
            .collect()
    }

    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Region::Cube { center, side } => Some((
                center.iter().map(|c| c - 0.5 * side).collect(),
                center.iter().map(|c| c + 0.5 * side).collect(),
            )),
            Region::Slabs(s) => {
                let v = s.vertices()?;
                let n = s.dim();
                let lo = (0..n)
                    .map(|k| v.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi = (0..n)
                    .map(|k| v.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                Some((lo, hi))
            }
        }
    }

    fn x0_interval(&self, rest: &[f64]) -> Option<(f64, f64)> {
        match self {
            Region::Slabs(s) => s.x0_interval(rest),
            Region::Ball { center, radius } => {
                let q: f64 = rest
                    .iter()
                    .zip(&center[1..])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let h2 = radius * radius - q;
                (h2 >= 0.0).then(|| (center[0] - h2.sqrt(), center[0] + h2.sqrt()))
            }
            Region::Cube { center, side } => {
                let inside = rest
                    .iter()
                    .zip(&center[1..])
                    .all(|(a, b)| (a - b) >= -0.5 * side && (a - b) < 0.5 * side);
                inside.then(|| (center[0] - 0.5 * side, center[0] + 0.5 * side))
            }
        }
    }
}

/// Visits every integer point of `region ∩ clip`, with x₀ varying fastest.
///
/// At least one of the two must be bounded.
pub fn for_each_lattice_point(region: &Region, clip: Option<&Region>, mut f: impl FnMut(&[i64])) {
    let n = region.dim();
    let bb = match (region.bounding_box(), clip.and_then(|c| c.bounding_box())) {
        (Some((a, b)), Some((c, d))) => (
            a.iter().zip(&c).map(|(x, y)| x.max(*y)).collect::<Vec<_>>(),
            b.iter().zip(&d).map(|(x, y)| x.min(*y)).collect::<Vec<_>>(),
        ),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => panic!("lattice enumeration needs a bounded region"),
    };
    let lo: Vec<i64> = bb.0.iter().map(|v| (v - 1e-9).ceil() as i64).collect();
    let hi: Vec<i64> = bb.1.iter().map(|v| (v + 1e-9).floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return;
    }
    let mut p = vec![0i64; n];
    let mut restf = vec![0f64; n.saturating_sub(1)];
    let mut idx: Vec<i64> = lo[1..].to_vec();
    let accept = |p: &[i64]| {
        let x: Vec<f64> = p.iter().map(|&v| v as f64).collect();
        region.contains(&x) && clip.is_none_or(|c| c.contains(&x))
    };
    loop {
        for k in 1..n {
            p[k] = idx[k - 1];
            restf[k - 1] = idx[k - 1] as f64;
        }
        let mut iv = region.x0_interval(&restf);
        if let (Some((a, b)), Some(c)) = (iv, clip) {
            iv = c.x0_interval(&restf).and_then(|(u, v)| {
                let (a2, b2) = (a.max(u), b.min(v));
                (a2 <= b2).then_some((a2, b2))
            });
        }
        if let Some((a, b)) = iv {
            let s = ((a - 1e-9).ceil() as i64).max(lo[0]);
            let e = ((b + 1e-9).floor() as i64).min(hi[0]);
            for x0 in s..=e {
                p[0] = x0;
                // interior points are strictly inside every constraint
                if x0 - s < 2 || e - x0 < 2 {
                    if !accept(&p) {
                        continue;
                    }
                }
                f(&p);
            }
        }
        let mut k = 0;
        loop {
            if k == n - 1 {
                return;
            }
            idx[k] += 1;
            if idx[k] <= hi[k + 1] {
                break;
            }
            idx[k] = lo[k + 1];
            k += 1;
        }
    }
}

pub fn lattice_points(region: &Region, clip: Option<&Region>) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for_each_lattice_point(region, clip, |p| out.push(p.to_vec()));
    out
}

pub fn ball(n: usize, radius: f64) -> Region {
    Region::Ball {
        center: vec![0.0; n],
        radius,
    }
}
