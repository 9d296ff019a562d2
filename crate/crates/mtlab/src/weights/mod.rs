//! Non-negative weights on the unit lattice, their masses on geometric regions, and point configurations.

pub mod carbery;
pub mod hull;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{for_each_lattice_point, GeomFamily, Region};
use crate::wavepacket::field::FieldGrid;

pub use carbery::{carbery_points, multibush_weight, PointConfiguration, Verification};
pub use hull::{hull_volume, hull_volume_facets};

/// A weight given by its values on a finite set of lattice points (zero elsewhere).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Weight {
    pub n: usize,
    pub points: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    #[serde(skip)]
    index: HashMap<Vec<i64>, usize>,
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.points == other.points && self.values == other.values
    }
}

impl Weight {
    pub fn new(n: usize, points: Vec<Vec<i64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(LabError::DomainError(
                "points and values differ in length".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(LabError::DomainError(format!(
                "weight value {v} is not non-negative"
            )));
        }
        let mut w = Weight {
            n,
            points: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        };
        for (p, v) in points.into_iter().zip(values) {
            if let Some(&i) = w.index.get(&p) {
                w.values[i] += v;
            } else {
                w.index.insert(p.clone(), w.points.len());
                w.points.push(p);
                w.values.push(v);
            }
        }
        Ok(w)
    }

    pub fn empty(n: usize) -> Self {
        Weight {
            n,
            ..Default::default()
        }
    }

    /// Indicator of the given lattice points.
    pub fn indicator(n: usize, points: Vec<Vec<i64>>) -> Self {
        let v = vec![1.0; points.len()];
        Self::new(n, points, v).expect("valid")
    }

    /// Values of f at the lattice points of a bounded region.
    pub fn from_region(region: &Region, clip: Option<&Region>, f: impl Fn(&[i64]) -> f64) -> Self {
        let (mut pts, mut vals) = (Vec::new(), Vec::new());
        for_each_lattice_point(region, clip, |p| {
            let v = f(p);
            if v > 0.0 {
                pts.push(p.to_vec());
                vals.push(v);
            }
        });
        Self::new(region.dim(), pts, vals).expect("valid")
    }

    /// Dense form on a unit-lattice grid.
    pub fn from_dense(grid: &FieldGrid, values: &[f64]) -> Result<Self> {
        if grid.spacing() != 1.0 || values.len() != grid.len() {
            return Err(LabError::DomainError(
                "dense weights live on the unit lattice".into(),
            ));
        }
        let (mut pts, mut vals) = (Vec::new(), Vec::new());
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                pts.push(grid.multi_index(i));
                vals.push(v);
            }
        }
        Self::new(grid.n, pts, vals)
    }

    pub fn to_dense(&self, grid: &FieldGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| self.eval(&grid.multi_index(i)))
            .collect()
    }

    fn rebuild_index(&mut self) {
        if self.index.len() != self.points.len() {
            self.index = self
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), i))
                .collect();
        }
    }

    pub fn eval(&self, x: &[i64]) -> f64 {
        if self.index.len() == self.points.len() {
            self.index.get(x).map_or(0.0, |&i| self.values[i])
        } else {
            self.points
                .iter()
                .position(|p| p == x)
                .map_or(0.0, |i| self.values[i])
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn translate(&self, v: &[i64]) -> Self {
        let pts = self
            .points
            .iter()
            .map(|p| p.iter().zip(v).map(|(a, b)| a + b).collect())
            .collect();
        Self::new(self.n, pts, self.values.clone()).expect("valid")
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(
            self.n,
            self.points.clone(),
            self.values.iter().map(|v| v * a).collect(),
        )
        .expect("valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut w: Weight =
            serde_json::from_str(s).map_err(|e| LabError::ConfigError(e.to_string()))?;
        w.rebuild_index();
        Ok(w)
    }
}

/// (Σ_{x ∈ E ∩ ℤⁿ} w(x)^r)^{1/r}.
pub fn mass(w: &Weight, region: &Region, r: f64) -> f64 {
    w.points
        .iter()
        .zip(&w.values)
        .filter(|(p, _)| region.contains(&p.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .map(|(_, v)| v.powf(r))
        .sum::<f64>()
        .powf(1.0 / r)
}

/// The maximiser of a family supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupMass {
    pub value: f64,
    pub xi: f64,
    pub offset: Vec<f64>,
    pub index: Vec<i64>,
}

/// sup over the sampled family of (Σ_{x∈E} w(x)^r)^{1/r}.
pub fn sup_mass(w: &Weight, family: &GeomFamily, r: f64) -> SupMass {
    sup_mass_dilated(w, family, r, 1.0)
}

/// As [`sup_mass`] over the members dilated by ρ about their centres.
pub fn sup_mass_dilated(w: &Weight, family: &GeomFamily, r: f64, rho: f64) -> SupMass {
    let tilings = family.tilings();
    let powered: Vec<f64> = w.values.iter().map(|v| v.powf(r)).collect();
    let pts: Vec<Vec<f64>> = w
        .points
        .iter()
        .map(|p| p.iter().map(|&v| v as f64).collect())
        .collect();
    let best: Vec<(f64, f64, Vec<f64>, Vec<i64>)> = tilings
        .par_iter()
        .map(|t| {
            let k = t.rows.len();
            let coords: Vec<Vec<f64>> = pts.iter().map(|x| t.coords(x, &family.origin)).collect();
            let mut top = (0.0, t.xi, vec![0.0; k], vec![0i64; k]);
            for off in family.offsets(k) {
                if let Some((v, m)) = dense_window_max(&coords, &powered, &off, rho) {
                    if v > top.0 {
                        top = (v, t.xi, off.clone(), m);
                    }
                    continue;
                }
                let mut bins: HashMap<Vec<i64>, f64> = HashMap::new();
                for (y, &pw) in coords.iter().zip(&powered) {
                    let lo: Vec<i64> = (0..k)
                        .map(|a| (y[a] - off[a] - 0.5 * rho).floor() as i64 + 1)
                        .collect();
                    let hi: Vec<i64> = (0..k)
                        .map(|a| (y[a] - off[a] + 0.5 * rho).floor() as i64)
                        .collect();
                    let mut m = lo.clone();
                    'outer: loop {
                        *bins.entry(m.clone()).or_insert(0.0) += pw;
                        let mut a = 0;
                        loop {
                            if a == k {
                                break 'outer;
                            }
                            m[a] += 1;
                            if m[a] <= hi[a] {
                                break;
                            }
                            m[a] = lo[a];
                            a += 1;
                        }
                    }
                }
                let mut keys: Vec<(&Vec<i64>, &f64)> = bins.iter().collect();
                keys.sort_by(|a, b| a.0.cmp(b.0));
                for (m, &v) in keys {
                    if v > top.0 {
                        top = (v, t.xi, off.clone(), m.clone());
                    }
                }
            }
            top
        })
        .collect();
    let mut out = SupMass {
        value: 0.0,
        xi: tilings.first().map_or(0.0, |t| t.xi),
        offset: vec![],
        index: vec![],
    };
    for (v, xi, off, m) in best {
        if v > out.value {
            out = SupMass {
                value: v,
                xi,
                offset: off,
                index: m,
            };
        }
    }
    out.value = out.value.powf(1.0 / r);
    out
}

const DENSE_LIMIT: usize = 1 << 22;

/// Largest dilated-tile mass by sliding window sums over unit bins, for integer ρ.
///
/// Tile m dilated by ρ is [m − ρ/2, m + ρ/2) in every coordinate; with bins [b + s, b + 1 + s), s = ρ/2 − ⌊ρ/2⌋,
/// it is the union of bins m − ⌈ρ/2⌉, …, m − ⌈ρ/2⌉ + ρ − 1.
fn dense_window_max(
    coords: &[Vec<f64>],
    powered: &[f64],
    off: &[f64],
    rho: f64,
) -> Option<(f64, Vec<i64>)> {
    if coords.is_empty() || (rho - rho.round()).abs() > 1e-12 || rho < 1.0 {
        return None;
    }
    let w = rho.round() as i64;
    let k = off.len();
    let s = 0.5 * rho - (0.5 * rho).floor();
    let bins: Vec<Vec<i64>> = coords
        .iter()
        .map(|y| (0..k).map(|a| (y[a] - off[a] - s).floor() as i64).collect())
        .collect();
    let mut lo = vec![i64::MAX; k];
    let mut hi = vec![i64::MIN; k];
    for b in &bins {
        for a in 0..k {
            lo[a] = lo[a].min(b[a]);
            hi[a] = hi[a].max(b[a]);
        }
    }
    let dims: Vec<usize> = (0..k).map(|a| (hi[a] - lo[a] + w) as usize).collect();
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))?;
    if total > DENSE_LIMIT {
        return None;
    }
    let mut strides = vec![1usize; k];
    for a in (0..k.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let mut arr = vec![0.0; total];
    for (b, &pw) in bins.iter().zip(powered) {
        let i: usize = (0..k).map(|a| (b[a] - lo[a]) as usize * strides[a]).sum();
        arr[i] += pw;
    }
    // Along each axis replace entry t by the sum of entries t − w + 1 ..= t (clipped).
    for a in 0..k {
        let mut next = vec![0.0; total];
        for i in 0..total {
            let t = (i / strides[a]) % dims[a];
            let prev = if t > 0 { next[i - strides[a]] } else { 0.0 };
            let drop = if t >= w as usize {
                arr[i - w as usize * strides[a]]
            } else {
                0.0
            };
            next[i] = prev + arr[i] - drop;
        }
        arr = next;
    }
    let (mut best, mut at) = (0.0, 0usize);
    for (i, &v) in arr.iter().enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    // Entry t is the window whose last bin is lo + t.
    let c = (0.5 * rho).ceil() as i64;
    let m: Vec<i64> = (0..k)
        .map(|a| {
            let t = ((at / strides[a]) % dims[a]) as i64;
            let first = t - w + 1 + lo[a];
            first + c
        })
        .collect();
    Some((best, m))
}

/// Σ_{v∈ℤⁿ} e^{−|v|}.
fn kernel_normaliser(n: usize) -> f64 {
    let h = 60i64;
    let side = (2 * h + 1) as usize;
    let mut s = 0.0;
    for c in 0..side.pow(n as u32) {
        let mut r = c;
        let mut q = 0.0;
        for _ in 0..n {
            let v = (r % side) as i64 - h;
            r /= side;
            q += (v * v) as f64;
        }
        s += (-q.sqrt()).exp();
    }
    s
}

/// κ * w with κ(v) = e^{−|v|}/Σe^{−|u|}, evaluated on a unit-lattice grid.
///
/// The kernel is positive with κ(v + e) ≥ e^{−1} κ(v) for |e| = 1, so adjacent values of the output differ by at most a factor e.
pub fn mollify_unit(w: &Weight, grid: &FieldGrid) -> Weight {
    let z = kernel_normaliser(w.n);
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.multi_index(i);
            w.points
                .iter()
                .zip(&w.values)
                .map(|(p, v)| {
                    let d: f64 = p
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| ((a - b) * (a - b)) as f64)
                        .sum();
                    v * (-d.sqrt()).exp()
                })
                .sum::<f64>()
                / z
        })
        .collect();
    Weight::from_dense(grid, &vals).expect("unit grid")
}

/// Largest ratio of adjacent non-zero values on a dense grid.
pub fn adjacent_ratio(w: &Weight, grid: &FieldGrid) -> f64 {
    let n = grid.n;
    let mut c: f64 = 1.0;
    for i in 0..grid.len() {
        let x = grid.multi_index(i);
        let a = w.eval(&x);
        if a <= 0.0 {
            continue;
        }
        for k in 0..n {
            let mut y = x.clone();
            y[k] += 1;
            let b = w.eval(&y);
            if b > 0.0 {
                c = c.max(a / b).max(b / a);
            }
        }
    }
    c
}
