use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::curve::CurveSpec;
use crate::geometry::region::{Region, SlabSet};
use crate::geometry::sleeve::{AnisotropicBox, Plank, Scale};
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Dual planks T.
    Plank,
    /// Slabs L of size 1 × R^{2/n} × ⋯ × R.
    Slab,
    /// 1-tubes P of length R.
    Tube,
    /// Unit neighbourhoods S of hyperplanes with tangent normals.
    Hyperplane,
}

impl FamilyKind {
    pub fn label(self) -> &'static str {
        match self {
            FamilyKind::Plank => "T",
            FamilyKind::Slab => "L",
            FamilyKind::Tube => "P",
            FamilyKind::Hyperplane => "S",
        }
    }
}

/// One direction of a family: tiles are {x : rows·(x − origin) − o ∈ m + [−1/2, 1/2)^K}.
#[derive(Clone, Debug)]
pub struct Tiling {
    pub xi: f64,
    pub rows: Vec<Vec<f64>>,
}

impl Tiling {
    pub fn coords(&self, x: &[f64], origin: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(origin).map(|(a, b)| a - b).collect();
        self.rows.iter().map(|r| dot(r, &d)).collect()
    }

    /// Region of tile m at offset o, dilated by ρ about its centre.
    pub fn tile(&self, origin: &[f64], offset: &[f64], m: &[i64], rho: f64) -> SlabSet {
        let shift: Vec<f64> = self.rows.iter().map(|r| dot(r, origin)).collect();
        SlabSet {
            rows: self.rows.clone(),
            lo: (0..self.rows.len())
                .map(|k| shift[k] + offset[k] + m[k] as f64 - 0.5 * rho)
                .collect(),
            hi: (0..self.rows.len())
                .map(|k| shift[k] + offset[k] + m[k] as f64 + 0.5 * rho)
                .collect(),
        }
    }
}

/// A sampled family of planks, slabs, tubes or hyperplane slabs at scale R.
#[derive(Clone, Debug)]
pub struct GeomFamily {
    pub kind: FamilyKind,
    pub curve: CurveSpec<f64>,
    pub scale: Scale,
    /// Directions per curvature box.
    pub direction_refinement: usize,
    /// Offsets per unit of tile coordinate along each axis.
    pub offset_resolution: usize,
    pub origin: Vec<f64>,
}

impl GeomFamily {
    pub fn new(kind: FamilyKind, curve: &CurveSpec<f64>, r: f64) -> Result<Self> {
        Ok(GeomFamily {
            kind,
            curve: curve.clone(),
            scale: Scale::new(r, curve.n)?,
            // one direction per box undersamples hyperplane normals by several percent
            direction_refinement: if kind == FamilyKind::Hyperplane { 2 } else { 1 },
            offset_resolution: 1,
            origin: vec![0.0; curve.n],
        })
    }

    pub fn with_sampling(mut self, directions: usize, offsets: usize) -> Self {
        self.direction_refinement = directions.max(1);
        self.offset_resolution = offsets.max(1);
        self
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Self {
        self.origin = origin;
        self
    }

    pub fn n(&self) -> usize {
        self.curve.n
    }

    /// Box centres a + (i + 1/2)δ, each followed by q − 1 equally spaced shifts; refining keeps the coarser directions.
    pub fn directions(&self) -> Vec<f64> {
        let (a, b) = self.curve.interval;
        let delta = self.scale.delta;
        let q = self.direction_refinement;
        let count = (((b - a) / delta) - 1e-9).ceil().max(1.0) as usize;
        (0..count)
            .flat_map(|i| (0..q).map(move |k| a + (i as f64 + 0.5 + k as f64 / q as f64) * delta))
            .filter(|&xi| xi <= b)
            .collect()
    }

    pub fn tiling_at(&self, xi: f64) -> Tiling {
        let n = self.n();
        let delta = self.scale.delta;
        let theta = AnisotropicBox::new(&self.curve, 0, xi, delta);
        let rows: Vec<Vec<f64>> = match self.kind {
            FamilyKind::Plank => (0..n).map(|j| theta.t_mat.row(j).to_vec()).collect(),
            FamilyKind::Slab => (0..n)
                .map(|j| {
                    let s = if j == 0 { 1.0 / delta } else { 1.0 };
                    theta.t_mat.row(j).iter().map(|v| v * s).collect()
                })
                .collect(),
            FamilyKind::Tube => (0..n)
                .map(|j| {
                    let s = if j + 1 < n {
                        delta.powi(-(j as i32 + 1))
                    } else {
                        1.0
                    };
                    theta.t_mat.row(j).iter().map(|v| v * s).collect()
                })
                .collect(),
            FamilyKind::Hyperplane => {
                let t = self.curve.derivative(1, xi);
                let l = norm(&t);
                vec![t.iter().map(|v| v / (2.0 * l)).collect()]
            }
        };
        Tiling { xi, rows }
    }

    pub fn tilings(&self) -> Vec<Tiling> {
        self.directions()
            .into_iter()
            .map(|xi| self.tiling_at(xi))
            .collect()
    }

    /// The offset grid {0, 1/q, …, (q−1)/q}^K.
    pub fn offsets(&self, k: usize) -> Vec<Vec<f64>> {
        let q = self.offset_resolution;
        let total = q.pow(k as u32);
        (0..total)
            .map(|mut c| {
                (0..k)
                    .map(|_| {
                        let d = c % q;
                        c /= q;
                        d as f64 / q as f64
                    })
                    .collect()
            })
            .collect()
    }

    pub fn member_count(&self) -> usize {
        let k = if self.kind == FamilyKind::Hyperplane {
            1
        } else {
            self.n()
        };
        self.directions().len() * self.offset_resolution.pow(k as u32)
    }
}

/// Slabs L tiling T (kind Slab) or the 1-tubes covering R^ε L for every L of T (kind Tube).
pub fn derived_family(
    plank: &Plank,
    kind: FamilyKind,
    epsilon: f64,
    scale: &Scale,
) -> Vec<SlabSet> {
    let n = plank.m.len();
    let delta = scale.delta;
    let base = plank.region();
    let row0: Vec<f64> = base.rows[0].iter().map(|v| v / delta).collect();
    let pieces = (1.0 / delta).round() as i64;
    let slabs: Vec<SlabSet> = (0..pieces)
        .map(|k| {
            let mut s = base.clone();
            let w = (base.hi[0] - base.lo[0]) / delta;
            let lo0 = base.lo[0] / delta + k as f64 * w / pieces as f64;
            s.rows[0] = row0.clone();
            s.lo[0] = lo0;
            s.hi[0] = lo0 + w / pieces as f64;
            s
        })
        .collect();
    match kind {
        FamilyKind::Slab => slabs,
        FamilyKind::Tube => {
            let rho = scale.radius.powf(epsilon);
            slabs
                .iter()
                .flat_map(|l| tubes_of_slab(l, rho, delta, n))
                .collect()
        }
        FamilyKind::Plank => vec![base],
        FamilyKind::Hyperplane => slabs.iter().map(|l| hyperplane_slab(l)).collect(),
    }
}

/// P-tiles whose centres lie in ρL.
fn tubes_of_slab(l: &SlabSet, rho: f64, delta: f64, n: usize) -> Vec<SlabSet> {
    let c: Vec<f64> = l.lo.iter().zip(&l.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    // per-row centre lists in L coordinates, and tube widths in those coordinates
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    for j in 0..n {
        let full = (l.hi[j] - l.lo[j]) * rho;
        let w = if j == 0 || j + 1 == n {
            l.hi[j] - l.lo[j]
        } else {
            delta.powi(j as i32 + 1)
        };
        let pieces_per_unit = (l.hi[j] - l.lo[j]) / w;
        let half = 0.5 * full / w;
        // centres sit on the grid of L's own subdivision
        let shift = if (pieces_per_unit.round() as i64) % 2 == 0 {
            0.5
        } else {
            0.0
        };
        let kmax = (half - shift + 1e-9).floor() as i64;
        let list: Vec<f64> = (-kmax - 1..=kmax)
            .map(|k| k as f64 + shift)
            .filter(|t| t.abs() <= half + 1e-9)
            .map(|t| c[j] + t * w)
            .collect();
        centres.push(list);
        widths.push(w);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(SlabSet {
            rows: l.rows.clone(),
            lo: (0..n)
                .map(|j| centres[j][idx[j]] - 0.5 * widths[j])
                .collect(),
            hi: (0..n)
                .map(|j| centres[j][idx[j]] + 0.5 * widths[j])
                .collect(),
        });
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            idx[k] += 1;
            if idx[k] < centres[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// S(L) = {x : |ν·x − ν·c_L| < 1} with ν the unit tangent normal of L's first row.
pub fn hyperplane_slab(l: &SlabSet) -> SlabSet {
    let a = &l.rows[0];
    let na = norm(a);
    let nu: Vec<f64> = a.iter().map(|v| v / na).collect();
    let c = match l.center() {
        Some(p) => dot(&nu, &p),
        None => 0.5 * (l.lo[0] + l.hi[0]) / na,
    };
    SlabSet {
        rows: vec![nu],
        lo: vec![c - 1.0],
        hi: vec![c + 1.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncidenceMode {
    /// Q ⊆ dilate·T.
    Containment,
    /// Q ∩ dilate·T ≠ ∅, tested on the cube axes and the plank face normals.
    Intersection,
}

/// #{T : Q ⊆ dilate·T} for the cube Q of the given centre and side.
pub fn incidence_count(q_center: &[f64], q_side: f64, planks: &[Plank], dilate: f64) -> usize {
    incidence_count_mode(q_center, q_side, planks, dilate, IncidenceMode::Containment)
}

pub fn incidence_count_mode(
    q_center: &[f64],
    q_side: f64,
    planks: &[Plank],
    dilate: f64,
    mode: IncidenceMode,
) -> usize {
    let corners = Region::cube_corners(q_center, q_side);
    planks
        .iter()
        .filter(|p| {
            let s = p.dilated(dilate).region();
            match mode {
                IncidenceMode::Containment => corners.iter().all(|c| s.contains_closed(c, 1e-12)),
                IncidenceMode::Intersection => cube_meets(&s, q_center, q_side),
            }
        })
        .count()
}

fn cube_meets(s: &SlabSet, c: &[f64], side: f64) -> bool {
    let face_ok = s
        .rows
        .iter()
        .zip(s.lo.iter().zip(&s.hi))
        .all(|(a, (&lo, &hi))| {
            let y = dot(a, c);
            let h = 0.5 * side * a.iter().map(|v| v.abs()).sum::<f64>();
            y + h >= lo && y - h <= hi
        });
    if !face_ok {
        return false;
    }
    match s.vertices() {
        Some(v) => (0..c.len()).all(|k| {
            let lo = v.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = v.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            hi >= c[k] - 0.5 * side && lo <= c[k] + 0.5 * side
        }),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sleeve::curvature_boxes;

    #[test]
    fn slab_slicing_counts() {
        let curve = CurveSpec::<f64>::moment(2);
        let s = curvature_boxes(&curve, 256.0).unwrap();
        let p = Plank::new(&s.boxes[3], vec![1, 0]);
        let ls = derived_family(&p, FamilyKind::Slab, 0.0, &s.scale);
        assert_eq!(ls.len(), 16);
        let total: f64 = ls.iter().map(|l| l.volume()).sum();
        assert!((total / p.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tube_counts() {
        let c3 = CurveSpec::<f64>::moment(3);
        let s = curvature_boxes(&c3, 512.0).unwrap();
        let p = Plank::new(&s.boxes[2], vec![0, 1, 0]);
        let ls = derived_family(&p, FamilyKind::Slab, 0.0, &s.scale);
        assert_eq!(tubes_of_slab(&ls[0], 1.0, s.scale.delta, 3).len(), 64);
        let c2 = CurveSpec::<f64>::moment(2);
        let s2 = curvature_boxes(&c2, 256.0).unwrap();
        let p2 = Plank::new(&s2.boxes[0], vec![0, 0]);
        let l2 = derived_family(&p2, FamilyKind::Slab, 0.0, &s2.scale);
        let t2 = tubes_of_slab(&l2[4], 1.0, s2.scale.delta, 2);
        assert_eq!(t2, vec![l2[4].clone()]);
    }

    #[test]
    fn hyperplane_slab_contains_its_slab() {
        let c3 = CurveSpec::<f64>::moment(3);
        let s = curvature_boxes(&c3, 512.0).unwrap();
        let p = Plank::new(&s.boxes[5], vec![2, -1, 3]);
        for l in derived_family(&p, FamilyKind::Slab, 0.0, &s.scale) {
            let h = hyperplane_slab(&l);
            for v in l.vertices().unwrap() {
                assert!(h.contains_closed(&v, 1e-9));
            }
            assert!((h.hi[0] - h.lo[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_cube_has_no_incidences() {
        let c = CurveSpec::<f64>::moment(2);
        let s = curvature_boxes(&c, 64.0).unwrap();
        let planks: Vec<Plank> = s.boxes.iter().map(|b| Plank::new(b, vec![0, 0])).collect();
        assert_eq!(incidence_count(&[1e4, 1e4], 8.0, &planks, 2.0), 0);
        assert_eq!(
            incidence_count_mode(&[1e4, 1e4], 8.0, &planks, 2.0, IncidenceMode::Intersection),
            0
        );
    }
}
