//! Dyadic decompositions F = Σ_τ F_τ and numerical checks of the three decoupling axioms.
//!
//! Level k splits the parameter interval into pieces of length 2^{-k}; only the admissible levels
//! {0} ∪ [⌈ε log₂ R⌉, log₂ R^{1/n}] are tested.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::extremal::multibush::TubeSystem;
use crate::geometry::{AnisotropicBox, CurveSpec, Scale};
use crate::lab::instance::PacketField;
use crate::linalg::{dot, norm, Mat};
use crate::wavepacket::packet_value;

pub type PieceFn = Arc<dyn Fn(u32, usize, &[f64]) -> Complex64 + Send + Sync>;
pub type HotFn = Arc<dyn Fn(u32, usize, &mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// {0} ∪ [⌈ε log₂ R⌉, log₂ R^{1/n}].
pub fn admissible_levels(r: f64, n: usize, epsilon: f64) -> Result<Vec<u32>> {
    let scale = Scale::new(r, n)?;
    let lo = (epsilon * scale.radius.log2() - 1e-9).ceil().max(1.0) as u32;
    let mut levels = vec![0];
    levels.extend(lo..=scale.box_exp);
    Ok(levels)
}

fn uniform_in_ball(n: usize, r: f64, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if dot(&x, &x) <= r * r {
            return x;
        }
    }
}

#[derive(Clone)]
pub struct AxiomaticStructure {
    pub curve: CurveSpec<f64>,
    pub radius: f64,
    /// Ascending, starting at 0.
    pub levels: Vec<u32>,
    /// Pieces at this level are primary; coarser pieces are sums of them.
    pub base: u32,
    /// Every piece vanishes (or is negligible) outside this ball.
    pub support_radius: f64,
    /// Whether the pieces at the base level are sums of wave packets.
    pub packet_realizable: bool,
    eval: PieceFn,
    hot: HotFn,
    tubes: Option<Arc<TubeSystem>>,
}

impl std::fmt::Debug for AxiomaticStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxiomaticStructure")
            .field("n", &self.curve.n)
            .field("radius", &self.radius)
            .field("levels", &self.levels)
            .field("base", &self.base)
            .field("support_radius", &self.support_radius)
            .field("packet_realizable", &self.packet_realizable)
            .finish()
    }
}

impl AxiomaticStructure {
    /// A structure from an arbitrary piece function; hot points are uniform in the support ball.
    pub fn custom(
        curve: &CurveSpec<f64>,
        radius: f64,
        levels: Vec<u32>,
        support_radius: f64,
        eval: PieceFn,
    ) -> Self {
        let n = curve.n;
        let base = levels.iter().copied().max().unwrap_or(0);
        let hot: HotFn = Arc::new(move |_, _, rng| uniform_in_ball(n, support_radius, rng));
        AxiomaticStructure {
            curve: curve.clone(),
            radius,
            levels,
            base,
            support_radius,
            packet_realizable: false,
            eval,
            hot,
            tubes: None,
        }
    }

    /// Pieces grouped by box of the curvature sleeve; every admissible level is a genuine sum of packets.
    pub fn from_packets(field: Arc<PacketField>, epsilon: f64) -> Result<Self> {
        let n = field.n();
        let radius = field.scale.radius;
        let base = field.scale.box_exp;
        let levels = admissible_levels(radius, n, epsilon)?;
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); field.boxes.len()];
        for (i, c) in field.packets.iter().enumerate() {
            groups[c.theta_index].push(i);
        }
        let groups = Arc::new(groups);
        let curve = field.curve.clone();
        let count_base = field.boxes.len();
        let (f1, g1) = (field.clone(), groups.clone());
        let eval: PieceFn = Arc::new(move |k, i, x| {
            let kids = child_range(k, i, base, count_base);
            kids.flat_map(|t| g1[t].iter())
                .map(|&p| {
                    let c = &f1.packets[p];
                    packet_value(&f1.boxes[c.theta_index], &c.m, c.a(), x)
                })
                .sum()
        });
        let (f2, g2) = (field.clone(), groups);
        let hot: HotFn = Arc::new(move |k, i, rng| {
            let kids: Vec<usize> = child_range(k, i, base, count_base)
                .flat_map(|t| g2[t].iter().copied())
                .collect();
            if kids.is_empty() {
                return uniform_in_ball(n, radius, rng);
            }
            let c = &f2.packets[kids[rng.gen_range(0..kids.len())]];
            let y: Vec<f64> =
                c.m.iter()
                    .map(|&m| m as f64 + rng.gen_range(-0.25..0.25))
                    .collect();
            f2.boxes[c.theta_index].t_mat.solve(&y).expect("invertible")
        });
        Ok(AxiomaticStructure {
            curve,
            radius,
            levels,
            base,
            support_radius: 2.0 * radius,
            packet_realizable: true,
            eval,
            hot,
            tubes: None,
        })
    }

    /// Tube pieces at level log₂ ℓ, sums above it, and the flat filler d^{1/2} on the support ball below it.
    pub fn from_tubes(system: Arc<TubeSystem>, epsilon: f64) -> Self {
        let n = system.n;
        let radius = system.radius;
        let base = system.ell.log2().round() as u32;
        let mut levels = admissible_levels(radius, n, epsilon).unwrap_or_else(|_| vec![0]);
        if !levels.contains(&base) {
            levels.push(base);
            levels.sort_unstable();
        }
        let curve = CurveSpec::<f64>::moment(n);
        let support = system.support_radius();
        let count_base = system.directions();
        let s1 = system.clone();
        let eval: PieceFn = Arc::new(move |k, i, x| {
            if k > base {
                return if dot(x, x) <= support * support {
                    Complex64::new(2f64.powf(-0.5 * k as f64), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            child_range(k, i, base, count_base)
                .map(|t| s1.piece(t, x))
                .sum()
        });
        let s2 = system.clone();
        let hot: HotFn = Arc::new(move |k, i, rng| {
            if k > base {
                return uniform_in_ball(n, 0.5 * radius, rng);
            }
            let kids: Vec<usize> = child_range(k, i, base, count_base)
                .filter(|&t| !s2.selected(t).is_empty())
                .collect();
            if kids.is_empty() || (s2.background && rng.gen_bool(0.5)) {
                return uniform_in_ball(n, radius, rng);
            }
            let t = kids[rng.gen_range(0..kids.len())];
            let hs = s2.selected(t);
            let h = &hs[rng.gen_range(0..hs.len())];
            let y: Vec<f64> = h
                .iter()
                .map(|&v| 0.5 * v as f64 + rng.gen_range(-0.25..0.25))
                .collect();
            s2.boxes[t].t_mat.solve(&y).expect("invertible")
        });
        AxiomaticStructure {
            curve,
            radius,
            levels,
            base,
            support_radius: support,
            packet_realizable: false,
            eval,
            hot,
            tubes: Some(system),
        }
    }

    pub fn n(&self) -> usize {
        self.curve.n
    }

    pub fn count(&self, k: u32) -> usize {
        level_count(&self.curve, k)
    }

    pub fn interval(&self, k: u32, i: usize) -> (f64, f64) {
        let a = self.curve.interval.0;
        let d = 2f64.powi(-(k as i32));
        (
            a + i as f64 * d,
            (a + (i + 1) as f64 * d).min(self.curve.interval.1),
        )
    }

    /// Indices at level k2 ≥ k of the pieces inside piece i of level k.
    pub fn children(&self, k: u32, i: usize, k2: u32) -> Range<usize> {
        child_range(k, i, k2, self.count(k2))
    }

    pub fn eval(&self, k: u32, i: usize, x: &[f64]) -> Complex64 {
        (self.eval)(k, i, x)
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        self.eval(0, 0, x)
    }

    /// A point where piece i of level k is likely to be large.
    pub fn hot_point(&self, k: u32, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.hot)(k, i, rng)
    }

    pub fn tubes(&self) -> Option<&TubeSystem> {
        self.tubes.as_deref()
    }

    /// The box of length 2^{-k} at the centre of piece i; its tile {|T y|_∞ ≤ ½} is Γ(τ)*.
    pub fn piece_box(&self, k: u32, i: usize) -> AnisotropicBox<f64> {
        let (a, b) = self.interval(k, i);
        AnisotropicBox::new(&self.curve, i, 0.5 * (a + b), 2f64.powi(-(k as i32)))
    }
}

fn level_count(curve: &CurveSpec<f64>, k: u32) -> usize {
    let (a, b) = curve.interval;
    ((b - a) * 2f64.powi(k as i32) - 1e-9).ceil().max(1.0) as usize
}

fn child_range(k: u32, i: usize, k2: u32, count2: usize) -> Range<usize> {
    if k2 <= k {
        let j = i >> (k - k2);
        return j..(j + 1).min(count2);
    }
    let f = 1usize << (k2 - k);
    (i * f).min(count2)..((i + 1) * f).min(count2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomOptions {
    /// Sample points per piece and level pair for the pointwise axiom.
    pub samples: usize,
    /// Translates per piece for the local-constancy and orthogonality axioms.
    pub translates: usize,
    /// Monte Carlo points for integrals over the support ball.
    pub ball_samples: usize,
    pub seed: u64,
    /// Midpoint samples per axis of the smoothing window.
    pub window_points: usize,
    /// Constant below which an axiom is reported as holding.
    pub limit: f64,
    /// Largest overlap of {Γ(τ) + K*} for which a body K is used.
    pub overlap_limit: usize,
}

impl Default for AxiomOptions {
    fn default() -> Self {
        AxiomOptions {
            samples: 64,
            translates: 100,
            ball_samples: 4096,
            window_points: 8,
            seed: 0,
            limit: 4.0,
            overlap_limit: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub constant: f64,
    pub limit: f64,
    pub pass: bool,
    pub tests: usize,
    pub skipped: usize,
}

impl AxiomResult {
    fn new(values: &[f64], skipped: usize, limit: f64) -> Self {
        let constant = values.iter().cloned().fold(0.0, f64::max);
        AxiomResult {
            constant,
            limit,
            pass: constant <= limit,
            tests: values.len(),
            skipped,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub levels: Vec<u32>,
    pub packet_realizable: bool,
    /// |F_γ| ≤ C₀ Σ_{τ⊂γ} |F_τ| pointwise.
    pub da0: AxiomResult,
    /// Local constancy of |F_τ| on translates of Γ(τ)*.
    pub da1: AxiomResult,
    /// ∫_K |F_γ|² ≤ C₂ Σ_{τ⊂γ} ∫_K |F_τ|² on bodies of bounded overlap.
    pub da2: AxiomResult,
    /// Largest overlap number met among the bodies that were used.
    pub max_overlap: usize,
}

fn pairs(levels: &[u32]) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (a, &k) in levels.iter().enumerate() {
        for &k2 in &levels[a + 1..] {
            out.push((k, k2));
        }
    }
    out
}

fn cube_grid(n: usize, g: usize) -> Vec<Vec<f64>> {
    let total = g.pow(n as u32);
    (0..total)
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let v = ((c % g) as f64 + 0.5) / g as f64 - 0.5;
                    c /= g;
                    v
                })
                .collect()
        })
        .collect()
}

fn sign_vertices(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|s| {
            (0..n)
                .map(|k| if s >> k & 1 == 1 { 0.5 } else { -0.5 })
                .collect()
        })
        .collect()
}

fn offset(base: &[f64], m: &Mat<f64>, u: &[f64], scale: f64) -> Vec<f64> {
    let v = m.mul_vec(u);
    base.iter().zip(v).map(|(b, d)| b + scale * d).collect()
}

fn seeded(seed: u64, tag: u64, k: u32, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((k as u64) << 48) ^ i as u64,
    )
}

fn da0(s: &AxiomaticStructure, o: &AxiomOptions) -> AxiomResult {
    let n = s.n();
    let jobs: Vec<(u32, u32, usize)> = pairs(&s.levels)
        .into_iter()
        .flat_map(|(k, k2)| (0..s.count(k)).map(move |i| (k, k2, i)))
        .collect();
    let out: Vec<(Vec<f64>, usize)> = jobs
        .par_iter()
        .map(|&(k, k2, i)| {
            let mut rng = seeded(o.seed, 1 + k2 as u64, k, i);
            let kids = s.children(k, i, k2);
            let mut vals = Vec::new();
            let mut skipped = 0;
            for t in 0..o.samples {
                let x = if t % 2 == 0 {
                    s.hot_point(k, i, &mut rng)
                } else {
                    uniform_in_ball(n, s.support_radius, &mut rng)
                };
                let lhs = s.eval(k, i, &x).norm();
                if lhs < 1e-300 {
                    skipped += 1;
                    continue;
                }
                let rhs: f64 = kids.clone().map(|t| s.eval(k2, t, &x).norm()).sum();
                vals.push(if rhs > 0.0 { lhs / rhs } else { f64::INFINITY });
            }
            (vals, skipped)
        })
        .collect();
    let skipped = out.iter().map(|o| o.1).sum();
    let vals: Vec<f64> = out.into_iter().flat_map(|o| o.0).collect();
    AxiomResult::new(&vals, skipped, o.limit)
}

/// For each translate Q = y + Γ(τ)* with y a hot point, compares the smoothed modulus
/// (avg over v + 2Γ(τ)* of |F_τ|²)^{1/2} at the vertices and centre of Q.
fn da1(s: &AxiomaticStructure, o: &AxiomOptions) -> AxiomResult {
    let n = s.n();
    let window = cube_grid(n, o.window_points);
    let mut corners = sign_vertices(n);
    corners.push(vec![0.0; n]);
    let jobs: Vec<(u32, usize)> = s
        .levels
        .iter()
        .flat_map(|&k| (0..s.count(k)).map(move |i| (k, i)))
        .collect();
    let out: Vec<(Vec<f64>, usize)> = jobs
        .par_iter()
        .map(|&(k, i)| {
            let mut rng = seeded(o.seed, 2, k, i);
            let m = s.piece_box(k, i).t_mat.inverse().expect("invertible");
            let mut vals = Vec::new();
            let mut skipped = 0;
            for _ in 0..o.translates {
                let y = s.hot_point(k, i, &mut rng);
                let sm: Vec<f64> = corners
                    .iter()
                    .map(|c| {
                        let v = offset(&y, &m, c, 1.0);
                        (window
                            .iter()
                            .map(|z| s.eval(k, i, &offset(&v, &m, z, 4.0)).norm_sqr())
                            .sum::<f64>()
                            / window.len() as f64)
                            .sqrt()
                    })
                    .collect();
                let hi = sm.iter().cloned().fold(0.0, f64::max);
                let lo = sm.iter().cloned().fold(f64::INFINITY, f64::min);
                if hi < 1e-300 {
                    skipped += 1;
                    continue;
                }
                vals.push(if lo > 0.0 { hi / lo } else { f64::INFINITY });
            }
            (vals, skipped)
        })
        .collect();
    let skipped = out.iter().map(|o| o.1).sum();
    let vals: Vec<f64> = out.into_iter().flat_map(|o| o.0).collect();
    AxiomResult::new(&vals, skipped, o.limit)
}

fn arc_samples(s: &AxiomaticStructure, k: u32, t: usize) -> Vec<Vec<f64>> {
    let (a, b) = s.interval(k, t);
    (0..9)
        .map(|j| s.curve.point(a + (b - a) * j as f64 / 8.0))
        .collect()
}

/// Overlap of {Γ(τ) + K*}_{τ ∈ kids}, with Γ(τ) + K* and Γ(τ') + K* taken to meet when some sampled pair has dist(p, p') ≤ 2 in `metric`.
fn overlap(
    s: &AxiomaticStructure,
    k2: u32,
    kids: Range<usize>,
    metric: impl Fn(&[f64]) -> f64,
) -> usize {
    let arcs: Vec<Vec<Vec<f64>>> = kids.clone().map(|t| arc_samples(s, k2, t)).collect();
    let meets = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        a.iter().any(|p| {
            b.iter()
                .any(|q| metric(&p.iter().zip(q).map(|(x, y)| x - y).collect::<Vec<_>>()) <= 2.0)
        })
    };
    (0..arcs.len())
        .map(|i| {
            (0..arcs.len())
                .filter(|&j| meets(&arcs[i], &arcs[j]))
                .count()
        })
        .max()
        .unwrap_or(0)
}

fn da2(s: &AxiomaticStructure, o: &AxiomOptions) -> (AxiomResult, usize) {
    let n = s.n();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0xda2);
    let ball_pts: Vec<Vec<f64>> = (0..o.ball_samples)
        .map(|_| uniform_in_ball(n, s.radius, &mut rng))
        .collect();
    let grid = cube_grid(n, 4);
    let rho = s.radius;
    let jobs: Vec<(u32, u32, usize)> = pairs(&s.levels)
        .into_iter()
        .flat_map(|(k, k2)| (0..s.count(k)).map(move |i| (k, k2, i)))
        .collect();
    let out: Vec<(Vec<f64>, usize, usize)> = jobs
        .par_iter()
        .map(|&(k, k2, i)| {
            let kids = s.children(k, i, k2);
            let mut vals = Vec::new();
            let mut skipped = 0;
            let mut worst = 0;
            let ratio = |pts: &[Vec<f64>]| {
                let lhs: f64 = pts.iter().map(|x| s.eval(k, i, x).norm_sqr()).sum();
                let rhs: f64 = pts
                    .iter()
                    .map(|x| {
                        kids.clone()
                            .map(|t| s.eval(k2, t, x).norm_sqr())
                            .sum::<f64>()
                    })
                    .sum();
                (lhs, rhs)
            };
            // K = B_R, K* = B_{1/R}
            let ov = overlap(s, k2, kids.clone(), |v| norm(v) * rho);
            if ov <= o.overlap_limit {
                worst = worst.max(ov);
                let (l, r) = ratio(&ball_pts);
                if l > 0.0 {
                    vals.push(if r > 0.0 { l / r } else { f64::INFINITY });
                }
            } else {
                skipped += 1;
            }
            // K = translates of Γ(σ)* for σ ⊂ γ at level k2
            let mut rng = seeded(o.seed, 3 + k2 as u64, k, i);
            for _ in 0..o.translates {
                let sigma = rng.gen_range(kids.clone());
                let bx = s.piece_box(k2, sigma);
                let m = bx.t_mat.inverse().expect("invertible");
                let ov = overlap(s, k2, kids.clone(), |v| {
                    bx.lin
                        .solve(v)
                        .expect("invertible")
                        .iter()
                        .map(|e| e.abs())
                        .sum::<f64>()
                        * 0.5
                });
                if ov > o.overlap_limit {
                    skipped += 1;
                    continue;
                }
                worst = worst.max(ov);
                let y = s.hot_point(k, i, &mut rng);
                let pts: Vec<Vec<f64>> = grid.iter().map(|z| offset(&y, &m, z, 1.0)).collect();
                let (l, r) = ratio(&pts);
                if l <= 0.0 {
                    skipped += 1;
                    continue;
                }
                vals.push(if r > 0.0 { l / r } else { f64::INFINITY });
            }
            (vals, skipped, worst)
        })
        .collect();
    let skipped = out.iter().map(|o| o.1).sum();
    let worst = out.iter().map(|o| o.2).max().unwrap_or(0);
    let vals: Vec<f64> = out.into_iter().flat_map(|o| o.0).collect();
    (AxiomResult::new(&vals, skipped, o.limit), worst)
}

/// Checks the three axioms on sampled points and bodies; the constants certify only this structure.
pub fn axiom_check(s: &AxiomaticStructure, o: &AxiomOptions) -> AxiomReport {
    let (d2, max_overlap) = da2(s, o);
    AxiomReport {
        n: s.n(),
        radius: s.radius,
        levels: s.levels.clone(),
        packet_realizable: s.packet_realizable,
        da0: da0(s, o),
        da1: da1(s, o),
        da2: d2,
        max_overlap,
    }
}
