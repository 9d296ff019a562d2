//! Multi-bush witnesses: Carbery weights, tubes chosen greedily through unit balls, phases aligned ball by ball.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extremal::axioms::AxiomaticStructure;
use crate::geometry::{AnisotropicBox, CurveSpec, FamilyKind, GeomFamily, Scale, SlabSet};
use crate::lab::exponents::{to_f64, ExponentTable};
use crate::linalg::{dot, norm, Mat};
use crate::weights::{carbery_points, multibush_weight, sup_mass, Verification, Weight};

/// Radius of the balls B_j; they have unit diameter.
pub const BALL_RADIUS: f64 = 0.5;
const MAX_DIM: usize = 4;
const KEY_BITS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    L,
    P,
    S,
}

impl Variant {
    /// log_R ℓ before dyadic rounding.
    pub fn scale_exponent(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Variant::L => 1.0 / nf - 2.0 / (nf * nf * (nf + 1.0)),
            Variant::P => 2.0 / (nf * (nf + 1.0)),
            Variant::S if n == 2 => 1.0 / 3.0,
            Variant::S => 1.0 / nf,
        }
    }

    /// log_R N.
    pub fn count_exponent(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Variant::L => (nf - 1.0) / 2.0 + 1.0 / nf,
            Variant::P => nf - 1.0,
            Variant::S => 1.0,
        }
    }

    pub fn family(self) -> FamilyKind {
        match self {
            Variant::L => FamilyKind::Slab,
            Variant::P => FamilyKind::Tube,
            Variant::S => FamilyKind::Hyperplane,
        }
    }

    /// The exponent a of the lower bound R^a (log R)^{-3} the witness certifies.
    pub fn target_exponent(self, n: usize) -> f64 {
        let t = ExponentTable::new(n);
        match self {
            Variant::L => to_f64(t.sharp_l_derived),
            Variant::P => to_f64(t.sharp_p),
            Variant::S => to_f64(t.sharp_s),
        }
    }

    /// The printed form of the exponent where it differs from the derived one.
    pub fn stated_exponent(self, n: usize) -> Option<f64> {
        match self {
            Variant::L => Some(to_f64(ExponentTable::new(n).sharp_l_as_stated)),
            _ => None,
        }
    }

    /// Whether unselected tubes stay in F with coefficient 1.
    pub fn keeps_all_tubes(self) -> bool {
        self != Variant::S
    }

    pub fn min_dim(self) -> usize {
        match self {
            Variant::S => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::L => "L",
            Variant::P => "P",
            Variant::S => "S",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Variant::L),
            "P" | "p" => Ok(Variant::P),
            "S" | "s" => Ok(Variant::S),
            _ => Err(LabError::ConfigError(format!(
                "unknown multibush variant {s:?}"
            ))),
        }
    }
}

/// Dyadic ℓ = 2^{round(e log₂ R)}, halves rounded up.
pub fn dyadic_ell(variant: Variant, n: usize, r: f64) -> f64 {
    let e = variant.scale_exponent(n) * r.log2();
    2f64.powf((e + 0.5 + 1e-9).floor())
}

fn pack(tau: usize, h: &[i64]) -> u128 {
    let bias = 1i64 << (KEY_BITS - 1);
    let mask = (1u128 << KEY_BITS) - 1;
    h.iter().fold(tau as u128, |k, &v| {
        (k << KEY_BITS) | ((v + bias) as u128 & mask)
    })
}

/// Tubes 𝕋_τ = {x : |T_τ x − h/2|_∞ ≤ ½} over τ ⊂ [a, b] of length 1/ℓ, h ∈ ℤⁿ.
///
/// Each direction carries 2ⁿ half-shifted tilings. The bumps φ_h(x) = Π_k cos²(π(y_k − h_k/2)), y = T_τ x,
/// sum to 1 over h, and F_τ = e^{2πi Γ(ξ_τ)·x} ℓ^{-1/2} Σ_h c_h φ_h.
#[derive(Clone, Debug)]
pub struct TubeSystem {
    pub n: usize,
    pub radius: f64,
    pub ell: f64,
    pub boxes: Vec<AnisotropicBox<f64>>,
    /// Unselected tubes meeting B_R get coefficient 1.
    pub background: bool,
    coeffs: HashMap<u128, Complex64>,
    selected: Vec<Vec<Vec<i64>>>,
    inv: Vec<Mat<f64>>,
    row_norms: Vec<Vec<f64>>,
    half_diam: Vec<f64>,
    amp: f64,
}

impl TubeSystem {
    pub fn new(curve: &CurveSpec<f64>, radius: f64, ell: f64, background: bool) -> Result<Self> {
        let n = curve.n;
        if !(1..=MAX_DIM).contains(&n) {
            return Err(LabError::ConfigError(format!(
                "tube systems support n ≤ {MAX_DIM}, got {n}"
            )));
        }
        let (a, b) = curve.interval;
        let delta = 1.0 / ell;
        let count = ((b - a) * ell - 1e-9).ceil().max(1.0) as usize;
        let boxes: Vec<AnisotropicBox<f64>> = (0..count)
            .map(|i| AnisotropicBox::new(curve, i, a + (i as f64 + 0.5) * delta, delta))
            .collect();
        let inv: Vec<Mat<f64>> = boxes
            .iter()
            .map(|b| {
                b.t_mat
                    .inverse()
                    .ok_or_else(|| LabError::DomainError("degenerate tube frame".into()))
            })
            .collect::<Result<_>>()?;
        let row_norms = boxes
            .iter()
            .map(|b| (0..n).map(|k| norm(b.t_mat.row(k))).collect())
            .collect();
        let half_diam = inv
            .iter()
            .map(|m| {
                (0..1usize << n)
                    .map(|s| {
                        let u: Vec<f64> = (0..n)
                            .map(|k| if s >> k & 1 == 1 { 0.5 } else { -0.5 })
                            .collect();
                        norm(&m.mul_vec(&u))
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(TubeSystem {
            n,
            radius,
            ell,
            boxes,
            background,
            coeffs: HashMap::new(),
            selected: vec![Vec::new(); count],
            inv,
            row_norms,
            half_diam,
            amp: ell.powf(-0.5),
        })
    }

    pub fn directions(&self) -> usize {
        self.boxes.len()
    }

    pub fn tube_volume(&self, tau: usize) -> f64 {
        self.boxes[tau].plank_volume()
    }

    pub fn center(&self, tau: usize, h: &[i64]) -> Vec<f64> {
        let half: Vec<f64> = h.iter().map(|&v| 0.5 * v as f64).collect();
        self.inv[tau].mul_vec(&half)
    }

    /// The tile of (τ, h) as a slab set.
    pub fn tile(&self, tau: usize, h: &[i64]) -> SlabSet {
        let rows = (0..self.n)
            .map(|k| self.boxes[tau].t_mat.row(k).to_vec())
            .collect();
        let lo = h.iter().map(|&v| 0.5 * v as f64 - 0.5).collect();
        let hi = h.iter().map(|&v| 0.5 * v as f64 + 0.5).collect();
        SlabSet { rows, lo, hi }
    }

    /// Radius of a ball outside of which every piece vanishes.
    pub fn support_radius(&self) -> f64 {
        self.radius + 2.0 * self.half_diam.iter().cloned().fold(0.0, f64::max)
    }

    pub fn selected(&self, tau: usize) -> &[Vec<i64>] {
        &self.selected[tau]
    }

    pub fn coefficient(&self, tau: usize, h: &[i64]) -> Complex64 {
        match self.coeffs.get(&pack(tau, h)) {
            Some(c) => *c,
            None if self.background
                && norm(&self.center(tau, h)) <= self.radius + self.half_diam[tau] =>
            {
                Complex64::new(1.0, 0.0)
            }
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set_coefficient(&mut self, tau: usize, h: &[i64], c: Complex64) {
        if self.coeffs.insert(pack(tau, h), c).is_none() {
            self.selected[tau].push(h.to_vec());
        }
    }

    /// Calls f(h, φ_h(x)) for each tube of direction τ whose bump is positive at x.
    fn for_each_tube_at(&self, tau: usize, x: &[f64], mut f: impl FnMut(&[i64], f64)) {
        let n = self.n;
        let y = self.boxes[tau].dual(x);
        let mut base = [0i64; MAX_DIM];
        for k in 0..n {
            base[k] = (2.0 * y[k]).floor() as i64;
        }
        let mut h = [0i64; MAX_DIM];
        'mask: for s in 0..1usize << n {
            let mut w = 1.0;
            for k in 0..n {
                h[k] = base[k] + (s >> k & 1) as i64;
                let u = y[k] - 0.5 * h[k] as f64;
                if u.abs() >= 0.5 {
                    continue 'mask;
                }
                let c = (PI * u).cos();
                w *= c * c;
            }
            if w > 0.0 {
                f(&h[..n], w);
            }
        }
    }

    /// φ_h(x) for one tube.
    pub fn bump(&self, tau: usize, h: &[i64], x: &[f64]) -> f64 {
        let y = self.boxes[tau].dual(x);
        y.iter()
            .zip(h)
            .map(|(v, &k)| {
                let u = v - 0.5 * k as f64;
                if u.abs() >= 0.5 {
                    0.0
                } else {
                    (PI * u).cos().powi(2)
                }
            })
            .product()
    }

    fn phase(&self, tau: usize, x: &[f64]) -> Complex64 {
        Complex64::from_polar(self.amp, 2.0 * PI * dot(&self.boxes[tau].center, x))
    }

    /// F_τ(x).
    pub fn piece(&self, tau: usize, x: &[f64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        self.for_each_tube_at(tau, x, |h, w| s += self.coefficient(tau, h) * w);
        if s == Complex64::new(0.0, 0.0) {
            return s;
        }
        s * self.phase(tau, x)
    }

    /// F(x) = Σ_τ F_τ(x).
    pub fn value(&self, x: &[f64]) -> Complex64 {
        (0..self.directions()).map(|t| self.piece(t, x)).sum()
    }

    /// Number of selected tiles of any direction containing x.
    fn coverage(&self, x: &[f64]) -> usize {
        let mut c = 0;
        for tau in 0..self.directions() {
            let y = self.boxes[tau].dual(x);
            let mut base = [0i64; MAX_DIM];
            for k in 0..self.n {
                base[k] = (2.0 * y[k]).floor() as i64;
            }
            for s in 0..1usize << self.n {
                let h: Vec<i64> = (0..self.n).map(|k| base[k] + (s >> k & 1) as i64).collect();
                if self.coeffs.contains_key(&pack(tau, &h))
                    && (0..self.n).all(|k| (y[k] - 0.5 * h[k] as f64).abs() <= 0.5)
                {
                    c += 1;
                }
            }
        }
        c
    }

    pub fn contains_ball(&self, tau: usize, h: &[i64], c: &[f64], rho: f64) -> bool {
        let y = self.boxes[tau].dual(c);
        (0..self.n).all(|k| (y[k] - 0.5 * h[k] as f64).abs() + rho * self.row_norms[tau][k] <= 0.5)
    }

    /// Every h whose tile of direction τ does not miss B(c, ρ).
    pub fn touching(&self, tau: usize, c: &[f64], rho: f64) -> Vec<Vec<i64>> {
        let y = self.boxes[tau].dual(c);
        let ranges: Vec<(i64, i64)> = (0..self.n)
            .map(|k| {
                let s = 0.5 + rho * self.row_norms[tau][k];
                (
                    (2.0 * (y[k] - s)).floor() as i64 + 1,
                    (2.0 * (y[k] + s)).ceil() as i64 - 1,
                )
            })
            .collect();
        let mut out = vec![Vec::new()];
        for &(lo, hi) in &ranges {
            out = out
                .into_iter()
                .flat_map(|p: Vec<i64>| (lo..=hi).map(move |v| [p.clone(), vec![v]].concat()))
                .collect();
        }
        out.retain(|h| !self.tile(tau, h).misses_ball(c, rho));
        out
    }
}

/// Balls accepted by the greedy pass with their tubes, in acceptance order.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    pub balls: Vec<Vec<i64>>,
    pub tubes: Vec<Vec<(usize, Vec<i64>)>>,
}

fn as_f64(p: &[i64]) -> Vec<f64> {
    p.iter().map(|&v| v as f64).collect()
}

/// One pass over the points in the given order. A ball is accepted when at least half the directions have a
/// tube containing it that is not blocked; every tile an accepted ball touches is then blocked.
pub fn greedy_select(system: &TubeSystem, points: &[Vec<i64>], order: &[usize]) -> Selection {
    let dirs = system.directions();
    let need = dirs.div_ceil(2);
    let mut blocked: HashSet<u128> = HashSet::new();
    let mut sel = Selection::default();
    for &i in order {
        let c = as_f64(&points[i]);
        let mut chosen = Vec::new();
        for tau in 0..dirs {
            let mut best: Option<(Vec<i64>, f64)> = None;
            system.for_each_tube_at(tau, &c, |h, w| {
                if best.as_ref().is_some_and(|b| b.1 >= w)
                    || blocked.contains(&pack(tau, h))
                    || !system.contains_ball(tau, h, &c, BALL_RADIUS)
                {
                    return;
                }
                best = Some((h.to_vec(), w));
            });
            if let Some((h, _)) = best {
                chosen.push((tau, h));
            }
        }
        if chosen.len() >= need {
            for tau in 0..dirs {
                for h in system.touching(tau, &c, BALL_RADIUS) {
                    blocked.insert(pack(tau, &h));
                }
            }
            sel.balls.push(points[i].clone());
            sel.tubes.push(chosen);
        }
    }
    sel
}

/// Assigns unimodular coefficients ball by ball so that each ball's own tubes add in phase with what is already there.
/// Returns |F(x_j)| for every ball.
pub fn align(system: &mut TubeSystem, sel: &Selection, order: &[usize]) -> Vec<f64> {
    for tubes in &sel.tubes {
        for (tau, h) in tubes {
            system.set_coefficient(*tau, h, Complex64::new(0.0, 0.0));
        }
    }
    for &j in order {
        let x = as_f64(&sel.balls[j]);
        let g = system.value(&x);
        for (tau, h) in &sel.tubes[j] {
            let own = system.phase(*tau, &x) * system.bump(*tau, h, &x);
            let alpha = if g.norm() > 1e-14 { g.arg() } else { 0.0 };
            system.set_coefficient(*tau, h, Complex64::from_polar(1.0, alpha - own.arg()));
        }
    }
    sel.balls
        .iter()
        .map(|b| system.value(&as_f64(b)).norm())
        .collect()
}

/// ℓ^{-1/2} Σ_{T ∈ 𝕋_j} φ_T(x_j), the amplitude phase alignment guarantees at the centre of B_j.
pub fn predicted_amplitude(system: &TubeSystem, sel: &Selection, j: usize) -> f64 {
    let x = as_f64(&sel.balls[j]);
    system.amp
        * sel.tubes[j]
            .iter()
            .map(|(tau, h)| system.bump(*tau, h, &x))
            .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeRef {
    pub tau: usize,
    /// Doubled tile index: the tube is centred at T_τ^{-1}(h/2).
    pub h: Vec<i64>,
    pub phase: f64,
}

/// Everything needed to rebuild a witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultibushPlan {
    pub variant: Variant,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub mu: usize,
    pub ell: f64,
    pub balls: Vec<Vec<i64>>,
    pub tubes: Vec<Vec<TubeRef>>,
}

impl MultibushPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::ConfigError(format!("bad plan: {e}")))
    }

    pub fn selection(&self) -> Selection {
        Selection {
            balls: self.balls.clone(),
            tubes: self
                .tubes
                .iter()
                .map(|ts| ts.iter().map(|t| (t.tau, t.h.clone())).collect())
                .collect(),
        }
    }
}

/// Shape parameters of a witness before any randomness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultibushShape {
    pub radius: f64,
    pub ell: f64,
    pub big_n: usize,
    pub mu: usize,
    /// ⌈N/(ln R)²⌉, the least number of balls accepted.
    pub ball_target: usize,
}

pub fn multibush_shape(variant: Variant, n: usize, r: f64) -> Result<MultibushShape> {
    if n < variant.min_dim() || n > MAX_DIM {
        return Err(LabError::ConfigError(format!(
            "variant {variant} needs {} ≤ n ≤ {MAX_DIM}, got {n}",
            variant.min_dim()
        )));
    }
    let radius = Scale::new(r, n)?.radius;
    let ell = dyadic_ell(variant, n, radius);
    if ell < 4.0 {
        return Err(LabError::ConfigError(format!(
            "R = {radius} gives ℓ = {ell} < 4 for variant {variant}"
        )));
    }
    let big_n = radius.powf(variant.count_exponent(n)).round() as usize;
    let ln = radius.ln();
    let mu = (n + 2).max(ln.round() as usize);
    let ball_target = (big_n as f64 / (ln * ln)).ceil() as usize;
    Ok(MultibushShape {
        radius,
        ell,
        big_n,
        mu,
        ball_target,
    })
}

fn shuffled(len: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x6d75_6c74_6962_7573));
    order
}

/// Builds the witness for one variant: the structure F, the weight w and the plan that reproduces them.
pub fn build_multibush(
    variant: Variant,
    n: usize,
    r: f64,
    seed: u64,
) -> Result<(AxiomaticStructure, Weight, MultibushPlan)> {
    let shape = multibush_shape(variant, n, r)?;
    let cfg = carbery_points(
        n,
        shape.big_n,
        shape.mu,
        shape.radius,
        seed,
        Verification::Sampled(2000),
    )?;
    let weight = multibush_weight(&cfg);
    let curve = CurveSpec::<f64>::moment(n);
    let mut system = TubeSystem::new(&curve, shape.radius, shape.ell, variant.keeps_all_tubes())?;
    let sel = greedy_select(&system, &cfg.points, &shuffled(cfg.points.len(), seed));
    if sel.balls.len() < shape.ball_target {
        return Err(LabError::ConstructionError {
            achieved: sel.balls.len(),
            target: shape.ball_target,
        });
    }
    let order: Vec<usize> = (0..sel.balls.len()).collect();
    align(&mut system, &sel, &order);
    let tubes = sel
        .tubes
        .iter()
        .map(|ts| {
            ts.iter()
                .map(|(tau, h)| TubeRef {
                    tau: *tau,
                    h: h.clone(),
                    phase: system.coefficient(*tau, h).arg(),
                })
                .collect()
        })
        .collect();
    let plan = MultibushPlan {
        variant,
        n,
        radius: shape.radius,
        seed,
        big_n: shape.big_n,
        mu: shape.mu,
        ell: shape.ell,
        balls: sel.balls,
        tubes,
    };
    Ok((
        AxiomaticStructure::from_tubes(Arc::new(system), 0.05),
        weight,
        plan,
    ))
}

/// Rebuilds the weight and the structure from a plan without rerunning the selection.
pub fn replay(plan: &MultibushPlan) -> Result<(AxiomaticStructure, Weight)> {
    let shape = multibush_shape(plan.variant, plan.n, plan.radius)?;
    let cfg = carbery_points(
        plan.n,
        shape.big_n,
        shape.mu,
        shape.radius,
        plan.seed,
        Verification::None,
    )?;
    let curve = CurveSpec::<f64>::moment(plan.n);
    let mut system = TubeSystem::new(
        &curve,
        shape.radius,
        plan.ell,
        plan.variant.keeps_all_tubes(),
    )?;
    for ts in &plan.tubes {
        for t in ts {
            if t.tau >= system.directions() || t.h.len() != plan.n {
                return Err(LabError::ConfigError(format!(
                    "plan names tube {} {:?} outside the system",
                    t.tau, t.h
                )));
            }
            system.set_coefficient(t.tau, &t.h, Complex64::from_polar(1.0, t.phase));
        }
    }
    Ok((
        AxiomaticStructure::from_tubes(Arc::new(system), 0.05),
        multibush_weight(&cfg),
    ))
}

/// Monte Carlo estimate of ∫|F|².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl EnergyEstimate {
    /// mean + 3 standard errors.
    pub fn upper(&self) -> f64 {
        self.mean + 3.0 * self.stderr
    }
}

fn ball_volume(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    PI.powf(nf / 2.0) / libm::tgamma(nf / 2.0 + 1.0) * r.powi(n as i32)
}

fn uniform_in_ball(n: usize, r: f64, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if dot(&x, &x) <= r * r {
            return x;
        }
    }
}

/// Uniform sampling of the support ball with background tubes, importance sampling over the selected tiles without.
pub fn energy_estimate(system: &TubeSystem, samples: usize, seed: u64) -> EnergyEstimate {
    const CHUNK: usize = 4096;
    let n = system.n;
    let chunks = samples.div_ceil(CHUNK).max(1);
    let tiles: Vec<(usize, Vec<i64>)> = (0..system.directions())
        .flat_map(|t| system.selected(t).iter().map(move |h| (t, h.clone())))
        .collect();
    let vols: Vec<f64> = tiles.iter().map(|(t, _)| system.tube_volume(*t)).collect();
    let total_vol: f64 = vols.iter().sum();
    let cumulative: Vec<f64> = vols
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    let rho = system.support_radius();
    let ball_vol = ball_volume(n, rho);
    if !system.background && tiles.is_empty() {
        return EnergyEstimate {
            mean: 0.0,
            stderr: 0.0,
            samples: 0,
        };
    }
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..CHUNK {
                let v = if system.background {
                    let x = uniform_in_ball(n, rho, &mut rng);
                    ball_vol * system.value(&x).norm_sqr()
                } else {
                    let u = rng.gen_range(0.0..total_vol);
                    let i = cumulative.partition_point(|&c| c <= u).min(tiles.len() - 1);
                    let (tau, h) = &tiles[i];
                    let y: Vec<f64> = h
                        .iter()
                        .map(|&v| 0.5 * v as f64 + rng.gen_range(-0.5..0.5))
                        .collect();
                    let x = system.inv[*tau].mul_vec(&y);
                    let cov = system.coverage(&x).max(1);
                    total_vol * system.value(&x).norm_sqr() / cov as f64
                };
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let total = (chunks * CHUNK) as f64;
    let s1: f64 = sums.iter().map(|s| s.0).sum();
    let s2: f64 = sums.iter().map(|s| s.1).sum();
    let mean = s1 / total;
    let var = (s2 / total - mean * mean).max(0.0);
    EnergyEstimate {
        mean,
        stderr: (var / total).sqrt(),
        samples: chunks * CHUNK,
    }
}

/// Largest number of weight points in one tube of any direction and parity.
pub fn tube_load(system: &TubeSystem, weight: &Weight) -> usize {
    let mut best = 0;
    for tau in 0..system.directions() {
        let mut counts: HashMap<u128, usize> = HashMap::new();
        for p in &weight.points {
            let x = as_f64(p);
            let y = system.boxes[tau].dual(&x);
            let base: Vec<i64> = y.iter().map(|v| (2.0 * v).floor() as i64).collect();
            for s in 0..1usize << system.n {
                let h: Vec<i64> = (0..system.n)
                    .map(|k| base[k] + (s >> k & 1) as i64)
                    .collect();
                if (0..system.n).all(|k| (y[k] - 0.5 * h[k] as f64).abs() <= 0.5) {
                    *counts.entry(pack(tau, &h)).or_default() += 1;
                }
            }
        }
        best = best.max(counts.values().copied().max().unwrap_or(0));
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultibushReport {
    pub variant: Variant,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub ell: f64,
    pub directions: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub balls: usize,
    /// m (ln R)² / N.
    pub ball_constant: f64,
    /// Every selected tube contains its ball.
    pub containment: bool,
    /// No selected tube touches a ball accepted before its own.
    pub avoidance: bool,
    /// Every selected coefficient has modulus 1.
    pub unimodular: bool,
    /// min_j |F(x_j)| / (ℓ^{-1/2} Σ_{T∈𝕋_j} φ_T(x_j)).
    pub min_alignment: f64,
    /// min_j |F(x_j)| / ℓ^{1/2}.
    pub min_amplitude: f64,
    /// Σ_x w(x) |F(x)|².
    pub weighted_energy: f64,
    /// weighted_energy / (ℓ m).
    pub weighted_energy_constant: f64,
    pub energy: EnergyEstimate,
    pub energy_upper: f64,
    /// ∫|F|² / Rⁿ with background tubes, / R^{(n+3)/2} without.
    pub energy_constant: f64,
    pub sup_family: f64,
    /// sup_family / ln R.
    pub family_constant: f64,
    /// Largest w(T) over the tubes of the system.
    pub tube_load: usize,
    pub certified_ratio: f64,
    pub target_exponent: f64,
    /// certified_ratio (ln R)³ / R^a.
    pub c_prime: f64,
    pub stated_exponent: Option<f64>,
    pub c_prime_stated: Option<f64>,
    /// Variant P: weighted_energy (ln R)² / R^{n−1+2/(n(n+1))}.
    pub tube_bound_constant: Option<f64>,
}

/// Rechecks the construction with exact predicates and estimates the certified lower bound.
pub fn multibush_report(
    structure: &AxiomaticStructure,
    weight: &Weight,
    plan: &MultibushPlan,
    samples: usize,
) -> Result<MultibushReport> {
    let system = structure
        .tubes()
        .ok_or_else(|| LabError::ConfigError("structure is not a tube system".into()))?;
    let n = plan.n;
    let r = plan.radius;
    let ln = r.ln();
    let sel = plan.selection();
    let m = sel.balls.len();

    let containment = sel.tubes.iter().zip(&sel.balls).all(|(ts, b)| {
        ts.iter()
            .all(|(tau, h)| system.tile(*tau, h).contains_ball(&as_f64(b), BALL_RADIUS))
    });
    let mut owner: HashMap<u128, usize> = HashMap::new();
    for (j, ts) in sel.tubes.iter().enumerate() {
        for (tau, h) in ts {
            owner.insert(pack(*tau, h), j);
        }
    }
    let avoidance = (0..m).into_par_iter().all(|i| {
        let c = as_f64(&sel.balls[i]);
        (0..system.directions()).all(|tau| {
            system
                .touching(tau, &c, BALL_RADIUS)
                .iter()
                .all(|h| owner.get(&pack(tau, h)).is_none_or(|&j| j <= i))
        })
    });
    let unimodular = plan
        .tubes
        .iter()
        .flatten()
        .all(|t| (system.coefficient(t.tau, &t.h).norm() - 1.0).abs() < 1e-12);

    let amps: Vec<f64> = sel
        .balls
        .par_iter()
        .map(|b| system.value(&as_f64(b)).norm())
        .collect();
    let min_alignment = (0..m)
        .map(|j| amps[j] / predicted_amplitude(system, &sel, j))
        .fold(f64::INFINITY, f64::min);
    let min_amplitude = amps.iter().cloned().fold(f64::INFINITY, f64::min) / system.ell.sqrt();
    let weighted_energy: f64 = weight
        .points
        .par_iter()
        .zip(&weight.values)
        .map(|(p, v)| v * system.value(&as_f64(p)).norm_sqr())
        .sum();

    let energy = energy_estimate(system, samples, plan.seed);
    let energy_upper = energy.upper();
    let energy_scale = if plan.variant.keeps_all_tubes() {
        r.powi(n as i32)
    } else {
        r.powf((n as f64 + 3.0) / 2.0)
    };
    let fam = GeomFamily::new(plan.variant.family(), &CurveSpec::<f64>::moment(n), r)?;
    let sup_family = sup_mass(weight, &fam, 1.0).value;
    let certified_ratio = weighted_energy / (sup_family * energy_upper);
    let target_exponent = plan.variant.target_exponent(n);
    let stated_exponent = plan.variant.stated_exponent(n);
    Ok(MultibushReport {
        variant: plan.variant,
        n,
        radius: r,
        ell: plan.ell,
        directions: system.directions(),
        big_n: plan.big_n,
        balls: m,
        ball_constant: m as f64 * ln * ln / plan.big_n as f64,
        containment,
        avoidance,
        unimodular,
        min_alignment,
        min_amplitude,
        weighted_energy,
        weighted_energy_constant: weighted_energy / (plan.ell * m as f64),
        energy,
        energy_upper,
        energy_constant: energy.mean / energy_scale,
        sup_family,
        family_constant: sup_family / ln,
        tube_load: tube_load(system, weight),
        certified_ratio,
        target_exponent,
        c_prime: certified_ratio * ln.powi(3) / r.powf(target_exponent),
        stated_exponent,
        c_prime_stated: stated_exponent.map(|a| certified_ratio * ln.powi(3) / r.powf(a)),
        tube_bound_constant: (plan.variant == Variant::P).then(|| {
            let nf = n as f64;
            weighted_energy * ln * ln / r.powf(nf - 1.0 + 2.0 / (nf * (nf + 1.0)))
        }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRobustness {
    /// Balls accepted when the points are scanned in another order.
    pub permuted_balls: usize,
    /// min_j |F(x_j)| / aligned prediction for the rebuilt witness.
    pub permuted_min_alignment: f64,
    /// Median |F(x_j)| of the rebuilt witness over that of the original.
    pub median_ratio: f64,
    /// Same balls and tubes, phases assigned in a shuffled order: min_j |F(x_j)| / aligned prediction.
    pub realigned_min_alignment: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return 0.0;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Rebuilds the witness with the points scanned in an order drawn from `seed`, and separately realigns the original selection in a shuffled order.
pub fn order_robustness(
    structure: &AxiomaticStructure,
    plan: &MultibushPlan,
    seed: u64,
) -> Result<OrderRobustness> {
    let system = structure
        .tubes()
        .ok_or_else(|| LabError::ConfigError("structure is not a tube system".into()))?;
    let sel = plan.selection();
    let before: Vec<f64> = sel
        .balls
        .par_iter()
        .map(|b| system.value(&as_f64(b)).norm())
        .collect();

    let mut fresh = system.clone();
    let after = align(&mut fresh, &sel, &shuffled(sel.balls.len(), seed));
    let realigned_min_alignment = after
        .iter()
        .enumerate()
        .map(|(j, a)| a / predicted_amplitude(&fresh, &sel, j))
        .fold(f64::INFINITY, f64::min);

    let shape = multibush_shape(plan.variant, plan.n, plan.radius)?;
    let cfg = carbery_points(
        plan.n,
        shape.big_n,
        shape.mu,
        shape.radius,
        plan.seed,
        Verification::None,
    )?;
    let curve = CurveSpec::<f64>::moment(plan.n);
    let mut other = TubeSystem::new(
        &curve,
        shape.radius,
        plan.ell,
        plan.variant.keeps_all_tubes(),
    )?;
    let sel2 = greedy_select(
        &other,
        &cfg.points,
        &shuffled(cfg.points.len(), seed.wrapping_add(1)),
    );
    let amps = align(
        &mut other,
        &sel2,
        &(0..sel2.balls.len()).collect::<Vec<_>>(),
    );
    let permuted_min_alignment = amps
        .iter()
        .enumerate()
        .map(|(j, a)| a / predicted_amplitude(&other, &sel2, j))
        .fold(f64::INFINITY, f64::min);
    Ok(OrderRobustness {
        permuted_balls: sel2.balls.len(),
        permuted_min_alignment,
        median_ratio: median(amps) / median(before),
        realigned_min_alignment,
    })
}
