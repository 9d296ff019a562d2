use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::weights::hull::hull_volume;
use crate::weights::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verification {
    /// Minimum over every μ-subset.
    Exhaustive,
    /// Minimum over the given number of random μ-subsets.
    Sampled(usize),
    None,
}

/// N points in B_R with pairwise distances ≥ 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub mu: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub seed: u64,
    pub points: Vec<Vec<i64>>,
    /// Exhaustive minimum μ-subset hull volume.
    pub certified_volume: Option<f64>,
    /// Sampled minimum and the number of subsets drawn.
    pub sampled_volume: Option<f64>,
    pub samples: usize,
    /// Minimum volume divided by (μ/N)^{(μ−1)/(μ−n)} Rⁿ.
    pub constant: Option<f64>,
}

impl PointConfiguration {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn as_f64(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.iter().map(|&v| v as f64).collect())
            .collect()
    }
}

/// (μ/N)^{(μ−1)/(μ−n)} Rⁿ.
pub fn volume_scale(n: usize, big_n: usize, mu: usize, r: f64) -> f64 {
    (mu as f64 / big_n as f64).powf((mu as f64 - 1.0) / (mu as f64 - n as f64)) * r.powi(n as i32)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Visits every k-subset of 0..n in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn subset_volume(pts: &[Vec<f64>], sub: &[usize]) -> f64 {
    let s: Vec<Vec<f64>> = sub.iter().map(|&i| pts[i].clone()).collect();
    hull_volume(&s)
}

/// Minimum μ-subset hull volume and a minimising subset.
pub fn exhaustive_min(pts: &[Vec<f64>], mu: usize) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, vec![]);
    for_each_subset(pts.len(), mu, |s| {
        let v = subset_volume(pts, s);
        if v < best.0 {
            best = (v, s.to_vec());
        }
    });
    best
}

pub fn sampled_min(
    pts: &[Vec<f64>],
    mu: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, vec![]);
    for _ in 0..samples {
        let mut s = sample(rng, pts.len(), mu).into_vec();
        s.sort_unstable();
        let v = subset_volume(pts, &s);
        if v < best.0 {
            best = (v, s);
        }
    }
    best
}

struct Packer {
    n: usize,
    r: f64,
    taken: HashSet<Vec<i64>>,
}

impl Packer {
    fn free(&self, p: &[i64]) -> bool {
        // distance < 2 between lattice points means every coordinate differs by at most 1
        let mut d = vec![-1i64; self.n];
        loop {
            let q: Vec<i64> = p.iter().zip(&d).map(|(a, b)| a + b).collect();
            if self.taken.contains(&q) {
                let dist2: i64 = d.iter().map(|v| v * v).sum();
                if dist2 < 4 {
                    return false;
                }
            }
            let mut k = 0;
            loop {
                if k == self.n {
                    return true;
                }
                d[k] += 1;
                if d[k] <= 1 {
                    break;
                }
                d[k] = -1;
                k += 1;
            }
        }
    }

    fn draw(&mut self, rng: &mut impl Rng, attempts: usize) -> Option<Vec<i64>> {
        let h = self.r.floor() as i64;
        for _ in 0..attempts {
            let p: Vec<i64> = (0..self.n).map(|_| rng.gen_range(-h..=h)).collect();
            let q: f64 = p.iter().map(|&v| (v * v) as f64).sum();
            if q <= self.r * self.r && self.free(&p) {
                self.taken.insert(p.clone());
                return Some(p);
            }
        }
        None
    }
}

/// Random well-separated points in B_R, improved by re-drawing points of the worst μ-subset.
pub fn carbery_points(
    n: usize,
    big_n: usize,
    mu: usize,
    r: f64,
    seed: u64,
    verify: Verification,
) -> Result<PointConfiguration> {
    if mu < n + 2 || big_n < mu {
        return Err(LabError::InvalidInstance(format!(
            "need N ≥ μ ≥ n + 2, got N = {big_n}, μ = {mu}, n = {n}"
        )));
    }
    // disjoint unit balls inside B_{R+1}
    let capacity = (r + 1.0).powi(n as i32);
    if big_n as f64 > capacity {
        return Err(LabError::PackingError(format!(
            "{big_n} disjoint unit balls do not fit in B_{r}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packer = Packer {
        n,
        r,
        taken: HashSet::with_capacity(big_n),
    };
    let mut points = Vec::with_capacity(big_n);
    for _ in 0..big_n {
        let p = packer.draw(&mut rng, 10_000).ok_or_else(|| {
            LabError::PackingError(format!("placed {} of {big_n} points", points.len()))
        })?;
        points.push(p);
    }
    let exhaustive_ok = binomial(big_n, mu) <= 200_000;
    let rounds = if exhaustive_ok { 60 } else { 20 };
    let improve_samples = 2000;
    let worst = |pts: &[Vec<i64>], rng: &mut ChaCha8Rng| {
        let f: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().map(|&v| v as f64).collect())
            .collect();
        if exhaustive_ok {
            exhaustive_min(&f, mu)
        } else {
            sampled_min(&f, mu, improve_samples, rng)
        }
    };
    let mut current = worst(&points, &mut rng);
    let mut stale = 0;
    for _ in 0..rounds {
        let mut improved = false;
        for &i in &current.1.clone() {
            let old = points[i].clone();
            packer.taken.remove(&old);
            let Some(p) = packer.draw(&mut rng, 1000) else {
                packer.taken.insert(old);
                continue;
            };
            points[i] = p.clone();
            let cand = worst(&points, &mut rng);
            if cand.0 > current.0 {
                current = cand;
                improved = true;
                break;
            }
            packer.taken.remove(&p);
            packer.taken.insert(old.clone());
            points[i] = old;
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= 3 && current.0 > 0.0 {
                break;
            }
        }
    }
    let mut cfg = PointConfiguration {
        n,
        big_n,
        mu,
        radius: r,
        seed,
        points,
        certified_volume: None,
        sampled_volume: None,
        samples: 0,
        constant: None,
    };
    let f = cfg.as_f64();
    let scale = volume_scale(n, big_n, mu, r);
    match verify {
        Verification::Exhaustive => {
            let (v, _) = exhaustive_min(&f, mu);
            cfg.certified_volume = Some(v);
            cfg.samples = binomial(big_n, mu) as usize;
            cfg.constant = Some(v / scale);
        }
        Verification::Sampled(k) => {
            let (v, _) = sampled_min(&f, mu, k, &mut rng);
            cfg.sampled_volume = Some(v);
            cfg.samples = k;
            cfg.constant = Some(v / scale);
        }
        Verification::None => {}
    }
    Ok(cfg)
}

/// Indicator of the unit cells at the configuration points.
pub fn multibush_weight(config: &PointConfiguration) -> Weight {
    Weight::indicator(config.n, config.points.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration_counts() {
        let mut c = 0;
        for_each_subset(7, 3, |_| c += 1);
        assert_eq!(c as u128, binomial(7, 3));
        assert_eq!(binomial(20, 6), 38760);
    }

    #[test]
    fn separation_and_containment() {
        let cfg = carbery_points(2, 40, 4, 20.0, 3, Verification::Sampled(100)).unwrap();
        for (i, p) in cfg.points.iter().enumerate() {
            assert!(p.iter().map(|&v| (v * v) as f64).sum::<f64>() <= 400.0);
            for q in &cfg.points[i + 1..] {
                assert!(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<i64>() >= 4);
            }
        }
    }

    #[test]
    fn minimal_configuration_has_positive_volume() {
        let cfg = carbery_points(2, 4, 4, 16.0, 5, Verification::Exhaustive).unwrap();
        assert!(cfg.certified_volume.unwrap() > 0.0);
    }

    #[test]
    fn infeasible_packing_is_reported() {
        assert!(matches!(
            carbery_points(2, 500, 4, 5.0, 1, Verification::None),
            Err(LabError::PackingError(_))
        ));
        assert!(matches!(
            carbery_points(2, 3, 4, 5.0, 1, Verification::None),
            Err(LabError::InvalidInstance(_))
        ));
    }
}
