use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{incidence_count_mode, IncidenceMode, Plank};
use crate::lab::instance::PacketField;
use crate::wavepacket::{packet_lp_norm, Field};

/// One incidence stratum: the cubes whose count falls in (M/2, M].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Largest count among the cubes of the stratum (at least 1).
    pub m: usize,
    pub cubes: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub m: usize,
    pub strata: Vec<Stratum>,
}

/// Cubes of side R^{1/n} tiling [−R, R]ⁿ that meet B_R, as (centre, side).
pub fn cube_cover(n: usize, r: f64) -> (Vec<Vec<f64>>, f64) {
    let side = r.powf(1.0 / n as f64);
    let per = (r / side).ceil() as i64;
    let count = (2 * per) as usize;
    let reach = r + 0.5 * side * (n as f64).sqrt();
    let mut out = Vec::new();
    for c in 0..count.pow(n as u32) {
        let mut c = c;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let i = (c % count) as i64 - per;
                c /= count;
                (i as f64 + 0.5) * side
            })
            .collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= reach * reach {
            out.push(x);
        }
    }
    (out, side)
}

fn cube_points(center: &[f64], side: f64) -> Vec<Vec<f64>> {
    let n = center.len();
    let lo: Vec<i64> = center
        .iter()
        .map(|c| (c - 0.5 * side).ceil() as i64)
        .collect();
    let hi: Vec<i64> = center
        .iter()
        .map(|c| (c + 0.5 * side).ceil() as i64 - 1)
        .collect();
    let dims: Vec<usize> = (0..n)
        .map(|a| (hi[a] - lo[a] + 1).max(0) as usize)
        .collect();
    let total: usize = dims.iter().product();
    (0..total)
        .map(|mut c| {
            (0..n)
                .map(|a| {
                    let v = lo[a] + (c % dims[a]) as i64;
                    c /= dims[a];
                    v as f64
                })
                .collect()
        })
        .collect()
}

/// Stratify the R^{1/n}-cubes covering B_R by their incidence with the R^ε-dilated planks and compare
/// ‖Σ f_T‖_{L^p(Y_M)} with R^ε M^{1/2 − 1/p} (Σ_T ‖f_T‖_p^p)^{1/p} on each stratum; the stratum with the largest left side is reported.
pub fn refined_decoupling_check(
    field: &PacketField,
    p: f64,
    epsilon: f64,
    mode: IncidenceMode,
) -> Result<RefinedReport> {
    let n = field.n();
    let pmax = (n * (n + 1)) as f64;
    if !(2.0..=pmax).contains(&p) {
        return Err(LabError::DomainError(format!(
            "p = {p} outside [2, {pmax}]"
        )));
    }
    if field.packets.is_empty() {
        return Ok(RefinedReport {
            lhs: 0.0,
            rhs: 0.0,
            ratio: 0.0,
            m: 0,
            strata: vec![],
        });
    }
    let r = field.scale.radius;
    let planks: Vec<Plank> = field.packets.iter().map(|c| field.plank(c)).collect();
    let dilate = r.powf(epsilon);
    let (cubes, side) = cube_cover(n, r);
    let per_cube: Vec<(usize, f64)> = cubes
        .par_iter()
        .map(|c| {
            let m = incidence_count_mode(c, side, &planks, dilate, mode);
            let s: f64 = cube_points(c, side)
                .iter()
                .map(|x| field.value(x).norm().powf(p))
                .sum();
            (m, s)
        })
        .collect();
    let packet_sum: f64 = field
        .packets
        .iter()
        .map(|c| packet_lp_norm(&field.boxes[c.theta_index], c.a(), p).powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    let mut strata: Vec<(u32, usize, usize, f64)> = Vec::new();
    for &(m, s) in &per_cube {
        let k = if m <= 1 {
            0
        } else {
            usize::BITS - (m - 1).leading_zeros()
        };
        match strata.iter_mut().find(|x| x.0 == k) {
            Some(e) => {
                e.1 = e.1.max(m.max(1));
                e.2 += 1;
                e.3 += s;
            }
            None => strata.push((k, m.max(1), 1, s)),
        }
    }
    strata.sort_by_key(|x| x.0);
    let strata: Vec<Stratum> = strata
        .into_iter()
        .map(|(_, m, cubes, s)| Stratum {
            m,
            cubes,
            lhs: s.powf(1.0 / p),
            rhs: dilate * (m as f64).powf(0.5 - 1.0 / p) * packet_sum,
        })
        .collect();
    let best = strata
        .iter()
        .max_by(|a, b| a.lhs.total_cmp(&b.lhs))
        .expect("at least one cube");
    let ratio = if best.lhs == 0.0 {
        0.0
    } else {
        best.lhs / best.rhs
    };
    Ok(RefinedReport {
        lhs: best.lhs,
        rhs: best.rhs,
        ratio,
        m: best.m,
        strata: strata.clone(),
    })
}

fn check_grids(fields: &[Field]) -> Result<()> {
    if fields.windows(2).any(|w| w[0].grid != w[1].grid) {
        return Err(LabError::DomainError(
            "pieces sampled on different grids".into(),
        ));
    }
    Ok(())
}

fn sum_of(fields: &[Field]) -> Result<Field> {
    let mut f = Field::zeros(fields[0].grid.clone());
    for g in fields {
        f.add_assign(g)?;
    }
    Ok(f)
}

/// ‖Σ_θ f_θ‖_p / (Σ_θ ‖f_θ‖_p²)^{1/2} on a common grid.
pub fn bdg_decoupling_check(fields: &[Field], p: f64) -> Result<f64> {
    if fields.is_empty() {
        return Ok(0.0);
    }
    check_grids(fields)?;
    let num = sum_of(fields)?.lp_norm(p);
    let den = fields
        .iter()
        .map(|f| f.lp_norm(p).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(if num == 0.0 { 0.0 } else { num / den })
}

/// ‖f‖_p^p / (‖(Σ_θ|f_θ|²)^{1/2}‖_∞^{p−2} ‖f‖₂²) with f = Σ_θ f_θ.
pub fn square_function_monitor(fields: &[Field], p: f64) -> Result<f64> {
    if fields.is_empty() {
        return Ok(0.0);
    }
    check_grids(fields)?;
    let f = sum_of(fields)?;
    let sq = (0..f.data.len())
        .map(|i| fields.iter().map(|g| g.data[i].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt();
    let num = f.lp_norm(p).powf(p);
    if num == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (sq.powf(p - 2.0) * f.norm_sq()))
}
