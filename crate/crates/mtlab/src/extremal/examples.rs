//! Single-scale sharpness examples: bump weight, bush, single packet, arc sums.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extension::{ball_energy, CurveDensity};
use crate::geometry::{
    ball, curvature_boxes, lattice_points, CurveSpec, GeomFamily, Plank, Region, Scale,
};
use crate::lab::corpus::{bump_weight, random_packet_field, region_indicator, unimodular};
use crate::lab::fit::{log2_fit, LineFit};
use crate::lab::instance::{
    lhs, ExtensionSource, IneqId, InequalityInstance, PacketField, PacketSource, Params, Source,
};
use crate::wavepacket::WavePacketCoeff;
use crate::weights::{sup_mass, Weight};

/// cor31a with w = Φ₁ on B_R and a random packet field.
pub fn bump_weight_instance(n: usize, r: f64, seed: u64) -> Result<InequalityInstance> {
    let curve = CurveSpec::<f64>::moment(n);
    let rr = Scale::new(r, n)?.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ rr.to_bits());
    let field = random_packet_field(&curve, rr, &mut rng)?;
    let w = bump_weight(n, rr)?;
    InequalityInstance::new(
        IneqId::Cor31a,
        &curve,
        rr,
        Params::default(),
        Source::Packets(PacketSource::new(field)),
        w,
    )
}

/// One packet per box at tile 0 with coefficient 1, so f̂ ≥ 0.
pub fn bush_field(n: usize, r: f64) -> Result<PacketField> {
    let curve = CurveSpec::<f64>::moment(n);
    let sleeve = curvature_boxes::<f64>(&curve, r)?;
    let packets = (0..sleeve.boxes.len())
        .map(|t| WavePacketCoeff::new(t, vec![0; n], Complex64::new(1.0, 0.0)))
        .collect();
    PacketField::new(&curve, sleeve.scale.radius, packets)
}

/// cor31a with the bush and w = 1 on the lattice points of B(0, 1).
pub fn bush_instance(n: usize, r: f64) -> Result<InequalityInstance> {
    let field = bush_field(n, r)?;
    let curve = field.curve.clone();
    let rr = field.scale.radius;
    let w = Weight::indicator(n, lattice_points(&ball(n, 1.0), None));
    InequalityInstance::new(
        IneqId::Cor31a,
        &curve,
        rr,
        Params::default(),
        Source::Packets(PacketSource::orthogonal(field)),
        w,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BushReport {
    /// f(0), real and positive for the bush.
    pub value_at_origin: f64,
    /// ∫|f|² over ℝⁿ.
    pub energy: f64,
    /// #θ · |det T_θ|, the size R^{1/n} R^{-(n+1)/2} up to dyadic rounding.
    pub prediction: f64,
}

pub fn bush_report(field: &PacketField) -> BushReport {
    let n = field.n();
    let value_at_origin = field.value(&vec![0.0; n]).re;
    let energy = field.packet_norms_sq().iter().sum();
    let prediction = field
        .packets
        .iter()
        .map(|c| field.boxes[c.theta_index].det_t.abs())
        .sum();
    BushReport {
        value_at_origin,
        energy,
        prediction,
    }
}

/// The packet at the middle box and tile 0, and the indicator of its plank.
pub fn single_packet(n: usize, r: f64) -> Result<(PacketField, Weight)> {
    let curve = CurveSpec::<f64>::moment(n);
    let sleeve = curvature_boxes::<f64>(&curve, r)?;
    let mid = sleeve.boxes.len() / 2;
    let plank = Plank::new(&sleeve.boxes[mid], vec![0; n]);
    let pts = lattice_points(&Region::Slabs(plank.region()), None);
    let field = PacketField::new(
        &curve,
        sleeve.scale.radius,
        vec![WavePacketCoeff::new(
            mid,
            vec![0; n],
            Complex64::new(1.0, 0.0),
        )],
    )?;
    Ok((field, Weight::indicator(n, pts)))
}

/// cor35 with f = f_{T₀} and w = 1_{T₀}.
pub fn single_packet_instance(n: usize, r: f64) -> Result<InequalityInstance> {
    let (field, w) = single_packet(n, r)?;
    let curve = field.curve.clone();
    let rr = field.scale.radius;
    InequalityInstance::new(
        IneqId::Cor35,
        &curve,
        rr,
        Params::default(),
        Source::Packets(PacketSource::orthogonal(field)),
        w,
    )
}

/// One scale of a sharpness sweep: lhs / (sup_X w(X) ‖input‖²) with the family of the instance and r = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessPoint {
    #[serde(rename = "R")]
    pub radius: f64,
    pub lhs: f64,
    pub sup_family: f64,
    pub input_norm_sq: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSweep {
    pub id: IneqId,
    pub n: usize,
    pub points: Vec<SharpnessPoint>,
    /// Slope of log₂(normalized) against log₂ R: the exponent a this family of examples forces.
    pub fit: LineFit,
}

pub fn sharpness_point(inst: &InequalityInstance) -> Result<SharpnessPoint> {
    let l = lhs(inst)?;
    let fam = GeomFamily::new(inst.id.family(), &inst.curve, inst.radius())?;
    let s = sup_mass(&inst.weight, &fam, 1.0).value;
    let norm = inst.input_norm_sq();
    let normalized = if l == 0.0 { 0.0 } else { l / (s * norm) };
    Ok(SharpnessPoint {
        radius: inst.radius(),
        lhs: l,
        sup_family: s,
        input_norm_sq: norm,
        normalized,
    })
}

pub fn sharpness_sweep(
    build: impl Fn(f64) -> Result<InequalityInstance>,
    radii: &[f64],
) -> Result<SharpnessSweep> {
    let insts: Vec<InequalityInstance> = radii.iter().map(|&r| build(r)).collect::<Result<_>>()?;
    let first = insts
        .first()
        .ok_or_else(|| LabError::ConfigError("empty scale list".into()))?;
    let (id, n) = (first.id, first.n());
    let points: Vec<SharpnessPoint> = insts.iter().map(sharpness_point).collect::<Result<_>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.radius).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.normalized).collect();
    let fit = log2_fit(&xs, &ys)?;
    Ok(SharpnessSweep { id, n, points, fit })
}

/// Parameter length of the arc starting at s with arclength 1/R.
fn arc_length_param(curve: &CurveSpec<f64>, s: f64, r: f64) -> f64 {
    const NODES: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const WEIGHTS: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let length = |l: f64| {
        NODES
            .iter()
            .zip(&WEIGHTS)
            .map(|(t, w)| 0.5 * l * w * curve.speed(s + 0.5 * l * (1.0 + t)))
            .sum::<f64>()
    };
    let target = 1.0 / r;
    let mut l = target / curve.speed(s);
    for _ in 0..20 {
        let step = (length(l) - target) / curve.speed(s + l);
        l -= step;
        if step.abs() < 1e-15 * l {
            break;
        }
    }
    l
}

/// g = Σ_v a_v 1_{S_v} with S_v disjoint arcs of arclength 1/R, arc v starting at a + v(b − a)/#coeffs.
pub fn arc_sum_density(
    curve: &CurveSpec<f64>,
    r: f64,
    coeffs: &[Complex64],
) -> Result<CurveDensity> {
    if coeffs.is_empty() {
        return Err(LabError::ConfigError("no arcs requested".into()));
    }
    let (a, b) = curve.interval;
    let slot = (b - a) / coeffs.len() as f64;
    let mut arcs = Vec::with_capacity(coeffs.len());
    for (v, &c) in coeffs.iter().enumerate() {
        let s = a + v as f64 * slot;
        let l = arc_length_param(curve, s, r);
        if l > slot {
            return Err(LabError::ConfigError(format!(
                "{} arcs of length 1/R = {} overlap on the curve",
                coeffs.len(),
                1.0 / r
            )));
        }
        arcs.push((s, s + l, c));
    }
    Ok(CurveDensity::on_arcs(curve, r, &arcs, |_| {
        Complex64::new(1.0, 0.0)
    }))
}

/// thm16 with the arc sum and w = 1 on the lattice points of B_R.
pub fn arc_sum_instance(n: usize, r: f64, coeffs: &[Complex64]) -> Result<InequalityInstance> {
    let curve = CurveSpec::<f64>::moment(n);
    let rr = Scale::new(r, n)?.radius;
    let g = arc_sum_density(&curve, rr, coeffs)?;
    let w = region_indicator(&ball(n, rr), rr);
    InequalityInstance::new(
        IneqId::Thm16,
        &curve,
        rr,
        Params::default(),
        Source::Extension(ExtensionSource::new(g)),
        w,
    )
}

/// Seeded unimodular coefficients for R/4 arcs.
pub fn arc_coefficients(r: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r.to_bits());
    let count = (r / 4.0).max(1.0) as usize;
    (0..count).map(|_| unimodular(&mut rng)).collect()
}

/// ∫_{B_R} |Eg|² / Σ|a_v|² for an arc sum.
pub fn arc_sum_energy(n: usize, r: f64, coeffs: &[Complex64]) -> Result<f64> {
    let curve = CurveSpec::<f64>::moment(n);
    let g = arc_sum_density(&curve, r, coeffs)?;
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(ball_energy(&g, r)? / total)
}
