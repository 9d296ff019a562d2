//! Seeded random instances for the inequality monitors.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extension::{phi_one, random_arcs, CurveDensity};
use crate::geometry::{
    ball, curvature_boxes, for_each_lattice_point, plank_index, CurveSpec, GeomFamily, Plank,
    Region,
};
use crate::lab::fit::{log2_fit, LineFit};
use crate::lab::instance::{
    evaluate, ExtensionSource, IneqId, InequalityInstance, PacketField, PacketSource, Params,
    Source,
};
use crate::wavepacket::WavePacketCoeff;
use crate::weights::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// A dozen lattice points with random heights.
    Sparse,
    /// Indicator of one dual plank.
    PlankAligned,
    /// Φ₁ = Φ(·/2R)/Φ(0) on B_R.
    Bump,
    /// Indicator of one member of the inequality's own family.
    FamilyAligned,
    /// About R^{1/2} unit-height points.
    Clustered,
}

impl WeightKind {
    pub const ALL: [WeightKind; 5] = [
        WeightKind::Sparse,
        WeightKind::PlankAligned,
        WeightKind::Bump,
        WeightKind::FamilyAligned,
        WeightKind::Clustered,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n: usize,
    pub radii: Vec<f64>,
    /// Inputs per scale; each is paired with every weight kind.
    pub inputs_per_scale: usize,
    pub seed: u64,
    pub params: Params,
}

impl CorpusConfig {
    pub fn planar(seed: u64) -> Self {
        CorpusConfig {
            n: 2,
            radii: vec![32.0, 64.0, 128.0, 256.0],
            inputs_per_scale: 5,
            seed,
            params: Params::default(),
        }
    }
}

pub(crate) fn rng_for(seed: u64, r: f64, j: usize, salt: u64) -> ChaCha8Rng {
    let mix = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ ((r.log2().round() as u64) << 40)
        ^ ((j as u64) << 20)
        ^ salt;
    ChaCha8Rng::seed_from_u64(mix)
}

pub(crate) fn unimodular(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
}

pub(crate) fn in_ball(rng: &mut impl Rng, n: usize, rho: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-rho..rho)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= rho * rho {
            return x;
        }
    }
}

/// Three directions with three packets each, unimodular coefficients, tile centres in B_{R/2}.
pub fn random_packet_field(
    curve: &CurveSpec<f64>,
    r: f64,
    rng: &mut impl Rng,
) -> Result<PacketField> {
    let sleeve = curvature_boxes::<f64>(curve, r)?;
    let rr = sleeve.scale.radius;
    let count = sleeve.boxes.len();
    let mut thetas: Vec<usize> = Vec::new();
    while thetas.len() < count.min(3) {
        let t = rng.gen_range(0..count);
        if !thetas.contains(&t) {
            thetas.push(t);
        }
    }
    let mut packets = Vec::new();
    for &t in &thetas {
        let theta = &sleeve.boxes[t];
        for _ in 0..3 {
            let m = loop {
                let m = plank_index(theta, &in_ball(rng, curve.n, 0.5 * rr));
                let c = Plank::new(theta, m.clone()).center();
                if c.iter().map(|v| v * v).sum::<f64>() <= 0.25 * rr * rr {
                    break m;
                }
            };
            packets.push(WavePacketCoeff::new(t, m, unimodular(rng)));
        }
    }
    PacketField::new(curve, rr, packets)
}

/// Density j mod 5: constant, random arcs, trigonometric polynomial, one arc, unimodular per box.
pub fn random_density(
    curve: &CurveSpec<f64>,
    r: f64,
    j: usize,
    rng: &mut impl Rng,
) -> CurveDensity {
    let (a, b) = curve.interval;
    match j % 5 {
        0 => CurveDensity::from_fn(curve, r, |_| Complex64::new(1.0, 0.0)),
        1 => CurveDensity::on_arcs(curve, r, &random_arcs(curve, r, rng), |_| {
            Complex64::new(1.0, 0.0)
        }),
        2 => {
            let c: Vec<Complex64> = (0..5)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            CurveDensity::from_fn(curve, r, move |xi| {
                c.iter()
                    .enumerate()
                    .map(|(k, ck)| ck * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * xi))
                    .sum()
            })
        }
        3 => {
            let s = rng.gen_range(a..b - 1.0 / r);
            CurveDensity::on_arcs(curve, r, &[(s, s + 1.0 / r, unimodular(rng))], |_| {
                Complex64::new(1.0, 0.0)
            })
        }
        _ => {
            let pieces = (r.powf(1.0 / curve.n as f64)).ceil() as usize;
            let h = (b - a) / pieces as f64;
            let arcs: Vec<(f64, f64, Complex64)> = (0..pieces)
                .map(|i| (a + i as f64 * h, a + (i + 1) as f64 * h, unimodular(rng)))
                .collect();
            CurveDensity::on_arcs(curve, r, &arcs, |_| Complex64::new(1.0, 0.0))
        }
    }
}

fn to_lattice(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| v.round() as i64).collect()
}

fn within(x: &[i64], rho: f64) -> bool {
    x.iter().map(|&v| (v * v) as f64).sum::<f64>() <= rho * rho
}

/// A lattice point of B_R; for `near` packets, inside the 2R^ε-dilate of a random packet.
fn draw_point(
    rng: &mut impl Rng,
    n: usize,
    rr: f64,
    near: Option<(&PacketField, f64)>,
) -> Vec<i64> {
    loop {
        let x = match near {
            None => to_lattice(&in_ball(rng, n, rr)),
            Some((f, rho)) => {
                let c = &f.packets[rng.gen_range(0..f.packets.len())];
                let theta = &f.boxes[c.theta_index];
                let y: Vec<f64> =
                    c.m.iter()
                        .map(|&m| m as f64 + rng.gen_range(-0.5 * rho..0.5 * rho))
                        .collect();
                to_lattice(&theta.t_mat.solve(&y).expect("invertible"))
            }
        };
        if within(&x, rr) {
            return x;
        }
    }
}

/// Φ₁ restricted to the lattice points of B_R.
pub fn bump_weight(n: usize, rr: f64) -> Result<Weight> {
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for_each_lattice_point(&ball(n, rr), None, |p| {
        let x: Vec<f64> = p.iter().map(|&v| v as f64).collect();
        pts.push(p.to_vec());
        vals.push(phi_one(rr, &x).max(0.0));
    });
    Weight::new(n, pts, vals)
}

/// Indicator of the lattice points of a region inside B_R.
pub fn region_indicator(region: &Region, rr: f64) -> Weight {
    let n = region.dim();
    let mut pts = Vec::new();
    for_each_lattice_point(region, Some(&ball(n, rr)), |p| pts.push(p.to_vec()));
    Weight::indicator(n, pts)
}

/// The weight of the given kind for an instance of `id` at scale R.
///
/// For thm22 the sparse, clustered and family-aligned weights sit near the packets of f (see the note on the rapid-decay term in the README).
pub fn random_weight(
    kind: WeightKind,
    id: IneqId,
    curve: &CurveSpec<f64>,
    rr: f64,
    packets: Option<&PacketField>,
    params: &Params,
    rng: &mut impl Rng,
) -> Result<Weight> {
    let n = curve.n;
    let near = match (id, packets) {
        (IneqId::Thm22, Some(f)) => Some((f, 2.0 * rr.powf(params.epsilon))),
        _ => None,
    };
    Ok(match kind {
        WeightKind::Sparse => {
            let pts: Vec<Vec<i64>> = (0..12).map(|_| draw_point(rng, n, rr, near)).collect();
            let vals: Vec<f64> = (0..12).map(|_| rng.gen_range(0.2..1.0)).collect();
            Weight::new(n, pts, vals)?
        }
        WeightKind::Clustered => {
            let count = rr.sqrt().ceil() as usize;
            let pts: Vec<Vec<i64>> = (0..count).map(|_| draw_point(rng, n, rr, near)).collect();
            Weight::indicator(n, pts)
        }
        WeightKind::PlankAligned => {
            let plank = match packets {
                Some(f) => f.plank(&f.packets[rng.gen_range(0..f.packets.len())]),
                None => {
                    let sleeve = curvature_boxes::<f64>(curve, rr)?;
                    let theta = &sleeve.boxes[rng.gen_range(0..sleeve.boxes.len())];
                    Plank::new(theta, plank_index(theta, &in_ball(rng, n, 0.5 * rr)))
                }
            };
            region_indicator(&Region::Slabs(plank.region()), rr)
        }
        WeightKind::FamilyAligned => {
            let fam = GeomFamily::new(id.family(), curve, rr)?;
            let dirs = fam.directions();
            let t = fam.tiling_at(dirs[rng.gen_range(0..dirs.len())]);
            let x: Vec<f64> = match near {
                Some(_) => draw_point(rng, n, rr, near)
                    .iter()
                    .map(|&v| v as f64)
                    .collect(),
                None => in_ball(rng, n, 0.5 * rr),
            };
            let y = t.coords(&x, &fam.origin);
            let m: Vec<i64> = y.iter().map(|v| (v + 0.5).floor() as i64).collect();
            let off = vec![0.0; m.len()];
            region_indicator(&Region::Slabs(t.tile(&fam.origin, &off, &m, 1.0)), rr)
        }
        WeightKind::Bump => bump_weight(n, rr)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub id: IneqId,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub input: usize,
    pub weight: WeightKind,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub id: IneqId,
    pub rows: Vec<CorpusRow>,
    /// Largest ratio over the whole corpus.
    pub constant: f64,
    /// (R, largest ratio at R).
    pub max_by_scale: Vec<(f64, f64)>,
    /// Fit of log₂ of the per-scale maximum against log₂ R.
    pub fit: LineFit,
}

/// One seeded instance of a corpus: input 0 at scale R with a weight of the given kind.
pub fn corpus_instance(
    id: IneqId,
    n: usize,
    r: f64,
    seed: u64,
    kind: WeightKind,
    params: Params,
) -> Result<InequalityInstance> {
    let curve = CurveSpec::<f64>::moment(n);
    let rr = crate::geometry::Scale::new(r, n)?.radius;
    let t = u64::from(!id.uses_packets());
    let mut rng = rng_for(seed, rr, 0, t);
    let (source, field) = if id.uses_packets() {
        let p = PacketSource::new(random_packet_field(&curve, rr, &mut rng)?);
        let f = p.field.clone();
        (Source::Packets(p), Some(f))
    } else {
        (
            Source::Extension(
                ExtensionSource::new(random_density(&curve, rr, 0, &mut rng))
                    .with_ball_field(rr)?,
            ),
            None,
        )
    };
    let k = WeightKind::ALL.iter().position(|&x| x == kind).unwrap_or(0) as u64;
    let mut rng = rng_for(seed, rr, 0, 0x100 + k);
    let w = random_weight(kind, id, &curve, rr, field.as_deref(), &params, &mut rng)?;
    InequalityInstance::new(id, &curve, rr, params, source, w)
}

impl std::str::FromStr for WeightKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| LabError::ConfigError(format!("unknown weight kind '{s}'")))
    }
}

enum Input {
    Packets(PacketSource),
    Extension(ExtensionSource),
}

/// Evaluate the corpora of several inequalities, sharing inputs (and Eg on B_R) between ids of the same type.
pub fn run_corpora(ids: &[IneqId], cfg: &CorpusConfig) -> Result<Vec<CorpusReport>> {
    if cfg.radii.len() < 3 {
        return Err(LabError::ConfigError(
            "a corpus needs at least 3 scales".into(),
        ));
    }
    let curve = CurveSpec::<f64>::moment(cfg.n);
    let mut rows: Vec<Vec<CorpusRow>> = vec![Vec::new(); ids.len()];
    for &r0 in &cfg.radii {
        let rr = crate::geometry::Scale::new(r0, cfg.n)?.radius;
        for j in 0..cfg.inputs_per_scale {
            let mut inputs: Vec<Option<Input>> = vec![None, None];
            for (slot, &id) in ids.iter().enumerate() {
                let t = usize::from(!id.uses_packets());
                if inputs[t].is_none() {
                    let mut rng = rng_for(cfg.seed, rr, j, t as u64);
                    inputs[t] = Some(if id.uses_packets() {
                        Input::Packets(PacketSource::new(random_packet_field(
                            &curve, rr, &mut rng,
                        )?))
                    } else {
                        Input::Extension(
                            ExtensionSource::new(random_density(&curve, rr, j, &mut rng))
                                .with_ball_field(rr)?,
                        )
                    });
                }
                for (k, &kind) in WeightKind::ALL.iter().enumerate() {
                    let mut rng = rng_for(cfg.seed, rr, j, 0x100 + 0x10 * (slot as u64) + k as u64);
                    let (source, packets) = match inputs[t].as_ref().expect("built above") {
                        Input::Packets(p) => (Source::Packets(p.clone()), Some(p.field.as_ref())),
                        Input::Extension(e) => (Source::Extension(e.clone()), None),
                    };
                    let w = random_weight(kind, id, &curve, rr, packets, &cfg.params, &mut rng)?;
                    let inst = InequalityInstance::new(id, &curve, rr, cfg.params, source, w)?;
                    let ev = evaluate(&inst)?;
                    rows[slot].push(CorpusRow {
                        id,
                        n: cfg.n,
                        radius: rr,
                        input: j,
                        weight: kind,
                        lhs: ev.lhs,
                        rhs: ev.rhs,
                        ratio: ev.ratio,
                    });
                }
            }
        }
    }
    ids.iter()
        .zip(rows)
        .map(|(&id, rows)| summarise(id, rows))
        .collect()
}

fn summarise(id: IneqId, rows: Vec<CorpusRow>) -> Result<CorpusReport> {
    let mut radii: Vec<f64> = rows.iter().map(|r| r.radius).collect();
    radii.dedup();
    let max_by_scale: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            (
                r,
                rows.iter()
                    .filter(|x| x.radius == r)
                    .map(|x| x.ratio)
                    .fold(0.0, f64::max),
            )
        })
        .collect();
    let constant = max_by_scale.iter().map(|x| x.1).fold(0.0, f64::max);
    let xs: Vec<f64> = max_by_scale.iter().map(|x| x.0).collect();
    let ys: Vec<f64> = max_by_scale.iter().map(|x| x.1).collect();
    let fit = log2_fit(&xs, &ys)?;
    Ok(CorpusReport {
        id,
        rows,
        constant,
        max_by_scale,
        fit,
    })
}
