use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extension::{extend, extend_in_ball, extend_points, CurveDensity};
use crate::geometry::{
    curvature_boxes, AnisotropicBox, CurveSpec, FamilyKind, GeomFamily, Plank, Scale,
};
use crate::lab::exponents::{to_f64, ExponentTable};
use crate::wavepacket::{packet_l2_sq, packet_value, Field, FieldGrid, WavePacketCoeff};
use crate::weights::{sup_mass, sup_mass_dilated, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IneqId {
    Cor31a,
    Cor33,
    Cor34,
    Cor35,
    Thm22,
    Thm41,
    Thm11,
    Thm16,
}

impl IneqId {
    pub const ALL: [IneqId; 8] = [
        IneqId::Cor31a,
        IneqId::Cor33,
        IneqId::Cor34,
        IneqId::Cor35,
        IneqId::Thm22,
        IneqId::Thm41,
        IneqId::Thm11,
        IneqId::Thm16,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IneqId::Cor31a => "cor31a",
            IneqId::Cor33 => "cor33",
            IneqId::Cor34 => "cor34",
            IneqId::Cor35 => "cor35",
            IneqId::Thm22 => "thm22",
            IneqId::Thm41 => "thm41",
            IneqId::Thm11 => "thm11",
            IneqId::Thm16 => "thm16",
        }
    }

    /// Packet input (true) or an extension density (false).
    pub fn uses_packets(self) -> bool {
        matches!(
            self,
            IneqId::Cor31a | IneqId::Cor33 | IneqId::Cor34 | IneqId::Cor35 | IneqId::Thm22
        )
    }

    /// The family whose supremum enters the right-hand side.
    pub fn family(self) -> FamilyKind {
        match self {
            IneqId::Cor31a | IneqId::Thm22 => FamilyKind::Plank,
            IneqId::Cor33 => FamilyKind::Slab,
            IneqId::Cor34 | IneqId::Thm16 => FamilyKind::Tube,
            IneqId::Cor35 | IneqId::Thm41 | IneqId::Thm11 => FamilyKind::Hyperplane,
        }
    }

    /// Power of R in front of the family supremum, excluding R^ε (thm22 has none).
    pub fn r_power(self, table: &ExponentTable) -> f64 {
        let lift = (table.n - 1) as f64;
        match self {
            IneqId::Cor31a => to_f64(table.e_t),
            IneqId::Cor33 => to_f64(table.e_l),
            IneqId::Cor34 => to_f64(table.e_p),
            IneqId::Cor35 => to_f64(table.e_s),
            IneqId::Thm22 => 0.0,
            IneqId::Thm41 => lift + to_f64(table.e_s),
            IneqId::Thm11 => to_f64(table.a_mt),
            IneqId::Thm16 => to_f64(table.a_tube),
        }
    }
}

impl FromStr for IneqId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        IneqId::ALL
            .into_iter()
            .find(|id| id.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| LabError::ConfigError(format!("unknown inequality id '{s}'")))
    }
}

impl fmt::Display for IneqId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub k: f64,
    /// Exponent on w; the critical value n(n+1)/(n(n+1)−2) when None.
    pub r: Option<f64>,
    /// Directions per curvature box and offsets per unit for family suprema.
    pub direction_refinement: usize,
    pub offset_resolution: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            epsilon: 0.05,
            k: 10.0,
            r: None,
            direction_refinement: 1,
            offset_resolution: 1,
        }
    }
}

/// f = Σ_T f_T over a list of packets on the curvature sleeve at scale R.
#[derive(Clone, Debug)]
pub struct PacketField {
    pub curve: CurveSpec<f64>,
    pub scale: Scale,
    pub boxes: Vec<AnisotropicBox<f64>>,
    pub packets: Vec<WavePacketCoeff>,
}

impl PacketField {
    pub fn new(curve: &CurveSpec<f64>, r: f64, packets: Vec<WavePacketCoeff>) -> Result<Self> {
        let sleeve = curvature_boxes::<f64>(curve, r)?;
        if let Some(c) = packets
            .iter()
            .find(|c| c.theta_index >= sleeve.boxes.len() || c.m.len() != curve.n)
        {
            return Err(LabError::DomainError(format!(
                "packet on box {} with index {:?} does not fit the sleeve",
                c.theta_index, c.m
            )));
        }
        Ok(PacketField {
            curve: curve.clone(),
            scale: sleeve.scale,
            boxes: sleeve.boxes,
            packets,
        })
    }

    pub fn n(&self) -> usize {
        self.curve.n
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        self.packets
            .iter()
            .map(|c| packet_value(&self.boxes[c.theta_index], &c.m, c.a(), x))
            .sum()
    }

    pub fn values(&self, points: &[Vec<f64>]) -> Vec<Complex64> {
        points.par_iter().map(|x| self.value(x)).collect()
    }

    pub fn plank(&self, c: &WavePacketCoeff) -> Plank {
        Plank::new(&self.boxes[c.theta_index], c.m.clone())
    }

    /// ‖f_T‖₂² for each packet.
    pub fn packet_norms_sq(&self) -> Vec<f64> {
        self.packets
            .iter()
            .map(|c| packet_l2_sq(&self.boxes[c.theta_index], c.a()))
            .collect()
    }

    /// Σ_{x ∈ B_ρ ∩ ℤⁿ} |f(x)|².
    pub fn ball_norm_sq(&self, rho: f64) -> f64 {
        let grid = FieldGrid::ball_box(self.n(), rho);
        let r2 = rho * rho;
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                if x.iter().map(|v| v * v).sum::<f64>() <= r2 {
                    self.value(&x).norm_sqr()
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Samples on a grid.
    pub fn sample(&self, grid: &FieldGrid) -> Field {
        Field::from_fn(grid.clone(), |x| self.value(x))
    }
}

/// f given by packets, with ‖f‖₂² taken as the lattice sum over B_R.
#[derive(Clone, Debug)]
pub struct PacketSource {
    pub field: Arc<PacketField>,
    pub norm_sq: f64,
}

impl PacketSource {
    pub fn new(field: PacketField) -> Self {
        let norm_sq = field.ball_norm_sq(field.scale.radius);
        PacketSource {
            field: Arc::new(field),
            norm_sq,
        }
    }

    /// ‖f‖₂² = Σ_T ‖f_T‖₂², exact on ℝⁿ when no two packets share a box.
    pub fn orthogonal(field: PacketField) -> Self {
        let norm_sq = field.packet_norms_sq().iter().sum();
        PacketSource {
            field: Arc::new(field),
            norm_sq,
        }
    }
}

/// g on the curve, with Eg on the unit lattice of B_R when already computed.
#[derive(Clone, Debug)]
pub struct ExtensionSource {
    pub density: Arc<CurveDensity>,
    pub on_ball: Option<Arc<Field>>,
}

impl ExtensionSource {
    pub fn new(density: CurveDensity) -> Self {
        ExtensionSource {
            density: Arc::new(density),
            on_ball: None,
        }
    }

    /// Precompute Eg on the lattice points of B_R.
    pub fn with_ball_field(mut self, r: f64) -> Result<Self> {
        let grid = FieldGrid::ball_box(self.density.curve.n, r);
        self.on_ball = Some(Arc::new(extend_in_ball(&self.density, &grid, r)?));
        Ok(self)
    }
}

#[derive(Clone, Debug)]
pub enum Source {
    Packets(PacketSource),
    Extension(ExtensionSource),
}

/// One (f or g, w, R) triple for a given inequality.
#[derive(Clone, Debug)]
pub struct InequalityInstance {
    pub id: IneqId,
    pub curve: CurveSpec<f64>,
    pub scale: Scale,
    pub params: Params,
    pub source: Source,
    pub weight: Weight,
}

impl InequalityInstance {
    pub fn new(
        id: IneqId,
        curve: &CurveSpec<f64>,
        r: f64,
        params: Params,
        source: Source,
        weight: Weight,
    ) -> Result<Self> {
        let scale = Scale::new(r, curve.n)?;
        if weight.n != curve.n {
            return Err(LabError::DomainError(format!(
                "weight lives in dimension {}, curve in {}",
                weight.n, curve.n
            )));
        }
        match (&source, id.uses_packets()) {
            (Source::Packets(p), true) => {
                if p.field.scale.radius != scale.radius {
                    return Err(LabError::DomainError(
                        "packet scale differs from the instance scale".into(),
                    ));
                }
            }
            (Source::Extension(_), false) => {}
            _ => {
                return Err(LabError::InvalidInstance(format!(
                    "{id} needs {}",
                    if id.uses_packets() {
                        "packets"
                    } else {
                        "an extension density"
                    }
                )))
            }
        }
        Ok(InequalityInstance {
            id,
            curve: curve.clone(),
            scale,
            params,
            source,
            weight,
        })
    }

    pub fn n(&self) -> usize {
        self.curve.n
    }

    pub fn radius(&self) -> f64 {
        self.scale.radius
    }

    pub fn exponents(&self) -> ExponentTable {
        ExponentTable::new(self.n())
    }

    pub fn r(&self) -> f64 {
        self.params.r.unwrap_or_else(|| to_f64(self.exponents().r))
    }

    /// ‖f‖₂² or ‖g‖²_{L²(dλ)}.
    pub fn input_norm_sq(&self) -> f64 {
        match &self.source {
            Source::Packets(p) => p.norm_sq,
            Source::Extension(e) => e.density.norm_sq(),
        }
    }

    fn family(&self, kind: FamilyKind) -> Result<GeomFamily> {
        Ok(
            GeomFamily::new(kind, &self.curve, self.radius())?.with_sampling(
                self.params.direction_refinement,
                self.params.offset_resolution,
            ),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// covol · Σ |f(x)|² w(x) over the samples of f, which must include every support point of w.
pub fn weighted_energy(f: &Field, w: &Weight) -> Result<f64> {
    let g = &f.grid;
    if w.n != g.n {
        return Err(LabError::DomainError(format!(
            "weight dimension {} vs grid dimension {}",
            w.n, g.n
        )));
    }
    let binv = g
        .basis_mat()
        .inverse()
        .ok_or_else(|| LabError::DomainError("singular grid basis".into()))?;
    let mut s = 0.0;
    for (p, &v) in w.points.iter().zip(&w.values) {
        if v == 0.0 {
            continue;
        }
        let x: Vec<f64> = p.iter().map(|&c| c as f64).collect();
        let kf = binv.mul_vec(&x);
        let k: Vec<i64> = kf.iter().map(|c| c.round() as i64).collect();
        if kf.iter().zip(&k).any(|(a, b)| (a - *b as f64).abs() > 1e-9) {
            return Err(LabError::DomainError(format!(
                "weight point {p:?} is not a grid sample"
            )));
        }
        let i = g.flat_index(&k).ok_or_else(|| {
            LabError::DomainError(format!("weight point {p:?} lies outside the grid"))
        })?;
        s += f.data[i].norm_sqr() * v;
    }
    Ok(g.covolume() * s)
}

fn as_f64(p: &[i64]) -> Vec<f64> {
    p.iter().map(|&v| v as f64).collect()
}

const DIRECT_LIMIT: usize = 4096;

/// Left-hand side: Σ_x |f(x)|² w(x), restricted to B_R for extension inequalities.
pub fn lhs(inst: &InequalityInstance) -> Result<f64> {
    let w = &inst.weight;
    match &inst.source {
        Source::Packets(p) => {
            let pts: Vec<Vec<f64>> = w.points.iter().map(|x| as_f64(x)).collect();
            let vals = p.field.values(&pts);
            Ok(vals
                .iter()
                .zip(&w.values)
                .map(|(z, v)| z.norm_sqr() * v)
                .sum())
        }
        Source::Extension(e) => {
            let r2 = inst.radius() * inst.radius();
            let idx: Vec<usize> = (0..w.len())
                .filter(|&i| w.points[i].iter().map(|&v| (v * v) as f64).sum::<f64>() <= r2)
                .collect();
            if idx.is_empty() {
                return Ok(0.0);
            }
            if let Some(field) = &e.on_ball {
                let g = &field.grid;
                let mut s = 0.0;
                for &i in &idx {
                    let f = g.flat_index(&w.points[i]).ok_or_else(|| {
                        LabError::DomainError("cached field misses a weight point".into())
                    })?;
                    s += field.data[f].norm_sqr() * w.values[i];
                }
                return Ok(s);
            }
            if idx.len() <= DIRECT_LIMIT {
                let pts: Vec<Vec<f64>> = idx.iter().map(|&i| as_f64(&w.points[i])).collect();
                let vals = extend_points(&e.density, &pts)?;
                return Ok(vals
                    .iter()
                    .zip(&idx)
                    .map(|(z, &i)| z.norm_sqr() * w.values[i])
                    .sum());
            }
            let n = inst.n();
            let mut lo = vec![i64::MAX; n];
            let mut hi = vec![i64::MIN; n];
            for &i in &idx {
                for a in 0..n {
                    lo[a] = lo[a].min(w.points[i][a]);
                    hi[a] = hi[a].max(w.points[i][a]);
                }
            }
            let shape = (0..n).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
            let grid = FieldGrid::scaled(n, inst.radius(), 1, lo, shape);
            let field = extend(&e.density, &grid)?;
            let sub = Weight::new(
                n,
                idx.iter().map(|&i| w.points[i].clone()).collect(),
                idx.iter().map(|&i| w.values[i]).collect(),
            )?;
            weighted_energy(&field, &sub)
        }
    }
}

/// R^{−K} max_{1≤m≤3} 2^{−mK} sup_T w^r(2^m T); the terms m ≥ 4 are dropped.
fn plank_rapdec(inst: &InequalityInstance, family: &GeomFamily, r: f64) -> f64 {
    let k = inst.params.k;
    (1..=3)
        .map(|m| {
            let rho = 2f64.powi(m);
            2f64.powf(-(m as f64) * k)
                * sup_mass_dilated(&inst.weight, family, r, rho).value.powf(r)
        })
        .fold(0.0, f64::max)
        * inst.radius().powf(-k)
}

/// Per-packet Σ_{x ∈ ρT} w(x)^r for ρ = `main` and ρ = 2^m, m = 1..levels.
struct PacketMasses {
    main: Vec<f64>,
    dyadic: Vec<Vec<f64>>,
}

fn packet_masses(p: &PacketField, w: &Weight, r: f64, main: f64) -> PacketMasses {
    let pts: Vec<Vec<f64>> = w.points.iter().map(|x| as_f64(x)).collect();
    let powered: Vec<f64> = w.values.iter().map(|v| v.powf(r)).collect();
    let per: Vec<(f64, Vec<f64>)> = p
        .packets
        .par_iter()
        .map(|c| {
            let theta = &p.boxes[c.theta_index];
            let mut main_mass = 0.0;
            let mut first_level = vec![0.0; 64];
            for (x, &pw) in pts.iter().zip(&powered) {
                let y = theta.dual(x);
                // x ∈ ρT iff −ρ/2 ≤ y − m < ρ/2, i.e. ρ ≥ below and ρ > above
                let (mut below, mut above) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (v, &m) in y.iter().zip(&c.m) {
                    let d = v - m as f64;
                    below = below.max(-2.0 * d);
                    above = above.max(2.0 * d);
                }
                let inside = |rho: f64| rho >= below && rho > above;
                if inside(main) {
                    main_mass += pw;
                }
                let mut level = 1usize;
                while level < 63 && !inside(2f64.powi(level as i32)) {
                    level += 1;
                }
                first_level[level] += pw;
            }
            (main_mass, first_level)
        })
        .collect();
    let levels = per
        .iter()
        .map(|(_, f)| f.iter().rposition(|&v| v > 0.0).unwrap_or(1))
        .max()
        .unwrap_or(1)
        .max(1);
    let main = per.iter().map(|(m, _)| *m).collect();
    let dyadic = per
        .iter()
        .map(|(_, f)| {
            let mut acc = 0.0;
            (1..=levels)
                .map(|l| {
                    acc += f[l];
                    acc
                })
                .collect()
        })
        .collect();
    PacketMasses { main, dyadic }
}

/// The right-hand side with every implicit constant set to 1.
pub fn rhs_functional(id: IneqId, inst: &InequalityInstance) -> Result<f64> {
    if id != inst.id {
        return Err(LabError::InvalidInstance(format!(
            "instance built for {} evaluated as {id}",
            inst.id
        )));
    }
    let table = inst.exponents();
    let rr = inst.radius();
    let r = inst.r();
    let eps = inst.params.epsilon;
    let re = rr.powf(eps);
    let norm = inst.input_norm_sq();
    let power = rr.powf(id.r_power(&table));
    let value = match id {
        IneqId::Cor31a => {
            let fam = inst.family(FamilyKind::Plank)?;
            let main = sup_mass_dilated(&inst.weight, &fam, r, re).value.powf(r);
            let tail = plank_rapdec(inst, &fam, r);
            re * power * main.max(tail).powf(1.0 / r) * norm
        }
        IneqId::Cor33
        | IneqId::Cor34
        | IneqId::Cor35
        | IneqId::Thm41
        | IneqId::Thm11
        | IneqId::Thm16 => {
            let fam = inst.family(id.family())?;
            re * power * sup_mass(&inst.weight, &fam, r).value * norm
        }
        IneqId::Thm22 => {
            let Source::Packets(src) = &inst.source else {
                unreachable!("checked at construction")
            };
            let p = &src.field;
            let masses = packet_masses(p, &inst.weight, r, 2.0 * re);
            let norms = p.packet_norms_sq();
            let dets: Vec<f64> = p
                .packets
                .iter()
                .map(|c| p.boxes[c.theta_index].det_t.abs())
                .collect();
            let n = inst.n() as i32;
            let main: f64 = (0..norms.len())
                .map(|i| norms[i] * masses.main[i] * dets[i])
                .sum();
            let levels = masses.dyadic.first().map_or(0, |d| d.len());
            let tail = (1..=levels)
                .map(|m| {
                    let s: f64 = (0..norms.len())
                        .map(|i| {
                            norms[i] * masses.dyadic[i][m - 1] * dets[i] / 2f64.powi(m as i32 * n)
                        })
                        .sum();
                    2f64.powf(-(m as f64) * inst.params.k) * s.powf(1.0 / r)
                })
                .fold(0.0, f64::max);
            let p_exp = to_f64(table.p);
            let f4p = norm.powf(2.0 / p_exp);
            re * main.powf(1.0 / r) * f4p + rr.powf(-inst.params.k) * tail * f4p
        }
    };
    Ok(value)
}

/// rhs / (input norm²), the weight-dependent factor Q_R(w).
pub fn q_factor(inst: &InequalityInstance) -> Result<f64> {
    let norm = inst.input_norm_sq();
    if norm == 0.0 {
        return Err(LabError::InvalidInstance("zero input".into()));
    }
    Ok(rhs_functional(inst.id, inst)? / norm)
}

pub fn evaluate(inst: &InequalityInstance) -> Result<Evaluation> {
    let l = lhs(inst)?;
    let r = rhs_functional(inst.id, inst)?;
    let ratio = if l == 0.0 { 0.0 } else { l / r };
    Ok(Evaluation {
        lhs: l,
        rhs: r,
        ratio,
    })
}
