use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lab::exponents::ExponentTable;
use crate::lab::fit::{log2_fit, LineFit};
use crate::lab::instance::{evaluate, IneqId, InequalityInstance};

pub const CSV_HEADER: &str = "inequality_id,n,R,lhs,rhs,ratio";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// ‖f‖₂² or ‖g‖², the normaliser of the raw fit.
    pub input_norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub id: IneqId,
    pub n: usize,
    pub rows: Vec<SweepRow>,
    /// Slope of log₂(lhs/rhs) against log₂ R; the known power of R is divided out, so 0 is ideal.
    pub fit: Option<LineFit>,
    /// Slope of log₂(lhs/‖input‖²) against log₂ R.
    pub raw_fit: Option<LineFit>,
    /// Set when some left-hand side vanishes and no logarithmic fit exists.
    pub degenerate: bool,
}

impl SweepResult {
    pub fn from_rows(id: IneqId, n: usize, rows: Vec<SweepRow>) -> Result<Self> {
        if rows.len() < 3 {
            return Err(LabError::ConfigError(format!(
                "a sweep needs at least 3 scales, got {}",
                rows.len()
            )));
        }
        let degenerate = rows
            .iter()
            .any(|r| !(r.lhs > 0.0 && r.rhs > 0.0 && r.input_norm_sq > 0.0));
        let xs: Vec<f64> = rows.iter().map(|r| r.radius).collect();
        let (fit, raw_fit) = if degenerate {
            (None, None)
        } else {
            let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            let raw: Vec<f64> = rows.iter().map(|r| r.lhs / r.input_norm_sq).collect();
            (Some(log2_fit(&xs, &ratios)?), Some(log2_fit(&xs, &raw)?))
        };
        Ok(SweepResult {
            id,
            n,
            rows,
            fit,
            raw_fit,
            degenerate,
        })
    }

    pub fn write_csv(&self, mut w: impl Write, header: bool) -> Result<()> {
        if header {
            writeln!(w, "{CSV_HEADER}")?;
        }
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.id, self.n, r.radius, r.lhs, r.rhs, r.ratio
            )?;
        }
        Ok(())
    }

    pub fn sidecar(&self, config_hash: &str, seed: u64) -> Sidecar {
        Sidecar {
            inequality_id: self.id,
            n: self.n,
            slope: self.fit.map(|f| f.slope),
            residual: self.fit.map(|f| f.residual),
            raw_slope: self.raw_fit.map(|f| f.slope),
            reference_exponent: self.id.r_power(&ExponentTable::new(self.n)),
            degenerate: self.degenerate,
            config_hash: config_hash.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// The JSON written next to a sweep CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub inequality_id: IneqId,
    pub n: usize,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub raw_slope: Option<f64>,
    /// Power of R carried by the right-hand side.
    pub reference_exponent: f64,
    pub degenerate: bool,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Evaluate one generated instance per scale and fit the exponents.
pub fn exponent_sweep<G>(id: IneqId, generator: G, radii: &[f64]) -> Result<SweepResult>
where
    G: Fn(f64) -> Result<InequalityInstance> + Sync,
{
    if radii.len() < 3 {
        return Err(LabError::ConfigError(format!(
            "a sweep needs at least 3 scales, got {}",
            radii.len()
        )));
    }
    let rows: Vec<(usize, SweepRow)> = radii
        .par_iter()
        .map(|&r| {
            let inst = generator(r)?;
            if inst.id != id {
                return Err(LabError::InvalidInstance(format!(
                    "generator produced {} for a {id} sweep",
                    inst.id
                )));
            }
            let ev = evaluate(&inst)?;
            Ok((
                inst.n(),
                SweepRow {
                    radius: inst.radius(),
                    lhs: ev.lhs,
                    rhs: ev.rhs,
                    ratio: ev.ratio,
                    input_norm_sq: inst.input_norm_sq(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let n = rows[0].0;
    SweepResult::from_rows(id, n, rows.into_iter().map(|r| r.1).collect())
}
