//! Squeezing sweeps behind the CSV artifacts.
//!
//! Points are evaluated in parallel and collected in grid order, so the
//! output does not depend on scheduling.

use std::io::Write;

use cvmbqc_core::gates::{target_symplectic, BasisTable, GateId};
use cvmbqc_core::gkp::{error_probability_at, gate_error_probability, spike_variance, GkpBudget};
use cvmbqc_core::lattice::{db_to_r, effective_epsilon, Lattice};
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::plan_for;
use crate::error::{CliError, Result};

/// Decimal places kept on grid values, so `min + i * step` never drifts
/// away from the keys of the basis table.
const GRID_DECIMALS: i32 = 9;

/// A squeezing grid and the lattices and gates to sweep over it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub squeezing_db_min: f64,
    pub squeezing_db_max: f64,
    pub step_db: f64,
    pub lattices: Vec<Lattice>,
    pub gates: Vec<GateId>,
}

impl SweepSpec {
    pub const DEFAULT_MIN: f64 = 0.0;
    pub const DEFAULT_MAX: f64 = 25.0;
    pub const DEFAULT_STEP: f64 = 0.25;

    pub fn new(min: f64, max: f64, step: f64, lattices: Vec<Lattice>, gates: Vec<GateId>) -> Result<Self> {
        let spec = Self { squeezing_db_min: min, squeezing_db_max: max, step_db: step, lattices, gates };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi, step) = (self.squeezing_db_min, self.squeezing_db_max, self.step_db);
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(CliError::Usage(format!("need 0 <= db-min < db-max, got {lo} and {hi}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Usage(format!("db-step must be positive, got {step}")));
        }
        if self.lattices.is_empty() || self.gates.is_empty() {
            return Err(CliError::Usage("lattice and gate lists must be nonempty".into()));
        }
        Ok(())
    }

    /// Grid values from min to max inclusive.
    pub fn grid(&self) -> Vec<f64> {
        db_grid(self.squeezing_db_min, self.squeezing_db_max, self.step_db)
    }

    /// `(lattice, gate)` pairs that exist, in sweep order.
    pub fn pairs(&self) -> Result<Vec<(Lattice, GateId)>> {
        let mut out = Vec::new();
        for &l in &self.lattices {
            for &g in &self.gates {
                if !supported(l, g) {
                    return Err(CliError::Usage(format!("gate {g} is not available on {l}")));
                }
                out.push((l, g));
            }
        }
        Ok(out)
    }
}

pub fn round_db(db: f64) -> f64 {
    let s = 10f64.powi(GRID_DECIMALS);
    (db * s).round() / s
}

pub fn db_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round_db(min + i as f64 * step)).collect()
}

pub fn supported(lattice: Lattice, gate: GateId) -> bool {
    match gate {
        GateId::I | GateId::F | GateId::P1 => true,
        GateId::Ffcz => lattice != Lattice::Teleport,
        GateId::Swap => lattice == Lattice::Dbsl,
        GateId::SInvT => lattice == Lattice::Qrl,
        GateId::Cz => false,
    }
}

/// Quadrature labels in xxpp order.
pub fn quadrature_labels(n_modes: usize) -> Vec<String> {
    if n_modes == 1 {
        return vec!["x".into(), "p".into()];
    }
    let x = (1..=n_modes).map(|i| format!("x{i}"));
    let p = (1..=n_modes).map(|i| format!("p{i}"));
    x.chain(p).collect()
}

/// Lattice column of the squeezing reference rows.
pub const REFERENCE: &str = "REFERENCE";
/// Lattice column of the zero-gate-noise error rows.
pub const ZERO_NOISE: &str = "ZERO_NOISE";
/// Lattice column for the variable control-angle DBSL.
pub const DBSL_VARIABLE: &str = "DBSL_VARIABLE_THETA_C";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRow {
    pub lattice: String,
    pub gate: String,
    pub squeezing_db: f64,
    pub quadrature: String,
    pub noise_variance_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub lattice: String,
    pub gate: String,
    pub squeezing_db: f64,
    pub perr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub lattice: String,
    pub squeezing_db: f64,
    pub perr_ratio_vs_dbsl: f64,
}

/// Scientific notation with 10 significant digits.
pub fn format_perr(p: f64) -> String {
    format!("{p:.9e}")
}

/// Variance relative to the vacuum, in dB.
pub fn variance_db(v: f64) -> f64 {
    10.0 * (v / 0.5).log10()
}

/// Added noise per output quadrature. Zero squeezing has no finite
/// noise, so those points are left out.
pub fn noise_curve(spec: &SweepSpec, table: &BasisTable) -> Result<Vec<NoiseRow>> {
    let pairs = spec.pairs()?;
    let grid: Vec<f64> = spec.grid().into_iter().filter(|&db| db > 0.0).collect();
    let mut rows = Vec::new();
    for db in &grid {
        let r = db_to_r(*db);
        let eps = effective_epsilon(r)?;
        for (gate, v) in [("exp(-2r)", (-2.0 * r).exp()), ("sech(2r)", eps)] {
            rows.push(NoiseRow {
                lattice: REFERENCE.into(),
                gate: gate.into(),
                squeezing_db: *db,
                quadrature: "-".into(),
                noise_variance_db: variance_db(v / 2.0),
            });
        }
    }
    let work: Vec<_> = pairs.iter().flat_map(|&(l, g)| grid.iter().map(move |&db| (l, g, db))).collect();
    let computed: Vec<Vec<NoiseRow>> = work
        .par_iter()
        .map(|&(lattice, gate, db)| {
            let res = plan_for(table, lattice, gate, db, 0, false)?.evaluate()?;
            let labels = quadrature_labels(res.n_modes());
            Ok(labels
                .into_iter()
                .zip(res.noise_variances())
                .map(|(q, v)| NoiseRow {
                    lattice: lattice.to_string(),
                    gate: gate.to_string(),
                    squeezing_db: db,
                    quadrature: q,
                    noise_variance_db: variance_db(v),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    rows.extend(computed.into_iter().flatten());
    Ok(rows)
}

/// `P_err` of one gate at `db`; zero squeezing takes the limit 1.
pub fn perr_at(table: &BasisTable, lattice: Lattice, gate: GateId, db: f64, variable_theta_c: bool) -> Result<f64> {
    let r = db_to_r(db);
    if r == 0.0 {
        return Ok(error_probability_at(r, |_| unreachable!("no plan is built without squeezing"))?);
    }
    Ok(gate_error_probability(&plan_for(table, lattice, gate, db, 0, variable_theta_c)?)?)
}

/// `P_err` with the gate noise switched off, from the ideal target.
pub fn zero_noise_perr(gate: GateId, db: f64) -> Result<Option<f64>> {
    let target = match gate {
        GateId::Ffcz => target_symplectic(gate, (1, 1))?,
        GateId::SInvT => return Ok(None),
        g => target_symplectic(g, (0, 0))?,
    };
    let n = target.matrix().nrows();
    let budget = GkpBudget::from_parts(target.matrix(), vec![0.0; n], spike_variance(db_to_r(db)))?;
    Ok(Some(budget.perr))
}

pub fn error_curve(spec: &SweepSpec, table: &BasisTable) -> Result<Vec<ErrorRow>> {
    let pairs = spec.pairs()?;
    let grid = spec.grid();
    let work: Vec<_> = pairs.iter().flat_map(|&(l, g)| grid.iter().map(move |&db| (l, g, db))).collect();
    let mut rows: Vec<ErrorRow> = work
        .par_iter()
        .map(|&(lattice, gate, db)| {
            Ok(ErrorRow {
                lattice: lattice.to_string(),
                gate: gate.to_string(),
                squeezing_db: db,
                perr: format_perr(perr_at(table, lattice, gate, db, false)?),
            })
        })
        .collect::<Result<_>>()?;
    let mut gates = spec.gates.clone();
    gates.sort();
    gates.dedup();
    for gate in gates {
        for &db in &grid {
            if let Some(p) = zero_noise_perr(gate, db)? {
                rows.push(ErrorRow {
                    lattice: ZERO_NOISE.into(),
                    gate: gate.to_string(),
                    squeezing_db: db,
                    perr: format_perr(p),
                });
            }
        }
    }
    Ok(rows)
}

/// Controlled-Z `P_err` relative to the fixed-control DBSL. Rows are
/// listed per lattice; `variable_theta_c` adds the DBSL with an optimized
/// control angle.
pub fn compare(spec: &SweepSpec, table: &BasisTable, variable_theta_c: bool) -> Result<Vec<CompareRow>> {
    let mut series: Vec<(String, Lattice, bool)> = spec
        .lattices
        .iter()
        .filter(|&&l| l != Lattice::Dbsl && supported(l, GateId::Ffcz))
        .map(|&l| (l.to_string(), l, false))
        .collect();
    if variable_theta_c {
        series.push((DBSL_VARIABLE.into(), Lattice::Dbsl, true));
    }
    if series.is_empty() {
        return Err(CliError::Usage("nothing to compare against the DBSL".into()));
    }
    let grid: Vec<f64> = spec.grid().into_iter().filter(|&db| db > 0.0).collect();
    let work: Vec<_> = series.iter().flat_map(|s| grid.iter().map(move |&db| (s, db))).collect();
    work.par_iter()
        .map(|&((name, lattice, var), db)| {
            let base = perr_at(table, Lattice::Dbsl, GateId::Ffcz, db, false)?;
            let p = perr_at(table, *lattice, GateId::Ffcz, db, *var)?;
            Ok(CompareRow { lattice: name.clone(), squeezing_db: db, perr_ratio_vs_dbsl: p / base })
        })
        .collect()
}

/// Writes rows with a header line.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lattices: Vec<Lattice>, gates: Vec<GateId>) -> SweepSpec {
        SweepSpec::new(0.0, 2.0, 0.5, lattices, gates).unwrap()
    }

    #[test]
    fn grid_has_no_drift() {
        let g = db_grid(0.0, 25.0, 0.25);
        assert_eq!(g.len(), 101);
        assert_eq!(g[100], 25.0);
        assert_eq!(g[37], 9.25);
        assert_eq!(db_grid(0.1, 0.3, 0.1), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(3.0, 1.0, 0.5, vec![Lattice::Dbsl], vec![GateId::I]).is_err());
        assert!(SweepSpec::new(0.0, 1.0, 0.0, vec![Lattice::Dbsl], vec![GateId::I]).is_err());
        assert!(SweepSpec::new(0.0, 1.0, 0.5, vec![], vec![GateId::I]).is_err());
        assert!(spec(vec![Lattice::Bsl], vec![GateId::Swap]).pairs().is_err());
    }

    #[test]
    fn rows_rederive_from_library() {
        let table = BasisTable::new();
        let s = spec(vec![Lattice::Qrl], vec![GateId::I, GateId::Ffcz]);
        let rows = error_curve(&s, &table).unwrap();
        // 2 gates x 5 points plus 2 x 5 baseline rows
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].perr, format_perr(1.0));
        let plan = cvmbqc_core::gates::qrl_cz_plan(db_to_r(1.5)).unwrap();
        let want = format_perr(gate_error_probability(&plan).unwrap());
        assert!(rows.iter().any(|r| r.gate == "FFCZ" && r.squeezing_db == 1.5 && r.perr == want));
        assert_eq!(rows[0].perr.len(), "1.000000000e0".len());
    }

    #[test]
    fn reference_noise_rows() {
        let s = spec(vec![Lattice::Teleport], vec![GateId::I]);
        let rows = noise_curve(&s, &BasisTable::new()).unwrap();
        let sq = rows.iter().find(|r| r.gate == "exp(-2r)" && r.squeezing_db == 2.0).unwrap();
        assert!((sq.noise_variance_db + 2.0).abs() < 1e-12);
        assert!(!rows.iter().any(|r| r.squeezing_db == 0.0));
    }

    #[test]
    fn missing_cz_basis_is_a_cache_miss() {
        let s = spec(vec![Lattice::Mbsl], vec![GateId::Ffcz]);
        let err = error_curve(&s, &BasisTable::new()).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }
}
