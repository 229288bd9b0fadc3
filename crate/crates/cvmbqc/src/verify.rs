//! The verification suite: oracle checks of every cataloged plan, cache
//! consistency and the Wigner grid limits.

use cvmbqc_core::gates::{closed_form_catalog, cz_plan, BasisTable, CacheRow, GatePlan, PLAN_TOL};
use cvmbqc_core::gkp::gate_error_probability;
use cvmbqc_core::lattice::{db_to_r, r_to_db, Lattice};
use cvmbqc_core::oracle::{default_grid, verify_plan, wigner_limit_check, VerifyReport, WignerReport, WIGNER_PROBE};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::sweep::round_db;

/// Squeezing parameters of the oracle comparison.
pub const ORACLE_R: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];
/// Squeezing parameters of the Wigner grid comparison.
pub const WIGNER_R: [f64; 2] = [0.5, 1.5];
/// Lattices whose controlled-Z bases come from the table.
pub const CACHED_LATTICES: [Lattice; 3] = [Lattice::Dbsl, Lattice::Bsl, Lattice::Mbsl];
/// Allowed relative drift of a stored `P_err` from its recomputation.
pub const ROW_PERR_RTOL: f64 = 1e-6;

/// Table key of an oracle squeezing value.
pub fn oracle_db(r: f64) -> f64 {
    round_db(r_to_db(r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub lattice: Lattice,
    pub variable_theta_c: bool,
    pub squeezing_db: f64,
    pub residual: f64,
    pub perr: f64,
    pub stored_perr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub tol: f64,
    pub plans: Vec<VerifyReport>,
    pub cache_rows: Vec<RowCheck>,
    pub wigner: Vec<WignerReport>,
    pub failures: usize,
    pub pass: bool,
}

/// Recomputes a stored row through the full plan.
pub fn check_row(row: &CacheRow) -> Result<RowCheck> {
    let plan = cz_plan(row.lattice, db_to_r(row.squeezing_db), 0, &row.angles, row.variable_theta_c)?;
    let residual = plan.residual()?;
    let perr = gate_error_probability(&plan)?;
    let pass = residual < PLAN_TOL && (perr - row.perr).abs() <= ROW_PERR_RTOL * row.perr.abs();
    Ok(RowCheck {
        lattice: row.lattice,
        variable_theta_c: row.variable_theta_c,
        squeezing_db: row.squeezing_db,
        residual,
        perr,
        stored_perr: row.perr,
        pass,
    })
}

/// Closed-form plans and cached controlled-Z plans (both parities) at
/// every oracle squeezing value.
pub fn cataloged_plans(table: &BasisTable) -> Result<Vec<GatePlan>> {
    let mut plans = Vec::new();
    for r in ORACLE_R {
        plans.extend(closed_form_catalog(r)?);
        let db = oracle_db(r);
        for lattice in CACHED_LATTICES {
            if table.lookup(lattice, false, db).is_none() {
                return Err(CliError::CacheMiss { lattice, db, variable_theta_c: false });
            }
            for var in [false, true] {
                let Some(row) = table.lookup(lattice, var, db) else { continue };
                for parity in [0, 1] {
                    plans.push(cz_plan(lattice, r, parity, &row.angles, var)?);
                }
            }
        }
    }
    Ok(plans)
}

pub fn run(table: &BasisTable, tol: f64) -> Result<VerifySummary> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let plans = cataloged_plans(table)?;
    let plans: Vec<VerifyReport> = plans.par_iter().map(|p| Ok(verify_plan(p, tol)?)).collect::<Result<_>>()?;
    let cache_rows: Vec<RowCheck> = table.rows.par_iter().map(check_row).collect::<Result<_>>()?;
    let mut wigner = Vec::new();
    for lattice in CACHED_LATTICES {
        for r in WIGNER_R {
            let spec = default_grid(r, WIGNER_PROBE)?;
            wigner.push(wigner_limit_check(lattice, r, WIGNER_PROBE, &spec)?);
        }
    }
    let failures = plans.iter().filter(|p| !p.pass).count()
        + cache_rows.iter().filter(|c| !c.pass).count()
        + wigner.iter().filter(|w| !w.pass).count();
    Ok(VerifySummary { tol, plans, cache_rows, wigner, failures, pass: failures == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_a_cache_miss() {
        let err = run(&BasisTable::new(), 1e-9).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(run(&BasisTable::new(), -1.0).is_err());
    }

    #[test]
    fn oracle_keys() {
        assert_eq!(oracle_db(1.0), 8.685889638);
    }
}
