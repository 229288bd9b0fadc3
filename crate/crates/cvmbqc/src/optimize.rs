//! Controlled-Z basis optimization over a squeezing grid.
//!
//! Every point is searched independently (in parallel), then two
//! sequential passes offer each point its neighbours' solutions as extra
//! starts. Both stages are deterministic for a fixed seed.

use std::f64::consts::FRAC_PI_4;

use cvmbqc_core::gates::{
    cz_expected, cz_plan, dbsl_asymptotic_cz_angles, qrl_cz_plan, BasisTable, CacheRow,
};
use cvmbqc_core::gkp::gate_error_probability;
use cvmbqc_core::lattice::{cz_region_graph, db_to_r, ComputationGraph, ControlBasis, Lattice, LatticeParams};
use cvmbqc_core::optimizer::{search, OptResult, OptimizerConfig};
use cvmbqc_core::reduction::reduce;
use cvmbqc_core::SymplecticMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Outcome at one squeezing point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub squeezing_db: f64,
    pub accepted: bool,
    pub residual: f64,
    pub perr: f64,
    /// Why nothing was found, when the search itself failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub lattice: Lattice,
    pub variable_theta_c: bool,
    pub points: Vec<PointReport>,
    /// Rows to store; infeasible points are left out.
    #[serde(skip)]
    pub rows: Vec<CacheRow>,
}

impl OptimizeReport {
    pub fn infeasible(&self) -> usize {
        self.points.iter().filter(|p| !p.accepted).count()
    }
}

/// Region graph and target searched at one point.
///
/// On the quad-rail lattice only the coupling step is free; the
/// compensation step is folded into the target.
pub fn problem(lattice: Lattice, r: f64, variable_theta_c: bool) -> Result<(ComputationGraph, SymplecticMatrix)> {
    if variable_theta_c && lattice != Lattice::Dbsl {
        return Err(CliError::Usage(format!("--variable-theta-c applies to DBSL only, not {lattice}")));
    }
    match lattice {
        Lattice::Teleport => Err(CliError::Usage("the teleportation chain has no controlled-Z".into())),
        Lattice::Qrl => {
            let plan = qrl_cz_plan(r)?;
            let comp = &plan.steps[1];
            let comp_g = reduce(&comp.graph, &comp.basis)?.g;
            Ok((plan.steps[0].graph.clone(), &comp_g.inverse() * &plan.expected))
        }
        _ => {
            let mut graph = cz_region_graph(LatticeParams::new(lattice, r)?, 0)?.remove(0);
            if variable_theta_c {
                graph = graph.with_control_basis(ControlBasis::Free);
            }
            Ok((graph, cz_expected(lattice, 0)?))
        }
    }
}

/// Residual and `P_err` of parameters through the full gate plan.
pub fn evaluate_params(lattice: Lattice, r: f64, params: &[f64], variable_theta_c: bool) -> Result<(f64, f64)> {
    let plan = if lattice == Lattice::Qrl {
        let mut plan = qrl_cz_plan(r)?;
        plan.steps[0].basis = plan.steps[0].graph.basis_from_params(params)?;
        plan
    } else {
        cz_plan(lattice, r, 0, params, variable_theta_c)?
    };
    Ok((plan.residual()?, gate_error_probability(&plan)?))
}

/// Closed-form starting points for a lattice.
pub fn default_warm_starts(lattice: Lattice, variable_theta_c: bool) -> Vec<Vec<f64>> {
    match lattice {
        Lattice::Dbsl => {
            let mut w = dbsl_asymptotic_cz_angles(1.0, 0).to_vec();
            if variable_theta_c {
                w.push(FRAC_PI_4);
            }
            vec![w]
        }
        _ => Vec::new(),
    }
}

fn better(new: &OptResult, old: &Option<OptResult>) -> bool {
    match old {
        None => true,
        Some(o) => (new.accepted && !o.accepted) || (new.accepted == o.accepted && new.perr < o.perr),
    }
}

/// Searches every point of `dbs` and returns rows for the accepted ones.
///
/// `table` supplies extra starts: the same point's existing row and, for
/// a variable control angle, the fixed-angle row with `π/4` appended.
pub fn optimize(
    lattice: Lattice,
    dbs: &[f64],
    variable_theta_c: bool,
    config: &OptimizerConfig,
    table: &BasisTable,
) -> Result<OptimizeReport> {
    config.validate()?;
    if dbs.is_empty() {
        return Err(CliError::Usage("no squeezing points".into()));
    }
    let mut dbs = dbs.to_vec();
    dbs.sort_by(f64::total_cmp);
    dbs.dedup();
    // fail fast on an unsupported combination
    problem(lattice, 1.0, variable_theta_c)?;

    let run = |db: f64, extra: Vec<Vec<f64>>, restarts: usize, reference: Option<Vec<f64>>| -> Result<OptResult> {
        let r = db_to_r(db);
        let (graph, default_target) = problem(lattice, r, variable_theta_c)?;
        let target = config.target.clone().unwrap_or(default_target);
        let n = graph.n_params();
        let mut cfg = config.clone();
        cfg.restarts = restarts;
        cfg.warm_starts = extra.into_iter().chain(config.warm_starts.clone()).filter(|w| w.len() == n).collect();
        cfg.reference = reference.or(cfg.reference);
        if cfg.restarts == 0 && cfg.warm_starts.is_empty() {
            cfg.restarts = 1;
        }
        Ok(search(&graph, &target, &cfg)?)
    };
    let table_starts = |db: f64| -> Vec<Vec<f64>> {
        let mut w = default_warm_starts(lattice, variable_theta_c);
        if let Some(row) = table.lookup(lattice, variable_theta_c, db) {
            w.push(row.angles.clone());
        }
        if variable_theta_c {
            if let Some(row) = table.lookup(lattice, false, db) {
                w.push(row.angles.iter().copied().chain([FRAC_PI_4]).collect());
            }
        }
        w
    };

    let first: Vec<std::result::Result<OptResult, String>> = dbs
        .par_iter()
        .map(|&db| run(db, table_starts(db), config.restarts, None).map_err(|e| e.to_string()))
        .collect();
    let mut best: Vec<Option<OptResult>> = first.iter().map(|r| r.as_ref().ok().cloned()).collect();
    let errors: Vec<Option<String>> = first.into_iter().map(|r| r.err()).collect();

    // continuation: forward, then backward
    let order: Vec<usize> = (0..dbs.len()).chain((0..dbs.len()).rev()).collect();
    for (k, &i) in order.iter().enumerate() {
        let prev = if k < dbs.len() { i.checked_sub(1) } else { Some(i + 1).filter(|&j| j < dbs.len()) };
        let Some(p) = prev.and_then(|j| best[j].clone()).filter(|p| p.accepted) else { continue };
        let mut starts = vec![p.params.clone()];
        if let Some(own) = &best[i] {
            starts.push(own.params.clone());
        }
        let reference = config.continuity.then(|| p.params.clone());
        if let Ok(res) = run(dbs[i], starts, 0, reference) {
            if better(&res, &best[i]) || config.continuity && res.accepted {
                best[i] = Some(res);
            }
        }
    }

    let mut points = Vec::new();
    let mut rows = Vec::new();
    for ((db, res), err) in dbs.iter().zip(best).zip(errors) {
        match res {
            Some(res) => {
                let r = db_to_r(*db);
                // stored values come from the full plan, not the search graph
                let (residual, perr) = evaluate_params(lattice, r, &res.params, variable_theta_c)?;
                let accepted = res.accepted && residual < config.residual_tol;
                if accepted {
                    rows.push(CacheRow {
                        lattice,
                        variable_theta_c,
                        squeezing_db: *db,
                        angles: res.params,
                        residual,
                        perr,
                    });
                }
                points.push(PointReport { squeezing_db: *db, accepted, residual, perr, error: None });
            }
            None => points.push(PointReport {
                squeezing_db: *db,
                accepted: false,
                residual: f64::INFINITY,
                perr: 1.0,
                error: err,
            }),
        }
    }
    Ok(OptimizeReport { lattice, variable_theta_c, points, rows })
}

/// Adds the report's rows to `table`, replacing rows at the same points.
pub fn merge(table: &mut BasisTable, report: &OptimizeReport) {
    for row in &report.rows {
        table.upsert(row.clone());
    }
}
