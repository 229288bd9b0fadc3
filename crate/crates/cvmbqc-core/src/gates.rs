//! Catalog of basis settings and gate plans.
//!
//! Single-mode gates have closed forms on every lattice. Controlled-Z plans
//! have a closed form only on the quad-rail lattice; the others come from
//! the optimizer and are stored in a [`BasisTable`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    cz_region_graph, qrl_step, single_step_graph, teleport_graph, BasisSetting, ComputationGraph, ControlBasis, Lattice,
    LatticeParams,
};
use crate::reduction::{reduce_steps, GateResult};
use crate::symplectic::{compose, gaussian_unitary, Gaussian, SymplecticMatrix};

/// Acceptance threshold on `‖G - T‖₁` for optimized plans.
pub const PLAN_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateId {
    I,
    F,
    P1,
    #[serde(rename = "CZ")]
    Cz,
    #[serde(rename = "FFCZ")]
    Ffcz,
    #[serde(rename = "SWAP")]
    Swap,
    #[serde(rename = "S_INV_T")]
    SInvT,
}

impl GateId {
    pub const ALL: [GateId; 7] = [GateId::I, GateId::F, GateId::P1, GateId::Cz, GateId::Ffcz, GateId::Swap, GateId::SInvT];

    pub fn name(self) -> &'static str {
        match self {
            GateId::I => "I",
            GateId::F => "F",
            GateId::P1 => "P1",
            GateId::Cz => "CZ",
            GateId::Ffcz => "FFCZ",
            GateId::Swap => "SWAP",
            GateId::SInvT => "S_INV_T",
        }
    }

    pub fn is_single_mode(self) -> bool {
        matches!(self, GateId::I | GateId::F | GateId::P1)
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateId::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unsupported(format!("unknown gate '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub graph: ComputationGraph,
    pub basis: BasisSetting,
}

/// A gate realized as a sequence of measured regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePlan {
    pub lattice: Lattice,
    pub gate_id: GateId,
    pub r: f64,
    pub parity: u8,
    pub steps: Vec<PlanStep>,
    /// Gate that accompanies the target, e.g. `F ⊗ F` on a controlled-Z.
    pub byproduct: SymplecticMatrix,
    /// `byproduct · target`: what the chained steps must implement.
    pub expected: SymplecticMatrix,
    /// Output modes read off the chained result; `None` keeps all.
    pub observed_modes: Option<Vec<usize>>,
}

impl GatePlan {
    pub fn label(&self) -> String {
        format!("{}/{}/p{}", self.lattice, self.gate_id, self.parity)
    }

    pub fn evaluate(&self) -> Result<GateResult> {
        let steps: Vec<_> = self.steps.iter().map(|s| (s.graph.clone(), s.basis.clone())).collect();
        let res = reduce_steps(&steps)?;
        match &self.observed_modes {
            Some(m) => res.restrict(m),
            None => Ok(res),
        }
    }

    /// `‖G - expected‖₁` of the chained steps.
    pub fn residual(&self) -> Result<f64> {
        self.evaluate()?.g.l1_distance(&self.expected)
    }
}

/// Fourier power `F^k = R(kπ/2)`.
fn fourier(k: i32) -> SymplecticMatrix {
    gaussian_unitary(Gaussian::Rotation(f64::from(k) * FRAC_PI_2)).expect("rotation is always valid")
}

/// Target gates built from the elementary operations. `signs` gives the
/// Fourier exponents `(n, m)` of `(F^n ⊗ F^m) C_Z(1)`.
pub fn target_symplectic(gate_id: GateId, signs: (i32, i32)) -> Result<SymplecticMatrix> {
    let g = |k| gaussian_unitary(k).expect("valid elementary gate");
    Ok(match gate_id {
        GateId::I => g(Gaussian::Identity),
        GateId::F => fourier(1),
        GateId::P1 => g(Gaussian::Shear(1.0)),
        GateId::Cz => g(Gaussian::Cz(1.0)),
        GateId::Ffcz => compose(&[g(Gaussian::Cz(1.0)), fourier(signs.0).direct_sum(&fourier(signs.1))])?,
        GateId::Swap => {
            let mut m = nalgebra::DMatrix::zeros(4, 4);
            for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
                m[(i, j)] = 1.0;
            }
            SymplecticMatrix::from_matrix_unchecked(m)
        }
        GateId::SInvT => return Err(Error::Unsupported("S(1/t) depends on the squeezing; use basis_for".into())),
    })
}

/// Two-mode squeezer `S(s) ⊗ S(s)`.
fn squeeze_pair(s: f64) -> Result<SymplecticMatrix> {
    let one = gaussian_unitary(Gaussian::Squeeze(s))?;
    Ok(one.direct_sum(&one))
}

/// Signed squeeze `t'` of one computation step at the lattice's default
/// control basis.
pub fn step_squeeze(params: &LatticeParams, parity: u8) -> f64 {
    let t = params.t;
    let s = if parity == 0 { 1.0 } else { -1.0 };
    match params.lattice {
        Lattice::Teleport | Lattice::Qrl => t,
        Lattice::Dbsl => s * 4.0 * t * t,
        // temporal index 50 + parity, sign (-1)^{k+1}
        Lattice::Bsl => -s * 2.0 * t * t,
        Lattice::Mbsl => 2.0 * t,
    }
}

/// Angles `(θ_in, θ_anc)` of a step from `(θ+, θ-)`.
pub fn split_sum_difference(theta_plus: f64, theta_minus: f64) -> (f64, f64) {
    ((theta_plus + theta_minus) / 2.0, (theta_plus - theta_minus) / 2.0)
}

/// Closed-form `(θ+, θ-)` per step for a single-mode gate with step squeeze `tq`.
pub fn single_mode_angles(gate_id: GateId, tq: f64) -> Result<Vec<(f64, f64)>> {
    let a2 = libm::atan(2.0);
    Ok(match gate_id {
        GateId::I => alloc::vec![(0.0, 2.0 * libm::atan(1.0 / tq))],
        GateId::F => alloc::vec![(FRAC_PI_2, FRAC_PI_2), (0.0, 2.0 * libm::atan(1.0 / (tq * tq)))],
        GateId::P1 => alloc::vec![(a2, -a2), (FRAC_PI_2, FRAC_PI_2)],
        _ => return Err(Error::Unsupported(format!("{gate_id} is not a single-mode gate"))),
    })
}

fn single_step(params: LatticeParams, parity: u8) -> Result<ComputationGraph> {
    match params.lattice {
        Lattice::Teleport => Ok(teleport_graph(params)),
        l => single_step_graph(params, parity, ControlBasis::Fixed(l.default_theta_c())),
    }
}

fn step_basis(graph: &ComputationGraph, theta_plus: f64, theta_minus: f64) -> Result<BasisSetting> {
    let (tin, tanc) = split_sum_difference(theta_plus, theta_minus);
    let params: Vec<f64> = if graph.lattice == Lattice::Qrl {
        alloc::vec![tin, tin, tanc, tanc]
    } else {
        alloc::vec![tin, tanc]
    };
    graph.basis_from_params(&params)
}

fn params_for(lattice: Lattice, r: f64) -> Result<LatticeParams> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("closed-form plans need r > 0, got {r}")));
    }
    LatticeParams::new(lattice, r)
}

/// Closed-form plan for `I`, `F`, `P1` (and `S_INV_T` on QRL).
pub fn basis_for(lattice: Lattice, gate_id: GateId, r: f64, parity: u8) -> Result<GatePlan> {
    let params = params_for(lattice, r)?;
    if gate_id == GateId::SInvT {
        if lattice != Lattice::Qrl {
            return Err(Error::Unsupported("S(1/t) compensation exists on QRL only".into()));
        }
        return qrl_compensation_plan(r);
    }
    let graph = single_step(params, parity)?;
    let tq = step_squeeze(&params, parity);
    let steps = single_mode_angles(gate_id, tq)?
        .into_iter()
        .map(|(tp, tm)| Ok(PlanStep { basis: step_basis(&graph, tp, tm)?, graph: graph.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let expected = target_symplectic(gate_id, (0, 0))?;
    Ok(GatePlan {
        lattice,
        gate_id,
        r,
        parity,
        steps,
        byproduct: SymplecticMatrix::identity(1),
        expected,
        observed_modes: (lattice == Lattice::Qrl).then(|| alloc::vec![0]),
    })
}

fn qrl_compensation_basis(graph: &ComputationGraph, t: f64) -> Result<BasisSetting> {
    step_basis(graph, 0.0, 2.0 * libm::atan(1.0 / (t * t)))
}

/// Straight QRL step that undoes the `S(t)` left by the coupling step.
pub fn qrl_compensation_plan(r: f64) -> Result<GatePlan> {
    let params = params_for(Lattice::Qrl, r)?;
    let graph = qrl_step(params, false);
    let basis = qrl_compensation_basis(&graph, params.t)?;
    Ok(GatePlan {
        lattice: Lattice::Qrl,
        gate_id: GateId::SInvT,
        r,
        parity: 0,
        steps: alloc::vec![PlanStep { graph, basis }],
        byproduct: SymplecticMatrix::identity(2),
        expected: squeeze_pair(1.0 / params.t)?,
        observed_modes: None,
    })
}

/// Quad-rail controlled-Z: one crossed coupling step followed by the
/// compensation step, implementing `(F ⊗ F) C_Z(1)`.
pub fn qrl_cz_plan(r: f64) -> Result<GatePlan> {
    let params = params_for(Lattice::Qrl, r)?;
    let steps = cz_region_graph(params, 0)?;
    let half = libm::atan(0.5);
    // free order on the crossed step is (A, B, C, D)
    let coupling = steps[0].basis_from_params(&[FRAC_PI_2 + half, 0.0, FRAC_PI_2 - half, 0.0])?;
    let compensation = qrl_compensation_basis(&steps[1], params.t)?;
    let byproduct = fourier(1).direct_sum(&fourier(1));
    Ok(GatePlan {
        lattice: Lattice::Qrl,
        gate_id: GateId::Ffcz,
        r,
        parity: 0,
        steps: alloc::vec![
            PlanStep { graph: steps[0].clone(), basis: coupling },
            PlanStep { graph: steps[1].clone(), basis: compensation },
        ],
        byproduct,
        expected: target_symplectic(GateId::Ffcz, (1, 1))?,
        observed_modes: None,
    })
}

/// Squeezing-independent DBSL wire swap; the chained gate is
/// `SWAP (F ⊗ F)`.
pub fn dbsl_swap_plan(r: f64) -> Result<GatePlan> {
    let params = params_for(Lattice::Dbsl, r)?;
    let graph = cz_region_graph(params, 0)?.remove(0);
    let q = FRAC_PI_4;
    let angles = [q, -q, q, -q, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0];
    let basis = graph.basis_from_params(&angles)?;
    let byproduct = fourier(1).direct_sum(&fourier(1));
    let expected = compose(&[byproduct.clone(), target_symplectic(GateId::Swap, (0, 0))?])?;
    Ok(GatePlan {
        lattice: Lattice::Dbsl,
        gate_id: GateId::Swap,
        r,
        parity: 0,
        steps: alloc::vec![PlanStep { graph, basis }],
        byproduct,
        expected,
        observed_modes: None,
    })
}

/// Fourier exponents of the controlled-Z by-product for even-parity
/// solutions stored in the cache.
pub fn cz_byproduct_exponents(lattice: Lattice, parity: u8) -> (i32, i32) {
    let alt = if parity == 0 { 1 } else { -1 };
    match lattice {
        Lattice::Dbsl => (1, alt),
        // (-1)^{k+1} with temporal index k = 50 + parity
        Lattice::Bsl => (1, -alt),
        _ => (1, 1),
    }
}

/// Zero-based positions flipped to carry an even-parity DBSL solution to odd
/// parity. Controlled-Z plans also try the other member of each joint pair,
/// see [`cz_plan`].
pub const DBSL_ODD_FLIPS: [usize; 6] = [2, 3, 5, 6, 7, 9];

/// Maps even-parity angles to the odd-parity region.
///
/// On the BSL every angle is negated. The flipped plan implements the
/// even-parity gate conjugated by the momentum reflection, which equals
/// `(F ⊗ F) C_Z(1) (R(π) ⊗ I)`. `R(π)` is the parity operator and acts as the
/// logical identity on square-lattice GKP qubits.
pub fn flip_for_parity(lattice: Lattice, angles: &[f64]) -> Vec<f64> {
    let mut out = angles.to_vec();
    match lattice {
        Lattice::Dbsl => {
            for &i in &DBSL_ODD_FLIPS {
                if let Some(a) = out.get_mut(i) {
                    *a = -*a;
                }
            }
        }
        Lattice::Bsl => out.iter_mut().for_each(|a| *a = -*a),
        _ => {}
    }
    out
}

/// Gate implemented by a cached controlled-Z plan.
pub fn cz_expected(lattice: Lattice, parity: u8) -> Result<SymplecticMatrix> {
    if lattice == Lattice::Bsl && parity == 1 {
        let pi = gaussian_unitary(Gaussian::Rotation(PI))?.direct_sum(&SymplecticMatrix::identity(1));
        return compose(&[pi, target_symplectic(GateId::Ffcz, (1, 1))?]);
    }
    target_symplectic(GateId::Ffcz, cz_byproduct_exponents(lattice, parity))
}

/// Controlled-Z plan from even-parity angles (plus a trailing control
/// angle when `variable_theta_c`).
pub fn cz_plan(lattice: Lattice, r: f64, parity: u8, angles: &[f64], variable_theta_c: bool) -> Result<GatePlan> {
    if lattice == Lattice::Qrl {
        return qrl_cz_plan(r);
    }
    let params = LatticeParams::new(lattice, r)?;
    let mut graph = cz_region_graph(params, parity)?.remove(0);
    if variable_theta_c {
        graph.control_basis = ControlBasis::Free;
    }
    let expected = cz_expected(lattice, parity)?;
    let basis = if parity == 0 {
        graph.basis_from_params(angles)?
    } else if lattice == Lattice::Dbsl {
        dbsl_odd_basis(&graph, angles, &expected)?
    } else {
        graph.basis_from_params(&flip_for_parity(lattice, angles))?
    };
    let cz_inv = target_symplectic(GateId::Cz, (0, 0))?.inverse();
    Ok(GatePlan {
        lattice,
        gate_id: GateId::Ffcz,
        r,
        parity,
        steps: alloc::vec![PlanStep { graph, basis }],
        byproduct: &expected * &cz_inv,
        expected,
        observed_modes: None,
    })
}

/// Odd-parity DBSL basis. Each joint pair, (4, 5) and (8, 9), admits two
/// solution families that differ in which member carries the sign flip.
/// Tries [`DBSL_ODD_FLIPS`] first, then the other pair choices, and keeps
/// the first that reproduces the expected gate.
fn dbsl_odd_basis(graph: &ComputationGraph, angles: &[f64], expected: &SymplecticMatrix) -> Result<BasisSetting> {
    let primary = graph.basis_from_params(&flip_for_parity(Lattice::Dbsl, angles))?;
    let mut best: Option<(f64, BasisSetting)> = None;
    for (a, b) in [(5, 9), (4, 8), (4, 9), (5, 8)] {
        let mut flipped = angles.to_vec();
        for i in [2, 3, 6, 7, a, b] {
            if let Some(v) = flipped.get_mut(i) {
                *v = -*v;
            }
        }
        let basis = graph.basis_from_params(&flipped)?;
        let Ok(res) = reduce_steps(&[(graph.clone(), basis.clone())]).and_then(|g| g.g.l1_distance(expected)) else {
            continue;
        };
        if res < PLAN_TOL {
            return Ok(basis);
        }
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, basis));
        }
    }
    Ok(best.map_or(primary, |(_, b)| b))
}

/// Angles of the infinite-squeezing DBSL construction that tends to
/// `(R(π/4) ⊗ R(π/4)) C_Z(g)` on wire parity `parity`.
pub fn dbsl_asymptotic_cz_angles(g: f64, parity: u8) -> [f64; 10] {
    let s = if parity == 0 { 1.0 } else { -1.0 };
    let at = libm::atan(g / 2.0);
    let p = PI;
    [
        s * 3.0 * p / 8.0,
        -s * p / 8.0,
        s * 3.0 * p / 8.0,
        -s * p / 8.0,
        s * p / 4.0 - at,
        -s * p / 4.0,
        s * p / 4.0 + at,
        s * p / 4.0 + at,
        s * p / 4.0 - at,
        -s * p / 4.0,
    ]
}

/// One optimized controlled-Z basis at one squeezing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRow {
    pub lattice: Lattice,
    /// Control angle optimized as a trailing parameter.
    #[serde(default)]
    pub variable_theta_c: bool,
    #[serde(rename = "squeezing_dB")]
    pub squeezing_db: f64,
    pub angles: Vec<f64>,
    pub residual: f64,
    pub perr: f64,
}

/// Versioned table of optimized controlled-Z bases (even parity).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BasisTable {
    pub version: u32,
    pub rows: Vec<CacheRow>,
}

/// Two squeezing values closer than this are the same table entry.
pub const DB_MATCH_TOL: f64 = 1e-6;

impl BasisTable {
    pub const VERSION: u32 = 1;

    pub fn new() -> Self {
        Self { version: Self::VERSION, rows: Vec::new() }
    }

    pub fn lookup(&self, lattice: Lattice, variable_theta_c: bool, squeezing_db: f64) -> Option<&CacheRow> {
        self.rows.iter().find(|r| {
            r.lattice == lattice
                && r.variable_theta_c == variable_theta_c
                && libm::fabs(r.squeezing_db - squeezing_db) < DB_MATCH_TOL
        })
    }

    /// Inserts or replaces the row with the same key, keeping rows sorted.
    pub fn upsert(&mut self, row: CacheRow) {
        self.rows.retain(|r| {
            !(r.lattice == row.lattice
                && r.variable_theta_c == row.variable_theta_c
                && libm::fabs(r.squeezing_db - row.squeezing_db) < DB_MATCH_TOL)
        });
        self.rows.push(row);
        self.rows.sort_by(|a, b| {
            (a.lattice, a.variable_theta_c)
                .cmp(&(b.lattice, b.variable_theta_c))
                .then(a.squeezing_db.total_cmp(&b.squeezing_db))
        });
    }

    /// Plan for a cached row at either parity.
    pub fn plan(&self, lattice: Lattice, variable_theta_c: bool, squeezing_db: f64, parity: u8) -> Result<GatePlan> {
        let row = self.lookup(lattice, variable_theta_c, squeezing_db).ok_or_else(|| {
            Error::InvalidParameter(format!("no cached {lattice} basis at {squeezing_db} dB"))
        })?;
        cz_plan(lattice, crate::lattice::db_to_r(row.squeezing_db), parity, &row.angles, variable_theta_c)
    }
}

/// Every closed-form plan at `r`.
pub fn closed_form_catalog(r: f64) -> Result<Vec<GatePlan>> {
    let mut out = Vec::new();
    for lattice in Lattice::ALL {
        let parities: &[u8] = match lattice {
            Lattice::Dbsl | Lattice::Bsl => &[0, 1],
            _ => &[0],
        };
        for &parity in parities {
            for gate in [GateId::I, GateId::F, GateId::P1] {
                out.push(basis_for(lattice, gate, r, parity)?);
            }
        }
    }
    out.push(qrl_compensation_plan(r)?);
    out.push(qrl_cz_plan(r)?);
    out.push(dbsl_swap_plan(r)?);
    Ok(out)
}
