//! Search for homodyne bases that implement a target gate with the lowest
//! GKP error probability.
//!
//! Each restart runs three local stages. Levenberg-Marquardt projects the
//! start onto `G = T`. A simplex search on `‖G - T‖₁ + w ln P_err` then runs
//! for every weight, each result projected again. Where the solutions form a
//! manifold, `ln P_err` is finally descended along it. Restarts are
//! independent and seeded by index, so adding restarts never loses a
//! solution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::PLAN_TOL;
use crate::gkp::{error_probability, propagate_spikes, spike_variance};
use crate::lattice::{BasisSetting, ComputationGraph};
use crate::reduction::Reducer;
use crate::symplectic::SymplecticMatrix;

fn default_weights() -> Vec<f64> {
    (0..5).map(|i| libm::pow(10.0, -8.0 + 2.0 * i as f64)).collect()
}
fn default_restarts() -> usize {
    200
}
fn default_residual_tol() -> f64 {
    PLAN_TOL
}
fn default_bounds() -> (f64, f64) {
    (-PI, PI)
}
fn default_local_tol() -> f64 {
    1e-12
}
fn default_local_max_evals() -> usize {
    600
}
fn default_manifold_iters() -> usize {
    60
}

/// Search settings. Every field has a default, so a JSON file only needs
/// the ones it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Gate to implement; when absent the caller supplies it.
    #[serde(default)]
    pub target: Option<SymplecticMatrix>,
    /// Weights `w` of the simplex stage.
    #[serde(default = "default_weights")]
    pub weight_grid: Vec<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    /// Range of random starting angles.
    #[serde(default = "default_bounds")]
    pub angle_bounds: (f64, f64),
    /// Simplex spread and step-size floor of the local stages.
    #[serde(default = "default_local_tol")]
    pub local_tol: f64,
    /// Objective evaluations per simplex run.
    #[serde(default = "default_local_max_evals")]
    pub local_max_evals: usize,
    /// Iterations of the manifold descent; 0 disables it.
    #[serde(default = "default_manifold_iters")]
    pub manifold_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra starting points tried before the random ones.
    #[serde(default)]
    pub warm_starts: Vec<Vec<f64>>,
    /// Prefer the accepted solution nearest to `reference` over the one
    /// with the lowest `P_err`.
    #[serde(default)]
    pub continuity: bool,
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            target: None,
            weight_grid: default_weights(),
            restarts: default_restarts(),
            residual_tol: default_residual_tol(),
            angle_bounds: default_bounds(),
            local_tol: default_local_tol(),
            local_max_evals: default_local_max_evals(),
            manifold_iters: default_manifold_iters(),
            seed: 0,
            warm_starts: Vec::new(),
            continuity: false,
            reference: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weight_grid.is_empty() || self.weight_grid.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("weight grid must be nonempty and positive".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("residual tolerance {}", self.residual_tol)));
        }
        let (lo, hi) = self.angle_bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("angle bounds ({lo}, {hi})")));
        }
        if self.restarts == 0 && self.warm_starts.is_empty() {
            return Err(Error::InvalidParameter("no starting points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Free parameters in the graph's canonical order.
    pub params: Vec<f64>,
    /// Full basis including control modes.
    pub angles: BasisSetting,
    pub residual: f64,
    pub perr: f64,
    pub accepted: bool,
    pub restarts_used: usize,
}

/// Wraps an angle into `[-π/2, π/2)`. Homodyne angles matter modulo π: a
/// rotation by π only flips the sign of the outcome.
pub fn canonical_angle(a: f64) -> f64 {
    crate::rem_euclid(a + FRAC_PI_2, PI) - FRAC_PI_2
}

/// Distance between angle vectors modulo π.
pub fn angle_distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = canonical_angle(x - y);
                d * d
            })
            .sum::<f64>(),
    )
}

/// Gate residual and error probability of parameter vectors on one graph.
pub struct Evaluator {
    reducer: Reducer,
    target: DMatrix<f64>,
    delta: f64,
    half_eps: f64,
}

/// `(G - T)` entries, `‖G - T‖₁` and `P_err` at one point.
#[derive(Debug, Clone)]
pub struct Point {
    pub diff: DVector<f64>,
    pub residual: f64,
    pub perr: f64,
}

impl Evaluator {
    pub fn new(graph: &ComputationGraph, target: &SymplecticMatrix) -> Result<Self> {
        let reducer = Reducer::new(graph)?;
        let k = 2 * graph.input_modes.len();
        if target.matrix().nrows() != k {
            return Err(Error::Dimension { expected: k, found: target.matrix().nrows() });
        }
        Ok(Self {
            reducer,
            target: target.matrix().clone(),
            delta: spike_variance(graph.r),
            half_eps: graph.epsilon / 2.0,
        })
    }

    pub fn graph(&self) -> &ComputationGraph {
        self.reducer.graph()
    }

    pub fn n_params(&self) -> usize {
        self.graph().n_params()
    }

    pub fn point(&self, params: &[f64]) -> Result<Point> {
        let basis = self.graph().basis_from_params(params)?;
        let (g, n) = self.reducer.gate_and_noise(&basis)?;
        let diff = g - &self.target;
        let residual = diff.iter().map(|v| libm::fabs(*v)).sum();
        let sigma2: Vec<f64> = n.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() * self.half_eps).collect();
        let spikes = propagate_spikes(&(&diff + &self.target), &sigma2, self.delta)?;
        let perr = error_probability(&spikes, self.delta)?;
        Ok(Point { diff: DVector::from_column_slice(diff.as_slice()), residual, perr })
    }

    /// `‖G - T‖₁ + w ln P_err`, `+∞` where the basis is degenerate.
    pub fn objective(&self, params: &[f64], w: f64) -> f64 {
        match self.point(params) {
            Ok(p) if p.perr > 0.0 => p.residual + w * libm::log(p.perr),
            _ => f64::INFINITY,
        }
    }

    fn residual_vec(&self, params: &[f64]) -> Option<DVector<f64>> {
        self.point(params).ok().map(|p| p.diff)
    }

    fn log_perr(&self, params: &[f64]) -> Option<f64> {
        self.point(params).ok().filter(|p| p.perr > 0.0).map(|p| libm::log(p.perr))
    }

    /// Central-difference Jacobian of the residual entries.
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let h = 1e-7;
        let m = self.target.len();
        let mut j = DMatrix::zeros(m, x.len());
        let mut y = x.to_vec();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = self.residual_vec(&y)?;
            y[i] = x[i] - h;
            let fm = self.residual_vec(&y)?;
            y[i] = x[i];
            j.set_column(i, &((fp - fm) / (2.0 * h)));
        }
        Some(j)
    }

    fn log_perr_gradient(&self, x: &[f64]) -> Option<DVector<f64>> {
        let h = 1e-6;
        let mut y = x.to_vec();
        let mut g = DVector::zeros(x.len());
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = self.log_perr(&y)?;
            y[i] = x[i] - h;
            let fm = self.log_perr(&y)?;
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Some(g)
    }

    /// Levenberg-Marquardt on `G - T = 0` from `x0`.
    pub fn project(&self, x0: &[f64], max_iter: usize) -> Option<Vec<f64>> {
        let mut x = x0.to_vec();
        let mut r = self.residual_vec(&x)?;
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..max_iter {
            if cost < 1e-28 {
                break;
            }
            let j = self.jacobian(&x)?;
            let jt = j.transpose();
            let jtj = &jt * &j;
            let grad = &jt * &r;
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&grad));
                let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                match self.residual_vec(&y) {
                    Some(ry) if ry.norm_squared() < cost => {
                        let small = step.norm() < 1e-15 * (1.0 + DVector::from_column_slice(&x).norm());
                        x = y;
                        cost = ry.norm_squared();
                        r = ry;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = !small;
                        break;
                    }
                    _ => lambda *= 4.0,
                }
            }
            if !improved {
                break;
            }
        }
        Some(x)
    }

    /// Descends `ln P_err` within the solution set through `x`, keeping the
    /// residual below `tol`.
    pub fn manifold_descent(&self, x0: &[f64], iters: usize, tol: f64) -> Vec<f64> {
        let mut x = x0.to_vec();
        let Some(mut cur) = self.log_perr(&x) else { return x };
        let mut step = 0.1;
        for _ in 0..iters {
            let (Some(j), Some(g)) = (self.jacobian(&x), self.log_perr_gradient(&x)) else { break };
            let svd = j.svd(false, true);
            let Some(vt) = svd.v_t else { break };
            let smax = svd.singular_values.max();
            let n = x.len();
            // right singular vectors with negligible singular value, plus
            // the directions beyond the row count
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for (i, s) in svd.singular_values.iter().enumerate() {
                if *s < 1e-8 * smax {
                    basis.push(vt.row(i).transpose());
                }
            }
            if vt.nrows() < n {
                // complete the null space by Gram-Schmidt on unit vectors
                for e in 0..n {
                    let mut v = DVector::zeros(n);
                    v[e] = 1.0;
                    for i in 0..vt.nrows() {
                        let row = vt.row(i).transpose();
                        v -= &row * row.dot(&v);
                    }
                    for b in &basis {
                        v -= b * b.dot(&v);
                    }
                    if v.norm() > 1e-6 {
                        basis.push(v.normalize());
                    }
                }
            }
            if basis.is_empty() {
                break;
            }
            let mut d = DVector::zeros(n);
            for b in &basis {
                d -= b * b.dot(&g);
            }
            let dn = d.norm();
            if dn < 1e-12 {
                break;
            }
            let mut moved = false;
            while step > 1e-10 {
                let y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b / dn).collect();
                if let Some(y) = self.project(&y, 60) {
                    if let Ok(p) = self.point(&y) {
                        if p.residual < tol && p.perr > 0.0 && libm::log(p.perr) < cur {
                            x = y;
                            cur = libm::log(p.perr);
                            step *= 1.5;
                            moved = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

/// Nelder-Mead minimization of `f` from `x0` with initial spread `scale`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], scale: f64, tol: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let mut evals = n + 1;
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Greater);
    while evals < max_evals {
        simplex.sort_by(by_value);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best.is_finite() && worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(0.5);
                let fx = f(&x);
                (x, fx)
            } else {
                let x = along(-0.5);
                let fx = f(&x);
                (x, fx)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink towards the best vertex
                let b = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = b.iter().zip(&item.0).map(|(bi, vi)| bi + 0.5 * (vi - bi)).collect();
                    let fv = f(&v);
                    *item = (v, fv);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(by_value);
    simplex.swap_remove(0)
}

/// A scored candidate.
#[derive(Debug, Clone)]
struct Candidate {
    params: Vec<f64>,
    residual: f64,
    perr: f64,
}

impl Candidate {
    fn at(ev: &Evaluator, params: Vec<f64>) -> Option<Self> {
        let params: Vec<f64> = params.into_iter().map(canonical_angle).collect();
        let p = ev.point(&params).ok()?;
        (p.residual.is_finite() && p.perr.is_finite()).then_some(Self { params, residual: p.residual, perr: p.perr })
    }
}

/// Total order used to pick the reported result.
fn rank(a: &Candidate, b: &Candidate, tol: f64, reference: Option<&[f64]>) -> Ordering {
    let acc = |c: &Candidate| c.residual < tol;
    match (acc(a), acc(b)) {
        (true, false) => return Ordering::Less,
        (false, true) => return Ordering::Greater,
        (false, false) => {
            return a.residual.total_cmp(&b.residual).then_with(|| a.perr.total_cmp(&b.perr));
        }
        (true, true) => {}
    }
    let by_distance = match reference {
        Some(r) => angle_distance(&a.params, r).total_cmp(&angle_distance(&b.params, r)),
        None => Ordering::Equal,
    };
    by_distance
        .then_with(|| a.perr.total_cmp(&b.perr))
        .then_with(|| a.residual.total_cmp(&b.residual))
        .then_with(|| {
            a.params
                .iter()
                .zip(&b.params)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Local stages from one start; the best candidate they reach.
fn polish(ev: &Evaluator, x0: &[f64], config: &OptimizerConfig) -> Option<Candidate> {
    let tol = config.residual_tol;
    let projected = ev.project(x0, 200)?;
    let mut best = Candidate::at(ev, projected.clone())?;
    // far from any solution: the weighted stage would only wander
    if best.residual > 1e3 * tol {
        return Some(best);
    }
    let consider = |c: Option<Candidate>, best: &mut Candidate| {
        if let Some(c) = c {
            if rank(&c, best, tol, None) == Ordering::Less {
                *best = c;
            }
        }
    };
    for &w in &config.weight_grid {
        let (xw, _) = nelder_mead(|x| ev.objective(x, w), &projected, 0.02, config.local_tol, config.local_max_evals);
        let c = ev.project(&xw, 200).and_then(|x| Candidate::at(ev, x));
        consider(c, &mut best);
    }
    if config.manifold_iters > 0 && best.residual < tol {
        let x = ev.manifold_descent(&best.params.clone(), config.manifold_iters, tol);
        consider(Candidate::at(ev, x), &mut best);
    }
    Some(best)
}

/// Starting point of random restart `index`.
pub fn restart_start(seed: u64, index: usize, n: usize, bounds: (f64, f64)) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n).map(|_| rng.random_range(bounds.0..bounds.1)).collect()
}

/// Best basis for `target` on `graph` over warm starts and random restarts.
pub fn search(graph: &ComputationGraph, target: &SymplecticMatrix, config: &OptimizerConfig) -> Result<OptResult> {
    config.validate()?;
    let ev = Evaluator::new(graph, target)?;
    let n = ev.n_params();
    for w in &config.warm_starts {
        if w.len() != n {
            return Err(Error::Dimension { expected: n, found: w.len() });
        }
    }
    let starts = config
        .warm_starts
        .iter()
        .cloned()
        .chain((0..config.restarts).map(|i| restart_start(config.seed, i, n, config.angle_bounds)));
    let reference = if config.continuity { config.reference.as_deref() } else { None };
    let mut best: Option<Candidate> = None;
    let mut used = 0;
    for x0 in starts {
        used += 1;
        if let Some(c) = polish(&ev, &x0, config) {
            let better = match &best {
                None => true,
                Some(b) => rank(&c, b, config.residual_tol, reference) == Ordering::Less,
            };
            if better {
                best = Some(c);
            }
        }
    }
    let best = best.ok_or(Error::MeasurementDegenerate { rcond: 0.0 })?;
    Ok(OptResult {
        angles: graph.basis_from_params(&best.params)?,
        accepted: best.residual < config.residual_tol,
        params: best.params,
        residual: best.residual,
        perr: best.perr,
        restarts_used: used,
    })
}

/// `‖G - T‖₁ + w ln P_err` for a full basis.
pub fn objective(graph: &ComputationGraph, basis: &BasisSetting, target: &SymplecticMatrix, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(format!("weight {w}")));
    }
    let ev = Evaluator::new(graph, target)?;
    let params: Vec<f64> = graph
        .free_modes
        .iter()
        .map(|m| basis.get(m).copied().ok_or(Error::MissingAngle(*m)))
        .chain(match graph.control_basis {
            crate::lattice::ControlBasis::Free => {
                let c = graph.controls.first().ok_or_else(|| Error::MalformedGraph("no controls".into()))?;
                vec![basis.get(&c.mode).map(|a| a * c.sign).ok_or(Error::MissingAngle(c.mode))]
            }
            crate::lattice::ControlBasis::Fixed(_) => vec![],
        })
        .collect::<Result<_>>()?;
    Ok(ev.objective(&params, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{basis_for, cz_expected, dbsl_asymptotic_cz_angles, qrl_cz_plan, GateId};
    use crate::gkp::gate_error_probability;
    use crate::lattice::{cz_region_graph, db_to_r, teleport_graph, Lattice, LatticeParams};
    use crate::symplectic::SymplecticMatrix;

    fn quick() -> OptimizerConfig {
        OptimizerConfig { restarts: 6, local_max_evals: 200, manifold_iters: 10, seed: 3, ..Default::default() }
    }

    #[test]
    fn config_defaults_and_validation() {
        let c: OptimizerConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, OptimizerConfig::default());
        assert_eq!(c.restarts, 200);
        assert_eq!(c.residual_tol, 1e-5);
        assert!((c.weight_grid[0] - 1e-8).abs() < 1e-20 && c.weight_grid[4] == 1.0);
        let bad = OptimizerConfig { weight_grid: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { weight_grid: vec![0.0], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn canonical_angles() {
        assert!((canonical_angle(PI) - 0.0).abs() < 1e-15);
        assert!((canonical_angle(0.75 * PI) + 0.25 * PI).abs() < 1e-15);
        assert_eq!(canonical_angle(-FRAC_PI_2), -FRAC_PI_2);
        assert!(angle_distance(&[0.1, -0.2], &[0.1 + PI, -0.2 - PI]) < 1e-14);
    }

    #[test]
    fn nelder_mead_quadratic() {
        let (x, f) = nelder_mead(|v| (v[0] - 1.0).powi(2) + 3.0 * (v[1] + 2.0).powi(2), &[0.0, 0.0], 0.5, 1e-14, 5000);
        assert!(f < 1e-10 && (x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn objective_at_exact_solution() {
        let r = 1.0;
        let plan = basis_for(Lattice::Teleport, GateId::I, r, 0);
        // teleportation plans go through the lattice catalog
        let plan = plan.unwrap();
        let g = &plan.steps[0].graph;
        let target = SymplecticMatrix::identity(1);
        let p = crate::gkp::GkpBudget::for_gate(&plan.evaluate().unwrap()).unwrap().perr;
        let w = 0.01;
        let f = objective(g, &plan.steps[0].basis, &target, w).unwrap();
        assert!((f - w * p.ln()).abs() < 1e-9);
        let mut b = plan.steps[0].basis.clone();
        *b.get_mut(&0).unwrap() += 1e-3;
        assert!(objective(g, &b, &target, w).unwrap() > f + 1e-6);
        assert!(objective(g, &b, &target, 0.0).is_err());
    }

    #[test]
    fn degenerate_basis_is_infinite() {
        let params = LatticeParams::teleport(0.5, 0.5).unwrap();
        let g = teleport_graph(params);
        let ev = Evaluator::new(&g, &SymplecticMatrix::identity(1)).unwrap();
        assert!(ev.objective(&[0.0, 0.0], 1.0).is_infinite());
    }

    #[test]
    fn teleport_identity_recovered() {
        let r = 0.8;
        let params = LatticeParams::new(Lattice::Teleport, r).unwrap();
        let g = teleport_graph(params);
        let res = search(&g, &SymplecticMatrix::identity(1), &quick()).unwrap();
        assert!(res.accepted, "{res:?}");
        let closed = gate_error_probability(&basis_for(Lattice::Teleport, GateId::I, r, 0).unwrap()).unwrap();
        assert!((res.perr - closed).abs() < 1e-10 * closed.max(1e-300) + 1e-15, "{} {closed}", res.perr);
        // (θ+, θ-) = (0, 2 atan(1/t)) modulo π per angle
        let (a, b) = (res.params[0], res.params[1]);
        let tm = 2.0 * (1.0 / params.t).atan();
        let ok = |x: f64, y: f64| canonical_angle(x - y).abs() < 1e-6;
        assert!((ok(a + b, 0.0) && ok(a - b, tm)) || (ok(a + b, 0.0) && ok(b - a, tm)), "{a} {b}");
    }

    #[test]
    fn qrl_search_matches_closed_form() {
        let r = db_to_r(12.0);
        let plan = qrl_cz_plan(r).unwrap();
        let closed = gate_error_probability(&plan).unwrap();
        // the coupling step alone, with the compensation folded into T
        let coupling = &plan.steps[0];
        let comp = plan.steps[1].clone();
        let comp_g = crate::reduction::reduce(&comp.graph, &comp.basis).unwrap().g;
        let t_coupling = &comp_g.inverse() * &plan.expected;
        let res = search(&coupling.graph, &t_coupling, &quick()).unwrap();
        assert!(res.accepted);
        let mut found = plan.clone();
        found.steps[0].basis = res.angles.clone();
        let perr = gate_error_probability(&found).unwrap();
        assert!((perr - closed).abs() < 1e-6, "{perr} {closed}");
    }

    #[test]
    fn dbsl_cz_accepted_and_beats_construction() {
        let r = db_to_r(15.0);
        let params = LatticeParams::new(Lattice::Dbsl, r).unwrap();
        let g = cz_region_graph(params, 0).unwrap().remove(0);
        let target = cz_expected(Lattice::Dbsl, 0).unwrap();
        let warm = dbsl_asymptotic_cz_angles(1.0, 0).to_vec();
        let ev = Evaluator::new(&g, &target).unwrap();
        let start = ev.point(&ev.project(&warm, 200).unwrap()).unwrap();
        let cfg = OptimizerConfig { warm_starts: vec![warm], restarts: 2, ..quick() };
        let res = search(&g, &target, &cfg).unwrap();
        assert!(res.accepted && res.residual < 1e-5);
        assert!(res.perr <= start.perr + 1e-15);
        // re-verification through the full reduction
        let full = crate::reduction::reduce(&g, &res.angles).unwrap();
        let re = full.g.l1_distance(&target).unwrap();
        assert!((re - res.residual).abs() < 1e-10);
        let p = crate::gkp::GkpBudget::for_gate(&full).unwrap().perr;
        assert!((p - res.perr).abs() < 1e-10 * p);
    }

    #[test]
    fn more_restarts_never_worse() {
        let r = db_to_r(10.0);
        let params = LatticeParams::new(Lattice::Mbsl, r).unwrap();
        let g = cz_region_graph(params, 0).unwrap().remove(0);
        let target = cz_expected(Lattice::Mbsl, 0).unwrap();
        let few = search(&g, &target, &OptimizerConfig { restarts: 3, ..quick() }).unwrap();
        let more = search(&g, &target, &OptimizerConfig { restarts: 6, ..quick() }).unwrap();
        if few.accepted {
            assert!(more.accepted && more.perr <= few.perr);
        }
        let again = search(&g, &target, &OptimizerConfig { restarts: 6, ..quick() }).unwrap();
        assert_eq!(again, more);
    }
}
