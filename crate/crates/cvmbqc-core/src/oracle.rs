//! Independent checks of the reduction engine.
//!
//! Two simulations are provided. [`GaussianState`] is the ordinary
//! covariance-form state with finitely anti-squeezed resource modes and
//! homodyne post-selection; it is what the grid Wigner expressions describe.
//! [`verify_plan`] instead keeps the state in information form, where an
//! ancilla x-quadrature carrying no prior information is exactly
//! representable. That is the model behind `G` and `N`, so the two must agree
//! to rounding.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{basis_for, GateId, GatePlan, PLAN_TOL};
use crate::lattice::{single_step_graph, BasisSetting, ComputationGraph, ControlBasis, Lattice, LatticeParams};
use crate::reduction::{network, reduce_steps};
use crate::symplectic::{gaussian_unitary, omega, Gaussian, SymplecticMatrix};

/// Eigenvalue slack of the uncertainty relation.
pub const UNCERTAINTY_TOL: f64 = 1e-9;
/// Smallest measured variance that can be conditioned on.
pub const MIN_MEASURED_VARIANCE: f64 = 1e-14;
/// Default absolute tolerance of [`verify_plan`].
pub const VERIFY_TOL: f64 = 1e-9;
/// Relative tolerance of the grid Wigner moments.
pub const WIGNER_REL_TOL: f64 = 1e-4;

/// Gaussian state by first and second moments, xxpp ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !mean.len().is_multiple_of(2) || mean.is_empty() {
            return Err(Error::InvalidParameter(format!("mean of odd length {}", mean.len())));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension { expected: mean.len(), found: cov.nrows() });
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self { mean: DVector::zeros(2 * n_modes), cov: DMatrix::identity(2 * n_modes, 2 * n_modes) / 2.0 }
    }

    /// Product state with the given `(Var x, Var p)` per mode.
    pub fn diagonal(variances: &[(f64, f64)]) -> Result<Self> {
        let n = variances.len();
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for (i, &(vx, vp)) in variances.iter().enumerate() {
            if !(vx > 0.0 && vp > 0.0) {
                return Err(Error::Domain(format!("variances must be positive, got ({vx}, {vp})")));
            }
            cov[(i, i)] = vx;
            cov[(n + i, n + i)] = vp;
        }
        Self::new(DVector::zeros(2 * n), cov)
    }

    /// Single-mode state `R(phi) S(s)` applied to vacuum, displaced by `mean`.
    pub fn squeezed(s: f64, phi: f64, mean: [f64; 2]) -> Result<Self> {
        let sym = &gaussian_unitary(Gaussian::Rotation(phi))? * &gaussian_unitary(Gaussian::Squeeze(s))?;
        let mut st = Self::vacuum(1).evolve(&sym)?;
        st.mean = DVector::from_column_slice(&mean);
        Ok(st)
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn evolve(&self, s: &SymplecticMatrix) -> Result<Self> {
        self.evolve_matrix(s.matrix())
    }

    fn evolve_matrix(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.ncols() != self.mean.len() || s.nrows() != self.mean.len() {
            return Err(Error::Dimension { expected: self.mean.len(), found: s.nrows() });
        }
        let cov = s * &self.cov * s.transpose();
        Ok(Self { mean: s * &self.mean, cov: (&cov + cov.transpose()) / 2.0 })
    }

    /// `self ⊗ other`, modes of `self` first.
    pub fn tensor(&self, other: &Self) -> Self {
        let (a, b) = (self.n_modes(), other.n_modes());
        let n = a + b;
        let idx_a: Vec<usize> = (0..a).chain(n..n + a).collect();
        let idx_b: Vec<usize> = (a..n).chain(n + a..2 * n).collect();
        let mut mean = DVector::zeros(2 * n);
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for (src, idx) in [(self, &idx_a), (other, &idx_b)] {
            for (i, &gi) in idx.iter().enumerate() {
                mean[gi] = src.mean[i];
                for (j, &gj) in idx.iter().enumerate() {
                    cov[(gi, gj)] = src.cov[(i, j)];
                }
            }
        }
        Self { mean, cov }
    }

    /// Reduced state of `modes`, in the listed order.
    pub fn marginal(&self, modes: &[usize]) -> Result<Self> {
        let n = self.n_modes();
        crate::symplectic::check_modes(modes, n)?;
        let idx: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|m| n + m)).collect();
        Ok(Self {
            mean: DVector::from_fn(idx.len(), |i, _| self.mean[idx[i]]),
            cov: DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.cov[(idx[i], idx[j])]),
        })
    }

    /// Post-selects `x cos θ + p sin θ` of `mode` on `outcome` and removes the
    /// mode.
    pub fn condition_homodyne(&self, mode: usize, angle: f64, outcome: f64) -> Result<Self> {
        let n = self.n_modes();
        if mode >= n {
            return Err(Error::IndexOutOfRange { index: mode, n_modes: n });
        }
        let rot = crate::symplectic::embed(&gaussian_unitary(Gaussian::Rotation(angle))?, &[mode], n)?;
        let st = self.evolve(&rot)?;
        let var = st.cov[(mode, mode)];
        if !(var >= MIN_MEASURED_VARIANCE) {
            return Err(Error::DegenerateConditioning(var));
        }
        let keep: Vec<usize> = (0..2 * n).filter(|&i| i != mode && i != n + mode).collect();
        let gain = DVector::from_fn(keep.len(), |i, _| st.cov[(keep[i], mode)] / var);
        let shift = outcome - st.mean[mode];
        let mean = DVector::from_fn(keep.len(), |i, _| st.mean[keep[i]] + gain[i] * shift);
        let cov = DMatrix::from_fn(keep.len(), keep.len(), |i, j| {
            st.cov[(keep[i], keep[j])] - gain[i] * st.cov[(mode, keep[j])]
        });
        Ok(Self { mean, cov: (&cov + cov.transpose()) / 2.0 })
    }

    /// Smallest eigenvalue of the real form of `cov + iΩ/2`.
    pub fn uncertainty_margin(&self) -> f64 {
        let k = self.mean.len();
        let half_omega = omega(self.n_modes()) / 2.0;
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        m.view_mut((0, 0), (k, k)).copy_from(&self.cov);
        m.view_mut((k, k), (k, k)).copy_from(&self.cov);
        m.view_mut((0, k), (k, k)).copy_from(&(-&half_omega));
        m.view_mut((k, 0), (k, k)).copy_from(&half_omega);
        m.symmetric_eigenvalues().min()
    }

    pub fn check_uncertainty(&self) -> Result<()> {
        let m = self.uncertainty_margin();
        if m < -UNCERTAINTY_TOL {
            return Err(Error::Domain(format!("uncertainty relation violated by {m:.3e}")));
        }
        Ok(())
    }
}

/// Resource state of a graph before any measurement: `input` on the input
/// modes, `x` variance `1/(2ε)` and `p` variance `ε/2` elsewhere, then the
/// controlled-Z network and the mixing beam splitters.
pub fn resource_state(graph: &ComputationGraph, input: &GaussianState) -> Result<GaussianState> {
    let n = graph.n_modes;
    let k = graph.input_modes.len();
    if input.n_modes() != k {
        return Err(Error::Dimension { expected: k, found: input.n_modes() });
    }
    let eps = graph.epsilon;
    let anc: Vec<usize> = (0..n).filter(|m| !graph.input_modes.contains(m)).collect();
    let squeezed = GaussianState::diagonal(&vec![(1.0 / (2.0 * eps), eps / 2.0); anc.len()])?;
    let joint = input.tensor(&squeezed);
    // joint lists inputs then ancillas; scatter into graph order
    let order: Vec<usize> = graph.input_modes.iter().copied().chain(anc.iter().copied()).collect();
    let mut pos = vec![0; n];
    for (i, &m) in order.iter().enumerate() {
        pos[m] = i;
    }
    let placed = joint.marginal(&pos)?;
    placed.evolve_matrix(&network(graph)?)
}

/// Post-selected output state of one measured graph, outputs in
/// `graph.output_modes` order.
pub fn simulate_step(graph: &ComputationGraph, basis: &BasisSetting, input: &GaussianState) -> Result<GaussianState> {
    let mut st = resource_state(graph, input)?;
    let mut remaining: Vec<usize> = (0..graph.n_modes).collect();
    for m in graph.homodyne_modes() {
        let angle = *basis.get(&m).ok_or(Error::MissingAngle(m))?;
        let at = remaining.iter().position(|&r| r == m).expect("homodyne modes are distinct");
        st = st.condition_homodyne(at, angle, 0.0)?;
        remaining.remove(at);
    }
    let out: Vec<usize> =
        graph.output_modes.iter().map(|o| remaining.iter().position(|r| r == o).expect("outputs are kept")).collect();
    st.marginal(&out)
}

/// Gaussian density in information form: precision `Λ` and `h = Λ μ`.
#[derive(Debug, Clone)]
struct Information {
    lambda: DMatrix<f64>,
    h: DVector<f64>,
}

impl Information {
    fn from_state(st: &GaussianState) -> Result<Self> {
        let lambda = st.cov.clone().try_inverse().ok_or_else(|| Error::Domain("singular probe covariance".into()))?;
        Ok(Self { h: &lambda * &st.mean, lambda })
    }

    fn to_state(&self) -> Result<GaussianState> {
        let cov = self
            .lambda
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("output precision is singular".into()))?;
        let mean = &cov * &self.h;
        GaussianState::new(mean, (&cov + cov.transpose()) / 2.0)
    }

    /// Change of variables `q' = S q`.
    fn push(&self, s: &DMatrix<f64>) -> Self {
        let n = s.nrows() / 2;
        let om = omega(n);
        let sinv = -(&om * s.transpose() * &om);
        let sinv_t = sinv.transpose();
        Self { lambda: &sinv_t * &self.lambda * &sinv, h: &sinv_t * &self.h }
    }

    /// Conditions `drop` on zero and integrates out `marg`; the rest keep
    /// their order.
    fn condition_and_marginalize(&self, drop: &[usize], marg: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.h.len()).filter(|i| !drop.contains(i) && !marg.contains(i)).collect();
        let pick = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| self.lambda[(r[i], c[j])]);
        let lkk = pick(&keep, &keep);
        let lkm = pick(&keep, marg);
        let lmm = pick(marg, marg);
        let hk = DVector::from_fn(keep.len(), |i, _| self.h[keep[i]]);
        let hm = DVector::from_fn(marg.len(), |i, _| self.h[marg[i]]);
        let chol = lmm
            .cholesky()
            .ok_or_else(|| Error::Domain("measured p-quadratures carry no information".into()))?;
        let lambda = lkk - &lkm * chol.solve(&lkm.transpose());
        let h = hk - &lkm * chol.solve(&hm);
        Ok(Self { lambda: (&lambda + lambda.transpose()) / 2.0, h })
    }
}

/// Output of one graph in the flat-prior model: ancilla `x` uninformative,
/// ancilla `p` of variance `ε/2`, homodyne outcomes zero.
fn flat_prior_step(graph: &ComputationGraph, basis: &BasisSetting, input: &GaussianState) -> Result<GaussianState> {
    let n = graph.n_modes;
    if input.n_modes() != graph.input_modes.len() {
        return Err(Error::Dimension { expected: graph.input_modes.len(), found: input.n_modes() });
    }
    let inf_in = Information::from_state(input)?;
    let k = graph.input_modes.len();
    let mut lambda = DMatrix::zeros(2 * n, 2 * n);
    let mut h = DVector::zeros(2 * n);
    let gidx: Vec<usize> =
        graph.input_modes.iter().copied().chain(graph.input_modes.iter().map(|i| n + i)).collect();
    for i in 0..2 * k {
        h[gidx[i]] = inf_in.h[i];
        for j in 0..2 * k {
            lambda[(gidx[i], gidx[j])] = inf_in.lambda[(i, j)];
        }
    }
    for m in (0..n).filter(|m| !graph.input_modes.contains(m)) {
        lambda[(n + m, n + m)] = 2.0 / graph.epsilon;
    }
    // rotations are applied by hand so nothing is shared with the reducer
    let mut s = network(graph)?;
    for (&m, &th) in basis {
        let (sn, c) = (libm::sin(th), libm::cos(th));
        for col in 0..2 * n {
            let (x, p) = (s[(m, col)], s[(n + m, col)]);
            s[(m, col)] = c * x + sn * p;
            s[(n + m, col)] = -sn * x + c * p;
        }
    }
    let meas = graph.homodyne_modes();
    for m in &meas {
        if !basis.contains_key(m) {
            return Err(Error::MissingAngle(*m));
        }
    }
    let post = Information { lambda, h }.push(&s);
    let drop: Vec<usize> = meas.clone();
    let marg: Vec<usize> = meas.iter().map(|m| n + m).collect();
    let out = post.condition_and_marginalize(&drop, &marg)?.to_state()?;
    // surviving modes are in index order
    let mut left: Vec<usize> = (0..n).filter(|m| !meas.contains(m)).collect();
    left.sort_unstable();
    let order: Vec<usize> =
        graph.output_modes.iter().map(|o| left.iter().position(|l| l == o).expect("outputs survive")).collect();
    out.marginal(&order)
}

/// Runs every step of `plan` on `input` in the flat-prior model.
pub fn flat_prior_run(plan: &GatePlan, input: &GaussianState) -> Result<GaussianState> {
    let mut st = input.clone();
    for step in &plan.steps {
        st = flat_prior_step(&step.graph, &step.basis, &st)?;
    }
    Ok(st)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub plan: String,
    pub r: f64,
    /// Largest entry of `|G_probe - G|`, `G_probe` from mean transport.
    pub max_mean_dev: f64,
    /// Largest entry of `|cov_out - (G cov_in Gᵀ + ε/2 N Nᵀ)|` over probes.
    pub max_cov_dev: f64,
    /// `‖G_probe - expected‖₁` on the observed modes.
    pub gate_residual: f64,
    pub pass: bool,
}

/// Probe states on `n` modes: vacuum plus three squeezed and rotated
/// states, with means spanning phase space.
pub fn probes(n: usize) -> Result<Vec<GaussianState>> {
    let shapes = [(1.0, 0.0), (1.7, 0.4), (0.6, -1.1), (2.3, 2.5)];
    let dim = 2 * n;
    let count = shapes.len().max(dim);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut st: Option<GaussianState> = None;
        for mode in 0..n {
            let (s, phi) = shapes[(k + mode) % shapes.len()];
            let one = GaussianState::squeezed(s, phi + 0.3 * mode as f64, [0.0, 0.0])?;
            st = Some(match st {
                None => one,
                Some(acc) => acc.tensor(&one),
            });
        }
        let mut st = st.expect("at least one mode");
        // unit vector plus a small spread keeps every mean set full rank
        let mut mean = DVector::from_fn(dim, |i, _| 0.1 * (i as f64 + 1.0) * if k % 2 == 0 { 1.0 } else { -1.0 });
        mean[k % dim] += 1.0 + 0.5 * (k / dim) as f64;
        st.mean = mean;
        out.push(st);
    }
    Ok(out)
}

/// Checks a plan against the flat-prior simulation on [`probes`].
pub fn verify_plan(plan: &GatePlan, tol: f64) -> Result<VerifyReport> {
    let steps: Vec<_> = plan.steps.iter().map(|s| (s.graph.clone(), s.basis.clone())).collect();
    let full = reduce_steps(&steps)?;
    let g = full.g.matrix();
    let noise = &full.n * full.n.transpose() * (full.epsilon / 2.0);
    let n_in = g.ncols() / 2;
    let probe_set = probes(n_in)?;
    let mut max_cov_dev = 0.0f64;
    let mut means_in = DMatrix::zeros(2 * n_in, probe_set.len());
    let mut means_out = DMatrix::zeros(g.nrows(), probe_set.len());
    for (k, probe) in probe_set.iter().enumerate() {
        let out = flat_prior_run(plan, probe)?;
        let want = g * probe.cov() * g.transpose() + &noise;
        max_cov_dev = max_cov_dev.max((out.cov() - want).amax());
        means_in.set_column(k, probe.mean());
        means_out.set_column(k, out.mean());
    }
    // least-squares mean map, G_probe = Out Inᵀ (In Inᵀ)⁻¹
    let gram = &means_in * means_in.transpose();
    let g_probe = &means_out
        * means_in.transpose()
        * gram.try_inverse().ok_or_else(|| Error::Domain("probe means are not independent".into()))?;
    let max_mean_dev = (&g_probe - g).amax();
    let observed = match &plan.observed_modes {
        Some(m) => {
            let n = g.nrows() / 2;
            let idx: Vec<usize> = m.iter().copied().chain(m.iter().map(|i| n + i)).collect();
            DMatrix::from_fn(idx.len(), idx.len(), |i, j| g_probe[(idx[i], idx[j])])
        }
        None => g_probe,
    };
    let gate_residual = (observed - plan.expected.matrix()).abs().sum();
    let finite = max_mean_dev.is_finite() && max_cov_dev.is_finite();
    Ok(VerifyReport {
        plan: plan.label(),
        r: plan.r,
        max_mean_dev,
        max_cov_dev,
        gate_residual,
        pass: finite && max_mean_dev <= tol && max_cov_dev <= tol && gate_residual < PLAN_TOL,
    })
}

/// Uniform grid symmetric about zero with an odd number of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 256;
    pub const MIN_STDS: f64 = 6.0;

    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Resolution(format!("half width {half_width}")));
        }
        if points < Self::MIN_POINTS {
            return Err(Error::Resolution(format!("{points} points, need at least {}", Self::MIN_POINTS)));
        }
        if points.is_multiple_of(2) {
            return Err(Error::Resolution(format!("{points} points; an odd count keeps 0 on the grid")));
        }
        Ok(Self { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        let c = (self.points / 2) as f64;
        (0..self.points).map(|i| (i as f64 - c) * h).collect()
    }
}

/// Normalized Gaussian of variance `delta / 2`.
fn gauss(x: f64, delta: f64) -> f64 {
    let v = delta / 2.0;
    libm::exp(-x * x / (2.0 * v)) / libm::sqrt(2.0 * PI * v)
}

/// A one-dimensional function on the grid, up to normalization, with the
/// two degenerate limits kept exact.
#[derive(Debug, Clone)]
enum Profile {
    Samples(Vec<f64>),
    Constant(f64),
    /// Point mass at zero.
    Delta(f64),
}

struct Grid {
    x: Vec<f64>,
    h: f64,
}

impl Grid {
    fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&x| f(x)).collect()
    }

    /// Kernel taps `G_δ(jh)` for `|jh| ≤ 12σ`, renormalized to unit sum.
    fn taps(&self, delta: f64) -> Vec<f64> {
        let sd = libm::sqrt(delta / 2.0);
        let half = (libm::ceil(12.0 * sd / self.h) as usize).min(self.x.len());
        let mut k: Vec<f64> = (0..=2 * half).map(|j| gauss((j as f64 - half as f64) * self.h, delta)).collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    }

    /// `G_δ * f`.
    fn convolve(&self, f: &Profile, delta: f64) -> Profile {
        if delta == 0.0 {
            return f.clone();
        }
        if delta.is_infinite() {
            // only the shape matters; the overall factor is fixed at the end
            return Profile::Constant(1.0);
        }
        match f {
            Profile::Constant(c) => Profile::Constant(*c),
            Profile::Delta(w) => Profile::Samples(self.sample(|x| w * gauss(x, delta))),
            Profile::Samples(v) => {
                let k = self.taps(delta);
                let half = k.len() / 2;
                let m = v.len();
                let out = (0..m)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, kj) in k.iter().enumerate() {
                            // v[i - (j - half)]
                            let src = i as i64 - (j as i64 - half as i64);
                            if (0..m as i64).contains(&src) {
                                acc += kj * v[src as usize];
                            }
                        }
                        acc
                    })
                    .collect();
                Profile::Samples(out)
            }
        }
    }

    /// `G_δ(x) · f(x)`.
    fn envelope(&self, f: &Profile, delta: f64) -> Profile {
        if delta.is_infinite() {
            return f.clone();
        }
        if delta == 0.0 {
            return Profile::Delta(1.0);
        }
        match f {
            Profile::Constant(c) => Profile::Samples(self.sample(|x| c * gauss(x, delta))),
            Profile::Delta(w) => Profile::Delta(w * gauss(0.0, delta)),
            Profile::Samples(v) => Profile::Samples(self.x.iter().zip(v).map(|(&x, f)| f * gauss(x, delta)).collect()),
        }
    }

    /// `∫dη G_κ(η) G_δ(x - 2η) f(x - η)`, the doubly shifted term of the
    /// butterfly lattice. η runs over grid steps.
    fn shifted(&self, f: &Profile, kappa: f64, delta: f64) -> Profile {
        let m = self.x.len() as i64;
        let kern = |eta: f64| if kappa.is_infinite() { 1.0 } else { gauss(eta, kappa) };
        let out = (0..m)
            .map(|i| {
                let x = self.x[i as usize];
                match f {
                    Profile::Delta(w) => w * kern(x) * gauss(-x, delta),
                    _ => {
                        let mut acc = 0.0;
                        for j in -m..=m {
                            let eta = j as f64 * self.h;
                            let fv = match f {
                                Profile::Constant(c) => *c,
                                Profile::Samples(v) => {
                                    let src = i - j;
                                    if !(0..m).contains(&src) {
                                        continue;
                                    }
                                    v[src as usize]
                                }
                                Profile::Delta(_) => unreachable!(),
                            };
                            acc += kern(eta) * gauss(x - 2.0 * eta, delta) * fv;
                        }
                        acc * self.h
                    }
                }
            })
            .collect();
        Profile::Samples(out)
    }

    /// Variance of a normalizable profile.
    fn variance(&self, f: &Profile) -> Result<f64> {
        match f {
            Profile::Delta(_) => Ok(0.0),
            Profile::Constant(_) => Err(Error::Resolution("output profile is not normalizable".into())),
            Profile::Samples(v) => {
                let mass: f64 = v.iter().sum();
                if !(mass > 0.0) {
                    return Err(Error::Resolution("output profile vanished on the grid".into()));
                }
                let mu = self.x.iter().zip(v).map(|(x, f)| x * f).sum::<f64>() / mass;
                Ok(self.x.iter().zip(v).map(|(x, f)| (x - mu) * (x - mu) * f).sum::<f64>() / mass)
            }
        }
    }
}

/// One operation of the output-Wigner expression, acting on a separable
/// marginal. Widths are `δ` of `G_δ` (variance `δ/2`).
#[derive(Debug, Clone, Copy)]
enum Op {
    Conv(f64),
    Env(f64),
    /// `∫dη G_κ(η) G_δ(x - 2η) f(x - η)`.
    Shifted { kappa: f64, delta: f64 },
}

/// Operations on the x and p marginals for the identity gate, innermost
/// first, on `lattice` with edge weight `t`.
fn identity_gate_ops(lattice: Lattice, t: f64, eps: f64) -> Result<(Vec<Op>, Vec<Op>)> {
    use Op::*;
    let t2 = t * t;
    let t4 = t2 * t2;
    Ok(match lattice {
        Lattice::Dbsl => (
            vec![Conv(eps / (16.0 * t4)), Env(1.0 / (4.0 * t2 * eps)), Conv(eps / (4.0 * t2)), Env(1.0 / eps)],
            vec![Env(16.0 * t4 / eps), Conv(4.0 * t2 * eps), Env(4.0 * t2 / eps), Conv(eps)],
        ),
        Lattice::Bsl => (
            vec![Conv(eps / (4.0 * t4)), Env(1.0 / (2.0 * t2 * eps)), Conv(eps / (2.0 * t2)), Env(1.0 / eps)],
            // the first p envelope is the conjugate of the first x kernel,
            // width 4t⁴/ε; a printed 4t²/ε misses the simulation by ~5%
            vec![Env(4.0 * t4 / eps), Conv(2.0 * t2 * eps), Env(2.0 * t2 / eps), Conv(eps)],
        ),
        Lattice::Mbsl => (
            vec![
                Conv(eps / (4.0 * t2)),
                Shifted { kappa: eps / (4.0 * t2), delta: 1.0 / eps },
                Env(1.0 / eps),
            ],
            vec![Env(4.0 * t2 / eps), Conv(2.0 * eps), Env(2.0 * eps + 4.0 * t2 / eps)],
        ),
        other => return Err(Error::Unsupported(format!("no grid expression for {other}"))),
    })
}

fn run_ops(grid: &Grid, input: Profile, ops: &[Op]) -> Profile {
    ops.iter().fold(input, |f, op| match *op {
        Op::Conv(d) => grid.convolve(&f, d),
        Op::Env(d) => grid.envelope(&f, d),
        Op::Shifted { kappa, delta } => grid.shifted(&f, kappa, delta),
    })
}

/// Grid output moments `(Var x, Var p)` of the identity gate on a centred
/// probe with the given variances.
pub fn grid_identity_moments(
    lattice: Lattice,
    t: f64,
    epsilon: f64,
    probe: (f64, f64),
    spec: &GridSpec,
) -> Result<(f64, f64)> {
    let grid = Grid { x: spec.coords(), h: spec.spacing() };
    let (xo, po) = identity_gate_ops(lattice, t, epsilon)?;
    let mut narrowest = f64::INFINITY;
    let mut widest = libm::sqrt(probe.0.max(probe.1));
    for op in xo.iter().chain(&po) {
        if let Op::Conv(d) | Op::Shifted { kappa: d, .. } = *op {
            if d > 0.0 && d.is_finite() {
                narrowest = narrowest.min(libm::sqrt(d / 2.0));
                widest = widest.max(libm::sqrt(d / 2.0));
            }
        }
    }
    if GridSpec::MIN_STDS * widest > spec.half_width {
        return Err(Error::Resolution(format!(
            "half width {} covers fewer than {} standard deviations of {widest:.3e}",
            spec.half_width,
            GridSpec::MIN_STDS
        )));
    }
    if spec.spacing() > narrowest / 2.0 {
        return Err(Error::Resolution(format!(
            "spacing {:.3e} does not resolve a kernel of width {narrowest:.3e}",
            spec.spacing()
        )));
    }
    let wx = Profile::Samples(grid.sample(|x| gauss(x, 2.0 * probe.0)));
    let wp = Profile::Samples(grid.sample(|p| gauss(p, 2.0 * probe.1)));
    let vx = grid.variance(&run_ops(&grid, wx, &xo))?;
    let vp = grid.variance(&run_ops(&grid, wp, &po))?;
    for v in [vx, vp] {
        if GridSpec::MIN_STDS * libm::sqrt(v) > spec.half_width {
            return Err(Error::Resolution(format!("output standard deviation {:.3e} exceeds the grid", libm::sqrt(v))));
        }
    }
    Ok((vx, vp))
}

/// Grid wide and fine enough for [`wigner_limit_check`] at `r`.
pub fn default_grid(r: f64, probe: (f64, f64)) -> Result<GridSpec> {
    let eps = crate::lattice::effective_epsilon(r)?;
    // the finite-squeezed output has x variance 1/(2ε)
    let widest = libm::sqrt((1.0 / (2.0 * eps)).max(probe.0).max(probe.1));
    let half_width = 8.0 * widest;
    // narrowest kernel over the three lattices is ε/(32 t⁴) or ε/2 in variance
    let t = Lattice::Dbsl.edge_weight(r);
    let narrowest = libm::sqrt((eps / (32.0 * t * t * t * t)).min(eps / 2.0).min(probe.0).min(probe.1));
    let points = (libm::ceil(2.0 * half_width / (narrowest / 4.0)) as usize).max(GridSpec::MIN_POINTS) | 1;
    GridSpec::new(half_width, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerReport {
    pub lattice: Lattice,
    pub r: f64,
    /// `(Var x, Var p)` of the grid expression.
    pub grid_moments: (f64, f64),
    /// Same moments from the covariance simulation.
    pub oracle_moments: (f64, f64),
    pub max_rel_dev: f64,
    /// Grid moments with the edge weight set to zero.
    pub limit_moments: (f64, f64),
    /// `(1/(2ε), ε/2)`.
    pub limit_expected: (f64, f64),
    pub limit_rel_dev: f64,
    pub pass: bool,
}

/// Standard probe for the grid check.
pub const WIGNER_PROBE: (f64, f64) = (0.85, 0.5 * 0.5 / 0.85);

/// Compares the grid evaluation of the identity-gate Wigner expression with
/// the covariance simulation, and checks the zero-coupling limit.
pub fn wigner_limit_check(lattice: Lattice, r: f64, probe: (f64, f64), spec: &GridSpec) -> Result<WignerReport> {
    if !matches!(lattice, Lattice::Dbsl | Lattice::Bsl | Lattice::Mbsl) {
        return Err(Error::Unsupported(format!("no grid expression for {lattice}")));
    }
    let params = LatticeParams::new(lattice, r)?;
    let eps = params.epsilon;
    let plan = basis_for(lattice, GateId::I, r, 0)?;
    let step = &plan.steps[0];
    let input = GaussianState::diagonal(&[probe])?;
    let out = simulate_step(&step.graph, &step.basis, &input)?;
    let oracle = (out.cov()[(0, 0)], out.cov()[(1, 1)]);
    let grid = grid_identity_moments(lattice, params.t, eps, probe, spec)?;
    let rel = |a: f64, b: f64| libm::fabs(a - b) / libm::fabs(b);
    let max_rel_dev = rel(grid.0, oracle.0).max(rel(grid.1, oracle.1));

    let limit = grid_identity_moments(lattice, 0.0, eps, probe, spec)?;
    let limit_expected = (1.0 / (2.0 * eps), eps / 2.0);
    let limit_rel_dev = rel(limit.0, limit_expected.0).max(rel(limit.1, limit_expected.1));
    Ok(WignerReport {
        lattice,
        r,
        grid_moments: grid,
        oracle_moments: oracle,
        max_rel_dev,
        limit_moments: limit,
        limit_expected,
        limit_rel_dev,
        pass: max_rel_dev <= WIGNER_REL_TOL && limit_rel_dev <= WIGNER_REL_TOL,
    })
}

/// Covariance simulation of one identity-gate step with the edge weight
/// forced to zero; the output should be the bare resource mode.
pub fn zero_coupling_output(lattice: Lattice, r: f64, probe: (f64, f64)) -> Result<GaussianState> {
    let mut params = LatticeParams::new(lattice, r)?;
    params.t = 0.0;
    let graph = single_step_graph(params, 0, ControlBasis::Fixed(lattice.default_theta_c()))?;
    // the closed-form angles at t' → 0: θ- = π
    let basis = graph.basis_from_params(&[PI / 2.0, -PI / 2.0])?;
    simulate_step(&graph, &basis, &GaussianState::diagonal(&[probe])?)
}
