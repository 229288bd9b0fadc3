//! Local computation-region graphs for the five built-in cluster layouts.
//!
//! Each region is a template: mode labels carry a rail letter and a temporal
//! index so the edge rules can be written once per lattice, but the
//! circumference and temporal length never enter the numerics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::check_modes;

/// Cylinder circumference used for labels only.
const CIRC: i64 = 100;
/// Temporal index of the first computation step in every template.
const K0: i64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lattice {
    Teleport,
    Dbsl,
    Bsl,
    Mbsl,
    Qrl,
}

impl Lattice {
    pub const ALL: [Lattice; 5] = [Lattice::Teleport, Lattice::Dbsl, Lattice::Bsl, Lattice::Mbsl, Lattice::Qrl];
    /// The four two-dimensional cluster states.
    pub const CLUSTERS: [Lattice; 4] = [Lattice::Dbsl, Lattice::Bsl, Lattice::Mbsl, Lattice::Qrl];

    pub fn name(self) -> &'static str {
        match self {
            Lattice::Teleport => "TELEPORT",
            Lattice::Dbsl => "DBSL",
            Lattice::Bsl => "BSL",
            Lattice::Mbsl => "MBSL",
            Lattice::Qrl => "QRL",
        }
    }

    /// Edge weight as a function of the resource squeezing `r`.
    ///
    /// Teleportation has no lattice; `tanh(2r)` is used as its default.
    pub fn edge_weight(self, r: f64) -> f64 {
        let t = libm::tanh(2.0 * r);
        match self {
            Lattice::Dbsl => t / 2.0,
            Lattice::Bsl | Lattice::Mbsl => t / SQRT_2,
            Lattice::Qrl | Lattice::Teleport => t,
        }
    }

    /// Control-mode angle used unless the caller frees it.
    pub fn default_theta_c(self) -> f64 {
        match self {
            Lattice::Mbsl => FRAC_PI_2,
            _ => FRAC_PI_4,
        }
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lattice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lattice::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unsupported(format!("unknown lattice '{s}'")))
    }
}

/// `sech(2r)`, the self-loop magnitude of every cluster mode.
pub fn effective_epsilon(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("squeezing parameter must be finite and nonnegative, got {r}")));
    }
    Ok(1.0 / libm::cosh(2.0 * r))
}

/// Squeezing in dB, `-10 log10(e^{-2r})`.
pub fn r_to_db(r: f64) -> f64 {
    20.0 * r / core::f64::consts::LN_10
}

pub fn db_to_r(db: f64) -> f64 {
    db * core::f64::consts::LN_10 / 20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub lattice: Lattice,
    pub r: f64,
    pub t: f64,
    pub epsilon: f64,
}

impl LatticeParams {
    pub fn new(lattice: Lattice, r: f64) -> Result<Self> {
        let epsilon = effective_epsilon(r)?;
        Ok(Self { lattice, r, t: lattice.edge_weight(r), epsilon })
    }

    pub fn from_db(lattice: Lattice, db: f64) -> Result<Self> {
        Self::new(lattice, db_to_r(db))
    }

    /// Teleportation with a caller-supplied edge weight in `(0, 1]`.
    pub fn teleport(r: f64, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!("teleportation edge weight {t} outside (0, 1]")));
        }
        Ok(Self { lattice: Lattice::Teleport, r, t, epsilon: effective_epsilon(r)? })
    }

    pub fn squeezing_db(&self) -> f64 {
        r_to_db(self.r)
    }
}

/// How the control (wire-separating) modes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", content = "theta", rename_all = "snake_case")]
pub enum ControlBasis {
    /// Every control sits at `sign * theta`.
    Fixed(f64),
    /// `theta` becomes the last free parameter of the graph.
    Free,
}

/// A control mode measured at `sign * theta_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub mode: usize,
    pub sign: f64,
}

/// Homodyne angles keyed by mode index.
pub type BasisSetting = BTreeMap<usize, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationGraph {
    pub lattice: Lattice,
    pub r: f64,
    pub t: f64,
    pub epsilon: f64,
    pub n_modes: usize,
    #[serde(with = "crate::matrix_serde")]
    pub adjacency: DMatrix<f64>,
    pub input_modes: Vec<usize>,
    /// Measured non-input modes. Inputs are measured too.
    pub measured_modes: Vec<usize>,
    pub output_modes: Vec<usize>,
    /// Beam splitters `(i, j)`: `x_i -> (x_i - x_j)/√2`, `x_j -> (x_i + x_j)/√2`.
    pub mixing_pairs: Vec<(usize, usize)>,
    pub parity: u8,
    pub labels: Vec<String>,
    /// Modes whose angle is a free parameter, in canonical order.
    pub free_modes: Vec<usize>,
    pub controls: Vec<Control>,
    pub control_basis: ControlBasis,
}

impl ComputationGraph {
    /// Inputs followed by measured ancillas.
    pub fn homodyne_modes(&self) -> Vec<usize> {
        let mut m = self.input_modes.clone();
        m.extend_from_slice(&self.measured_modes);
        m
    }

    /// Non-input modes in index order.
    pub fn ancilla_modes(&self) -> Vec<usize> {
        (0..self.n_modes).filter(|m| !self.input_modes.contains(m)).collect()
    }

    /// Number of free parameters, counting a free control angle.
    pub fn n_params(&self) -> usize {
        self.free_modes.len() + usize::from(self.control_basis == ControlBasis::Free)
    }

    /// Full basis from free parameters; controls are filled in.
    pub fn basis_from_params(&self, params: &[f64]) -> Result<BasisSetting> {
        if params.len() != self.n_params() {
            return Err(Error::Dimension { expected: self.n_params(), found: params.len() });
        }
        let theta_c = match self.control_basis {
            ControlBasis::Fixed(th) => th,
            ControlBasis::Free => params[self.free_modes.len()],
        };
        let mut b: BasisSetting = self.free_modes.iter().copied().zip(params.iter().copied()).collect();
        for c in &self.controls {
            b.insert(c.mode, c.sign * theta_c);
        }
        Ok(b)
    }

    /// Same topology with every control angle free or fixed.
    pub fn with_control_basis(mut self, cb: ControlBasis) -> Self {
        self.control_basis = cb;
        self
    }

    pub fn mode_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Checks symmetry, the exact partition and mixing-pair validity.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_modes;
        let bad = |m: &str| Err(Error::MalformedGraph(m.into()));
        if self.adjacency.shape() != (n, n) {
            return Err(Error::Dimension { expected: n, found: self.adjacency.nrows() });
        }
        for i in 0..n {
            if self.adjacency[(i, i)] != 0.0 {
                return bad("adjacency has a nonzero diagonal");
            }
            for j in 0..i {
                if self.adjacency[(i, j)] != self.adjacency[(j, i)] {
                    return bad("adjacency is not symmetric");
                }
            }
        }
        let mut all = self.homodyne_modes();
        all.extend_from_slice(&self.output_modes);
        check_modes(&all, n)?;
        if all.len() != n {
            return bad("mode partition does not cover every mode");
        }
        for &(i, j) in &self.mixing_pairs {
            check_modes(&[i, j], n)?;
        }
        if self.labels.len() != n {
            return bad("label count differs from mode count");
        }
        let measured = self.homodyne_modes();
        for &m in self.free_modes.iter().chain(self.controls.iter().map(|c| &c.mode)) {
            if !measured.contains(&m) {
                return bad("free or control mode is not measured");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Rail {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Label(Rail, i64);

use Rail::{A, B, C, D};

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.0, self.1)
    }
}

/// Signed edges leaving `l` under each lattice's translation-invariant rule.
fn edges_from(lattice: Lattice, l: Label) -> Vec<(Label, f64)> {
    let Label(rail, t) = l;
    let n = CIRC;
    match (lattice, rail) {
        (Lattice::Dbsl, A) => alloc::vec![
            (Label(A, t + 1), 1.0),
            (Label(B, t + n + 1), -1.0),
            (Label(B, t + n - 1), 1.0),
        ],
        (Lattice::Dbsl, B) => alloc::vec![(Label(B, t + 1), -1.0)],
        (Lattice::Bsl, A) => alloc::vec![(Label(B, t), 1.0), (Label(C, t + 1), 1.0)],
        (Lattice::Bsl, B) => alloc::vec![(Label(D, t + n), -1.0)],
        (Lattice::Bsl, C) => alloc::vec![(Label(D, t - 1 + n), 1.0)],
        (Lattice::Mbsl, D) => alloc::vec![(Label(C, t + n), 1.0), (Label(B, t + 1), -1.0)],
        (Lattice::Mbsl, A) => alloc::vec![(Label(B, t + 1), 1.0), (Label(C, t + n), 1.0)],
        (Lattice::Qrl, D) => alloc::vec![(Label(C, t + n), 1.0)],
        (Lattice::Qrl, A) => alloc::vec![(Label(B, t + 1), 1.0)],
        _ => Vec::new(),
    }
}

/// Region assembled from labels; resolved into a [`ComputationGraph`].
struct Region {
    lattice: Lattice,
    params: LatticeParams,
    parity: u8,
    labels: Vec<Label>,
    inputs: Vec<Label>,
    outputs: Vec<Label>,
    free: Vec<Label>,
    controls: Vec<(Label, f64)>,
    mixing: Vec<(Label, Label)>,
    control_basis: ControlBasis,
}

impl Region {
    fn new(params: LatticeParams, parity: u8) -> Self {
        Self {
            lattice: params.lattice,
            params,
            parity,
            labels: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            free: Vec::new(),
            controls: Vec::new(),
            mixing: Vec::new(),
            control_basis: ControlBasis::Fixed(params.lattice.default_theta_c()),
        }
    }

    fn idx(&self, l: Label) -> usize {
        self.labels.iter().position(|&m| m == l).expect("label registered in region")
    }

    fn build(self) -> ComputationGraph {
        let n = self.labels.len();
        let t = self.params.t;
        let mut adj = DMatrix::zeros(n, n);
        for (i, &l) in self.labels.iter().enumerate() {
            for (m, sign) in edges_from(self.lattice, l) {
                if let Some(j) = self.labels.iter().position(|&x| x == m) {
                    adj[(i, j)] += sign * t;
                    adj[(j, i)] += sign * t;
                }
            }
        }
        // inputs arrive from the previous step, already detached from the region
        for &l in &self.inputs {
            let i = self.idx(l);
            adj.row_mut(i).fill(0.0);
            adj.column_mut(i).fill(0.0);
        }
        let input_modes: Vec<usize> = self.inputs.iter().map(|&l| self.idx(l)).collect();
        let output_modes: Vec<usize> = self.outputs.iter().map(|&l| self.idx(l)).collect();
        let measured_modes = (0..n)
            .filter(|m| !input_modes.contains(m) && !output_modes.contains(m))
            .collect();
        ComputationGraph {
            lattice: self.lattice,
            r: self.params.r,
            t,
            epsilon: self.params.epsilon,
            n_modes: n,
            adjacency: adj,
            input_modes,
            measured_modes,
            output_modes,
            mixing_pairs: self.mixing.iter().map(|&(a, b)| (self.idx(a), self.idx(b))).collect(),
            parity: self.parity,
            labels: self.labels.iter().map(|l| format!("{l}")).collect(),
            free_modes: self.free.iter().map(|&l| self.idx(l)).collect(),
            controls: self.controls.iter().map(|&(l, s)| Control { mode: self.idx(l), sign: s }).collect(),
            control_basis: self.control_basis,
        }
    }
}

fn check_parity(parity: u8) -> Result<()> {
    if parity > 1 {
        return Err(Error::InvalidParameter(format!("parity must be 0 or 1, got {parity}")));
    }
    Ok(())
}

fn parity_sign(parity: u8) -> f64 {
    if parity == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Minimal graph for one single-mode computation step.
///
/// QRL steps carry both computation modes (input and output order
/// `(C, B)`); the other lattices carry one.
pub fn single_step_graph(params: LatticeParams, parity: u8, control_basis: ControlBasis) -> Result<ComputationGraph> {
    check_parity(parity)?;
    let s = parity_sign(parity);
    let n = CIRC;
    let k = K0;
    let mut g = Region::new(params, parity);
    g.control_basis = control_basis;
    match params.lattice {
        Lattice::Teleport => {
            let g = teleport_graph(params);
            return Ok(g);
        }
        Lattice::Dbsl => {
            let (inp, wire, out) = (Label(B, k), Label(A, k), Label(B, k + n));
            let ctrl = [
                (Label(A, k - 1), s),
                (Label(B, k + n - 1), s),
                (Label(A, k + 1), -s),
                (Label(B, k + n + 1), -s),
            ];
            g.labels = alloc::vec![inp, wire];
            g.labels.extend(ctrl.iter().map(|c| c.0));
            g.labels.push(out);
            g.inputs = alloc::vec![inp];
            g.outputs = alloc::vec![out];
            g.free = alloc::vec![inp, wire];
            g.controls = ctrl.to_vec();
            g.mixing = alloc::vec![(inp, wire)];
        }
        Lattice::Bsl => {
            // the temporal index carries the parity on this lattice
            let k = k + i64::from(parity);
            let (inp, wire, out) = (Label(D, k), Label(A, k), Label(D, k + n));
            let sb = bsl_control_sign(k);
            let ctrl = [(Label(B, k), sb), (Label(C, k + 1), -sb)];
            g.labels = alloc::vec![inp, wire, ctrl[0].0, ctrl[1].0, out];
            g.inputs = alloc::vec![inp];
            g.outputs = alloc::vec![out];
            g.free = alloc::vec![inp, wire];
            g.controls = ctrl.to_vec();
            g.mixing = alloc::vec![(inp, wire)];
        }
        Lattice::Mbsl => {
            let (inp, wire, out) = (Label(C, k), Label(D, k), Label(C, k + n));
            let ctrl = [(Label(A, k), 1.0), (Label(B, k + 1), 1.0)];
            g.labels = alloc::vec![inp, wire, ctrl[0].0, ctrl[1].0, out];
            g.inputs = alloc::vec![inp];
            g.outputs = alloc::vec![out];
            g.free = alloc::vec![inp, wire];
            g.controls = ctrl.to_vec();
            g.mixing = alloc::vec![(inp, wire)];
        }
        Lattice::Qrl => return Ok(qrl_step(params, false)),
    }
    Ok(g.build())
}

/// Control sign of `B_T` on the bilayer lattice, `(-1)^{T+1}`.
fn bsl_control_sign(t: i64) -> f64 {
    if t.rem_euclid(2) == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Three-mode teleportation chain: input 0 mixed with 1, edge 1-2.
pub fn teleport_graph(params: LatticeParams) -> ComputationGraph {
    let mut adj = DMatrix::zeros(3, 3);
    adj[(1, 2)] = params.t;
    adj[(2, 1)] = params.t;
    ComputationGraph {
        lattice: Lattice::Teleport,
        r: params.r,
        t: params.t,
        epsilon: params.epsilon,
        n_modes: 3,
        adjacency: adj,
        input_modes: alloc::vec![0],
        measured_modes: alloc::vec![1],
        output_modes: alloc::vec![2],
        mixing_pairs: alloc::vec![(0, 1)],
        parity: 0,
        labels: ["in", "anc", "out"].iter().map(|s| String::from(*s)).collect(),
        free_modes: alloc::vec![0, 1],
        controls: Vec::new(),
        control_basis: ControlBasis::Fixed(0.0),
    }
}

/// One QRL macronode step.
///
/// Computation mode 1 enters on `C_k`, mode 2 on `B_k`. The straight step
/// sends them to `(C_{k+N}, B_{k+1})`; the crossed step lists the outputs
/// as `(B_{k+1}, C_{k+N})`, which is the routing of the coupling gate.
pub fn qrl_step(params: LatticeParams, crossed: bool) -> ComputationGraph {
    let n = CIRC;
    let k = K0;
    let (c, b, a, d) = (Label(C, k), Label(B, k), Label(A, k), Label(D, k));
    let (bo, co) = (Label(B, k + 1), Label(C, k + n));
    let mut g = Region::new(params, 0);
    if crossed {
        g.labels = alloc::vec![c, b, a, d, bo, co];
        g.outputs = alloc::vec![bo, co];
        g.free = alloc::vec![a, b, c, d];
    } else {
        g.labels = alloc::vec![c, b, d, a, co, bo];
        g.outputs = alloc::vec![co, bo];
        g.free = alloc::vec![c, b, d, a];
    }
    g.inputs = alloc::vec![c, b];
    g.mixing = alloc::vec![(c, d), (b, a), (a, d), (b, c)];
    g.control_basis = ControlBasis::Fixed(0.0);
    g.build()
}

/// The two-wire region that couples neighbouring wires.
///
/// DBSL, BSL and MBSL return one graph; QRL returns the coupling step and
/// the compensation step, to be chained in that order.
pub fn cz_region_graph(params: LatticeParams, parity: u8) -> Result<Vec<ComputationGraph>> {
    check_parity(parity)?;
    match params.lattice {
        Lattice::Dbsl => Ok(alloc::vec![dbsl_cz(params, parity)]),
        Lattice::Bsl => Ok(alloc::vec![bsl_cz(params, parity)]),
        Lattice::Mbsl => Ok(alloc::vec![mbsl_cz(params, parity)]),
        Lattice::Qrl => Ok(alloc::vec![qrl_step(params, true), qrl_step(params, false)]),
        Lattice::Teleport => Err(Error::Unsupported("teleportation has no two-mode region".into())),
    }
}

fn dbsl_cz(params: LatticeParams, parity: u8) -> ComputationGraph {
    let (n, k) = (CIRC, K0);
    let s = parity_sign(parity);
    let named = [
        Label(A, k - 2),
        Label(B, k - 2),
        Label(A, k),
        Label(B, k),
        Label(A, k + n - 2),
        Label(B, k + n - 2),
        Label(A, k + n - 1),
        Label(B, k + n - 1),
        Label(A, k + n),
        Label(B, k + n),
    ];
    let outer = [
        (Label(A, k - 3), -s),
        (Label(B, k + n - 3), -s),
        (Label(A, k + n - 3), -s),
        (Label(B, k + 2 * n - 3), -s),
        (Label(A, k + 1), -s),
        (Label(B, k + n + 1), -s),
        (Label(A, k + n + 1), -s),
        (Label(B, k + 2 * n + 1), -s),
        (Label(A, k - 1), s),
        (Label(B, k + 2 * n - 1), s),
    ];
    let outputs = [Label(B, k + 2 * n - 2), Label(B, k + 2 * n)];
    let mut g = Region::new(params, parity);
    g.labels = named.to_vec();
    g.labels.extend(outer.iter().map(|c| c.0));
    g.labels.extend_from_slice(&outputs);
    g.inputs = alloc::vec![Label(B, k - 2), Label(B, k)];
    g.outputs = outputs.to_vec();
    g.free = named.to_vec();
    g.controls = outer.to_vec();
    g.mixing = [k - 2, k, k + n - 2, k + n, k + n - 1].iter().map(|&t| (Label(B, t), Label(A, t))).collect();
    g.build()
}

fn bsl_cz(params: LatticeParams, parity: u8) -> ComputationGraph {
    let n = CIRC;
    let k = K0 + i64::from(parity);
    let named = [
        Label(D, k - 1),
        Label(A, k - 1),
        Label(D, k),
        Label(A, k),
        Label(B, k),
        Label(C, k),
        Label(D, k - 1 + n),
        Label(A, k - 1 + n),
        Label(D, k + n),
        Label(A, k + n),
        Label(B, k + n),
        Label(C, k + n),
    ];
    let mut ctrl = Vec::new();
    for base in [k, k + n] {
        ctrl.push((Label(B, base - 1), bsl_control_sign(base - 1)));
        ctrl.push((Label(C, base + 1), bsl_control_sign(base + 1)));
    }
    let outputs = [Label(D, k - 1 + 2 * n), Label(D, k + 2 * n)];
    let mut g = Region::new(params, parity);
    g.labels = named.to_vec();
    g.labels.extend(ctrl.iter().map(|c| c.0));
    g.labels.extend_from_slice(&outputs);
    g.inputs = alloc::vec![Label(D, k - 1), Label(D, k)];
    g.outputs = outputs.to_vec();
    g.free = named.to_vec();
    g.controls = ctrl;
    g.mixing = [k - 1, k, k - 1 + n, k + n].iter().map(|&t| (Label(D, t), Label(A, t))).collect();
    g.mixing.push((Label(B, k), Label(C, k)));
    g.mixing.push((Label(B, k + n), Label(C, k + n)));
    g.build()
}

fn mbsl_cz(params: LatticeParams, parity: u8) -> ComputationGraph {
    let (n, k) = (CIRC, K0);
    let named = [
        Label(C, k - 1),
        Label(D, k - 1),
        Label(C, k),
        Label(D, k),
        Label(A, k),
        Label(B, k),
        Label(C, k - 1 + n),
        Label(D, k - 1 + n),
        Label(C, k + n),
        Label(D, k + n),
    ];
    let ctrl = [
        Label(A, k - 1),
        Label(B, k + 1),
        Label(A, k + n - 1),
        Label(B, k + n),
        Label(A, k + n),
        Label(B, k + n + 1),
    ];
    let outputs = [Label(C, k - 1 + 2 * n), Label(C, k + 2 * n)];
    let mut g = Region::new(params, parity);
    g.labels = named.to_vec();
    g.labels.extend_from_slice(&ctrl);
    g.labels.extend_from_slice(&outputs);
    g.inputs = alloc::vec![Label(C, k - 1), Label(C, k)];
    g.outputs = outputs.to_vec();
    g.free = named.to_vec();
    g.controls = ctrl.iter().map(|&l| (l, 1.0)).collect();
    g.mixing = [k - 1, k, k - 1 + n, k + n].iter().map(|&t| (Label(C, t), Label(D, t))).collect();
    g.mixing.push((Label(A, k), Label(B, k)));
    g.build()
}
