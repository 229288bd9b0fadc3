//! Elimination of the anti-squeezed ancilla quadratures.
//!
//! The pre-measurement circuit is `S = S_R S_BS S_CZ`. Measured x-quadratures
//! are set to their (known) outcomes and the unknown ancilla x-quadratures are
//! solved for, leaving the output as a linear map of the inputs (the gate `G`),
//! of the squeezed ancilla p-quadratures (the noise `N`) and of the outcomes
//! (the displacement `D`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BasisSetting, ComputationGraph, Lattice};
use crate::symplectic::{embed, gaussian_unitary, Gaussian, SymplecticMatrix};

/// Bases whose elimination block has a smaller reciprocal condition number
/// are rejected.
pub const RCOND_MIN: f64 = 1e-12;

/// Gate, noise and displacement matrices of one or more chained steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    #[serde(rename = "G")]
    pub g: SymplecticMatrix,
    /// Rows are output quadratures, columns the ancilla p-quadratures.
    #[serde(rename = "N", with = "crate::matrix_serde")]
    pub n: DMatrix<f64>,
    /// Rows are output quadratures, columns the measurement outcomes.
    #[serde(rename = "D", with = "crate::matrix_serde")]
    pub d: DMatrix<f64>,
    pub contributing_modes: Vec<String>,
    pub lattice: Lattice,
    pub r: f64,
    pub epsilon: f64,
    /// One basis per chained step.
    pub basis: Vec<BasisSetting>,
}

impl GateResult {
    pub fn n_modes(&self) -> usize {
        self.g.n_modes()
    }

    /// `Σ_j N_ij²` per output quadrature.
    pub fn noise_factors(&self) -> Vec<f64> {
        noise_factors(self)
    }

    /// Added variance per output quadrature, `factor * ε/2`.
    pub fn noise_variances(&self) -> Vec<f64> {
        self.noise_factors().iter().map(|f| f * self.epsilon / 2.0).collect()
    }

    /// Keeps only the listed output modes (rows) and the matching input
    /// modes (columns of `G`). Used to read one computation mode of a
    /// two-mode macronode step.
    pub fn restrict(&self, modes: &[usize]) -> Result<GateResult> {
        let n = self.n_modes();
        crate::symplectic::check_modes(modes, n)?;
        let rows: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|m| n + m)).collect();
        let g = self.g.matrix();
        let k = rows.len();
        Ok(GateResult {
            g: SymplecticMatrix::from_matrix_unchecked(DMatrix::from_fn(k, k, |i, j| g[(rows[i], rows[j])])),
            n: DMatrix::from_fn(k, self.n.ncols(), |i, j| self.n[(rows[i], j)]),
            d: DMatrix::from_fn(k, self.d.ncols(), |i, j| self.d[(rows[i], j)]),
            ..self.clone()
        })
    }
}

/// `Σ_j N_ij²` per output quadrature.
pub fn noise_factors(result: &GateResult) -> Vec<f64> {
    result.n.row_iter().map(|row| row.iter().map(|v| v * v).sum()).collect()
}

/// Reduction engine for one graph with the basis-independent part
/// `S_BS S_CZ` precomputed.
#[derive(Debug, Clone)]
pub struct Reducer {
    graph: ComputationGraph,
    /// Measured modes: inputs then ancillas.
    meas: Vec<usize>,
    anc: Vec<usize>,
    /// Rows `x_j` and `p_j` of `S_BS S_CZ` for each measured mode, split into
    /// the eliminated columns (`u`) and the kept columns (`v`).
    ux: DMatrix<f64>,
    up: DMatrix<f64>,
    vx: DMatrix<f64>,
    vp: DMatrix<f64>,
    y: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Reducer {
    pub fn new(graph: &ComputationGraph) -> Result<Self> {
        graph.validate()?;
        let n = graph.n_modes;
        if graph.input_modes.len() != graph.output_modes.len() {
            return Err(Error::MalformedGraph(format!(
                "{} inputs but {} outputs",
                graph.input_modes.len(),
                graph.output_modes.len()
            )));
        }
        let t0 = network(graph)?;
        let meas = graph.homodyne_modes();
        let anc = graph.ancilla_modes();
        // kept columns: input x, input p, ancilla p
        let qin: Vec<usize> = graph
            .input_modes
            .iter()
            .copied()
            .chain(graph.input_modes.iter().map(|i| n + i))
            .chain(anc.iter().map(|a| n + a))
            .collect();
        let pick = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| t0[(rows[i], cols[j])])
        };
        let xrows: Vec<usize> = meas.clone();
        let prows: Vec<usize> = meas.iter().map(|m| n + m).collect();
        let outrows: Vec<usize> =
            graph.output_modes.iter().copied().chain(graph.output_modes.iter().map(|o| n + o)).collect();
        Ok(Self {
            ux: pick(&xrows, &anc),
            up: pick(&prows, &anc),
            vx: pick(&xrows, &qin),
            vp: pick(&prows, &qin),
            y: pick(&outrows, &anc),
            z: pick(&outrows, &qin),
            graph: graph.clone(),
            meas,
            anc,
        })
    }

    pub fn graph(&self) -> &ComputationGraph {
        &self.graph
    }

    /// Measured modes in the column order of `D`.
    pub fn measured(&self) -> &[usize] {
        &self.meas
    }

    fn angles(&self, basis: &BasisSetting) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.meas.len());
        for &m in &self.meas {
            out.push(*basis.get(&m).ok_or(Error::MissingAngle(m))?);
        }
        for &m in basis.keys() {
            if !self.meas.contains(&m) {
                return Err(Error::InvalidParameter(format!("angle given for unmeasured mode {m}")));
            }
        }
        Ok(out)
    }

    /// Rotated measurement rows `U` and `V` for the given angles.
    fn rotated(&self, angles: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut u = self.ux.clone();
        let mut v = self.vx.clone();
        for (i, &th) in angles.iter().enumerate() {
            let (s, c) = (libm::sin(th), libm::cos(th));
            for j in 0..u.ncols() {
                u[(i, j)] = c * self.ux[(i, j)] + s * self.up[(i, j)];
            }
            for j in 0..v.ncols() {
                v[(i, j)] = c * self.vx[(i, j)] + s * self.vp[(i, j)];
            }
        }
        (u, v)
    }

    /// `(G, N)` only; the optimizer's inner loop.
    pub fn gate_and_noise(&self, basis: &BasisSetting) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (u, v) = self.rotated(&self.angles(basis)?);
        let lu = u.clone().lu();
        let uinv = lu.try_inverse().ok_or(Error::MeasurementDegenerate { rcond: 0.0 })?;
        check_rcond(&u, &uinv)?;
        let w = &uinv * v;
        let m = &self.z - &self.y * w;
        let k = 2 * self.graph.input_modes.len();
        Ok((m.columns(0, k).into_owned(), m.columns(k, m.ncols() - k).into_owned()))
    }

    pub fn reduce(&self, basis: &BasisSetting) -> Result<GateResult> {
        let (u, v) = self.rotated(&self.angles(basis)?);
        let lu = u.clone().lu();
        // the explicit inverse feeds the condition estimate and D = Y U⁻¹
        let uinv = lu.try_inverse().ok_or(Error::MeasurementDegenerate { rcond: 0.0 })?;
        check_rcond(&u, &uinv)?;
        let w = u.lu().solve(&v).ok_or(Error::MeasurementDegenerate { rcond: 0.0 })?;
        let m = &self.z - &self.y * w;
        let d = &self.y * uinv;
        let k = 2 * self.graph.input_modes.len();
        Ok(GateResult {
            g: SymplecticMatrix::from_matrix_unchecked(m.columns(0, k).into_owned()),
            n: m.columns(k, m.ncols() - k).into_owned(),
            d,
            contributing_modes: self.anc.iter().map(|&a| self.graph.labels[a].clone()).collect(),
            lattice: self.graph.lattice,
            r: self.graph.r,
            epsilon: self.graph.epsilon,
            basis: alloc::vec![basis.clone()],
        })
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| libm::fabs(*v)).sum::<f64>()).fold(0.0, f64::max)
}

fn check_rcond(u: &DMatrix<f64>, uinv: &DMatrix<f64>) -> Result<()> {
    let rcond = 1.0 / (one_norm(u) * one_norm(uinv));
    if !(rcond >= RCOND_MIN) {
        return Err(Error::MeasurementDegenerate { rcond: if rcond.is_finite() { rcond } else { 0.0 } });
    }
    Ok(())
}

/// `S_BS S_CZ` for a graph.
pub fn network(graph: &ComputationGraph) -> Result<DMatrix<f64>> {
    let n = graph.n_modes;
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            s[(n + i, j)] = graph.adjacency[(i, j)];
        }
    }
    let bs = gaussian_unitary(Gaussian::BeamSplitter)?;
    for &(i, j) in &graph.mixing_pairs {
        s = embed(&bs, &[i, j], n)?.matrix() * s;
    }
    Ok(s)
}

/// `S_R S_BS S_CZ`, with outputs unrotated.
pub fn total_transformation(graph: &ComputationGraph, basis: &BasisSetting) -> Result<SymplecticMatrix> {
    let n = graph.n_modes;
    let mut rot = SymplecticMatrix::identity(n);
    for (&m, &th) in basis {
        rot = &embed(&gaussian_unitary(Gaussian::Rotation(th))?, &[m], n)? * &rot;
    }
    Ok(SymplecticMatrix::from_matrix_unchecked(rot.matrix() * network(graph)?))
}

/// Gate, noise and displacement matrices of `graph` measured in `basis`.
pub fn reduce(graph: &ComputationGraph, basis: &BasisSetting) -> Result<GateResult> {
    Reducer::new(graph)?.reduce(basis)
}

/// The result of running `first` and then `second`.
pub fn chain(first: &GateResult, second: &GateResult) -> Result<GateResult> {
    let (n1, n2) = (first.g.matrix().nrows(), second.g.matrix().ncols());
    if n1 != n2 {
        return Err(Error::Dimension { expected: n2, found: n1 });
    }
    let g2 = second.g.matrix();
    let hcat = |a: DMatrix<f64>, b: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        m.columns_mut(0, a.ncols()).copy_from(&a);
        m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
        m
    };
    let mut modes = first.contributing_modes.clone();
    modes.extend(second.contributing_modes.iter().cloned());
    let mut basis = first.basis.clone();
    basis.extend(second.basis.iter().cloned());
    Ok(GateResult {
        g: &second.g * &first.g,
        n: hcat(g2 * &first.n, &second.n),
        d: hcat(g2 * &first.d, &second.d),
        contributing_modes: modes,
        lattice: first.lattice,
        r: first.r,
        epsilon: first.epsilon,
        basis,
    })
}

/// Reduces and chains a sequence of steps.
pub fn reduce_steps(steps: &[(ComputationGraph, BasisSetting)]) -> Result<GateResult> {
    let mut it = steps.iter();
    let (g0, b0) = it.next().ok_or_else(|| Error::InvalidParameter("no steps".into()))?;
    let mut acc = reduce(g0, b0)?;
    for (g, b) in it {
        acc = chain(&acc, &reduce(g, b)?)?;
    }
    Ok(acc)
}

/// Output quadratures for given inputs, ancilla p-values and outcomes.
pub fn apply(result: &GateResult, input: &DVector<f64>, p_anc: &DVector<f64>, outcomes: &DVector<f64>) -> DVector<f64> {
    result.g.matrix() * input + &result.n * p_anc + &result.d * outcomes
}
