//! GKP spike variances and the quadrature-correction error probability.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::GatePlan;
use crate::reduction::GateResult;

/// Variance bookkeeping for one noisy gate acting on GKP inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkpBudget {
    /// Spike variance of encoded and ancilla states.
    pub delta: f64,
    /// Gate-noise variance per output quadrature.
    pub sigma2: Vec<f64>,
    /// Output spike variance per quadrature.
    pub delta_prime: Vec<f64>,
    pub perr: f64,
}

impl GkpBudget {
    /// Budget of a reduced gate at its own squeezing, spikes at `e^{-2r}/2`.
    pub fn for_gate(result: &GateResult) -> Result<Self> {
        let delta = spike_variance(result.r);
        let sigma2 = result.noise_variances();
        Self::from_parts(result.g.matrix(), sigma2, delta)
    }

    /// Same spikes with the gate noise switched off.
    pub fn noiseless(result: &GateResult) -> Result<Self> {
        let n = result.g.matrix().nrows();
        Self::from_parts(result.g.matrix(), alloc::vec![0.0; n], spike_variance(result.r))
    }

    pub fn from_parts(g: &DMatrix<f64>, sigma2: Vec<f64>, delta: f64) -> Result<Self> {
        let delta_prime = propagate_spikes(g, &sigma2, delta)?;
        let perr = error_probability(&delta_prime, delta)?;
        Ok(Self { delta, sigma2, delta_prime, perr })
    }
}

/// Spike variance matching the resource squeezing, `e^{-2r}/2`.
pub fn spike_variance(r: f64) -> f64 {
    libm::exp(-2.0 * r) / 2.0
}

/// `δ Σ_j G_ij² + σ²_i` per output quadrature.
pub fn propagate_spikes(g: &DMatrix<f64>, sigma2: &[f64], delta: f64) -> Result<Vec<f64>> {
    if g.nrows() != sigma2.len() {
        return Err(Error::Dimension { expected: g.nrows(), found: sigma2.len() });
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("spike variance must be nonnegative, got {delta}")));
    }
    Ok(g.row_iter()
        .zip(sigma2)
        .map(|(row, s)| delta * row.iter().map(|v| v * v).sum::<f64>() + s)
        .collect())
}

/// Probability that at least one quadrature correction lands in the wrong
/// bin: `1 - Π erf(√π / (2 √(2 (δ'_i + δ))))`.
///
/// Evaluated as `-expm1(Σ log1p(-erfc(.)))`, which keeps full relative
/// precision when the result is tiny.
pub fn error_probability(delta_prime: &[f64], delta: f64) -> Result<f64> {
    if delta_prime.is_empty() {
        return Err(Error::InvalidParameter("no quadratures".into()));
    }
    let mut log_success = 0.0;
    for &dp in delta_prime {
        let v = dp + delta;
        if !(v > 0.0) || !(dp > 0.0) {
            return Err(Error::Domain(format!("variances must be positive, got δ' = {dp}, δ = {delta}")));
        }
        let z = libm::sqrt(PI) / (2.0 * libm::sqrt(2.0 * v));
        log_success += libm::log1p(-libm::erfc(z));
    }
    Ok(-libm::expm1(log_success))
}

/// `P_err` of a plan at its own squeezing, with the gate noise of the
/// chained (and, for macronode steps, restricted) result.
pub fn gate_error_probability(plan: &GatePlan) -> Result<f64> {
    Ok(GkpBudget::for_gate(&plan.evaluate()?)?.perr)
}

/// `P_err` at squeezing `r`, building the plan with `build` when `r > 0`.
///
/// Without squeezing every edge weight is zero, so no information reaches
/// the output and the gate noise diverges; the probability takes its limit 1.
pub fn error_probability_at(r: f64, build: impl FnOnce(f64) -> Result<GatePlan>) -> Result<f64> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("squeezing parameter must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    gate_error_probability(&build(r)?)
}

/// Displacement that moves a homodyne value `m` onto the nearest point of
/// the `√π` lattice.
pub fn correction_shift(m: f64) -> f64 {
    let a = libm::sqrt(PI);
    let u = crate::rem_euclid(m, a);
    if u < a / 2.0 {
        -u
    } else {
        a - u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{gaussian_unitary, Gaussian};
    use proptest::prelude::*;

    // Independent erf: Maclaurin series, adequate for moderate arguments.
    fn erf_series(x: f64) -> f64 {
        let mut sum = 0.0f64;
        let mut term = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) || n < 3.0 {
            sum += term / (2.0 * n + 1.0);
            n += 1.0;
            term *= -x * x / n;
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn spike_propagation_examples() {
        let d = 0.013;
        let i = gaussian_unitary(Gaussian::Identity).unwrap();
        let f = gaussian_unitary(Gaussian::Rotation(core::f64::consts::FRAC_PI_2)).unwrap();
        let p = gaussian_unitary(Gaussian::Shear(1.0)).unwrap();
        let cz = gaussian_unitary(Gaussian::Cz(1.0)).unwrap();
        assert_eq!(propagate_spikes(i.matrix(), &[0.0; 2], d).unwrap(), [d, d]);
        assert_eq!(propagate_spikes(f.matrix(), &[0.0; 2], d).unwrap(), [d, d]);
        assert_eq!(propagate_spikes(p.matrix(), &[0.0; 2], d).unwrap(), [d, 2.0 * d]);
        assert_eq!(propagate_spikes(cz.matrix(), &[0.0; 4], d).unwrap(), [d, d, 2.0 * d, 2.0 * d]);
        assert!(propagate_spikes(cz.matrix(), &[0.0; 2], d).is_err());
    }

    #[test]
    fn single_quadrature_value() {
        // erf itself to 1e-14 relative; the series oracle cancels below that
        let erf = erf_series(PI.sqrt() / (2.0 * 0.1f64.sqrt()));
        let got = error_probability(&[0.03], 0.02).unwrap();
        assert!(((1.0 - got) - erf).abs() < 1e-14 * erf, "{got} {erf}");
    }

    #[test]
    fn limits() {
        assert!(error_probability(&[1e-6, 1e-6], 1e-6).unwrap() < 1e-100);
        assert!(error_probability(&[1e6, 1e6], 1e6).unwrap() > 0.99);
        assert!(error_probability(&[0.0], 0.1).is_err());
        assert!(error_probability(&[0.1], -0.1).is_err());
    }

    #[test]
    fn correction_shift_examples() {
        let a = PI.sqrt();
        assert_eq!(correction_shift(0.0), 0.0);
        assert!((correction_shift(a / 4.0) + a / 4.0).abs() < 1e-15);
        assert!((correction_shift(0.9 * a) - 0.1 * a).abs() < 1e-15);
        assert!((correction_shift(-0.1 * a) - 0.1 * a).abs() < 1e-15);
    }

    #[test]
    fn gate_probabilities() {
        use crate::gates::{basis_for, qrl_cz_plan, GateId};
        use crate::lattice::Lattice;
        let r = 1.2;
        let pi = gate_error_probability(&basis_for(Lattice::Dbsl, GateId::I, r, 0).unwrap()).unwrap();
        let pf = gate_error_probability(&basis_for(Lattice::Dbsl, GateId::F, r, 0).unwrap()).unwrap();
        let pp = gate_error_probability(&basis_for(Lattice::Dbsl, GateId::P1, r, 0).unwrap()).unwrap();
        assert!(pi < pf && pi < pp);
        // QRL CZ: δ' = (2δ, 2δ, δ, δ) + σ² with σ² = (1/T² + 1) ε/2
        let t = libm::tanh(2.0 * r);
        let (d, s2) = (spike_variance(r), (1.0 / (t * t) + 1.0) / libm::cosh(2.0 * r) / 2.0);
        let want = error_probability(&[2.0 * d + s2, 2.0 * d + s2, d + s2, d + s2], d).unwrap();
        let got = gate_error_probability(&qrl_cz_plan(r).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
        assert_eq!(error_probability_at(0.0, |_| unreachable!()).unwrap(), 1.0);
        assert!(error_probability_at(-1.0, |_| unreachable!()).is_err());
        let small = error_probability_at(1e-3, |r| basis_for(Lattice::Mbsl, GateId::I, r, 0)).unwrap();
        assert!(small > 0.99);
        let large = error_probability_at(5.0, |r| basis_for(Lattice::Mbsl, GateId::I, r, 0)).unwrap();
        assert!(large < 1e-20);
    }

    proptest! {
        #[test]
        fn monotone_and_symmetric(v in proptest::collection::vec(1e-4..2.0f64, 1..5), d in 1e-4..1.0f64, bump in 1e-3..1.0f64, k in 0usize..5) {
            let p = error_probability(&v, d).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let k = k % v.len();
            let mut w = v.clone();
            w[k] += bump;
            prop_assert!(error_probability(&w, d).unwrap() > p);
            prop_assert!(error_probability(&v, d + bump).unwrap() > p);
            let mut rev = v.clone();
            rev.reverse();
            prop_assert!((error_probability(&rev, d).unwrap() - p).abs() <= 1e-15 * p.max(1e-300) * 10.0);
        }

        #[test]
        fn shift_lands_on_lattice(m in -50.0..50.0f64) {
            let a = PI.sqrt();
            let s = correction_shift(m);
            prop_assert!(s.abs() <= a / 2.0 + 1e-12);
            let q = (m + s) / a;
            prop_assert!((q - q.round()).abs() < 1e-9);
        }
    }
}
