//! Dense statevector simulation and fidelity geometry.
//!
//! Rotations follow `exp((i/2) α G)` throughout. Pauli strings act through
//! bit masks so a gate costs `O(2^n)`; dense generators are exponentiated on
//! their own support and applied as local matrices.

mod eigen;
mod generator;
mod pauli;
mod state;

pub use eigen::EigenSystem;
pub use generator::{CompiledGenerator, DenseHermitian, Generator};
pub use pauli::{Pauli, PauliMasks, PauliString};
pub use state::StateVector;

use crate::config::tolerances;
use crate::{Error, Result, C64};

/// `exp((i/2) angle g)|state>`.
pub fn apply_rotation(state: &StateVector, g: &Generator, angle: f64) -> Result<StateVector> {
    state.rotated(g, angle)
}

/// `|<s1|s2>|^2`, clamped to `[0, 1]`.
pub fn fidelity(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    Ok(s1.inner(s2)?.norm_sqr().clamp(0.0, 1.0))
}

/// Fubini-Study distance taken as `arccos F`, in `[0, π/2]`.
pub fn fubini_study_distance(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    Ok(fidelity(s1, s2)?.acos())
}

/// `<ψ|O|ψ>` for a Pauli observable.
pub fn expectation(state: &StateVector, obs: &PauliString) -> Result<f64> {
    if obs.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            found: obs.n_qubits(),
        });
    }
    let m = obs.masks();
    let psi = state.amplitudes();
    let value: C64 = psi
        .iter()
        .enumerate()
        .map(|(b, a)| psi[b ^ m.x].conj() * m.factor(b) * a)
        .sum();
    debug_assert!(value.im.abs() <= 1e-12, "Pauli expectation has imaginary part {}", value.im);
    Ok(value.re)
}

/// Spectral decomposition of the generator on its own qubits.
pub fn eigendecompose(g: &Generator) -> Result<EigenSystem> {
    EigenSystem::of_hermitian(&g.local_matrix())
}

/// Weight derivative of the fidelity between two encoded states after a
/// shared gate `exp((i/2) α(w, x) G)`.
///
/// `psi1`, `psi2` are the states before the gate, `delta_alpha` is
/// `α(w, x1) - α(w, x2)` and `d_delta_alpha_dw` its derivative in the weight.
/// The relative operator between the two branches is `exp(-(i/2) Δα G)`, so
/// the eigen-sum runs over the rescaled spectrum `μ_a = -λ_a / 2`:
///
/// `∂F/∂w = i Σ_{a,b} ∂Δα (μ_a - μ_b) e^{iΔα(μ_a - μ_b)} c*_a(1) c_a(2) c_b(1) c*_b(2)`
/// with `c_a(k) = <λ_a|ψ_k>`.
pub fn fidelity_weight_derivative(
    psi1: &StateVector,
    psi2: &StateVector,
    g: &Generator,
    delta_alpha: f64,
    d_delta_alpha_dw: f64,
) -> Result<f64> {
    let n = psi1.n_qubits();
    if psi2.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi2.n_qubits(),
        });
    }
    let eig = EigenSystem::of_hermitian(&g.embedded_matrix(n)?)?;
    let project = |psi: &StateVector| -> Vec<C64> {
        (0..eig.dim())
            .map(|a| {
                eig.vectors
                    .column(a)
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(v, p)| v.conj() * p)
                    .sum()
            })
            .collect()
    };
    let c1 = project(psi1);
    let c2 = project(psi2);
    let mu: Vec<f64> = eig.values.iter().map(|l| -0.5 * l).collect();
    // p_a = c*_a(1) c_a(2); the summand is p_a * conj(p_b) times the spectral factor
    let p: Vec<C64> = c1.iter().zip(&c2).map(|(a, b)| a.conj() * b).collect();

    let mut total = C64::new(0.0, 0.0);
    for a in 0..mu.len() {
        for b in 0..mu.len() {
            let gap = mu[a] - mu[b];
            if gap == 0.0 {
                continue;
            }
            let phase = C64::from_polar(1.0, delta_alpha * gap);
            total += phase * gap * p[a] * p[b].conj();
        }
    }
    let derivative = C64::new(0.0, d_delta_alpha_dw) * total;
    let scale = 1.0 + derivative.re.abs();
    if derivative.im.abs() > tolerances().imaginary * scale {
        return Err(Error::ImaginaryResidual(derivative.im));
    }
    Ok(derivative.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sx() -> Generator {
        Generator::Pauli("X".parse().unwrap())
    }

    fn sz() -> Generator {
        Generator::Pauli("Z".parse().unwrap())
    }

    #[test]
    fn zero_angle_is_identity() {
        let s = StateVector::normalized(2, vec![C64::new(0.1, 0.2), C64::new(0.3, -0.4), C64::new(0.5, 0.0), C64::new(-0.2, 0.1)]).unwrap();
        let g = Generator::Pauli("XY".parse().unwrap());
        assert_eq!(apply_rotation(&s, &g, 0.0).unwrap(), s);
    }

    #[test]
    fn x_rotation_by_pi_flips() {
        let out = apply_rotation(&StateVector::zero(1), &sx(), PI).unwrap();
        let a = out.amplitudes();
        assert!(a[0].norm() < 1e-15);
        assert!((a[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_rejects_bad_inputs() {
        let s = StateVector::zero(2);
        assert!(apply_rotation(&s, &sx(), 0.1).is_err());
        assert!(apply_rotation(&StateVector::zero(1), &sx(), f64::NAN).is_err());
    }

    #[test]
    fn basis_fidelities() {
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert_eq!(fubini_study_distance(&zero, &zero).unwrap(), 0.0);
        assert!((fubini_study_distance(&zero, &one).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(fidelity(&zero, &StateVector::zero(2)).is_err());
    }

    #[test]
    fn distance_is_monotone_in_fidelity() {
        // states cos(t)|0> + sin(t)|1> with F = cos^2 t against |0>
        let zero = StateVector::zero(1);
        let mut last = -1.0;
        for f in [0.9f64, 0.5, 0.1] {
            let t = f.sqrt().acos();
            let s = StateVector::normalized(1, vec![C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]).unwrap();
            let d = fubini_study_distance(&zero, &s).unwrap();
            assert!((fidelity(&zero, &s).unwrap() - f).abs() < 1e-12);
            assert!(d > last);
            last = d;
        }
    }

    #[test]
    fn z_expectation_values() {
        let z: PauliString = "Z".parse().unwrap();
        assert_eq!(expectation(&StateVector::zero(1), &z).unwrap(), 1.0);
        assert_eq!(expectation(&StateVector::basis(1, 1), &z).unwrap(), -1.0);
        let psi = apply_rotation(&StateVector::zero(1), &sx(), PI / 2.0).unwrap();
        assert!(expectation(&psi, &z).unwrap().abs() < 1e-15);
        for x in [-2.0, -0.3, 0.7, 2.9] {
            let psi = apply_rotation(&StateVector::zero(1), &sx(), x).unwrap();
            assert!((expectation(&psi, &z).unwrap() - f64::cos(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn z_expectations_match_pauli_expectation() {
        let s = StateVector::normalized(
            3,
            (0..8).map(|k| C64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos())).collect(),
        )
        .unwrap();
        let fast = s.z_expectations();
        for q in 0..3 {
            let z = PauliString::single(3, q, Pauli::Z).unwrap();
            assert!((expectation(&s, &z).unwrap() - fast[q]).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_spectra() {
        let e = eigendecompose(&sz()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        let xx = eigendecompose(&Generator::Pauli("XX".parse().unwrap())).unwrap();
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (v, e) in xx.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_vanishes_on_single_eigenvector_support() {
        // psi2 = |0> is a σ_z eigenvector, so only a = b terms survive
        let psi1 = apply_rotation(&StateVector::zero(1), &sx(), 0.8).unwrap();
        let psi2 = StateVector::zero(1);
        let d = fidelity_weight_derivative(&psi1, &psi2, &sz(), 0.4, 1.3).unwrap();
        assert!(d.abs() < 1e-15);
    }
}
