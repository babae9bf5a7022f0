use crate::config::tolerances;
use crate::{Error, Result, C64};

use super::generator::Generator;

/// Normalized pure state of `n` qubits. Qubit 1 is the most significant bit
/// of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(n_qubits >= 1, "a register needs at least one qubit");
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Wraps amplitudes that must already be normalized.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm = l2(&amps);
        if (norm - 1.0).abs() > tolerances().norm {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(n_qubits: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm = l2(&amps);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `exp((i/2) angle G)|self>` as a new state.
    pub fn rotated(&self, g: &Generator, angle: f64) -> Result<StateVector> {
        let mut out = self.clone();
        out.rotate_in_place(g, angle)?;
        Ok(out)
    }

    pub fn rotate_in_place(&mut self, g: &Generator, angle: f64) -> Result<()> {
        if !angle.is_finite() {
            return Err(Error::Shape(format!("rotation angle {angle} is not finite")));
        }
        g.compile(self.n_qubits)?.rotate(&mut self.amps, angle);
        Ok(())
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    /// `<Z_q>` for every qubit, qubit 1 first.
    pub fn z_expectations(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out = vec![0.0; n];
        for (b, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, acc) in out.iter_mut().enumerate() {
                if b & (1 << (n - 1 - q)) == 0 {
                    *acc += p;
                } else {
                    *acc -= p;
                }
            }
        }
        out
    }
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits >= usize::BITS as usize {
        return Err(Error::Shape(format!("unsupported qubit count {n_qubits}")));
    }
    let expected = 1usize << n_qubits;
    if len != expected {
        return Err(Error::LengthMismatch {
            what: "amplitude array",
            expected,
            found: len,
        });
    }
    Ok(())
}

fn l2(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
