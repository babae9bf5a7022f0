use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::eigen::{hermitian_deviation, EigenSystem};
use super::pauli::{PauliMasks, PauliString};
use crate::config::tolerances;
use crate::{Error, Result, C64};

/// Hermitian matrix acting on an ordered set of qubits. `support[0]` is the
/// most significant bit of the local index.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHermitian {
    matrix: DMatrix<C64>,
    support: Vec<usize>,
}

impl DenseHermitian {
    pub fn new(matrix: DMatrix<C64>, support: Vec<usize>) -> Result<Self> {
        if support.is_empty() || support.len() > 16 {
            return Err(Error::Shape(format!("dense support of size {}", support.len())));
        }
        let dim = 1usize << support.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Shape(format!(
                "{}x{} matrix on {} qubits",
                matrix.nrows(),
                matrix.ncols(),
                support.len()
            )));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::Shape("dense support repeats a qubit".into()));
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > tolerances().hermitian {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { matrix, support })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

/// Hermitian generator `G` of a rotation `exp((i/2) α G)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Pauli(PauliString),
    Dense(DenseHermitian),
}

impl From<PauliString> for Generator {
    fn from(p: PauliString) -> Self {
        Generator::Pauli(p)
    }
}

impl Generator {
    pub fn support(&self) -> Vec<usize> {
        match self {
            Generator::Pauli(p) => p.support(),
            Generator::Dense(d) => d.support.clone(),
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        self.support().len() == 1
    }

    /// Matrix on the generator's own qubits: all `n` qubits of a Pauli string,
    /// or the dense support.
    pub fn local_matrix(&self) -> DMatrix<C64> {
        match self {
            Generator::Pauli(p) => p.matrix(),
            Generator::Dense(d) => d.matrix.clone(),
        }
    }

    /// Operator embedded into the full `2^n`-dimensional register.
    pub fn embedded_matrix(&self, n_qubits: usize) -> Result<DMatrix<C64>> {
        let compiled = self.compile(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut out = DMatrix::zeros(dim, dim);
        let mut basis = vec![C64::new(0.0, 0.0); dim];
        let mut image = vec![C64::new(0.0, 0.0); dim];
        for col in 0..dim {
            basis.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            basis[col] = C64::new(1.0, 0.0);
            compiled.apply(&basis, &mut image);
            for (row, v) in image.iter().enumerate() {
                out[(row, col)] = *v;
            }
        }
        Ok(out)
    }

    /// True when both generators are the same operator up to a nonzero real factor.
    pub fn is_parallel_to(&self, other: &Generator, n_qubits: usize) -> Result<bool> {
        if let (Generator::Pauli(a), Generator::Pauli(b)) = (self, other) {
            return Ok(a == b);
        }
        let a = self.embedded_matrix(n_qubits)?;
        let b = other.embedded_matrix(n_qubits)?;
        let na = a.norm();
        let nb = b.norm();
        if na == 0.0 || nb == 0.0 {
            return Ok(na == nb);
        }
        // parallel iff |<A,B>| = |A||B| (Frobenius Cauchy-Schwarz equality)
        let overlap = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>();
        Ok((overlap.norm() - na * nb).abs() <= 1e-10 * na * nb)
    }

    /// Validates the generator against an `n`-qubit register and precomputes
    /// what the hot loops need.
    pub fn compile(&self, n_qubits: usize) -> Result<CompiledGenerator> {
        match self {
            Generator::Pauli(p) => {
                if p.n_qubits() != n_qubits {
                    return Err(Error::DimensionMismatch {
                        expected: n_qubits,
                        found: p.n_qubits(),
                    });
                }
                Ok(CompiledGenerator::Pauli(p.masks()))
            }
            Generator::Dense(d) => {
                if let Some(&index) = d.support.iter().find(|&&q| q >= n_qubits) {
                    return Err(Error::SupportOutOfRange { index, n_qubits });
                }
                let bits = d.support.iter().map(|&q| 1usize << (n_qubits - 1 - q)).collect();
                Ok(CompiledGenerator::Dense {
                    eigen: EigenSystem::of_hermitian(&d.matrix)?,
                    matrix: d.matrix.clone(),
                    bits,
                    dim: 1 << n_qubits,
                })
            }
        }
    }
}

/// A generator bound to a register size.
#[derive(Debug, Clone)]
pub enum CompiledGenerator {
    Pauli(PauliMasks),
    Dense {
        eigen: EigenSystem,
        matrix: DMatrix<C64>,
        /// Register bit for each support qubit, most significant local bit first.
        bits: Vec<usize>,
        dim: usize,
    },
}

impl CompiledGenerator {
    /// `out = G psi`.
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        match self {
            CompiledGenerator::Pauli(m) => {
                for (b, slot) in out.iter_mut().enumerate() {
                    let src = b ^ m.x;
                    *slot = m.factor(src) * psi[src];
                }
            }
            CompiledGenerator::Dense { matrix, bits, dim, .. } => {
                apply_local(matrix, bits, *dim, psi, out);
            }
        }
    }

    /// `psi <- exp((i/2) angle G) psi`.
    pub fn rotate(&self, psi: &mut [C64], angle: f64) {
        let half = 0.5 * angle;
        match self {
            CompiledGenerator::Pauli(m) => {
                let c = half.cos();
                let s = half.sin();
                let is = C64::new(0.0, s);
                if m.x == 0 {
                    for (b, amp) in psi.iter_mut().enumerate() {
                        *amp *= C64::new(c, 0.0) + is * m.factor(b);
                    }
                    return;
                }
                let top = 1usize << (usize::BITS - 1 - m.x.leading_zeros());
                for b in 0..psi.len() {
                    if b & top != 0 {
                        continue;
                    }
                    let partner = b ^ m.x;
                    let a = psi[b];
                    let p = psi[partner];
                    // (P psi)[b] = factor(partner) psi[partner]
                    psi[b] = a * c + is * m.factor(partner) * p;
                    psi[partner] = p * c + is * m.factor(b) * a;
                }
            }
            CompiledGenerator::Dense { eigen, bits, dim, .. } => {
                let unitary = eigen.map_spectrum(|l| C64::from_polar(1.0, half * l));
                let input = psi.to_vec();
                apply_local(&unitary, bits, *dim, &input, psi);
            }
        }
    }
}

fn apply_local(op: &DMatrix<C64>, bits: &[usize], dim: usize, psi: &[C64], out: &mut [C64]) {
    let local = op.nrows();
    let mask: usize = bits.iter().sum();
    let offsets: Vec<usize> = (0..local)
        .map(|l| {
            bits.iter()
                .enumerate()
                .filter(|(k, _)| l & (1 << (bits.len() - 1 - k)) != 0)
                .map(|(_, &bit)| bit)
                .sum()
        })
        .collect();
    let mut gathered = DVector::zeros(local);
    for base in (0..dim).filter(|b| b & mask == 0) {
        for (l, off) in offsets.iter().enumerate() {
            gathered[l] = psi[base | off];
        }
        let mapped = op * &gathered;
        for (l, off) in offsets.iter().enumerate() {
            out[base | off] = mapped[l];
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GeneratorRepr {
    Pauli(PauliString),
    Dense {
        support: Vec<usize>,
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
}

impl Serialize for Generator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Generator::Pauli(p) => GeneratorRepr::Pauli(p.clone()),
            Generator::Dense(d) => {
                let rows = d.matrix.nrows();
                GeneratorRepr::Dense {
                    support: d.support.clone(),
                    re: (0..rows).map(|r| d.matrix.row(r).iter().map(|v| v.re).collect()).collect(),
                    im: (0..rows).map(|r| d.matrix.row(r).iter().map(|v| v.im).collect()).collect(),
                }
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Generator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match GeneratorRepr::deserialize(deserializer)? {
            GeneratorRepr::Pauli(p) => Ok(Generator::Pauli(p)),
            GeneratorRepr::Dense { support, re, im } => {
                let dim = re.len();
                if im.len() != dim || re.iter().chain(im.iter()).any(|row| row.len() != dim) {
                    return Err(D::Error::custom("dense generator rows must be square"));
                }
                let m = DMatrix::from_fn(dim, dim, |r, c| C64::new(re[r][c], im[r][c]));
                DenseHermitian::new(m, support).map(Generator::Dense).map_err(D::Error::custom)
            }
        }
    }
}
