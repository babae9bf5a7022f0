use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const AXES: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidPauli(other)),
        }
    }
}

/// Bit masks describing how a Pauli string acts on computational basis states.
///
/// `P|b> = phase * (-1)^{popcount(b & z)} |b ^ x>` with `phase = i^{#Y}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub phase: C64,
}

impl PauliMasks {
    /// Sign-and-phase factor picked up by basis state `b`.
    #[inline]
    pub fn factor(&self, b: usize) -> C64 {
        if (b & self.z).count_ones().is_multiple_of(2) {
            self.phase
        } else {
            -self.phase
        }
    }
}

/// Tensor product of single-qubit Paulis. Label 0 is qubit 1, the most
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    labels: Vec<Pauli>,
}

impl PauliString {
    pub fn new(labels: Vec<Pauli>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Shape("empty Pauli string".into()));
        }
        Ok(Self { labels })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            labels: vec![Pauli::I; n],
        }
    }

    /// `p` on qubit `q` (0-based) of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self> {
        if q >= n {
            return Err(Error::SupportOutOfRange { index: q, n_qubits: n });
        }
        let mut s = Self::identity(n);
        s.labels[q] = p;
        Ok(s)
    }

    /// `p ⊗ p` on qubits `i` and `j`.
    pub fn pair(n: usize, i: usize, j: usize, p: Pauli) -> Result<Self> {
        for q in [i, j] {
            if q >= n {
                return Err(Error::SupportOutOfRange { index: q, n_qubits: n });
            }
        }
        if i == j {
            return Err(Error::Shape(format!("pair support repeats qubit {i}")));
        }
        let mut s = Self::identity(n);
        s.labels[i] = p;
        s.labels[j] = p;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.labels
    }

    pub fn is_identity(&self) -> bool {
        self.labels.iter().all(|&p| p == Pauli::I)
    }

    pub fn support(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn masks(&self) -> PauliMasks {
        let n = self.labels.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut n_y = 0;
        for (q, &p) in self.labels.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y += 1;
                }
            }
        }
        let phase = match n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        PauliMasks { x, z, phase }
    }

    /// Dense `2^n × 2^n` matrix. Only meant for small registers.
    pub fn matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.labels.len();
        let m = self.masks();
        let mut out = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            out[(b ^ m.x, b)] = m.factor(b);
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.labels {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s.trim().chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    fn single(p: Pauli) -> DMatrix<C64> {
        let m = p.matrix();
        DMatrix::from_fn(2, 2, |r, c| m[r][c])
    }

    #[test]
    fn parse_and_display() {
        let s: PauliString = "xIz".parse().unwrap();
        assert_eq!(s.to_string(), "XIZ");
        assert_eq!(s.support(), vec![0, 2]);
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn matrix_matches_kronecker_products() {
        for a in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            for b in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
                let s = PauliString::new(vec![a, b]).unwrap();
                let expected = kron(&single(a), &single(b));
                assert!((s.matrix() - expected).norm() < 1e-15, "{s}");
            }
        }
    }

    #[test]
    fn qubit_one_is_most_significant() {
        let s = PauliString::single(3, 0, Pauli::X).unwrap();
        assert_eq!(s.masks().x, 0b100);
    }
}
