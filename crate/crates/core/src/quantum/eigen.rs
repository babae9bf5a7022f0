use nalgebra::{DMatrix, SymmetricEigen};

use crate::config::tolerances;
use crate::{Error, Result, C64};

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Column `a` is the eigenvector for `values[a]`.
    pub vectors: DMatrix<C64>,
}

pub(crate) fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

impl EigenSystem {
    pub fn of_hermitian(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let deviation = hermitian_deviation(m);
        if deviation > tolerances().hermitian {
            return Err(Error::NotHermitian { deviation });
        }
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..m.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&a| eig.eigenvalues[a]).collect();
        let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Σ_a f(λ_a) |λ_a><λ_a|`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (a, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(a).apply(|v| *v *= s);
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.map_spectrum(|l| C64::new(l, 0.0))
    }
}
