//! Classical-to-Lie-algebra (CLA) maps `Γ(w, x) = Σ_j α_j(w, x) G_j`.
//!
//! A map pairs distinct generators with coefficient specs. The coefficient
//! Jacobians with respect to weights (`J_W`) and inputs (`J_X`) decide whether
//! a block can tune (full weight rank) and select (full data rank) directions
//! of the state manifold; [`acls_check`] estimates both properties by sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::tolerances;
use crate::quantum::Generator;
use crate::{Error, Result};

/// How a gate angle depends on weights `w` and inputs `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSpec {
    /// `α = w[theta_index]`.
    Constant { theta_index: usize },
    /// `α = x[input_index]`.
    PureData { input_index: usize },
    /// `α = w[offset..offset + d_inp] · x`.
    Bilinear { offset: usize },
    /// `α = w[weight_index] * x[input_index]`, the diagonal bilinear form.
    Product { weight_index: usize, input_index: usize },
    /// Sum of the terms; produced when repeated generators are merged.
    Sum { terms: Vec<AlphaSpec> },
}

impl AlphaSpec {
    pub fn eval(&self, w: &[f64], x: &[f64]) -> f64 {
        match self {
            AlphaSpec::Constant { theta_index } => w[*theta_index],
            AlphaSpec::PureData { input_index } => x[*input_index],
            AlphaSpec::Bilinear { offset } => w[*offset..*offset + x.len()].iter().zip(x).map(|(a, b)| a * b).sum(),
            AlphaSpec::Product { weight_index, input_index } => w[*weight_index] * x[*input_index],
            AlphaSpec::Sum { terms } => terms.iter().map(|t| t.eval(w, x)).sum(),
        }
    }

    pub fn depends_on_data(&self) -> bool {
        match self {
            AlphaSpec::Constant { .. } => false,
            AlphaSpec::PureData { .. } | AlphaSpec::Bilinear { .. } | AlphaSpec::Product { .. } => true,
            AlphaSpec::Sum { terms } => terms.iter().any(AlphaSpec::depends_on_data),
        }
    }

    pub fn depends_on_weights(&self) -> bool {
        match self {
            AlphaSpec::PureData { .. } => false,
            AlphaSpec::Constant { .. } | AlphaSpec::Bilinear { .. } | AlphaSpec::Product { .. } => true,
            AlphaSpec::Sum { terms } => terms.iter().any(AlphaSpec::depends_on_weights),
        }
    }

    /// Adds `scale * ∂α/∂w` into `grad` (length `d_w_total`).
    pub fn add_weight_partials(&self, x: &[f64], scale: f64, grad: &mut [f64]) {
        match self {
            AlphaSpec::Constant { theta_index } => grad[*theta_index] += scale,
            AlphaSpec::PureData { .. } => {}
            AlphaSpec::Bilinear { offset } => {
                for (g, xi) in grad[*offset..*offset + x.len()].iter_mut().zip(x) {
                    *g += scale * xi;
                }
            }
            AlphaSpec::Product { weight_index, input_index } => grad[*weight_index] += scale * x[*input_index],
            AlphaSpec::Sum { terms } => terms.iter().for_each(|t| t.add_weight_partials(x, scale, grad)),
        }
    }

    /// Adds `scale * ∂α/∂x` into `grad` (length `d_inp`).
    pub fn add_data_partials(&self, w: &[f64], scale: f64, grad: &mut [f64]) {
        let d = grad.len();
        match self {
            AlphaSpec::Constant { .. } => {}
            AlphaSpec::PureData { input_index } => grad[*input_index] += scale,
            AlphaSpec::Bilinear { offset } => {
                for (g, wi) in grad.iter_mut().zip(&w[*offset..*offset + d]) {
                    *g += scale * wi;
                }
            }
            AlphaSpec::Product { weight_index, input_index } => grad[*input_index] += scale * w[*weight_index],
            AlphaSpec::Sum { terms } => terms.iter().for_each(|t| t.add_data_partials(w, scale, grad)),
        }
    }

    pub fn validate(&self, d_inp: usize, d_w_total: usize) -> Result<()> {
        match self {
            AlphaSpec::Constant { theta_index } if *theta_index >= d_w_total => Err(Error::Shape(format!(
                "constant weight index {theta_index} outside {d_w_total} weights"
            ))),
            AlphaSpec::PureData { input_index } if *input_index >= d_inp => Err(Error::Shape(format!(
                "input index {input_index} outside {d_inp} inputs"
            ))),
            AlphaSpec::Bilinear { offset } if offset + d_inp > d_w_total => Err(Error::Shape(format!(
                "bilinear block at {offset} of width {d_inp} exceeds {d_w_total} weights"
            ))),
            AlphaSpec::Product { weight_index, input_index } if *weight_index >= d_w_total || *input_index >= d_inp => {
                Err(Error::Shape(format!(
                    "product term (w[{weight_index}], x[{input_index}]) outside {d_w_total} weights / {d_inp} inputs"
                )))
            }
            AlphaSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate(d_inp, d_w_total)),
            _ => Ok(()),
        }
    }

    fn merged(self, other: AlphaSpec) -> AlphaSpec {
        let mut terms = match self {
            AlphaSpec::Sum { terms } => terms,
            single => vec![single],
        };
        match other {
            AlphaSpec::Sum { terms: more } => terms.extend(more),
            single => terms.push(single),
        }
        AlphaSpec::Sum { terms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaMap {
    pub n_qubits: usize,
    pub generators: Vec<Generator>,
    pub alphas: Vec<AlphaSpec>,
    pub d_inp: usize,
    pub d_w_total: usize,
}

#[derive(Deserialize)]
struct ClaMapRepr {
    n_qubits: usize,
    generators: Vec<Generator>,
    alphas: Vec<AlphaSpec>,
    d_inp: usize,
    d_w_total: usize,
}

impl<'de> Deserialize<'de> for ClaMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = ClaMapRepr::deserialize(deserializer)?;
        ClaMap::new(r.n_qubits, r.generators, r.alphas, r.d_inp, r.d_w_total).map_err(serde::de::Error::custom)
    }
}

impl ClaMap {
    pub fn new(
        n_qubits: usize,
        generators: Vec<Generator>,
        alphas: Vec<AlphaSpec>,
        d_inp: usize,
        d_w_total: usize,
    ) -> Result<Self> {
        if generators.len() != alphas.len() {
            return Err(Error::LengthMismatch {
                what: "alpha specs",
                expected: generators.len(),
                found: alphas.len(),
            });
        }
        let max_k = 4u128.saturating_pow(n_qubits as u32) - 1;
        if generators.len() as u128 > max_k {
            return Err(Error::Shape(format!(
                "{} generators exceed the {max_k} directions of su(2^{n_qubits})",
                generators.len()
            )));
        }
        for g in &generators {
            if let Generator::Pauli(p) = g {
                if p.is_identity() {
                    return Err(Error::IdentityGenerator);
                }
            }
            g.compile(n_qubits)?;
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if a.is_parallel_to(b, n_qubits)? {
                    return Err(Error::Shape(format!("generator {i} is repeated")));
                }
            }
        }
        for a in &alphas {
            a.validate(d_inp, d_w_total)?;
        }
        Ok(Self {
            n_qubits,
            generators,
            alphas,
            d_inp,
            d_w_total,
        })
    }

    /// Builds the map of a gate sequence, merging repeated generators by
    /// adding their coefficients.
    pub fn from_gates<'a, I>(n_qubits: usize, d_inp: usize, d_w_total: usize, gates: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Generator, &'a AlphaSpec)>,
    {
        let mut generators: Vec<Generator> = Vec::new();
        let mut alphas: Vec<AlphaSpec> = Vec::new();
        for (g, alpha) in gates {
            let mut existing = None;
            for (j, known) in generators.iter().enumerate() {
                if known.is_parallel_to(g, n_qubits)? {
                    existing = Some(j);
                    break;
                }
            }
            match existing {
                // Proportional dense copies are merged as equal; ansatz generators are unit Pauli strings.
                Some(j) => {
                    let prev = std::mem::replace(&mut alphas[j], AlphaSpec::Constant { theta_index: 0 });
                    alphas[j] = prev.merged(alpha.clone());
                }
                None => {
                    generators.push(g.clone());
                    alphas.push(alpha.clone());
                }
            }
        }
        Self::new(n_qubits, generators, alphas, d_inp, d_w_total)
    }

    pub fn k(&self) -> usize {
        self.generators.len()
    }

    fn check_inputs(&self, w: Option<&[f64]>, x: Option<&[f64]>) -> Result<()> {
        if let Some(w) = w {
            if w.len() != self.d_w_total {
                return Err(Error::LengthMismatch {
                    what: "weights",
                    expected: self.d_w_total,
                    found: w.len(),
                });
            }
        }
        if let Some(x) = x {
            if x.len() != self.d_inp {
                return Err(Error::LengthMismatch {
                    what: "inputs",
                    expected: self.d_inp,
                    found: x.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn eval_coefficients(map: &ClaMap, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    map.check_inputs(Some(w), Some(x))?;
    Ok(map.alphas.iter().map(|a| a.eval(w, x)).collect())
}

/// `J_W(x)`, shape `k × d_w_total`.
pub fn weight_jacobian(map: &ClaMap, x: &[f64]) -> Result<DMatrix<f64>> {
    map.check_inputs(None, Some(x))?;
    let mut jac = DMatrix::zeros(map.k(), map.d_w_total);
    let mut row = vec![0.0; map.d_w_total];
    for (j, alpha) in map.alphas.iter().enumerate() {
        row.iter_mut().for_each(|v| *v = 0.0);
        alpha.add_weight_partials(x, 1.0, &mut row);
        jac.row_mut(j).iter_mut().zip(&row).for_each(|(dst, v)| *dst = *v);
    }
    Ok(jac)
}

/// `J_X(w)`, shape `k × d_inp`.
pub fn data_jacobian(map: &ClaMap, w: &[f64]) -> Result<DMatrix<f64>> {
    map.check_inputs(Some(w), None)?;
    let mut jac = DMatrix::zeros(map.k(), map.d_inp);
    let mut row = vec![0.0; map.d_inp];
    for (j, alpha) in map.alphas.iter().enumerate() {
        row.iter_mut().for_each(|v| *v = 0.0);
        alpha.add_data_partials(w, 1.0, &mut row);
        jac.row_mut(j).iter_mut().zip(&row).for_each(|(dst, v)| *dst = *v);
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "tol", rename_all = "snake_case")]
pub enum RankPolicy {
    /// Singular values above `max(rows, cols) · ε · σ_max` count.
    #[default]
    Relative,
    /// Singular values above the given absolute threshold count.
    Absolute(f64),
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn numerical_rank(m: &DMatrix<f64>, policy: RankPolicy) -> usize {
    let sv = singular_values(m);
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = match policy {
        RankPolicy::Relative => m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max,
        RankPolicy::Absolute(tol) => tol,
    };
    sv.iter().filter(|&&s| s > cutoff).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub weight_jacobian: DMatrix<f64>,
    pub data_jacobian: DMatrix<f64>,
    pub weight_rank: usize,
    pub data_rank: usize,
}

pub fn jacobian_report(map: &ClaMap, w: &[f64], x: &[f64], policy: RankPolicy) -> Result<JacobianReport> {
    let weight_jacobian = weight_jacobian(map, x)?;
    let data_jacobian = data_jacobian(map, w)?;
    Ok(JacobianReport {
        weight_rank: numerical_rank(&weight_jacobian, policy),
        data_rank: numerical_rank(&data_jacobian, policy),
        weight_jacobian,
        data_jacobian,
    })
}

/// Geometric behaviour of a gate block on the encoded state manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometricClass {
    Fixed,
    LearnableRigidRotation,
    FixedDeformation,
    LearnableDeformation,
}

/// Source of random vectors for Monte-Carlo rank checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorSampler {
    Normal { dim: usize, std: f64 },
    Uniform { dim: usize, low: f64, high: f64 },
    /// Draws rows of a data set uniformly with replacement.
    Empirical { rows: Vec<Vec<f64>> },
}

impl VectorSampler {
    pub fn standard_normal(dim: usize) -> Self {
        VectorSampler::Normal { dim, std: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorSampler::Normal { dim, .. } | VectorSampler::Uniform { dim, .. } => *dim,
            VectorSampler::Empirical { rows } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            VectorSampler::Normal { dim, std } => {
                let normal = Normal::new(0.0, *std).expect("finite positive std");
                (0..*dim).map(|_| normal.sample(rng)).collect()
            }
            VectorSampler::Uniform { dim, low, high } => (0..*dim).map(|_| rng.random_range(*low..*high)).collect(),
            VectorSampler::Empirical { rows } => rows[rng.random_range(0..rows.len())].clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            VectorSampler::Normal { std, .. } if !(std.is_finite() && *std > 0.0) => {
                Err(Error::Config(format!("normal sampler std {std}")))
            }
            VectorSampler::Uniform { low, high, .. } if low.partial_cmp(high) != Some(std::cmp::Ordering::Less) => {
                Err(Error::Config(format!("uniform sampler range [{low}, {high})")))
            }
            VectorSampler::Empirical { rows } if rows.is_empty() => Err(Error::EmptySample),
            VectorSampler::Empirical { rows } if rows.iter().any(|r| r.len() != rows[0].len()) => {
                Err(Error::Shape("empirical sampler rows differ in length".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AclsVerdict {
    /// Fraction of sampled inputs with `rank J_W = k`.
    pub complete_fraction: f64,
    /// Fraction of sampled weights with `rank J_X = min(d_inp, k)`.
    pub selective_fraction: f64,
    pub classification: GeometricClass,
    pub max_weight_rank: usize,
    pub max_data_rank: usize,
    pub k: usize,
}

/// Monte-Carlo estimate of almost-complete local selectivity.
///
/// Sample `i` draws its input and weight vectors from ChaCha streams `2i` and
/// `2i + 1` of `seed`, so the verdict does not depend on thread scheduling.
pub fn acls_check(
    map: &ClaMap,
    x_sampler: &VectorSampler,
    w_sampler: &VectorSampler,
    n_samples: usize,
    seed: u64,
    policy: RankPolicy,
) -> Result<AclsVerdict> {
    if n_samples == 0 {
        return Err(Error::EmptySample);
    }
    x_sampler.validate()?;
    w_sampler.validate()?;
    if x_sampler.dim() != map.d_inp {
        return Err(Error::LengthMismatch {
            what: "input sampler",
            expected: map.d_inp,
            found: x_sampler.dim(),
        });
    }
    if w_sampler.dim() != map.d_w_total {
        return Err(Error::LengthMismatch {
            what: "weight sampler",
            expected: map.d_w_total,
            found: w_sampler.dim(),
        });
    }
    let k = map.k();
    let data_target = map.d_inp.min(k);
    let ranks: Vec<(usize, usize)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * i);
            let x = x_sampler.sample(&mut rng);
            rng.set_stream(2 * i + 1);
            rng.set_word_pos(0);
            let w = w_sampler.sample(&mut rng);
            let wr = numerical_rank(&weight_jacobian(map, &x)?, policy);
            let dr = numerical_rank(&data_jacobian(map, &w)?, policy);
            Ok((wr, dr))
        })
        .collect::<Result<_>>()?;

    let n = n_samples as f64;
    let complete_fraction = ranks.iter().filter(|(wr, _)| *wr == k).count() as f64 / n;
    let selective_fraction = ranks.iter().filter(|(_, dr)| *dr == data_target).count() as f64 / n;
    let max_weight_rank = ranks.iter().map(|r| r.0).max().unwrap_or(0);
    let max_data_rank = ranks.iter().map(|r| r.1).max().unwrap_or(0);

    let tol = tolerances();
    let tunable = max_weight_rank > 0;
    let selective = max_data_rank > 0;
    let classification = match (tunable, selective) {
        (false, false) => GeometricClass::Fixed,
        (true, false) => GeometricClass::LearnableRigidRotation,
        (false, true) => GeometricClass::FixedDeformation,
        (true, true) => {
            if complete_fraction >= tol.complete_threshold && selective_fraction >= tol.selective_threshold {
                GeometricClass::LearnableDeformation
            } else if complete_fraction < tol.complete_threshold {
                // directions are selected but cannot all be tuned
                GeometricClass::FixedDeformation
            } else {
                GeometricClass::LearnableRigidRotation
            }
        }
    };
    Ok(AclsVerdict {
        complete_fraction,
        selective_fraction,
        classification,
        max_weight_rank,
        max_data_rank,
        k,
    })
}

/// Fidelity of `exp((i/2) w x σ_z) exp((i/2) x σ_x)|0>` between inputs `x1`, `x2`.
pub fn closed_form_fidelity_1d(x1: f64, x2: f64, w: f64) -> f64 {
    let d = x1 - x2;
    let s = x1 + x2;
    (0.5 * w * d).cos().powi(2) * (0.5 * d).cos().powi(2) + (0.5 * w * d).sin().powi(2) * (0.5 * s).cos().powi(2)
}

pub fn closed_form_derivative_1d(x1: f64, x2: f64, w: f64) -> f64 {
    let d = x1 - x2;
    -0.5 * d * (w * d).sin() * x1.sin() * x2.sin()
}

/// Number of distinct generator directions whose coefficient depends on the input.
///
/// When every such generator acts on a single qubit the count cannot exceed
/// `3n`; a larger value is logged as a warning.
pub fn selective_direction_count(map: &ClaMap) -> usize {
    let selective: Vec<&Generator> = map
        .generators
        .iter()
        .zip(&map.alphas)
        .filter(|(_, a)| a.depends_on_data())
        .map(|(g, _)| g)
        .collect();
    let count = selective.len();
    if selective.iter().all(|g| g.is_single_qubit()) && count > 3 * map.n_qubits {
        log::warn!(
            "{count} single-qubit selective directions exceed the 3n = {} cap",
            3 * map.n_qubits
        );
    }
    count
}

/// True when every data-dependent generator acts on a single qubit.
pub fn product_encoding(map: &ClaMap) -> bool {
    map.generators
        .iter()
        .zip(&map.alphas)
        .filter(|(_, a)| a.depends_on_data())
        .all(|(g, _)| g.is_single_qubit())
}
