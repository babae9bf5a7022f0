//! Layered re-uploading model with a weighted `σ_z` readout.
//!
//! Output `f_j = Σ_{i ∈ Q_j} u_i <σ_z^{(i)}>` where `Q_j` is the `j`-th contiguous
//! block of `n / d_out` qubits. Gradients use a reverse (adjoint-state) sweep
//! through the statevector: one forward pass, then each gate is undone on both
//! the state and the co-state while accumulating `∂L/∂α = -Im <λ|G|ψ>`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::cla::AlphaSpec;
use crate::quantum::{fidelity, CompiledGenerator, StateVector};
use crate::{Error, Result, C64};

/// Initial reference state with real, pairwise-distinct positive amplitudes.
pub fn prepare_psi0(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 1usize << n;
    let mut values: Vec<f64> = Vec::with_capacity(dim);
    while values.len() < dim {
        let v: f64 = rng.random();
        // zero would make the amplitude vanish; repeats violate distinctness
        if v > 0.0 && !values.contains(&v) {
            values.push(v);
        }
    }
    StateVector::normalized(n, values.into_iter().map(|v| C64::new(v, 0.0)).collect())
        .expect("positive amplitudes have nonzero norm")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    MultiClass,
}

impl Task {
    pub fn for_outputs(d_out: usize) -> Self {
        if d_out == 1 {
            Task::Binary
        } else {
            Task::MultiClass
        }
    }
}

#[derive(Debug)]
struct Circuit {
    gates: Vec<(CompiledGenerator, AlphaSpec)>,
}

impl Circuit {
    fn compile(spec: &AnsatzSpec) -> Result<Self> {
        let gates = spec
            .all_slots()
            .map(|s| {
                let alpha = s
                    .alpha
                    .clone()
                    .ok_or_else(|| Error::Shape(format!("slot {} is unbound", s.position)))?;
                Ok((s.generator.compile(spec.n_qubits)?, alpha))
            })
            .collect::<Result<_>>()?;
        Ok(Self { gates })
    }
}

/// Trainable model `w̄ = w ⊕ u` around a fixed reference state.
#[derive(Debug, Clone)]
pub struct ModelState {
    spec: AnsatzSpec,
    pub circuit_weights: Vec<f64>,
    pub u: Vec<f64>,
    psi0: StateVector,
    psi0_seed: u64,
    circuit: Arc<Circuit>,
}

impl ModelState {
    pub fn new(spec: AnsatzSpec, circuit_weights: Vec<f64>, u: Vec<f64>, psi0_seed: u64) -> Result<Self> {
        if circuit_weights.len() != spec.n_circuit_weights() {
            return Err(Error::LengthMismatch {
                what: "circuit weights",
                expected: spec.n_circuit_weights(),
                found: circuit_weights.len(),
            });
        }
        if u.len() != spec.n_qubits {
            return Err(Error::LengthMismatch {
                what: "readout weights",
                expected: spec.n_qubits,
                found: u.len(),
            });
        }
        let circuit = Arc::new(Circuit::compile(&spec)?);
        let psi0 = prepare_psi0(spec.n_qubits, psi0_seed);
        Ok(Self {
            spec,
            circuit_weights,
            u,
            psi0,
            psi0_seed,
            circuit,
        })
    }

    /// Random initialization: bias angles `U(-π, π)`, bilinear entries
    /// `N(0, 1/√d_inp)`, readout `U(-1, 1)`.
    pub fn init_random<R: Rng>(spec: AnsatzSpec, psi0_seed: u64, rng: &mut R) -> Result<Self> {
        let mut w = vec![0.0; spec.n_circuit_weights()];
        let bilinear = Normal::new(0.0, 1.0 / (spec.d_inp as f64).sqrt()).expect("positive std");
        for slot in spec.all_slots() {
            match slot.alpha {
                Some(AlphaSpec::Constant { theta_index }) => w[theta_index] = rng.random_range(-PI..PI),
                Some(AlphaSpec::Bilinear { offset }) => {
                    for v in &mut w[offset..offset + spec.d_inp] {
                        *v = bilinear.sample(rng);
                    }
                }
                _ => {}
            }
        }
        let u = (0..spec.n_qubits).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self::new(spec, w, u, psi0_seed)
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn psi0(&self) -> &StateVector {
        &self.psi0
    }

    pub fn psi0_seed(&self) -> u64 {
        self.psi0_seed
    }

    pub fn task(&self) -> Task {
        Task::for_outputs(self.spec.d_out)
    }

    pub fn n_params(&self) -> usize {
        self.circuit_weights.len() + self.u.len()
    }

    /// Flat parameter vector `w ⊕ u`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.circuit_weights.clone();
        p.extend_from_slice(&self.u);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                what: "parameters",
                expected: self.n_params(),
                found: params.len(),
            });
        }
        let (w, u) = params.split_at(self.circuit_weights.len());
        self.circuit_weights.copy_from_slice(w);
        self.u.copy_from_slice(u);
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.d_inp {
            return Err(Error::LengthMismatch {
                what: "input",
                expected: self.spec.d_inp,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// State after all layers.
    pub fn encode(&self, x: &[f64]) -> Result<StateVector> {
        self.check_input(x)?;
        let mut state = self.psi0.clone();
        let amps = state.amplitudes_mut();
        for (g, alpha) in &self.circuit.gates {
            g.rotate(amps, alpha.eval(&self.circuit_weights, x));
        }
        Ok(state)
    }

    /// States at every layer boundary, starting with `psi0`.
    pub fn layer_states(&self, x: &[f64]) -> Result<Vec<StateVector>> {
        self.check_input(x)?;
        let mut out = vec![self.psi0.clone()];
        let mut state = self.psi0.clone();
        let mut gates = self.circuit.gates.iter();
        for layer in &self.spec.layers {
            for (g, alpha) in gates.by_ref().take(layer.slots.len()) {
                g.rotate(state.amplitudes_mut(), alpha.eval(&self.circuit_weights, x));
            }
            out.push(state.clone());
        }
        Ok(out)
    }

    fn group_size(&self) -> usize {
        self.spec.n_qubits / self.spec.d_out
    }

    fn readout(&self, z: &[f64]) -> Vec<f64> {
        let m = self.group_size();
        (0..self.spec.d_out)
            .map(|j| (j * m..(j + 1) * m).map(|i| self.u[i] * z[i]).sum())
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let state = self.encode(x)?;
        Ok(self.readout(&state.z_expectations()))
    }

    /// Loss and gradient of one sample, gradient over `w ⊕ u`.
    fn sample_gradient(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let mut psi = self.encode(x)?;
        let z = psi.z_expectations();
        let f = self.readout(&z);
        let task = self.task();
        let (loss, dl_df) = sample_loss(&f, label, task)?;

        let n = self.spec.n_qubits;
        let nw = self.circuit_weights.len();
        let m = self.group_size();
        let mut grad = vec![0.0; nw + n];
        let mut coeff = vec![0.0; n];
        for i in 0..n {
            let g = dl_df[i / m];
            grad[nw + i] = g * z[i];
            coeff[i] = g * self.u[i];
        }

        // co-state λ = O ψ with O = Σ_i coeff_i Z_i
        let mut lambda: Vec<C64> = psi
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(b, a)| {
                let s: f64 = (0..n)
                    .map(|i| if b & (1 << (n - 1 - i)) == 0 { coeff[i] } else { -coeff[i] })
                    .sum();
                a * s
            })
            .collect();

        let mut g_psi = vec![C64::new(0.0, 0.0); psi.dim()];
        let psi_amps = psi.amplitudes_mut();
        for (g, alpha) in self.circuit.gates.iter().rev() {
            let angle = alpha.eval(&self.circuit_weights, x);
            if alpha.depends_on_weights() {
                g.apply(psi_amps, &mut g_psi);
                let overlap: C64 = lambda.iter().zip(&g_psi).map(|(l, v)| l.conj() * v).sum();
                alpha.add_weight_partials(x, -overlap.im, &mut grad[..nw]);
            }
            g.rotate(psi_amps, -angle);
            g.rotate(&mut lambda, -angle);
        }
        Ok((loss, grad))
    }
}

/// Per-sample loss and `∂loss/∂f`.
fn sample_loss(f: &[f64], label: usize, task: Task) -> Result<(f64, Vec<f64>)> {
    match task {
        Task::Binary => {
            if f.len() != 1 {
                return Err(Error::Shape(format!("binary loss needs one output, got {}", f.len())));
            }
            if label > 1 {
                return Err(Error::LabelOutOfRange { label, n_classes: 2 });
            }
            let y = label as f64;
            let logit = f[0];
            // BCE(sigmoid(f), y) = softplus(f) - y f
            let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
            let sigmoid = 1.0 / (1.0 + (-logit).exp());
            Ok((softplus - y * logit, vec![sigmoid - y]))
        }
        Task::MultiClass => {
            if label >= f.len() {
                return Err(Error::LabelOutOfRange {
                    label,
                    n_classes: f.len(),
                });
            }
            let probs = softmax(f);
            let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + f.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let mut grad = probs;
            grad[label] -= 1.0;
            Ok((lse - f[label], grad))
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn softmax(f: &[f64]) -> Vec<f64> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = f.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean loss over a batch: binary cross-entropy on `sigmoid(f)` or categorical
/// cross-entropy on `softmax(f)`.
pub fn loss(outputs: &[Vec<f64>], labels: &[usize], task: Task) -> Result<f64> {
    if outputs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: outputs.len(),
            found: labels.len(),
        });
    }
    if outputs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for (f, &y) in outputs.iter().zip(labels) {
        total += sample_loss(f, y, task)?.0;
    }
    Ok(total / outputs.len() as f64)
}

/// Mean loss and its gradient over `w ⊕ u` for a batch.
///
/// Samples are processed in parallel; the reduction runs in sample order so
/// the result does not depend on scheduling.
pub fn gradient(model: &ModelState, features: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: features.len(),
            found: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::EmptySample);
    }
    let per_sample: Vec<(f64, Vec<f64>)> = features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| model.sample_gradient(x, y))
        .collect::<Result<_>>()?;
    let scale = 1.0 / features.len() as f64;
    let mut grad = vec![0.0; model.n_params()];
    let mut total = 0.0;
    for (l, g) in &per_sample {
        total += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|v| *v *= scale);
    Ok((total * scale, grad))
}

/// Outputs for many inputs, evaluated in parallel.
pub fn predict(model: &ModelState, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    features.par_iter().map(|x| model.forward(x)).collect()
}

/// Checks that the first layer's bias block acts as an isometry on two encoded
/// inputs: their fidelity after the block must not depend on its weights.
/// Returns the largest fidelity change over the supplied weight settings.
pub fn bias_isometry_defect(model: &ModelState, x1: &[f64], x2: &[f64], weight_sets: &[Vec<f64>]) -> Result<f64> {
    let Some(layer) = model.spec.layers.first() else {
        return Ok(0.0);
    };
    let n_enc = layer.encoder_len;
    let encoded = |x: &[f64]| -> Result<StateVector> {
        let mut s = model.psi0.clone();
        for (g, alpha) in &model.circuit.gates[..n_enc] {
            g.rotate(s.amplitudes_mut(), alpha.eval(&model.circuit_weights, x));
        }
        Ok(s)
    };
    let s1 = encoded(x1)?;
    let s2 = encoded(x2)?;
    let reference = fidelity(&s1, &s2)?;
    let mut worst = 0.0f64;
    for w in weight_sets {
        let mut a = s1.clone();
        let mut b = s2.clone();
        for (g, alpha) in &model.circuit.gates[n_enc..layer.slots.len()] {
            let angle = alpha.eval(w, x1);
            g.rotate(a.amplitudes_mut(), angle);
            g.rotate(b.amplitudes_mut(), angle);
        }
        worst = worst.max((fidelity(&a, &b)? - reference).abs());
    }
    Ok(worst)
}

/// On-disk checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: AnsatzSpec,
    pub circuit_weights: Vec<f64>,
    pub u: Vec<f64>,
    pub psi0_seed: u64,
    pub epoch: usize,
    pub validation_loss: f64,
}

impl Checkpoint {
    pub fn from_model(model: &ModelState, epoch: usize, validation_loss: f64) -> Self {
        Self {
            spec: model.spec.clone(),
            circuit_weights: model.circuit_weights.clone(),
            u: model.u.clone(),
            psi0_seed: model.psi0_seed,
            epoch,
            validation_loss,
        }
    }

    pub fn into_model(self) -> Result<ModelState> {
        ModelState::new(self.spec, self.circuit_weights, self.u, self.psi0_seed)
    }
}
