//! Cross-module invariant suite: each check returns its worst observed error
//! so callers can apply their own tolerance.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_slots, cnot_generator, count_report, gates_per_layer, k_se, weights_per_layer, AnsatzSpec, ModelKind};
use crate::cla::{
    acls_check, closed_form_derivative_1d, closed_form_fidelity_1d, data_jacobian, eval_coefficients, weight_jacobian,
    AclsVerdict, AlphaSpec, ClaMap, RankPolicy, VectorSampler,
};
use crate::model::{gradient, prepare_psi0, ModelState};
use crate::quantum::{fidelity, fidelity_weight_derivative, DenseHermitian, EigenSystem, Generator, Pauli, PauliString, StateVector};
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    let amps = (0..1usize << n)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    StateVector::normalized(n, amps).expect("nonzero gaussian vector")
}

/// Random Pauli string (never the identity) or random dense Hermitian on a random support.
pub fn random_generator<R: Rng>(rng: &mut R, n: usize) -> Generator {
    if rng.random_bool(0.5) {
        loop {
            let labels: Vec<Pauli> = (0..n).map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)]).collect();
            let p = PauliString::new(labels).expect("valid length");
            if !p.is_identity() {
                return p.into();
            }
        }
    }
    let size = rng.random_range(1..=n.min(2));
    let mut support: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(support.as_mut_slice(), rng);
    support.truncate(size);
    let dim = 1 << size;
    let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)));
    let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    Generator::Dense(DenseHermitian::new(h, support).expect("hermitian by construction"))
}

/// Worst deviation of norms and pairwise inner products under random rotations.
pub fn unitarity_defect(n_trials: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..n_trials {
        let n = rng.random_range(1..=4);
        let g = random_generator(&mut rng, n);
        let angle = rng.random_range(-2.0 * PI..2.0 * PI);
        let a = random_state(&mut rng, n);
        let b = random_state(&mut rng, n);
        let ra = a.rotated(&g, angle)?;
        let rb = b.rotated(&g, angle)?;
        worst = worst.max((ra.norm() - 1.0).abs());
        worst = worst.max((ra.inner(&rb)? - a.inner(&b)?).norm());
    }
    Ok(worst)
}

/// Worst absolute error between analytic CLA Jacobians and central differences.
pub fn jacobian_fd_defect(spec: &AnsatzSpec, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for layer in 0..spec.n_layers {
        let map = spec.layer_map(layer)?;
        let w: Vec<f64> = (0..map.d_w_total).map(|_| rng.random_range(-PI..PI)).collect();
        let x: Vec<f64> = (0..map.d_inp).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jw = weight_jacobian(&map, &x)?;
        let jx = data_jacobian(&map, &w)?;
        for i in 0..map.d_w_total {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[i] += h;
            wm[i] -= h;
            let (ap, am) = (eval_coefficients(&map, &wp, &x)?, eval_coefficients(&map, &wm, &x)?);
            for j in 0..map.k() {
                worst = worst.max(((ap[j] - am[j]) / (2.0 * h) - jw[(j, i)]).abs());
            }
        }
        for i in 0..map.d_inp {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let (ap, am) = (eval_coefficients(&map, &w, &xp)?, eval_coefficients(&map, &w, &xm)?);
            for j in 0..map.k() {
                worst = worst.max(((ap[j] - am[j]) / (2.0 * h) - jx[(j, i)]).abs());
            }
        }
    }
    Ok(worst)
}

/// Coordinate-wise relative error of the model gradient against central
/// differences (step `1e-5`). Coordinates with `|g| < 1e-8` are compared in
/// absolute terms and scaled so that an error of `1e-8` maps to `1e-5`.
pub fn gradient_fd_defect(kind: ModelKind, n: usize, d_inp: usize, n_models: usize, seed: u64) -> Result<f64> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for m in 0..n_models {
        let mut rng = rng_for(seed, 100 + m as u64);
        let spec = AnsatzSpec::new(kind, n, d_inp, 1, 3)?;
        let mut model = ModelState::init_random(spec, seed, &mut rng)?;
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..d_inp).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys = vec![0, 1, 1];
        let (_, g) = gradient(&model, &xs, &ys)?;
        let p = model.params();
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + h;
            model.set_params(&q)?;
            let lp = gradient(&model, &xs, &ys)?.0;
            q[i] = p[i] - h;
            model.set_params(&q)?;
            let lm = gradient(&model, &xs, &ys)?.0;
            let fd = (lp - lm) / (2.0 * h);
            let err = if g[i].abs() < 1e-8 {
                (fd - g[i]).abs() * 1e-5 / 1e-8
            } else {
                (fd - g[i]).abs() / g[i].abs()
            };
            worst = worst.max(err);
        }
        model.set_params(&p)?;
    }
    Ok(worst)
}

/// Simulated one-qubit circuit `exp((i/2) w x σ_z) exp((i/2) x σ_x)|0>`.
pub fn one_qubit_state(x: f64, w: f64) -> Result<StateVector> {
    let sx: Generator = PauliString::single(1, 0, Pauli::X)?.into();
    let sz: Generator = PauliString::single(1, 0, Pauli::Z)?.into();
    StateVector::zero(1).rotated(&sx, x)?.rotated(&sz, w * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormAgreement {
    pub fidelity_error: f64,
    pub derivative_error: f64,
    /// Largest `|∂F/∂w|` on the `x2 = 0` slice.
    pub x2_zero_derivative: f64,
}

/// Compares simulator fidelity and eigen-sum derivative with the one-qubit
/// closed forms on an `m × m × m` grid over `[-π, π]^3`.
pub fn closed_form_agreement(m: usize) -> Result<ClosedFormAgreement> {
    let grid: Vec<f64> = (0..m)
        .map(|i| if m == 1 { 0.0 } else { -PI + 2.0 * PI * i as f64 / (m - 1) as f64 })
        .collect();
    let sz: Generator = PauliString::single(1, 0, Pauli::Z)?.into();
    let sx: Generator = PauliString::single(1, 0, Pauli::X)?.into();
    let mut out = ClosedFormAgreement {
        fidelity_error: 0.0,
        derivative_error: 0.0,
        x2_zero_derivative: 0.0,
    };
    let x2_values = grid.iter().copied().chain(std::iter::once(0.0));
    for x2 in x2_values {
        for &x1 in &grid {
            for &w in &grid {
                let f = fidelity(&one_qubit_state(x1, w)?, &one_qubit_state(x2, w)?)?;
                let p1 = StateVector::zero(1).rotated(&sx, x1)?;
                let p2 = StateVector::zero(1).rotated(&sx, x2)?;
                let d = fidelity_weight_derivative(&p1, &p2, &sz, w * (x1 - x2), x1 - x2)?;
                out.fidelity_error = out.fidelity_error.max((f - closed_form_fidelity_1d(x1, x2, w)).abs());
                out.derivative_error = out.derivative_error.max((d - closed_form_derivative_1d(x1, x2, w)).abs());
                if x2 == 0.0 {
                    out.x2_zero_derivative = out.x2_zero_derivative.max(d.abs());
                }
            }
        }
    }
    Ok(out)
}

/// Eigen-sum derivative against central differences of the simulated fidelity
/// for random states, generators and angles. Returns the worst value of
/// `min(abs_err / 1e-6, rel_err / 1e-5)`, so `≤ 1` means every instance passed.
pub fn eigen_derivative_defect(n_instances: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..n_instances {
        let n = rng.random_range(1..=3);
        let g = random_generator(&mut rng, n);
        let a = random_state(&mut rng, n);
        let b = random_state(&mut rng, n);
        let (x1, x2): (f64, f64) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let w: f64 = rng.random_range(-2.0..2.0);
        let fid = |w: f64| -> Result<f64> { fidelity(&a.rotated(&g, w * x1)?, &b.rotated(&g, w * x2)?) };
        let fd = (fid(w + h)? - fid(w - h)?) / (2.0 * h);
        let analytic = fidelity_weight_derivative(&a, &b, &g, w * (x1 - x2), x1 - x2)?;
        let abs = (fd - analytic).abs();
        let rel = abs / analytic.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((abs / 1e-6).min(rel / 1e-5));
    }
    Ok(worst)
}

/// Largest entry of `|exp(-(i/4) π γ) - e^{iφ} CNOT|` after removing the global phase.
pub fn cnot_defect() -> Result<f64> {
    let gamma = cnot_generator().local_matrix();
    let eig = EigenSystem::of_hermitian(&gamma)?;
    let u = eig.map_spectrum(|l| C64::from_polar(1.0, -PI * l / 4.0));
    let mut cnot = DMatrix::<C64>::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(r, c)] = C64::new(1.0, 0.0);
    }
    let phase = u[(0, 0)] / cnot[(0, 0)];
    Ok((u - cnot * phase).iter().map(|v| v.norm()).fold(0.0, f64::max))
}

/// Two constant rotations about the same generator merge into one whose
/// coefficient is exactly `w + w'`. Returns the worst absolute difference.
pub fn coefficient_collapse_defect(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 3);
    let g: Generator = PauliString::pair(2, 0, 1, Pauli::Z)?.into();
    let a0 = AlphaSpec::Constant { theta_index: 0 };
    let a1 = AlphaSpec::Constant { theta_index: 1 };
    let map = ClaMap::from_gates(2, 1, 2, [(&g, &a0), (&g, &a1)])?;
    let mut worst = if map.k() == 1 { 0.0f64 } else { f64::INFINITY };
    for _ in 0..100 {
        let w = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
        let alpha = eval_coefficients(&map, &w, &[0.0])?;
        worst = worst.max((alpha[0] - (w[0] + w[1])).abs());
    }
    Ok(worst)
}

/// Count formulas against enumerated layers for `n = 1..=max_n`; returns the
/// number of mismatches.
pub fn count_mismatches(max_n: usize) -> Result<usize> {
    let mut bad = 0;
    for n in 1..=max_n {
        if k_se(n) != 3 * (n + n * (n - 1) / 2) {
            bad += 1;
        }
        for d_inp in [1, 2, 3, 6, 8] {
            let acls = AnsatzSpec::new(ModelKind::Acls, n, d_inp, 1, 1)?;
            bad += usize::from(acls.layers[0].slots.len() != gates_per_layer(ModelKind::Acls, n));
            bad += usize::from(acls.n_circuit_weights() != weights_per_layer(ModelKind::Acls, n, d_inp));
            bad += usize::from(weights_per_layer(ModelKind::Acls, n, d_inp) != (d_inp + 1) * k_se(n));
        }
        let pdr = AnsatzSpec::new(ModelKind::Pdr, n, n, 1, 1)?;
        bad += usize::from(pdr.layers[0].slots.len() != gates_per_layer(ModelKind::Pdr, n));
        bad += usize::from(pdr.layers[0].slots.len() != k_se(n) + n);
        bad += usize::from(pdr.n_circuit_weights() != k_se(n));
    }
    let acls = count_report(ModelKind::Acls, 2, 6, 3)?;
    let pdr = count_report(ModelKind::Pdr, 6, 6, 3)?;
    bad += usize::from(acls.gates_per_layer * 69 != pdr.gates_per_layer * 18);
    Ok(bad)
}

/// Worst fidelity change of encoded pairs under random weights of the
/// data-independent block, over every layer of `spec`.
pub fn isometry_defect(spec: &AnsatzSpec, n_pairs: usize, n_weight_sets: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 4);
    let psi0 = prepare_psi0(spec.n_qubits, seed);
    let nw = spec.n_circuit_weights();
    let mut worst = 0.0f64;
    for layer in &spec.layers {
        let w0: Vec<f64> = (0..nw).map(|_| rng.random_range(-PI..PI)).collect();
        for _ in 0..n_pairs {
            let x1: Vec<f64> = (0..spec.d_inp).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x2: Vec<f64> = (0..spec.d_inp).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s1 = apply_slots(&psi0, layer.encoder(), &w0, &x1)?;
            let s2 = apply_slots(&psi0, layer.encoder(), &w0, &x2)?;
            let reference = fidelity(&s1, &s2)?;
            for _ in 0..n_weight_sets {
                let w: Vec<f64> = (0..nw).map(|_| rng.random_range(-PI..PI)).collect();
                let f = fidelity(&apply_slots(&s1, layer.bias(), &w, &x1)?, &apply_slots(&s2, layer.bias(), &w, &x2)?)?;
                worst = worst.max((f - reference).abs());
            }
        }
    }
    Ok(worst)
}

/// The three reference maps on `n = 2`, `d_inp = 6` (PDR on `n = 6`):
/// constant-only bias block, pure-data encoder and bilinear encoder.
pub fn canonical_maps() -> Result<[ClaMap; 3]> {
    let acls = AnsatzSpec::new(ModelKind::Acls, 2, 6, 1, 1)?;
    let pdr = AnsatzSpec::new(ModelKind::Pdr, 6, 6, 1, 1)?;
    Ok([acls.bias_map(0)?, pdr.encoder_map(0)?, acls.encoder_map(0)?])
}

pub fn default_acls_check(map: &ClaMap, n_samples: usize, seed: u64) -> Result<AclsVerdict> {
    let x = VectorSampler::Uniform {
        dim: map.d_inp,
        low: -1.0,
        high: 1.0,
    };
    let w = VectorSampler::standard_normal(map.d_w_total);
    acls_check(map, &x, &w, n_samples, seed, RankPolicy::Relative)
}

/// Runs every check with the tolerances used by `qfeat verify`.
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    use crate::cla::GeometricClass::*;
    let acls2 = AnsatzSpec::new(ModelKind::Acls, 2, 6, 1, 3)?;
    let pdr3 = AnsatzSpec::new(ModelKind::Pdr, 3, 3, 1, 3)?;
    let closed = closed_form_agreement(11)?;
    let mut results = vec![
        CheckResult::new("unitarity", unitarity_defect(200, seed)?, 1e-12),
        CheckResult::new("jacobian vs finite differences (acls)", jacobian_fd_defect(&acls2, seed)?, 1e-6),
        CheckResult::new("jacobian vs finite differences (pdr)", jacobian_fd_defect(&pdr3, seed)?, 1e-6),
        CheckResult::new("gradient vs finite differences (acls n=2)", gradient_fd_defect(ModelKind::Acls, 2, 6, 3, seed)?, 1e-5),
        CheckResult::new("gradient vs finite differences (pdr n=3)", gradient_fd_defect(ModelKind::Pdr, 3, 3, 3, seed)?, 1e-5),
        CheckResult::new("closed-form fidelity", closed.fidelity_error, 1e-10),
        CheckResult::new("closed-form derivative", closed.derivative_error, 1e-10),
        CheckResult::new("derivative vanishes at x2 = 0", closed.x2_zero_derivative, 1e-12),
        CheckResult::new("eigen-sum derivative vs finite differences", eigen_derivative_defect(50, seed)?, 1.0),
        CheckResult::new("cnot generator", cnot_defect()?, 1e-12),
        CheckResult::new("coefficient collapse", coefficient_collapse_defect(seed)?, 0.0),
        CheckResult::new("count formulas", count_mismatches(8)? as f64, 0.0),
        CheckResult::new("bias isometry (acls)", isometry_defect(&acls2, 10, 5, seed)?, 1e-12),
        CheckResult::new("bias isometry (pdr)", isometry_defect(&pdr3, 10, 5, seed)?, 1e-12),
    ];
    let expected = [LearnableRigidRotation, FixedDeformation, LearnableDeformation];
    let names = ["constant-only", "pure-data", "bilinear"];
    for ((map, class), name) in canonical_maps()?.iter().zip(expected).zip(names) {
        let verdict = default_acls_check(map, 200, seed)?;
        let ok = verdict.classification == class;
        results.push(CheckResult::new(&format!("classification of {name} map"), if ok { 0.0 } else { 1.0 }, 0.0));
    }
    Ok(results)
}
