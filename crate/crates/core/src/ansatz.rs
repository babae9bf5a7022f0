//! Layered circuit builders for pure data re-uploading (PDR) and aCLS models.
//!
//! Every layer is an encoder block followed by a data-independent
//! `U_SE = U_E U_S` bias block. Within `U_S` each qubit receives `R_x, R_y, R_z`;
//! `U_E` walks pairs `(i, j)`, `i < j`, lexicographically with `XX, YY, ZZ`
//! entanglers. PDR encoders are `σ_x` rotations fed directly by the inputs;
//! aCLS encoders repeat `U_SE` with angles `w_j · x`.
//!
//! Weight layout is layer-major. Within a layer the bilinear blocks come first
//! (one `d_inp`-vector per encoder gate) followed by the bias angles.

use serde::{Deserialize, Serialize};

use crate::cla::{AlphaSpec, ClaMap};
use crate::quantum::{DenseHermitian, Generator, Pauli, PauliString, StateVector};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pdr,
    Acls,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pdr" => Ok(ModelKind::Pdr),
            "acls" => Ok(ModelKind::Acls),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSlot {
    pub generator: Generator,
    /// `None` until a layer builder binds the slot to weights or inputs.
    pub alpha: Option<AlphaSpec>,
    pub position: usize,
}

fn slots_from(generators: impl IntoIterator<Item = Generator>) -> Vec<GateSlot> {
    generators
        .into_iter()
        .enumerate()
        .map(|(position, generator)| GateSlot {
            generator,
            alpha: None,
            position,
        })
        .collect()
}

fn pauli(p: Result<PauliString>) -> Generator {
    Generator::Pauli(p.expect("qubit indices are in range by construction"))
}

/// Single-qubit block `U_S`: `3n` slots, `X, Y, Z` per qubit.
pub fn build_us(n: usize) -> Vec<GateSlot> {
    slots_from((0..n).flat_map(|q| Pauli::AXES.map(|p| pauli(PauliString::single(n, q, p)))))
}

/// Entangling block `U_E`: `3·C(n, 2)` Ising slots.
pub fn build_ue(n: usize) -> Result<Vec<GateSlot>> {
    if n < 2 {
        return Err(Error::Shape(format!("entangling block needs two qubits, got {n}")));
    }
    let gens = (0..n).flat_map(|i| {
        (i + 1..n).flat_map(move |j| Pauli::AXES.map(|p| pauli(PauliString::pair(n, i, j, p))))
    });
    Ok(slots_from(gens))
}

/// `U_SE = U_E U_S` in application order; a single qubit has no entangler.
pub fn build_use(n: usize) -> Vec<GateSlot> {
    let mut gens: Vec<Generator> = build_us(n).into_iter().map(|s| s.generator).collect();
    if n >= 2 {
        gens.extend(build_ue(n).expect("n >= 2").into_iter().map(|s| s.generator));
    }
    slots_from(gens)
}

/// PDR encoder `U_X`: `σ_x` on every qubit fed by input `q`.
pub fn build_ux(n: usize) -> Vec<GateSlot> {
    let mut slots = slots_from((0..n).map(|q| pauli(PauliString::single(n, q, Pauli::X))));
    for (q, slot) in slots.iter_mut().enumerate() {
        slot.alpha = Some(AlphaSpec::PureData { input_index: q });
    }
    slots
}

/// Binds `k` slots to inputs repeated `k / d_inp` times (`x̄_j = x_{j mod d}`).
pub fn bind_pure_data(slots: &mut [GateSlot], d_inp: usize) -> Result<()> {
    if d_inp == 0 || !slots.len().is_multiple_of(d_inp) {
        return Err(Error::Shape(format!(
            "{} encoder gates cannot repeat {d_inp} inputs evenly",
            slots.len()
        )));
    }
    for (j, slot) in slots.iter_mut().enumerate() {
        slot.alpha = Some(AlphaSpec::PureData { input_index: j % d_inp });
    }
    Ok(())
}

pub fn k_se(n: usize) -> usize {
    3 * (n + n * n.saturating_sub(1) / 2)
}

pub fn gates_per_layer(kind: ModelKind, n: usize) -> usize {
    match kind {
        ModelKind::Pdr => k_se(n) + n,
        ModelKind::Acls => 2 * k_se(n),
    }
}

pub fn weights_per_layer(kind: ModelKind, n: usize, d_inp: usize) -> usize {
    match kind {
        ModelKind::Pdr => k_se(n),
        ModelKind::Acls => (d_inp + 1) * k_se(n),
    }
}

fn check_shape(kind: ModelKind, n: usize, d_inp: usize) -> Result<()> {
    if n == 0 || d_inp == 0 {
        return Err(Error::Shape("qubit count and input dimension must be positive".into()));
    }
    if kind == ModelKind::Pdr && n != d_inp {
        return Err(Error::Shape(format!(
            "PDR needs one qubit per input: {n} qubits for {d_inp} inputs"
        )));
    }
    Ok(())
}

/// One re-upload layer: `encoder_len` encoder slots followed by the bias block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub slots: Vec<GateSlot>,
    pub encoder_len: usize,
}

impl Layer {
    pub fn encoder(&self) -> &[GateSlot] {
        &self.slots[..self.encoder_len]
    }

    pub fn bias(&self) -> &[GateSlot] {
        &self.slots[self.encoder_len..]
    }
}

pub fn build_layer(kind: ModelKind, n: usize, d_inp: usize, layer_index: usize) -> Result<Layer> {
    check_shape(kind, n, d_inp)?;
    let base = layer_index * weights_per_layer(kind, n, d_inp);
    let (mut encoder, bias_base) = match kind {
        ModelKind::Pdr => {
            let mut enc = build_ux(n);
            bind_pure_data(&mut enc, d_inp)?;
            (enc, base)
        }
        ModelKind::Acls => {
            let mut enc = build_use(n);
            for (j, slot) in enc.iter_mut().enumerate() {
                slot.alpha = Some(AlphaSpec::Bilinear {
                    offset: base + j * d_inp,
                });
            }
            let k = enc.len();
            (enc, base + k * d_inp)
        }
    };
    let mut bias = build_use(n);
    for (j, slot) in bias.iter_mut().enumerate() {
        slot.alpha = Some(AlphaSpec::Constant {
            theta_index: bias_base + j,
        });
    }
    let encoder_len = encoder.len();
    encoder.extend(bias);
    for (position, slot) in encoder.iter_mut().enumerate() {
        slot.position = position;
    }
    Ok(Layer {
        slots: encoder,
        encoder_len,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub kind: ModelKind,
    pub n_qubits: usize,
    pub d_inp: usize,
    pub n_layers: usize,
    pub k_se: usize,
    pub gates_per_layer: usize,
    pub weights_per_layer: usize,
    pub total_gates: usize,
    pub total_circuit_weights: usize,
    pub readout_weights: usize,
}

impl CountReport {
    pub fn total_weights(&self) -> usize {
        self.total_circuit_weights + self.readout_weights
    }
}

pub fn count_report(kind: ModelKind, n: usize, d_inp: usize, n_layers: usize) -> Result<CountReport> {
    check_shape(kind, n, d_inp)?;
    let gates = gates_per_layer(kind, n);
    let weights = weights_per_layer(kind, n, d_inp);
    Ok(CountReport {
        kind,
        n_qubits: n,
        d_inp,
        n_layers,
        k_se: k_se(n),
        gates_per_layer: gates,
        weights_per_layer: weights,
        total_gates: gates * n_layers,
        total_circuit_weights: weights * n_layers,
        readout_weights: n,
    })
}

/// Ising block `S(w) = e^{(i/2) w1 XX} e^{(i/2) w2 YY} e^{(i/2) w3 ZZ}` on two
/// qubits, in application order (`ZZ` first). `w_k` is weight `offset + k - 1`.
pub fn ising_block(offset: usize) -> Vec<GateSlot> {
    let gens = [(Pauli::Z, 2), (Pauli::Y, 1), (Pauli::X, 0)];
    gens.iter()
        .enumerate()
        .map(|(position, &(p, k))| GateSlot {
            generator: pauli(PauliString::pair(2, 0, 1, p)),
            alpha: Some(AlphaSpec::Constant { theta_index: offset + k }),
            position,
        })
        .collect()
}

/// `γ = I⊗I - I⊗σ_x - σ_z⊗I + σ_z⊗σ_x` on qubits (1, 2); `exp(-(i/2)(π/2)γ)` is CNOT.
pub fn cnot_generator() -> Generator {
    let terms = [
        ("II", 1.0),
        ("IX", -1.0),
        ("ZI", -1.0),
        ("ZX", 1.0),
    ];
    let mut m = nalgebra::DMatrix::<C64>::zeros(4, 4);
    for (label, coeff) in terms {
        let p: PauliString = label.parse().expect("static label");
        m += p.matrix() * C64::new(coeff, 0.0);
    }
    Generator::Dense(DenseHermitian::new(m, vec![0, 1]).expect("γ is Hermitian"))
}

/// Applies bound slots in order to `state`.
pub fn apply_slots(state: &StateVector, slots: &[GateSlot], w: &[f64], x: &[f64]) -> Result<StateVector> {
    let mut out = state.clone();
    for slot in slots {
        let alpha = slot
            .alpha
            .as_ref()
            .ok_or_else(|| Error::Shape(format!("slot {} is unbound", slot.position)))?;
        out.rotate_in_place(&slot.generator, alpha.eval(w, x))?;
    }
    Ok(out)
}

/// Declarative description of a layered model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub d_inp: usize,
    pub d_out: usize,
    pub n_layers: usize,
    pub kind: ModelKind,
    pub layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct AnsatzRepr {
    n_qubits: usize,
    d_inp: usize,
    d_out: usize,
    n_layers: usize,
    kind: ModelKind,
    layers: Option<Vec<Layer>>,
}

impl<'de> Deserialize<'de> for AnsatzSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = AnsatzRepr::deserialize(deserializer)?;
        let built = AnsatzSpec::new(r.kind, r.n_qubits, r.d_inp, r.d_out, r.n_layers).map_err(D::Error::custom)?;
        match r.layers {
            // layers are derived data; a stored copy must agree with the builders
            Some(layers) if layers != built.layers => {
                Err(D::Error::custom("stored layers do not match the declared ansatz"))
            }
            _ => Ok(built),
        }
    }
}

impl AnsatzSpec {
    pub fn new(kind: ModelKind, n_qubits: usize, d_inp: usize, d_out: usize, n_layers: usize) -> Result<Self> {
        check_shape(kind, n_qubits, d_inp)?;
        if d_out == 0 || !n_qubits.is_multiple_of(d_out) {
            return Err(Error::Shape(format!(
                "{n_qubits} qubits cannot be split into {d_out} readout groups"
            )));
        }
        let layers = (0..n_layers)
            .map(|l| build_layer(kind, n_qubits, d_inp, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_qubits,
            d_inp,
            d_out,
            n_layers,
            kind,
            layers,
        })
    }

    pub fn weights_per_layer(&self) -> usize {
        weights_per_layer(self.kind, self.n_qubits, self.d_inp)
    }

    pub fn n_circuit_weights(&self) -> usize {
        self.n_layers * self.weights_per_layer()
    }

    pub fn counts(&self) -> CountReport {
        count_report(self.kind, self.n_qubits, self.d_inp, self.n_layers).expect("validated at construction")
    }

    pub fn all_slots(&self) -> impl Iterator<Item = &GateSlot> {
        self.layers.iter().flat_map(|l| l.slots.iter())
    }

    fn block_map(&self, slots: &[GateSlot]) -> Result<ClaMap> {
        let bound: Vec<(&Generator, &AlphaSpec)> = slots
            .iter()
            .map(|s| {
                s.alpha
                    .as_ref()
                    .map(|a| (&s.generator, a))
                    .ok_or_else(|| Error::Shape(format!("slot {} is unbound", s.position)))
            })
            .collect::<Result<_>>()?;
        ClaMap::from_gates(self.n_qubits, self.d_inp, self.n_circuit_weights(), bound)
    }

    pub fn encoder_map(&self, layer: usize) -> Result<ClaMap> {
        self.block_map(self.layers[layer].encoder())
    }

    pub fn bias_map(&self, layer: usize) -> Result<ClaMap> {
        self.block_map(self.layers[layer].bias())
    }

    /// First-order map of the whole layer; shared generators add their coefficients.
    pub fn layer_map(&self, layer: usize) -> Result<ClaMap> {
        self.block_map(&self.layers[layer].slots)
    }
}
