//! Dense 8-qubit statevector simulation.
//!
//! States are rank-8 tensors with indices `q0 … q7`, each of extent 2.
//! Qubit 0 is the most significant bit of the flat amplitude index.

pub mod gates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{abs2, contract, select, stack, sum_over, ParamId, Tape, Tensor};
pub use gates::{gate_from_values, make_gate, GateKind};

pub const N_QUBITS: usize = 8;

pub fn qubit(i: usize) -> String {
    format!("q{i}")
}

fn qubit_names() -> Vec<String> {
    (0..N_QUBITS).map(qubit).collect()
}

/// `|0…0⟩`.
pub fn zero_state() -> Tensor {
    let mut d = vec![0.0; 1 << N_QUBITS];
    d[0] = 1.0;
    let names = qubit_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Tensor::real(&[2; N_QUBITS], &refs, d).unwrap()
}

/// Reshapes a flat 256-vector (qubit 0 most significant) into a state.
pub fn state_from_vec(t: &Tensor) -> Result<Tensor> {
    let names = qubit_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let parts: Vec<(&str, usize)> = refs.iter().map(|n| (*n, 2)).collect();
    crate::tensor::reshape_split(t, &crate::tensor::ReshapePlan::split(&t.names()[0], &parts))
}

/// Applies a one- or two-qubit gate to the listed qubits.
pub fn apply_gate(state: &Tensor, gate: &Tensor, qubits: &[usize]) -> Result<Tensor> {
    let k = gate.rank() / 2;
    if k != qubits.len() || k == 0 || k > 2 {
        return Err(Error::Config(format!(
            "gate of rank {} cannot act on {} qubits",
            gate.rank(),
            qubits.len()
        )));
    }
    if qubits.iter().any(|&q| q >= N_QUBITS) || (k == 2 && qubits[0] == qubits[1]) {
        return Err(Error::Config(format!("invalid qubit list {qubits:?}")));
    }
    let names: Vec<(String, String, String)> = qubits
        .iter()
        .enumerate()
        .map(|(j, &q)| (format!("i{j}"), format!("o{j}"), qubit(q)))
        .collect();
    let tmp: Vec<String> = (0..k).map(|j| format!("__o{j}")).collect();
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for (j, (i, o, q)) in names.iter().enumerate() {
        pairs.push((i.as_str(), q.as_str()));
        pairs.push((o.as_str(), tmp[j].as_str()));
    }
    let out = contract(state, &gate.rename(&pairs)?)?;
    let back: Vec<(&str, &str)> = names
        .iter()
        .enumerate()
        .map(|(j, (_, _, q))| (tmp[j].as_str(), q.as_str()))
        .collect();
    let order = qubit_names();
    let refs: Vec<&str> = order.iter().map(|s| s.as_str()).collect();
    out.rename(&back)?.permute(&refs)
}

/// Marginal probabilities of the listed qubits, in list order.
pub fn marginal(state: &Tensor, keep: &[usize]) -> Result<Tensor> {
    let others: Vec<String> = (0..N_QUBITS)
        .filter(|q| !keep.contains(q))
        .map(qubit)
        .collect();
    let refs: Vec<&str> = others.iter().map(|s| s.as_str()).collect();
    let p = sum_over(&abs2(state)?, &refs)?;
    let order: Vec<String> = keep.iter().map(|&q| qubit(q)).collect();
    let refs: Vec<&str> = order.iter().map(|s| s.as_str()).collect();
    p.permute(&refs)
}

/// `[p0, p1]` of the last qubit on index `out`.
pub fn probs_last_qubit(state: &Tensor) -> Result<Tensor> {
    marginal(state, &[N_QUBITS - 1])?.rename(&[(&qubit(N_QUBITS - 1), "out")])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    Z(usize),
    ZZ(usize, usize),
}

/// `⟨ψ|O|ψ⟩` for `Z_i` or `Z_i ⊗ Z_j` (rank-0, real).
pub fn expval_pauli(state: &Tensor, obs: Pauli) -> Result<Tensor> {
    let z = |q: usize| Tensor::real(&[2], &[&qubit(q)], vec![1.0, -1.0]).unwrap();
    match obs {
        Pauli::Z(i) => contract(&marginal(state, &[i])?, &z(i)),
        Pauli::ZZ(i, j) => {
            if i == j {
                return Err(Error::Config("ZZ needs two distinct qubits".into()));
            }
            contract(&contract(&marginal(state, &[i, j])?, &z(i))?, &z(j))
        }
    }
}

/// What the circuit reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "qubits")]
pub enum Readout {
    ClassProbsLastQubit,
    ExpvalZ(Vec<usize>),
    ExpvalZz(Vec<(usize, usize)>),
}

impl Readout {
    pub fn validate(&self) -> Result<()> {
        let qs = self.measured_qubits();
        if qs.iter().any(|&q| q >= N_QUBITS) {
            return Err(Error::Config("readout qubit out of range".into()));
        }
        for (i, q) in qs.iter().enumerate() {
            if qs[..i].contains(q) {
                return Err(Error::Config(format!("readout qubits overlap: {qs:?}")));
            }
        }
        Ok(())
    }

    /// Qubits that receive a measurement-layer rotation.
    pub fn measured_qubits(&self) -> Vec<usize> {
        match self {
            Readout::ClassProbsLastQubit => vec![N_QUBITS - 1],
            Readout::ExpvalZ(q) => q.clone(),
            Readout::ExpvalZz(p) => p.iter().flat_map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Readout::ClassProbsLastQubit => 2,
            Readout::ExpvalZ(q) => q.len(),
            Readout::ExpvalZz(p) => p.len(),
        }
    }

    /// Readout values on index `out`.
    pub fn evaluate(&self, state: &Tensor) -> Result<Tensor> {
        self.validate()?;
        let vals = match self {
            Readout::ClassProbsLastQubit => return probs_last_qubit(state),
            Readout::ExpvalZ(q) => q
                .iter()
                .map(|&i| expval_pauli(state, Pauli::Z(i)))
                .collect::<Result<Vec<_>>>()?,
            Readout::ExpvalZz(p) => p
                .iter()
                .map(|&(i, j)| expval_pauli(state, Pauli::ZZ(i, j)))
                .collect::<Result<Vec<_>>>()?,
        };
        stack(&vals, "out")
    }
}

/// Layout of the variational part of the circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitPlan {
    pub gate_kind: GateKind,
    /// Number of staircase layers on pairs `(q, q+1)`, `q = 0 … 6`.
    pub layers: usize,
    pub measure_layer: bool,
    pub readout: Readout,
}

impl CircuitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.gate_kind == GateKind::Rot3 {
            return Err(Error::Config(
                "processing layers need a two-qubit gate kind".into(),
            ));
        }
        if self.layers == 0 {
            return Err(Error::Config(
                "at least one processing layer is required".into(),
            ));
        }
        self.readout.validate()
    }

    pub fn n_processing_params(&self) -> usize {
        self.layers * (N_QUBITS - 1) * self.gate_kind.n_params()
    }

    pub fn n_params(&self) -> usize {
        let measure = if self.measure_layer {
            3 * self.readout.measured_qubits().len()
        } else {
            0
        };
        self.n_processing_params() + measure
    }

    /// Builds every parameterised gate from a flat parameter tensor (index
    /// `p`). Processing gates come first, layer by layer, then the
    /// measurement rotations.
    pub fn build_gates(&self, params: &Tensor) -> Result<CircuitGates> {
        self.validate()?;
        if params.len() != self.n_params() {
            return Err(Error::Config(format!(
                "circuit needs {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let np = self.gate_kind.n_params();
        let mut gates = Vec::new();
        let mut off = 0;
        for _ in 0..self.layers {
            for q in 0..N_QUBITS - 1 {
                let p = slice(params, off, np)?;
                gates.push((make_gate(self.gate_kind, &p)?, vec![q, q + 1]));
                off += np;
            }
        }
        if self.measure_layer {
            for q in self.readout.measured_qubits() {
                let p = slice(params, off, 3)?;
                gates.push((make_gate(GateKind::Rot3, &p)?, vec![q]));
                off += 3;
            }
        }
        Ok(CircuitGates { gates })
    }
}

fn slice(params: &Tensor, off: usize, n: usize) -> Result<Tensor> {
    let parts = (off..off + n)
        .map(|i| select(params, "p", i))
        .collect::<Result<Vec<_>>>()?;
    stack(&parts, "p")
}

/// Concrete gates of a [`CircuitPlan`] in application order.
#[derive(Clone, Debug)]
pub struct CircuitGates {
    pub gates: Vec<(Tensor, Vec<usize>)>,
}

impl CircuitGates {
    /// Copy whose gate tensors are leaves on `tape`.
    pub fn register(&self, tape: &Tape) -> CircuitGates {
        CircuitGates {
            gates: self
                .gates
                .iter()
                .map(|(g, q)| (tape.param(g), q.clone()))
                .collect(),
        }
    }

    pub fn param_ids(&self) -> Vec<Option<ParamId>> {
        self.gates.iter().map(|(g, _)| g.param_id()).collect()
    }

    pub fn apply(&self, mut state: Tensor) -> Result<Tensor> {
        for (g, q) in &self.gates {
            state = apply_gate(&state, g, q)?;
        }
        Ok(state)
    }
}

/// `rot3(angle_raw, angle_mps, 0)` for qubit 0.
pub fn norm_gate(angle_raw: f64, angle_mps: &Tensor) -> Result<Tensor> {
    let params = stack(
        &[
            Tensor::scalar(angle_raw),
            angle_mps.clone(),
            Tensor::scalar(0.0),
        ],
        "p",
    )?;
    make_gate(GateKind::Rot3, &params)
}

/// Norm rotation on qubit 0 of the prepared input, then the variational
/// gates.
pub fn run_circuit(input: &Tensor, norm: &Tensor, gates: &CircuitGates) -> Result<Tensor> {
    let s = apply_gate(input, norm, &[0])?;
    gates.apply(s)
}

/// Squared overlap `|⟨a|b⟩|²` of two states (rank-0, real).
pub fn fidelity(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    abs2(&contract(&crate::tensor::conj(a)?, b)?)
}
