//! Gate construction. One-qubit gates carry indices `(o0, i0)`, two-qubit
//! gates `(o0, o1, i0, i1)`; `o` is the output (row) side.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{
    conj, contract, matrix_exp, reshape_split, scale, select, ReshapePlan, Tensor, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    /// `RZ(ω)·RY(θ)·RZ(φ)` on one qubit.
    Rot3,
    /// Two `rot3` followed by a CNOT ring.
    Sel2,
    /// `exp(i Σ θ_k P_k)` over the 15 two-qubit Pauli words.
    Su4,
}

impl GateKind {
    pub fn n_params(self) -> usize {
        match self {
            GateKind::Rot3 => 3,
            GateKind::Sel2 => 6,
            GateKind::Su4 => 15,
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            GateKind::Rot3 => 1,
            _ => 2,
        }
    }
}

const Z0: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

fn pauli(k: usize) -> [C64; 4] {
    match k {
        0 => [ONE, Z0, Z0, ONE],
        1 => [Z0, ONE, ONE, Z0],
        2 => [Z0, -I, I, Z0],
        _ => [ONE, Z0, Z0, -ONE],
    }
}

/// Two-qubit Pauli words `IX, IY, IZ, XI, …, ZZ` as a `(k, r, c)` tensor.
fn pauli_words() -> &'static Tensor {
    static WORDS: OnceLock<Tensor> = OnceLock::new();
    WORDS.get_or_init(|| {
        let mut data = Vec::with_capacity(15 * 16);
        for w in 1..16 {
            let (a, b) = (pauli(w / 4), pauli(w % 4));
            for r in 0..4 {
                for c in 0..4 {
                    data.push(a[(r / 2) * 2 + c / 2] * b[(r % 2) * 2 + c % 2]);
                }
            }
        }
        Tensor::complex(&[15, 4, 4], &["k", "r", "c"], data).unwrap()
    })
}

fn half_generator(k: usize) -> Tensor {
    // −(i/2)·σ_k as an (r, c) matrix
    let p = pauli(k);
    let data = p.iter().map(|z| z * C64::new(0.0, -0.5)).collect();
    Tensor::complex(&[2, 2], &["r", "c"], data).unwrap()
}

/// `(r, c)` matrix product `a · b`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let a = a.rename(&[("c", "__m")])?;
    let b = b.rename(&[("r", "__m")])?;
    contract(&a, &b)
}

fn rotation(angle: &Tensor, axis: usize) -> Result<Tensor> {
    matrix_exp(&contract(angle, &half_generator(axis))?)
}

/// `RZ(ω)·RY(θ)·RZ(φ)` from a 3-vector `(φ, θ, ω)` on index `p`, as an
/// `(r, c)` matrix.
pub fn rot3_matrix(params: &Tensor) -> Result<Tensor> {
    let phi = rotation(&select(params, "p", 0)?, 3)?;
    let theta = rotation(&select(params, "p", 1)?, 2)?;
    let omega = rotation(&select(params, "p", 2)?, 3)?;
    matmul(&omega, &matmul(&theta, &phi)?)
}

/// Splits an `(r, c)` matrix into gate indices.
pub fn matrix_to_gate(m: &Tensor, n_qubits: usize) -> Result<Tensor> {
    match n_qubits {
        1 => m.rename(&[("r", "o0"), ("c", "i0")]),
        2 => {
            let t = reshape_split(m, &ReshapePlan::split("r", &[("o0", 2), ("o1", 2)]))?;
            reshape_split(&t, &ReshapePlan::split("c", &[("i0", 2), ("i1", 2)]))
        }
        _ => shape_err("gates act on one or two qubits"),
    }
}

/// Merges gate indices back into an `(r, c)` matrix.
pub fn gate_to_matrix(g: &Tensor) -> Result<Tensor> {
    if g.rank() == 2 {
        return g
            .permute(&["o0", "i0"])?
            .rename(&[("o0", "r"), ("i0", "c")]);
    }
    let t = reshape_split(
        &g.permute(&["o0", "o1", "i0", "i1"])?,
        &ReshapePlan::merge(&["o0", "o1"], "r"),
    )?;
    reshape_split(&t, &ReshapePlan::merge(&["i0", "i1"], "c"))
}

/// `g₂ · g₁` for gates on the same qubits.
pub fn compose(g2: &Tensor, g1: &Tensor) -> Result<Tensor> {
    let n = g1.rank() / 2;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let names: Vec<(String, String, String)> = (0..n)
        .map(|k| (format!("o{k}"), format!("i{k}"), format!("__c{k}")))
        .collect();
    for (o, i, t) in &names {
        a.push((i.as_str(), t.as_str()));
        b.push((o.as_str(), t.as_str()));
    }
    contract(&g2.rename(&a)?, &g1.rename(&b)?)
}

pub fn adjoint(g: &Tensor) -> Result<Tensor> {
    let n = g.rank() / 2;
    let names: Vec<(String, String)> = (0..n).map(|k| (format!("o{k}"), format!("i{k}"))).collect();
    let mut pairs = Vec::new();
    for (o, i) in &names {
        pairs.push((o.as_str(), i.as_str()));
        pairs.push((i.as_str(), o.as_str()));
    }
    conj(g)?.rename(&pairs)
}

fn cnot(control_first: bool) -> Tensor {
    let mut d = vec![0.0; 16];
    for r in 0..4usize {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = if control_first {
            (a, b ^ a)
        } else {
            (a ^ b, b)
        };
        d[(a2 * 2 + b2) * 4 + r] = 1.0;
    }
    matrix_to_gate(&Tensor::real(&[4, 4], &["r", "c"], d).unwrap(), 2).unwrap()
}

/// Builds a gate from its parameters (a rank-1 tensor on index `p`).
pub fn make_gate(kind: GateKind, params: &Tensor) -> Result<Tensor> {
    if params.rank() != 1 || params.names()[0] != "p" || params.len() != kind.n_params() {
        return Err(Error::Config(format!(
            "{kind:?} needs {} parameters on index \"p\", got shape {:?}",
            kind.n_params(),
            params.shape()
        )));
    }
    match kind {
        GateKind::Rot3 => matrix_to_gate(&rot3_matrix(params)?, 1),
        GateKind::Sel2 => {
            let pa = reshape_split(params, &ReshapePlan::split("p", &[("h", 2), ("p", 3)]))?;
            let ra = matrix_to_gate(&rot3_matrix(&select(&pa, "h", 0)?)?, 1)?;
            let rb = matrix_to_gate(&rot3_matrix(&select(&pa, "h", 1)?)?, 1)?;
            let local = contract(&ra, &rb.rename(&[("o0", "o1"), ("i0", "i1")])?)?;
            compose(&cnot(false), &compose(&cnot(true), &local)?)
        }
        GateKind::Su4 => {
            let gen = contract(&params.rename(&[("p", "k")])?, pauli_words())?;
            matrix_to_gate(&matrix_exp(&scale(&gen, I)?)?, 2)
        }
    }
}

/// Untracked gate from plain parameters.
pub fn gate_from_values(kind: GateKind, params: &[f64]) -> Result<Tensor> {
    make_gate(
        kind,
        &Tensor::real(&[params.len()], &["p"], params.to_vec())?,
    )
}
