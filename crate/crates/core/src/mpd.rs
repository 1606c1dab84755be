//! Matrix product disentangler: compiles an 8-qubit state into layers of
//! staircase two-qubit gates.
//!
//! A bond-2 right-canonical MPS `B₀ B₁ … B₇` is prepared from `|0…0⟩` by
//! gates `G₀ … G₆` on pairs `(k, k+1)`, applied in that order. `G_k` maps
//! `|l⟩|0⟩` to `Σ B_k[l, p, r] |p⟩|r⟩`, the last gate absorbs `B₆B₇`, and the
//! remaining columns are filled by Gram–Schmidt completion. Several layers
//! are found greedily: each layer disentangles the bond-2 approximation of
//! the current residual, and the full residual is pushed through the inverse
//! layer before the next round.

use std::io::Write;

use crate::encoding::mps::{bond, phys, MpsState};
use crate::error::{Error, Result};
use crate::qsim::gates::adjoint;
use crate::qsim::{apply_gate, fidelity, zero_state, N_QUBITS};
use crate::tensor::{
    abs2, conj, contract, map_real, mul_scalar, pad, reshape_split, select, stack, sub, sum_all,
    ReshapePlan, SvdSpec, Tensor,
};

/// Singular values below this fraction of the largest are treated as zero
/// during compilation.
pub const MPD_CUTOFF: f64 = 1e-10;
const GS_TOL: f64 = 1e-8;

/// Seven staircase gates, gate `k` on qubits `(k, k+1)`, with indices
/// `(o0, o1, i0, i1)`.
#[derive(Clone, Debug)]
pub struct GateLayer {
    pub gates: Vec<Tensor>,
}

impl GateLayer {
    /// Applies `G₀ … G₆` in order.
    pub fn apply(&self, mut state: Tensor) -> Result<Tensor> {
        for (k, g) in self.gates.iter().enumerate() {
            state = apply_gate(&state, g, &[k, k + 1])?;
        }
        Ok(state)
    }

    /// Applies the inverse layer `G₀† … G₆†` (so `G₆†` acts first).
    pub fn apply_inverse(&self, mut state: Tensor) -> Result<Tensor> {
        for (k, g) in self.gates.iter().enumerate().rev() {
            state = apply_gate(&state, &adjoint(g)?, &[k, k + 1])?;
        }
        Ok(state)
    }
}

#[derive(Clone, Debug)]
pub struct MpdCircuit {
    /// Layers in application order on `|0…0⟩`.
    pub layers: Vec<GateLayer>,
    /// Output of the layers on `|0…0⟩`, differentiable w.r.t. the target.
    pub prepared: Tensor,
    /// `|⟨target|prepared⟩|²` at compile time.
    pub fidelity: f64,
}

impl MpdCircuit {
    pub fn n_gates(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }
}

fn normalize(t: &Tensor) -> Result<Tensor> {
    let n2 = sum_all(&abs2(t)?)?;
    if !(n2.item() > 0.0) {
        return Err(Error::DegenerateInput(
            "cannot normalise a zero state".into(),
        ));
    }
    let inv = map_real(&n2, |x| 1.0 / x.sqrt(), |x| -0.5 / (x * x.sqrt()))?;
    mul_scalar(t, &inv)
}

fn renormalize_first(mps: MpsState) -> Result<MpsState> {
    mps.map_sites(|i, s| if i == 0 { normalize(s) } else { Ok(s.clone()) })
}

fn chi2_spec() -> SvdSpec {
    SvdSpec {
        max_rank: 2,
        rel_cutoff: MPD_CUTOFF,
    }
}

/// Bond-2 approximation of an MPS in right-canonical form, renormalised.
/// Returns the discarded weight per bond.
pub fn truncate_to_chi2(mps: &MpsState) -> Result<(MpsState, Vec<f64>)> {
    let left = mps.canonicalize(mps.len() - 1)?;
    let (trunc, w) = left.truncate_right_to_left(chi2_spec())?;
    Ok((renormalize_first(trunc)?, w))
}

/// Same as [`truncate_to_chi2`] starting from a dense state `q0 … q7`.
pub fn truncate_dense_to_chi2(state: &Tensor) -> Result<(MpsState, Vec<f64>)> {
    let (trunc, w) = MpsState::from_dense_right(state, N_QUBITS, chi2_spec())?;
    Ok((renormalize_first(trunc)?, w))
}

/// Column of a gate on index `row` (extent 4) for each designated input.
fn isometry_columns(b: &Tensor, k: usize, merged_tail: Option<&Tensor>) -> Result<Vec<Tensor>> {
    let (l, p, r) = (bond(k), phys(k), bond(k + 1));
    let left = b.extent(&l)?;
    let body = match merged_tail {
        Some(next) => {
            // B₆·B₇ with the trailing boundary bond dropped
            let m = contract(b, next)?;
            select(&m, &bond(k + 2), 0)?.rename(&[(&phys(k + 1), "__r")])?
        }
        None => pad(b, &r, 2)?.rename(&[(&r, "__r")])?,
    };
    (0..left)
        .map(|li| {
            let v = select(&body, &l, li)?.permute(&[&p, "__r"])?;
            reshape_split(&v, &ReshapePlan::merge(&[&p, "__r"], "row"))
        })
        .collect()
}

fn basis(j: usize) -> Tensor {
    let mut d = vec![0.0; 4];
    d[j] = 1.0;
    Tensor::real(&[4], &["row"], d).unwrap()
}

/// Extends orthonormal columns (placed at inputs `l·2`) to a 4×4 unitary.
fn complete(designated: Vec<Tensor>) -> Result<Tensor> {
    // the given columns must already be orthonormal
    for (a, ca) in designated.iter().enumerate() {
        for (b, cb) in designated.iter().enumerate().take(a + 1) {
            let ip = contract(&conj(ca)?, cb)?.data()[0];
            let want = if a == b { 1.0 } else { 0.0 };
            if (ip.re - want).abs() > 1e-8 || ip.im.abs() > 1e-8 {
                return Err(Error::KernelCompletion(format!(
                    "isometry columns are not orthonormal (⟨{a}|{b}⟩ = {ip})"
                )));
            }
        }
    }
    let mut slots: Vec<Option<Tensor>> = vec![None; 4];
    let mut basis_cols: Vec<Tensor> = Vec::new();
    for (l, c) in designated.into_iter().enumerate() {
        slots[l * 2] = Some(c.clone());
        basis_cols.push(c);
    }
    for slot in 0..4 {
        if slots[slot].is_some() {
            continue;
        }
        // the basis vector with the largest component outside the span
        let mut best = None;
        let mut best_norm = -1.0;
        for j in 0..4 {
            let n2 = 1.0
                - basis_cols
                    .iter()
                    .map(|c| c.data()[j].norm_sqr())
                    .sum::<f64>();
            if n2 > best_norm + 1e-12 {
                best_norm = n2;
                best = Some(j);
            }
        }
        let j = best.unwrap();
        if best_norm < GS_TOL {
            return Err(Error::KernelCompletion(
                "no candidate left to complete the basis".into(),
            ));
        }
        let mut v = basis(j);
        for c in &basis_cols {
            let coeff = conj(&select(c, "row", j)?)?;
            v = sub(&v, &mul_scalar(c, &coeff)?)?;
        }
        let v = normalize(&v)?;
        slots[slot] = Some(v.clone());
        basis_cols.push(v);
    }
    let cols: Vec<Tensor> = slots.into_iter().map(|s| s.unwrap()).collect();
    let m = stack(&cols, "col")?;
    let m = reshape_split(&m, &ReshapePlan::split("row", &[("o0", 2), ("o1", 2)]))?;
    reshape_split(&m, &ReshapePlan::split("col", &[("i0", 2), ("i1", 2)]))
}

/// Gates `G₀ … G₆` preparing a right-canonical bond-≤2 unit MPS from
/// `|0…0⟩`.
pub fn build_disentangler_layer(chi2: &MpsState) -> Result<GateLayer> {
    let n = chi2.len();
    if n != N_QUBITS || chi2.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::Shape(
            "disentangler expects 8 sites of dimension 2".into(),
        ));
    }
    if chi2.bond_dims().iter().any(|&d| d > 2) {
        return Err(Error::Shape(
            "disentangler expects bonds of at most 2".into(),
        ));
    }
    let sites = chi2.sites();
    let mut gates = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let tail = if k == n - 2 {
            Some(&sites[n - 1])
        } else {
            None
        };
        let cols = isometry_columns(&sites[k], k, tail)?;
        gates.push(complete(cols)?);
    }
    Ok(GateLayer { gates })
}

/// Greedy `k`-layer compilation of a unit state with indices `q0 … q7`.
pub fn compile_mpd(target: &Tensor, k: usize) -> Result<MpdCircuit> {
    if k == 0 {
        return Err(Error::Config(
            "the disentangler needs at least one layer".into(),
        ));
    }
    let mut residual = target.clone();
    let mut found = Vec::with_capacity(k);
    for _ in 0..k {
        let (chi2, _) = truncate_dense_to_chi2(&residual)?;
        let layer = build_disentangler_layer(&chi2)?;
        residual = layer.apply_inverse(residual)?;
        found.push(layer);
    }
    found.reverse();
    let mut s = zero_state();
    for layer in &found {
        s = layer.apply(s)?;
    }
    let fid = fidelity(target, &s)?.item();
    Ok(MpdCircuit {
        layers: found,
        prepared: s,
        fidelity: fid,
    })
}

/// Convenience wrapper taking an MPS.
pub fn compile_mpd_mps(mps8: &MpsState, k: usize) -> Result<MpdCircuit> {
    compile_mpd(&mps8.to_dense()?, k)
}

/// Runs the layers on `|0…0⟩`.
pub fn prepare_state(circuit: &MpdCircuit) -> Result<Tensor> {
    let mut s = zero_state();
    for layer in &circuit.layers {
        s = layer.apply(s)?;
    }
    Ok(s)
}

/// Text dump: one line per gate with layer, qubit pair and the 16 entries of
/// the 4×4 matrix in row-major order as `re,im` pairs.
pub fn write_circuit<W: Write>(mut w: W, circuit: &MpdCircuit) -> Result<()> {
    writeln!(w, "# fidelity {:.17e}", circuit.fidelity)?;
    for (li, layer) in circuit.layers.iter().enumerate() {
        for (k, g) in layer.gates.iter().enumerate() {
            let m = g.permute(&["o0", "o1", "i0", "i1"])?;
            write!(w, "{li} {k} {}", k + 1)?;
            for z in m.data() {
                write!(w, " {:.17e},{:.17e}", z.re, z.im)?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::gates::{compose, gate_to_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Tensor::real(
            &[256],
            &["x"],
            (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        normalize(&crate::qsim::state_from_vec(&v).unwrap()).unwrap()
    }

    fn unitarity_error(g: &Tensor) -> f64 {
        let p = gate_to_matrix(&compose(&adjoint(g).unwrap(), g).unwrap()).unwrap();
        let d = p.data();
        (0..16)
            .map(|i| {
                let want = if i % 5 == 0 { 1.0 } else { 0.0 };
                (d[i] - want).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn bond2_state_is_prepared_exactly() {
        let (chi2, _) = truncate_dense_to_chi2(&random_state(3)).unwrap();
        let target = chi2.to_dense().unwrap();
        let c = compile_mpd(&target, 1).unwrap();
        assert_eq!(c.n_gates(), 7);
        assert!((c.fidelity - 1.0).abs() < 1e-10, "fidelity {}", c.fidelity);
        for g in &c.layers[0].gates {
            assert!(unitarity_error(g) < 1e-12);
        }
    }

    #[test]
    fn more_layers_do_not_hurt_on_this_state() {
        let psi = random_state(11);
        let f1 = compile_mpd(&psi, 1).unwrap().fidelity;
        let f3 = compile_mpd(&psi, 3).unwrap().fidelity;
        assert!(f1 > 0.0 && f1 <= 1.0 + 1e-12);
        assert!(f3 >= f1 - 1e-9, "{f3} < {f1}");
    }

    #[test]
    fn zero_layers_is_rejected() {
        assert!(matches!(
            compile_mpd(&zero_state(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dump_has_one_line_per_gate() {
        let c = compile_mpd(&random_state(5), 2).unwrap();
        let mut buf = Vec::new();
        write_circuit(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 14);
        assert_eq!(
            text.lines().nth(1).unwrap().split_whitespace().count(),
            3 + 16
        );
    }
}
