//! Append-only reverse-mode tape.
//!
//! Gradients follow the conjugate (Wirtinger) convention: the gradient stored
//! for a complex entry `z` is `∂L/∂Re z + i ∂L/∂Im z`. For real-kind nodes the
//! accumulated gradient is projected onto its real part, which is exactly the
//! derivative of a real loss with respect to a real variable.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use super::{Kind, Tensor, C64};
use crate::error::{Error, Result};

pub(crate) type BackwardFn = Box<dyn Fn(&[C64]) -> Vec<Option<Vec<C64>>> + Send>;

struct Node {
    parents: Vec<Option<usize>>,
    backward: Option<BackwardFn>,
    len: usize,
    kind: Kind,
    param: bool,
}

/// Handle of a registered parameter on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone)]
pub(crate) struct Var {
    pub(crate) tape: Tape,
    pub(crate) id: usize,
}

/// A differentiation tape. Cloning shares the underlying node list.
#[derive(Clone, Default)]
pub struct Tape {
    nodes: Arc<Mutex<Vec<Node>>>,
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Vec<Node>> {
        self.nodes.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn same(&self, other: &Tape) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes)
    }

    pub(crate) fn push(
        &self,
        parents: Vec<Option<usize>>,
        backward: Option<BackwardFn>,
        len: usize,
        kind: Kind,
        param: bool,
    ) -> usize {
        let mut nodes = self.lock();
        nodes.push(Node {
            parents,
            backward,
            len,
            kind,
            param,
        });
        nodes.len() - 1
    }

    /// Registers `t` as a trainable leaf on this tape. The returned tensor
    /// shares data with `t` and carries the new handle.
    pub fn param(&self, t: &Tensor) -> Tensor {
        let id = self.push(Vec::new(), None, t.len(), t.kind(), true);
        t.detach().with_var(Var {
            tape: self.clone(),
            id,
        })
    }

    /// Reverse sweep from a real scalar loss.
    pub fn backward(&self, loss: &Tensor) -> Result<Gradients> {
        if loss.rank() != 0 {
            return Err(Error::Shape(format!(
                "loss must be a scalar, got shape {:?}",
                loss.shape()
            )));
        }
        if loss.kind() != Kind::Real {
            return Err(Error::Type("loss must be real".into()));
        }
        self.backward_with_seeds(&[(loss, &[C64::new(1.0, 0.0)])])
    }

    /// Vector-Jacobian product: seeds each output with the given cotangent
    /// and sweeps back to every registered parameter.
    pub fn backward_with_seeds(&self, seeds: &[(&Tensor, &[C64])]) -> Result<Gradients> {
        let nodes = self.lock();
        let mut grads: Vec<Option<Vec<C64>>> = (0..nodes.len()).map(|_| None).collect();
        let mut top = 0usize;
        for (t, g) in seeds {
            let Some(var) = &t.var else { continue };
            if !var.tape.same(self) {
                return Err(Error::TapeMismatch);
            }
            if g.len() != t.len() {
                return Err(Error::Shape("seed length does not match tensor".into()));
            }
            accumulate(&mut grads[var.id], g, nodes[var.id].kind);
            top = top.max(var.id + 1);
        }

        let mut out = HashMap::new();
        for id in (0..top).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(bw) = &node.backward {
                let parent_grads = bw(&g);
                for (parent, pg) in node.parents.iter().zip(parent_grads) {
                    if let (Some(p), Some(pg)) = (parent, pg) {
                        accumulate(&mut grads[*p], &pg, nodes[*p].kind);
                    }
                }
            }
            if node.param {
                out.insert(id, g);
            }
        }
        let lens = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.param)
            .map(|(i, n)| (i, n.len))
            .collect();
        Ok(Gradients {
            tape: self.clone(),
            grads: out,
            lens,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<C64>>, g: &[C64], kind: Kind) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += *b;
            }
            if kind == Kind::Real {
                acc.iter_mut().for_each(|a| a.im = 0.0);
            }
        }
        None => {
            let mut v = g.to_vec();
            if kind == Kind::Real {
                v.iter_mut().for_each(|a| a.im = 0.0);
            }
            *slot = Some(v);
        }
    }
}

/// Gradients of every registered parameter reached (or not) by a sweep.
pub struct Gradients {
    tape: Tape,
    grads: HashMap<usize, Vec<C64>>,
    lens: HashMap<usize, usize>,
}

impl Gradients {
    /// Gradient for a parameter tensor; zero if the sweep never reached it.
    pub fn wrt(&self, param: &Tensor) -> Result<Tensor> {
        let var = param
            .var
            .as_ref()
            .ok_or_else(|| Error::Type("tensor is not tracked".into()))?;
        if !var.tape.same(&self.tape) {
            return Err(Error::TapeMismatch);
        }
        let len = *self
            .lens
            .get(&var.id)
            .ok_or_else(|| Error::Type("tensor is not a registered parameter".into()))?;
        let data = self
            .grads
            .get(&var.id)
            .cloned()
            .unwrap_or_else(|| vec![C64::new(0.0, 0.0); len]);
        Tensor::new(
            param.shape().to_vec(),
            param.names().to_vec(),
            data,
            param.kind(),
        )
    }

    /// Raw gradient slice by handle, `None` when unreached.
    pub fn get(&self, id: ParamId) -> Option<&[C64]> {
        self.grads.get(&id.0).map(|v| v.as_slice())
    }

    /// Real part of the gradient for `param`, zeros if unreached.
    pub fn real_wrt(&self, param: &Tensor) -> Result<Vec<f64>> {
        Ok(self.wrt(param)?.data().iter().map(|z| z.re).collect())
    }
}
