//! Dense named-index tensors with reverse-mode differentiation.
//!
//! Every tensor stores its entries as `Complex64` in row-major order together
//! with a [`Kind`] tag. Real-kind tensors always have zero imaginary parts.
//! Operations on tracked tensors record a node on the shared [`Tape`];
//! operations on untracked tensors never touch a tape.

mod dump;
mod linalg;
mod ops;
mod tape;

use std::sync::Arc;

pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use dump::{read_tensor, write_tensor};
pub use linalg::{matrix_exp, svd_truncated, SvdOutput, SvdSpec};
pub use ops::{
    abs2, add, conj, contract, map_real, mul_scalar, pad, real_part, reshape_split, scale,
    scale_axis, select, stack, sub, sum_all, sum_over, tanh, ReshapePlan,
};
pub use tape::{Gradients, ParamId, Tape};

use crate::error::{shape_err, Error, Result};
use tape::{BackwardFn, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Real,
    Complex,
}

impl Kind {
    pub fn join(self, other: Kind) -> Kind {
        if self == Kind::Real && other == Kind::Real {
            Kind::Real
        } else {
            Kind::Complex
        }
    }
}

#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    names: Vec<String>,
    data: Arc<Vec<C64>>,
    kind: Kind,
    var: Option<Var>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("names", &self.names)
            .field("shape", &self.shape)
            .field("kind", &self.kind)
            .field("tracked", &self.var.is_some())
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, names: Vec<String>, data: Vec<C64>, kind: Kind) -> Result<Self> {
        if shape.len() != names.len() {
            return shape_err(format!(
                "{} names for rank-{} tensor",
                names.len(),
                shape.len()
            ));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {n} entries, got {}",
                data.len()
            ));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return shape_err(format!("duplicate index name {a:?}"));
            }
        }
        let data = match kind {
            Kind::Real => data.into_iter().map(|z| C64::new(z.re, 0.0)).collect(),
            Kind::Complex => data,
        };
        Ok(Self {
            shape,
            names,
            data: Arc::new(data),
            kind,
            var: None,
        })
    }

    pub fn real(shape: &[usize], names: &[&str], data: Vec<f64>) -> Result<Self> {
        Self::new(
            shape.to_vec(),
            owned(names),
            data.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            Kind::Real,
        )
    }

    pub fn complex(shape: &[usize], names: &[&str], data: Vec<C64>) -> Result<Self> {
        Self::new(shape.to_vec(), owned(names), data, Kind::Complex)
    }

    pub fn zeros(shape: &[usize], names: &[&str], kind: Kind) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(
            shape.to_vec(),
            owned(names),
            vec![C64::new(0.0, 0.0); n],
            kind,
        )
    }

    pub fn scalar(x: f64) -> Self {
        Self {
            shape: vec![],
            names: vec![],
            data: Arc::new(vec![C64::new(x, 0.0)]),
            kind: Kind::Real,
            var: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_tracked(&self) -> bool {
        self.var.is_some()
    }

    pub fn param_id(&self) -> Option<ParamId> {
        self.var.as_ref().map(|v| ParamId(v.id))
    }

    pub fn tape(&self) -> Option<&Tape> {
        self.var.as_ref().map(|v| &v.tape)
    }

    /// Position of index `name`.
    pub fn axis(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Shape(format!("no index named {name:?} in {:?}", self.names)))
    }

    pub fn extent(&self, name: &str) -> Result<usize> {
        Ok(self.shape[self.axis(name)?])
    }

    pub fn real_data(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    /// Value of a rank-0 tensor (real part).
    pub fn item(&self) -> f64 {
        self.data[0].re
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let mut flat = 0;
        for (i, &x) in idx.iter().enumerate() {
            flat = flat * self.shape[i] + x;
        }
        self.data[flat]
    }

    /// Untracked copy sharing the same data.
    pub fn detach(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            names: self.names.clone(),
            data: Arc::clone(&self.data),
            kind: self.kind,
            var: None,
        }
    }

    pub(crate) fn with_var(mut self, var: Var) -> Tensor {
        self.var = Some(var);
        self
    }

    /// Renames indices; `pairs` maps old name → new name. Data is untouched.
    pub fn rename(&self, pairs: &[(&str, &str)]) -> Result<Tensor> {
        self.relabel(self.names_after(pairs)?)
    }

    fn names_after(&self, pairs: &[(&str, &str)]) -> Result<Vec<String>> {
        let mut names = self.names.clone();
        for (from, to) in pairs {
            let ax = self.axis(from)?;
            names[ax] = to.to_string();
        }
        Ok(names)
    }

    /// Replaces all index names at once.
    pub fn relabel(&self, names: Vec<String>) -> Result<Tensor> {
        if names.len() != self.rank() {
            return shape_err("relabel: wrong number of names");
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return shape_err(format!("duplicate index name {a:?}"));
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            names,
            data: Arc::clone(&self.data),
            kind: self.kind,
            var: self.var.clone(),
        })
    }

    /// Reorders axes to the given name order.
    pub fn permute(&self, order: &[&str]) -> Result<Tensor> {
        if order.len() != self.rank() {
            return shape_err(format!(
                "permute: expected {} names, got {}",
                self.rank(),
                order.len()
            ));
        }
        let perm = order
            .iter()
            .map(|n| self.axis(n))
            .collect::<Result<Vec<_>>>()?;
        ops::permute_axes(self, &perm)
    }

    /// Largest entrywise distance after aligning index order.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        let o = other.permute(&self.name_refs())?;
        if o.shape != self.shape {
            return shape_err("max_abs_diff: shape mismatch");
        }
        Ok(self
            .data
            .iter()
            .zip(o.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn name_refs(&self) -> Vec<&str> {
        self.names.iter().map(|s| s.as_str()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub(crate) fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Builds the output of an operation, recording a tape node when any input
/// is tracked. `backward` maps the output cotangent to one optional cotangent
/// per input (in input order).
pub(crate) fn record<F>(
    inputs: &[&Tensor],
    shape: Vec<usize>,
    names: Vec<String>,
    data: Vec<C64>,
    kind: Kind,
    backward: F,
) -> Result<Tensor>
where
    F: Fn(&[C64]) -> Vec<Option<Vec<C64>>> + Send + 'static,
{
    let mut out = Tensor::new(shape, names, data, kind)?;
    let mut tape: Option<&Tape> = None;
    for t in inputs {
        if let Some(v) = &t.var {
            match tape {
                None => tape = Some(&v.tape),
                Some(tp) if !tp.same(&v.tape) => return Err(Error::TapeMismatch),
                _ => {}
            }
        }
    }
    if let Some(tape) = tape {
        let parents = inputs
            .iter()
            .map(|t| t.var.as_ref().map(|v| v.id))
            .collect();
        let bw: BackwardFn = Box::new(backward);
        let id = tape.push(parents, Some(bw), out.len(), kind, false);
        out.var = Some(Var {
            tape: tape.clone(),
            id,
        });
    }
    Ok(out)
}
