//! Trainable matrix product operator mapping the 6-site, dimension-3 MPS to
//! an 8-site, dimension-2 MPS.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mps::{bond, phys, MpsState};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{
    abs2, contract, map_real, mul_scalar, reshape_split, sum_all, tanh, ReshapePlan, SvdSpec, Tape,
    Tensor,
};

pub const OUT_SITES: usize = 8;
pub const IN_SITES: usize = 6;
pub const OUT_DIM: usize = 2;
pub const IN_DIM: usize = 3;

/// Singular values below this fraction of the largest are dropped while
/// recompressing; they carry no information and make the SVD backward
/// ill-conditioned.
pub const RECOMPRESS_CUTOFF: f64 = 1e-10;

fn mpo_bond(i: usize) -> String {
    format!("m{i}")
}

fn out_name(i: usize) -> String {
    format!("o{i}")
}

/// Cores with indices `(m{i}, q{i}, o{i}, m{i+1})`.
#[derive(Clone, Debug)]
pub struct MpoOperator {
    cores: Vec<Tensor>,
    chi: usize,
}

impl MpoOperator {
    fn core_shape(i: usize, chi: usize) -> [usize; 4] {
        let bl = if i == 0 { 1 } else { chi };
        let br = if i == OUT_SITES - 1 { 1 } else { chi };
        let input = if i < IN_SITES { IN_DIM } else { 1 };
        [bl, input, OUT_DIM, br]
    }

    fn core_names(i: usize) -> [String; 4] {
        [mpo_bond(i), phys(i), out_name(i), mpo_bond(i + 1)]
    }

    /// Identity on the first two levels of every input site, `|0⟩` on the
    /// output-only sites, bond index passed straight through, plus Gaussian
    /// noise of standard deviation `sigma`.
    pub fn noisy_identity<R: Rng>(chi: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        if chi == 0 {
            return Err(Error::Config(
                "MPO bond dimension must be at least 1".into(),
            ));
        }
        let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
        let cores = (0..OUT_SITES)
            .map(|i| {
                let [bl, ni, no, br] = Self::core_shape(i, chi);
                let mut data = Vec::with_capacity(bl * ni * no * br);
                for l in 0..bl {
                    for p in 0..ni {
                        for o in 0..no {
                            for r in 0..br {
                                let on_path = l == r;
                                let ident = if i < IN_SITES { p == o } else { o == 0 };
                                let base = if on_path && ident { 1.0 } else { 0.0 };
                                let eps = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                                data.push(base + eps);
                            }
                        }
                    }
                }
                let names = Self::core_names(i);
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                Tensor::real(&[bl, ni, no, br], &refs, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cores, chi })
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn cores(&self) -> &[Tensor] {
        &self.cores
    }

    pub fn n_params(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.cores.iter().flat_map(|c| c.real_data()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return shape_err("MPO parameter vector has the wrong length");
        }
        let mut off = 0;
        for (i, c) in self.cores.iter_mut().enumerate() {
            let n = c.len();
            let names = Self::core_names(i);
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            *c = Tensor::real(c.shape(), &refs, flat[off..off + n].to_vec())?;
            off += n;
        }
        Ok(())
    }

    /// Copy whose cores are parameters on `tape`.
    pub fn register(&self, tape: &Tape) -> MpoOperator {
        MpoOperator {
            cores: self.cores.iter().map(|c| tape.param(c)).collect(),
            chi: self.chi,
        }
    }
}

/// Zip contraction with the six input sites (two trivial sites appended for
/// the output-only cores), followed by SVD recompression to bonds ≤ `chi_out`.
pub fn mpo_apply(mpo: &MpoOperator, mps6: &MpsState, chi_out: usize) -> Result<MpsState> {
    if mps6.len() != IN_SITES || mps6.phys_dims().iter().any(|&d| d != IN_DIM) {
        return shape_err(format!(
            "MPO expects {IN_SITES} sites of extent {IN_DIM}, got {:?}",
            mps6.phys_dims()
        ));
    }
    let mut inputs: Vec<Tensor> = mps6.sites().to_vec();
    for i in IN_SITES..OUT_SITES {
        inputs.push(Tensor::real(
            &[1, 1, 1],
            &[&bond(i), &phys(i), &bond(i + 1)],
            vec![1.0],
        )?);
    }
    let mut sites = Vec::with_capacity(OUT_SITES);
    for (i, (s, w)) in inputs.iter().zip(&mpo.cores).enumerate() {
        let (bl, br, ml, mr) = (bond(i), bond(i + 1), mpo_bond(i), mpo_bond(i + 1));
        let t = contract(s, w)?;
        let t = reshape_split(&t, &ReshapePlan::merge(&[&bl, &ml], &bl))?;
        let t = reshape_split(&t, &ReshapePlan::merge(&[&br, &mr], &br))?;
        sites.push(t.rename(&[(&out_name(i), &phys(i))])?);
    }
    let zipped = MpsState::new(sites)?;
    let full = SvdSpec {
        max_rank: usize::MAX,
        rel_cutoff: RECOMPRESS_CUTOFF,
    };
    let (right, _) = zipped.truncate_right_to_left(full)?;
    let (out, _) = right.truncate_left_to_right(SvdSpec {
        max_rank: chi_out,
        rel_cutoff: RECOMPRESS_CUTOFF,
    })?;
    Ok(out)
}

/// Result of the tanh + normalisation step.
pub struct Normalized {
    /// Unit-norm MPS (the norm is divided out of site 0).
    pub mps: MpsState,
    /// Dense unit state, indices `q0 … q7`.
    pub state: Tensor,
    pub nu: Tensor,
    pub angle: Tensor,
}

/// Entrywise tanh on every core, then division by the norm of the
/// contracted state.
pub fn nonlinear_normalize(mps8: &MpsState, alpha: f64) -> Result<Normalized> {
    let squashed = mps8.map_sites(|_, s| tanh(s))?;
    let dense = squashed.to_dense()?;
    let nu = map_real(&sum_all(&abs2(&dense)?)?, f64::sqrt, |x| 0.5 / x.sqrt())?;
    if !(nu.item() > 0.0) {
        return Err(Error::DegenerateInput(
            "encoded state vanishes after the nonlinearity".into(),
        ));
    }
    let inv = map_real(&nu, |x| 1.0 / x, |x| -1.0 / (x * x))?;
    let state = mul_scalar(&dense, &inv)?;
    let mps = squashed.map_sites(|i, s| {
        if i == 0 {
            mul_scalar(s, &inv)
        } else {
            Ok(s.clone())
        }
    })?;
    let angle = super::norm_to_angle_tensor(&nu, alpha)?;
    Ok(Normalized {
        mps,
        state,
        nu,
        angle,
    })
}
