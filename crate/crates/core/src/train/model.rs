//! The hybrid model: trainable MPO encoding, state loading and the
//! variational circuit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{cross_entropy, huber_loss};
use crate::aero::Dataset;
use crate::encoding::{encode, prepare_sample, EncodingConfig, MpoOperator, PreparedSample};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::mpd::compile_mpd;
use crate::qsim::{norm_gate, run_circuit, CircuitGates, CircuitPlan};
use crate::tensor::{mul_scalar, Tape, Tensor, C64};

/// Parameter-independent sample data shared by every run on a dataset.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub samples: Vec<PreparedSample>,
    /// 1 for unstable.
    pub labels: Vec<u8>,
    /// `(a, μ, U∞)` per sample.
    pub params: Vec<Vec<f64>>,
    pub encoding: EncodingConfig,
}

impl PreparedData {
    pub fn from_dataset(ds: &Dataset, encoding: &EncodingConfig, mode: ExecMode) -> Result<Self> {
        let samples = map_indexed(mode, ds.samples.len(), |i| {
            prepare_sample(&ds.samples[i].series, encoding)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            labels: ds.samples.iter().map(|s| s.label as u8).collect(),
            params: ds
                .samples
                .iter()
                .map(|s| vec![s.params.a, s.params.mu, s.params.u_inf])
                .collect(),
            encoding: *encoding,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Trainable state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub chi_mpo: usize,
    pub mpo: Vec<f64>,
    pub vqc: Vec<f64>,
}

impl ModelParams {
    pub fn init(cfg: &ExperimentConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mpo = MpoOperator::noisy_identity(cfg.chi_mpo, cfg.mpo_init_sigma, &mut rng)?;
        let n = cfg.circuit_plan()?.n_params();
        let normal =
            Normal::new(0.0, cfg.vqc_init_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let vqc = (0..n).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self {
            chi_mpo: cfg.chi_mpo,
            mpo: mpo.to_flat(),
            vqc,
        })
    }

    pub fn operator(&self) -> Result<MpoOperator> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut op = MpoOperator::noisy_identity(self.chi_mpo, 0.0, &mut rng)?;
        op.set_flat(&self.mpo)?;
        Ok(op)
    }

    /// FNV-1a over the bit patterns of all parameters.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.mpo.iter().chain(&self.vqc) {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Supervision for one sample in the units the circuit produces.
#[derive(Clone, Debug, PartialEq)]
pub enum Supervision {
    /// One-hot `[stable, unstable]`.
    Class([f64; 2]),
    /// Scaled targets.
    Values(Vec<f64>),
}

/// Everything needed to run the model forward.
pub struct Forward<'a> {
    pub cfg: &'a ExperimentConfig,
    pub plan: CircuitPlan,
}

pub struct BatchGrad {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Unscaled loss of each sample, in batch order.
    pub sample_losses: Vec<f64>,
    pub grad_mpo: Vec<f64>,
    pub grad_vqc: Vec<f64>,
}

impl<'a> Forward<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            plan: cfg.circuit_plan()?,
        })
    }

    fn vqc_tensor(&self, vqc: &[f64]) -> Result<Tensor> {
        Tensor::real(&[vqc.len()], &["p"], vqc.to_vec())
    }

    /// Circuit readout for one sample (index `out`).
    fn sample_output(
        &self,
        prep: &PreparedSample,
        mpo: &MpoOperator,
        gates: &CircuitGates,
    ) -> Result<Tensor> {
        let enc = encode(prep, mpo, &self.cfg.encoding)?;
        let input = match self.cfg.k_mpd {
            Some(k) => compile_mpd(&enc.state, k)?.prepared,
            None => enc.state,
        };
        let norm = norm_gate(enc.angle_raw, &enc.angle_mps)?;
        self.plan
            .readout
            .evaluate(&run_circuit(&input, &norm, gates)?)
    }

    fn sample_loss(&self, out: &Tensor, sup: &Supervision) -> Result<Tensor> {
        match sup {
            Supervision::Class(y) => cross_entropy(out, &Tensor::real(&[2], &["out"], y.to_vec())?),
            Supervision::Values(t) => {
                let target = Tensor::real(&[t.len()], &["out"], t.clone())?;
                let l = huber_loss(out, &target, self.cfg.huber_delta)?;
                mul_scalar(&l, &Tensor::scalar(1.0 / t.len() as f64))
            }
        }
    }

    /// Untracked outputs for each listed sample.
    pub fn predict(
        &self,
        params: &ModelParams,
        samples: &[&PreparedSample],
        mode: ExecMode,
    ) -> Result<Vec<Vec<f64>>> {
        let mpo = params.operator()?;
        let gates = self.plan.build_gates(&self.vqc_tensor(&params.vqc)?)?;
        map_indexed(mode, samples.len(), |i| {
            let out = self.sample_output(samples[i], &mpo, &gates)?;
            let v = out.real_data();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalFailure("non-finite circuit output".into()));
            }
            Ok(v)
        })
        .into_iter()
        .collect()
    }

    /// Mean loss over the batch and its gradient with respect to every
    /// parameter. Gates are built once on their own tape; each sample runs
    /// on a private tape and the summed gate cotangents are pulled back
    /// through the gate construction at the end.
    pub fn batch_grad(
        &self,
        params: &ModelParams,
        batch: &[(&PreparedSample, &Supervision)],
        mode: ExecMode,
    ) -> Result<BatchGrad> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mpo = params.operator()?;
        let gate_tape = Tape::new();
        let p = gate_tape.param(&self.vqc_tensor(&params.vqc)?);
        let gates = self.plan.build_gates(&p)?;

        struct SampleGrad {
            loss: f64,
            mpo: Vec<f64>,
            gates: Vec<Vec<C64>>,
        }
        let per = map_indexed(mode, batch.len(), |i| -> Result<SampleGrad> {
            let (prep, sup) = batch[i];
            let tape = Tape::new();
            let m = mpo.register(&tape);
            let g = gates.register(&tape);
            let out = self.sample_output(prep, &m, &g)?;
            let loss = self.sample_loss(&out, sup)?;
            let grads = tape.backward(&mul_scalar(&loss, &Tensor::scalar(scale))?)?;
            let mut mg = Vec::with_capacity(mpo.n_params());
            for c in m.cores() {
                mg.extend(grads.real_wrt(c)?);
            }
            let gg = g
                .gates
                .iter()
                .map(|(t, _)| Ok(grads.wrt(t)?.data().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(SampleGrad {
                loss: loss.item(),
                mpo: mg,
                gates: gg,
            })
        });

        let mut loss = 0.0;
        let mut sample_losses = Vec::with_capacity(batch.len());
        let mut grad_mpo = vec![0.0; mpo.n_params()];
        let mut gate_sum: Vec<Vec<C64>> = gates
            .gates
            .iter()
            .map(|(t, _)| vec![C64::new(0.0, 0.0); t.len()])
            .collect();
        for r in per {
            let r = r?;
            loss += r.loss * scale;
            sample_losses.push(r.loss);
            grad_mpo.iter_mut().zip(&r.mpo).for_each(|(a, b)| *a += b);
            for (acc, g) in gate_sum.iter_mut().zip(&r.gates) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
        let seeds: Vec<(&Tensor, &[C64])> = gates
            .gates
            .iter()
            .zip(&gate_sum)
            .map(|((t, _), g)| (t, g.as_slice()))
            .collect();
        let grad_vqc = gate_tape.backward_with_seeds(&seeds)?.real_wrt(&p)?;
        Ok(BatchGrad {
            loss,
            sample_losses,
            grad_mpo,
            grad_vqc,
        })
    }
}
