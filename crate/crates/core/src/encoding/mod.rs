//! Time series → quantum state encoding.
//!
//! The three response rows are normalised as one group, upsampled from 201
//! to 243 points, tensorised into six extent-3 indices and decomposed into a
//! 6-site MPS. A trainable MPO maps that to an 8-site, dimension-2 MPS which
//! is squashed with tanh and normalised. The two norms (raw series and
//! post-MPO) are turned into rotation angles.

pub mod mpo;
pub mod mps;
mod spline;

use std::f64::consts::{FRAC_PI_2, LN_10};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{map_real, SvdSpec, Tensor};

pub use mpo::{mpo_apply, nonlinear_normalize, MpoOperator, Normalized};
pub use mps::MpsState;
pub use spline::smoothing_spline_resample;

/// Number of upsampled time points (3⁵).
pub const UPSAMPLED: usize = 243;
pub const SERIES: usize = 3;
pub const TIME_DIGITS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    /// Smoothing weight of the spline; 0 interpolates.
    pub spline_lambda: f64,
    /// Slope of the norm → angle map.
    pub angle_alpha: f64,
    /// Bond cap after applying the MPO.
    pub chi_out: usize,
    /// Bond cap for the 6-site decomposition.
    pub mps6_max_bond: usize,
    /// Relative singular value cutoff for the 6-site decomposition.
    pub mps6_cutoff: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            spline_lambda: 0.0,
            angle_alpha: 0.25,
            chi_out: 16,
            mps6_max_bond: 27,
            mps6_cutoff: 1e-10,
        }
    }
}

/// Divides all three rows by the norm of their concatenation.
pub fn group_normalize(series: &[Vec<f64>; 3]) -> Result<([Vec<f64>; 3], f64)> {
    let nu = series
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::DegenerateInput(format!("series norm is {nu}")));
    }
    let out = std::array::from_fn(|i| series[i].iter().map(|x| x / nu).collect());
    Ok((out, nu))
}

/// `(π/2)(1 + tanh(α·log10 ν))`, a monotone map of `(0, ∞)` onto `(0, π)`.
pub fn norm_to_angle(nu: f64, alpha: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "norm must be positive, got {nu}"
        )));
    }
    Ok(FRAC_PI_2 * (1.0 + (alpha * nu.log10()).tanh()))
}

/// Differentiable [`norm_to_angle`] for a rank-0 tensor.
pub fn norm_to_angle_tensor(nu: &Tensor, alpha: f64) -> Result<Tensor> {
    if !(nu.item() > 0.0) {
        return Err(Error::DegenerateInput("norm must be positive".into()));
    }
    map_real(
        nu,
        move |x| FRAC_PI_2 * (1.0 + (alpha * x.log10()).tanh()),
        move |x| {
            let t = (alpha * x.log10()).tanh();
            FRAC_PI_2 * (1.0 - t * t) * alpha / (x * LN_10)
        },
    )
}

/// Cubic smoothing spline through a row, resampled to 243 points over the
/// same time span.
pub fn upsample_bspline(row: &[f64], lambda: f64) -> Vec<f64> {
    smoothing_spline_resample(row, lambda, UPSAMPLED)
}

fn index_names() -> Vec<String> {
    (0..=TIME_DIGITS).map(mps::phys).collect()
}

/// `[3, 3, 3, 3, 3, 3]` tensor with indices `q0 … q5`: the time index in
/// big-endian base-3 digits on `q0 … q4`, the series selector on `q5`.
pub fn tensorize(up: &[Vec<f64>; 3]) -> Result<Tensor> {
    if up.iter().any(|r| r.len() != UPSAMPLED) {
        return shape_err(format!("tensorize expects 3 × {UPSAMPLED} values"));
    }
    let mut data = Vec::with_capacity(UPSAMPLED * SERIES);
    for t in 0..UPSAMPLED {
        for row in up {
            data.push(row[t]);
        }
    }
    let names = index_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Tensor::real(&[3; 6], &refs, data)
}

pub fn detensorize(t: &Tensor) -> Result<[Vec<f64>; 3]> {
    let names = index_names();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let t = t.permute(&refs)?;
    if t.shape() != [3; 6] {
        return shape_err("detensorize expects six extent-3 indices");
    }
    let d = t.real_data();
    Ok(std::array::from_fn(|s| {
        (0..UPSAMPLED).map(|i| d[i * SERIES + s]).collect()
    }))
}

/// Left-to-right SVD decomposition into six sites with bonds ≤ `max_bond`.
pub fn mps_decompose(t: &Tensor, max_bond: usize, cutoff: f64) -> Result<MpsState> {
    let (mps, _) = MpsState::from_dense(
        t,
        TIME_DIGITS + 1,
        SvdSpec {
            max_rank: max_bond,
            rel_cutoff: cutoff,
        },
    )?;
    Ok(mps)
}

/// Parameter-independent part of the encoding, computed once per sample.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub mps6: MpsState,
    pub nu_raw: f64,
    pub angle_raw: f64,
}

pub fn prepare_sample(series: &[Vec<f64>; 3], cfg: &EncodingConfig) -> Result<PreparedSample> {
    let (normed, nu_raw) = group_normalize(series)?;
    let up: [Vec<f64>; 3] =
        std::array::from_fn(|i| upsample_bspline(&normed[i], cfg.spline_lambda));
    let t = tensorize(&up)?;
    let mps6 = mps_decompose(&t, cfg.mps6_max_bond, cfg.mps6_cutoff)?;
    Ok(PreparedSample {
        mps6,
        nu_raw,
        angle_raw: norm_to_angle(nu_raw, cfg.angle_alpha)?,
    })
}

/// Encoded sample ready for the circuit.
pub struct EncodedSample {
    pub mps8: MpsState,
    /// Dense unit state with indices `q0 … q7`.
    pub state: Tensor,
    pub angle_raw: f64,
    pub angle_mps: Tensor,
    pub nu_mps: Tensor,
}

/// Trainable part of the encoding. Pass an MPO registered on a tape to get
/// gradients with respect to its cores.
pub fn encode(
    prep: &PreparedSample,
    mpo: &MpoOperator,
    cfg: &EncodingConfig,
) -> Result<EncodedSample> {
    let mps8 = mpo_apply(mpo, &prep.mps6, cfg.chi_out)?;
    let n = nonlinear_normalize(&mps8, cfg.angle_alpha)?;
    Ok(EncodedSample {
        mps8: n.mps,
        state: n.state,
        angle_raw: prep.angle_raw,
        angle_mps: n.angle,
        nu_mps: n.nu,
    })
}
