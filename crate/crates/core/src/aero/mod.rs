//! Three-degree-of-freedom typical section (heave `h`, pitch `θ`, flap `β`).
//!
//! The structural model is the classical undamped typical section. The
//! aerodynamic loads come from a quasi-steady flat-plate surrogate built on
//! Theodorsen's flap coefficients `T_i` (NACA Report 496) with `C(k) = 1`:
//! the circulatory lift acts through the effective angle
//! `θ + (T10/π)·β + ḣ/U`, and the noncirculatory (apparent mass) terms are
//! omitted. Pitch-rate and flap-rate downwash are dropped as well; keeping
//! them makes the section spuriously unstable near zero airspeed once the
//! lag of `C(k)` is removed.

mod dataset;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use dataset::{
    export_jsonl, generate_dataset, read_dataset, write_dataset, Axis, Dataset, DatasetHeader,
    GridSpec, DATASET_VERSION,
};

/// Eigenvalues with real part at or below this are labelled stable (1/s).
pub const STABILITY_TOL: f64 = 1e-9;
/// Magnitude at which integrated states are clamped.
pub const CLAMP: f64 = 1e300;
/// RK4 steps taken per output interval.
pub const RK4_SUBSTEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    pub l_ref: f64,
    pub omega_h: f64,
    pub omega_theta: f64,
    pub omega_beta: f64,
    pub x_theta: f64,
    pub x_beta: f64,
    /// Pitch radius of gyration (so `r_theta² = 0.25` by default).
    pub r_theta: f64,
    pub r_beta: f64,
    /// Hinge position in semichords from midchord.
    pub c: f64,
}

impl Default for StructuralConstants {
    fn default() -> Self {
        Self {
            l_ref: 0.5,
            omega_h: 50.0,
            omega_theta: 100.0,
            omega_beta: 300.0,
            x_theta: 0.2,
            x_beta: 0.0125,
            r_theta: 0.25f64.sqrt(),
            r_beta: 0.00625f64.sqrt(),
            c: 0.5,
        }
    }
}

impl StructuralConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_ref", self.l_ref),
            ("omega_h", self.omega_h),
            ("omega_theta", self.omega_theta),
            ("omega_beta", self.omega_beta),
            ("r_theta", self.r_theta),
            ("r_beta", self.r_beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("x_theta", self.x_theta),
            ("x_beta", self.x_beta),
            ("c", self.c),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.c.abs() >= 1.0 {
            return Err(Error::Config(
                "hinge position c must lie inside the chord".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    /// Elastic axis position in semichords from midchord.
    pub a: f64,
    pub mu: f64,
    /// Free-stream airspeed (m/s).
    pub u_inf: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable = 0,
    Unstable = 1,
}

impl Label {
    pub fn from_u8(x: u8) -> Result<Label> {
        match x {
            0 => Ok(Label::Stable),
            1 => Ok(Label::Unstable),
            _ => Err(Error::Format(format!("bad label byte {x}"))),
        }
    }

    pub fn is_unstable(self) -> bool {
        self == Label::Unstable
    }
}

#[derive(Clone, Debug)]
pub struct AeroelasticSystem {
    pub a_matrix: DMatrix<f64>,
    pub c_matrix: DMatrix<f64>,
    pub meta: SweepParams,
}

/// One grid point with its response.
#[derive(Clone, Debug, PartialEq)]
pub struct AeroSample {
    pub params: SweepParams,
    /// Rows `h/L_ref`, `θ`, `β`.
    pub series: [Vec<f64>; 3],
    pub label: Label,
    pub max_re_eig: f64,
    /// Set when the integration hit the clamp.
    pub clamped: bool,
}

/// Mass and stiffness matrices of the undamped section.
pub fn build_structural_system(
    consts: &StructuralConstants,
    a: f64,
) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let k = consts;
    let rt2 = k.r_theta * k.r_theta;
    let rb2 = k.r_beta * k.r_beta;
    let off = rb2 + k.x_beta * (k.c - a);
    let mass = Matrix3::new(
        1.0, k.x_theta, k.x_beta, //
        k.x_theta, rt2, off, //
        k.x_beta, off, rb2,
    );
    if mass.cholesky().is_none() {
        return Err(Error::DegenerateStructure(format!(
            "mass matrix is not positive definite at a = {a}"
        )));
    }
    let stiffness = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        k.omega_h * k.omega_h,
        rt2 * k.omega_theta * k.omega_theta,
        rb2 * k.omega_beta * k.omega_beta,
    ));
    Ok((mass, stiffness))
}

/// Theodorsen flap functions `T1 … T12` (only those used here).
struct FlapFunctions {
    t4: f64,
    t5: f64,
    t10: f64,
    t12: f64,
}

fn flap_functions(c: f64) -> FlapFunctions {
    let s = (1.0 - c * c).sqrt();
    let ac = c.acos();
    FlapFunctions {
        t4: -ac + c * s,
        t5: -(1.0 - c * c) - ac * ac + 2.0 * c * s * ac,
        t10: s + ac,
        t12: s * (2.0 + c) - ac * (2.0 * c + 1.0),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuasiSteadyAero {
    pub stiffness: Matrix3<f64>,
    pub damping: Matrix3<f64>,
    pub n_lag: usize,
}

/// Generalised-force coefficients of the surrogate.
///
/// The right-hand side of the equations of motion is
/// `(1/(πμ))(U/L)² · (stiffness·u_h + (L/U)·damping·u̇_h)`. Both matrices
/// depend on `a` and the hinge position only.
pub fn build_quasisteady_aero(
    consts: &StructuralConstants,
    params: &SweepParams,
) -> QuasiSteadyAero {
    let a = params.a;
    let t = flap_functions(consts.c);
    // effective angle and its rate part, in (h/b, θ, β) coordinates
    let qk = [0.0, 1.0, t.t10 / PI];
    let qd = [1.0, 0.0, 0.0];

    let mut stiffness = Matrix3::zeros();
    let mut damping = Matrix3::zeros();
    for j in 0..3 {
        let cl_k = 2.0 * PI * qk[j];
        let cl_d = 2.0 * PI * qd[j];
        let mut cm_k = PI * (a + 0.5) * qk[j];
        let cm_d = PI * (a + 0.5) * qd[j];
        let mut cb_k = -(t.t12 / 2.0) * qk[j];
        let cb_d = -(t.t12 / 2.0) * qd[j];
        if j == 2 {
            cm_k += (PI / 2.0) * (-(t.t4 + t.t10) / PI);
            cb_k += (PI / 2.0) * (-(t.t5 - t.t4 * t.t10) / (PI * PI));
        }
        stiffness[(0, j)] = -cl_k;
        stiffness[(1, j)] = 2.0 * cm_k;
        stiffness[(2, j)] = 2.0 * cb_k;
        damping[(0, j)] = -cl_d;
        damping[(1, j)] = 2.0 * cm_d;
        damping[(2, j)] = 2.0 * cb_d;
    }
    QuasiSteadyAero {
        stiffness,
        damping,
        n_lag: 0,
    }
}

/// First-order form `ẋ = A x` with `x = [u_h; u̇_h]` and `u_h = C x`.
pub fn assemble_system(
    consts: &StructuralConstants,
    params: &SweepParams,
) -> Result<AeroelasticSystem> {
    if !(params.mu > 0.0) {
        return Err(Error::Config(format!(
            "mass ratio must be positive, got {}",
            params.mu
        )));
    }
    if !(params.u_inf >= 0.0) {
        return Err(Error::Config(format!(
            "airspeed must be non-negative, got {}",
            params.u_inf
        )));
    }
    let (mass, ks) = build_structural_system(consts, params.a)?;
    let mass_inv = mass
        .try_inverse()
        .ok_or_else(|| Error::DegenerateStructure("singular mass matrix".into()))?;
    let aero = build_quasisteady_aero(consts, params);
    let ratio = params.u_inf / consts.l_ref;
    let q_stiff = ratio * ratio / (PI * params.mu);
    let q_damp = ratio / (PI * params.mu);

    let lower_left = mass_inv * (aero.stiffness * q_stiff - ks);
    let lower_right = mass_inv * (aero.damping * q_damp);
    let n = 6 + aero.n_lag;
    let mut a_matrix = DMatrix::zeros(n, n);
    for i in 0..3 {
        a_matrix[(i, i + 3)] = 1.0;
        for j in 0..3 {
            a_matrix[(i + 3, j)] = lower_left[(i, j)];
            a_matrix[(i + 3, j + 3)] = lower_right[(i, j)];
        }
    }
    let mut c_matrix = DMatrix::zeros(3, n);
    for i in 0..3 {
        c_matrix[(i, i)] = 1.0;
    }
    Ok(AeroelasticSystem {
        a_matrix,
        c_matrix,
        meta: *params,
    })
}

/// Largest real part over the spectrum of `A` and the resulting label.
pub fn stability_label(system: &AeroelasticSystem) -> Result<(Label, f64)> {
    max_real_eigenvalue(&system.a_matrix).map(|r| {
        let label = if r <= STABILITY_TOL {
            Label::Stable
        } else {
            Label::Unstable
        };
        (label, r)
    })
}

pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(
            "system matrix is not finite".into(),
        ));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("eigenvalue iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug)]
pub struct Response {
    pub series: [Vec<f64>; 3],
    pub clamped: bool,
}

/// Integrates from `x(0) = [1, 0, …]` and samples `u_h` at `n_samples`
/// uniform times on `[0, t_final]`.
pub fn simulate_response(
    system: &AeroelasticSystem,
    t_final: f64,
    n_samples: usize,
) -> Result<Response> {
    simulate_response_with(system, t_final, n_samples, RK4_SUBSTEPS)
}

/// As [`simulate_response`] with an explicit number of RK4 steps per output
/// interval.
pub fn simulate_response_with(
    system: &AeroelasticSystem,
    t_final: f64,
    n_samples: usize,
    substeps: usize,
) -> Result<Response> {
    if !(t_final > 0.0) || n_samples < 2 || substeps == 0 {
        return Err(Error::Config(
            "need t_final > 0, n_samples >= 2 and at least one RK4 step".into(),
        ));
    }
    let a = &system.a_matrix;
    let c = &system.c_matrix;
    let n = a.nrows();
    let h = t_final / ((n_samples - 1) * substeps) as f64;
    let mut x = nalgebra::DVector::zeros(n);
    x[0] = 1.0;
    let mut series: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n_samples));
    let mut clamped = false;
    let emit = |x: &nalgebra::DVector<f64>, series: &mut [Vec<f64>; 3]| {
        let y = c * x;
        for (row, v) in series.iter_mut().zip(y.iter()) {
            row.push(*v);
        }
    };
    emit(&x, &mut series);
    for _ in 1..n_samples {
        for _ in 0..substeps {
            let k1 = a * &x;
            let k2 = a * (&x + &k1 * (h / 2.0));
            let k3 = a * (&x + &k2 * (h / 2.0));
            let k4 = a * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            for v in x.iter_mut() {
                if !v.is_finite() || v.abs() > CLAMP {
                    *v = if v.is_nan() || *v > 0.0 {
                        CLAMP
                    } else {
                        -CLAMP
                    };
                    clamped = true;
                }
            }
        }
        emit(&x, &mut series);
    }
    Ok(Response { series, clamped })
}

/// Assembles, labels and integrates one grid point.
pub fn simulate_sample(
    consts: &StructuralConstants,
    params: SweepParams,
    t_final: f64,
    n_samples: usize,
) -> Result<AeroSample> {
    let system = assemble_system(consts, &params)?;
    let (label, max_re_eig) = stability_label(&system)?;
    let resp = simulate_response(&system, t_final, n_samples)?;
    Ok(AeroSample {
        params,
        series: resp.series,
        label,
        max_re_eig,
        clamped: resp.clamped,
    })
}
