use nalgebra::DMatrix;

use super::ops::{adjoint, matmul};
use super::{owned, record, Kind, Tensor, C64};
use crate::error::{shape_err, Error, Result};

/// Broadening applied to `1/(σᵢ² − σⱼ²)` in the SVD backward pass, relative
/// to `σ_max²`. Sweeps over unnormalised states keep singular values many
/// orders below `σ_max`, so an absolute floor would swamp their differences.
pub const SVD_BROADENING: f64 = 1e-20;

#[derive(Clone, Copy, Debug)]
pub struct SvdSpec {
    pub max_rank: usize,
    /// Singular values at or below `rel_cutoff · σ_max` are always dropped.
    pub rel_cutoff: f64,
}

impl SvdSpec {
    pub fn rank(max_rank: usize) -> Self {
        Self {
            max_rank,
            rel_cutoff: 1e-13,
        }
    }
}

pub struct SvdOutput {
    /// Row indices followed by the new bond index.
    pub u: Tensor,
    /// Singular values (descending) on the bond index, real.
    pub s: Tensor,
    /// Column indices followed by the bond index (`V`, not `Vᵀ`).
    pub v: Tensor,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
}

/// Truncated SVD of a real tensor viewed as a `rows × cols` matrix.
///
/// Singular vectors use a fixed sign gauge: the largest-magnitude entry of
/// each left singular vector is positive. The backward pass differentiates
/// the full thin SVD with zero cotangents on the discarded triplets, so the
/// gradient is exact for the truncated factors whenever the kept singular
/// values are nonzero and separated from the rest.
pub fn svd_truncated(
    t: &Tensor,
    row_names: &[&str],
    col_names: &[&str],
    bond: &str,
    spec: SvdSpec,
) -> Result<SvdOutput> {
    if t.kind() != Kind::Real {
        return Err(Error::Type("svd_truncated expects a real tensor".into()));
    }
    if spec.max_rank == 0 {
        return Err(Error::Config("max_rank must be at least 1".into()));
    }
    if row_names.len() + col_names.len() != t.rank() {
        return shape_err("row and column names must cover every index");
    }
    let order: Vec<&str> = row_names.iter().chain(col_names).copied().collect();
    let p = t.permute(&order)?;
    let row_ext: Vec<usize> = row_names
        .iter()
        .map(|n| t.extent(n))
        .collect::<Result<_>>()?;
    let col_ext: Vec<usize> = col_names
        .iter()
        .map(|n| t.extent(n))
        .collect::<Result<_>>()?;
    let m: usize = row_ext.iter().product();
    let n: usize = col_ext.iter().product();
    let r = m.min(n);

    let data = p.data();
    let a = faer::Mat::<f64>::from_fn(m, n, |i, j| data[i * n + j].re);
    // nalgebra's bidiagonal SVD loses ~1e-9 of reconstruction accuracy on
    // exactly rank-deficient inputs, which the MPS sweeps hit constantly.
    let svd = a
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e:?}")))?;
    let (u_raw, v_raw) = (svd.U(), svd.V());
    let sv = svd.S().column_vector();

    // faer returns singular values in non-increasing order
    let mut u = vec![0.0; m * r];
    let mut v = vec![0.0; n * r];
    let mut s = vec![0.0; r];
    for col in 0..r {
        s[col] = sv[col].max(0.0);
        let mut pivot = 0.0f64;
        for i in 0..m {
            let x = u_raw[(i, col)];
            if x.abs() > pivot.abs() + 1e-14 {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            u[i * r + col] = sign * u_raw[(i, col)];
        }
        for j in 0..n {
            v[j * r + col] = sign * v_raw[(j, col)];
        }
    }

    let smax = s.first().copied().unwrap_or(0.0);
    let above = s
        .iter()
        .filter(|&&x| x > spec.rel_cutoff * smax)
        .count()
        .max(1);
    let k = spec.max_rank.min(above).min(r);
    let discarded_weight: f64 = s[k..].iter().map(|x| x * x).sum();

    let mut packed = Vec::with_capacity(m * k + k + n * k);
    for i in 0..m {
        packed.extend(u[i * r..i * r + k].iter().map(|&x| C64::new(x, 0.0)));
    }
    packed.extend(s[..k].iter().map(|&x| C64::new(x, 0.0)));
    for j in 0..n {
        packed.extend(v[j * r..j * r + k].iter().map(|&x| C64::new(x, 0.0)));
    }

    let packed_len = packed.len();
    let node = record(
        &[&p],
        vec![packed_len],
        vec!["__svd_packed".to_string()],
        packed,
        Kind::Real,
        move |g| vec![Some(svd_backward(g, &u, &s, &v, m, n, r, k))],
    )?;

    let mut u_shape = row_ext.clone();
    u_shape.push(k);
    let mut u_names = owned(row_names);
    u_names.push(bond.to_string());
    let mut v_shape = col_ext.clone();
    v_shape.push(k);
    let mut v_names = owned(col_names);
    v_names.push(bond.to_string());

    Ok(SvdOutput {
        u: slice_flat(&node, 0, u_shape, u_names)?,
        s: slice_flat(&node, m * k, vec![k], vec![bond.to_string()])?,
        v: slice_flat(&node, m * k + k, v_shape, v_names)?,
        discarded_weight,
    })
}

fn slice_flat(
    packed: &Tensor,
    offset: usize,
    shape: Vec<usize>,
    names: Vec<String>,
) -> Result<Tensor> {
    let len: usize = shape.iter().product();
    let total = packed.len();
    let data = packed.data()[offset..offset + len].to_vec();
    record(&[packed], shape, names, data, packed.kind(), move |g| {
        let mut out = vec![C64::new(0.0, 0.0); total];
        out[offset..offset + len].copy_from_slice(g);
        vec![Some(out)]
    })
}

#[allow(clippy::too_many_arguments)]
fn svd_backward(
    g: &[C64],
    u: &[f64],
    s: &[f64],
    v: &[f64],
    m: usize,
    n: usize,
    r: usize,
    k: usize,
) -> Vec<C64> {
    let mut gu = DMatrix::<f64>::zeros(m, r);
    let mut gv = DMatrix::<f64>::zeros(n, r);
    let mut gs = vec![0.0; r];
    for i in 0..m {
        for c in 0..k {
            gu[(i, c)] = g[i * k + c].re;
        }
    }
    for c in 0..k {
        gs[c] = g[m * k + c].re;
    }
    for j in 0..n {
        for c in 0..k {
            gv[(j, c)] = g[m * k + k + j * k + c].re;
        }
    }
    let um = DMatrix::from_row_slice(m, r, u);
    let vm = DMatrix::from_row_slice(n, r, v);

    let smax2 = s.first().map_or(0.0, |x| x * x);
    let eta = (SVD_BROADENING * smax2).powi(2);
    let f = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            0.0
        } else {
            let d = s[j] * s[j] - s[i] * s[i];
            if d == 0.0 {
                0.0
            } else {
                d / (d * d + eta)
            }
        }
    });
    let j_mat = um.transpose() * &gu;
    let k_mat = vm.transpose() * &gv;
    let jj = (&j_mat - j_mat.transpose()).component_mul(&f);
    let kk = (&k_mat - k_mat.transpose()).component_mul(&f);
    let s_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s));
    let mut inner = &jj * &s_diag + &s_diag * &kk;
    for i in 0..r {
        inner[(i, i)] += gs[i];
    }
    let mut ga = &um * inner * vm.transpose();

    let s_inv = DMatrix::from_fn(r, r, |i, j| {
        if i == j && s[i] > 0.0 {
            1.0 / s[i]
        } else {
            0.0
        }
    });
    if m > r {
        let proj_u = DMatrix::<f64>::identity(m, m) - &um * um.transpose();
        ga += proj_u * &gu * &s_inv * vm.transpose();
    }
    if n > r {
        let proj_v = DMatrix::<f64>::identity(n, n) - &vm * vm.transpose();
        ga += &um * &s_inv * gv.transpose() * proj_v;
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            out.push(C64::new(ga[(i, j)], 0.0));
        }
    }
    out
}

fn norm1(a: &[C64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaling-and-squaring Taylor exponential of a row-major `n×n` matrix.
pub(crate) fn expm_raw(a: &[C64], n: usize) -> Vec<C64> {
    let nrm = norm1(a, n);
    let squarings = if nrm > 0.25 {
        (nrm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled: Vec<C64> = a.iter().map(|z| z * scale).collect();
    let mut result = vec![C64::new(0.0, 0.0); n * n];
    let mut term = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        result[i * n + i] = C64::new(1.0, 0.0);
        term[i * n + i] = C64::new(1.0, 0.0);
    }
    for k in 1..=18 {
        term = matmul(&term, &scaled, n, n, n);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|z| *z *= inv);
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, n, n, n);
    }
    result
}

/// Matrix exponential of a rank-2 square tensor (first index = rows).
///
/// Backward uses the adjoint Fréchet derivative, read off the top-right block
/// of `exp([[Aᴴ, G], [0, Aᴴ]])`.
pub fn matrix_exp(m: &Tensor) -> Result<Tensor> {
    if m.rank() != 2 || m.shape()[0] != m.shape()[1] {
        return shape_err(format!(
            "matrix_exp needs a square matrix, got shape {:?}",
            m.shape()
        ));
    }
    let n = m.shape()[0];
    let data = expm_raw(m.data(), n);
    let a_h = adjoint(m.data(), n, n);
    record(
        &[m],
        m.shape().to_vec(),
        m.names().to_vec(),
        data,
        m.kind(),
        move |g| {
            let nn = 2 * n;
            let mut block = vec![C64::new(0.0, 0.0); nn * nn];
            for i in 0..n {
                for j in 0..n {
                    block[i * nn + j] = a_h[i * n + j];
                    block[(i + n) * nn + (j + n)] = a_h[i * n + j];
                    block[i * nn + (j + n)] = g[i * n + j];
                }
            }
            let e = expm_raw(&block, nn);
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push(e[i * nn + (j + n)]);
                }
            }
            vec![Some(out)]
        },
    )
}
