use super::{owned, record, Kind, Tensor, C64};
use crate::error::{shape_err, Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Row-major product of an `m×k` and a `k×n` matrix.
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![ZERO; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in row.iter_mut().zip(brow) {
                *cj += x * bj;
            }
        }
    }
    c
}

/// `Aᴴ` of a row-major `m×n` matrix, returned as `n×m`.
pub(crate) fn adjoint(a: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j].conj();
        }
    }
    out
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Output axis `i` takes source axis `perm[i]`.
pub(crate) fn permute_data(data: &[C64], shape: &[usize], perm: &[usize]) -> Vec<C64> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let src_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let rank = shape.len();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..data.len() {
        out.push(data[offset]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            offset += step[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= step[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub(crate) fn permute_axes(t: &Tensor, perm: &[usize]) -> Result<Tensor> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(t.clone());
    }
    let shape: Vec<usize> = perm.iter().map(|&p| t.shape[p]).collect();
    let names: Vec<String> = perm.iter().map(|&p| t.names[p].clone()).collect();
    let data = permute_data(&t.data, &t.shape, perm);
    let inv = inverse_perm(perm);
    let out_shape = shape.clone();
    record(&[t], shape, names, data, t.kind, move |g| {
        vec![Some(permute_data(g, &out_shape, &inv))]
    })
}

/// Sums over every index name shared by `lhs` and `rhs`. The result carries
/// the free indices of `lhs` (in order) followed by those of `rhs`.
pub fn contract(lhs: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    let shared: Vec<&str> = lhs
        .names
        .iter()
        .filter(|n| rhs.names.contains(n))
        .map(|s| s.as_str())
        .collect();
    for s in &shared {
        if lhs.extent(s)? != rhs.extent(s)? {
            return Err(Error::Shape(format!(
                "index {s:?} has extent {} vs {}",
                lhs.extent(s)?,
                rhs.extent(s)?
            )));
        }
    }
    let a_free: Vec<&str> = lhs
        .names
        .iter()
        .map(|s| s.as_str())
        .filter(|n| !shared.contains(n))
        .collect();
    let b_free: Vec<&str> = rhs
        .names
        .iter()
        .map(|s| s.as_str())
        .filter(|n| !shared.contains(n))
        .collect();

    let a_order: Vec<&str> = a_free.iter().chain(shared.iter()).copied().collect();
    let b_order: Vec<&str> = shared.iter().chain(b_free.iter()).copied().collect();
    let a = lhs.permute(&a_order)?;
    let b = rhs.permute(&b_order)?;

    let m: usize = a_free.iter().map(|n| lhs.extent(n).unwrap()).product();
    let k: usize = shared.iter().map(|n| lhs.extent(n).unwrap()).product();
    let n: usize = b_free.iter().map(|n| rhs.extent(n).unwrap()).product();

    let data = matmul(&a.data, &b.data, m, k, n);
    let mut shape: Vec<usize> = a_free.iter().map(|x| lhs.extent(x).unwrap()).collect();
    shape.extend(b_free.iter().map(|x| rhs.extent(x).unwrap()));
    let mut names = owned(&a_free);
    names.extend(owned(&b_free));

    let a_data = a.data.clone();
    let b_data = b.data.clone();
    let need_a = a.is_tracked();
    let need_b = b.is_tracked();
    record(
        &[&a, &b],
        shape,
        names,
        data,
        lhs.kind.join(rhs.kind),
        move |g| {
            // G_A = G_C · B^H, G_B = A^H · G_C
            let ga = need_a.then(|| matmul(g, &adjoint(&b_data, k, n), m, n, k));
            let gb = need_b.then(|| matmul(&adjoint(&a_data, m, k), g, k, m, n));
            vec![ga, gb]
        },
    )
}

/// Index reshaping plans. Data order is never changed: a merged index
/// enumerates its parts in big-endian order, and a split is the inverse.
#[derive(Clone, Debug)]
pub enum ReshapePlan {
    Split {
        name: String,
        into: Vec<(String, usize)>,
    },
    Merge {
        names: Vec<String>,
        into: String,
    },
}

impl ReshapePlan {
    pub fn split(name: &str, into: &[(&str, usize)]) -> Self {
        ReshapePlan::Split {
            name: name.to_string(),
            into: into.iter().map(|(n, e)| (n.to_string(), *e)).collect(),
        }
    }

    pub fn merge(names: &[&str], into: &str) -> Self {
        ReshapePlan::Merge {
            names: owned(names),
            into: into.to_string(),
        }
    }
}

fn reshape_raw(t: &Tensor, shape: Vec<usize>, names: Vec<String>) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    if n != t.len() {
        return shape_err(format!(
            "reshape to {shape:?} needs {n} entries, tensor has {}",
            t.len()
        ));
    }
    record(&[t], shape, names, t.data.to_vec(), t.kind, |g| {
        vec![Some(g.to_vec())]
    })
}

pub fn reshape_split(t: &Tensor, plan: &ReshapePlan) -> Result<Tensor> {
    match plan {
        ReshapePlan::Split { name, into } => {
            let ax = t.axis(name)?;
            let prod: usize = into.iter().map(|(_, e)| e).product();
            if prod != t.shape[ax] {
                return shape_err(format!(
                    "cannot split extent {} into {:?}",
                    t.shape[ax], into
                ));
            }
            let mut shape = t.shape[..ax].to_vec();
            let mut names = t.names[..ax].to_vec();
            for (n, e) in into {
                shape.push(*e);
                names.push(n.clone());
            }
            shape.extend_from_slice(&t.shape[ax + 1..]);
            names.extend_from_slice(&t.names[ax + 1..]);
            reshape_raw(t, shape, names)
        }
        ReshapePlan::Merge {
            names: merged,
            into,
        } => {
            if merged.is_empty() {
                return shape_err("merge of zero indices");
            }
            let first = t.axis(&merged[0])?;
            let mut order: Vec<&str> = Vec::new();
            for (i, n) in t.names.iter().enumerate() {
                if merged.contains(n) {
                    if i == first {
                        order.extend(merged.iter().map(|s| s.as_str()));
                    }
                } else {
                    order.push(n);
                }
            }
            for m in merged {
                t.axis(m)?;
            }
            let p = t.permute(&order)?;
            let ext: usize = merged.iter().map(|m| t.extent(m).unwrap()).product();
            let mut shape = Vec::new();
            let mut names = Vec::new();
            let mut i = 0;
            while i < p.rank() {
                if p.names[i] == merged[0] {
                    shape.push(ext);
                    names.push(into.clone());
                    i += merged.len();
                } else {
                    shape.push(p.shape[i]);
                    names.push(p.names[i].clone());
                    i += 1;
                }
            }
            reshape_raw(&p, shape, names)
        }
    }
}

fn align(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut names_b: Vec<&str> = b.name_refs();
    names_b.sort_unstable();
    let mut names_a: Vec<&str> = a.name_refs();
    names_a.sort_unstable();
    if names_a != names_b {
        return shape_err(format!("index sets differ: {:?} vs {:?}", a.names, b.names));
    }
    let p = b.permute(&a.name_refs())?;
    if p.shape != a.shape {
        return shape_err("extents differ");
    }
    Ok(p)
}

fn combine(a: &Tensor, b: &Tensor, sign: f64) -> Result<Tensor> {
    let b = align(a, b)?;
    let data = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| x + y * sign)
        .collect();
    record(
        &[a, &b],
        a.shape.clone(),
        a.names.clone(),
        data,
        a.kind.join(b.kind),
        move |g| vec![Some(g.to_vec()), Some(g.iter().map(|z| z * sign).collect())],
    )
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    combine(a, b, 1.0)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    combine(a, b, -1.0)
}

/// Multiplies by a constant.
pub fn scale(t: &Tensor, c: C64) -> Result<Tensor> {
    let data = t.data.iter().map(|z| z * c).collect();
    let kind = if c.im == 0.0 { t.kind } else { Kind::Complex };
    record(
        &[t],
        t.shape.clone(),
        t.names.clone(),
        data,
        kind,
        move |g| vec![Some(g.iter().map(|z| z * c.conj()).collect())],
    )
}

/// Multiplies every entry of `t` by the rank-0 tensor `s`.
pub fn mul_scalar(t: &Tensor, s: &Tensor) -> Result<Tensor> {
    if s.rank() != 0 {
        return shape_err("mul_scalar expects a rank-0 multiplier");
    }
    let c = s.data[0];
    let data = t.data.iter().map(|z| z * c).collect();
    let t_data = t.data.clone();
    record(
        &[t, s],
        t.shape.clone(),
        t.names.clone(),
        data,
        t.kind.join(s.kind),
        move |g| {
            let gt = g.iter().map(|z| z * c.conj()).collect();
            let gs: C64 = t_data.iter().zip(g).map(|(x, y)| x.conj() * y).sum();
            vec![Some(gt), Some(vec![gs])]
        },
    )
}

/// Multiplies `t` entrywise by the rank-1 tensor `v` along the shared index.
pub fn scale_axis(t: &Tensor, v: &Tensor) -> Result<Tensor> {
    if v.rank() != 1 {
        return shape_err("scale_axis expects a rank-1 multiplier");
    }
    let ax = t.axis(&v.names[0])?;
    let ext = t.shape[ax];
    if ext != v.shape[0] {
        return shape_err(format!(
            "scale_axis: extent {} vs {} on {:?}",
            ext, v.shape[0], v.names[0]
        ));
    }
    let inner: usize = t.shape[ax + 1..].iter().product();
    let pos = move |flat: usize| (flat / inner) % ext;
    let vd = v.data.clone();
    let td = t.data.clone();
    let data = t
        .data
        .iter()
        .enumerate()
        .map(|(i, z)| z * vd[pos(i)])
        .collect();
    record(
        &[t, v],
        t.shape.clone(),
        t.names.clone(),
        data,
        t.kind.join(v.kind),
        move |g| {
            let gt = g
                .iter()
                .enumerate()
                .map(|(i, z)| z * vd[pos(i)].conj())
                .collect();
            let mut gv = vec![ZERO; ext];
            for (i, (x, gi)) in td.iter().zip(g).enumerate() {
                gv[pos(i)] += x.conj() * gi;
            }
            vec![Some(gt), Some(gv)]
        },
    )
}

pub fn conj(t: &Tensor) -> Result<Tensor> {
    let data = t.data.iter().map(|z| z.conj()).collect();
    record(&[t], t.shape.clone(), t.names.clone(), data, t.kind, |g| {
        vec![Some(g.iter().map(|z| z.conj()).collect())]
    })
}

pub fn real_part(t: &Tensor) -> Result<Tensor> {
    let data = t.data.iter().map(|z| C64::new(z.re, 0.0)).collect();
    record(
        &[t],
        t.shape.clone(),
        t.names.clone(),
        data,
        Kind::Real,
        |g| vec![Some(g.iter().map(|z| C64::new(z.re, 0.0)).collect())],
    )
}

/// Entrywise `|z|²`, real-valued.
pub fn abs2(t: &Tensor) -> Result<Tensor> {
    let data = t.data.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
    let src = t.data.clone();
    record(
        &[t],
        t.shape.clone(),
        t.names.clone(),
        data,
        Kind::Real,
        move |g| {
            vec![Some(
                src.iter().zip(g).map(|(z, gi)| z * (2.0 * gi.re)).collect(),
            )]
        },
    )
}

pub fn sum_all(t: &Tensor) -> Result<Tensor> {
    let s: C64 = t.data.iter().sum();
    let n = t.len();
    record(&[t], vec![], vec![], vec![s], t.kind, move |g| {
        vec![Some(vec![g[0]; n])]
    })
}

/// Sums out the named indices; remaining indices keep their order.
pub fn sum_over(t: &Tensor, names: &[&str]) -> Result<Tensor> {
    let keep: Vec<&str> = t
        .name_refs()
        .into_iter()
        .filter(|n| !names.contains(n))
        .collect();
    for n in names {
        t.axis(n)?;
    }
    let order: Vec<&str> = keep.iter().chain(names.iter()).copied().collect();
    let p = t.permute(&order)?;
    let inner: usize = names.iter().map(|n| t.extent(n).unwrap()).product();
    let outer = t.len() / inner.max(1);
    let data: Vec<C64> = (0..outer)
        .map(|o| p.data[o * inner..(o + 1) * inner].iter().sum())
        .collect();
    let shape = keep.iter().map(|n| t.extent(n).unwrap()).collect();
    record(&[&p], shape, owned(&keep), data, t.kind, move |g| {
        let mut out = Vec::with_capacity(outer * inner);
        for gi in g {
            out.extend(std::iter::repeat_n(*gi, inner));
        }
        vec![Some(out)]
    })
}

/// Entrywise real function with a known derivative.
pub fn map_real<F, D>(t: &Tensor, f: F, df: D) -> Result<Tensor>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64 + Send + 'static,
{
    if t.kind != Kind::Real {
        return Err(Error::Type(
            "entrywise nonlinearity is defined on real tensors only".into(),
        ));
    }
    let data = t.data.iter().map(|z| C64::new(f(z.re), 0.0)).collect();
    let src = t.data.clone();
    record(
        &[t],
        t.shape.clone(),
        t.names.clone(),
        data,
        Kind::Real,
        move |g| {
            vec![Some(
                src.iter()
                    .zip(g)
                    .map(|(x, gi)| C64::new(gi.re * df(x.re), 0.0))
                    .collect(),
            )]
        },
    )
}

pub fn tanh(t: &Tensor) -> Result<Tensor> {
    map_real(t, f64::tanh, |x| {
        let y = x.tanh();
        1.0 - y * y
    })
}

/// Fixes index `name` at position `idx`, dropping that axis.
pub fn select(t: &Tensor, name: &str, idx: usize) -> Result<Tensor> {
    let ax = t.axis(name)?;
    let ext = t.shape[ax];
    if idx >= ext {
        return shape_err(format!("index {idx} out of range for {name:?} ({ext})"));
    }
    let outer: usize = t.shape[..ax].iter().product();
    let inner: usize = t.shape[ax + 1..].iter().product();
    let mut data = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        let base = (o * ext + idx) * inner;
        data.extend_from_slice(&t.data[base..base + inner]);
    }
    let mut shape = t.shape.clone();
    shape.remove(ax);
    let mut names = t.names.clone();
    names.remove(ax);
    let n = t.len();
    record(&[t], shape, names, data, t.kind, move |g| {
        let mut out = vec![ZERO; n];
        for o in 0..outer {
            let base = (o * ext + idx) * inner;
            out[base..base + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
        }
        vec![Some(out)]
    })
}

/// Stacks equally-indexed tensors along a new leading index `name`.
pub fn stack(ts: &[Tensor], name: &str) -> Result<Tensor> {
    let Some(first) = ts.first() else {
        return shape_err("stack of zero tensors");
    };
    if first.names.iter().any(|n| n == name) {
        return shape_err(format!("index {name:?} already present"));
    }
    let aligned = ts
        .iter()
        .map(|t| align(first, t))
        .collect::<Result<Vec<_>>>()?;
    let inner = first.len();
    let mut data = Vec::with_capacity(inner * ts.len());
    let mut kind = Kind::Real;
    for t in &aligned {
        data.extend_from_slice(&t.data);
        kind = kind.join(t.kind);
    }
    let mut shape = vec![ts.len()];
    shape.extend_from_slice(&first.shape);
    let mut names = vec![name.to_string()];
    names.extend(first.names.iter().cloned());
    let refs: Vec<&Tensor> = aligned.iter().collect();
    let count = ts.len();
    record(&refs, shape, names, data, kind, move |g| {
        (0..count)
            .map(|i| Some(g[i * inner..(i + 1) * inner].to_vec()))
            .collect()
    })
}

/// Zero-pads index `name` up to `extent` (new entries appended at the end).
pub fn pad(t: &Tensor, name: &str, extent: usize) -> Result<Tensor> {
    let ax = t.axis(name)?;
    let ext = t.shape[ax];
    if extent < ext {
        return shape_err("pad cannot shrink an index");
    }
    if extent == ext {
        return Ok(t.clone());
    }
    let outer: usize = t.shape[..ax].iter().product();
    let inner: usize = t.shape[ax + 1..].iter().product();
    let mut data = vec![ZERO; outer * extent * inner];
    for o in 0..outer {
        let src = o * ext * inner;
        let dst = o * extent * inner;
        data[dst..dst + ext * inner].copy_from_slice(&t.data[src..src + ext * inner]);
    }
    let mut shape = t.shape.clone();
    shape[ax] = extent;
    record(&[t], shape, t.names.clone(), data, t.kind, move |g| {
        let mut out = Vec::with_capacity(outer * ext * inner);
        for o in 0..outer {
            let src = o * extent * inner;
            out.extend_from_slice(&g[src..src + ext * inner]);
        }
        vec![Some(out)]
    })
}
