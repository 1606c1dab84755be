//! Open-boundary matrix product states.
//!
//! Site `i` carries the indices `b{i}` (left bond), `q{i}` (physical) and
//! `b{i+1}` (right bond), in that order. Boundary bonds have extent 1, so
//! neighbouring sites contract on their shared bond name directly.

use crate::error::{shape_err, Result};
use crate::tensor::{
    contract, reshape_split, scale_axis, select, svd_truncated, ReshapePlan, SvdSpec, Tensor,
};

const TMP: &str = "__bond";

pub fn bond(i: usize) -> String {
    format!("b{i}")
}

pub fn phys(i: usize) -> String {
    format!("q{i}")
}

#[derive(Clone, Debug)]
pub struct MpsState {
    sites: Vec<Tensor>,
}

impl MpsState {
    /// Validates names and bond extents; site indices may be in any order.
    pub fn new(sites: Vec<Tensor>) -> Result<Self> {
        if sites.is_empty() {
            return shape_err("an MPS needs at least one site");
        }
        let n = sites.len();
        let mut ordered = Vec::with_capacity(n);
        for (i, s) in sites.into_iter().enumerate() {
            let (l, p, r) = (bond(i), phys(i), bond(i + 1));
            if s.rank() != 3 {
                return shape_err(format!("site {i} has rank {}", s.rank()));
            }
            ordered.push(s.permute(&[&l, &p, &r])?);
        }
        if ordered[0].shape()[0] != 1 || ordered[n - 1].shape()[2] != 1 {
            return shape_err("boundary bonds must have extent 1");
        }
        for i in 1..n {
            if ordered[i - 1].shape()[2] != ordered[i].shape()[0] {
                return shape_err(format!("bond {i} extents disagree"));
            }
        }
        Ok(Self { sites: ordered })
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn into_sites(self) -> Vec<Tensor> {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `n + 1` bond extents including both boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.sites.iter().map(|s| s.shape()[2]));
        out
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.shape()[1]).collect()
    }

    /// Product state from one vector per site.
    pub fn product(vectors: &[Vec<f64>]) -> Result<Self> {
        let sites = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                Tensor::real(
                    &[1, v.len(), 1],
                    &[&bond(i), &phys(i), &bond(i + 1)],
                    v.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites)
    }

    /// Full contraction; indices `q0 … q{n-1}`.
    pub fn to_dense(&self) -> Result<Tensor> {
        let mut acc = select(&self.sites[0], &bond(0), 0)?;
        for s in &self.sites[1..] {
            acc = contract(&acc, s)?;
        }
        select(&acc, &bond(self.len()), 0)
    }

    /// Left-to-right SVD factorisation of a dense tensor with indices
    /// `q0 … q{n-1}`. Returns the left-canonical MPS and the discarded weight
    /// at every internal bond.
    pub fn from_dense(t: &Tensor, n: usize, spec: SvdSpec) -> Result<(Self, Vec<f64>)> {
        let first = phys(0);
        let e0 = t.extent(&first)?;
        let mut rest = reshape_split(
            t,
            &ReshapePlan::split(&first, &[(&bond(0), 1), (&first, e0)]),
        )?;
        let mut sites = Vec::with_capacity(n);
        let mut discarded = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n - 1 {
            let rows = [bond(i), phys(i)];
            let cols: Vec<String> = (i + 1..n).map(phys).collect();
            let row_refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
            let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
            let out = svd_truncated(&rest, &row_refs, &col_refs, &bond(i + 1), spec)?;
            discarded.push(out.discarded_weight);
            sites.push(out.u);
            rest = scale_axis(&out.v, &out.s)?;
        }
        let last = phys(n - 1);
        rest = reshape_split(
            &rest,
            &ReshapePlan::split(&last, &[(&last, rest.extent(&last)?), (&bond(n), 1)]),
        )?;
        sites.push(rest);
        Ok((Self::new(sites)?, discarded))
    }

    /// Right-to-left factorisation of a dense tensor with indices
    /// `q0 … q{n-1}`: sites `1..n` are right-isometric and site 0 carries the
    /// norm. With a rank cap this is the optimal sequential truncation.
    pub fn from_dense_right(t: &Tensor, n: usize, spec: SvdSpec) -> Result<(Self, Vec<f64>)> {
        let last = phys(n - 1);
        let el = t.extent(&last)?;
        let mut rest = reshape_split(t, &ReshapePlan::split(&last, &[(&last, el), (&bond(n), 1)]))?;
        let mut sites = Vec::with_capacity(n);
        let mut discarded = vec![0.0; n.saturating_sub(1)];
        for i in (1..n).rev() {
            let rows: Vec<String> = (0..i).map(phys).collect();
            let cols = [phys(i), bond(i + 1)];
            let row_refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
            let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
            let out = svd_truncated(&rest, &row_refs, &col_refs, &bond(i), spec)?;
            discarded[i - 1] = out.discarded_weight;
            sites.push(out.v);
            rest = scale_axis(&out.u, &out.s)?;
        }
        let first = phys(0);
        let e0 = rest.extent(&first)?;
        sites.push(reshape_split(
            &rest,
            &ReshapePlan::split(&first, &[(&bond(0), 1), (&first, e0)]),
        )?);
        sites.reverse();
        Ok((Self::new(sites)?, discarded))
    }

    /// Gauge transform leaving sites left of `center` left-isometric and
    /// sites right of it right-isometric. The state is unchanged.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let full = SvdSpec {
            max_rank: usize::MAX,
            rel_cutoff: 0.0,
        };
        let mut sites = self.sites.clone();
        for i in 0..center {
            let (u, carry) = split_left(&sites[i], i, full)?;
            sites[i] = u;
            sites[i + 1] = absorb_right(&carry, &sites[i + 1], i + 1)?;
        }
        for i in (center + 1..sites.len()).rev() {
            let (v, carry, _) = split_right(&sites[i], i, full)?;
            sites[i] = v;
            sites[i - 1] = absorb_left(&sites[i - 1], &carry, i)?;
        }
        Self::new(sites)
    }

    /// Right-to-left truncated sweep over a left-canonical MPS. Every bond is
    /// capped by `spec`; the result has right-isometric sites `1..n` and the
    /// norm in site 0. Returns the discarded weight per bond (index `i` is
    /// bond `b{i+1}`).
    pub fn truncate_right_to_left(&self, spec: SvdSpec) -> Result<(Self, Vec<f64>)> {
        let mut sites = self.sites.clone();
        let n = sites.len();
        let mut discarded = vec![0.0; n.saturating_sub(1)];
        for i in (1..n).rev() {
            let (v, carry, w) = split_right(&sites[i], i, spec)?;
            discarded[i - 1] = w;
            sites[i] = v;
            sites[i - 1] = absorb_left(&sites[i - 1], &carry, i)?;
        }
        Ok((Self::new(sites)?, discarded))
    }

    /// Left-to-right truncated sweep over a right-canonical MPS.
    pub fn truncate_left_to_right(&self, spec: SvdSpec) -> Result<(Self, Vec<f64>)> {
        let mut sites = self.sites.clone();
        let n = sites.len();
        let mut discarded = vec![0.0; n.saturating_sub(1)];
        for i in 0..n - 1 {
            let (u, carry) = split_left_weighted(&sites[i], i, spec, &mut discarded[i])?;
            sites[i] = u;
            sites[i + 1] = absorb_right(&carry, &sites[i + 1], i + 1)?;
        }
        Ok((Self::new(sites)?, discarded))
    }

    pub fn map_sites<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(usize, &Tensor) -> Result<Tensor>,
    {
        let sites = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| f(i, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites)
    }
}

fn split_left(site: &Tensor, i: usize, spec: SvdSpec) -> Result<(Tensor, Tensor)> {
    let mut w = 0.0;
    split_left_weighted(site, i, spec, &mut w)
}

/// `site = U · carry` with `U` left-isometric; carry has `(TMP, b{i+1})`.
fn split_left_weighted(
    site: &Tensor,
    i: usize,
    spec: SvdSpec,
    discarded: &mut f64,
) -> Result<(Tensor, Tensor)> {
    let (l, p, r) = (bond(i), phys(i), bond(i + 1));
    let out = svd_truncated(site, &[&l, &p], &[&r], TMP, spec)?;
    *discarded = out.discarded_weight;
    let u = out.u.rename(&[(TMP, &r)])?;
    let carry = scale_axis(&out.v, &out.s)?;
    Ok((u, carry))
}

fn absorb_right(carry: &Tensor, next: &Tensor, i: usize) -> Result<Tensor> {
    contract(carry, next)?.rename(&[(TMP, &bond(i))])
}

/// `site = carry · V` with `V` right-isometric; carry has `(b{i}, TMP)`.
fn split_right(site: &Tensor, i: usize, spec: SvdSpec) -> Result<(Tensor, Tensor, f64)> {
    let (l, p, r) = (bond(i), phys(i), bond(i + 1));
    let out = svd_truncated(site, &[&l], &[&p, &r], TMP, spec)?;
    let v = out.v.rename(&[(TMP, &l)])?;
    let carry = scale_axis(&out.u, &out.s)?;
    Ok((v, carry, out.discarded_weight))
}

fn absorb_left(prev: &Tensor, carry: &Tensor, i: usize) -> Result<Tensor> {
    contract(prev, carry)?.rename(&[(TMP, &bond(i))])
}
