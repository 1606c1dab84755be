//! Cubic smoothing spline (Reinsch form) on a uniform grid.
//!
//! Minimises `Σ (yᵢ − g(tᵢ))² + λ ∫ g''²` over natural cubic splines with
//! knots at the samples, time rescaled to `[0, 1]`. `λ = 0` gives the
//! interpolating natural spline.

/// Fits `values` on a uniform grid over `[0, 1]` and evaluates the spline at
/// `n_out` uniform points over the same interval.
pub fn smoothing_spline_resample(values: &[f64], lambda: f64, n_out: usize) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        // linear (or constant) interpolation is the exact answer here
        return (0..n_out)
            .map(|j| {
                let x = if n_out > 1 {
                    j as f64 / (n_out - 1) as f64
                } else {
                    0.0
                };
                match n {
                    0 => 0.0,
                    1 => values[0],
                    _ => values[0] + x * (values[1] - values[0]),
                }
            })
            .collect();
    }
    let h = 1.0 / (n - 1) as f64;
    let m = n - 2;

    // Qᵀy
    let qty: Vec<f64> = (0..m)
        .map(|j| (values[j] - 2.0 * values[j + 1] + values[j + 2]) / h)
        .collect();

    // R + λ QᵀQ is symmetric pentadiagonal with constant bands on a uniform
    // grid.
    let mut d0 = vec![0.0; m];
    let mut d1 = vec![0.0; m.saturating_sub(1)];
    let mut d2 = vec![0.0; m.saturating_sub(2)];
    let inv = 1.0 / h;
    for j in 0..m {
        d0[j] = 2.0 * h / 3.0 + lambda * 6.0 * inv * inv;
        if j + 1 < m {
            d1[j] = h / 6.0 + lambda * (-4.0 * inv * inv);
        }
        if j + 2 < m {
            d2[j] = lambda * inv * inv;
        }
    }
    let gamma = solve_pentadiagonal_spd(&d0, &d1, &d2, &qty);

    // fitted values g = y − λ Q γ, with γ padded by the natural end conditions
    let mut gpad = vec![0.0; n];
    gpad[1..n - 1].copy_from_slice(&gamma);
    let fitted: Vec<f64> = (0..n)
        .map(|i| {
            let mut qg = 0.0;
            if i >= 1 && i <= m {
                qg += -2.0 * inv * gpad[i];
            }
            if i >= 2 {
                qg += inv * gpad[i - 1];
            }
            if i < m {
                qg += inv * gpad[i + 1];
            }
            values[i] - lambda * qg
        })
        .collect();

    (0..n_out)
        .map(|j| {
            let x = if n_out > 1 {
                j as f64 / (n_out - 1) as f64
            } else {
                0.0
            };
            let seg = ((x / h).floor() as usize).min(n - 2);
            let tl = seg as f64 * h;
            let tr = tl + h;
            let (a, b) = (x - tl, tr - x);
            (a * fitted[seg + 1] + b * fitted[seg]) / h
                - a * b / 6.0 * ((1.0 + a / h) * gpad[seg + 1] + (1.0 + b / h) * gpad[seg])
        })
        .collect()
}

/// Solves `A x = b` for symmetric positive definite pentadiagonal `A` with
/// diagonal `d0` and off-diagonals `d1`, `d2` (LDLᵀ without pivoting).
fn solve_pentadiagonal_spd(d0: &[f64], d1: &[f64], d2: &[f64], b: &[f64]) -> Vec<f64> {
    let m = d0.len();
    let mut d = vec![0.0; m];
    let mut l1 = vec![0.0; m];
    let mut l2 = vec![0.0; m];
    for i in 0..m {
        let mut di = d0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        d[i] = di;
        if i + 1 < m {
            let mut v = d1[i];
            if i >= 1 {
                v -= l1[i - 1] * l2[i - 1] * d[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < m {
            l2[i] = d2[i] / di;
        }
    }
    let mut y = b.to_vec();
    for i in 0..m {
        if i >= 1 {
            y[i] -= l1[i - 1] * y[i - 1];
        }
        if i >= 2 {
            y[i] -= l2[i - 2] * y[i - 2];
        }
    }
    for i in 0..m {
        y[i] /= d[i];
    }
    for i in (0..m).rev() {
        if i + 1 < m {
            y[i] -= l1[i] * y[i + 1];
        }
        if i + 2 < m {
            y[i] -= l2[i] * y[i + 2];
        }
    }
    y
}
