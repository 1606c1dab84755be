//! Oracles shared by the integration tests.
#![allow(dead_code)]

use hqtn::aero::AeroSample;
use nalgebra::DMatrix;

/// Characteristic polynomial coefficients (leading 1) by Faddeev–LeVerrier.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Routh–Hurwitz: true when every root has negative real part.
pub fn routh_stable(p: &[f64]) -> bool {
    let n = p.len();
    let cols = n.div_ceil(2);
    let mut rows = vec![vec![0.0; cols + 1]; n];
    for (i, &c) in p.iter().enumerate() {
        rows[i % 2][i / 2] = c;
    }
    for r in 2..n {
        let piv = rows[r - 1][0];
        if piv == 0.0 {
            return false;
        }
        for j in 0..cols {
            rows[r][j] = (piv * rows[r - 2][j + 1] - rows[r - 2][0] * rows[r - 1][j + 1]) / piv;
        }
    }
    rows.iter().all(|r| r[0] > 0.0)
}

/// Largest |value| over all three rows in the first or last tenth.
pub fn window_amplitude(s: &AeroSample, from_end: bool) -> f64 {
    let n = s.series[0].len();
    let w = n / 10;
    let range = if from_end { n - w..n } else { 0..w };
    s.series
        .iter()
        .flat_map(|row| row[range.clone()].iter())
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}
