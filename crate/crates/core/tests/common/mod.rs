//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Galerkin matrix built entry by entry from the sine-basis integrals.
pub fn dense_hamiltonian(n: usize, eta: f64, positions: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |r, c| {
        let (k, l) = ((r + 1) as f64, (c + 1) as f64);
        let free = if r == c { k * k * PI * PI } else { 0.0 };
        let delta: f64 = positions
            .iter()
            .map(|&a| 2.0 * (k * PI * a).sin() * (l * PI * a).sin())
            .sum();
        free + eta * delta
    })
}

/// `exp(-i H t) v` by Taylor scaling and squaring.
pub fn expm_apply(h: &DMatrix<f64>, t: f64, v: &[Complex64]) -> Vec<Complex64> {
    let n = h.nrows();
    let a = h.map(|x| Complex64::new(0.0, -x * t));
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / Complex64::new(2f64.powi(s), 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut term = id.clone();
    let mut sum = id;
    for j in 1..=24 {
        term = &term * &b / Complex64::new(j as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    let out = sum * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}
