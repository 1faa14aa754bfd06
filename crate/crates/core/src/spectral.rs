//! Dirichlet sine basis on (0, 1) and states expanded in it.
//!
//! Basis functions are `w_k(x) = sqrt(2) sin(k pi x)`, `k = 1..=N`, with
//! Laplacian eigenvalues `nu_k = k^2 pi^2`. The basis is orthonormal in L2,
//! so the coefficient vector norm equals the L2 norm of the reconstructed
//! function. Indices are 1-based in file formats and 0-based in memory.

use std::f64::consts::{PI, SQRT_2};
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Truncation dimension of the sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Basis {
    n_modes: usize,
}

impl Basis {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::validation("basis needs at least one mode"));
        }
        Ok(Basis { n_modes })
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `nu_k = k^2 pi^2` for the 1-based mode index `k`.
    #[inline]
    pub fn laplacian_eigenvalue(k: usize) -> f64 {
        let k = k as f64;
        k * k * PI * PI
    }

    /// Diagonal of the free Hamiltonian, `(nu_1, ..., nu_N)`.
    pub fn laplacian_diagonal(&self) -> Vec<f64> {
        (1..=self.n_modes).map(Self::laplacian_eigenvalue).collect()
    }

    /// `w_k(x)` for the 1-based mode index `k`.
    #[inline]
    pub fn basis_function(k: usize, x: f64) -> f64 {
        SQRT_2 * (k as f64 * PI * x).sin()
    }
}

/// Complex coefficient vector in the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    coefficients: Vec<Complex64>,
}

impl SpectralState {
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::validation("state needs at least one coefficient"));
        }
        Ok(SpectralState { coefficients })
    }

    pub fn zeros(basis: Basis) -> Self {
        SpectralState {
            coefficients: vec![Complex64::new(0.0, 0.0); basis.n_modes()],
        }
    }

    /// Builds a state from leading real coefficients, zero-padded to `basis`.
    pub fn from_leading(leading: &[f64], basis: Basis) -> Result<Self> {
        Self::from_leading_complex(
            &leading.iter().map(|&c| Complex64::new(c, 0.0)).collect::<Vec<_>>(),
            basis,
        )
    }

    pub fn from_leading_complex(leading: &[Complex64], basis: Basis) -> Result<Self> {
        if leading.len() > basis.n_modes() {
            return Err(Error::Dimension {
                expected: basis.n_modes(),
                got: leading.len(),
            });
        }
        let mut coefficients = vec![Complex64::new(0.0, 0.0); basis.n_modes()];
        coefficients[..leading.len()].copy_from_slice(leading);
        Ok(SpectralState { coefficients })
    }

    /// Real coefficient vector (e.g. an eigenvector) promoted to a state.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    #[inline]
    pub fn basis(&self) -> Basis {
        Basis {
            n_modes: self.coefficients.len(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    #[inline]
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coefficients
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &SpectralState) -> Result<Complex64> {
        self.check_len(other.len())?;
        Ok(self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn all_finite(&self) -> bool {
        self.coefficients
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Truncates or zero-pads to another basis size.
    pub fn project(&self, basis: Basis) -> SpectralState {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); basis.n_modes()];
        let n = basis.n_modes().min(self.len());
        coefficients[..n].copy_from_slice(&self.coefficients[..n]);
        SpectralState { coefficients }
    }

    /// Pointwise reconstruction `sum_k c_k sqrt(2) sin(k pi x)`.
    pub fn evaluate(&self, points: &[f64]) -> Result<Vec<Complex64>> {
        points
            .iter()
            .map(|&x| {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::domain(format!("evaluation point {x} outside [0, 1]")));
                }
                if x == 0.0 || x == 1.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                Ok(self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * Basis::basis_function(i + 1, x))
                    .sum())
            })
            .collect()
    }

    /// `(|c_1|^2, ..., |c_N|^2)`.
    pub fn mode_energies(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `int_b^c |psi_N(x)|^2 dx`, exact for the truncated series.
    pub fn subinterval_energy(&self, b: f64, c: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&c) || b >= c {
            return Err(Error::domain(format!(
                "subinterval [{b}, {c}] is not a non-degenerate subset of [0, 1]"
            )));
        }
        let n = self.len();
        let cos_integrals = cosine_integrals(2 * n, b, c);
        Ok(gram_quadratic_form(&self.coefficients, &cos_integrals))
    }

    /// Energies of the `J + 1` intervals cut out of (0, 1) by increasing
    /// interior points.
    pub fn partition_energies(&self, cuts: &[f64]) -> Result<Vec<f64>> {
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(cuts);
        edges.push(1.0);
        edges
            .windows(2)
            .map(|w| self.subinterval_energy(w[0], w[1]))
            .collect()
    }

    pub fn write_snapshot_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "mode_index,re,im")?;
        for (i, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, fmt_f64(c.re), fmt_f64(c.im))?;
        }
        Ok(())
    }

    /// Reads the `mode_index,re,im` snapshot format. Missing indices are zero;
    /// the basis size is the largest index present.
    pub fn read_snapshot_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut entries: Vec<(usize, Complex64)> = Vec::new();
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty snapshot file".into()))??;
        if header.trim() != "mode_index,re,im" {
            return Err(Error::Parse(format!("unexpected snapshot header `{header}`")));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 2)));
            }
            let parse_err = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 2));
            let k: usize = fields[0].parse().map_err(|_| parse_err("mode_index"))?;
            if k == 0 {
                return Err(Error::Parse(format!("line {}: mode_index is 1-based", lineno + 2)));
            }
            let re: f64 = fields[1].parse().map_err(|_| parse_err("re"))?;
            let im: f64 = fields[2].parse().map_err(|_| parse_err("im"))?;
            entries.push((k, Complex64::new(re, im)));
        }
        let n = entries
            .iter()
            .map(|(k, _)| *k)
            .max()
            .ok_or_else(|| Error::Parse("snapshot has no rows".into()))?;
        let mut coefficients = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in entries {
            coefficients[k - 1] = c;
        }
        Ok(SpectralState { coefficients })
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// `F(p) = int_b^c cos(p pi x) dx` for `p = 0..=max_p`.
fn cosine_integrals(max_p: usize, b: f64, c: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_p + 1);
    out.push(c - b);
    for p in 1..=max_p {
        let w = p as f64 * PI;
        out.push(((w * c).sin() - (w * b).sin()) / w);
    }
    out
}

/// `sum_{m,n} conj(c_m) c_n G_mn` with `G_mn = F(|m-n|) - F(m+n)`, the
/// cross-Gram matrix of `w_m, w_n` on the interval encoded by `F`.
fn gram_quadratic_form(coeffs: &[Complex64], f: &[f64]) -> f64 {
    let n = coeffs.len();
    let mut total = 0.0;
    for m in 0..n {
        let cm = coeffs[m];
        // 1-based indices are m+1, n+1: m+n in 1-based is (m+1)+(k+1).
        total += (f[0] - f[2 * m + 2]) * cm.norm_sqr();
        let mut off = 0.0;
        for k in (m + 1)..n {
            let g = f[k - m] - f[m + k + 2];
            off += g * (cm.conj() * coeffs[k]).re;
        }
        total += 2.0 * off;
    }
    total
}

impl Add for &SpectralState {
    type Output = SpectralState;

    fn add(self, rhs: &SpectralState) -> SpectralState {
        assert_eq!(self.len(), rhs.len(), "state dimension mismatch");
        SpectralState {
            coefficients: self
                .coefficients
                .iter()
                .zip(&rhs.coefficients)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;

    fn sub(self, rhs: &SpectralState) -> SpectralState {
        assert_eq!(self.len(), rhs.len(), "state dimension mismatch");
        SpectralState {
            coefficients: self
                .coefficients
                .iter()
                .zip(&rhs.coefficients)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<Complex64> for &SpectralState {
    type Output = SpectralState;

    fn mul(self, rhs: Complex64) -> SpectralState {
        SpectralState {
            coefficients: self.coefficients.iter().map(|a| a * rhs).collect(),
        }
    }
}
