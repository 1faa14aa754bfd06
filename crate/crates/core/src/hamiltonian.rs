//! Galerkin Hamiltonian for `eta * sum_j delta(x - a_j)` in the sine basis.
//!
//! In the basis `w_k = sqrt(2) sin(k pi x)` the operator is
//! `H = diag(nu) + 2 eta sum_j s_j s_j^T` with `(s_j)_k = sin(k pi a_j)`.
//! The evolution generator is `-i H`. Only the diagonal and the `J` rank
//! vectors are stored; a dense copy is built on demand for eigensolves.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::{csv_row, fmt_f64};
use crate::spectral::Basis;

/// Largest basis size accepted by the dense eigensolver.
pub const DEFAULT_DENSE_LIMIT: usize = 512;

/// Eigenvalue gaps below this are reported as degenerate pairs.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Dirac strength and interior positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracConfig {
    eta: f64,
    positions: Vec<f64>,
}

impl DiracConfig {
    pub fn new(eta: f64, positions: Vec<f64>) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::validation(format!("eta must be finite and >= 0, got {eta}")));
        }
        validate_positions(&positions)?;
        Ok(DiracConfig { eta, positions })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// Checks `0 < a_1 < ... < a_J < 1`.
pub fn validate_positions(positions: &[f64]) -> Result<()> {
    for (j, &a) in positions.iter().enumerate() {
        if !(a.is_finite() && a > 0.0 && a < 1.0) {
            return Err(Error::validation(format!(
                "Dirac position a_{} = {a} must lie strictly inside (0, 1)",
                j + 1
            )));
        }
    }
    if let Some(j) = positions.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::validation(format!(
            "Dirac positions must be strictly increasing (a_{} = {} >= a_{} = {})",
            j + 1,
            positions[j],
            j + 2,
            positions[j + 1]
        )));
    }
    Ok(())
}

/// Diagonal-plus-rank-J symmetric operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RankStructuredHamiltonian {
    diagonal: Vec<f64>,
    rank_vectors: Vec<Vec<f64>>,
    strength: f64,
}

impl RankStructuredHamiltonian {
    pub fn assemble(config: &DiracConfig, basis: Basis) -> Self {
        let n = basis.n_modes();
        let mut h = RankStructuredHamiltonian {
            diagonal: basis.laplacian_diagonal(),
            rank_vectors: vec![vec![0.0; n]; config.positions.len()],
            strength: 0.0,
        };
        h.reassemble(config.eta, &config.positions);
        h
    }

    /// Refreshes strength and rank vectors in place, keeping the diagonal.
    /// Inputs are trusted; the integrator validates the schedule upstream.
    pub(crate) fn reassemble(&mut self, eta: f64, positions: &[f64]) {
        if self.rank_vectors.len() != positions.len() {
            self.rank_vectors = vec![vec![0.0; self.diagonal.len()]; positions.len()];
        }
        self.strength = eta;
        for (s, &a) in self.rank_vectors.iter_mut().zip(positions) {
            for (k, sk) in s.iter_mut().enumerate() {
                *sk = ((k + 1) as f64 * PI * a).sin();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn rank_vectors(&self) -> &[Vec<f64>] {
        &self.rank_vectors
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// `H v` in `O(N J)`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        for ((o, &d), x) in out.iter_mut().zip(&self.diagonal).zip(v) {
            *o = x * d;
        }
        if self.strength == 0.0 {
            return;
        }
        let two_eta = 2.0 * self.strength;
        for s in &self.rank_vectors {
            let proj: Complex64 = s.iter().zip(v).map(|(&sk, x)| x * sk).sum();
            let scaled = proj * two_eta;
            for (o, &sk) in out.iter_mut().zip(s) {
                *o += scaled * sk;
            }
        }
    }

    /// Dense `N x N` materialization.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        if self.strength != 0.0 {
            let two_eta = 2.0 * self.strength;
            for s in &self.rank_vectors {
                for i in 0..n {
                    let si = two_eta * s[i];
                    for j in 0..n {
                        m[(i, j)] += si * s[j];
                    }
                }
            }
        }
        m
    }

    pub fn eigendecompose(&self) -> Result<EigenDecomposition> {
        self.eigendecompose_with_limit(DEFAULT_DENSE_LIMIT)
    }

    /// Full dense symmetric eigendecomposition, ascending, with each
    /// eigenvector's largest-magnitude entry made positive.
    pub fn eigendecompose_with_limit(&self, dense_limit: usize) -> Result<EigenDecomposition> {
        let n = self.dim();
        if n > dense_limit {
            return Err(Error::Capability(format!(
                "N = {n} exceeds the dense eigensolver limit {dense_limit}; \
                 decompose a truncated basis or use a partial (iterative) solver"
            )));
        }
        let eig = SymmetricEigen::new(self.to_dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(src);
            let mut pivot = 0;
            for i in 1..n {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                eigenvectors[(i, col)] = sign * v[i];
            }
        }
        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` (0-based) as a plain vector.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// `<phi_k, psi>`.
    pub fn project(&self, k: usize, psi: &[Complex64]) -> Complex64 {
        self.eigenvectors
            .column(k)
            .iter()
            .zip(psi)
            .map(|(&p, c)| c * p)
            .sum()
    }

    /// `<P_k psi, psi> = |<phi_k, psi>|^2` for every column.
    pub fn populations(&self, psi: &[Complex64]) -> Vec<f64> {
        (0..self.dim()).map(|k| self.project(k, psi).norm_sqr()).collect()
    }

    /// Sum of squared entries over the first `modes` sine coefficients.
    pub fn participation(&self, k: usize, modes: usize) -> f64 {
        self.eigenvectors
            .column(k)
            .iter()
            .take(modes)
            .map(|v| v * v)
            .sum()
    }

    /// Index pairs `(k, k+1)` whose eigenvalue gap is below `tol`.
    pub fn degenerate_pairs(&self, tol: f64) -> Vec<(usize, usize)> {
        self.eigenvalues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] < tol)
            .map(|(k, _)| (k, k + 1))
            .collect()
    }
}

/// Smallest `count` values of `m^2 pi^2 / l_i^2` over the subinterval
/// lengths cut by `positions`: the spectrum of (0, 1) with Dirichlet walls
/// at every Dirac point.
pub fn split_limit_eigenvalues(positions: &[f64], count: usize) -> Result<Vec<f64>> {
    validate_positions(positions)?;
    let lengths = interval_lengths(positions);
    let mut values: Vec<f64> = lengths
        .iter()
        .flat_map(|&l| (1..=count).map(move |m| (m as f64 * PI / l).powi(2)))
        .collect();
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    Ok(values)
}

/// Lengths of the `J + 1` intervals cut out of (0, 1) by `positions`.
pub fn interval_lengths(positions: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(positions.len() + 1);
    for &a in positions {
        out.push(a - prev);
        prev = a;
    }
    out.push(1.0 - prev);
    out
}

/// Follows eigenvector labels across successive decompositions by maximal
/// overlap, so a label stays on its physical branch through avoided
/// crossings.
#[derive(Debug, Clone)]
pub struct ModeTracker {
    previous: Vec<Vec<f64>>,
    threshold: f64,
}

/// Result of one tracking update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedModes {
    /// Column index in the new decomposition for each tracked label.
    pub columns: Vec<usize>,
    /// Squared overlap with the previous vector, per label.
    pub overlaps: Vec<f64>,
    /// True when some label's best squared overlap fell below the threshold.
    pub ambiguous: bool,
}

impl ModeTracker {
    /// Starts tracking the lowest `count` modes of `initial` in eigenvalue order.
    pub fn new(initial: &EigenDecomposition, count: usize) -> Self {
        let count = count.min(initial.dim());
        ModeTracker {
            previous: (0..count).map(|k| initial.eigenvector(k)).collect(),
            threshold: 0.5,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn count(&self) -> usize {
        self.previous.len()
    }

    /// Greedy maximal-overlap assignment of labels to new columns.
    pub fn update(&mut self, next: &EigenDecomposition) -> TrackedModes {
        let n = next.dim();
        let labels = self.previous.len();
        let mut overlap = vec![vec![0.0; n]; labels];
        for (l, prev) in self.previous.iter().enumerate() {
            for (c, row) in overlap[l].iter_mut().enumerate() {
                let dot: f64 = next
                    .eigenvectors
                    .column(c)
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| a * b)
                    .sum();
                *row = dot * dot;
            }
        }
        let mut columns = vec![usize::MAX; labels];
        let mut overlaps = vec![0.0; labels];
        let mut taken = vec![false; n];
        for _ in 0..labels {
            let mut best = (usize::MAX, usize::MAX, -1.0);
            for (l, row) in overlap.iter().enumerate() {
                if columns[l] != usize::MAX {
                    continue;
                }
                for (c, &o) in row.iter().enumerate() {
                    if !taken[c] && o > best.2 {
                        best = (l, c, o);
                    }
                }
            }
            let (l, c, o) = best;
            columns[l] = c;
            overlaps[l] = o;
            taken[c] = true;
        }
        let ambiguous = overlaps.iter().any(|&o| o < self.threshold);
        for (l, &c) in columns.iter().enumerate() {
            let mut v = next.eigenvector(c);
            // keep a continuous sign along the branch
            let dot: f64 = v.iter().zip(&self.previous[l]).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            self.previous[l] = v;
        }
        TrackedModes {
            columns,
            overlaps,
            ambiguous,
        }
    }
}

/// Writes `time,k,lambda_k,participation` rows for the lowest `modes`
/// eigenpairs of each `(time, decomposition)` entry.
pub fn write_eigen_report<W: Write>(
    mut out: W,
    entries: &[(f64, &EigenDecomposition)],
    modes: usize,
) -> Result<()> {
    writeln!(out, "time,k,lambda_k,participation")?;
    for (t, eig) in entries {
        for k in 0..modes.min(eig.dim()) {
            writeln!(
                out,
                "{}",
                csv_row([
                    fmt_f64(*t),
                    (k + 1).to_string(),
                    fmt_f64(eig.eigenvalues[k]),
                    fmt_f64(eig.participation(k, 5)),
                ])
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_positions(rng: &mut ChaCha8Rng, j: usize) -> Vec<f64> {
        loop {
            let mut p: Vec<f64> = (0..j).map(|_| rng.gen_range(0.05..0.95)).collect();
            p.sort_by(f64::total_cmp);
            if p.windows(2).all(|w| w[1] - w[0] > 0.02) {
                return p;
            }
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn config_validation() {
        assert!(DiracConfig::new(-1.0, vec![0.5]).is_err());
        assert!(DiracConfig::new(1.0, vec![0.0]).is_err());
        assert!(DiracConfig::new(1.0, vec![0.5, 1.0]).is_err());
        assert!(DiracConfig::new(1.0, vec![0.6, 0.4]).is_err());
        assert!(DiracConfig::new(1.0, vec![0.4, 0.4]).is_err());
        assert!(DiracConfig::new(0.0, vec![]).is_ok());
    }

    #[test]
    fn free_hamiltonian() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(0.0, vec![]).unwrap(),
            Basis::new(2).unwrap(),
        );
        let d = h.to_dense();
        assert_eq!(d[(0, 0)], PI * PI);
        assert_eq!(d[(1, 1)], 4.0 * PI * PI);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn single_mode_with_strong_dirac() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(2000.0, vec![0.5]).unwrap(),
            Basis::new(1).unwrap(),
        );
        assert_abs_diff_eq!(h.to_dense()[(0, 0)], PI * PI + 4000.0, epsilon = 1e-9);
    }

    #[test]
    fn midpoint_dirac_decouples_even_modes() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(37.0, vec![0.5]).unwrap(),
            Basis::new(10).unwrap(),
        );
        let d = h.to_dense();
        for i in 0..10 {
            for j in 0..10 {
                if i != j && ((i + 1) % 2 == 0 || (j + 1) % 2 == 0) {
                    assert!(d[(i, j)].abs() < 1e-10, "({i},{j}) = {}", d[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn apply_edge_cases() {
        let basis = Basis::new(5).unwrap();
        let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(0.0, vec![0.3]).unwrap(), basis);
        let mut e3 = vec![Complex64::new(0.0, 0.0); 5];
        e3[2] = Complex64::new(1.0, 0.0);
        let out = h.apply(&e3).unwrap();
        assert_eq!(out[2], Complex64::new(9.0 * PI * PI, 0.0));
        assert!(out.iter().enumerate().all(|(i, c)| i == 2 || *c == Complex64::new(0.0, 0.0)));

        let h = RankStructuredHamiltonian::assemble(&DiracConfig::new(3.0, vec![0.3]).unwrap(), basis);
        let zero = vec![Complex64::new(0.0, 0.0); 5];
        assert!(h.apply(&zero).unwrap().iter().all(|c| c.norm() == 0.0));
        assert!(matches!(h.apply(&zero[..4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn apply_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [8usize, 33, 64] {
            let pos = random_positions(&mut rng, 2);
            let h = RankStructuredHamiltonian::assemble(
                &DiracConfig::new(3.0, pos).unwrap(),
                Basis::new(n).unwrap(),
            );
            let v = random_vec(&mut rng, n);
            let fast = h.apply(&v).unwrap();
            let d = h.to_dense();
            for i in 0..n {
                let dense: Complex64 = (0..n).map(|j| v[j] * d[(i, j)]).sum();
                assert!((dense - fast[i]).norm() <= 1e-12 * (1.0 + dense.norm()));
            }
        }
    }

    #[test]
    fn hermitian_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pos = random_positions(&mut rng, 3);
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(120.0, pos).unwrap(),
            Basis::new(40).unwrap(),
        );
        let u = random_vec(&mut rng, 40);
        let v = random_vec(&mut rng, 40);
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        let lhs = dot(&u, &h.apply(&v).unwrap());
        let rhs = dot(&v, &h.apply(&u).unwrap()).conj();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn free_eigendecomposition_is_exact() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(0.0, vec![0.4]).unwrap(),
            Basis::new(12).unwrap(),
        );
        let e = h.eigendecompose().unwrap();
        for k in 0..12 {
            assert_eq!(e.eigenvalues[k], Basis::laplacian_eigenvalue(k + 1));
            for i in 0..12 {
                assert_eq!(e.eigenvectors[(i, k)], if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn eigendecomposition_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &eta in &[1.0, 10.0, 100.0, 2000.0] {
            let pos = random_positions(&mut rng, 2);
            let h = RankStructuredHamiltonian::assemble(
                &DiracConfig::new(eta, pos).unwrap(),
                Basis::new(48).unwrap(),
            );
            let e = h.eigendecompose().unwrap();
            let d = h.to_dense();
            let gram = e.eigenvectors.transpose() * &e.eigenvectors;
            assert!((gram - DMatrix::identity(48, 48)).amax() < 1e-11);
            for k in 0..48 {
                let lam = e.eigenvalues[k];
                assert!(lam >= Basis::laplacian_eigenvalue(k + 1) - 1e-9);
                let v = e.eigenvectors.column(k);
                let r = &d * v - v * lam;
                assert!(r.norm() <= 1e-9 * (1.0 + lam.abs()));
                let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                assert!(pivot > 0.0);
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigenvalues_monotone_in_eta() {
        let pos = vec![0.31, 0.68];
        let mut prev: Option<Vec<f64>> = None;
        for eta in [0.0, 5.0, 20.0, 80.0, 300.0, 1000.0, 2000.0] {
            let h = RankStructuredHamiltonian::assemble(
                &DiracConfig::new(eta, pos.clone()).unwrap(),
                Basis::new(40).unwrap(),
            );
            let e = h.eigendecompose().unwrap().eigenvalues;
            if let Some(p) = prev {
                for k in 0..40 {
                    assert!(e[k] >= p[k] - 1e-9 * p[k]);
                }
            }
            prev = Some(e);
        }
    }

    #[test]
    fn dense_limit_is_capability_error() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(1.0, vec![0.5]).unwrap(),
            Basis::new(20).unwrap(),
        );
        assert!(matches!(h.eigendecompose_with_limit(10), Err(Error::Capability(_))));
    }

    #[test]
    fn split_limit_examples() {
        let v = split_limit_eigenvalues(&[0.5], 2).unwrap();
        assert_abs_diff_eq!(v[0], 4.0 * PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 4.0 * PI * PI, epsilon = 1e-12);

        let v = split_limit_eigenvalues(&[0.36, 0.7], 3).unwrap();
        assert_abs_diff_eq!(v[0], PI * PI / 0.1296, epsilon = 1e-9);
        assert_abs_diff_eq!(v[1], PI * PI / (0.34f64 * 0.34), epsilon = 1e-9);
        assert_abs_diff_eq!(v[2], PI * PI / 0.09, epsilon = 1e-9);
        assert_abs_diff_eq!(v[0], 76.15, epsilon = 0.01);
        assert_abs_diff_eq!(v[1], 85.38, epsilon = 0.01);
        assert_abs_diff_eq!(v[2], 109.66, epsilon = 0.01);

        let v = split_limit_eigenvalues(&[0.27, 0.53, 0.77], 4).unwrap();
        let expect: Vec<f64> = [0.27, 0.26, 0.24, 0.23].iter().map(|l: &f64| (PI / l).powi(2)).collect();
        for (a, b) in v.iter().zip(&expect) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }

        assert!(split_limit_eigenvalues(&[0.7, 0.3], 2).is_err());
    }

    #[test]
    fn strong_dirac_approaches_split_limit() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(2000.0, vec![0.5]).unwrap(),
            Basis::new(200).unwrap(),
        );
        let e = h.eigendecompose().unwrap();
        let target = 4.0 * PI * PI;
        assert!((e.eigenvalues[0] - target).abs() / target < 0.05);
        assert!((e.eigenvalues[1] - target).abs() / target < 0.05);
    }

    #[test]
    fn tracker_follows_identity_and_permutation() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(50.0, vec![0.37]).unwrap(),
            Basis::new(16).unwrap(),
        );
        let e = h.eigendecompose().unwrap();
        let mut tracker = ModeTracker::new(&e, 4);
        let step = tracker.update(&e);
        assert_eq!(step.columns, vec![0, 1, 2, 3]);
        assert!(!step.ambiguous);

        // swapped columns are followed by overlap, not by order
        let mut swapped = e.clone();
        swapped.eigenvectors.swap_columns(0, 1);
        swapped.eigenvalues.swap(0, 1);
        let step = tracker.update(&swapped);
        assert_eq!(step.columns, vec![1, 0, 2, 3]);
    }

    #[test]
    fn eigen_report_format() {
        let h = RankStructuredHamiltonian::assemble(
            &DiracConfig::new(0.0, vec![]).unwrap(),
            Basis::new(6).unwrap(),
        );
        let e = h.eigendecompose().unwrap();
        let mut buf = Vec::new();
        write_eigen_report(&mut buf, &[(0.0, &e)], 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,k,lambda_k,participation");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.0000000000000000e0,1,"));
        assert!(lines[1].ends_with(",1.0000000000000000e0"));
    }
}
