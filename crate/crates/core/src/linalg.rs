//! Dense symmetric positive-definite linear algebra in packed storage.
//!
//! The matrix stores only the lower triangle, row-major: entry `(i, j)` with
//! `i >= j` lives at `data[i * (i + 1) / 2 + j]`. All arithmetic is double
//! precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix not positive definite: pivot {index} is {value:.6e}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("conjugate gradient breakdown: p'Ap = {value:.6e} at iteration {iteration}")]
    Breakdown { iteration: usize, value: f64 },
}

/// Symmetric matrix of order `n` holding only its lower triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PackedSymMatrix {
    pub fn zeros(n: usize) -> Self {
        PackedSymMatrix {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    /// Wraps an existing packed lower triangle (row-major).
    pub fn from_packed(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        let expected = n * (n + 1) / 2;
        if data.len() != expected {
            return Err(LinalgError::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(PackedSymMatrix { n, data })
    }

    /// Builds from dense rows, reading the lower triangle.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = PackedSymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = PackedSymMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        debug_assert!(j <= i);
        i * (i + 1) / 2 + j
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.data[Self::idx(i, j)]
        } else {
            self.data[Self::idx(j, i)]
        }
    }

    /// Sets the lower-triangle entry `(i, j)`, `i >= j`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[Self::idx(i, j)] = v;
    }

    /// Stored row `i` of the lower triangle (length `i + 1`).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The principal submatrix with row and column `drop` removed. Each kept
    /// row is two contiguous copies, so cross-validation folds can reuse one
    /// assembled matrix instead of re-evaluating kernels.
    pub fn minor(&self, drop: usize) -> PackedSymMatrix {
        assert!(drop < self.n && self.n > 1);
        let mut out = PackedSymMatrix::zeros(self.n - 1);
        let mut at = 0;
        for i in 0..self.n {
            if i == drop {
                continue;
            }
            let row = self.row(i);
            if i < drop {
                out.data[at..at + row.len()].copy_from_slice(row);
                at += row.len();
            } else {
                let (lo, hi) = (&row[..drop], &row[drop + 1..]);
                out.data[at..at + lo.len()].copy_from_slice(lo);
                at += lo.len();
                out.data[at..at + hi.len()].copy_from_slice(hi);
                at += hi.len();
            }
        }
        out
    }
}

/// Cholesky factorization `a = L L^T`, returning the packed lower factor.
pub fn cholesky_factor(a: &PackedSymMatrix) -> Result<PackedSymMatrix, LinalgError> {
    let n = a.order();
    let mut l = a.clone();
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        // row i starts at ri; every earlier row lives fully below it, so the
        // split borrows them simultaneously and keeps the inner dot on plain
        // slices
        let (head, tail) = l.data.split_at_mut(ri);
        let row_i = &mut tail[..=i];
        for j in 0..i {
            let rj = j * (j + 1) / 2;
            let row_j = &head[rj..rj + j + 1];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let s = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if s <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: i, value: s });
        }
        row_i[i] = s.sqrt();
    }
    Ok(l)
}

/// Forward and back substitution with a packed lower Cholesky factor.
pub fn solve_with_factor(l: &PackedSymMatrix, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = l.order();
    if v.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    // L z = v
    let mut z = v.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut s = z[i];
        for k in 0..i {
            s -= row[k] * z[k];
        }
        z[i] = s / row[i];
    }
    // L^T u = z, eliminating with the contiguous rows of L
    for i in (0..n).rev() {
        let row = l.row(i);
        let ui = z[i] / row[i];
        z[i] = ui;
        for k in 0..i {
            z[k] -= row[k] * ui;
        }
    }
    Ok(z)
}

/// Solves `a u = v` by Cholesky factorization and two triangular solves.
pub fn solve_direct(a: &PackedSymMatrix, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if v.len() != a.order() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.order(),
            found: v.len(),
        });
    }
    let l = cholesky_factor(a)?;
    solve_with_factor(&l, v)
}

/// Symmetric matrix-vector product over packed storage. Each stored row is
/// traversed once, accumulating both the diagonal-and-below term and the
/// mirrored upper-triangle contribution.
pub fn matvec(a: &PackedSymMatrix, p: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.order();
    if p.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: p.len(),
        });
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = a.row(i);
        let pi = p[i];
        // split the symmetric contribution into a dot and an axpy so both
        // stay on plain slices
        let yi = dot(&row[..i], &p[..i]);
        for (yj, rj) in y[..i].iter_mut().zip(&row[..i]) {
            *yj += rj * pi;
        }
        y[i] += yi + row[i] * pi;
    }
    Ok(y)
}

/// Conjugate gradient stopping configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Threshold on the two-norm of the residual.
    pub epsilon: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl CgConfig {
    pub fn new(epsilon: f64, max_iter: usize) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        assert!(max_iter >= 1, "max_iter must be at least 1");
        CgConfig { epsilon, max_iter }
    }
}

/// Outcome of a conjugate gradient solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgResult {
    pub u: Vec<f64>,
    /// Iterations performed (solution updates).
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// True when the residual criterion fired before the iteration cap.
    pub converged: bool,
    /// Recurrence residual norms: entry 0 is the initial residual, then one
    /// per iteration.
    pub residual_norms: Vec<f64>,
}

/// Conjugate gradient for `a u = v`. The initial guess defaults to zero.
///
/// The exit check uses the recurrence residual, applied after each residual
/// update and before the direction update.
pub fn cg_solve(
    a: &PackedSymMatrix,
    v: &[f64],
    cfg: &CgConfig,
    u0: Option<&[f64]>,
) -> Result<CgResult, LinalgError> {
    let n = a.order();
    if v.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if let Some(u0) = u0 {
        if u0.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: u0.len(),
            });
        }
    }

    let mut u = u0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = match u0 {
        Some(_) => {
            let au = matvec(a, &u)?;
            v.iter().zip(&au).map(|(vi, ai)| vi - ai).collect::<Vec<_>>()
        }
        None => v.to_vec(),
    };
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut residual_norms = vec![rr.sqrt()];

    if rr.sqrt() < cfg.epsilon {
        return Ok(CgResult {
            u,
            iterations: 0,
            final_residual_norm: rr.sqrt(),
            converged: true,
            residual_norms,
        });
    }

    let mut iterations = 0;
    let converged = loop {
        let ap = matvec(a, &p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::Breakdown {
                iteration: iterations,
                value: pap,
            });
        }
        let alpha = rr / pap;
        for (ui, pi) in u.iter_mut().zip(&p) {
            *ui += alpha * pi;
        }
        for (ri, api) in r.iter_mut().zip(&ap) {
            *ri -= alpha * api;
        }
        let rr_new = dot(&r, &r);
        iterations += 1;
        residual_norms.push(rr_new.sqrt());
        if rr_new.sqrt() < cfg.epsilon {
            break true;
        }
        if iterations >= cfg.max_iter {
            break false;
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    };

    let final_residual_norm = *residual_norms.last().unwrap();
    Ok(CgResult {
        u,
        iterations,
        final_residual_norm,
        converged,
        residual_norms,
    })
}

#[inline]
// Four running sums so the reduction vectorizes; a plain fold is a serial
// dependency chain the compiler must preserve.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let chunks = a.len() / 4 * 4;
    let mut acc = [0.0f64; 4];
    for (pa, pb) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += pa[0] * pb[0];
        acc[1] += pa[1] * pb[1];
        acc[2] += pa[2] * pb[2];
        acc[3] += pa[3] * pb[3];
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        s += x * y;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(n: usize, seed: u64) -> PackedSymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = PackedSymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        // Diagonal shift keeps the spectrum comfortably positive.
        for i in 0..n {
            let d = m.get(i, i);
            m.set(i, i, d + n as f64);
        }
        m
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky_factor(&PackedSymMatrix::identity(3)).unwrap();
        assert_eq!(l, PackedSymMatrix::identity(3));
    }

    #[test]
    fn cholesky_hand_2x2() {
        let a = PackedSymMatrix::from_dense(&[vec![4.0, 2.0], vec![2.0, 5.0]]);
        let l = cholesky_factor(&a).unwrap();
        assert_relative_eq!(l.get(0, 0), 2.0);
        assert_relative_eq!(l.get(1, 0), 1.0);
        assert_relative_eq!(l.get(1, 1), 2.0);
        // L L^T reconstructs a; the factor shares the packed layout, so only
        // k <= min(i, j) indexes true lower-triangle entries
        for i in 0..2 {
            for j in 0..2 {
                let r: f64 = (0..=i.min(j)).map(|k| l.get(i, k) * l.get(j, k)).sum();
                assert_relative_eq!(r, a.get(i, j), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_indefinite_rejected() {
        let a = PackedSymMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky_factor(&a),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cholesky_reconstruction_random() {
        for seed in 0..4 {
            let n = 32 + 24 * seed as usize;
            let a = random_spd(n, seed);
            let l = cholesky_factor(&a).unwrap();
            let scale = a.max_abs();
            for i in 0..n {
                for j in 0..=i {
                    let r: f64 = (0..=j).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    assert!((r - a.get(i, j)).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn solve_direct_identity() {
        let u = solve_direct(&PackedSymMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_direct_hand_2x2() {
        let a = PackedSymMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let u = solve_direct(&a, &[1.0, 2.0]).unwrap();
        assert_relative_eq!(u[0], 1.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(u[1], 7.0 / 11.0, max_relative = 1e-12);
    }

    #[test]
    fn solve_direct_residual_50() {
        let a = random_spd(50, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = solve_direct(&a, &v).unwrap();
        let au = matvec(&a, &u).unwrap();
        let res: f64 = au
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let vn = dot(&v, &v).sqrt();
        assert!(res <= 1e-10 * vn, "residual {res} too large");
    }

    #[test]
    fn solve_dimension_mismatch() {
        let a = PackedSymMatrix::identity(3);
        assert!(matches!(
            solve_direct(&a, &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matvec_cases() {
        let id = PackedSymMatrix::identity(2);
        assert_eq!(matvec(&id, &[5.0, 6.0]).unwrap(), vec![5.0, 6.0]);

        let a = PackedSymMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap(), vec![5.0, 4.0]);

        let z = PackedSymMatrix::zeros(3);
        assert_eq!(matvec(&z, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn matvec_reproduces_columns() {
        let a = random_spd(12, 3);
        let dense = a.to_dense();
        for i in 0..12 {
            let mut e = vec![0.0; 12];
            e[i] = 1.0;
            let col = matvec(&a, &e).unwrap();
            for j in 0..12 {
                assert_relative_eq!(col[j], dense[j][i]);
            }
        }
    }

    #[test]
    fn cg_identity_one_step() {
        let cfg = CgConfig::new(1e-8, 10);
        let r = cg_solve(&PackedSymMatrix::identity(2), &[1.0, 2.0], &cfg, None).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_relative_eq!(r.u[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(r.u[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn cg_2x2_exact_in_two() {
        let a = PackedSymMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let cfg = CgConfig::new(1e-12, 2);
        let r = cg_solve(&a, &[1.0, 2.0], &cfg, None).unwrap();
        assert!(r.iterations <= 2);
        assert_relative_eq!(r.u[0], 1.0 / 11.0, max_relative = 1e-8);
        assert_relative_eq!(r.u[1], 7.0 / 11.0, max_relative = 1e-8);
    }

    #[test]
    fn cg_matches_direct_100() {
        let a = random_spd(100, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let v: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = CgConfig::new(1e-10, 100);
        let r = cg_solve(&a, &v, &cfg, None).unwrap();
        let d = solve_direct(&a, &v).unwrap();
        let num: f64 = r
            .u
            .iter()
            .zip(&d)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let den = dot(&d, &d).sqrt();
        assert!(num / den <= 1e-8);
    }

    #[test]
    fn cg_breakdown_on_indefinite() {
        let a = PackedSymMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let cfg = CgConfig::new(1e-10, 10);
        let r = cg_solve(&a, &[1.0, -1.0], &cfg, None);
        assert!(matches!(r, Err(LinalgError::Breakdown { .. })));
    }

    #[test]
    fn cg_respects_iteration_cap() {
        let a = random_spd(40, 5);
        let v = vec![1.0; 40];
        let cfg = CgConfig::new(1e-30, 3);
        let r = cg_solve(&a, &v, &cfg, None).unwrap();
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);
        assert_eq!(r.residual_norms.len(), 4);
    }

    #[test]
    fn cg_residual_history_is_recurrence() {
        // History entries are the recurrence norms sqrt(r_k' r_k), which the
        // exit check also uses: the last entry must match final_residual_norm
        // and be strictly below epsilon on convergence.
        let a = random_spd(30, 9);
        let v = vec![1.0; 30];
        let cfg = CgConfig::new(1e-10, 30);
        let r = cg_solve(&a, &v, &cfg, None).unwrap();
        assert!(r.converged);
        assert_eq!(*r.residual_norms.last().unwrap(), r.final_residual_norm);
        assert!(r.final_residual_norm < cfg.epsilon);
        assert_eq!(r.residual_norms.len(), r.iterations + 1);
    }
}
