//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Symmetrizes `m` in place as `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Spectral norm of a general matrix (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Spectral norm of `I - eta*G` for symmetric `G`, via the eigenvalues of `G`.
pub fn contraction_factor(g: &DMatrix<f64>, eta: f64) -> f64 {
    sym_eigenvalues(g)
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max((1.0 - eta * l).abs()))
}

/// Solves `a x = b` for symmetric positive definite `a`, falling back to LU.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

/// Stabilizing solution of the discrete algebraic Riccati equation by fixed-point
/// iteration of the Riccati difference equation.
///
/// Returns the last iterate together with a convergence flag; when the pair is not
/// stabilizable the iterate is still the finite-horizon cost-to-go after `max_iters`
/// steps, which is a valid terminal weight.
pub fn dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    max_iters: usize,
    tol: f64,
) -> (DMatrix<f64>, bool) {
    let mut p = q.clone();
    for _ in 0..max_iters {
        let bt_p = b.transpose() * &p;
        let s = r + &bt_p * b;
        let k = match spd_solve(&s, &(&bt_p * a)) {
            Some(k) => k,
            None => return (p, false),
        };
        let mut next = q + a.transpose() * &p * a - a.transpose() * p.transpose() * b * &k;
        symmetrize(&mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return (p, false);
        }
        let delta = (&next - &p).norm();
        let scale = next.norm().max(1.0);
        p = next;
        if delta <= tol * scale {
            return (p, true);
        }
    }
    (p, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        assert_eq!(sym_eigenvalues(&m), vec![1.0, 4.0]);
    }

    #[test]
    fn contraction_factor_matches_definition() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert!((contraction_factor(&g, 0.5) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn dare_scalar_closed_form() {
        // p = q + a²p - a²b²p²/(r + b²p); a=b=q=r=1 -> p = (1+sqrt5)/2
        let one = DMatrix::from_element(1, 1, 1.0);
        let (p, ok) = dare(&one, &one, &one, &one, 500, 1e-14);
        assert!(ok);
        assert!((p[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
    }
}
