//! Non-negative least squares (Lawson-Hanson active set).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `a x = b` on the passive columns, zero
/// elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
    let svd = sub.svd(true, true);
    let eps = 1e-14 * svd.singular_values.max();
    let z_sub = svd.solve(b, eps).expect("u and v were computed");
    let mut z = DVector::zeros(a.ncols());
    for (k, &j) in cols.iter().enumerate() {
        z[j] = z_sub[k];
    }
    z
}

/// Minimizes `|a x - b|_2` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let max_iter = 30 * (n + 1);
    let tol = 10.0 * f64::EPSILON * a.norm() * a.nrows().max(n) as f64;
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    // Columns whose own passive solve came out non-positive; under
    // roundoff they would re-enter forever. Cleared whenever `x` moves.
    let mut rejected = vec![false; n];
    let mut iter = 0;

    loop {
        let w = a.transpose() * (b - a * &x);
        let entering = (0..n)
            .filter(|&j| !passive[j] && !rejected[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = entering else { break };
        passive[j] = true;
        if solve_passive(a, b, &passive)[j] <= 0.0 {
            passive[j] = false;
            rejected[j] = true;
            continue;
        }
        rejected.fill(false);

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::Numerical(format!(
                    "non-negative least squares did not converge in {max_iter} iterations"
                )));
            }
            let z = solve_passive(a, b, &passive);
            let blocking: Vec<usize> = (0..n).filter(|&k| passive[k] && z[k] <= 0.0).collect();
            if blocking.is_empty() {
                x = z;
                break;
            }
            let (leaving, alpha) = blocking
                .iter()
                .map(|&k| (k, x[k] / (x[k] - z[k])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("blocking set is non-empty");
            x += alpha * (&z - &x);
            x[leaving] = 0.0;
            for k in 0..n {
                if passive[k] && x[k] <= 0.0 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_solution_is_plain_least_squares() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_component() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 0.5]);
        let x = nnls(&a, &b).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn satisfies_kkt_conditions() {
        let a = DMatrix::from_row_slice(4, 3, &[
            1.0, 2.0, 0.5, //
            0.3, 1.0, 2.0, //
            2.0, 0.1, 1.0, //
            0.5, 0.5, 0.5,
        ]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.1]);
        let x = nnls(&a, &b).unwrap();
        let grad = a.transpose() * (&b - &a * &x);
        for j in 0..3 {
            assert!(x[j] >= 0.0);
            if x[j] > 0.0 {
                assert!(grad[j].abs() < 1e-10);
            } else {
                assert!(grad[j] < 1e-10);
            }
        }
    }
}
