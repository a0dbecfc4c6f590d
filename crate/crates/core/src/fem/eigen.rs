//! Shift-invert subspace iteration for the generalized eigenvalues closest to zero.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Sorted by magnitude.
    pub values: Vec<f64>,
    /// `M`-normalized vectors.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A v = μ M v` for the `count` eigenvalues of smallest magnitude with
/// `A` symmetric and `M` symmetric positive definite. `solve_a` applies `A⁻¹`.
pub fn nearest_zero(
    n: usize,
    count: usize,
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m: impl Fn(&[f64]) -> Vec<f64>,
    solve_a: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPairs> {
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!("cannot extract {count} eigenpairs from dimension {n}")));
    }
    let p = (count + 4).min(n);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|k| (0..n).map(|i| ((i as f64 + 1.0) * (0.618_033_988 * (k + 1) as f64) + k as f64).sin()).collect())
        .collect();
    let mut prev = vec![f64::INFINITY; count];
    for it in 1..=max_iter {
        let mut y: Vec<Vec<f64>> = x.iter().map(|v| solve_a(&apply_m(v))).collect();
        // M-orthonormalize, twice for stability
        let mut my: Vec<Vec<f64>> = Vec::with_capacity(p);
        for _pass in 0..2 {
            my.clear();
            for k in 0..p {
                for j in 0..k {
                    let c = dot(&y[k], &my[j]);
                    let (head, tail) = y.split_at_mut(k);
                    for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                        *a -= c * b;
                    }
                }
                let mk = apply_m(&y[k]);
                let nrm = dot(&y[k], &mk).max(0.0).sqrt();
                if !(nrm > 0.0) {
                    return Err(Error::Eigen("subspace collapsed".into()));
                }
                y[k].iter_mut().for_each(|v| *v /= nrm);
                my.push(mk.into_iter().map(|v| v / nrm).collect());
            }
        }
        let ay: Vec<Vec<f64>> = y.iter().map(|v| apply_a(v)).collect();
        let ar = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
        let eig = SymmetricEigen::new(ar);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].abs().partial_cmp(&eig.eigenvalues[b].abs()).unwrap());
        let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        x = order
            .iter()
            .map(|&k| {
                let mut v = vec![0.0; n];
                for j in 0..p {
                    let c = eig.eigenvectors[(j, k)];
                    for (a, b) in v.iter_mut().zip(&y[j]) {
                        *a += c * b;
                    }
                }
                v
            })
            .collect();
        let scale = vals[count - 1].abs().max(f64::MIN_POSITIVE);
        let change = (0..count).map(|i| (vals[i] - prev[i]).abs()).fold(0.0, f64::max) / scale;
        prev.copy_from_slice(&vals[..count]);
        if change < tol {
            return Ok(EigenPairs { values: vals[..count].to_vec(), vectors: x[..count].to_vec(), iterations: it });
        }
    }
    Err(Error::Eigen(format!("no convergence in {max_iter} subspace iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        // A = diag(d), M = I with eigenvalues of both signs
        let d: Vec<f64> = (0..40).map(|i| i as f64 - 7.3).collect();
        let r = nearest_zero(
            40,
            3,
            |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(),
            |x| x.to_vec(),
            |x| x.iter().zip(&d).map(|(a, b)| a / b).collect(),
            1e-12,
            200,
        )
        .unwrap();
        assert!((r.values[0] + 0.3).abs() < 1e-10);
        assert!((r.values[1] - 0.7).abs() < 1e-10);
        assert!((r.values[2] + 1.3).abs() < 1e-10);
    }
}
