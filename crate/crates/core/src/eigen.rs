//! Cyclic Jacobi diagonalization of small complex Hermitian matrices.
//!
//! The n×n Hermitian `H = A + iB` is embedded as the 2n×2n real symmetric
//! matrix `[[A, -B], [B, A]]`. Every eigenvalue of `H` appears twice in the
//! embedding, and the real projector onto a doubled eigenspace has the block
//! form `[[Re P, -Im P], [Im P, Re P]]`, so the complex projector is read off
//! the left column of blocks.

use crate::hilbert::{Basis, OperatorMatrix, C64};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and column eigenvectors of a real symmetric
/// matrix stored row-major.
pub(crate) fn jacobi_symmetric(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + col] = v[r * n + k];
        }
    }
    (values, vectors)
}

/// Spectral pairs of a Hermitian operator, eigenvalues ascending, clusters
/// closer than `merge_gap` merged into one projector.
pub(crate) fn hermitian_spectrum(
    op: &OperatorMatrix,
    basis: &Basis,
    merge_gap: f64,
) -> Vec<(f64, OperatorMatrix)> {
    let n = basis.dim();
    let m = 2 * n;
    let mut real = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            // Symmetrize so tiny Hermiticity defects do not leak in.
            let z = (op.get(r, c) + op.get(c, r).conj()) * 0.5;
            real[r * m + c] = z.re;
            real[(r + n) * m + (c + n)] = z.re;
            real[r * m + (c + n)] = -z.im;
            real[(r + n) * m + c] = z.im;
        }
    }
    let (values, vectors) = jacobi_symmetric(real, m);

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..m {
        match clusters.last_mut() {
            Some(cl) if values[k] - values[*cl.last().unwrap()] < merge_gap => cl.push(k),
            _ => clusters.push(vec![k]),
        }
    }

    clusters
        .into_iter()
        .map(|cl| {
            let eigenvalue = cl.iter().map(|&k| values[k]).sum::<f64>() / cl.len() as f64;
            // Real projector block entries: P_R[r][c] = Σ v[r]v[c] over the cluster.
            let pr = |r: usize, c: usize| -> f64 {
                cl.iter()
                    .map(|&k| vectors[r * m + k] * vectors[c * m + k])
                    .sum()
            };
            let proj = OperatorMatrix::from_fn(basis.clone(), basis.clone(), |r, c| {
                C64::new(pr(r, c), pr(r + n, c))
            });
            (eigenvalue, proj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_jacobi_diagonalizes_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (vals, vecs) = jacobi_symmetric(vec![2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let dot = vecs[0] * vecs[1] + vecs[2] * vecs[3];
        assert!(dot.abs() < 1e-14);
    }

    #[test]
    fn real_jacobi_handles_diagonal_input() {
        let (vals, _) = jacobi_symmetric(vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0], 3);
        assert_eq!(vals, vec![-1.0, 1.0, 3.0]);
    }

    #[test]
    fn complex_spectrum_pauli_y() {
        let b = Basis::new(["0", "1"]).unwrap();
        let y = OperatorMatrix::square(
            b.clone(),
            vec![
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let spec = hermitian_spectrum(&y, &b, 1e-8);
        assert_eq!(spec.len(), 2);
        assert!((spec[0].0 + 1.0).abs() < 1e-12);
        assert!((spec[1].0 - 1.0).abs() < 1e-12);
        // Projector onto (|0⟩ + i|1⟩)/√2 for eigenvalue +1.
        let p = &spec[1].1;
        assert!((p.get(0, 0) - C64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((p.get(1, 0) - C64::new(0.0, 0.5)).norm() < 1e-12);
    }
}
