//! Hermitian eigendecomposition via cyclic Jacobi on the real embedding
//! `[[Re H, -Im H], [Im H, Re H]]`.

use super::{ComplexMatrix, HermitianMatrix, C64};

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unitary; column `k` pairs with `values[k]`.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let d = ComplexMatrix::diag(&self.values);
        debug_assert_eq!(d.rows(), n);
        self.vectors.conjugate(&d)
    }
}

/// Eigenvalues and eigenvectors of a real symmetric matrix stored row-major.
/// Eigenvalues are returned unsorted; `v` holds eigenvectors as columns.
pub(crate) fn jacobi_symmetric(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

fn residual_after(accepted: &[Vec<C64>], x: &[C64]) -> Vec<C64> {
    let mut r = x.to_vec();
    // two passes of Gram-Schmidt keep the basis orthonormal to working precision
    for _ in 0..2 {
        for u in accepted {
            let proj: C64 = u.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
            for (ri, ui) in r.iter_mut().zip(u) {
                *ri -= proj * ui;
            }
        }
    }
    r
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn eig_hermitian(h: &HermitianMatrix) -> Eigen {
    let m = h.matrix();
    let n = m.rows();
    let nn = 2 * n;
    let mut a = vec![0.0; nn * nn];
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            a[i * nn + j] = z.re;
            a[(i + n) * nn + (j + n)] = z.re;
            a[i * nn + (j + n)] = -z.im;
            a[(i + n) * nn + j] = z.im;
        }
    }
    let (vals, vecs) = jacobi_symmetric(&mut a, nn);
    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));

    // Each complex eigenvector v appears twice in the embedding, as v and i v.
    // Keep one representative per complex direction.
    let candidates: Vec<Vec<C64>> = order
        .iter()
        .map(|&k| {
            (0..n)
                .map(|i| C64::new(vecs[i * nn + k], vecs[(i + n) * nn + k]))
                .collect()
        })
        .collect();
    let mut used = vec![false; nn];
    let mut accepted: Vec<Vec<C64>> = Vec::with_capacity(n);
    for (j, cand) in candidates.iter().enumerate() {
        if accepted.len() == n {
            break;
        }
        let r = residual_after(&accepted, cand);
        let rn = norm(&r);
        if rn > 0.5 {
            accepted.push(r.iter().map(|z| z / rn).collect());
            used[j] = true;
        }
    }
    while accepted.len() < n {
        let (j, r, rn) = candidates
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, c)| {
                let r = residual_after(&accepted, c);
                let rn = norm(&r);
                (j, r, rn)
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .expect("embedding has 2n candidates");
        used[j] = true;
        accepted.push(r.iter().map(|z| z / rn).collect());
    }

    let mut pairs: Vec<(f64, Vec<C64>)> = accepted
        .into_iter()
        .map(|v| {
            let hv = (0..n)
                .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum::<C64>())
                .collect::<Vec<_>>();
            let lam: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
            (lam, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Eigen {
        values: pairs.iter().map(|p| p.0).collect(),
        vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, r};

    fn check(h: &HermitianMatrix) -> Eigen {
        let e = eig_hermitian(h);
        assert!(e.reconstruct().max_abs_diff(h.matrix()) < 1e-12);
        let n = h.dim();
        let g = e.vectors.adjoint().matmul(&e.vectors);
        assert!(g.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        e
    }

    #[test]
    fn identity_spectrum() {
        let e = check(&HermitianMatrix::identity(4));
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let e = check(&HermitianMatrix::diag(&[0.4, 0.1, 0.3, 0.2]));
        for (a, b) in e.values.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pauli_y_has_complex_eigenvectors() {
        let m = ComplexMatrix::new(2, 2, vec![r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)]).unwrap();
        let e = check(&HermitianMatrix::new(m).unwrap());
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_complex_spectrum() {
        // (I + Y) (x) I has eigenvalues 0, 0, 2, 2 with complex eigenvectors
        let y = ComplexMatrix::new(2, 2, vec![r(1.0), c(0.0, -1.0), c(0.0, 1.0), r(1.0)]).unwrap();
        let m = y.kron(&ComplexMatrix::identity(2));
        let e = check(&HermitianMatrix::new(m).unwrap());
        for (a, b) in e.values.iter().zip([0.0, 0.0, 2.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
