//! Singular value decomposition of `d x 2` matrices.

use super::{eig_hermitian, ComplexMatrix, HermitianMatrix, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Svd {
    /// `d x d` unitary.
    pub u: ComplexMatrix,
    /// Descending, length 2 (a `d x 1` input pads the second value with 0).
    pub singular_values: [f64; 2],
    /// `2 x 2` unitary.
    pub v: ComplexMatrix,
}

impl Svd {
    /// The `d x 2` rectangular diagonal factor.
    pub fn d(&self) -> ComplexMatrix {
        let d = self.u.rows();
        let mut m = ComplexMatrix::zeros(d, 2);
        for k in 0..2.min(d) {
            m[(k, k)] = C64::new(self.singular_values[k], 0.0);
        }
        m
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.u.matmul(&self.d()).matmul(&self.v.adjoint())
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extend orthonormal columns to a full unitary by Gram-Schmidt over the
/// standard basis.
fn complete_unitary(mut cols: Vec<Vec<C64>>, d: usize) -> ComplexMatrix {
    let mut e = 0;
    while cols.len() < d && e < d {
        let mut x = vec![C64::new(0.0, 0.0); d];
        x[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for u in &cols {
                let p = dot(u, &x);
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi -= p * ui;
                }
            }
        }
        let n = nrm(&x);
        if n > 1e-6 {
            cols.push(x.iter().map(|z| z / n).collect());
        }
        e += 1;
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}

pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    if m.cols() != 2 {
        return Err(Error::Dimension(format!(
            "svd expects a d x 2 matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.as_slice()
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let d = m.rows();
    let gram = HermitianMatrix::symmetrized(&m.adjoint().matmul(m));
    let e = eig_hermitian(&gram);
    // descending order: larger singular value first
    let mut vcols: Vec<Vec<C64>> = vec![e.vectors.column(1), e.vectors.column(0)];
    let mut s: Vec<f64> = vcols
        .iter()
        .map(|v| {
            nrm(&(0..d)
                .map(|i| m[(i, 0)] * v[0] + m[(i, 1)] * v[1])
                .collect::<Vec<_>>())
        })
        .collect();
    if s[1] > s[0] {
        s.swap(0, 1);
        vcols.swap(0, 1);
    }
    let tiny = 1e-14 * s[0].max(1e-300);
    let mut ucols: Vec<Vec<C64>> = Vec::new();
    for k in 0..2.min(d) {
        if s[k] <= tiny {
            s[k] = 0.0;
            continue;
        }
        let v = &vcols[k];
        let mut u: Vec<C64> = (0..d)
            .map(|i| (m[(i, 0)] * v[0] + m[(i, 1)] * v[1]) / s[k])
            .collect();
        for prev in &ucols {
            let p = dot(prev, &u);
            for (ui, pi) in u.iter_mut().zip(prev) {
                *ui -= p * pi;
            }
        }
        let n = nrm(&u);
        ucols.push(u.iter().map(|z| z / n).collect());
    }
    if d == 1 {
        s[1] = 0.0;
    }
    let u = complete_unitary(ucols, d);
    let v = ComplexMatrix::from_fn(2, 2, |i, j| vcols[j][i]);
    Ok(Svd {
        u,
        singular_values: [s[0], s[1]],
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::r;

    #[test]
    fn identity() {
        let s = svd(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(s.singular_values, [1.0, 1.0]);
        assert!(s.reconstruct().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn diagonal_values_descend() {
        let m = ComplexMatrix::diag(&[1.0, 2.0]);
        let s = svd(&m).unwrap();
        assert!((s.singular_values[0] - 2.0).abs() < 1e-15);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-15);
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn rank_one_and_single_row() {
        let m =
            ComplexMatrix::new(3, 2, vec![r(1.0), r(2.0), r(2.0), r(4.0), r(0.0), r(0.0)]).unwrap();
        let s = svd(&m).unwrap();
        assert_eq!(s.singular_values[1], 0.0);
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-13);
        let row = ComplexMatrix::new(1, 2, vec![r(3.0), r(4.0)]).unwrap();
        let s = svd(&row).unwrap();
        assert!((s.singular_values[0] - 5.0).abs() < 1e-14);
        assert!(s.reconstruct().max_abs_diff(&row) < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let s = svd(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.singular_values, [0.0, 0.0]);
        let g = s.u.adjoint().matmul(&s.u);
        assert!(g.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn rejects_wrong_shape() {
        assert!(svd(&ComplexMatrix::identity(3)).is_err());
    }
}
