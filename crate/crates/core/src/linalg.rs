//! Small dense linear-algebra helpers: compensated sums, stabilized
//! Gram-Schmidt on tangent frames, and SVD-based singular values.

use nalgebra::DMatrix;

use crate::tangent::TangentHV;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Orthonormalizes `frame` in place and returns the diagonal of the
/// triangular factor, which is positive by construction.
pub fn gram_schmidt(frame: &mut [TangentHV]) -> Vec<f64> {
    let mut diag = Vec::with_capacity(frame.len());
    for j in 0..frame.len() {
        let (done, rest) = frame.split_at_mut(j);
        let current = &mut rest[0];
        for _pass in 0..2 {
            for basis in done.iter() {
                let c = current.dot(basis);
                current.axpy(-c, basis);
            }
        }
        let r = current.norm();
        if r > 0.0 {
            current.scale(1.0 / r);
        }
        diag.push(r);
    }
    diag
}

/// Singular values of `m`, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Orthonormal basis of the orthogonal complement of `w` (length `n`),
/// read off a Householder reflection that maps `w` onto a coordinate axis.
/// Returns `None` if `w` vanishes.
pub fn complement_basis(w: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = w.len();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut u: Vec<f64> = w.iter().map(|x| x / norm).collect();
    // u - sign(u_0) e_0 avoids cancellation.
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign;
    let unorm2: f64 = u.iter().map(|x| x * x).sum();
    // Columns 1..n of H = I - 2 u u^T / |u|^2 span the complement of w.
    let basis = (1..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let id = if i == k { 1.0 } else { 0.0 };
                    id - 2.0 * u[i] * u[k] / unorm2
                })
                .collect()
        })
        .collect();
    Some(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = CompensatedSum::default();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let mut frame = vec![
            TangentHV {
                dh: vec![1.0, 1.0],
                dv: vec![0.0, 0.0],
            },
            TangentHV {
                dh: vec![1.0, 1.0 + 1e-9],
                dv: vec![0.0, 1e-9],
            },
        ];
        let r = gram_schmidt(&mut frame);
        assert!((r[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(r[1] > 0.0);
        assert!(frame[0].dot(&frame[1]).abs() < 1e-15);
        assert!((frame[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_is_orthonormal() {
        for w in [vec![1.0, 1.0], vec![-0.3, 2.0, 0.5], vec![0.0, 0.0, 1.0, -2.0]] {
            let b = complement_basis(&w).unwrap();
            assert_eq!(b.len(), w.len() - 1);
            for (i, x) in b.iter().enumerate() {
                let along: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                assert!(along.abs() < 1e-14);
                for (j, y) in b.iter().enumerate() {
                    let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
        assert!(complement_basis(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn singular_values_sorted() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(singular_values(&m), vec![3.0, 1.0]);
    }
}
