//! Dense complex linear algebra helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Singular value decomposition with the full right basis and
/// singular values sorted in decreasing order.
///
/// `u` is `rows x cols`, `v` is `cols x cols`; only the first
/// `min(rows, cols)` columns of `u` carry information.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn is_real_vec(v: &CVec) -> bool {
    v.iter().all(|z| z.im == 0.0)
}

impl FullSvd {
    pub fn new(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        if cols == 0 {
            return FullSvd {
                u: CMat::zeros(rows, 0),
                sigma: vec![],
                v: CMat::zeros(0, 0),
            };
        }
        // Pad with zero rows so the thin decomposition returns a complete right basis.
        let padded_rows = rows.max(cols);
        let (u, sigma, v) = if is_real(m) {
            let mut a = DMatrix::<f64>::zeros(padded_rows, cols);
            a.view_mut((0, 0), (rows, cols)).copy_from(&m.map(|z| z.re));
            let svd = a.svd(true, true);
            let u = svd.u.expect("u requested").map(|x| Complex64::new(x, 0.0));
            let v = svd
                .v_t
                .expect("v_t requested")
                .transpose()
                .map(|x| Complex64::new(x, 0.0));
            (
                u,
                svd.singular_values.iter().copied().collect::<Vec<_>>(),
                v,
            )
        } else {
            let mut a = CMat::zeros(padded_rows, cols);
            a.view_mut((0, 0), (rows, cols)).copy_from(m);
            let svd = a.svd(true, true);
            let u = svd.u.expect("u requested");
            let v = svd.v_t.expect("v_t requested").adjoint();
            (
                u,
                svd.singular_values.iter().copied().collect::<Vec<_>>(),
                v,
            )
        };

        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
        let mut su = CMat::zeros(rows, cols);
        let mut sv = CMat::zeros(cols, cols);
        let mut ss = Vec::with_capacity(cols);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &u.column(src).rows(0, rows));
            sv.set_column(dst, &v.column(src));
            ss.push(sigma[src]);
        }
        FullSvd {
            u: su,
            sigma: ss,
            v: sv,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol * sigma_max`, counting only
    /// those that can be nonzero (at most `min(rows, cols)`).
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.sigma_max();
        let limit = self.u.nrows().min(self.v.nrows());
        self.sigma
            .iter()
            .take(limit)
            .filter(|&&s| s > cutoff && s > 0.0)
            .count()
    }

    /// Orthonormal basis of the numerical nullspace for the given rank.
    pub fn kernel(&self, rank: usize) -> CMat {
        let n = self.v.ncols();
        self.v.columns(rank, n - rank).into_owned()
    }

    /// Minimum-norm least-squares solution restricted to the leading `rank` triplets.
    pub fn solve_min_norm(&self, b: &CVec, rank: usize) -> CVec {
        let mut x = CVec::zeros(self.v.nrows());
        for i in 0..rank {
            let coef = self.u.column(i).dotc(b) / self.sigma[i];
            x.axpy(coef, &self.v.column(i), Complex64::new(1.0, 0.0));
        }
        x
    }
}

/// Ratio of smallest to largest singular value of a square matrix (1 for the empty matrix).
pub fn singular_value_ratio(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Minimum-norm least squares with a relative singular value cutoff.
pub fn lstsq(m: &CMat, b: &CVec, rel_tol: f64) -> CVec {
    let svd = FullSvd::new(m);
    let rank = svd.rank(rel_tol);
    svd.solve_min_norm(b, rank)
}

pub fn norm(v: &CVec) -> f64 {
    v.norm()
}

/// Operator 2-norm estimate (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn full_svd_of_wide_matrix_has_complete_kernel() {
        let m = CMat::from_row_slice(1, 3, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)]);
        let svd = FullSvd::new(&m);
        assert_eq!(svd.rank(1e-12), 1);
        let k = svd.kernel(1);
        assert_eq!(k.shape(), (3, 2));
        assert!((&m * &k).norm() < 1e-13);
        let gram = k.adjoint() * &k;
        assert!((gram - CMat::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_kernel() {
        let m = CMat::from_row_slice(
            2,
            3,
            &[
                c(1.0, 0.0),
                c(0.0, 1.0),
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(0.0, 2.0),
                c(2.0, 0.0),
            ],
        );
        let b = CVec::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let svd = FullSvd::new(&m);
        let r = svd.rank(1e-12);
        assert_eq!(r, 1);
        let x = svd.solve_min_norm(&b, r);
        assert!((&m * &x - &b).norm() < 1e-13);
        assert!((svd.kernel(r).adjoint() * &x).norm() < 1e-13);
    }

    #[test]
    fn sigma_sorted_descending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.0), c(3.0, 0.0), c(0.0, 2.0)]));
        let svd = FullSvd::new(&m);
        assert_eq!(svd.sigma.len(), 3);
        assert!((svd.sigma[0] - 3.0).abs() < 1e-14);
        assert!((svd.sigma[1] - 2.0).abs() < 1e-14);
        assert!((svd.sigma[2] - 0.5).abs() < 1e-14);
        assert!((singular_value_ratio(&m) - 0.5 / 3.0).abs() < 1e-14);
    }
}
