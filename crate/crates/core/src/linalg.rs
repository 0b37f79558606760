//! Dense linear-algebra helpers and a banded LU factorisation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a real square matrix (real Schur form based).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues of non-square matrix",
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let ev = a.clone().complex_eigenvalues();
    Ok(ev.iter().copied().collect())
}

/// Orthonormal basis of the `dim`-dimensional right null space of `a`
/// (right singular vectors of the `dim` smallest singular values).
pub fn null_space(a: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    if dim > n {
        return Err(Error::InvalidSplit { m_f: dim, n });
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Eigen("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    // a wide SVD only returns min(m, n) vectors; pad from the complement
    let mut basis = DMatrix::zeros(n, dim);
    let mut filled = 0;
    for &i in order.iter().take(dim) {
        basis.set_column(filled, &v_t.row(i).transpose());
        filled += 1;
    }
    if filled < dim {
        return Err(Error::Eigen("null space dimension exceeds SVD rank".into()));
    }
    Ok(basis)
}

/// Orthonormal basis for the column space of `a` (numerical rank from the
/// singular values against `rtol · σ_max`).
pub fn orthonormal_basis(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rtol * smax && smax > 0.0)
        .collect();
    let mut out = DMatrix::zeros(a.nrows(), cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Numerical rank of `a`.
pub fn rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Principal angles (radians, ascending) between the column spaces of `a` and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormal_basis(a, 1e-12);
    let qb = orthonormal_basis(b, 1e-12);
    let m = qa.transpose() * qb;
    let mut cos: Vec<f64> = m.singular_values().iter().map(|c| c.min(1.0)).collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    cos.iter().map(|c| c.acos()).collect()
}

/// Largest principal angle in degrees.
pub fn max_principal_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b)
        .into_iter()
        .fold(0.0, f64::max)
        .to_degrees()
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored
/// with `kl` extra super-diagonals of room for pivoting fill-in.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        if off < -(self.kl as isize) || off > (self.ku + self.kl) as isize {
            None
        } else {
            Some(i * self.width + (off + self.kl as isize) as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Sets an entry inside the declared band; panics outside it.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .filter(|_| (j as isize - i as isize) <= self.ku as isize)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// `alpha · self + beta · I`.
    pub fn scale_shift(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        for i in 0..self.n {
            out.add(i, i, beta);
        }
        out
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + 1).min(self.n);
            y[i] = (lo..hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if (j as isize - i as isize) <= self.ku as isize {
                self.get(i, j)
            } else {
                0.0
            }
        })
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular("banded LU"));
            }
            piv[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j).unwrap();
                    let b = self.slot(p, j).unwrap();
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in (k + 1)..=last {
                let si = self.slot(i, k).unwrap();
                let l = self.data[si] / pivot;
                self.data[si] = l;
                if l != 0.0 {
                    for j in (k + 1)..=jmax {
                        let kj = self.data[self.slot(k, j).unwrap()];
                        let ij = self.slot(i, j).unwrap();
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        let mut x = b.clone();
        for k in 0..n {
            x.swap_rows(k, self.piv[k]);
            let last = (k + kl).min(n - 1);
            for i in (k + 1)..=last {
                x[i] -= self.m.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku + kl).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=jmax {
                s -= self.m.get(k, j) * x[j];
            }
            x[k] = s / self.m.get(k, k);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0]);
        let ns = null_space(&a, 2).unwrap();
        assert!((&a * &ns).amax() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn angles_between_planes() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!((max_principal_angle_deg(&a, &b) - 45.0).abs() < 1e-10);
        let xy = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(max_principal_angle_deg(&a, &xy).abs() < 1e-6);
    }

    #[test]
    fn rank_detects_collinear_columns() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        assert_eq!(rank(&a, 1e-10), 1);
    }

    #[test]
    fn band_lu_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.set(0, 1, 1.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0);
        m.set(1, 2, 1.0);
        m.set(2, 1, 3.0);
        m.set(2, 2, 1.0);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = m.clone().lu().unwrap().solve(&b);
        assert!((m.mul_vec(&x) - b).amax() < 1e-14);
    }

    #[test]
    fn singular_band_matrix_is_rejected() {
        let m = BandMatrix::zeros(4, 1, 1);
        assert!(m.lu().is_err());
    }

    proptest! {
        #[test]
        fn band_lu_matches_dense_solve(
            vals in proptest::collection::vec(-1.0f64..1.0, 8 * 5),
            rhs in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let n = 8;
            let (kl, ku) = (2, 2);
            let mut m = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for d in 0..5 {
                    let j = i as isize + d as isize - 2;
                    if j >= 0 && (j as usize) < n {
                        let bump = if d == 2 { 3.0 } else { 0.0 };
                        m.set(i, j as usize, vals[i * 5 + d] + bump);
                    }
                }
            }
            let b = DVector::from_vec(rhs);
            let dense = m.to_dense();
            if let Some(xd) = dense.clone().lu().solve(&b) {
                let xb = m.lu().unwrap().solve(&b);
                prop_assert!((xb - xd).amax() < 1e-9);
            }
        }
    }
}
