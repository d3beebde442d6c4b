//! Helpers on top of `sprs` CSR matrices: pattern construction, scatter of
//! dense local blocks, and a parallel matrix-vector product.

use rayon::prelude::*;
use sprs::CsMat;

/// Builds a zero-valued CSR matrix whose row `i` holds the columns `rows[i]`.
pub fn pattern_from_rows(mut rows: Vec<Vec<usize>>, ncols: usize) -> CsMat<f64> {
    let nrows = rows.len();
    let mut indptr = Vec::with_capacity(nrows + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    for row in rows.iter_mut() {
        row.sort_unstable();
        row.dedup();
        indices.extend_from_slice(row);
        indptr.push(indices.len());
    }
    let data = vec![0.0; indices.len()];
    CsMat::new((nrows, ncols), indptr, indices, data)
}

/// Position of `(row, col)` in the storage of a CSR matrix.
#[inline]
pub fn entry_index(indptr: &[usize], indices: &[usize], row: usize, col: usize) -> Option<usize> {
    let lo = indptr[row];
    let hi = indptr[row + 1];
    indices[lo..hi].binary_search(&col).ok().map(|k| lo + k)
}

/// Adds the dense row-major block `local` at `(rows, cols)`. Entries outside
/// the pattern panic.
pub fn scatter_add(mat: &mut CsMat<f64>, rows: &[usize], cols: &[usize], local: &[f64]) {
    debug_assert_eq!(local.len(), rows.len() * cols.len());
    let indptr = mat.indptr().raw_storage().to_vec();
    let indices = mat.indices().to_vec();
    scatter_add_raw(&indptr, &indices, mat.data_mut(), rows, cols, local);
}

pub fn scatter_add_raw(
    indptr: &[usize],
    indices: &[usize],
    data: &mut [f64],
    rows: &[usize],
    cols: &[usize],
    local: &[f64],
) {
    for (i, &r) in rows.iter().enumerate() {
        let lo = indptr[r];
        let hi = indptr[r + 1];
        let row_cols = &indices[lo..hi];
        for (j, &c) in cols.iter().enumerate() {
            let v = local[i * cols.len() + j];
            if v == 0.0 {
                continue;
            }
            let k = row_cols
                .binary_search(&c)
                .unwrap_or_else(|_| panic!("entry ({r}, {c}) outside sparsity pattern"));
            data[lo + k] += v;
        }
    }
}

/// `y = A x`, parallel over rows.
pub fn spmv(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    assert!(a.is_csr());
    let indptr = a.indptr();
    let ptr = indptr.raw_storage();
    let indices = a.indices();
    let data = a.data();
    y.par_iter_mut().enumerate().for_each(|(i, yi)| {
        let mut s = 0.0;
        for k in ptr[i]..ptr[i + 1] {
            s += data[k] * x[indices[k]];
        }
        *yi = s;
    });
}

/// `y += alpha A x`.
pub fn spmv_add(a: &CsMat<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    assert!(a.is_csr());
    let indptr = a.indptr();
    let ptr = indptr.raw_storage();
    let indices = a.indices();
    let data = a.data();
    y.par_iter_mut().enumerate().for_each(|(i, yi)| {
        let mut s = 0.0;
        for k in ptr[i]..ptr[i + 1] {
            s += data[k] * x[indices[k]];
        }
        *yi += alpha * s;
    });
}

pub fn transpose(a: &CsMat<f64>) -> CsMat<f64> {
    a.transpose_view().to_csr()
}

/// `P^T A P` in CSR.
pub fn galerkin_product(a: &CsMat<f64>, p: &CsMat<f64>) -> CsMat<f64> {
    let pt = transpose(p);
    let ap = a * p;
    &pt * &ap
}

/// Dense copy, for tests and small oracles.
pub fn to_dense(a: &CsMat<f64>) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; a.cols()]; a.rows()];
    for (v, (i, j)) in a.iter() {
        out[i][j] += *v;
    }
    out
}

/// Largest absolute entrywise difference between two matrices of equal shape.
pub fn max_abs_diff(a: &CsMat<f64>, b: &CsMat<f64>) -> f64 {
    let d = a - b;
    d.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_and_multiply() {
        let mut m = pattern_from_rows(vec![vec![0, 1], vec![1, 0, 2], vec![2]], 3);
        scatter_add(&mut m, &[0, 1], &[0, 1], &[1.0, 2.0, 3.0, 4.0]);
        scatter_add(&mut m, &[1, 2], &[2], &[5.0, 6.0]);
        let mut y = vec![0.0; 3];
        spmv(&m, &[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 12.0, 6.0]);
        let d = to_dense(&transpose(&m));
        assert_eq!(d[2][1], 5.0);
    }

    #[test]
    fn galerkin_identity() {
        let a = pattern_from_rows(vec![vec![0, 1], vec![0, 1]], 2);
        let mut a = a;
        scatter_add(&mut a, &[0, 1], &[0, 1], &[2.0, -1.0, -1.0, 2.0]);
        let i: CsMat<f64> = CsMat::eye(2);
        let c = galerkin_product(&a, &i);
        assert!(max_abs_diff(&a, &c) == 0.0);
    }
}
