//! Principal component analysis baseline.
//!
//! Documents are samples and the data are column-centered. The
//! eigenproblem is solved on whichever of the Gram matrix (documents ×
//! documents) or the covariance matrix (terms × terms) is smaller, both
//! formed directly from the sparse data. Directions with no variance are
//! filled in with an orthonormal completion so the basis always has the
//! requested number of columns.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    /// Mean document (length `n_terms`).
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, `n_terms × d`.
    pub basis: Matrix,
    /// Sample variance along each direction, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn n_terms(&self) -> usize {
        self.basis.rows()
    }
}

/// Eigenvalues (descending) and matching eigenvectors (as columns) of a
/// symmetric matrix, by Householder tridiagonalization and implicit QL.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape {
            context: "symmetric_eigen",
            expected: (n, n),
            found: a.shape(),
        });
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    // Rotations in the QL sweep act on eigenvector columns; work on the
    // transpose so they touch contiguous rows.
    let mut vt = v.transpose();
    tridiagonal_ql(&mut vt, &mut d, &mut e)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| vt[(order[c], r)]);
    Ok((values, vectors))
}

fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// `vt` holds eigenvectors as rows.
fn tridiagonal_ql(vt: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > 60 {
                    return Err(Error::Degenerate("eigenvalue iteration did not converge"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..] {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_next = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `Xᵀ·B` for sparse `X` (terms × docs) and dense `B` (terms × k).
fn sparse_t_dense(x: &SparseMatrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.cols(), b.cols());
    for c in 0..x.cols() {
        let (rows, vals) = x.column(c);
        let dst = out.row_mut(c);
        for (&r, &v) in rows.iter().zip(vals) {
            for (o, &bv) in dst.iter_mut().zip(b.row(r)) {
                *o += v * bv;
            }
        }
    }
    out
}

/// `XᵀX`, accumulated term by term over the documents sharing it.
fn sparse_gram(x: &SparseMatrix) -> Matrix {
    let mut by_term: Vec<Vec<(usize, f64)>> = vec![Vec::new(); x.rows()];
    for (r, c, v) in x.iter() {
        by_term[r].push((c, v));
    }
    let mut g = Matrix::zeros(x.cols(), x.cols());
    for entries in &by_term {
        for &(i, vi) in entries {
            let row = g.row_mut(i);
            for &(j, vj) in entries {
                row[j] += vi * vj;
            }
        }
    }
    g
}

/// `X·B` for sparse `X` (terms × docs) and dense `B` (docs × k).
fn sparse_dense(x: &SparseMatrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), b.cols());
    for c in 0..x.cols() {
        let (rows, vals) = x.column(c);
        for (&r, &v) in rows.iter().zip(vals) {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(b.row(c)) {
                *o += v * bv;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalizes the columns of `basis` in order (two passes of modified
/// Gram-Schmidt). Columns that vanish are replaced by the first coordinate
/// vectors that are independent of the columns kept so far.
fn orthonormalize(basis: &mut Matrix) {
    let (n, d) = basis.shape();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| basis.column(j)).collect();
    let mut next_unit = 0;
    for j in 0..d {
        let original = libm::sqrt(dot(&cols[j], &cols[j]));
        let mut ok = false;
        if original > 0.0 {
            ok = reduce(&mut cols, j, original);
        }
        while !ok {
            let mut cand = vec![0.0; n];
            cand[next_unit] = 1.0;
            next_unit += 1;
            cols[j] = cand;
            ok = reduce(&mut cols, j, 1.0);
        }
    }
    for (j, col) in cols.iter().enumerate() {
        basis.set_column(j, col);
    }
}

fn reduce(cols: &mut [Vec<f64>], j: usize, original: f64) -> bool {
    let (done, rest) = cols.split_at_mut(j);
    let col = &mut rest[0];
    for _ in 0..2 {
        for q in done.iter() {
            let p = dot(q, col);
            for (c, &qv) in col.iter_mut().zip(q) {
                *c -= p * qv;
            }
        }
    }
    let norm = libm::sqrt(dot(col, col));
    if norm <= 1e-6 * original {
        return false;
    }
    for c in col.iter_mut() {
        *c /= norm;
    }
    true
}

/// Flips each column so its largest-magnitude entry (first one on ties) is
/// positive.
fn fix_signs(basis: &mut Matrix) {
    for j in 0..basis.cols() {
        let col = basis.column(j);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
            basis.set_column(j, &flipped);
        }
    }
}

/// Top-`d` principal directions of the columns of `x`.
pub fn pca_fit(x: &SparseMatrix, d: usize) -> Result<PcaModel> {
    let (n_terms, n_docs) = x.shape();
    if d == 0 {
        return Err(Error::InvalidDimension("PCA rank must be at least 1"));
    }
    if d > n_terms.min(n_docs) {
        return Err(Error::InvalidArgument(alloc::format!(
            "PCA rank {d} exceeds min({n_terms}, {n_docs})"
        )));
    }
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data has non-finite entries".into()));
    }
    let n = n_docs as f64;
    let mean: Vec<f64> = x.row_sums().into_iter().map(|s| s / n).collect();
    let denom = if n_docs > 1 { n - 1.0 } else { 1.0 };

    let (eigenvalues, mut basis) = if n_docs < n_terms {
        // Gram route: G = (X − μ1ᵀ)ᵀ(X − μ1ᵀ).
        let xt_mu: Vec<f64> = (0..n_docs)
            .map(|c| {
                let (rows, vals) = x.column(c);
                rows.iter().zip(vals).map(|(&r, &v)| v * mean[r]).sum()
            })
            .collect();
        let mu_sq = dot(&mean, &mean);
        let mut g = sparse_gram(x);
        for i in 0..n_docs {
            for j in 0..n_docs {
                g[(i, j)] += mu_sq - xt_mu[i] - xt_mu[j];
            }
        }
        let (values, vectors) = symmetric_eigen(&g)?;
        let u = Matrix::from_fn(n_docs, d, |r, c| vectors[(r, c)]);
        // W = (X − μ1ᵀ)U, then scale each column to unit length.
        let xu = sparse_dense(x, &u);
        let u_sums = u.col_sums();
        let mut w = Matrix::from_fn(n_terms, d, |r, c| xu[(r, c)] - mean[r] * u_sums[c]);
        let cutoff = zero_cutoff(&values);
        for (c, &value) in values.iter().enumerate().take(d) {
            let scale = if value > cutoff {
                1.0 / libm::sqrt(value)
            } else {
                0.0
            };
            let col: Vec<f64> = w.column(c).iter().map(|v| v * scale).collect();
            w.set_column(c, &col);
        }
        (values, w)
    } else {
        // Covariance route: C = XXᵀ − n μμᵀ.
        let dense = x.to_dense();
        let mut c = Matrix::zeros(n_terms, n_terms);
        for i in 0..n_terms {
            let ri = dense.row(i);
            for j in i..n_terms {
                let v = dot(ri, dense.row(j)) - n * mean[i] * mean[j];
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let (values, vectors) = symmetric_eigen(&c)?;
        let cutoff = zero_cutoff(&values);
        let w = Matrix::from_fn(n_terms, d, |r, col| {
            if values[col] > cutoff {
                vectors[(r, col)]
            } else {
                0.0
            }
        });
        (values, w)
    };
    orthonormalize(&mut basis);
    fix_signs(&mut basis);
    let cutoff = zero_cutoff(&eigenvalues);
    let explained_variance = eigenvalues[..d]
        .iter()
        .map(|&v| if v > cutoff { v / denom } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        basis,
        explained_variance,
    })
}

/// Eigenvalues at or below this are rounding noise around zero.
fn zero_cutoff(values: &[f64]) -> f64 {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    top * values.len() as f64 * 16.0 * f64::EPSILON
}

/// Coordinates `basisᵀ(x − mean)` of each column of `x` (d × docs).
pub fn pca_project(x: &SparseMatrix, model: &PcaModel) -> Result<Matrix> {
    if x.rows() != model.n_terms() {
        return Err(Error::Shape {
            context: "pca_project",
            expected: (model.n_terms(), x.cols()),
            found: x.shape(),
        });
    }
    let d = model.rank();
    let offset: Vec<f64> = (0..d)
        .map(|c| {
            (0..model.n_terms())
                .map(|r| model.basis[(r, c)] * model.mean[r])
                .sum()
        })
        .collect();
    let proj = sparse_t_dense(x, &model.basis);
    Ok(Matrix::from_fn(d, x.cols(), |r, c| {
        proj[(c, r)] - offset[r]
    }))
}
