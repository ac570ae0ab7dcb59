//! Small dense linear algebra on jet-valued and real vectors.
//!
//! Jet routines make every discrete choice (pivots, signs) on the constant
//! terms, so the result is a smooth local extension of the pointwise answer.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, GeomResult};
use crate::jets::JetScalar;

pub type JetVec = Vec<JetScalar>;
pub type JetMat = Vec<Vec<JetScalar>>;

pub fn values(v: &[JetScalar]) -> Vec<f64> {
    v.iter().map(JetScalar::value).collect()
}

pub fn mat_values(m: &[Vec<JetScalar>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| values(r)).collect()
}

pub fn truncate_vec(v: &[JetScalar], order: usize) -> GeomResult<JetVec> {
    Ok(v.iter().map(|x| x.truncate(order)).collect::<Result<_, _>>()?)
}

pub fn truncate_mat(m: &[Vec<JetScalar>], order: usize) -> GeomResult<JetMat> {
    m.iter().map(|r| truncate_vec(r, order)).collect()
}

/// Constant jets shaped like `template`.
pub fn lift_vec(template: &JetScalar, v: &[f64]) -> JetVec {
    v.iter().map(|&x| template.lift(x)).collect()
}

pub fn dot(a: &[JetScalar], b: &[JetScalar]) -> JetScalar {
    let mut acc = a[0].zero_like();
    for (x, y) in a.iter().zip(b) {
        acc += &(x * y);
    }
    acc
}

pub fn add(a: &[JetScalar], b: &[JetScalar]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[JetScalar], b: &[JetScalar]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[JetScalar], s: &JetScalar) -> JetVec {
    a.iter().map(|x| x * s).collect()
}

/// `a - s * b`.
pub fn sub_scaled(a: &[JetScalar], s: &JetScalar, b: &[JetScalar]) -> JetVec {
    a.iter().zip(b).map(|(x, y)| x - &(s * y)).collect()
}

pub fn mat_vec(m: &[Vec<JetScalar>], v: &[JetScalar]) -> JetVec {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Columns of the product `a·b`.
pub fn mat_vec_cols(a: &[Vec<JetScalar>], b: &[Vec<JetScalar>]) -> Vec<JetVec> {
    let n = b[0].len();
    (0..n)
        .map(|j| {
            let col: JetVec = b.iter().map(|row| row[j].clone()).collect();
            mat_vec(a, &col)
        })
        .collect()
}

/// Linear combination `Σ c_k v_k`.
pub fn combine(coeffs: &[JetScalar], vecs: &[JetVec]) -> JetVec {
    let mut out: JetVec = vecs[0].iter().map(|x| x.zero_like()).collect();
    for (c, v) in coeffs.iter().zip(vecs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += &(c * x);
        }
    }
    out
}

/// `uᵀ G v`.
pub fn g_inner(g: &[Vec<JetScalar>], u: &[JetScalar], v: &[JetScalar]) -> JetScalar {
    dot(u, &mat_vec(g, v))
}

pub fn norm(v: &[JetScalar]) -> GeomResult<JetScalar> {
    Ok(dot(v, v).sqrt()?)
}

pub fn normalize(v: &[JetScalar], floor: f64) -> GeomResult<JetVec> {
    let n = norm(v)?;
    if n.value() <= floor {
        return Err(GeomError::FrameDegenerate(format!(
            "cannot normalize vector of length {:.3e}",
            n.value()
        )));
    }
    let r = n.recip()?;
    Ok(scale(v, &r))
}

pub fn g_normalize(g: &[Vec<JetScalar>], v: &[JetScalar], floor: f64) -> GeomResult<JetVec> {
    let n2 = g_inner(g, v, v);
    if n2.value() <= floor * floor {
        return Err(GeomError::FrameDegenerate(format!(
            "cannot normalize vector of metric length {:.3e}",
            n2.value().max(0.0).sqrt()
        )));
    }
    let r = n2.sqrt()?.recip()?;
    Ok(scale(v, &r))
}

/// Inverse of a square jet matrix by Gauss–Jordan elimination, pivoting on
/// constant terms.
pub fn inverse(m: &[Vec<JetScalar>]) -> GeomResult<JetMat> {
    let n = m.len();
    let one = m[0][0].lift(1.0);
    let zero = m[0][0].zero_like();
    let mut a: JetMat = m.to_vec();
    let mut inv: JetMat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { one.clone() } else { zero.clone() }).collect())
        .collect();
    let scale_ref = m
        .iter()
        .flat_map(|r| r.iter().map(|x| x.value().abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .unwrap();
        if a[piv][col].value().abs() <= 1e-14 * scale_ref {
            return Err(GeomError::RankDeficient("singular matrix in jet inverse".into()));
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let r = a[col][col].recip()?;
        a[col] = scale(&a[col], &r);
        inv[col] = scale(&inv[col], &r);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col].clone();
            if f.coeffs().iter().all(|&c| c == 0.0) {
                continue;
            }
            a[row] = sub_scaled(&a[row], &f, &a[col]);
            inv[row] = sub_scaled(&inv[row], &f, &inv[col]);
        }
    }
    Ok(inv)
}

/// Gram–Schmidt under the inner product `G`, scanning candidates with
/// greedy pivoting: at each step the candidate with the largest residual is
/// taken. Stops after `max_count` vectors or when residuals drop below
/// `floor` (relative to the largest candidate).
pub fn pivoted_gram_schmidt(
    g: &[Vec<JetScalar>],
    candidates: &[JetVec],
    max_count: usize,
    floor: f64,
) -> GeomResult<Vec<JetVec>> {
    let mut work: Vec<JetVec> = candidates.to_vec();
    let ref_norm = work
        .iter()
        .map(|v| g_inner(g, v, v).value().max(0.0).sqrt())
        .fold(0.0, f64::max);
    let mut basis: Vec<JetVec> = Vec::new();
    let mut used = vec![false; work.len()];
    while basis.len() < max_count {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in work.iter().enumerate() {
            if used[k] {
                continue;
            }
            let n = g_inner(g, v, v).value().max(0.0).sqrt();
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((k, n));
            }
        }
        let Some((k, n)) = best else { break };
        if n <= floor * ref_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        used[k] = true;
        let q = g_normalize(g, &work[k], 0.0)?;
        for (j, v) in work.iter_mut().enumerate() {
            if !used[j] {
                let c = g_inner(g, v, &q);
                *v = sub_scaled(v, &c, &q);
            }
        }
        basis.push(q);
    }
    Ok(basis)
}

/// Real counterpart of [`pivoted_gram_schmidt`].
pub fn pivoted_gram_schmidt_f64(
    g: &[Vec<f64>],
    candidates: &[Vec<f64>],
    max_count: usize,
    floor: f64,
) -> Vec<Vec<f64>> {
    let mut work: Vec<Vec<f64>> = candidates.to_vec();
    let ref_norm = work
        .iter()
        .map(|v| fg_inner(g, v, v).max(0.0).sqrt())
        .fold(0.0, f64::max);
    let mut used = vec![false; work.len()];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < max_count {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in work.iter().enumerate() {
            if used[k] {
                continue;
            }
            let n = fg_inner(g, v, v).max(0.0).sqrt();
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((k, n));
            }
        }
        let Some((k, n)) = best else { break };
        if n <= floor * ref_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        used[k] = true;
        let q: Vec<f64> = work[k].iter().map(|x| x / n).collect();
        for (j, v) in work.iter_mut().enumerate() {
            if !used[j] {
                let c = fg_inner(g, v, &q);
                for (vi, qi) in v.iter_mut().zip(&q) {
                    *vi -= c * qi;
                }
            }
        }
        basis.push(q);
    }
    basis
}

pub fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let r = m.len();
    let c = if r == 0 { 0 } else { m[0].len() };
    DMatrix::from_fn(r, c, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Matrix whose columns are the given vectors.
pub fn columns(vs: &[Vec<f64>]) -> DMatrix<f64> {
    let rows = vs.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, vs.len(), |i, j| vs[j][i])
}

pub fn fdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fnorm(a: &[f64]) -> f64 {
    fdot(a, a).sqrt()
}

pub fn fg_inner(g: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, gij) in row.iter().enumerate() {
            s += u[i] * gij * v[j];
        }
    }
    s
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank relative to the largest singular value.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis of the column span of `m` (Euclidean), with the given
/// dimension, from a thin SVD.
pub fn column_span(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(m.nrows(), dim, |i, j| u[(i, idx[j])])
}

/// Largest sine of the principal angles between two column spans given by
/// orthonormal bases of equal dimension.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let proj = b - a * (a.transpose() * b);
    let sv = singular_values(&proj);
    sv.first().copied().unwrap_or(0.0).min(1.0)
}

/// Nearest orthogonal matrix (polar factor).
pub fn polar_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v requested")
}

/// Eigen-decomposition of a symmetric 2×2 matrix `[[p, q], [q, r]]`,
/// eigenvalues ascending with unit eigenvectors.
pub fn sym2_eigen(p: f64, q: f64, r: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let m = nalgebra::Matrix2::new(p, q, q, r);
    let e = m.symmetric_eigen();
    let (l0, l1) = (e.eigenvalues[0], e.eigenvalues[1]);
    let v0 = [e.eigenvectors[(0, 0)], e.eigenvectors[(1, 0)]];
    let v1 = [e.eigenvectors[(0, 1)], e.eigenvectors[(1, 1)]];
    if l0 <= l1 {
        ([l0, l1], [v0, v1])
    } else {
        ([l1, l0], [v1, v0])
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
