use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chart::ImmersionChart;
use crate::error::{GeomError, GeomResult};
use crate::jets::{JetScalar, MAX_ORDER};
use crate::linalg::{
    self, dot, fg_inner, inverse, mat_values, normalize, pivoted_gram_schmidt_f64, singular_values,
    sub_scaled, to_dmatrix, truncate_mat, truncate_vec, values, JetMat, JetVec,
};
use crate::tolerances::Tolerances;

/// Candidate normals shorter than this after projection are skipped.
const NORMAL_SEED_FLOOR: f64 = 1e-6;

/// Pointwise geometry of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySample {
    pub point: Vec<f64>,
    pub order: usize,
    pub value: Vec<f64>,
    /// Partial derivatives `f_i` as ambient vectors.
    pub jacobian: Vec<Vec<f64>>,
    pub metric: Vec<Vec<f64>>,
    pub normal_frame: Vec<Vec<f64>>,
    /// `sff[k][i][j] = ⟨f_ij, ξ_k⟩`.
    pub sff: Vec<Vec<Vec<f64>>>,
    /// `christoffels[k][i][j] = Γ^k_ij`, present for order-3 samples.
    pub christoffels: Option<Vec<Vec<Vec<f64>>>>,
    /// `third_partials[i][j][k]` = ambient vector `f_ijk`, present for order-3 samples.
    pub third_partials: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    pub jacobian_singular_values: Vec<f64>,
}

impl GeometrySample {
    pub fn intrinsic_dim(&self) -> usize {
        self.jacobian.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.value.len()
    }

    pub fn codim(&self) -> usize {
        self.normal_frame.len()
    }

    pub fn metric_inverse(&self) -> GeomResult<Vec<Vec<f64>>> {
        let g = to_dmatrix(&self.metric);
        let inv = g
            .try_inverse()
            .ok_or_else(|| GeomError::RankDeficient("metric is singular".into()))?;
        Ok(linalg::from_dmatrix(&inv))
    }

    /// `α(u, v)` as an ambient vector.
    pub fn alpha(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        for (b, xi) in self.sff.iter().zip(&self.normal_frame) {
            let s = bilinear(b, u, v);
            for (o, x) in out.iter_mut().zip(xi) {
                *o += s * x;
            }
        }
        out
    }

    /// Components `⟨α(u, v), ξ_k⟩`.
    pub fn alpha_components(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.sff.iter().map(|b| bilinear(b, u, v)).collect()
    }

    /// Push-forward `f_* v`.
    pub fn push_forward(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        for (fi, vi) in self.jacobian.iter().zip(v) {
            for (o, x) in out.iter_mut().zip(fi) {
                *o += vi * x;
            }
        }
        out
    }
}

pub(crate) fn bilinear(b: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, bij) in row.iter().enumerate() {
            s += u[i] * bij * v[j];
        }
    }
    s
}

/// Jet-valued geometry at a point, for quantities that must be
/// differentiated further. A chart evaluated at order `K` yields tangents,
/// metric and normal frame at order `K-1`, and second fundamental form and
/// Christoffel symbols at order `K-2`.
#[derive(Debug, Clone)]
pub struct SampleJets {
    pub order: usize,
    pub point: Vec<f64>,
    pub value: JetVec,
    pub tangents: Vec<JetVec>,
    pub metric: JetMat,
    pub metric_inv: JetMat,
    pub normals: Vec<JetVec>,
    /// `hessians[i][j]` = ambient vector `f_ij`.
    pub hessians: Vec<Vec<JetVec>>,
    pub sff: Vec<JetMat>,
    /// `christoffels[k][i][j] = Γ^k_ij`.
    pub christoffels: Vec<JetMat>,
    pub jacobian_singular_values: Vec<f64>,
}

impl SampleJets {
    pub fn intrinsic_dim(&self) -> usize {
        self.tangents.len()
    }

    pub fn codim(&self) -> usize {
        self.normals.len()
    }

    pub fn christoffel_values(&self) -> Vec<Vec<Vec<f64>>> {
        self.christoffels.iter().map(|m| mat_values(m)).collect()
    }

    pub fn to_sample(&self) -> GeomResult<GeometrySample> {
        let third = if self.order >= 3 {
            let n = self.intrinsic_dim();
            let mut t = vec![vec![vec![Vec::new(); n]; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        t[i][j][k] = self.hessians[i][j]
                            .iter()
                            .map(|x| x.derivative(k).map(|d| d.value()))
                            .collect::<Result<_, _>>()?;
                    }
                }
            }
            Some(t)
        } else {
            None
        };
        Ok(GeometrySample {
            point: self.point.clone(),
            order: self.order,
            value: values(&self.value),
            jacobian: self.tangents.iter().map(|t| values(t)).collect(),
            metric: mat_values(&self.metric),
            normal_frame: self.normals.iter().map(|v| values(v)).collect(),
            sff: self.sff.iter().map(|b| mat_values(b)).collect(),
            christoffels: (self.order >= 3).then(|| self.christoffel_values()),
            third_partials: third,
            jacobian_singular_values: self.jacobian_singular_values.clone(),
        })
    }
}

/// Full jet geometry of `chart` at `point`, chart evaluated to `order`.
pub fn sample_jets(
    chart: &ImmersionChart,
    point: &[f64],
    order: usize,
    tol: &Tolerances,
) -> GeomResult<SampleJets> {
    if !(2..=MAX_ORDER).contains(&order) {
        return Err(GeomError::InvalidInput(format!("sample order {order} not in 2..={MAX_ORDER}")));
    }
    let n = chart.intrinsic_dim();
    let f = chart.eval_at(point, order)?;
    let tangents: Vec<JetVec> = (0..n)
        .map(|i| f.iter().map(|c| c.derivative(i)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;

    let jac = linalg::columns(&tangents.iter().map(|t| values(t)).collect::<Vec<_>>());
    let sv = singular_values(&jac);
    let rank = linalg::numerical_rank(&sv, tol.rank_tol);
    if rank < n {
        return Err(GeomError::SingularPoint { rank, dim: n });
    }

    let metric: JetMat = (0..n)
        .map(|i| (0..n).map(|j| dot(&tangents[i], &tangents[j])).collect())
        .collect();
    let metric_inv = inverse(&metric)?;
    let normals = normal_frame_jets(&tangents, &metric_inv, chart.ambient_dim())?;

    let mut hessians: Vec<Vec<JetVec>> = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let h: JetVec = tangents[i]
                .iter()
                .map(|c| c.derivative(j))
                .collect::<Result<_, _>>()?;
            hessians[j][i] = h.clone();
            hessians[i][j] = h;
        }
    }
    let low = order - 2;
    let normals_low: Vec<JetVec> = normals
        .iter()
        .map(|v| truncate_vec(v, low))
        .collect::<GeomResult<_>>()?;
    let sff: Vec<JetMat> = normals_low
        .iter()
        .map(|xi| {
            let mut b: JetMat = vec![vec![xi[0].zero_like(); n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = dot(&hessians[i][j], xi);
                    b[j][i] = v.clone();
                    b[i][j] = v;
                }
            }
            b
        })
        .collect();

    // dg[l][i][j] = ∂_l G_ij
    let dg: Vec<JetMat> = (0..n)
        .map(|l| {
            metric
                .iter()
                .map(|row| row.iter().map(|x| x.derivative(l)).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let ginv_low = truncate_mat(&metric_inv, low)?;
    let zero = ginv_low[0][0].zero_like();
    let mut christoffels: Vec<JetMat> = vec![vec![vec![zero.clone(); n]; n]; n];
    for i in 0..n {
        for j in i..n {
            let lowered: JetVec = (0..n)
                .map(|l| &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j])
                .collect();
            for k in 0..n {
                let v = dot(&ginv_low[k], &lowered).scale(0.5);
                christoffels[k][j][i] = v.clone();
                christoffels[k][i][j] = v;
            }
        }
    }

    Ok(SampleJets {
        order,
        point: point.to_vec(),
        value: f,
        tangents,
        metric,
        metric_inv,
        normals,
        hessians,
        sff,
        christoffels,
        jacobian_singular_values: sv,
    })
}

/// Orthonormal normal frame obtained by projecting the ambient coordinate
/// axes, in order, onto the normal space and orthonormalizing.
pub(crate) fn normal_frame_jets(
    tangents: &[JetVec],
    metric_inv: &[Vec<JetScalar>],
    ambient: usize,
) -> GeomResult<Vec<JetVec>> {
    let n = tangents.len();
    let codim = ambient - n;
    let template = &tangents[0][0];
    let mut chosen: Vec<JetVec> = Vec::with_capacity(codim);
    for a in 0..ambient {
        if chosen.len() == codim {
            break;
        }
        let mut v: JetVec = (0..ambient)
            .map(|b| template.lift(if a == b { 1.0 } else { 0.0 }))
            .collect();
        for i in 0..n {
            let mut c = template.zero_like();
            for j in 0..n {
                c += &(&metric_inv[i][j] * &tangents[j][a]);
            }
            v = sub_scaled(&v, &c, &tangents[i]);
        }
        for _ in 0..2 {
            for xi in &chosen {
                let c = dot(&v, xi);
                v = sub_scaled(&v, &c, xi);
            }
        }
        let len = dot(&v, &v).value().max(0.0).sqrt();
        if len < NORMAL_SEED_FLOOR {
            continue;
        }
        chosen.push(normalize(&v, 0.0)?);
    }
    if chosen.len() < codim {
        return Err(GeomError::RankDeficient(format!(
            "normal frame: found {} of {} normals",
            chosen.len(),
            codim
        )));
    }
    Ok(chosen)
}

pub fn evaluate_sample(
    chart: &ImmersionChart,
    point: &[f64],
    order: usize,
) -> GeomResult<GeometrySample> {
    evaluate_sample_with(chart, point, order, &Tolerances::default())
}

pub fn evaluate_sample_with(
    chart: &ImmersionChart,
    point: &[f64],
    order: usize,
    tol: &Tolerances,
) -> GeomResult<GeometrySample> {
    if !(2..=3).contains(&order) {
        return Err(GeomError::InvalidInput(format!("sample order must be 2 or 3, got {order}")));
    }
    sample_jets(chart, point, order, tol)?.to_sample()
}

/// `G_ij = ⟨f_i, f_j⟩`.
pub fn first_fundamental_form(jacobian: &[Vec<f64>]) -> Vec<Vec<f64>> {
    jacobian
        .iter()
        .map(|a| jacobian.iter().map(|b| linalg::fdot(a, b)).collect())
        .collect()
}

/// Deterministic orthonormal basis of the orthogonal complement of the
/// tangent vectors `jacobian`.
pub fn normal_frame(jacobian: &[Vec<f64>]) -> GeomResult<Vec<Vec<f64>>> {
    let n = jacobian.len();
    if n == 0 {
        return Err(GeomError::InvalidInput("empty jacobian".into()));
    }
    let ambient = jacobian[0].len();
    if ambient <= n {
        return Err(GeomError::InvalidInput("no room for normals".into()));
    }
    let sv = singular_values(&linalg::columns(jacobian));
    let rank = linalg::numerical_rank(&sv, Tolerances::default().rank_tol);
    if rank < n {
        return Err(GeomError::RankDeficient(format!("jacobian rank {rank} < {n}")));
    }
    let template = JetScalar::constant(0.0, 1, 0)?;
    let tangents: Vec<JetVec> = jacobian.iter().map(|t| linalg::lift_vec(&template, t)).collect();
    let metric: JetMat = (0..n)
        .map(|i| (0..n).map(|j| dot(&tangents[i], &tangents[j])).collect())
        .collect();
    let inv = inverse(&metric)?;
    Ok(normal_frame_jets(&tangents, &inv, ambient)?
        .iter()
        .map(|v| values(v))
        .collect())
}

/// `A_ξ = G⁻¹ B_ξ` for an ambient normal vector `ξ`.
pub fn shape_operator(sample: &GeometrySample, xi: &[f64]) -> GeomResult<Vec<Vec<f64>>> {
    if xi.len() != sample.ambient_dim() {
        return Err(GeomError::InvalidInput("normal vector has wrong length".into()));
    }
    let n = sample.intrinsic_dim();
    let weights: Vec<f64> = sample.normal_frame.iter().map(|e| linalg::fdot(e, xi)).collect();
    let b = DMatrix::from_fn(n, n, |i, j| {
        sample.sff.iter().zip(&weights).map(|(bk, w)| w * bk[i][j]).sum::<f64>()
    });
    let g = to_dmatrix(&sample.metric);
    let a = g
        .lu()
        .solve(&b)
        .ok_or_else(|| GeomError::RankDeficient("metric is singular".into()))?;
    Ok(linalg::from_dmatrix(&a))
}

/// Relative nullity: common kernel of the shape operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityData {
    pub index: usize,
    pub rank: usize,
    pub nullity_basis: Vec<Vec<f64>>,
    pub complement_basis: Vec<Vec<f64>>,
    /// Singular values of the stacked second fundamental form in a
    /// metric-orthonormal frame, descending.
    pub singular_values: Vec<f64>,
    /// Some singular value lies within a decade of the threshold.
    pub marginal: bool,
    /// Frobenius norm of the stacked form.
    pub alpha_norm: f64,
}

pub fn relative_nullity(sample: &GeometrySample, nullity_tol: f64) -> GeomResult<NullityData> {
    let n = sample.intrinsic_dim();
    let g = to_dmatrix(&sample.metric);
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| GeomError::RankDeficient("metric not positive definite".into()))?;
    // E = L^{-T}: columns are a G-orthonormal basis.
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| GeomError::RankDeficient("metric factor is singular".into()))?;
    let e = l_inv.transpose();
    let codim = sample.codim();
    let mut stacked = DMatrix::zeros(codim * n, n);
    for (k, bk) in sample.sff.iter().enumerate() {
        let r = e.transpose() * to_dmatrix(bk) * &e;
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&r);
    }
    let alpha_norm = stacked.norm();
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("v requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    let (rank, marginal) = if top <= f64::MIN_POSITIVE {
        (0, false)
    } else {
        let thr = nullity_tol * top;
        let rank = sv.iter().filter(|&&s| s > thr).count();
        let marginal = sv.iter().any(|&s| s > 0.1 * thr && s < 10.0 * thr);
        (rank, marginal)
    };
    let index = n - rank;

    let tangent = |k: usize| -> Vec<f64> {
        let row = v_t.row(order[k]).transpose();
        (e.clone() * row).iter().copied().collect()
    };
    let range: Vec<Vec<f64>> = (0..rank).map(tangent).collect();
    let kernel: Vec<Vec<f64>> = (rank..n).map(tangent).collect();
    let canonical = |span: &[Vec<f64>]| -> Vec<Vec<f64>> {
        if span.is_empty() {
            return Vec::new();
        }
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut p = vec![0.0; n];
                for q in span {
                    let c: f64 = (0..n).map(|m| sample.metric[j][m] * q[m]).sum();
                    for (pi, qi) in p.iter_mut().zip(q) {
                        *pi += c * qi;
                    }
                }
                p
            })
            .collect();
        pivoted_gram_schmidt_f64(&sample.metric, &axes, span.len(), 1e-10)
    };
    let nullity_basis = canonical(&kernel);
    let complement_basis = canonical(&range);
    if nullity_basis.len() != index || complement_basis.len() != rank {
        return Err(GeomError::RankDeficient("nullity basis construction lost rank".into()));
    }
    Ok(NullityData {
        index,
        rank,
        nullity_basis,
        complement_basis,
        singular_values: sv,
        marginal,
        alpha_norm,
    })
}

/// `∇_dir W` in chart coordinates, given `W` as jets (order ≥ 1) and the
/// Christoffel symbols at the point.
pub(crate) fn covariant_from_jets(
    christoffels: &[Vec<Vec<f64>>],
    field: &[JetScalar],
    dir: &[f64],
) -> Vec<f64> {
    let w: Vec<f64> = values(field);
    christoffels
        .iter()
        .zip(field)
        .map(|(gk, wk)| {
            let grad = wk.gradient();
            let mut s: f64 = grad.iter().zip(dir).map(|(g, d)| g * d).sum();
            s += fg_inner(gk, dir, &w);
            s
        })
        .collect()
}

/// Levi-Civita derivative `∇_direction field` at `point`.
pub fn covariant_derivative<F>(
    chart: &ImmersionChart,
    point: &[f64],
    field: F,
    direction: &[f64],
) -> GeomResult<Vec<f64>>
where
    F: Fn(&[JetScalar]) -> GeomResult<Vec<JetScalar>>,
{
    let n = chart.intrinsic_dim();
    if direction.len() != n {
        return Err(GeomError::InvalidInput("direction has wrong length".into()));
    }
    let sj = sample_jets(chart, point, 2, &Tolerances::default())?;
    let x = JetScalar::variables(point, 1)?;
    let w = field(&x)?;
    if w.len() != n {
        return Err(GeomError::InvalidInput("field has wrong length".into()));
    }
    Ok(covariant_from_jets(&sj.christoffel_values(), &w, direction))
}

/// CSV dump: point coordinates, metric and second fundamental form entries
/// (upper triangles) and the nullity index when known.
pub fn write_sample_csv<W: Write>(
    out: W,
    rows: &[(GeometrySample, Option<NullityData>)],
) -> GeomResult<()> {
    let io = |e: csv::Error| GeomError::InvalidInput(format!("csv output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let Some((first, _)) = rows.first() else {
        w.write_record(["x0"]).map_err(io)?;
        return w.flush().map_err(|e| GeomError::InvalidInput(e.to_string()));
    };
    let n = first.intrinsic_dim();
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    for i in 0..n {
        for j in i..n {
            header.push(format!("g{i}{j}"));
        }
    }
    for k in 0..first.codim() {
        for i in 0..n {
            for j in i..n {
                header.push(format!("b{k}_{i}{j}"));
            }
        }
    }
    header.push("nu".into());
    w.write_record(&header).map_err(io)?;
    for (s, nd) in rows {
        let mut rec: Vec<String> = s.point.iter().map(|x| format!("{x:e}")).collect();
        for i in 0..n {
            for j in i..n {
                rec.push(format!("{:e}", s.metric[i][j]));
            }
        }
        for b in &s.sff {
            for i in 0..n {
                for j in i..n {
                    rec.push(format!("{:e}", b[i][j]));
                }
            }
        }
        rec.push(nd.as_ref().map_or(String::new(), |d| d.index.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| GeomError::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::builtin;
    use approx::assert_relative_eq;

    fn close(a: &[Vec<f64>], b: &[Vec<f64>], eps: f64) {
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() <= eps, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn plane_is_totally_geodesic() {
        let c = builtin::plane(3, 2);
        let s = evaluate_sample(&c, &[0.2, -0.1, 0.5], 3).unwrap();
        close(&s.metric, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 0.0);
        assert!(s.sff.iter().flatten().flatten().all(|&x| x == 0.0));
        let nd = relative_nullity(&s, 1e-8).unwrap();
        assert_eq!(nd.index, 3);
        assert_eq!(nd.rank, 0);
    }

    #[test]
    fn graph_product_at_origin() {
        let c = builtin::graph_product();
        let s = evaluate_sample(&c, &[0.0, 0.0, 0.0], 3).unwrap();
        close(&s.metric, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 0.0);
        close(
            &s.normal_frame,
            &[vec![0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0, 0.0]],
            1e-15,
        );
        assert_relative_eq!(s.sff[0][0][0], 2.0);
        assert_relative_eq!(s.sff[1][0][1], 1.0);
        assert_relative_eq!(s.sff[1][1][0], 1.0);
        let others: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                let a = if (i, j) == (0, 0) { 0.0 } else { s.sff[0][i][j].abs() };
                let b = if (i, j) == (0, 1) || (i, j) == (1, 0) { 0.0 } else { s.sff[1][i][j].abs() };
                a + b
            })
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn graph_product_nullity_is_one() {
        let c = builtin::graph_product();
        for p in [[0.3, -0.2, 0.1], [-0.7, 0.5, 0.9], [0.0, 0.0, 0.0]] {
            let s = evaluate_sample(&c, &p, 2).unwrap();
            let nd = relative_nullity(&s, 1e-8).unwrap();
            assert_eq!(nd.index, 1);
            let t = &nd.nullity_basis[0];
            assert!(t[0].abs() < 1e-12 && t[1].abs() < 1e-12);
            assert_relative_eq!(t[2].abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cylinder_has_one_principal_curvature() {
        let c = builtin::cylinder();
        let s = evaluate_sample(&c, &[0.4, 0.3], 3).unwrap();
        let nd = relative_nullity(&s, 1e-8).unwrap();
        assert_eq!(nd.index, 1);
        let nonzero = s.sff.iter().flatten().flatten().filter(|x| x.abs() > 1e-12).count();
        assert_eq!(nonzero, 1);
        // brute-force curvature: |f_uu| = 1
        let bsum: f64 = s.sff.iter().map(|b| b[0][0] * b[0][0]).sum();
        assert_relative_eq!(bsum.sqrt(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn first_fundamental_form_examples() {
        let id = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        close(&first_fundamental_form(&id), &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0);
        let twice: Vec<Vec<f64>> = id.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect();
        close(&first_fundamental_form(&twice), &[vec![4.0, 0.0], vec![0.0, 4.0]], 0.0);
        let s = evaluate_sample(&builtin::graph_surface(), &[1.0, 0.0], 2).unwrap();
        close(&s.metric, &[vec![5.0, 0.0], vec![0.0, 2.0]], 1e-14);
    }

    #[test]
    fn normal_frame_examples() {
        let axes = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0, 0.0]];
        let nf = normal_frame(&axes).unwrap();
        close(&nf, &[vec![0.0, 0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 0.0, 1.0]], 0.0);
        let s = evaluate_sample(&builtin::graph_surface(), &[0.6, -0.4], 2).unwrap();
        for xi in &s.normal_frame {
            assert_relative_eq!(linalg::fnorm(xi), 1.0, epsilon = 1e-14);
            for f in &s.jacobian {
                assert!(linalg::fdot(xi, f).abs() < 1e-14);
            }
        }
        assert!(normal_frame(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn shape_operator_is_self_adjoint_and_linear() {
        let s = evaluate_sample(&builtin::graph_surface(), &[1.0, 0.0], 2).unwrap();
        let xi = s.normal_frame[0].clone();
        let a = shape_operator(&s, &xi).unwrap();
        // oracle: G⁻¹ B computed by hand for a 2×2 system
        let g = &s.metric;
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let b = &s.sff[0];
        for i in 0..2 {
            for j in 0..2 {
                let e = gi[i][0] * b[0][j] + gi[i][1] * b[1][j];
                assert_relative_eq!(a[i][j], e, epsilon = 1e-14);
            }
        }
        let ga = to_dmatrix(g) * to_dmatrix(&a);
        assert!((ga.clone() - ga.transpose()).amax() < 1e-11);
        let xi2 = s.normal_frame[1].clone();
        let combo: Vec<f64> = xi.iter().zip(&xi2).map(|(p, q)| 0.3 * p - 1.7 * q).collect();
        let lhs = shape_operator(&s, &combo).unwrap();
        let a2 = shape_operator(&s, &xi2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((lhs[i][j] - (0.3 * a[i][j] - 1.7 * a2[i][j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn christoffels_match_ambient_projection() {
        let c = builtin::graph_product();
        let p = [0.4, -0.3, 0.2];
        let s = evaluate_sample(&c, &p, 3).unwrap();
        let gamma = s.christoffels.clone().unwrap();
        let gi = s.metric_inverse().unwrap();
        let sj = sample_jets(&c, &p, 3, &Tolerances::default()).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let fij = values(&sj.hessians[i][j]);
                    let e: f64 = (0..3).map(|l| gi[k][l] * linalg::fdot(&fij, &s.jacobian[l])).sum();
                    assert!((gamma[k][i][j] - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn covariant_derivative_examples() {
        let plane = builtin::plane(2, 2);
        let r = covariant_derivative(&plane, &[0.1, 0.2], |x| Ok(vec![x[0].lift(1.0), x[0].lift(2.0)]), &[0.3, 0.7]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));

        let cyl = builtin::cylinder();
        let r = covariant_derivative(&cyl, &[0.3, 0.1], |x| Ok(vec![x[0].lift(1.0), x[0].lift(0.0)]), &[1.0, 0.0]).unwrap();
        let s = evaluate_sample(&cyl, &[0.3, 0.1], 2).unwrap();
        assert!(fg_inner(&s.metric, &r, &[1.0, 0.0]).abs() < 1e-14);
    }

    #[test]
    fn covariant_derivative_matches_projection_oracle() {
        let chart = builtin::graph_surface();
        let p = [0.35, -0.25];
        let dir = [0.6, -0.8];
        let field = |x: &[JetScalar]| -> GeomResult<Vec<JetScalar>> { Ok(vec![x[0].clone(), x[1].clone()]) };
        let r = covariant_derivative(&chart, &p, field, &dir).unwrap();
        // oracle: D_dir (f_* Y) by central differences, then tangential projection
        let h = 1e-5;
        let push = |q: &[f64]| -> Vec<f64> {
            let s = evaluate_sample(&chart, q, 2).unwrap();
            s.push_forward(q)
        };
        let qp: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let qm: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let (a, b) = (push(&qp), push(&qm));
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect();
        let s = evaluate_sample(&chart, &p, 2).unwrap();
        let gi = s.metric_inverse().unwrap();
        let proj: Vec<f64> = (0..2)
            .map(|k| (0..2).map(|l| gi[k][l] * linalg::fdot(&d, &s.jacobian[l])).sum())
            .collect();
        for (x, y) in r.iter().zip(&proj) {
            assert!((x - y).abs() < 1e-6, "{r:?} vs {proj:?}");
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_sample() {
        let c = builtin::graph_surface();
        let rows: Vec<_> = [[0.1, 0.2], [0.3, -0.4]]
            .iter()
            .map(|p| {
                let s = evaluate_sample(&c, p, 2).unwrap();
                let nd = relative_nullity(&s, 1e-8).ok();
                (s, nd)
            })
            .collect();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x0,x1,g00,g01,g11"));
    }
}
