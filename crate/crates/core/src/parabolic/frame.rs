use serde::{Deserialize, Serialize};

use super::classify::{Rank2Classification, Rank2Kind};
use crate::error::{GeomError, GeomResult};
use crate::immersion::{relative_nullity, GeometrySample, NullityData, SampleJets};
use crate::jets::JetScalar;
use crate::linalg::{
    self, dot, fdot, fg_inner, fnorm, g_inner, g_normalize, lift_vec, normalize, pivoted_gram_schmidt,
    sub_scaled, truncate_mat, truncate_vec, JetMat, JetVec,
};
use crate::tolerances::Tolerances;

/// Fixed chart-coordinate vector used to orient tangent directions:
/// `(1, ρ, ρ², ...)` with `ρ = 0.618...`.
pub fn orientation_reference(n: usize) -> Vec<f64> {
    let rho = (5f64.sqrt() - 1.0) / 2.0;
    (0..n).map(|i| rho.powi(i as i32)).collect()
}

pub(crate) fn orientation_sign(v: &[f64]) -> f64 {
    if fdot(v, &orientation_reference(v.len())) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn orient(v: Vec<f64>) -> Vec<f64> {
    let s = orientation_sign(&v);
    v.into_iter().map(|x| s * x).collect()
}

/// Canonical frame: `A_{η1}` is `[[a, b], [b, 0]]` and `A_{η2}` is
/// `[[c, 0], [0, 0]]` in the basis `(X, Z)` of Δ^⊥.
///
/// Signs: `Z` and `X` have positive pairing with [`orientation_reference`];
/// then `b > 0` and `c > 0` fix `η1` and `η2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicFrame {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `|α(Z, Z)|` in the ambient norm.
    pub pattern_residual: f64,
}

pub fn canonical_frame(
    sample: &GeometrySample,
    classification: &Rank2Classification,
) -> GeomResult<ParabolicFrame> {
    let tol = Tolerances::default();
    let nullity = relative_nullity(sample, tol.nullity_tol)?;
    canonical_frame_with(sample, classification, &nullity, &tol)
}

/// As [`canonical_frame`], with a precomputed nullity decomposition.
pub fn canonical_frame_with(
    sample: &GeometrySample,
    classification: &Rank2Classification,
    nullity: &NullityData,
    tol: &Tolerances,
) -> GeomResult<ParabolicFrame> {
    if classification.kind != Rank2Kind::Parabolic {
        return Err(GeomError::NotParabolic(format!(
            "classification is {}",
            classification.kind.as_str()
        )));
    }
    let g = &sample.metric;
    let z = classification.asymptotic_directions[0].clone();
    let candidates = &nullity.complement_basis;
    // X: the candidate with the largest component G-orthogonal to Z, within Δ^⊥
    let mut best: Option<(f64, Vec<f64>)> = None;
    for w in candidates {
        let c = fg_inner(g, w, &z);
        let v: Vec<f64> = w.iter().zip(&z).map(|(wi, zi)| wi - c * zi).collect();
        let len = fg_inner(g, &v, &v).max(0.0).sqrt();
        if best.as_ref().map_or(true, |(l, _)| len > *l) {
            best = Some((len, v));
        }
    }
    let (len, v) = best.ok_or_else(|| GeomError::FrameDegenerate("no candidate for X".into()))?;
    if len <= tol.frame_tol {
        return Err(GeomError::FrameDegenerate("X candidate collapsed".into()));
    }
    let x = orient(v.iter().map(|vi| vi / len).collect());
    finish_frame(sample, x, z, tol)
}

fn finish_frame(
    sample: &GeometrySample,
    x: Vec<f64>,
    z: Vec<f64>,
    tol: &Tolerances,
) -> GeomResult<ParabolicFrame> {
    let axz = sample.alpha(&x, &z);
    let b = fnorm(&axz);
    if b <= tol.frame_tol {
        return Err(GeomError::FrameDegenerate(format!("b = {b:.3e} vanishes")));
    }
    let eta1: Vec<f64> = axz.iter().map(|v| v / b).collect();
    let axx = sample.alpha(&x, &x);
    let a = fdot(&axx, &eta1);
    let w: Vec<f64> = axx.iter().zip(&eta1).map(|(p, e)| p - a * e).collect();
    let c = fnorm(&w);
    if c <= tol.frame_tol {
        return Err(GeomError::FrameDegenerate(format!("c = {c:.3e} vanishes")));
    }
    let eta2: Vec<f64> = w.iter().map(|v| v / c).collect();
    let pattern_residual = fnorm(&sample.alpha(&z, &z));
    Ok(ParabolicFrame {
        x,
        z,
        eta1,
        eta2,
        a,
        b,
        c,
        pattern_residual,
    })
}

/// Jet extension of the canonical frame around a point.
///
/// Every field is a jet of order `sample.order - 2` whose constant term is
/// the pointwise frame; `nullity` is a metric-orthonormal basis of Δ.
#[derive(Debug, Clone)]
pub struct FrameJets {
    pub order: usize,
    pub metric: JetMat,
    pub x: JetVec,
    pub z: JetVec,
    pub eta1: JetVec,
    pub eta2: JetVec,
    pub a: JetScalar,
    pub b: JetScalar,
    pub c: JetScalar,
    pub alpha_xx: JetVec,
    pub alpha_xz: JetVec,
    pub nullity: Vec<JetVec>,
}

impl FrameJets {
    /// Frame with `η1` and `η2` exchanged and the scalars re-read from `α`;
    /// a deliberately wrong frame for negative controls.
    pub fn swapped(&self) -> FrameJets {
        let mut f = self.clone();
        f.eta1 = self.eta2.clone();
        f.eta2 = self.eta1.clone();
        f.a = dot(&self.alpha_xx, &f.eta1);
        f.b = dot(&self.alpha_xz, &f.eta1);
        f.c = dot(&self.alpha_xx, &f.eta2);
        f
    }

    pub fn values(&self) -> ParabolicFrame {
        ParabolicFrame {
            x: linalg::values(&self.x),
            z: linalg::values(&self.z),
            eta1: linalg::values(&self.eta1),
            eta2: linalg::values(&self.eta2),
            a: self.a.value(),
            b: self.b.value(),
            c: self.c.value(),
            pattern_residual: 0.0,
        }
    }
}

fn alpha_jets(sff: &[JetMat], normals: &[JetVec], u: &[JetScalar], v: &[JetScalar]) -> JetVec {
    let mut out: JetVec = normals[0].iter().map(|x| x.zero_like()).collect();
    for (b, xi) in sff.iter().zip(normals) {
        let s = dot(u, &linalg::mat_vec(b, v));
        for (o, e) in out.iter_mut().zip(xi) {
            *o += &(&s * e);
        }
    }
    out
}

/// Smooth local extension of `frame` from the jet geometry `sj`.
pub fn frame_jets(sj: &SampleJets, frame: &ParabolicFrame, tol: &Tolerances) -> GeomResult<FrameJets> {
    let p = sj.order - 2;
    let n = sj.intrinsic_dim();
    let g = truncate_mat(&sj.metric, p)?;
    let ginv = truncate_mat(&sj.metric_inv, p)?;
    let normals: Vec<JetVec> = sj
        .normals
        .iter()
        .map(|v| truncate_vec(v, p))
        .collect::<GeomResult<_>>()?;
    let sff = &sj.sff;
    let template = g[0][0].clone();

    // Δ^⊥ is the common image of the shape operators.
    let basis: Vec<JetVec> = if n == 2 {
        (0..2)
            .map(|j| (0..2).map(|i| template.lift(if i == j { 1.0 } else { 0.0 })).collect())
            .collect()
    } else {
        let mut cols: Vec<JetVec> = Vec::new();
        for b in sff {
            let a = linalg::mat_vec_cols(&ginv, b);
            cols.extend(a);
        }
        pivoted_gram_schmidt(&g, &cols, 2, 1e-6)?
    };
    if basis.len() != 2 {
        return Err(GeomError::UnstableFrame("image of shape operators is not 2-dimensional".into()));
    }
    let basis_vals: Vec<Vec<f64>> = basis.iter().map(|v| linalg::values(v)).collect();
    let gv = linalg::mat_values(&g);
    let coords = |w: &[f64]| -> Vec<f64> {
        if n == 2 {
            w.to_vec()
        } else {
            basis_vals.iter().map(|q| fg_inner(&gv, w, q)).collect()
        }
    };
    let (zc, xc) = (coords(&frame.z), coords(&frame.x));
    let zd = linalg::combine(&lift_vec(&template, &zc), &basis);
    let xd = linalg::combine(&lift_vec(&template, &xc), &basis);

    // Follow the simple root of the η1-form through Z: solve
    // q(Zd + s Xd) = A0 + 2 A1 s + A2 s² = 0 for the small root s.
    let eta1_const = lift_vec(&template, &frame.eta1);
    let weights: JetVec = normals.iter().map(|xi| dot(xi, &eta1_const)).collect();
    let mut q: JetMat = vec![vec![template.zero_like(); n]; n];
    for (b, w) in sff.iter().zip(&weights) {
        for i in 0..n {
            for j in 0..n {
                q[i][j] += &(&b[i][j] * w);
            }
        }
    }
    let form = |u: &[JetScalar], v: &[JetScalar]| dot(u, &linalg::mat_vec(&q, v));
    let a0 = form(&zd, &zd);
    let a1 = form(&zd, &xd);
    let a2 = form(&xd, &xd);
    if a1.value().abs() <= tol.frame_tol {
        return Err(GeomError::UnstableFrame("asymptotic root is not simple".into()));
    }
    let disc = &(&a1 * &a1) - &(&a0 * &a2);
    if disc.value() <= 0.0 {
        return Err(GeomError::UnstableFrame("asymptotic root lost".into()));
    }
    let sign = a1.value().signum();
    let denom = &a1 + &disc.sqrt()?.scale(sign);
    let s = -(a0.try_div(&denom)?);
    let z = g_normalize(&g, &linalg::add(&zd, &linalg::scale(&xd, &s)), 0.0)?;
    let cz = g_inner(&g, &xd, &z);
    let x = g_normalize(&g, &sub_scaled(&xd, &cz, &z), 0.0)?;

    let alpha_xz = alpha_jets(sff, &normals, &x, &z);
    let alpha_xx = alpha_jets(sff, &normals, &x, &x);
    let eta1 = normalize(&alpha_xz, tol.frame_tol)?;
    let a = dot(&alpha_xx, &eta1);
    let eta2 = normalize(&sub_scaled(&alpha_xx, &a, &eta1), tol.frame_tol)?;
    let b = dot(&alpha_xz, &eta1);
    let c = dot(&alpha_xx, &eta2);

    // Δ: metric complement of span{X, Z}, from projected coordinate axes.
    let axes: Vec<JetVec> = (0..n)
        .map(|j| {
            let e: JetVec = (0..n).map(|i| template.lift(if i == j { 1.0 } else { 0.0 })).collect();
            let cx = g_inner(&g, &e, &x);
            let e = sub_scaled(&e, &cx, &x);
            let cz = g_inner(&g, &e, &z);
            sub_scaled(&e, &cz, &z)
        })
        .collect();
    let nullity = if n > 2 {
        pivoted_gram_schmidt(&g, &axes, n - 2, 1e-8)?
    } else {
        Vec::new()
    };
    if nullity.len() != n - 2 {
        return Err(GeomError::UnstableFrame("nullity basis lost rank".into()));
    }
    let check = linalg::values(&eta1);
    if fdot(&check, &frame.eta1) < 0.5 {
        return Err(GeomError::UnstableFrame("jet frame disagrees with pointwise frame".into()));
    }
    Ok(FrameJets {
        order: p,
        metric: g,
        x,
        z,
        eta1,
        eta2,
        a,
        b,
        c,
        alpha_xx,
        alpha_xz,
        nullity,
    })
}
