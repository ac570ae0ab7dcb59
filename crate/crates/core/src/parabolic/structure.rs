use serde::{Deserialize, Serialize};

use super::frame::{frame_jets, FrameJets, ParabolicFrame};
use crate::error::{GeomError, GeomResult};
use crate::immersion::{covariant_from_jets, sample_jets, ImmersionChart, NullityData};
use crate::linalg::{self, columns, fdot, fg_inner, subspace_distance, values, JetVec};
use crate::tolerances::Tolerances;

/// Splitting tensor of one nullity vector, in the basis `(X, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingEntry {
    pub t: Vec<f64>,
    /// `matrix[row][col]`: column `col` holds the coordinates of `C_T`
    /// applied to the `col`-th basis vector.
    pub matrix: [[f64; 2]; 2],
    pub m: f64,
    pub n: f64,
    pub off_pattern: f64,
    /// Largest asymmetry of `A_η ∘ C_T` over `η ∈ {η1, η2}`.
    pub dif_symmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingTensorSample {
    pub entries: Vec<SplittingEntry>,
    pub off_pattern_residual: f64,
    pub dif_symmetry_residual: f64,
    pub max_abs_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodazziIdentityResiduals {
    pub r_first: f64,
    pub r_second: f64,
    pub r_igual: f64,
    /// `⟨∇^⊥_Z η1, η2⟩`.
    pub omega_z: f64,
    /// `⟨∇^⊥_X η1, η2⟩`.
    pub omega_x: f64,
}

impl CodazziIdentityResiduals {
    pub fn max_abs(&self) -> f64 {
        self.r_first.abs().max(self.r_second.abs()).max(self.r_igual.abs())
    }
}

pub(crate) struct Connection<'a> {
    pub gamma: &'a [Vec<Vec<f64>>],
    pub metric: Vec<Vec<f64>>,
}

impl Connection<'_> {
    fn nabla(&self, field: &JetVec, dir: &[f64]) -> Vec<f64> {
        covariant_from_jets(self.gamma, field, dir)
    }

    /// `⟨∇_dir field, target⟩_G`.
    fn pair(&self, field: &JetVec, dir: &[f64], target: &[f64]) -> f64 {
        fg_inner(&self.metric, &self.nabla(field, dir), target)
    }
}

/// Normal connection form `ω(Y) = ⟨D_Y η1, η2⟩`.
pub(crate) fn omega(fj: &FrameJets, y: &[f64]) -> f64 {
    let e2 = values(&fj.eta2);
    fj.eta1
        .iter()
        .zip(&e2)
        .map(|(c, e)| fdot(&c.gradient(), y) * e)
        .sum()
}

pub(crate) fn splitting_from(fj: &FrameJets, conn: &Connection) -> SplittingTensorSample {
    let (x, z) = (values(&fj.x), values(&fj.z));
    let (a, b, c) = (fj.a.value(), fj.b.value(), fj.c.value());
    let forms = [[[a, b], [b, 0.0]], [[c, 0.0], [0.0, 0.0]]];
    let mut entries = Vec::new();
    for t in &fj.nullity {
        let cxx = -conn.pair(t, &x, &x);
        let cxz = -conn.pair(t, &x, &z);
        let czx = -conn.pair(t, &z, &x);
        let czz = -conn.pair(t, &z, &z);
        let matrix = [[cxx, czx], [cxz, czz]];
        let off_pattern = czx.abs().max((cxx - czz).abs());
        let mut dif_symmetry: f64 = 0.0;
        for f in &forms {
            let m01 = f[0][0] * matrix[0][1] + f[0][1] * matrix[1][1];
            let m10 = f[1][0] * matrix[0][0] + f[1][1] * matrix[1][0];
            dif_symmetry = dif_symmetry.max((m01 - m10).abs());
        }
        entries.push(SplittingEntry {
            t: values(t),
            matrix,
            m: cxx,
            n: cxz,
            off_pattern,
            dif_symmetry,
        });
    }
    let off_pattern_residual = entries.iter().map(|e| e.off_pattern).fold(0.0, f64::max);
    let dif_symmetry_residual = entries.iter().map(|e| e.dif_symmetry).fold(0.0, f64::max);
    let max_abs_n = entries.iter().map(|e| e.n.abs()).fold(0.0, f64::max);
    SplittingTensorSample {
        entries,
        off_pattern_residual,
        dif_symmetry_residual,
        max_abs_n,
    }
}

pub(crate) fn ruled_from(fj: &FrameJets, conn: &Connection) -> f64 {
    let (x, z) = (values(&fj.x), values(&fj.z));
    let mut r = conn.pair(&fj.z, &z, &x).abs();
    for t in &fj.nullity {
        r = r.max(conn.pair(&fj.z, &values(t), &x).abs());
    }
    r
}

pub(crate) fn codazzi_from(fj: &FrameJets, conn: &Connection) -> CodazziIdentityResiduals {
    let (x, z) = (values(&fj.x), values(&fj.z));
    let (a, b, c) = (fj.a.value(), fj.b.value(), fj.c.value());
    let zb = fdot(&fj.b.gradient(), &z);
    let xb = fdot(&fj.b.gradient(), &x);
    let za = fdot(&fj.a.gradient(), &z);
    let xx_z = conn.pair(&fj.x, &x, &z);
    let zx_z = conn.pair(&fj.x, &z, &z);
    let xz_x = conn.pair(&fj.z, &x, &x);
    let zz_x = conn.pair(&fj.z, &z, &x);
    let omega_z = omega(fj, &z);
    let omega_x = omega(fj, &x);
    CodazziIdentityResiduals {
        r_first: 2.0 * b * xx_z - a * zx_z - zb,
        r_second: xb - a * xz_x - za + 2.0 * b * zx_z + c * omega_z,
        r_igual: c * zz_x - b * omega_z,
        omega_z,
        omega_x,
    }
}

struct Prepared {
    gamma: Vec<Vec<Vec<f64>>>,
    fj: FrameJets,
}

fn prepare(
    chart: &ImmersionChart,
    point: &[f64],
    frame: &ParabolicFrame,
    nullity: &NullityData,
) -> GeomResult<Prepared> {
    let tol = Tolerances::default();
    let sj = sample_jets(chart, point, 3, &tol)?;
    let fj = frame_jets(&sj, frame, &tol)?;
    if !fj.nullity.is_empty() {
        let a = columns(&fj.nullity.iter().map(|t| values(t)).collect::<Vec<_>>());
        let qa = linalg::column_span(&a, a.ncols());
        let b = columns(&nullity.nullity_basis);
        let qb = linalg::column_span(&b, b.ncols());
        if b.ncols() != a.ncols() || subspace_distance(&qa, &qb) > 1e-6 {
            return Err(GeomError::UnstableFrame(
                "nullity extension does not match the supplied nullity basis".into(),
            ));
        }
    }
    Ok(Prepared {
        gamma: sj.christoffel_values(),
        fj,
    })
}

/// `C_T X = −(∇_X T)_{Δ^⊥}` for each nullity basis vector, in the basis `(X, Z)`.
pub fn splitting_tensor(
    chart: &ImmersionChart,
    point: &[f64],
    frame: &ParabolicFrame,
    nullity: &NullityData,
) -> GeomResult<SplittingTensorSample> {
    let p = prepare(chart, point, frame, nullity)?;
    let conn = Connection {
        gamma: &p.gamma,
        metric: linalg::mat_values(&p.fj.metric),
    };
    Ok(splitting_from(&p.fj, &conn))
}

/// `max(|n|, off-pattern residual)` over the nullity basis.
pub fn surface_like_residual(splitting: &SplittingTensorSample) -> f64 {
    splitting.max_abs_n.max(splitting.off_pattern_residual)
}

/// `max(|⟨∇_Z Z, X⟩|, |⟨∇_T Z, X⟩|)`; vanishes on ruled submanifolds.
pub fn ruled_residual(
    chart: &ImmersionChart,
    point: &[f64],
    frame: &ParabolicFrame,
    nullity: &NullityData,
) -> GeomResult<f64> {
    let p = prepare(chart, point, frame, nullity)?;
    let conn = Connection {
        gamma: &p.gamma,
        metric: linalg::mat_values(&p.fj.metric),
    };
    Ok(ruled_from(&p.fj, &conn))
}

/// Residuals of the three identities the Codazzi equations impose on a
/// parabolic canonical frame.
pub fn codazzi_identity_residuals(
    chart: &ImmersionChart,
    point: &[f64],
    frame: &ParabolicFrame,
    nullity: &NullityData,
) -> GeomResult<CodazziIdentityResiduals> {
    let p = prepare(chart, point, frame, nullity)?;
    let conn = Connection {
        gamma: &p.gamma,
        metric: linalg::mat_values(&p.fj.metric),
    };
    Ok(codazzi_from(&p.fj, &conn))
}
