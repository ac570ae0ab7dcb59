use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{asymptotic_directions_with, Rank2Classification, Rank2Kind};
use super::frame::{canonical_frame_with, frame_jets, FrameJets, ParabolicFrame};
use super::fundamental::{fundamental_from_jets, Corruption, FundamentalResiduals};
use super::structure::{
    codazzi_from, ruled_from, splitting_from, CodazziIdentityResiduals, Connection,
    SplittingTensorSample,
};
use crate::error::GeomResult;
use crate::immersion::{relative_nullity, sample_jets, GeometrySample, ImmersionChart, NullityData, SampleJets};
use crate::linalg::mat_values;
use crate::tolerances::Tolerances;

/// Everything computed at one point, for callers that need more than the
/// summary row.
#[derive(Debug, Clone)]
pub struct PointContext {
    pub jets: SampleJets,
    pub sample: GeometrySample,
    pub nullity: NullityData,
    pub classification: Option<Rank2Classification>,
    pub frame: Option<ParabolicFrame>,
    pub frame_jets: Option<FrameJets>,
    /// Why the rank-two stage stopped early, if it did.
    pub note: Option<String>,
}

impl PointContext {
    pub fn new(chart: &ImmersionChart, point: &[f64], tol: &Tolerances) -> GeomResult<Self> {
        let jets = sample_jets(chart, point, 3, tol)?;
        let sample = jets.to_sample()?;
        let nullity = relative_nullity(&sample, tol.nullity_tol)?;
        let mut ctx = PointContext {
            jets,
            sample,
            nullity,
            classification: None,
            frame: None,
            frame_jets: None,
            note: None,
        };
        if let Err(e) = ctx.rank_two_stage(tol) {
            ctx.note = Some(e.to_string());
        }
        Ok(ctx)
    }

    fn rank_two_stage(&mut self, tol: &Tolerances) -> GeomResult<()> {
        let c = asymptotic_directions_with(&self.sample, &self.nullity, tol)?;
        let kind = c.kind;
        self.classification = Some(c);
        if kind != Rank2Kind::Parabolic {
            return Ok(());
        }
        let frame = canonical_frame_with(
            &self.sample,
            self.classification.as_ref().expect("set above"),
            &self.nullity,
            tol,
        )?;
        let fj = frame_jets(&self.jets, &frame, tol)?;
        self.frame = Some(frame);
        self.frame_jets = Some(fj);
        Ok(())
    }

    fn connection(&self) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        (self.jets.christoffel_values(), mat_values(&self.jets.metric))
    }

    pub fn splitting(&self) -> Option<SplittingTensorSample> {
        let fj = self.frame_jets.as_ref()?;
        let (gamma, metric) = self.connection();
        Some(splitting_from(fj, &Connection { gamma: &gamma, metric }))
    }

    pub fn ruled_residual(&self) -> Option<f64> {
        let fj = self.frame_jets.as_ref()?;
        let (gamma, metric) = self.connection();
        Some(ruled_from(fj, &Connection { gamma: &gamma, metric }))
    }

    pub fn codazzi_identities(&self) -> Option<CodazziIdentityResiduals> {
        let fj = self.frame_jets.as_ref()?;
        let (gamma, metric) = self.connection();
        Some(codazzi_from(fj, &Connection { gamma: &gamma, metric }))
    }

    /// Identities evaluated in the frame with `η1` and `η2` exchanged.
    pub fn codazzi_identities_swapped(&self) -> Option<CodazziIdentityResiduals> {
        let fj = self.frame_jets.as_ref()?.swapped();
        let (gamma, metric) = self.connection();
        Some(codazzi_from(&fj, &Connection { gamma: &gamma, metric }))
    }

    pub fn fundamental(&self, corruption: Corruption) -> GeomResult<FundamentalResiduals> {
        fundamental_from_jets(&self.jets, corruption)
    }

    /// `(|a|, |b|, |c|, ω(Z), ω(X))` with the canonical sign conventions.
    pub fn congruence_values(&self) -> Option<[f64; 5]> {
        let f = self.frame.as_ref()?;
        let r = self.codazzi_identities()?;
        Some([f.a.abs(), f.b.abs(), f.c.abs(), r.omega_z, r.omega_x])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Accepted,
    Rejected,
}

/// One row of a grid analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub point: Vec<f64>,
    pub status: PointStatus,
    pub reason: Option<String>,
    pub nu: Option<usize>,
    pub rank: Option<usize>,
    pub nullity_marginal: bool,
    pub first_normal_dim: Option<usize>,
    pub kind: Option<Rank2Kind>,
    pub asymptotic_count: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub off_pattern: Option<f64>,
    pub dif_symmetry: Option<f64>,
    pub surface_like_residual: Option<f64>,
    pub ruled_residual: Option<f64>,
    pub r_first: Option<f64>,
    pub r_second: Option<f64>,
    pub r_igual: Option<f64>,
    pub omega_z: Option<f64>,
    pub omega_x: Option<f64>,
    pub gauss: Option<f64>,
    pub codazzi: Option<f64>,
    pub ricci: Option<f64>,
}

impl PointAnalysis {
    fn rejected(point: &[f64], reason: String) -> Self {
        PointAnalysis {
            point: point.to_vec(),
            status: PointStatus::Rejected,
            reason: Some(reason),
            nu: None,
            rank: None,
            nullity_marginal: false,
            first_normal_dim: None,
            kind: None,
            asymptotic_count: None,
            a: None,
            b: None,
            c: None,
            m: Vec::new(),
            n: Vec::new(),
            off_pattern: None,
            dif_symmetry: None,
            surface_like_residual: None,
            ruled_residual: None,
            r_first: None,
            r_second: None,
            r_igual: None,
            omega_z: None,
            omega_x: None,
            gauss: None,
            codazzi: None,
            ricci: None,
        }
    }

    pub fn accepted(&self) -> bool {
        self.status == PointStatus::Accepted
    }

    pub fn is_parabolic(&self) -> bool {
        self.kind == Some(Rank2Kind::Parabolic) && self.a.is_some()
    }
}

/// Summary of everything the pipeline can say about `chart` at `point`.
/// Singular and marginal points are rejected with a reason; later stages
/// that fail leave their fields empty and record a note in `reason`.
pub fn analyze_point(chart: &ImmersionChart, point: &[f64], tol: &Tolerances) -> PointAnalysis {
    let ctx = match PointContext::new(chart, point, tol) {
        Ok(c) => c,
        Err(e) => return PointAnalysis::rejected(point, e.to_string()),
    };
    if ctx.nullity.marginal {
        return PointAnalysis::rejected(point, "marginal nullity rank".into());
    }
    let mut row = PointAnalysis::rejected(point, String::new());
    row.status = PointStatus::Accepted;
    row.reason = ctx.note.clone();
    row.nu = Some(ctx.nullity.index);
    row.rank = Some(ctx.nullity.rank);
    if let Ok(f) = ctx.fundamental(Corruption::None) {
        row.gauss = Some(f.gauss);
        row.codazzi = Some(f.codazzi);
        row.ricci = Some(f.ricci);
    }
    if let Some(c) = &ctx.classification {
        row.first_normal_dim = Some(c.first_normal_dim);
        row.kind = Some(c.kind);
        row.asymptotic_count = Some(c.asymptotic_directions.len());
    }
    if let Some(f) = &ctx.frame {
        row.a = Some(f.a);
        row.b = Some(f.b);
        row.c = Some(f.c);
    }
    if let Some(st) = ctx.splitting() {
        row.m = st.entries.iter().map(|e| e.m).collect();
        row.n = st.entries.iter().map(|e| e.n).collect();
        row.off_pattern = Some(st.off_pattern_residual);
        row.dif_symmetry = Some(st.dif_symmetry_residual);
        row.surface_like_residual = Some(super::surface_like_residual(&st));
    }
    row.ruled_residual = ctx.ruled_residual();
    if let Some(r) = ctx.codazzi_identities() {
        row.r_first = Some(r.r_first);
        row.r_second = Some(r.r_second);
        row.r_igual = Some(r.r_igual);
        row.omega_z = Some(r.omega_z);
        row.omega_x = Some(r.omega_x);
    }
    row
}

/// Parametrization-independent scalars of a parabolic point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceRow {
    pub point: Vec<f64>,
    /// `(|a|, |b|, |c|, ω(Z), ω(X))`, absent at points without a canonical frame.
    pub values: Option<[f64; 5]>,
}

pub fn congruence_invariants(
    chart: &ImmersionChart,
    grid: &[Vec<f64>],
    tol: &Tolerances,
) -> Vec<CongruenceRow> {
    grid.par_iter()
        .map(|p| CongruenceRow {
            point: p.clone(),
            values: PointContext::new(chart, p, tol)
                .ok()
                .and_then(|c| c.congruence_values()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{builtin, RigidMotion};

    #[test]
    fn plane_is_rank_zero() {
        let row = analyze_point(&builtin::plane(3, 2), &[0.1, 0.2, 0.3], &Tolerances::default());
        assert!(row.accepted());
        assert_eq!(row.rank, Some(0));
        assert!(row.kind.is_none());
    }

    #[test]
    fn graph_product_row() {
        let row = analyze_point(&builtin::graph_product(), &[0.2, 0.1, -0.3], &Tolerances::default());
        assert!(row.is_parabolic());
        assert_eq!(row.nu, Some(1));
        assert!(row.gauss.unwrap() < 1e-10);
        assert!(row.n[0].abs() < 1e-12);
    }

    #[test]
    fn congruence_table_is_rigid_invariant() {
        let c = builtin::graph_product();
        let moved = c.with_rigid_motion(&RigidMotion::random(5, 9)).unwrap();
        let grid = c.domain().shrunk(0.8).grid(&[3, 3, 2]).unwrap();
        let tol = Tolerances::default();
        let a = congruence_invariants(&c, &grid, &tol);
        let b = congruence_invariants(&moved, &grid, &tol);
        for (ra, rb) in a.iter().zip(&b) {
            let (va, vb) = (ra.values.unwrap(), rb.values.unwrap());
            for (x, y) in va.iter().zip(&vb) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
