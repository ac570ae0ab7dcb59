use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, GeomResult};
use crate::immersion::{first_fundamental_form, ImmersionChart};
use crate::parabolic::congruence_invariants;
use crate::tolerances::Tolerances;

/// Wording of a positive congruence verdict: the check is only a necessary
/// condition.
pub const CONGRUENCE_CAVEAT: &str = "no invariant distinguishes the pair at the tested tolerance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub point: Vec<f64>,
    /// Largest entrywise difference of the pullback metrics.
    pub metric_diff: f64,
    /// Largest difference of the congruence invariants, when both charts
    /// have a canonical frame at the point.
    pub invariant_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub isometric: bool,
    /// `false` is definitive; `true` means [`CONGRUENCE_CAVEAT`].
    pub congruent: bool,
    pub max_metric_diff: f64,
    pub max_invariant_diff: Option<f64>,
    /// Points where both invariant rows exist.
    pub comparable_points: usize,
    /// Points where exactly one chart has a canonical frame.
    pub frame_mismatches: usize,
    pub iso_tol: f64,
    pub congruence_tol: f64,
    pub rows: Vec<ComparisonRow>,
}

fn metric_at(chart: &ImmersionChart, p: &[f64]) -> GeomResult<Vec<Vec<f64>>> {
    let jets = chart.eval_at(p, 1)?;
    let n = chart.intrinsic_dim();
    let jac: Vec<Vec<f64>> = (0..n).map(|i| jets.iter().map(|y| y.gradient()[i]).collect()).collect();
    Ok(first_fundamental_form(&jac))
}

/// Compares pullback metrics and congruence invariants of two charts on a
/// grid shared by both domains.
pub fn compare_immersions(
    a: &ImmersionChart,
    b: &ImmersionChart,
    grid: &[Vec<f64>],
    tol: &Tolerances,
) -> GeomResult<Comparison> {
    if a.intrinsic_dim() != b.intrinsic_dim() {
        return Err(GeomError::GridMismatch(format!(
            "charts of dimension {} and {}",
            a.intrinsic_dim(),
            b.intrinsic_dim()
        )));
    }
    if let Some(p) = grid.iter().find(|p| !a.domain().contains(p) || !b.domain().contains(p)) {
        return Err(GeomError::GridMismatch(format!("grid point {p:?} outside a chart domain")));
    }
    let diffs = grid
        .par_iter()
        .map(|p| {
            let (ga, gb) = (metric_at(a, p)?, metric_at(b, p)?);
            Ok(ga.iter().flatten().zip(gb.iter().flatten()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
        })
        .collect::<GeomResult<Vec<f64>>>()?;
    let ia = congruence_invariants(a, grid, tol);
    let ib = congruence_invariants(b, grid, tol);
    let mut rows = Vec::with_capacity(grid.len());
    let mut mismatches = 0;
    for ((p, d), (ra, rb)) in grid.iter().zip(diffs).zip(ia.iter().zip(&ib)) {
        let invariant_diff = match (&ra.values, &rb.values) {
            (Some(x), Some(y)) => Some(x.iter().zip(y).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()))),
            (None, None) => None,
            _ => {
                mismatches += 1;
                None
            }
        };
        rows.push(ComparisonRow { point: p.clone(), metric_diff: d, invariant_diff });
    }
    let max_metric_diff = rows.iter().fold(0.0_f64, |m, r| m.max(r.metric_diff));
    let inv: Vec<f64> = rows.iter().filter_map(|r| r.invariant_diff).collect();
    let max_invariant_diff = inv.iter().copied().reduce(f64::max);
    let isometric = max_metric_diff <= tol.iso_tol;
    let congruent = isometric && max_invariant_diff.is_none_or(|d| d <= tol.congruence_tol);
    Ok(Comparison {
        label_a: a.label().to_string(),
        label_b: b.label().to_string(),
        isometric,
        congruent,
        max_metric_diff,
        max_invariant_diff,
        comparable_points: inv.len(),
        frame_mismatches: mismatches,
        iso_tol: tol.iso_tol,
        congruence_tol: tol.congruence_tol,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{builtin, RigidMotion};

    #[test]
    fn chart_against_itself() {
        let c = builtin::graph_product();
        let grid = c.domain().shrunk(0.8).grid(&[3, 3, 3]).unwrap();
        let r = compare_immersions(&c, &c, &grid, &Tolerances::default()).unwrap();
        assert!(r.isometric && r.congruent);
        assert_eq!(r.max_metric_diff, 0.0);
        assert_eq!(r.comparable_points, 27);
    }

    #[test]
    fn rigid_copy_is_congruent() {
        let c = builtin::graph_product();
        let moved = c.with_rigid_motion(&RigidMotion::random(5, 4)).unwrap();
        let grid = c.domain().shrunk(0.8).grid(&[3, 3, 3]).unwrap();
        let r = compare_immersions(&c, &moved, &grid, &Tolerances::default()).unwrap();
        assert!(r.isometric && r.congruent, "{} {:?}", r.max_metric_diff, r.max_invariant_diff);
    }

    #[test]
    fn different_dimensions_are_incompatible() {
        let grid = vec![vec![0.0, 0.0]];
        let r = compare_immersions(&builtin::cylinder(), &builtin::graph_product(), &grid, &Tolerances::default());
        assert!(matches!(r, Err(GeomError::GridMismatch(_))));
    }
}
