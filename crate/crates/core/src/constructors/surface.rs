use serde::{Deserialize, Serialize};

use super::coeffs::PolyTable;
use crate::error::{GeomError, GeomResult};
use crate::immersion::{eval_poly, evaluate_sample, DomainBox, ImmersionChart};
use crate::jets::JetScalar;
use crate::linalg::{numerical_rank, singular_values, to_dmatrix};
use crate::parabolic::analyze_point;
use crate::tolerances::{Detection, Tolerances};

/// Parabolic surfaces `g(x, z)` whose coordinate field `∂z` is asymptotic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceFamily {
    /// `(x, z, x², xz, x³, ..., xⁿ)` in `ℝⁿ⁺²`; the `z`-lines are straight.
    RuledGraph { n: usize },
    /// Heat polynomials `H_1, ..., H_{n+2}` with `∂_x H = ∂_z² H`, so that
    /// `g_zz = g_x` and the `z`-lines bend.
    Heat { n: usize },
    /// Polynomial coordinates, rows `[coeff, p_x, p_z]`.
    Custom { coordinates: Vec<PolyTable> },
}

/// Heat polynomial `H_k(x, z) = Σ_j k!/(j!(k−2j)!) x^j z^{k−2j}`.
fn heat_polynomial(k: u32) -> PolyTable {
    let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
    PolyTable(
        (0..=k / 2)
            .map(|j| vec![fact(k) / (fact(j) * fact(k - 2 * j)), f64::from(j), f64::from(k - 2 * j)])
            .collect(),
    )
}

impl SurfaceFamily {
    pub fn coordinates(&self) -> GeomResult<Vec<PolyTable>> {
        match self {
            SurfaceFamily::RuledGraph { n } => {
                if *n < 2 {
                    return Err(GeomError::InvalidInput("surface family needs n ≥ 2".into()));
                }
                let mut c = vec![
                    PolyTable::monomial(1.0, &[1, 0]),
                    PolyTable::monomial(1.0, &[0, 1]),
                    PolyTable::monomial(1.0, &[2, 0]),
                    PolyTable::monomial(1.0, &[1, 1]),
                ];
                for p in 3..=(*n as u32) {
                    c.push(PolyTable::monomial(1.0, &[p, 0]));
                }
                Ok(c)
            }
            SurfaceFamily::Heat { n } => {
                if *n < 2 {
                    return Err(GeomError::InvalidInput("surface family needs n ≥ 2".into()));
                }
                Ok((1..=(*n as u32 + 2)).map(heat_polynomial).collect())
            }
            SurfaceFamily::Custom { coordinates } => Ok(coordinates.clone()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SurfaceFamily::RuledGraph { .. } => "ruled_graph_surface",
            SurfaceFamily::Heat { .. } => "heat_surface",
            SurfaceFamily::Custom { .. } => "custom_surface",
        }
    }

    pub fn chart(&self, domain: DomainBox) -> GeomResult<ImmersionChart> {
        let coords = self.coordinates()?;
        if coords.len() < 4 {
            return Err(GeomError::InvalidInput("a parabolic surface needs at least 4 ambient coordinates".into()));
        }
        let terms: Vec<_> = coords.iter().map(|c| c.terms(2)).collect::<GeomResult<_>>()?;
        let ambient = terms.len();
        ImmersionChart::new(self.label(), 2, ambient, domain, move |x| {
            Ok(terms.iter().map(|t| eval_poly(t, x)).collect::<Vec<JetScalar>>())
        })
    }
}

/// Data for the polar construction over a parabolic surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSurfaceInput {
    pub surface: SurfaceFamily,
    #[serde(default = "default_domain")]
    pub domain: DomainBox,
    /// Potential `φ(x, z)`; must satisfy `Hess_φ(∂z, ∂z) = 0`.
    pub phi: PolyTable,
    /// Coefficients of `γ_0` in the computed frame of `Λ`; missing entries are zero.
    #[serde(default)]
    pub gamma0: Vec<PolyTable>,
    /// Half width of the fibre coordinates of the extension.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_domain() -> DomainBox {
    DomainBox::cube(2, 0.5)
}

fn default_half_width() -> f64 {
    0.2
}

impl PolarSurfaceInput {
    /// Straight asymptotic lines, `φ = x²z`, small constant `γ_0`.
    ///
    /// Potentials `A(x) + z·B(x)` with `B'' = 0` make `Ψ` constant along
    /// the rulings, hence singular everywhere.
    pub fn ruled_example(n: usize) -> Self {
        PolarSurfaceInput {
            surface: SurfaceFamily::RuledGraph { n },
            domain: default_domain(),
            phi: PolyTable::monomial(1.0, &[2, 1]),
            gamma0: vec![PolyTable::monomial(0.1, &[0, 0]); n.saturating_sub(2)],
            half_width: default_half_width(),
        }
    }

    /// Bent asymptotic lines, `φ = z` (the first heat polynomial).
    pub fn heat_example(n: usize) -> Self {
        PolarSurfaceInput {
            surface: SurfaceFamily::Heat { n },
            domain: default_domain(),
            phi: PolyTable::monomial(1.0, &[0, 1]),
            gamma0: vec![PolyTable::monomial(0.1, &[0, 0]); n.saturating_sub(2)],
            half_width: default_half_width(),
        }
    }
}

/// Checks performed on a parabolic surface chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub samples: usize,
    /// Largest `|α(∂z, ∂z)|` over the samples.
    pub max_asymptotic_residual: f64,
    pub first_normal_dims: [usize; 2],
    /// Largest ruled-detector value over the samples.
    pub ruled_residual: f64,
    pub ruled: Detection,
    /// `W = −∇_{∂z} ∂z` at the domain centre.
    pub w_center: Vec<f64>,
}

const SURFACE_GRID: usize = 7;

/// Builds the chart of `family` and verifies that `∂z` is asymptotic and
/// the first normal space is a plane at sampled points. Ruledness is
/// measured with the detector, never assumed.
pub fn parabolic_surface_chart(
    family: &SurfaceFamily,
    domain: &DomainBox,
    tol: &Tolerances,
) -> GeomResult<(ImmersionChart, SurfaceReport)> {
    let chart = family.chart(domain.clone())?;
    let grid = domain.grid(&[SURFACE_GRID, SURFACE_GRID])?;
    let mut max_asym: f64 = 0.0;
    let mut dims = [usize::MAX, 0];
    let mut ruled: f64 = 0.0;
    for p in &grid {
        let s = evaluate_sample(&chart, p, 3)?;
        let codim = s.codim();
        let scale = s
            .sff
            .iter()
            .flat_map(|b| b.iter().flatten())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let zz = s.sff.iter().fold(0.0_f64, |m, b| m.max(b[1][1].abs()));
        max_asym = max_asym.max(zz);
        if zz > 1e-9 * scale.max(1.0) {
            return Err(GeomError::NotParabolic(format!("α(∂z, ∂z) = {zz:.2e} at {p:?}")));
        }
        let rows: Vec<Vec<f64>> = (0..codim).map(|k| vec![s.sff[k][0][0], s.sff[k][0][1], s.sff[k][1][1]]).collect();
        let d = numerical_rank(&singular_values(&to_dmatrix(&rows)), tol.nullity_tol);
        dims[0] = dims[0].min(d);
        dims[1] = dims[1].max(d);
        if d != 2 {
            return Err(GeomError::NormalSpaceDim(d));
        }
        let row = analyze_point(&chart, p, tol);
        match row.ruled_residual {
            Some(r) => ruled = ruled.max(r),
            None => {
                return Err(GeomError::NotParabolic(format!(
                    "no canonical frame at {p:?}: {}",
                    row.reason.unwrap_or_default()
                )))
            }
        }
    }
    let c = evaluate_sample(&chart, &domain.center(), 3)?;
    let gamma = c.christoffels.as_ref().expect("order-3 sample");
    let w_center = (0..2).map(|k| -gamma[k][1][1]).collect();
    let report = SurfaceReport {
        samples: grid.len(),
        max_asymptotic_residual: max_asym,
        first_normal_dims: dims,
        ruled_residual: ruled,
        ruled: tol.detect(ruled),
        w_center,
    };
    Ok((chart, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_polynomials_solve_the_heat_equation() {
        let h5 = heat_polynomial(5);
        // z⁵ + 20xz³ + 60x²z
        let mut rows = h5.0.clone();
        rows.sort_by(|a, b| a[1].total_cmp(&b[1]));
        assert_eq!(rows, vec![vec![1.0, 0.0, 5.0], vec![20.0, 1.0, 3.0], vec![60.0, 2.0, 1.0]]);
    }

    #[test]
    fn graph_surface_in_r4() {
        let fam = SurfaceFamily::Custom {
            coordinates: vec![
                PolyTable::monomial(1.0, &[1, 0]),
                PolyTable::monomial(1.0, &[0, 1]),
                PolyTable::monomial(1.0, &[2, 0]),
                PolyTable::monomial(1.0, &[1, 1]),
            ],
        };
        let (chart, rep) = parabolic_surface_chart(&fam, &DomainBox::cube(2, 0.5), &Tolerances::default()).unwrap();
        assert_eq!(rep.max_asymptotic_residual, 0.0);
        assert_eq!(rep.first_normal_dims, [2, 2]);
        let s = evaluate_sample(&chart, &[0.0, 0.0], 3).unwrap();
        let g = s.christoffels.unwrap();
        assert_eq!((g[0][1][1], g[1][1][1]), (0.0, 0.0));
    }

    #[test]
    fn plane_is_rejected() {
        let fam = SurfaceFamily::Custom {
            coordinates: vec![
                PolyTable::monomial(1.0, &[1, 0]),
                PolyTable::monomial(1.0, &[0, 1]),
                PolyTable(vec![]),
                PolyTable(vec![]),
            ],
        };
        let r = parabolic_surface_chart(&fam, &DomainBox::cube(2, 0.5), &Tolerances::default());
        assert!(matches!(r, Err(GeomError::NormalSpaceDim(0))));
    }

    #[test]
    fn ruledness_is_detected() {
        let tol = Tolerances::default();
        let d = DomainBox::cube(2, 0.5);
        let (_, ruled) = parabolic_surface_chart(&SurfaceFamily::RuledGraph { n: 3 }, &d, &tol).unwrap();
        assert_eq!(ruled.ruled, Detection::Vanishing);
        let (_, heat) = parabolic_surface_chart(&SurfaceFamily::Heat { n: 3 }, &d, &tol).unwrap();
        assert_eq!(heat.ruled, Detection::Nonvanishing, "{heat:?}");
        // g_zz = g_x, so W = −∂x
        assert!((heat.w_center[0] + 1.0).abs() < 1e-12 && heat.w_center[1].abs() < 1e-12);
    }
}
