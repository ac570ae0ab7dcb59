use std::sync::Arc;

use super::surface::{parabolic_surface_chart, PolarSurfaceInput, SurfaceReport};
use crate::error::{GeomError, GeomResult};
use crate::immersion::{
    eval_poly, normal_frame, relative_nullity, sample_jets, DomainBox, ImmersionChart, PolyTerm,
};
use crate::jets::JetScalar;
use crate::linalg::{
    add, column_span, columns, combine, dot, fdot, fnorm, mat_vec, normalize, scale, singular_values,
    sub_scaled, subspace_distance, truncate_vec, values, JetVec,
};
use crate::parabolic::{asymptotic_directions_with, canonical_frame_with, frame_jets, ParabolicFrame, Rank2Kind};
use crate::tolerances::Tolerances;

/// Section `h = g_*∇φ + γ_1 + γ_0` over a parabolic surface `g`, where
/// `γ_1` is fixed by `Hess_φ = ⟨α, γ_1⟩` and `γ_0` takes values in the
/// orthogonal complement `Λ` of the first normal space inside the normal
/// bundle.
#[derive(Debug)]
pub struct SectionMap {
    surface: ImmersionChart,
    report: SurfaceReport,
    phi: Vec<PolyTerm>,
    gamma0: Vec<Vec<PolyTerm>>,
    pivots: Vec<usize>,
    tol: Tolerances,
}

/// Jets of the section data at one surface point.
#[derive(Debug, Clone)]
pub struct LocalSection {
    pub h: JetVec,
    /// Orthonormal frame of `Λ`.
    pub lambda: Vec<JetVec>,
    /// `Hess_φ(Z, Z)` in the canonical frame; zero for admissible `φ`.
    pub hess_zz: f64,
    pub frame: ParabolicFrame,
}

const SECTION_GRID: usize = 5;
const HESS_ZZ_TOL: f64 = 1e-8;
const SECTION_TOL: f64 = 1e-6;

impl SectionMap {
    pub fn surface(&self) -> &ImmersionChart {
        &self.surface
    }

    pub fn surface_report(&self) -> &SurfaceReport {
        &self.report
    }

    pub fn lambda_dim(&self) -> usize {
        self.pivots.len()
    }

    /// Section data at `point` as two-variable jets of the given order
    /// (at most 4).
    pub fn local(&self, point: &[f64], order: usize) -> GeomResult<LocalSection> {
        let k = order.max(1);
        let sj = sample_jets(&self.surface, point, k + 2, &self.tol)?;
        let sample = sj.to_sample()?;
        let nullity = relative_nullity(&sample, self.tol.nullity_tol)?;
        let class = asymptotic_directions_with(&sample, &nullity, &self.tol)?;
        if class.kind != Rank2Kind::Parabolic {
            return Err(GeomError::NotParabolic(format!("{} surface point {point:?}", class.kind.as_str())));
        }
        let frame = canonical_frame_with(&sample, &class, &nullity, &self.tol)?;
        let fj = frame_jets(&sj, &frame, &self.tol)?;

        let vars = JetScalar::variables(point, k + 2)?;
        let phi = eval_poly(&self.phi, &vars);
        let dphi = [phi.derivative(0)?, phi.derivative(1)?];
        let grad = mat_vec(&sj.metric_inv, &dphi);
        let lift = truncate_vec(&combine(&grad, &sj.tangents), k)?;

        let dphi_low = truncate_vec(&dphi, k)?;
        let mut hess = vec![vec![dphi_low[0].zero_like(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut hij = dphi[i].derivative(j)?;
                for m in 0..2 {
                    hij -= &(&sj.christoffels[m][i][j] * &dphi_low[m]);
                }
                hess[i][j] = hij;
            }
        }
        let form = |u: &[JetScalar], v: &[JetScalar]| dot(u, &mat_vec(&hess, v));
        let p = form(&fj.x, &fj.x);
        let q = form(&fj.x, &fj.z);
        let r = form(&fj.z, &fj.z);
        let lam = q.try_div(&fj.b)?;
        let mu = (&p - &(&lam * &fj.a)).try_div(&fj.c)?;
        let gamma1 = add(&scale(&fj.eta1, &lam), &scale(&fj.eta2, &mu));

        let tangents: Vec<JetVec> = sj.tangents.iter().map(|t| truncate_vec(t, k)).collect::<GeomResult<_>>()?;
        let mut basis: Vec<JetVec> = Vec::new();
        for v in tangents.iter().chain([&fj.eta1, &fj.eta2]) {
            let mut w = v.clone();
            for b in &basis {
                w = sub_scaled(&w, &dot(&w, b), b);
            }
            basis.push(normalize(&w, self.tol.frame_tol)?);
        }
        let ambient = self.surface.ambient_dim();
        let template = fj.a.zero_like();
        let mut lambda: Vec<JetVec> = Vec::new();
        for &axis in &self.pivots {
            let mut w: JetVec = (0..ambient).map(|i| template.lift(if i == axis { 1.0 } else { 0.0 })).collect();
            for b in basis.iter().chain(&lambda) {
                w = sub_scaled(&w, &dot(&w, b), b);
            }
            lambda.push(normalize(&w, self.tol.frame_tol)?);
        }

        let low_vars = JetScalar::variables(point, k)?;
        let mut h = add(&lift, &gamma1);
        for (terms, delta) in self.gamma0.iter().zip(&lambda) {
            let coeff = eval_poly(terms, &low_vars);
            h = add(&h, &scale(delta, &coeff));
        }
        if order < k {
            h = truncate_vec(&h, order)?;
            lambda = lambda.iter().map(|d| truncate_vec(d, order)).collect::<GeomResult<_>>()?;
        }
        Ok(LocalSection { h, lambda, hess_zz: r.value(), frame })
    }

    /// Largest `|⟨h_*∂_i, g_*∂_j⟩|` at `point`.
    pub fn section_residual(&self, point: &[f64]) -> GeomResult<f64> {
        let loc = self.local(point, 1)?;
        let jac = self.surface.eval_at(point, 1)?;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            let dh: Vec<f64> = loc.h.iter().map(|c| c.gradient()[i]).collect();
            for j in 0..2 {
                let dg: Vec<f64> = jac.iter().map(|c| c.gradient()[j]).collect();
                worst = worst.max(fdot(&dh, &dg).abs());
            }
        }
        Ok(worst)
    }
}

/// Validates the input and builds the section map. Fails if `∂z` is not
/// asymptotic, the first normal space is not a plane, `φ` violates
/// `Hess_φ(Z, Z) = 0`, or the section condition fails on sampled points.
pub fn section_map(input: &PolarSurfaceInput, tol: &Tolerances) -> GeomResult<SectionMap> {
    let (surface, report) = parabolic_surface_chart(&input.surface, &input.domain, tol)?;
    let ambient = surface.ambient_dim();
    if input.gamma0.len() > ambient - 4 {
        return Err(GeomError::InvalidInput(format!(
            "γ0 has {} components but Λ has rank {}",
            input.gamma0.len(),
            ambient - 4
        )));
    }
    let phi = input.phi.terms(2)?;
    let gamma0 = input.gamma0.iter().map(|t| t.terms(2)).collect::<GeomResult<_>>()?;

    // Λ is spanned by coordinate axes projected off T_g ⊕ N1, with the
    // axes chosen once at the centre so the frame is smooth.
    let center = input.domain.center();
    let sj = sample_jets(&surface, &center, 3, tol)?;
    let sample = sj.to_sample()?;
    let nullity = relative_nullity(&sample, tol.nullity_tol)?;
    let class = asymptotic_directions_with(&sample, &nullity, tol)?;
    let frame = canonical_frame_with(&sample, &class, &nullity, tol)?;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let tangents: Vec<Vec<f64>> = sj.tangents.iter().map(|t| values(t)).collect();
    for v in tangents.iter().chain([&frame.eta1, &frame.eta2]) {
        push_orthonormal(&mut basis, v);
    }
    let mut pivots = Vec::new();
    while basis.len() < ambient {
        let (axis, _) = (0..ambient)
            .filter(|a| !pivots.contains(a))
            .map(|a| {
                let mut e = vec![0.0; ambient];
                e[a] = 1.0;
                (a, fnorm(&residual(&basis, &e)))
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("axes remain");
        let mut e = vec![0.0; ambient];
        e[axis] = 1.0;
        push_orthonormal(&mut basis, &e);
        pivots.push(axis);
    }

    let map = SectionMap {
        surface,
        report,
        phi,
        gamma0,
        pivots,
        tol: *tol,
    };
    for p in input.domain.grid(&[SECTION_GRID, SECTION_GRID])? {
        let loc = map.local(&p, 1)?;
        if loc.hess_zz.abs() > HESS_ZZ_TOL {
            return Err(GeomError::InvalidInput(format!(
                "Hess φ(Z, Z) = {:.2e} at {p:?}; φ is not admissible",
                loc.hess_zz
            )));
        }
        let r = map.section_residual(&p)?;
        if r > SECTION_TOL {
            return Err(GeomError::Integrability(format!("section residual {r:.2e} at {p:?}")));
        }
    }
    Ok(map)
}

fn residual(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut w = v.to_vec();
    for b in basis {
        let c = fdot(&w, b);
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi -= c * bi;
        }
    }
    w
}

fn push_orthonormal(basis: &mut Vec<Vec<f64>>, v: &[f64]) {
    let w = residual(basis, v);
    let n = fnorm(&w);
    basis.push(w.iter().map(|x| x / n).collect());
}

/// The extension `Ψ(x, t) = h(x) + Σ t_k δ_k(x)` over the bundle `Λ`.
#[derive(Debug, Clone)]
pub struct PolarChart {
    pub chart: ImmersionChart,
    pub section: Arc<SectionMap>,
}

const REGULARITY_GRID: usize = 5;

/// Builds `Ψ` on `domain(g) × [−w, w]^{n−2}`. Fails if `Ψ` is singular on
/// every sampled point.
pub fn polar_extension(section: SectionMap, half_width: f64) -> GeomResult<PolarChart> {
    if half_width <= 0.0 {
        return Err(GeomError::InvalidInput("fibre half width must be positive".into()));
    }
    let section = Arc::new(section);
    let base = section.surface.domain();
    let fibre = section.lambda_dim();
    let mut lower = base.lower.clone();
    let mut upper = base.upper.clone();
    lower.extend(std::iter::repeat(-half_width).take(fibre));
    upper.extend(std::iter::repeat(half_width).take(fibre));
    let domain = DomainBox::new(lower, upper)?;
    let ambient = section.surface.ambient_dim();
    let s = Arc::clone(&section);
    let chart = ImmersionChart::new("polar", 2 + fibre, ambient, domain.clone(), move |x| {
        let base_point = [x[0].value(), x[1].value()];
        let loc = s.local(&base_point, x[0].order())?;
        let inputs = [x[0].clone(), x[1].clone()];
        let mut out = Vec::with_capacity(ambient);
        for a in 0..ambient {
            let mut y = loc.h[a].compose(&inputs)?;
            for (k, delta) in loc.lambda.iter().enumerate() {
                y += &(&x[2 + k] * &delta[a].compose(&inputs)?);
            }
            out.push(y);
        }
        Ok(out)
    })?;
    let counts = vec![REGULARITY_GRID; 2 + fibre];
    let regular = domain.grid(&counts)?.iter().any(|p| {
        chart
            .eval_at(p, 1)
            .map(|y| {
                let jac: Vec<Vec<f64>> = y.iter().map(|c| c.gradient()).collect();
                let sv = singular_values(&crate::linalg::to_dmatrix(&jac));
                sv.last().copied().unwrap_or(0.0) > 1e-8 * sv[0].max(1.0)
            })
            .unwrap_or(false)
    });
    if !regular {
        return Err(GeomError::RankDeficient("Ψ is singular on every sampled point".into()));
    }
    Ok(PolarChart { chart, section })
}

impl PolarChart {
    /// Largest principal-angle sine between `T_Ψ` at `(x, t)` and the
    /// normal space of `g` at `x`.
    pub fn tangent_space_residual(&self, point: &[f64]) -> GeomResult<f64> {
        let n = self.chart.intrinsic_dim();
        let y = self.chart.eval_at(point, 1)?;
        let tpsi: Vec<Vec<f64>> = (0..n).map(|i| y.iter().map(|c| c.gradient()[i]).collect()).collect();
        let g = self.section.surface.eval_at(&point[..2], 1)?;
        let tg: Vec<Vec<f64>> = (0..2).map(|i| g.iter().map(|c| c.gradient()[i]).collect()).collect();
        let normal = normal_frame(&tg)?;
        Ok(subspace_distance(&column_span(&columns(&tpsi), n), &column_span(&columns(&normal), n)))
    }

    /// Largest principal-angle sine between `Ψ_*` of the relative nullity
    /// of `Ψ` and the fibre `Λ(x)`.
    pub fn nullity_residual(&self, point: &[f64], tol: &Tolerances) -> GeomResult<f64> {
        let sj = sample_jets(&self.chart, point, 2, tol)?;
        let sample = sj.to_sample()?;
        let nullity = relative_nullity(&sample, tol.nullity_tol)?;
        let fibre = self.section.lambda_dim();
        if nullity.index != fibre {
            return Ok(1.0);
        }
        if fibre == 0 {
            return Ok(0.0);
        }
        let pushed: Vec<Vec<f64>> = nullity.nullity_basis.iter().map(|v| sample.push_forward(v)).collect();
        let loc = self.section.local(&point[..2], 1)?;
        let lambda: Vec<Vec<f64>> = loc.lambda.iter().map(|d| values(d)).collect();
        Ok(subspace_distance(
            &column_span(&columns(&pushed), fibre),
            &column_span(&columns(&lambda), fibre),
        ))
    }
}
