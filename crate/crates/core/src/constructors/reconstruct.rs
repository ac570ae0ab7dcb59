use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, GeomResult};
use crate::immersion::ImmersionChart;
use crate::jets::JetScalar;
use crate::linalg::{column_span, columns, fdot, fnorm, singular_values, subspace_distance, to_dmatrix, values};
use crate::parabolic::PointContext;
use crate::tolerances::Tolerances;

/// Initial data for `(φ, σ)` on the first `u`-row.
#[derive(Debug, Clone)]
pub enum PolarSeed {
    /// `φ = 1`, `σ = 0`.
    Canonical,
    /// Explicit values at the `v`-nodes.
    Values { phi: Vec<f64>, sigma: Vec<f64> },
    /// Values read off a known polar surface, parametrized by the two
    /// section coordinates in increasing axis order. The reconstruction
    /// then starts at the same base point.
    Reference(ImmersionChart),
}

/// Section `L` of `f` and the grid on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructOptions {
    /// The two coordinates of `f` spanning `L`.
    pub axes: [usize; 2],
    /// Values of the remaining coordinates.
    pub slice: Vec<f64>,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Nodes along `axes[0]` and `axes[1]`.
    pub counts: [usize; 2],
    #[serde(default = "default_curl_budget")]
    pub curl_budget: f64,
}

fn default_curl_budget() -> f64 {
    1e-4
}

impl ReconstructOptions {
    /// The same region with twice the resolution.
    pub fn refined(&self) -> Self {
        let mut r = self.clone();
        r.counts = [2 * self.counts[0] - 1, 2 * self.counts[1] - 1];
        r
    }
}

/// Solution of the evolution system; `phi[i][j]` sits at `(u[i], v[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarIntegrationState {
    pub u_axis: usize,
    pub v_axis: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub state: PolarIntegrationState,
    /// `surface[i][j]` is the reconstructed point over `(u[i], v[j])`.
    pub surface: Vec<Vec<Vec<f64>>>,
    /// Largest finite-difference curl of `dg` at interior nodes.
    pub curl_residual: f64,
    /// Largest gap between the two trapezoidal path orders.
    pub path_discrepancy: f64,
    /// Largest principal-angle sine between the difference tangents of the
    /// surface and the normal space of `f`.
    pub tangent_residual: f64,
    /// Smallest ratio of the second to the first singular value of the
    /// difference second fundamental form.
    pub first_normal_ratio: f64,
    /// Largest `|α(w, w)| / ‖α‖` along the direction where `θ_1` vanishes.
    pub asymptotic_ratio: f64,
    pub min_theta: f64,
}

/// Coefficients of the system at one node.
#[derive(Debug, Clone)]
struct Coef {
    cxu: f64,
    cxv: f64,
    bzu: f64,
    bzv: f64,
    xu: f64,
    xv: f64,
    zu: f64,
    zv: f64,
    b: f64,
    c: f64,
    wu: f64,
    wv: f64,
    du_cxv: f64,
    du_bzv: f64,
    du_xv: f64,
    dv_cxu: f64,
    dv_bzu: f64,
    dv_xu: f64,
    eta1: Vec<f64>,
    eta2: Vec<f64>,
}

fn coef_at(f: &ImmersionChart, point: &[f64], iu: usize, iv: usize, tol: &Tolerances) -> GeomResult<Coef> {
    let ctx = PointContext::new(f, point, tol)?;
    let fj = ctx.frame_jets.ok_or_else(|| {
        GeomError::NotParabolic(format!(
            "no canonical frame at {point:?}: {}",
            ctx.note.clone().unwrap_or_default()
        ))
    })?;
    let lower = |v: &[JetScalar], k: usize| -> JetScalar {
        let mut acc = v[0].zero_like();
        for (j, vj) in v.iter().enumerate() {
            acc += &(&fj.metric[k][j] * vj);
        }
        acc
    };
    let (xu, xv, zu, zv) = (lower(&fj.x, iu), lower(&fj.x, iv), lower(&fj.z, iu), lower(&fj.z, iv));
    let (b, c) = (&fj.b, &fj.c);
    let d = |s: &JetScalar, k: usize| s.gradient()[k];
    let omega = |k: usize| -> GeomResult<f64> {
        let de: Vec<JetScalar> = fj.eta1.iter().map(|e| e.derivative(k)).collect::<Result<_, _>>()?;
        Ok(fdot(&values(&de), &values(&fj.eta2)))
    };
    Ok(Coef {
        cxu: (c * &xu).value(),
        cxv: (c * &xv).value(),
        bzu: (b * &zu).value(),
        bzv: (b * &zv).value(),
        xu: xu.value(),
        xv: xv.value(),
        zu: zu.value(),
        zv: zv.value(),
        b: b.value(),
        c: c.value(),
        wu: omega(iu)?,
        wv: omega(iv)?,
        du_cxv: d(&(c * &xv), iu),
        du_bzv: d(&(b * &zv), iu),
        du_xv: d(&xv, iu),
        dv_cxu: d(&(c * &xu), iv),
        dv_bzu: d(&(b * &zu), iv),
        dv_xu: d(&xu, iv),
        eta1: values(&fj.eta1),
        eta2: values(&fj.eta2),
    })
}

/// Second-order difference derivative along a uniform grid.
fn diff(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|j| {
            if j == 0 {
                (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h)
            } else {
                (y[j + 1] - y[j - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn rhs(row: &[Coef], phi: &[f64], sigma: &[f64], hv: f64) -> (Vec<f64>, Vec<f64>) {
    let phi_v = diff(phi, hv);
    let sigma_v = diff(sigma, hv);
    let mut dphi = Vec::with_capacity(phi.len());
    let mut dsigma = Vec::with_capacity(phi.len());
    for (j, k) in row.iter().enumerate() {
        let (p, s) = (phi[j], sigma[j]);
        let pp = k.cxu * p;
        let r = k.cxv * p;
        let q = k.bzu * p + k.xu * s;
        let ss = k.bzv * p + k.xv * s;
        let p_v = k.dv_cxu * p + k.cxu * phi_v[j];
        let phi_u = (p_v - q * k.wv + ss * k.wu - k.du_cxv * p) / k.cxv;
        let q_v = k.dv_bzu * p + k.bzu * phi_v[j] + k.dv_xu * s + k.xu * sigma_v[j];
        let sigma_u = (q_v + pp * k.wv - r * k.wu - k.du_bzv * p - k.bzv * phi_u - k.du_xv * s) / k.xv;
        dphi.push(phi_u);
        dsigma.push(sigma_u);
    }
    (dphi, dsigma)
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

const THETA_FLOOR: f64 = 1e-8;

/// Recovers a polar surface of the parabolic chart `f` over a coordinate
/// section by solving the linear evolution system for `(φ, σ)` in `u` with
/// RK4 (centred differences in `v`) and integrating
/// `dg = θ_1 η_1 + θ_2 η_2`, `θ_1 = cφ X♭`, `θ_2 = bφ Z♭ + σ X♭`.
pub fn construct_polar(
    f: &ImmersionChart,
    opts: &ReconstructOptions,
    seed: &PolarSeed,
    tol: &Tolerances,
) -> GeomResult<Reconstruction> {
    let n = f.intrinsic_dim();
    let [a0, a1] = opts.axes;
    if a0 >= n || a1 >= n || a0 == a1 {
        return Err(GeomError::InvalidInput(format!("bad section axes {:?}", opts.axes)));
    }
    if opts.slice.len() != n {
        return Err(GeomError::InvalidInput(format!("slice has {} entries, chart has {n}", opts.slice.len())));
    }
    if opts.counts.iter().any(|&c| c < 5) {
        return Err(GeomError::InvalidInput("section grid needs at least 5 nodes per axis".into()));
    }
    let point_at = |c0: f64, c1: f64| {
        let mut p = opts.slice.clone();
        p[a0] = c0;
        p[a1] = c1;
        p
    };
    let mid = [(opts.lower[0] + opts.upper[0]) / 2.0, (opts.lower[1] + opts.upper[1]) / 2.0];
    // u follows Z so that X has a large v-component.
    let probe = coef_at(f, &point_at(mid[0], mid[1]), a0, a1, tol)?;
    let swap = probe.xv.abs() < probe.xu.abs();
    let (ku, kv) = if swap { (1, 0) } else { (0, 1) };
    let (iu, iv) = (opts.axes[ku], opts.axes[kv]);
    let (nu, nv) = (opts.counts[ku], opts.counts[kv]);
    let u = linspace(opts.lower[ku], opts.upper[ku], nu);
    let v = linspace(opts.lower[kv], opts.upper[kv], nv);
    let (hu, hv) = (u[1] - u[0], v[1] - v[0]);
    let node = |uu: f64, vv: f64| {
        let mut c = [0.0; 2];
        c[ku] = uu;
        c[kv] = vv;
        point_at(c[0], c[1])
    };

    let rows = 2 * nu - 1;
    let coefs: Vec<Coef> = (0..rows * nv)
        .into_par_iter()
        .map(|k| {
            let (r, j) = (k / nv, k % nv);
            coef_at(f, &node(u[0] + 0.5 * hu * r as f64, v[j]), iu, iv, tol)
        })
        .collect::<GeomResult<_>>()?;
    let row = |r: usize| &coefs[r * nv..(r + 1) * nv];
    for k in &coefs {
        if k.cxv.abs() <= THETA_FLOOR || k.xv.abs() <= THETA_FLOOR {
            return Err(GeomError::ThetaDegenerate("X♭ vanishes along the section".into()));
        }
        if fdot(&k.eta1, &probe.eta1) < 0.0 || fdot(&k.eta2, &probe.eta2) < 0.0 {
            return Err(GeomError::UnstableFrame("canonical frame flips over the section".into()));
        }
    }

    let (mut phi, mut sigma, base) = match seed {
        PolarSeed::Canonical => (vec![1.0; nv], vec![0.0; nv], vec![0.0; f.ambient_dim()]),
        PolarSeed::Values { phi, sigma } => {
            if phi.len() != nv || sigma.len() != nv {
                return Err(GeomError::GridMismatch(format!("seed has {} values, grid has {nv}", phi.len())));
            }
            (phi.clone(), sigma.clone(), vec![0.0; f.ambient_dim()])
        }
        PolarSeed::Reference(g) => {
            let (mut p, mut s) = (Vec::with_capacity(nv), Vec::with_capacity(nv));
            let gdv = if a0 < a1 { kv } else { 1 - kv };
            for (j, k) in row(0).iter().enumerate() {
                let q = node(u[0], v[j]);
                let gq = if a0 < a1 { [q[a0], q[a1]] } else { [q[a1], q[a0]] };
                let jets = g.eval_at(&gq, 1)?;
                let gv: Vec<f64> = jets.iter().map(|c| c.gradient()[gdv]).collect();
                let ph = fdot(&gv, &k.eta1) / k.cxv;
                p.push(ph);
                s.push((fdot(&gv, &k.eta2) - k.bzv * ph) / k.xv);
            }
            let q = node(u[0], v[0]);
            let gq = if a0 < a1 { [q[a0], q[a1]] } else { [q[a1], q[a0]] };
            (p, s, g.eval_point(&gq)?)
        }
    };

    let mut phis = vec![phi.clone()];
    let mut sigmas = vec![sigma.clone()];
    for i in 0..nu - 1 {
        let (r0, r1, r2) = (row(2 * i), row(2 * i + 1), row(2 * i + 2));
        let (k1p, k1s) = rhs(r0, &phi, &sigma, hv);
        let (k2p, k2s) = rhs(r1, &axpy(&phi, hu / 2.0, &k1p), &axpy(&sigma, hu / 2.0, &k1s), hv);
        let (k3p, k3s) = rhs(r1, &axpy(&phi, hu / 2.0, &k2p), &axpy(&sigma, hu / 2.0, &k2s), hv);
        let (k4p, k4s) = rhs(r2, &axpy(&phi, hu, &k3p), &axpy(&sigma, hu, &k3s), hv);
        for j in 0..nv {
            phi[j] += hu / 6.0 * (k1p[j] + 2.0 * k2p[j] + 2.0 * k3p[j] + k4p[j]);
            sigma[j] += hu / 6.0 * (k1s[j] + 2.0 * k2s[j] + 2.0 * k3s[j] + k4s[j]);
        }
        if phi.iter().chain(&sigma).any(|x| !x.is_finite()) {
            return Err(GeomError::Integration(format!("evolution blew up at u = {}", u[i + 1])));
        }
        phis.push(phi.clone());
        sigmas.push(sigma.clone());
    }

    // dg(∂u) = Pη1 + Qη2, dg(∂v) = Rη1 + Sη2
    let ambient = f.ambient_dim();
    let mut fu = vec![vec![vec![0.0; ambient]; nv]; nu];
    let mut fv = fu.clone();
    let mut min_theta = f64::INFINITY;
    for i in 0..nu {
        for (j, k) in row(2 * i).iter().enumerate() {
            let (p, s) = (phis[i][j], sigmas[i][j]);
            let theta = (k.b * k.c * p * p * (k.xu * k.zv - k.zu * k.xv)).abs();
            min_theta = min_theta.min(theta);
            if theta < THETA_FLOOR {
                return Err(GeomError::ThetaDegenerate(format!(
                    "θ1 ∧ θ2 = {theta:.2e} at ({}, {})",
                    u[i], v[j]
                )));
            }
            let (pp, q) = (k.cxu * p, k.bzu * p + k.xu * s);
            let (r, ss) = (k.cxv * p, k.bzv * p + k.xv * s);
            for a in 0..ambient {
                fu[i][j][a] = pp * k.eta1[a] + q * k.eta2[a];
                fv[i][j][a] = r * k.eta1[a] + ss * k.eta2[a];
            }
        }
    }

    let step = |acc: &[f64], x: &[f64], y: &[f64], h: f64| -> Vec<f64> {
        acc.iter().zip(x.iter().zip(y)).map(|(g, (x, y))| g + 0.5 * h * (x + y)).collect()
    };
    let mut path_a = vec![vec![base.clone(); nv]; nu];
    let mut path_b = path_a.clone();
    for i in 1..nu {
        path_a[i][0] = step(&path_a[i - 1][0], &fu[i - 1][0], &fu[i][0], hu);
    }
    for i in 0..nu {
        for j in 1..nv {
            path_a[i][j] = step(&path_a[i][j - 1], &fv[i][j - 1], &fv[i][j], hv);
        }
    }
    for j in 1..nv {
        path_b[0][j] = step(&path_b[0][j - 1], &fv[0][j - 1], &fv[0][j], hv);
    }
    for j in 0..nv {
        for i in 1..nu {
            path_b[i][j] = step(&path_b[i - 1][j], &fu[i - 1][j], &fu[i][j], hu);
        }
    }
    let mut path_discrepancy: f64 = 0.0;
    let mut surface = path_a.clone();
    for i in 0..nu {
        for j in 0..nv {
            let gap: Vec<f64> = path_a[i][j].iter().zip(&path_b[i][j]).map(|(a, b)| a - b).collect();
            path_discrepancy = path_discrepancy.max(fnorm(&gap));
            for a in 0..ambient {
                surface[i][j][a] = 0.5 * (path_a[i][j][a] + path_b[i][j][a]);
            }
        }
    }

    let mut curl: f64 = 0.0;
    let mut tangent: f64 = 0.0;
    let mut n1_ratio = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for i in 1..nu - 1 {
        for j in 1..nv - 1 {
            let k = &row(2 * i)[j];
            let c: Vec<f64> = (0..ambient)
                .map(|a| {
                    (fu[i][j + 1][a] - fu[i][j - 1][a]) / (2.0 * hv) - (fv[i + 1][j][a] - fv[i - 1][j][a]) / (2.0 * hu)
                })
                .collect();
            curl = curl.max(fnorm(&c));

            let g = &surface;
            let gu: Vec<f64> = (0..ambient).map(|a| (g[i + 1][j][a] - g[i - 1][j][a]) / (2.0 * hu)).collect();
            let gv: Vec<f64> = (0..ambient).map(|a| (g[i][j + 1][a] - g[i][j - 1][a]) / (2.0 * hv)).collect();
            let span = column_span(&columns(&[gu.clone(), gv.clone()]), 2);
            let normal = column_span(&columns(&[k.eta1.clone(), k.eta2.clone()]), 2);
            tangent = tangent.max(subspace_distance(&span, &normal));

            // second differences, with the tangent part removed
            let guu: Vec<f64> = (0..ambient).map(|a| (g[i + 1][j][a] - 2.0 * g[i][j][a] + g[i - 1][j][a]) / (hu * hu)).collect();
            let gvv: Vec<f64> = (0..ambient).map(|a| (g[i][j + 1][a] - 2.0 * g[i][j][a] + g[i][j - 1][a]) / (hv * hv)).collect();
            let guv: Vec<f64> = (0..ambient)
                .map(|a| {
                    (g[i + 1][j + 1][a] - g[i + 1][j - 1][a] - g[i - 1][j + 1][a] + g[i - 1][j - 1][a]) / (4.0 * hu * hv)
                })
                .collect();
            let strip = |w: &[f64]| -> Vec<f64> {
                let mut w = w.to_vec();
                for e in [&k.eta1, &k.eta2] {
                    let c = fdot(&w, e);
                    for (wi, ei) in w.iter_mut().zip(e.iter()) {
                        *wi -= c * ei;
                    }
                }
                w
            };
            let (buu, buv, bvv) = (strip(&guu), strip(&guv), strip(&gvv));
            let sv = singular_values(&to_dmatrix(&[buu.clone(), buv.clone(), bvv.clone()]));
            if sv[0] > 0.0 {
                n1_ratio = n1_ratio.min(sv[1] / sv[0]);
            }
            // θ1 = cφ(x_u du + x_v dv) vanishes on w = (x_v, −x_u)
            let (wu, wv) = (k.xv, -k.xu);
            let aww: Vec<f64> = (0..ambient).map(|a| wu * wu * buu[a] + 2.0 * wu * wv * buv[a] + wv * wv * bvv[a]).collect();
            let scale = (wu * wu + wv * wv) * sv[0].max(f64::MIN_POSITIVE);
            asym = asym.max(fnorm(&aww) / scale);
        }
    }
    if curl > opts.curl_budget {
        return Err(GeomError::Integrability(format!(
            "curl residual {curl:.2e} exceeds {:.1e}",
            opts.curl_budget
        )));
    }

    Ok(Reconstruction {
        state: PolarIntegrationState {
            u_axis: iu,
            v_axis: iv,
            u,
            v,
            phi: phis,
            sigma: sigmas,
        },
        surface,
        curl_residual: curl,
        path_discrepancy,
        tangent_residual: tangent,
        first_normal_ratio: n1_ratio,
        asymptotic_ratio: asym,
        min_theta,
    })
}

/// Curl residuals on `opts` and on its refinement, and their ratio.
pub fn curl_convergence(
    f: &ImmersionChart,
    opts: &ReconstructOptions,
    seed: &PolarSeed,
    tol: &Tolerances,
) -> GeomResult<[f64; 3]> {
    let coarse = construct_polar(f, opts, seed, tol)?;
    let fine_seed = match seed {
        PolarSeed::Values { .. } => {
            return Err(GeomError::InvalidInput("explicit seeds do not refine; use a reference surface".into()))
        }
        s => s.clone(),
    };
    let fine = construct_polar(f, &opts.refined(), &fine_seed, tol)?;
    Ok([coarse.curl_residual, fine.curl_residual, coarse.curl_residual / fine.curl_residual])
}
