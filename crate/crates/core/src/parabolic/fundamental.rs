use serde::{Deserialize, Serialize};

use crate::error::{GeomError, GeomResult};
use crate::immersion::{sample_jets, ImmersionChart, SampleJets};
use crate::jets::{jet_variable, JetScalar};
use crate::linalg::{dot, mat_values, truncate_vec, JetVec};
use crate::tolerances::Tolerances;

/// Deliberate inconsistencies injected into the structure data, used as
/// negative controls for the residual harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Corruption {
    #[default]
    None,
    /// Multiply the second fundamental form by `factor`.
    ScaleSff { factor: f64 },
    /// Read the second fundamental form in a normal frame rotated by the
    /// angle `rate·x_0` while keeping the unrotated normal connection.
    NormalTwist { rate: f64 },
    /// Add the non-closed form `rate·x_0 dx_1` to the normal connection.
    ConnectionTwist { rate: f64 },
}

/// Normalized max-norm residuals of the Gauss, Codazzi and Ricci equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalResiduals {
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
}

impl FundamentalResiduals {
    pub fn max(&self) -> f64 {
        self.gauss.max(self.codazzi).max(self.ricci)
    }
}

pub fn fundamental_residuals(chart: &ImmersionChart, point: &[f64]) -> GeomResult<FundamentalResiduals> {
    fundamental_residuals_corrupted(chart, point, Corruption::None)
}

pub fn fundamental_residuals_corrupted(
    chart: &ImmersionChart,
    point: &[f64],
    corruption: Corruption,
) -> GeomResult<FundamentalResiduals> {
    let sj = sample_jets(chart, point, 3, &Tolerances::default())?;
    fundamental_from_jets(&sj, corruption)
}

fn relative(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

pub(crate) fn fundamental_from_jets(
    sj: &SampleJets,
    corruption: Corruption,
) -> GeomResult<FundamentalResiduals> {
    if sj.order < 3 {
        return Err(GeomError::InvalidInput("structure equations need an order-3 sample".into()));
    }
    let n = sj.intrinsic_dim();
    let codim = sj.codim();
    let low = sj.order - 2;
    let x0 = jet_variable(0, sj.point[0], n, sj.order - 1)?;
    let needs_pair = matches!(corruption, Corruption::NormalTwist { .. } | Corruption::ConnectionTwist { .. });
    if needs_pair && (codim < 2 || n < 2) {
        return Err(GeomError::InvalidInput("corruption needs two normals and two coordinates".into()));
    }

    // second fundamental form, possibly read in a twisted frame
    let mut sff: Vec<Vec<JetVec>> = sj.sff.clone();
    match corruption {
        Corruption::ScaleSff { factor } => {
            for b in &mut sff {
                for row in b.iter_mut() {
                    for v in row.iter_mut() {
                        *v = v.scale(factor);
                    }
                }
            }
        }
        Corruption::NormalTwist { rate } => {
            let psi = x0.scale(rate);
            let (c, s) = (psi.cos(), psi.sin());
            let e0 = &sj.normals[0];
            let e1 = &sj.normals[1];
            let r0: JetVec = e0.iter().zip(e1).map(|(a, b)| &(&c * a) + &(&s * b)).collect();
            let r1: JetVec = e0.iter().zip(e1).map(|(a, b)| &(&c * b) - &(&s * a)).collect();
            for (k, xi) in [r0, r1].iter().enumerate() {
                let xi = truncate_vec(xi, low)?;
                for i in 0..n {
                    for j in 0..n {
                        sff[k][i][j] = dot(&sj.hessians[i][j], &xi);
                    }
                }
            }
        }
        _ => {}
    }

    // w[i][r][s] = ⟨∂_i ξ_r, ξ_s⟩
    let normals_low: Vec<JetVec> = sj
        .normals
        .iter()
        .map(|v| truncate_vec(v, low))
        .collect::<GeomResult<_>>()?;
    let mut w: Vec<Vec<Vec<JetScalar>>> = Vec::with_capacity(n);
    for i in 0..n {
        let d: Vec<JetVec> = sj
            .normals
            .iter()
            .map(|v| v.iter().map(|c| c.derivative(i)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        w.push(
            (0..codim)
                .map(|r| (0..codim).map(|s| dot(&d[r], &normals_low[s])).collect())
                .collect(),
        );
    }
    if let Corruption::ConnectionTwist { rate } = corruption {
        let bump = x0.truncate(low)?.scale(rate);
        w[1][0][1] += &bump;
        w[1][1][0] -= &bump;
    }

    let g = mat_values(&sj.metric);
    let ginv = mat_values(&sj.metric_inv);
    let gamma = sj.christoffel_values();
    let bval: Vec<Vec<Vec<f64>>> = sff.iter().map(|b| mat_values(b)).collect();
    let wval: Vec<Vec<Vec<f64>>> = w.iter().map(|m| mat_values(m)).collect();

    // Gauss
    let dgamma = |m: usize, j: usize, k: usize, i: usize| -> f64 { sj.christoffels[m][j][k].gradient()[i] };
    let mut gauss_diff: f64 = 0.0;
    let mut gauss_scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut rm = vec![0.0; n];
                for (m, r) in rm.iter_mut().enumerate() {
                    *r = dgamma(m, j, k, i) - dgamma(m, i, k, j);
                    for p in 0..n {
                        *r += gamma[m][i][p] * gamma[p][j][k] - gamma[m][j][p] * gamma[p][i][k];
                    }
                }
                for l in 0..n {
                    let lhs: f64 = (0..n).map(|m| g[l][m] * rm[m]).sum();
                    let rhs: f64 = bval
                        .iter()
                        .map(|b| b[i][l] * b[j][k] - b[i][k] * b[j][l])
                        .sum();
                    gauss_diff = gauss_diff.max((lhs - rhs).abs());
                    gauss_scale = gauss_scale.max(lhs.abs()).max(rhs.abs());
                }
            }
        }
    }

    // Codazzi: (∇_i α)^s_jk symmetric in i, j
    let mut nabla = vec![vec![vec![vec![0.0; n]; n]; n]; codim];
    let mut codazzi_scale: f64 = 0.0;
    for s in 0..codim {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = sff[s][j][k].gradient()[i];
                    for r in 0..codim {
                        v += bval[r][j][k] * wval[i][r][s];
                    }
                    for m in 0..n {
                        v -= gamma[m][i][j] * bval[s][m][k] + gamma[m][i][k] * bval[s][j][m];
                    }
                    nabla[s][i][j][k] = v;
                    codazzi_scale = codazzi_scale.max(v.abs());
                }
            }
        }
    }
    let mut codazzi_diff: f64 = 0.0;
    for s in 0..codim {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    codazzi_diff = codazzi_diff.max((nabla[s][i][j][k] - nabla[s][j][i][k]).abs());
                }
            }
        }
    }

    // Ricci: ⟨R^⊥(∂_i, ∂_j) ξ_r, ξ_s⟩ = (B^s G⁻¹ B^r − B^r G⁻¹ B^s)_ij
    let mut ricci_diff: f64 = 0.0;
    let mut ricci_scale: f64 = 0.0;
    let prod = |p: &[Vec<f64>], q: &[Vec<f64>], i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += p[i][a] * ginv[a][b] * q[b][j];
            }
        }
        acc
    };
    for r in 0..codim {
        for s in (r + 1)..codim {
            for i in 0..n {
                for j in 0..n {
                    let mut lhs = w[j][r][s].gradient()[i] - w[i][r][s].gradient()[j];
                    for t in 0..codim {
                        lhs += wval[j][r][t] * wval[i][t][s] - wval[i][r][t] * wval[j][t][s];
                    }
                    let rhs = prod(&bval[s], &bval[r], i, j) - prod(&bval[r], &bval[s], i, j);
                    ricci_diff = ricci_diff.max((lhs - rhs).abs());
                    ricci_scale = ricci_scale.max(lhs.abs()).max(rhs.abs());
                }
            }
        }
    }

    Ok(FundamentalResiduals {
        gauss: relative(gauss_diff, gauss_scale),
        codazzi: relative(codazzi_diff, codazzi_scale),
        ricci: relative(ricci_diff, ricci_scale),
    })
}
