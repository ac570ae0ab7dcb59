use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coeffs::Coeff1D;
use crate::error::{GeomError, GeomResult};
use crate::immersion::{DomainBox, ImmersionChart};
use crate::jets::{extract_partial, jet_variable, JetScalar};
use crate::linalg::{polar_orthogonal, singular_values};

/// Orthonormality loss tolerated in a single raw RK4 step before the
/// step is declared too large.
const RAW_DRIFT_BUDGET: f64 = 1e-8;
const STORED_DRIFT_BUDGET: f64 = 1e-10;
const CHECK_SAMPLES: usize = 65;

/// One skew pair of the connection: `A[row][col] = f`, `A[col][row] = -f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionEntry {
    pub row: usize,
    pub col: usize,
    pub function: Coeff1D,
}

/// Moving-frame data for a ruled submanifold `Mⁿ ⊂ ℝⁿ⁺²`.
///
/// Frame vectors are the rows `e_0, ..., e_{n+1}` of `E(s)`, which solves
/// `E' = A(s) E`. Rows `2..n-1` span the nullity and must satisfy
/// `e_j' = b_j e_1`, so their only nonzero connection entry is `A[j][1]`.
/// An optional gauge angle rotates the last two frame vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuledFrameInput {
    pub n: usize,
    pub interval: [f64; 2],
    pub connection: Vec<ConnectionEntry>,
    #[serde(default)]
    pub initial_frame: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_half_width")]
    pub ruling_half_width: f64,
    #[serde(default)]
    pub gauge: Option<Coeff1D>,
}

fn default_half_width() -> f64 {
    0.5
}

impl RuledFrameInput {
    /// Fixture with `b_j = 1`, the ruling normal `η` along `e_n`, and the
    /// normal plane `{e_n, e_{n+1}}` rotating at unit speed.
    pub fn example(n: usize) -> Self {
        let mut connection = vec![
            entry(1, n, Coeff1D::constant(1.0)),
            entry(0, n + 1, Coeff1D::constant(1.0)),
            entry(n, n + 1, Coeff1D::constant(1.0)),
        ];
        for j in 2..n {
            connection.push(entry(j, 1, Coeff1D::constant(1.0)));
        }
        RuledFrameInput {
            n,
            interval: [0.0, 1.5],
            connection,
            initial_frame: None,
            ruling_half_width: 0.5,
            gauge: None,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 2
    }

    pub fn validate(&self) -> GeomResult<()> {
        let m = self.ambient_dim();
        if self.n < 2 {
            return Err(GeomError::InvalidInput("ruled construction needs n ≥ 2".into()));
        }
        let [s0, s1] = self.interval;
        if !(s0 < s1) || !s0.is_finite() || !s1.is_finite() {
            return Err(GeomError::InvalidInput("empty parameter interval".into()));
        }
        if !(self.ruling_half_width > 0.0) {
            return Err(GeomError::InvalidInput("ruling half width must be positive".into()));
        }
        for e in &self.connection {
            if e.row >= m || e.col >= m || e.row == e.col {
                return Err(GeomError::InvalidInput(format!(
                    "connection entry ({}, {}) is not an off-diagonal index of a {m}×{m} matrix",
                    e.row, e.col
                )));
            }
        }
        let e0 = self.initial();
        let drift = orthonormality_drift(&e0);
        if drift > 1e-10 {
            return Err(GeomError::InvalidInput(format!("initial frame not orthonormal (drift {drift:.2e})")));
        }
        for k in 0..CHECK_SAMPLES {
            let s = s0 + (s1 - s0) * k as f64 / (CHECK_SAMPLES - 1) as f64;
            let a = self.connection_at(s);
            let skew = (&a + a.transpose()).amax();
            if skew > 1e-12 {
                return Err(GeomError::InvalidInput(format!("connection not skew at s = {s}")));
            }
            for j in 2..self.n {
                for col in 0..m {
                    if col != 1 && a[(j, col)].abs() > 1e-12 {
                        return Err(GeomError::InvalidInput(format!(
                            "row {j} of the connection has entry {col} at s = {s}; only column 1 is allowed"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> DMatrix<f64> {
        let m = self.ambient_dim();
        match &self.initial_frame {
            Some(rows) if rows.len() == m && rows.iter().all(|r| r.len() == m) => {
                DMatrix::from_fn(m, m, |i, j| rows[i][j])
            }
            Some(_) => DMatrix::from_element(m, m, f64::NAN),
            None => DMatrix::identity(m, m),
        }
    }

    /// `A(s)` with every entry a jet in `s`.
    pub fn connection_jets(&self, s: &JetScalar) -> Vec<Vec<JetScalar>> {
        let m = self.ambient_dim();
        let mut a: Vec<Vec<JetScalar>> = vec![vec![s.zero_like(); m]; m];
        for e in &self.connection {
            let f = e.function.eval_jet(s);
            a[e.row][e.col] += &f;
            a[e.col][e.row] -= &f;
        }
        if let Some(theta) = &self.gauge {
            let t = theta.eval_jet(s);
            let (c, sn) = (t.cos(), t.sin());
            let (p, q) = (self.n, self.n + 1);
            let rot = |u: &JetScalar, v: &JetScalar| (&(&c * u) - &(&sn * v), &(&sn * u) + &(&c * v));
            for col in 0..m {
                let (x, y) = rot(&a[p][col], &a[q][col]);
                a[p][col] = x;
                a[q][col] = y;
            }
            for row in a.iter_mut() {
                let (x, y) = rot(&row[p], &row[q]);
                row[p] = x;
                row[q] = y;
            }
        }
        a
    }

    pub fn connection_at(&self, s: f64) -> DMatrix<f64> {
        let sj = JetScalar::constant(s, 1, 0).expect("order-0 jet");
        let a = self.connection_jets(&sj);
        let m = self.ambient_dim();
        DMatrix::from_fn(m, m, |i, j| a[i][j].value())
    }

    /// Taylor coefficient matrices `A_0, ..., A_order` of `A` at `s`.
    fn connection_series(&self, s: f64, order: usize) -> GeomResult<Vec<DMatrix<f64>>> {
        let sj = jet_variable(0, s, 1, order)?;
        let a = self.connection_jets(&sj);
        let m = self.ambient_dim();
        Ok((0..=order)
            .map(|k| DMatrix::from_fn(m, m, |i, j| a[i][j].coeffs()[k]))
            .collect())
    }
}

fn entry(row: usize, col: usize, function: Coeff1D) -> ConnectionEntry {
    ConnectionEntry { row, col, function }
}

fn orthonormality_drift(e: &DMatrix<f64>) -> f64 {
    let m = e.nrows();
    (e * e.transpose() - DMatrix::<f64>::identity(m, m)).amax()
}

/// Sampled solution of `E' = A E`, `c' = e_0`.
#[derive(Debug, Clone)]
pub struct FramePath {
    pub nodes: Vec<f64>,
    pub frames: Vec<DMatrix<f64>>,
    pub curve: Vec<DVector<f64>>,
    pub step: f64,
    /// Largest `‖E Eᵀ − I‖_max` over the stored frames.
    pub max_drift: f64,
}

fn rk4(
    input: &RuledFrameInput,
    s: f64,
    h: f64,
    e: &DMatrix<f64>,
    c: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let a0 = input.connection_at(s);
    let am = input.connection_at(s + 0.5 * h);
    let a1 = input.connection_at(s + h);
    let row0 = |m: &DMatrix<f64>| m.row(0).transpose();
    let k1 = &a0 * e;
    let l1 = row0(e);
    let e2 = e + &k1 * (0.5 * h);
    let k2 = &am * &e2;
    let l2 = row0(&e2);
    let e3 = e + &k2 * (0.5 * h);
    let k3 = &am * &e3;
    let l3 = row0(&e3);
    let e4 = e + &k3 * h;
    let k4 = &a1 * &e4;
    let l4 = row0(&e4);
    let en = e + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let cn = c + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    (en, cn)
}

/// RK4 integration of the frame and the base curve with re-projection onto
/// the orthogonal group after every step.
pub fn integrate_frame(input: &RuledFrameInput, step: f64) -> GeomResult<FramePath> {
    input.validate()?;
    if !(step > 0.0) {
        return Err(GeomError::InvalidInput("step must be positive".into()));
    }
    let [s0, s1] = input.interval;
    let count = ((s1 - s0) / step).ceil().max(1.0) as usize;
    let h = (s1 - s0) / count as f64;
    let mut e = input.initial();
    let mut c = DVector::zeros(input.ambient_dim());
    let mut nodes = vec![s0];
    let mut frames = vec![e.clone()];
    let mut curve = vec![c.clone()];
    let mut max_drift = orthonormality_drift(&e);
    for k in 0..count {
        let s = s0 + k as f64 * h;
        let (en, cn) = rk4(input, s, h, &e, &c);
        let raw = orthonormality_drift(&en);
        if raw > RAW_DRIFT_BUDGET {
            return Err(GeomError::Integration(format!(
                "step {h:.3e} too large: orthonormality drift {raw:.2e} at s = {s:.4}"
            )));
        }
        e = polar_orthogonal(&en);
        c = cn;
        max_drift = max_drift.max(orthonormality_drift(&e));
        nodes.push(s0 + (k + 1) as f64 * h);
        frames.push(e.clone());
        curve.push(c.clone());
    }
    if max_drift > STORED_DRIFT_BUDGET {
        return Err(GeomError::Integration(format!("stored frames drift {max_drift:.2e}")));
    }
    Ok(FramePath {
        nodes,
        frames,
        curve,
        step: h,
        max_drift,
    })
}

impl FramePath {
    /// Frame and curve point at an arbitrary `s`, by one RK4 sub-step from
    /// the nearest node.
    pub fn state_at(&self, input: &RuledFrameInput, s: f64) -> (DMatrix<f64>, DVector<f64>) {
        let s0 = self.nodes[0];
        let k = ((s - s0) / self.step).round().clamp(0.0, (self.nodes.len() - 1) as f64) as usize;
        let ds = s - self.nodes[k];
        if ds == 0.0 {
            return (self.frames[k].clone(), self.curve[k].clone());
        }
        let (e, c) = rk4(input, self.nodes[k], ds, &self.frames[k], &self.curve[k]);
        (polar_orthogonal(&e), c)
    }

    /// Taylor coefficients of `E` and `c` at `s`, from the ODE itself.
    fn series(
        &self,
        input: &RuledFrameInput,
        s: f64,
        order: usize,
    ) -> GeomResult<(Vec<DMatrix<f64>>, Vec<DVector<f64>>)> {
        let (e0, c0) = self.state_at(input, s);
        let a = input.connection_series(s, order)?;
        let mut e = vec![e0];
        let mut c = vec![c0];
        for k in 0..order {
            let mut next = DMatrix::zeros(e[0].nrows(), e[0].ncols());
            for i in 0..=k {
                next += &a[i] * &e[k - i];
            }
            c.push(e[k].row(0).transpose() / (k + 1) as f64);
            e.push(next / (k + 1) as f64);
        }
        Ok((e, c))
    }
}

/// `f(s, t_1, ..., t_{n-1}) = c(s) + Σ t_j e_j(s)`.
///
/// The chart is evaluated through the exact Taylor expansion of the frame
/// ODE at the requested `s`, so straightness of the rulings and
/// `f_{s t_j} = b_j e_1` hold to rounding error.
pub fn ruled_chart(input: &RuledFrameInput, path: &FramePath) -> GeomResult<ImmersionChart> {
    input.validate()?;
    let [s0, s1] = input.interval;
    for k in 0..CHECK_SAMPLES {
        let s = s0 + (s1 - s0) * k as f64 / (CHECK_SAMPLES - 1) as f64;
        let d = ruled_dim_checks(input, s);
        if !d.passes() {
            return Err(GeomError::InvalidInput(format!(
                "rank conditions on P fail at s = {s:.4}: singular values {:?}, transversality {:.2e}",
                d.p_singular_values, d.dim2
            )));
        }
    }
    let n = input.n;
    let w = input.ruling_half_width;
    let mut lower = vec![s0];
    let mut upper = vec![s1];
    lower.extend(std::iter::repeat(-w).take(n - 1));
    upper.extend(std::iter::repeat(w).take(n - 1));
    let domain = DomainBox::new(lower, upper)?;
    let shared = Arc::new((input.clone(), path.clone()));
    ImmersionChart::new("ruled", n, n + 2, domain, move |x| {
        let (input, path) = &*shared;
        let order = x[0].order();
        let s = x[0].value();
        let (e, c) = path.series(input, s, order)?;
        let series = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..=order).map(f).collect() };
        let m = input.ambient_dim();
        let mut out = Vec::with_capacity(m);
        for a in 0..m {
            let mut acc = x[0].compose_univariate(&series(&|k| c[k][a]));
            for j in 1..input.n {
                let ej = x[0].compose_univariate(&series(&|k| e[k][(j, a)]));
                acc += &(&x[j] * &ej);
            }
            out.push(acc);
        }
        Ok(out)
    })
}

/// The two rank conditions on `P = span{e_0, (e_1')_{Δ^⊥}}` at one `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimCheck {
    pub s: f64,
    pub p_singular_values: [f64; 2],
    /// Largest component of `(e_0')_{Δ^⊥}` and `(e_1'')_{Δ^⊥}` off `P`.
    pub dim2: f64,
    /// Smallest `|⟨(e_0' + t_1 e_1'')_{Δ^⊥}, ν_P⟩|` over the ruling range,
    /// zero if the sign changes there (the first normal space degenerates).
    pub n1_margin: f64,
}

impl DimCheck {
    pub fn passes(&self) -> bool {
        self.p_singular_values[1] > 1e-6 && self.dim2 > 1e-6
    }
}

pub fn ruled_dim_checks(input: &RuledFrameInput, s: f64) -> DimCheck {
    let n = input.n;
    let (p, q) = (n, n + 1);
    let sj = jet_variable(0, s, 1, 1).expect("valid jet");
    let aj = input.connection_jets(&sj);
    let a = |i: usize, j: usize| aj[i][j].value();
    let da = |i: usize, j: usize| aj[i][j].coeffs()[1];
    let m = input.ambient_dim();
    // coordinates in the frame (e_0, e_n, e_{n+1}) of Δ^⊥
    let eta = [a(1, 0), a(1, p), a(1, q)];
    let pm = DMatrix::from_row_slice(3, 2, &[1.0, eta[0], 0.0, eta[1], 0.0, eta[2]]);
    let sv = singular_values(&pm);
    let eta_norm = eta[1].hypot(eta[2]);
    let second = |k: usize| da(1, k) + (0..m).map(|l| a(1, l) * a(l, k)).sum::<f64>();
    let u = [0.0, a(0, p), a(0, q)];
    let w2 = [second(0), second(p), second(q)];
    let (dim2, un, wn) = if eta_norm > 0.0 {
        let nu = [0.0, -eta[2] / eta_norm, eta[1] / eta_norm];
        let un: f64 = u.iter().zip(&nu).map(|(x, y)| x * y).sum();
        let wn: f64 = w2.iter().zip(&nu).map(|(x, y)| x * y).sum();
        (un.abs().max(wn.abs()), un, wn)
    } else {
        (0.0, 0.0, 0.0)
    };
    let hw = input.ruling_half_width;
    let (lo, hi) = (un - hw * wn, un + hw * wn);
    let n1_margin = if lo * hi <= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
    DimCheck {
        s,
        p_singular_values: [sv[0], sv.get(1).copied().unwrap_or(0.0)],
        dim2,
        n1_margin,
    }
}

/// `max_j |f_{s t_j} − b_j e_1|` together with the normal part of
/// `f_{s t_j}`, over the nullity rulings `j ≥ 2`.
pub fn ruling_tangency_residual(
    chart: &ImmersionChart,
    input: &RuledFrameInput,
    path: &FramePath,
    point: &[f64],
) -> GeomResult<f64> {
    let n = input.n;
    let f = chart.eval_at(point, 2)?;
    let (e, _) = path.state_at(input, point[0]);
    let a = input.connection_at(point[0]);
    let jac: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut idx = vec![0; n];
            idx[i] = 1;
            f.iter().map(|c| extract_partial(c, &idx)).collect::<Result<Vec<_>, _>>().map(DVector::from_vec)
        })
        .collect::<Result<_, _>>()?;
    let basis = crate::linalg::column_span(&DMatrix::from_columns(&jac), n);
    let mut worst: f64 = 0.0;
    for j in 2..n {
        let mut idx = vec![0; n];
        idx[0] = 1;
        idx[j] = 1;
        let fst: DVector<f64> = DVector::from_vec(
            f.iter().map(|c| extract_partial(c, &idx)).collect::<Result<Vec<_>, _>>()?,
        );
        let target = e.row(1).transpose() * a[(j, 1)];
        let normal = &fst - &basis * (basis.transpose() * &fst);
        worst = worst.max((&fst - target).amax()).max(normal.amax());
    }
    Ok(worst)
}

/// Rotates the last two frame vectors by `θ(s)` inside the connection,
/// `Ã = R A Rᵀ`. The induced metric only sees the rows of `A` for the
/// tangent vectors and the lengths of their normal parts, so the new chart
/// is isometric to the old one; a constant `θ` gives a congruent chart.
pub fn gauge_deformation(input: &RuledFrameInput, theta: &Coeff1D) -> GeomResult<RuledFrameInput> {
    input.validate()?;
    let gauge = match &input.gauge {
        Some(g) => g.plus(theta)?,
        None => theta.clone(),
    };
    Ok(RuledFrameInput {
        gauge: if gauge.is_zero() { None } else { Some(gauge) },
        ..input.clone()
    })
}

fn random_trig(rng: &mut ChaCha8Rng, constant: f64, amp: f64) -> Coeff1D {
    let mut rows = vec![[constant, 0.0]];
    for _ in 0..2 {
        rows.push([amp * rng.gen_range(-1.0..1.0), amp * rng.gen_range(-1.0..1.0)]);
    }
    Coeff1D::Trig(rows)
}

/// Seeded random admissible input: trigonometric coefficients filtered so
/// that both rank conditions hold with margin on the whole domain.
pub fn random_ruled_input(n: usize, seed: u64) -> GeomResult<RuledFrameInput> {
    if n < 2 {
        return Err(GeomError::InvalidInput("ruled construction needs n ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..200 {
        let mut connection = vec![
            entry(0, 1, random_trig(&mut rng, 0.0, 0.3)),
            entry(1, n, random_trig(&mut rng, 1.0, 0.2)),
            entry(1, n + 1, random_trig(&mut rng, 0.0, 0.2)),
            entry(0, n, random_trig(&mut rng, 0.0, 0.3)),
            entry(0, n + 1, random_trig(&mut rng, 1.2, 0.3)),
            entry(n, n + 1, random_trig(&mut rng, 0.0, 0.5)),
        ];
        for j in 2..n {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let base = sign * rng.gen_range(0.5..1.0);
            connection.push(entry(j, 1, random_trig(&mut rng, base, 0.2)));
        }
        let input = RuledFrameInput {
            n,
            interval: [0.0, 1.5],
            connection,
            initial_frame: None,
            ruling_half_width: 0.5,
            gauge: None,
        };
        let [s0, s1] = input.interval;
        let ok = (0..CHECK_SAMPLES).all(|k| {
            let s = s0 + (s1 - s0) * k as f64 / (CHECK_SAMPLES - 1) as f64;
            let d = ruled_dim_checks(&input, s);
            d.p_singular_values[1] > 0.2 && d.n1_margin > 0.2
        });
        if ok {
            return Ok(input);
        }
    }
    Err(GeomError::InvalidInput(format!("no admissible connection found for seed {seed}")))
}
