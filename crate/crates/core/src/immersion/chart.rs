use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, GeomResult};
use crate::jets::JetScalar;

/// Chart evaluator: jet-valued domain point to jet-valued ambient point.
pub type ChartFn = dyn Fn(&[JetScalar]) -> GeomResult<Vec<JetScalar>> + Send + Sync;

/// Axis-aligned box in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> GeomResult<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GeomError::InvalidInput("domain bounds have mismatched lengths".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(GeomError::InvalidInput("domain box must have lower < upper".into()));
        }
        Ok(DomainBox { lower, upper })
    }

    /// `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Self {
        DomainBox {
            lower: vec![-r; dim],
            upper: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&x, (&l, &u))| {
                let slack = 1e-12 * (u - l);
                x >= l - slack && x <= u + slack
            })
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Tensor grid with endpoints included, last coordinate varying fastest.
    pub fn grid(&self, counts: &[usize]) -> GeomResult<Vec<Vec<f64>>> {
        if counts.len() != self.dim() || counts.iter().any(|&c| c == 0) {
            return Err(GeomError::InvalidInput(format!(
                "grid counts {counts:?} do not fit a {}-dimensional box",
                self.dim()
            )));
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                (0..c)
                    .map(|i| {
                        if c == 1 {
                            0.5 * (self.lower[k] + self.upper[k])
                        } else {
                            self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / (c - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &x in axis {
                    let mut p = prefix.clone();
                    p.push(x);
                    next.push(p);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// The box shrunk towards its center by `factor` on each axis.
    pub fn shrunk(&self, factor: f64) -> Self {
        let c = self.center();
        DomainBox {
            lower: self.lower.iter().zip(&c).map(|(l, c)| c + factor * (l - c)).collect(),
            upper: self.upper.iter().zip(&c).map(|(u, c)| c + factor * (u - c)).collect(),
        }
    }
}

/// A smooth map from a box in ℝⁿ into Euclidean space, evaluable on jets.
#[derive(Clone)]
pub struct ImmersionChart {
    label: String,
    intrinsic_dim: usize,
    ambient_dim: usize,
    domain: DomainBox,
    map: Arc<ChartFn>,
}

impl fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmersionChart")
            .field("label", &self.label)
            .field("intrinsic_dim", &self.intrinsic_dim)
            .field("ambient_dim", &self.ambient_dim)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ImmersionChart {
    pub fn new<F>(
        label: impl Into<String>,
        intrinsic_dim: usize,
        ambient_dim: usize,
        domain: DomainBox,
        map: F,
    ) -> GeomResult<Self>
    where
        F: Fn(&[JetScalar]) -> GeomResult<Vec<JetScalar>> + Send + Sync + 'static,
    {
        if intrinsic_dim == 0 || ambient_dim <= intrinsic_dim {
            return Err(GeomError::InvalidInput(format!(
                "chart dimensions {intrinsic_dim} -> {ambient_dim} are not an immersion shape"
            )));
        }
        if domain.dim() != intrinsic_dim {
            return Err(GeomError::InvalidInput("domain box dimension mismatch".into()));
        }
        Ok(ImmersionChart {
            label: label.into(),
            intrinsic_dim,
            ambient_dim,
            domain,
            map: Arc::new(map),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim - self.intrinsic_dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same map restricted to a smaller box.
    pub fn with_domain(&self, domain: DomainBox) -> GeomResult<Self> {
        if domain.dim() != self.intrinsic_dim {
            return Err(GeomError::InvalidInput("domain box dimension mismatch".into()));
        }
        let mut c = self.clone();
        c.domain = domain;
        Ok(c)
    }

    pub fn eval_jets(&self, x: &[JetScalar]) -> GeomResult<Vec<JetScalar>> {
        if x.len() != self.intrinsic_dim {
            return Err(GeomError::InvalidInput(format!(
                "chart expects {} coordinates, got {}",
                self.intrinsic_dim,
                x.len()
            )));
        }
        let p: Vec<f64> = x.iter().map(JetScalar::value).collect();
        if !self.domain.contains(&p) {
            return Err(GeomError::OutsideDomain(p));
        }
        let out = (self.map)(x)?;
        if out.len() != self.ambient_dim {
            return Err(GeomError::InvalidInput(format!(
                "chart returned {} components, expected {}",
                out.len(),
                self.ambient_dim
            )));
        }
        Ok(out)
    }

    /// Jet evaluation at `point` in fresh coordinate variables.
    pub fn eval_at(&self, point: &[f64], order: usize) -> GeomResult<Vec<JetScalar>> {
        let x = JetScalar::variables(point, order)?;
        self.eval_jets(&x)
    }

    pub fn eval_point(&self, point: &[f64]) -> GeomResult<Vec<f64>> {
        Ok(self.eval_at(point, 0)?.iter().map(JetScalar::value).collect())
    }

    /// `Q·f + b`.
    pub fn with_rigid_motion(&self, motion: &RigidMotion) -> GeomResult<Self> {
        if motion.dim() != self.ambient_dim {
            return Err(GeomError::InvalidInput("rigid motion dimension mismatch".into()));
        }
        let inner = self.map.clone();
        let m = motion.clone();
        let mut c = self.clone();
        c.label = format!("{}+rigid", self.label);
        c.map = Arc::new(move |x: &[JetScalar]| {
            let y = inner(x)?;
            Ok(m.apply_jets(&y))
        });
        Ok(c)
    }

    /// `q ↦ f(M q + b)` on the reparametrization's domain.
    pub fn reparametrized(&self, affine: &AffineReparam) -> GeomResult<Self> {
        let n = self.intrinsic_dim;
        if affine.matrix.len() != n
            || affine.matrix.iter().any(|r| r.len() != n)
            || affine.offset.len() != n
            || affine.domain.dim() != n
        {
            return Err(GeomError::InvalidInput("affine reparametrization shape mismatch".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| affine.matrix[i][j]);
        if m.determinant().abs() < 1e-12 {
            return Err(GeomError::InvalidInput("affine reparametrization is singular".into()));
        }
        for corner in 0..(1usize << n) {
            let q: Vec<f64> = (0..n)
                .map(|k| {
                    if corner >> k & 1 == 1 {
                        affine.domain.upper[k]
                    } else {
                        affine.domain.lower[k]
                    }
                })
                .collect();
            if !self.domain.contains(&affine.apply(&q)) {
                return Err(GeomError::InvalidInput(
                    "reparametrized box does not map into the chart domain".into(),
                ));
            }
        }
        let inner = self.clone();
        let a = affine.clone();
        ImmersionChart::new(
            format!("{}+affine", self.label),
            n,
            self.ambient_dim,
            affine.domain.clone(),
            move |q: &[JetScalar]| {
                let p: Vec<JetScalar> = (0..n)
                    .map(|i| {
                        let mut acc = q[0].lift(a.offset[i]);
                        for (j, qj) in q.iter().enumerate() {
                            acc.axpy(a.matrix[i][j], qj);
                        }
                        acc
                    })
                    .collect();
                inner.eval_jets(&p)
            },
        )
    }
}

/// Ambient rigid motion `y ↦ Q y + b` with `Q ∈ SO(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl RigidMotion {
    pub fn identity(dim: usize) -> Self {
        RigidMotion {
            rotation: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            translation: vec![0.0; dim],
        }
    }

    /// Seeded random rotation (QR of a Gaussian-like matrix) and translation.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let qr = raw.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                for i in 0..dim {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        if q.determinant() < 0.0 {
            for i in 0..dim {
                q[(i, 0)] = -q[(i, 0)];
            }
        }
        let translation = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        RigidMotion {
            rotation: (0..dim).map(|i| (0..dim).map(|j| q[(i, j)]).collect()).collect(),
            translation,
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .zip(&self.translation)
            .map(|(row, b)| row.iter().zip(y).map(|(q, v)| q * v).sum::<f64>() + b)
            .collect()
    }

    pub fn apply_jets(&self, y: &[JetScalar]) -> Vec<JetScalar> {
        self.rotation
            .iter()
            .zip(&self.translation)
            .map(|(row, &b)| {
                let mut acc = y[0].lift(b);
                for (q, v) in row.iter().zip(y) {
                    acc.axpy(*q, v);
                }
                acc
            })
            .collect()
    }
}

/// Affine change of parameters `p = M q + b` defined on the box `domain` of `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineReparam {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub domain: DomainBox,
}

impl AffineReparam {
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(q).map(|(m, x)| m * x).sum::<f64>() + b)
            .collect()
    }
}

/// Monomial `coeff · Π x_k^{powers_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl PolyTerm {
    pub fn new(coeff: f64, powers: &[u32]) -> Self {
        PolyTerm {
            coeff,
            powers: powers.to_vec(),
        }
    }

    /// Parse the config form `[coeff, p_1, ..., p_n]`.
    pub fn from_row(row: &[f64], dim: usize) -> GeomResult<Self> {
        if row.len() != dim + 1 {
            return Err(GeomError::InvalidInput(format!(
                "polynomial term {row:?} needs a coefficient and {dim} exponents"
            )));
        }
        let mut powers = Vec::with_capacity(dim);
        for &p in &row[1..] {
            if p < 0.0 || p.fract() != 0.0 || p > 16.0 {
                return Err(GeomError::InvalidInput(format!("bad exponent {p}")));
            }
            powers.push(p as u32);
        }
        Ok(PolyTerm {
            coeff: row[0],
            powers,
        })
    }

    pub fn eval_jets(&self, x: &[JetScalar]) -> JetScalar {
        let mut acc = x[0].lift(self.coeff);
        for (xi, &p) in x.iter().zip(&self.powers) {
            if p > 0 {
                acc = &acc * &xi.powi(p);
            }
        }
        acc
    }
}

pub(crate) fn eval_poly(terms: &[PolyTerm], x: &[JetScalar]) -> JetScalar {
    let mut acc = x[0].zero_like();
    for t in terms {
        acc += &t.eval_jets(x);
    }
    acc
}

/// Built-in test fixtures.
pub mod builtin {
    use super::*;

    /// `(u_1..u_n) ↦ (u_1..u_n, 0, ..., 0)`.
    pub fn plane(n: usize, codim: usize) -> ImmersionChart {
        ImmersionChart::new("plane", n, n + codim, DomainBox::cube(n, 1.0), move |x| {
            let mut out: Vec<JetScalar> = x.to_vec();
            out.extend((0..codim).map(|_| x[0].zero_like()));
            Ok(out)
        })
        .expect("valid plane chart")
    }

    /// Unit cylinder `(u, t) ↦ (cos u, sin u, t, 0)`.
    pub fn cylinder() -> ImmersionChart {
        ImmersionChart::new("cylinder", 2, 4, DomainBox::cube(2, 1.0), |x| {
            Ok(vec![x[0].cos(), x[0].sin(), x[1].clone(), x[0].zero_like()])
        })
        .expect("valid cylinder chart")
    }

    /// `(x, z) ↦ (x, z, x², xz)`.
    pub fn graph_surface() -> ImmersionChart {
        ImmersionChart::new("graph_surface", 2, 4, DomainBox::cube(2, 1.0), |x| {
            Ok(vec![x[0].clone(), x[1].clone(), x[0].square(), &x[0] * &x[1]])
        })
        .expect("valid graph chart")
    }

    /// `(x, z, t) ↦ (x, z, x², xz, t)`: the graph surface times a line.
    pub fn graph_product() -> ImmersionChart {
        ImmersionChart::new("graph_product", 3, 5, DomainBox::cube(3, 1.0), |x| {
            Ok(vec![
                x[0].clone(),
                x[1].clone(),
                x[0].square(),
                &x[0] * &x[1],
                x[2].clone(),
            ])
        })
        .expect("valid graph product chart")
    }

    /// `(x, y) ↦ (x, y, x² − y², 2xy)`, the graph of `w ↦ w²`.
    pub fn complex_square() -> ImmersionChart {
        ImmersionChart::new("complex_square", 2, 4, DomainBox::cube(2, 1.0), |x| {
            Ok(vec![
                x[0].clone(),
                x[1].clone(),
                x[0].square() - x[1].square(),
                (&x[0] * &x[1]).scale(2.0),
            ])
        })
        .expect("valid complex square chart")
    }

    /// Polynomial chart, one term list per ambient coordinate.
    pub fn polynomial(
        label: &str,
        dim: usize,
        coordinates: Vec<Vec<PolyTerm>>,
        domain: DomainBox,
    ) -> GeomResult<ImmersionChart> {
        if coordinates.iter().flatten().any(|t| t.powers.len() != dim) {
            return Err(GeomError::InvalidInput("polynomial term arity mismatch".into()));
        }
        let ambient = coordinates.len();
        ImmersionChart::new(label, dim, ambient, domain, move |x| {
            Ok(coordinates.iter().map(|c| eval_poly(c, x)).collect())
        })
    }
}
