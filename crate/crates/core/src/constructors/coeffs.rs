use serde::{Deserialize, Serialize};

use crate::error::{GeomError, GeomResult};
use crate::immersion::PolyTerm;
use crate::jets::JetScalar;

/// A scalar function of one variable given by a coefficient table.
///
/// `poly`: `Σ c_k s^k`. `trig`: row `k` is `[a_k, b_k]` and contributes
/// `a_k cos(k s) + b_k sin(k s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", content = "coeffs", rename_all = "snake_case")]
pub enum Coeff1D {
    Poly(Vec<f64>),
    Trig(Vec<[f64; 2]>),
}

impl Coeff1D {
    pub fn constant(c: f64) -> Self {
        Coeff1D::Poly(vec![c])
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Coeff1D::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck),
            Coeff1D::Trig(rows) => rows
                .iter()
                .enumerate()
                .map(|(k, [a, b])| {
                    let w = k as f64 * s;
                    a * w.cos() + b * w.sin()
                })
                .sum(),
        }
    }

    pub fn eval_jet(&self, s: &JetScalar) -> JetScalar {
        match self {
            Coeff1D::Poly(c) => {
                let mut acc = s.lift(0.0);
                for &ck in c.iter().rev() {
                    acc = &acc * s;
                    acc += ck;
                }
                acc
            }
            Coeff1D::Trig(rows) => {
                let mut acc = s.lift(0.0);
                for (k, [a, b]) in rows.iter().enumerate() {
                    if k == 0 {
                        acc += *a;
                        continue;
                    }
                    let w = s.scale(k as f64);
                    acc += &w.cos().scale(*a);
                    acc += &w.sin().scale(*b);
                }
                acc
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff1D::Poly(c) => c.iter().all(|&x| x == 0.0),
            Coeff1D::Trig(rows) => rows.iter().enumerate().all(|(k, r)| r[0] == 0.0 && (k == 0 || r[1] == 0.0)),
        }
    }

    /// Sum of two tables of the same basis.
    pub fn plus(&self, other: &Coeff1D) -> GeomResult<Coeff1D> {
        fn merge<T: Copy + Default>(a: &[T], b: &[T], add: impl Fn(T, T) -> T) -> Vec<T> {
            (0..a.len().max(b.len()))
                .map(|k| add(a.get(k).copied().unwrap_or_default(), b.get(k).copied().unwrap_or_default()))
                .collect()
        }
        match (self, other) {
            (Coeff1D::Poly(a), Coeff1D::Poly(b)) => Ok(Coeff1D::Poly(merge(a, b, |x, y| x + y))),
            (Coeff1D::Trig(a), Coeff1D::Trig(b)) => {
                Ok(Coeff1D::Trig(merge(a, b, |x, y| [x[0] + y[0], x[1] + y[1]])))
            }
            _ => Err(GeomError::InvalidInput("cannot add poly and trig tables".into())),
        }
    }
}

/// A polynomial in the domain coordinates: rows `[coeff, p_1, ..., p_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PolyTable(pub Vec<Vec<f64>>);

impl PolyTable {
    pub fn terms(&self, dim: usize) -> GeomResult<Vec<PolyTerm>> {
        self.0.iter().map(|r| PolyTerm::from_row(r, dim)).collect()
    }

    pub fn monomial(coeff: f64, powers: &[u32]) -> Self {
        let mut row = vec![coeff];
        row.extend(powers.iter().map(|&p| p as f64));
        PolyTable(vec![row])
    }

    pub fn eval_jets(&self, x: &[JetScalar]) -> GeomResult<JetScalar> {
        let mut acc = x[0].zero_like();
        for t in self.terms(x.len())? {
            acc += &t.eval_jets(x);
        }
        Ok(acc)
    }
}
