//! Truncated multivariate Taylor arithmetic.
//!
//! A [`JetScalar`] stores the scaled Taylor coefficients `∂^α f / α!` of a
//! scalar function for every multi-index `α` with `|α| ≤ order`. With that
//! convention multiplication is a plain truncated convolution and
//! [`extract_partial`] multiplies the factorial back in.
//!
//! Coefficients are stored densely in graded order (all degree-0 entries,
//! then degree 1, ...), so the coefficients of a lower-order truncation are a
//! prefix of the higher-order table.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

/// Largest supported truncation order.
///
/// Geometry on charts only needs order 3; surfaces that feed the polar
/// construction are evaluated two orders higher so that the derived section
/// map is itself available to order 3.
pub const MAX_ORDER: usize = 6;

/// Largest supported number of independent variables.
pub const MAX_VARS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("jet shape mismatch: ({0} vars, order {1}) vs ({2} vars, order {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("unsupported jet shape: {num_vars} vars, order {order}")]
    UnsupportedShape { num_vars: usize, order: usize },
    #[error("multi-index {0:?} exceeds the jet order or variable count")]
    BadMultiIndex(Vec<usize>),
    #[error("domain violation in {func}: argument {value}")]
    Domain { func: &'static str, value: f64 },
}

/// Index tables shared by all jets with the same `(num_vars, order)`.
#[derive(Debug)]
struct Layout {
    num_vars: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)`: coefficient `k` of a product receives `a[i] * b[j]`.
    products: Vec<(u32, u32, u32)>,
    /// Per variable: for every coefficient of the order-1 lower layout, the
    /// source slot in this layout and the factor `β_v + 1`.
    derivs: Vec<Vec<(u32, f64)>>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// All multi-indices of total degree `deg` in `nv` variables, lexicographically descending.
fn indices_of_degree(nv: usize, deg: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(pos: usize, remaining: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = remaining as u8;
            out.push(cur.clone());
            return;
        }
        for v in (0..=remaining).rev() {
            cur[pos] = v as u8;
            rec(pos + 1, remaining - v, cur, out);
        }
    }
    let mut cur = vec![0u8; nv];
    rec(0, deg, &mut cur, out);
}

impl Layout {
    fn build(num_vars: usize, order: usize) -> Self {
        let mut indices = Vec::with_capacity(binomial(num_vars + order, order));
        for deg in 0..=order {
            indices_of_degree(num_vars, deg, &mut indices);
        }
        let degrees: Vec<usize> = indices
            .iter()
            .map(|a| a.iter().map(|&x| x as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();

        let mut products = Vec::new();
        let mut sum = vec![0u8; num_vars];
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                for v in 0..num_vars {
                    sum[v] = a[v] + b[v];
                }
                let k = lookup[&sum];
                products.push((i as u32, j as u32, k as u32));
            }
        }
        products.sort_by_key(|&(_, _, k)| k);

        let mut derivs = Vec::with_capacity(num_vars);
        if order > 0 {
            let lower = binomial(num_vars + order - 1, order - 1);
            for v in 0..num_vars {
                let mut table = Vec::with_capacity(lower);
                for beta in indices.iter().take(lower) {
                    let mut raised = beta.clone();
                    raised[v] += 1;
                    let src = lookup[&raised];
                    table.push((src as u32, (beta[v] as f64) + 1.0));
                }
                derivs.push(table);
            }
        }

        Layout {
            num_vars,
            order,
            indices,
            degrees,
            lookup,
            products,
            derivs,
        }
    }

    fn get(num_vars: usize, order: usize) -> Result<&'static Layout, JetError> {
        if num_vars == 0 || num_vars > MAX_VARS || order > MAX_ORDER {
            return Err(JetError::UnsupportedShape { num_vars, order });
        }
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        let layout = guard
            .entry((num_vars, order))
            .or_insert_with(|| Box::leak(Box::new(Layout::build(num_vars, order))));
        Ok(*layout)
    }

    fn len(&self) -> usize {
        self.indices.len()
    }
}

/// Truncated Taylor expansion of a scalar function of `num_vars` variables.
#[derive(Clone)]
pub struct JetScalar {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for JetScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetScalar")
            .field("num_vars", &self.layout.num_vars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for JetScalar {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.layout, other.layout) && self.coeffs == other.coeffs
    }
}

/// Coordinate jet: constant term `value`, unit first-order coefficient at `index`.
pub fn jet_variable(
    index: usize,
    value: f64,
    num_vars: usize,
    order: usize,
) -> Result<JetScalar, JetError> {
    if index >= num_vars {
        return Err(JetError::IndexOutOfRange { index, num_vars });
    }
    let mut jet = JetScalar::constant(value, num_vars, order)?;
    if order > 0 {
        // degree-1 block starts at slot 1, ordered e_0, e_1, ...
        jet.coeffs[1 + index] = 1.0;
    }
    Ok(jet)
}

/// Truncated Cauchy product.
pub fn jet_mul(a: &JetScalar, b: &JetScalar) -> Result<JetScalar, JetError> {
    a.check_shape(b)?;
    let mut out = vec![0.0; a.coeffs.len()];
    for &(i, j, k) in &a.layout.products {
        out[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
    }
    Ok(JetScalar {
        layout: a.layout,
        coeffs: out,
    })
}

/// Elementary functions available for Taylor composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Recip,
    PowConst(f64),
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Recip => "recip",
            UnaryFn::PowConst(_) => "pow_const",
        }
    }

    /// Scaled derivatives `f^(k)(x0) / k!` for `k = 0..=order`.
    fn taylor_coefficients(self, x0: f64, order: usize) -> Result<Vec<f64>, JetError> {
        let domain = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(JetError::Domain {
                    func: self.name(),
                    value: x0,
                })
            }
        };
        let mut d = Vec::with_capacity(order + 1);
        let mut fact = 1.0;
        match self {
            UnaryFn::Sin | UnaryFn::Cos => {
                let (s, c) = x0.sin_cos();
                let cycle = match self {
                    UnaryFn::Sin => [s, c, -s, -c],
                    _ => [c, -s, -c, s],
                };
                for k in 0..=order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    d.push(cycle[k % 4] / fact);
                }
            }
            UnaryFn::Exp => {
                let e = x0.exp();
                for k in 0..=order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    d.push(e / fact);
                }
            }
            UnaryFn::Log => {
                domain(x0 > 0.0)?;
                d.push(x0.ln());
                for k in 1..=order {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    d.push(sign / (k as f64 * x0.powi(k as i32)));
                }
            }
            UnaryFn::Recip => {
                domain(x0 != 0.0)?;
                for k in 0..=order {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    d.push(sign / x0.powi(k as i32 + 1));
                }
            }
            UnaryFn::Sqrt => return UnaryFn::PowConst(0.5).taylor_coefficients(x0, order),
            UnaryFn::PowConst(p) => {
                let integral = p.fract() == 0.0 && p >= 0.0;
                domain(x0 > 0.0 || (integral && x0.is_finite()))?;
                // generalized binomial C(p, k) x0^(p-k)
                let mut binom = 1.0;
                for k in 0..=order {
                    if k > 0 {
                        binom *= (p - (k as f64 - 1.0)) / k as f64;
                    }
                    let term = if binom == 0.0 {
                        0.0
                    } else {
                        binom * x0.powf(p - k as f64)
                    };
                    d.push(term);
                }
            }
        }
        Ok(d)
    }
}

/// Taylor composition `f(a)` through the jet's order.
pub fn jet_apply_unary(f: UnaryFn, a: &JetScalar) -> Result<JetScalar, JetError> {
    let d = f.taylor_coefficients(a.value(), a.order())?;
    Ok(a.compose_univariate(&d))
}

/// `∂^α f` at the expansion point (factorials applied).
pub fn extract_partial(a: &JetScalar, multi_index: &[usize]) -> Result<f64, JetError> {
    let idx = a.slot(multi_index)?;
    let fact: f64 = multi_index
        .iter()
        .map(|&m| (1..=m).map(|x| x as f64).product::<f64>())
        .product();
    Ok(a.coeffs[idx] * fact)
}

impl JetScalar {
    pub fn constant(value: f64, num_vars: usize, order: usize) -> Result<Self, JetError> {
        let layout = Layout::get(num_vars, order)?;
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Ok(JetScalar { layout, coeffs })
    }

    /// Coordinate jets for every variable, expanded at `point`.
    pub fn variables(point: &[f64], order: usize) -> Result<Vec<Self>, JetError> {
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| jet_variable(i, v, point.len(), order))
            .collect()
    }

    /// A constant with the same shape as `self`.
    pub fn lift(&self, value: f64) -> Self {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        JetScalar {
            layout: self.layout,
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Self {
        self.lift(0.0)
    }

    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Result<Self, JetError> {
        let layout = Layout::get(num_vars, order)?;
        if coeffs.len() != layout.len() {
            return Err(JetError::UnsupportedShape { num_vars, order });
        }
        Ok(JetScalar { layout, coeffs })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.layout.num_vars
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multi-index of every stored coefficient, in storage order.
    pub fn multi_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.layout
            .indices
            .iter()
            .map(|a| a.iter().map(|&x| x as usize).collect())
    }

    /// Scaled coefficient `∂^α f / α!`.
    pub fn coeff(&self, multi_index: &[usize]) -> Result<f64, JetError> {
        Ok(self.coeffs[self.slot(multi_index)?])
    }

    pub fn same_shape(&self, other: &JetScalar) -> bool {
        std::ptr::eq(self.layout, other.layout)
    }

    fn check_shape(&self, other: &JetScalar) -> Result<(), JetError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(JetError::ShapeMismatch(
                self.num_vars(),
                self.order(),
                other.num_vars(),
                other.order(),
            ))
        }
    }

    fn slot(&self, multi_index: &[usize]) -> Result<usize, JetError> {
        let bad = || JetError::BadMultiIndex(multi_index.to_vec());
        if multi_index.len() > self.num_vars() {
            return Err(bad());
        }
        if multi_index.iter().sum::<usize>() > self.order() {
            return Err(bad());
        }
        let mut key = vec![0u8; self.num_vars()];
        for (k, &m) in key.iter_mut().zip(multi_index) {
            *k = m as u8;
        }
        self.layout.lookup.get(&key).copied().ok_or_else(bad)
    }

    /// Gradient (first partials) at the expansion point.
    pub fn gradient(&self) -> Vec<f64> {
        if self.order() == 0 {
            return vec![0.0; self.num_vars()];
        }
        self.coeffs[1..=self.num_vars()].to_vec()
    }

    /// `∂f/∂x_var` as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Result<JetScalar, JetError> {
        if var >= self.num_vars() {
            return Err(JetError::IndexOutOfRange {
                index: var,
                num_vars: self.num_vars(),
            });
        }
        if self.order() == 0 {
            return Err(JetError::UnsupportedShape {
                num_vars: self.num_vars(),
                order: 0,
            });
        }
        let lower = Layout::get(self.num_vars(), self.order() - 1)?;
        let coeffs = self.layout.derivs[var]
            .iter()
            .map(|&(src, factor)| self.coeffs[src as usize] * factor)
            .collect();
        Ok(JetScalar {
            layout: lower,
            coeffs,
        })
    }

    /// Explicit truncation to a lower order.
    pub fn truncate(&self, order: usize) -> Result<JetScalar, JetError> {
        if order > self.order() {
            return Err(JetError::UnsupportedShape {
                num_vars: self.num_vars(),
                order,
            });
        }
        let lower = Layout::get(self.num_vars(), order)?;
        Ok(JetScalar {
            layout: lower,
            coeffs: self.coeffs[..lower.len()].to_vec(),
        })
    }

    /// Evaluate the univariate series `Σ d_k (a - a0)^k` by Horner's rule.
    pub fn compose_univariate(&self, d: &[f64]) -> JetScalar {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let order = self.order().min(d.len().saturating_sub(1));
        let mut acc = self.lift(d[order]);
        for k in (0..order).rev() {
            acc = &acc * &h;
            acc.coeffs[0] += d[k];
        }
        acc
    }

    /// Substitute `inputs` (one per variable of `self`) into this Taylor
    /// polynomial, expanded about the inputs' constant terms.
    ///
    /// The inputs' constant terms must coincide with the expansion point of
    /// `self`; only the perturbations are substituted.
    pub fn compose(&self, inputs: &[JetScalar]) -> Result<JetScalar, JetError> {
        if inputs.len() != self.num_vars() {
            return Err(JetError::BadMultiIndex(vec![inputs.len()]));
        }
        let first = &inputs[0];
        for x in inputs {
            first.check_shape(x)?;
        }
        if first.order() > self.order() {
            return Err(JetError::ShapeMismatch(
                self.num_vars(),
                self.order(),
                first.num_vars(),
                first.order(),
            ));
        }
        let order = first.order();
        // powers[v][p] = (x_v - x_v0)^p
        let mut powers: Vec<Vec<JetScalar>> = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut h = x.clone();
            h.coeffs[0] = 0.0;
            let mut row = vec![x.lift(1.0)];
            for p in 1..=order {
                let next = &row[p - 1] * &h;
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = first.lift(0.0);
        for (slot, alpha) in self.layout.indices.iter().enumerate() {
            if self.layout.degrees[slot] > order {
                break;
            }
            let c = self.coeffs[slot];
            if c == 0.0 {
                continue;
            }
            let mut term: Option<JetScalar> = None;
            for (v, &p) in alpha.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                let factor = &powers[v][p as usize];
                term = Some(match term {
                    None => factor.clone(),
                    Some(t) => &t * factor,
                });
            }
            match term {
                None => out.coeffs[0] += c,
                Some(t) => {
                    for (o, tv) in out.coeffs.iter_mut().zip(&t.coeffs) {
                        *o += c * tv;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &JetScalar) -> Result<JetScalar, JetError> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &JetScalar) -> Result<JetScalar, JetError> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn try_div(&self, other: &JetScalar) -> Result<JetScalar, JetError> {
        let r = other.recip()?;
        jet_mul(self, &r)
    }

    fn zip_with(&self, other: &JetScalar, f: impl Fn(f64, f64) -> f64) -> JetScalar {
        JetScalar {
            layout: self.layout,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> JetScalar {
        JetScalar {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &JetScalar) {
        assert!(self.same_shape(other), "jet shape mismatch in axpy");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn sin(&self) -> JetScalar {
        jet_apply_unary(UnaryFn::Sin, self).expect("sin is total")
    }

    pub fn cos(&self) -> JetScalar {
        jet_apply_unary(UnaryFn::Cos, self).expect("cos is total")
    }

    pub fn exp(&self) -> JetScalar {
        jet_apply_unary(UnaryFn::Exp, self).expect("exp is total")
    }

    pub fn ln(&self) -> Result<JetScalar, JetError> {
        jet_apply_unary(UnaryFn::Log, self)
    }

    pub fn sqrt(&self) -> Result<JetScalar, JetError> {
        jet_apply_unary(UnaryFn::Sqrt, self)
    }

    pub fn recip(&self) -> Result<JetScalar, JetError> {
        jet_apply_unary(UnaryFn::Recip, self)
    }

    pub fn powf(&self, p: f64) -> Result<JetScalar, JetError> {
        jet_apply_unary(UnaryFn::PowConst(p), self)
    }

    pub fn powi(&self, p: u32) -> JetScalar {
        let mut acc = self.lift(1.0);
        for _ in 0..p {
            acc = &acc * self;
        }
        acc
    }

    pub fn square(&self) -> JetScalar {
        self * self
    }
}

// Operator overloads panic on shape mismatch; use the `try_*` forms or
// `jet_mul` where operands may come from different computations.

impl<'a> Mul<&'a JetScalar> for &'a JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: &'a JetScalar) -> JetScalar {
        jet_mul(self, rhs).expect("jet shape mismatch in mul")
    }
}

impl Mul for JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: JetScalar) -> JetScalar {
        &self * &rhs
    }
}

impl<'a> Mul<&'a JetScalar> for JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: &'a JetScalar) -> JetScalar {
        &self * rhs
    }
}

impl<'a> Mul<JetScalar> for &'a JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: JetScalar) -> JetScalar {
        self * &rhs
    }
}

impl<'a> Add<&'a JetScalar> for &'a JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: &'a JetScalar) -> JetScalar {
        self.try_add(rhs).expect("jet shape mismatch in add")
    }
}

impl Add for JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: JetScalar) -> JetScalar {
        &self + &rhs
    }
}

impl<'a> Add<&'a JetScalar> for JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: &'a JetScalar) -> JetScalar {
        &self + rhs
    }
}

impl<'a> Sub<&'a JetScalar> for &'a JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: &'a JetScalar) -> JetScalar {
        self.try_sub(rhs).expect("jet shape mismatch in sub")
    }
}

impl Sub for JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: JetScalar) -> JetScalar {
        &self - &rhs
    }
}

impl<'a> Sub<&'a JetScalar> for JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: &'a JetScalar) -> JetScalar {
        &self - rhs
    }
}

impl Neg for &JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        self.scale(-1.0)
    }
}

impl Neg for JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        self.scale(-1.0)
    }
}

impl Add<f64> for &JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: f64) -> JetScalar {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Add<f64> for JetScalar {
    type Output = JetScalar;
    fn add(mut self, rhs: f64) -> JetScalar {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for &JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: f64) -> JetScalar {
        self + (-rhs)
    }
}

impl Sub<f64> for JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: f64) -> JetScalar {
        self + (-rhs)
    }
}

impl Mul<f64> for &JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: f64) -> JetScalar {
        self.scale(rhs)
    }
}

impl Mul<f64> for JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: f64) -> JetScalar {
        self.scale(rhs)
    }
}

impl Div<f64> for &JetScalar {
    type Output = JetScalar;
    fn div(self, rhs: f64) -> JetScalar {
        self.scale(1.0 / rhs)
    }
}

impl Div<f64> for JetScalar {
    type Output = JetScalar;
    fn div(self, rhs: f64) -> JetScalar {
        self.scale(1.0 / rhs)
    }
}

impl AddAssign<&JetScalar> for JetScalar {
    fn add_assign(&mut self, rhs: &JetScalar) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&JetScalar> for JetScalar {
    fn sub_assign(&mut self, rhs: &JetScalar) {
        self.axpy(-1.0, rhs);
    }
}

impl AddAssign<f64> for JetScalar {
    fn add_assign(&mut self, rhs: f64) {
        self.coeffs[0] += rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coordinate_jets() {
        let x = jet_variable(0, 2.0, 2, 2).unwrap();
        assert_eq!(x.coeffs().len(), 6);
        assert_eq!(x.coeff(&[]).unwrap(), 2.0);
        assert_eq!(x.coeff(&[1, 0]).unwrap(), 1.0);
        for a in [[0, 1], [2, 0], [1, 1], [0, 2]] {
            assert_eq!(x.coeff(&a).unwrap(), 0.0);
        }
        let y = jet_variable(1, -1.0, 2, 3).unwrap();
        assert_eq!(y.value(), -1.0);
        assert_eq!(y.coeff(&[0, 1]).unwrap(), 1.0);
        assert_eq!(y.coeff(&[1, 0]).unwrap(), 0.0);
        assert!(matches!(
            jet_variable(2, 0.0, 2, 2),
            Err(JetError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn coefficient_count_matches_binomial() {
        for nv in 1..=5 {
            for order in 0..=4 {
                let c = JetScalar::constant(0.0, nv, order).unwrap();
                assert_eq!(c.coeffs().len(), binomial(nv + order, order));
            }
        }
    }

    #[test]
    fn squares_and_products() {
        let x = jet_variable(0, 3.0, 1, 2).unwrap();
        assert_eq!((&x * &x).coeffs(), &[9.0, 6.0, 1.0]);

        let x = jet_variable(0, 2.0, 1, 2).unwrap();
        let sq = &x * &x;
        assert_eq!(sq.value(), 4.0);
        assert_eq!(extract_partial(&sq, &[1]).unwrap(), 4.0);
        assert_eq!(sq.coeff(&[2]).unwrap(), 1.0);

        let x = jet_variable(0, 3.0, 2, 2).unwrap();
        let y = jet_variable(1, 5.0, 2, 2).unwrap();
        let xy = &x * &y;
        assert_eq!(xy.value(), 15.0);
        assert_eq!(extract_partial(&xy, &[1, 0]).unwrap(), 5.0);
        assert_eq!(extract_partial(&xy, &[0, 1]).unwrap(), 3.0);
        assert_eq!(xy.coeff(&[1, 1]).unwrap(), 1.0);
        assert_eq!(extract_partial(&xy, &[1, 1]).unwrap(), 1.0);

        let x = jet_variable(0, 1.0, 2, 2).unwrap();
        let y = jet_variable(1, 1.0, 2, 2).unwrap();
        let lhs = (&x + &y) * (&x - &y);
        let rhs = &x * &x - &y * &y;
        assert_eq!(lhs.value(), 0.0);
        assert_eq!(lhs.coeffs(), rhs.coeffs());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = jet_variable(0, 1.0, 2, 2).unwrap();
        let b = jet_variable(0, 1.0, 2, 3).unwrap();
        assert!(matches!(jet_mul(&a, &b), Err(JetError::ShapeMismatch(..))));
        let c = jet_variable(0, 1.0, 3, 2).unwrap();
        assert!(a.try_add(&c).is_err());
    }

    #[test]
    fn maclaurin_series() {
        let x = jet_variable(0, 0.0, 1, 3).unwrap();
        let s = x.sin();
        for (c, e) in s.coeffs().iter().zip([0.0, 1.0, 0.0, -1.0 / 6.0]) {
            assert_relative_eq!(*c, e, epsilon = 1e-15);
        }
        let e = x.exp();
        for (c, want) in e.coeffs().iter().zip([1.0, 1.0, 0.5, 1.0 / 6.0]) {
            assert_relative_eq!(*c, want, epsilon = 1e-15);
        }
        let x = jet_variable(0, 2.0, 1, 2).unwrap();
        let r = x.recip().unwrap();
        assert_eq!(r.coeffs(), &[0.5, -0.25, 0.125]);
    }

    #[test]
    fn domain_violations() {
        let x = jet_variable(0, -1.0, 1, 2).unwrap();
        assert!(matches!(x.sqrt(), Err(JetError::Domain { func: "pow_const", .. })));
        assert!(x.ln().is_err());
        let z = jet_variable(0, 0.0, 1, 2).unwrap();
        assert!(z.recip().is_err());
        assert!(z.powf(2.0).is_ok());
    }

    #[test]
    fn partial_extraction() {
        let x = jet_variable(0, 1.0, 1, 3).unwrap();
        let cube = x.powi(3);
        assert_eq!(extract_partial(&cube, &[2]).unwrap(), 6.0);
        assert_eq!(extract_partial(&cube, &[3]).unwrap(), 6.0);
        assert_eq!(extract_partial(&cube, &[]).unwrap(), 1.0);
        assert!(matches!(
            extract_partial(&cube, &[4]),
            Err(JetError::BadMultiIndex(_))
        ));
    }

    #[test]
    fn derivative_and_truncation() {
        let v = JetScalar::variables(&[0.5, -0.25], 3).unwrap();
        let f = &v[0].powi(3) * &v[1] + v[1].sin();
        let fx = f.derivative(0).unwrap();
        assert_eq!(fx.order(), 2);
        // f_x = 3x^2 y
        assert_relative_eq!(fx.value(), 3.0 * 0.25 * -0.25, epsilon = 1e-15);
        assert_relative_eq!(
            extract_partial(&fx, &[1, 1]).unwrap(),
            extract_partial(&f, &[2, 1]).unwrap(),
            epsilon = 1e-14
        );
        let t = f.truncate(1).unwrap();
        assert_eq!(t.coeffs(), &f.coeffs()[..3]);
    }

    #[test]
    fn composition_matches_direct_evaluation() {
        // Taylor polynomial of sin(x) * y about (0.3, 1.2) in two variables
        let base = JetScalar::variables(&[0.3, 1.2], 3).unwrap();
        let poly = base[0].sin() * &base[1];
        // substitute jets of three variables
        let w = JetScalar::variables(&[0.2, 0.1, -0.4], 3).unwrap();
        let x = &w[0] * &w[1] + 0.3 - 0.02;
        let y = w[2].exp() * 1.2 / (-0.4f64).exp();
        let composed = poly.compose(&[x.clone(), y.clone()]).unwrap();
        let direct = x.sin() * &y;
        for (a, b) in composed.coeffs().iter().zip(direct.coeffs()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-13);
        }
    }
}
