//! Tape-based reverse-mode differentiation of scalar losses.
//!
//! Model code is written once, generically over [`Real`], and runs either on
//! plain `f64` (simulation, evaluation) or on [`Var`] (training). A `Var`
//! records every operation on a [`Tape`] together with its local partial
//! derivatives, so the reverse sweep is a single pass over the node list in
//! creation order.
//!
//! Parameters never become tape nodes. A parameter variable refers directly
//! to its slot in the flat parameter vector, and its adjoint is accumulated
//! into the gradient vector during the reverse sweep. Constants are not
//! recorded at all.
//!
//! ```
//! use phsysid::autodiff::{grad, Real};
//!
//! let (value, g) = grad(&[3.0], |_, p| p[0] * p[0]).unwrap();
//! assert_eq!(value, 9.0);
//! assert_eq!(g[0], 6.0);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Deref, DerefMut, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Scalar type the models and integrators are generic over.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Whether values of this type carry derivative information. Custom
    /// operations use it to skip Jacobian work on the plain `f64` path.
    const TRACKS_GRADIENTS: bool;

    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn powi(self, n: u32) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// `max(x, 0)`; the subgradient at 0 is 0.
    fn relu(self) -> Self;
    /// `|x|`; the subgradient at 0 is 0.
    fn abs(self) -> Self;
    /// Ties select `self`.
    fn min(self, other: Self) -> Self;
    /// Ties select `self`.
    fn max(self, other: Self) -> Self;

    /// Records an opaque operation with a precomputed value and local
    /// partials with respect to `inputs`. Parameter sensitivities are
    /// deferred to `rule`, which is invoked once with the output adjoint
    /// during the reverse sweep. `anchor` supplies the tape when every input
    /// is a constant.
    fn custom(
        anchor: Self,
        inputs: &[Self],
        value: f64,
        input_partials: &[f64],
        rule: Option<Box<dyn ParamVjp>>,
    ) -> Self;

    /// True only for an untracked exact zero, which callers may skip.
    fn is_const_zero(self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }
}

/// Vector-Jacobian product of a custom operation with respect to a block of
/// parameters.
pub trait ParamVjp {
    /// Adds `adjoint * d(output)/d(theta)` into `grad`, which is the full
    /// flat gradient vector.
    fn accumulate(&self, adjoint: f64, grad: &mut [f64]);
}

impl Real for f64 {
    const TRACKS_GRADIENTS: bool = false;

    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn is_const_zero(self) -> bool {
        self == 0.0
    }
    fn powi(self, n: u32) -> Self {
        f64::powi(self, n as i32)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
    fn custom(
        _anchor: Self,
        _inputs: &[Self],
        value: f64,
        _input_partials: &[f64],
        _rule: Option<Box<dyn ParamVjp>>,
    ) -> Self {
        value
    }
}

/// Operation kinds recorded on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Neg,
    Scale,
    Pow,
    Sin,
    Cos,
    Relu,
    Abs,
    Min,
    Max,
    Custom,
}

const CONST: u32 = u32::MAX;
const PARAM_BIT: u32 = 1 << 31;

#[derive(Debug, Clone, Copy)]
enum Node {
    Unary { a: u32, da: f64 },
    Binary { a: u32, b: u32, da: f64, db: f64 },
    Custom(u32),
}

struct CustomNode {
    inputs: Vec<u32>,
    partials: Vec<f64>,
    rule: Option<Box<dyn ParamVjp>>,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    kinds: Vec<OpKind>,
    customs: Vec<CustomNode>,
    first_non_finite: Option<usize>,
}

/// Append-only record of a computation. Node indices are topologically
/// ordered by construction.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A variable bound to slot `slot` of the flat parameter vector.
    pub fn param(&self, slot: usize, value: f64) -> Var<'_> {
        assert!((slot as u32) < PARAM_BIT, "parameter slot out of range");
        Var {
            tape: Some(self),
            idx: PARAM_BIT | slot as u32,
            val: value,
        }
    }

    /// One parameter variable per entry of `values`, slots `0..len`.
    pub fn params(&self, values: &[f64]) -> Vec<Var<'_>> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.param(i, v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node, kind: OpKind, val: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        assert!((idx as u32) < PARAM_BIT, "tape exhausted");
        if !val.is_finite() && inner.first_non_finite.is_none() {
            inner.first_non_finite = Some(idx);
        }
        inner.nodes.push(node);
        inner.kinds.push(kind);
        Var {
            tape: Some(self),
            idx: idx as u32,
            val,
        }
    }

    /// Reverse sweep from `output`, returning the gradient with respect to
    /// parameter slots `0..n_params`.
    pub fn gradient(&self, output: Var<'_>, n_params: usize) -> Result<Vec<f64>> {
        let inner = self.inner.borrow();
        if let Some(node) = inner.first_non_finite {
            return Err(Error::NonFinite {
                context: format!("autodiff primal pass ({:?})", inner.kinds[node]),
                index: node,
            });
        }
        let mut grad = vec![0.0; n_params];
        let mut adj = vec![0.0; inner.nodes.len()];
        match output.idx {
            CONST => return Ok(grad),
            i if i & PARAM_BIT != 0 => {
                grad[(i & !PARAM_BIT) as usize] += 1.0;
                return Ok(grad);
            }
            i => adj[i as usize] = 1.0,
        }

        fn send(adj: &mut [f64], grad: &mut [f64], target: u32, amount: f64) {
            if target & PARAM_BIT != 0 {
                grad[(target & !PARAM_BIT) as usize] += amount;
            } else {
                adj[target as usize] += amount;
            }
        }

        for i in (0..=output.idx as usize).rev() {
            let w = adj[i];
            if w == 0.0 {
                continue;
            }
            match inner.nodes[i] {
                Node::Unary { a, da } => send(&mut adj, &mut grad, a, w * da),
                Node::Binary { a, b, da, db } => {
                    send(&mut adj, &mut grad, a, w * da);
                    send(&mut adj, &mut grad, b, w * db);
                }
                Node::Custom(c) => {
                    let node = &inner.customs[c as usize];
                    for (&input, &p) in node.inputs.iter().zip(&node.partials) {
                        send(&mut adj, &mut grad, input, w * p);
                    }
                    if let Some(rule) = &node.rule {
                        rule.accumulate(w, &mut grad);
                    }
                }
            }
        }
        Ok(grad)
    }
}

/// A scalar recorded on a [`Tape`], a parameter reference, or a constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.idx {
            CONST => write!(f, "Var(const {})", self.val),
            i if i & PARAM_BIT != 0 => write!(f, "Var(param {} = {})", i & !PARAM_BIT, self.val),
            i => write!(f, "Var(#{} = {})", i, self.val),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(v: f64) -> Self {
        Var {
            tape: None,
            idx: CONST,
            val: v,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.idx == CONST
    }

    fn unary(self, kind: OpKind, val: f64, da: f64) -> Self {
        match self.tape {
            Some(tape) if self.idx != CONST => tape.push(Node::Unary { a: self.idx, da }, kind, val),
            _ => Var::constant(val),
        }
    }

    fn binary(self, other: Self, kind: OpKind, val: f64, da: f64, db: f64) -> Self {
        match (self.idx == CONST, other.idx == CONST) {
            (true, true) => Var::constant(val),
            (false, true) => self.unary(kind, val, da),
            (true, false) => other.unary(kind, val, db),
            (false, false) => {
                let tape = self.tape.or(other.tape).expect("tracked variable without tape");
                tape.push(
                    Node::Binary {
                        a: self.idx,
                        b: other.idx,
                        da,
                        db,
                    },
                    kind,
                    val,
                )
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if rhs.is_const_zero() {
            return self;
        }
        if self.is_const_zero() {
            return rhs;
        }
        self.binary(rhs, OpKind::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, OpKind::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, OpKind::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(OpKind::Neg, -self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return self;
        }
        self.unary(OpKind::Add, self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return self;
        }
        self.unary(OpKind::Sub, self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        if rhs == 1.0 {
            return self;
        }
        self.unary(OpKind::Scale, self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(OpKind::Scale, self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    const TRACKS_GRADIENTS: bool = true;

    fn cst(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(self) -> f64 {
        self.val
    }

    fn is_const_zero(self) -> bool {
        self.idx == CONST && self.val == 0.0
    }

    fn powi(self, n: u32) -> Self {
        match n {
            0 => Var::constant(1.0),
            1 => self,
            _ => {
                let lower = self.val.powi(n as i32 - 1);
                self.unary(OpKind::Pow, lower * self.val, n as f64 * lower)
            }
        }
    }

    fn sin(self) -> Self {
        self.unary(OpKind::Sin, self.val.sin(), self.val.cos())
    }

    fn cos(self) -> Self {
        self.unary(OpKind::Cos, self.val.cos(), -self.val.sin())
    }

    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.unary(OpKind::Relu, self.val, 1.0)
        } else {
            self.unary(OpKind::Relu, 0.0, 0.0)
        }
    }

    fn abs(self) -> Self {
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(OpKind::Abs, self.val.abs(), d)
    }

    fn min(self, other: Self) -> Self {
        if other.val < self.val {
            self.binary(other, OpKind::Min, other.val, 0.0, 1.0)
        } else {
            self.binary(other, OpKind::Min, self.val, 1.0, 0.0)
        }
    }

    fn max(self, other: Self) -> Self {
        if other.val > self.val {
            self.binary(other, OpKind::Max, other.val, 0.0, 1.0)
        } else {
            self.binary(other, OpKind::Max, self.val, 1.0, 0.0)
        }
    }

    fn custom(
        anchor: Self,
        inputs: &[Self],
        value: f64,
        input_partials: &[f64],
        rule: Option<Box<dyn ParamVjp>>,
    ) -> Self {
        assert_eq!(inputs.len(), input_partials.len(), "custom op arity mismatch");
        let tape = inputs
            .iter()
            .chain(std::iter::once(&anchor))
            .find_map(|v| v.tape);
        let Some(tape) = tape else {
            return Var::constant(value);
        };
        let mut ins = Vec::with_capacity(inputs.len());
        let mut partials = Vec::with_capacity(inputs.len());
        for (v, &p) in inputs.iter().zip(input_partials) {
            if v.idx != CONST && p != 0.0 {
                ins.push(v.idx);
                partials.push(p);
            }
        }
        let c = {
            let mut inner = tape.inner.borrow_mut();
            inner.customs.push(CustomNode {
                inputs: ins,
                partials,
                rule,
            });
            (inner.customs.len() - 1) as u32
        };
        tape.push(Node::Custom(c), OpKind::Custom, value)
    }
}

/// Gradient aligned with a model's flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    /// Hard-zeroes every slot flagged in `mask`.
    pub fn apply_mask(&mut self, mask: &[bool]) {
        for (g, &m) in self.0.iter_mut().zip(mask) {
            if m {
                *g = 0.0;
            }
        }
    }
}

impl Deref for GradientVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for GradientVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

/// Evaluates `loss` on a fresh tape with `params` bound to slots
/// `0..params.len()` and returns the loss value with its exact gradient.
pub fn grad<F>(params: &[f64], loss: F) -> Result<(f64, GradientVector)>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars = tape.params(params);
    let out = loss(&tape, &vars);
    let g = tape.gradient(out, params.len())?;
    Ok((out.value(), GradientVector(g)))
}

/// Central-difference gradient of `f` at `params` with step `h`.
pub fn central_difference<F>(params: &[f64], h: f64, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + h;
            let up = f(&work);
            work[i] = orig - h;
            let down = f(&work);
            work[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative discrepancy between reverse-mode and central-difference
/// gradients. The loss is written once, generically, and evaluated on both
/// `Var` and `f64`. Relative error uses `max(|a|, |b|, 1e-8)` as the scale.
pub fn finite_diff_check<F>(params: &[f64], h: f64, loss: F) -> Result<f64>
where
    F: LossFn,
{
    let (_, reverse) = grad(params, |tape, p| loss.eval(tape_anchor(tape, p), p))?;
    let numeric = central_difference(params, h, |p| loss.eval(0.0, p));
    Ok(max_relative_error(&reverse, &numeric))
}

fn tape_anchor<'t>(tape: &'t Tape, p: &[Var<'t>]) -> Var<'t> {
    p.first().copied().unwrap_or_else(|| tape.param(0, 0.0))
}

/// A scalar loss that can be evaluated on any [`Real`]. The `anchor`
/// argument is a tracked value usable for [`Real::custom`].
pub trait LossFn {
    fn eval<S: Real>(&self, anchor: S, params: &[S]) -> S;
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_at_three() {
        let (v, g) = grad(&[3.0], |_, p| p[0] * p[0]).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g[0], 6.0);
    }

    #[test]
    fn powi_matches_product() {
        let (v, g) = grad(&[1.7], |_, p| p[0].powi(3)).unwrap();
        assert!((v - 1.7f64.powi(3)).abs() < 1e-15);
        assert!((g[0] - 3.0 * 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn sine_of_scaled_parameter() {
        let (_, g) = grad(&[0.5], |_, p| (p[0] * PI).sin()).unwrap();
        assert!(g[0].abs() < 1e-15, "pi * cos(pi/2) should vanish, got {}", g[0]);
    }

    #[test]
    fn relu_and_abs_subgradient_at_zero() {
        let (_, g) = grad(&[0.0, 0.0], |_, p| p[0].relu() + p[1].abs()).unwrap();
        assert_eq!(g.0, vec![0.0, 0.0]);
    }

    #[test]
    fn min_max_route_to_selected_branch_with_ties_to_first() {
        let (_, g) = grad(&[1.0, 2.0], |_, p| p[0].min(p[1]) + p[0].max(p[1]) * 3.0).unwrap();
        assert_eq!(g.0, vec![1.0, 3.0]);
        let (_, g) = grad(&[2.0, 2.0], |_, p| p[0].min(p[1]) + p[0].max(p[1]) * 3.0).unwrap();
        assert_eq!(g.0, vec![4.0, 0.0]);
    }

    #[test]
    fn constants_do_not_touch_tape() {
        let tape = Tape::new();
        let c = Var::constant(2.0) * Var::constant(3.0) + 1.0;
        assert!(c.is_constant());
        assert_eq!(c.value(), 7.0);
        assert!(tape.is_empty());
    }

    #[test]
    fn non_finite_primal_is_reported_with_node_index() {
        let err = grad(&[0.0], |_, p| (p[0] * 1.0e308 + 1.0) * 1.0e308 * 2.0).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gradient_of_batch_sum_is_sum_of_gradients() {
        let xs = [0.3, -1.2, 2.5];
        fn loss<'t>(p: &[Var<'t>], x: f64) -> Var<'t> {
            (p[0] * x + p[1]).sin() * p[1]
        }
        let params = [0.7, -0.4];
        let (_, total) = grad(&params, |_, p| {
            xs.iter().map(|&x| loss(p, x)).fold(Var::constant(0.0), |a, b| a + b)
        })
        .unwrap();
        let mut summed = vec![0.0; 2];
        for &x in &xs {
            let (_, g) = grad(&params, |_, p| loss(p, x)).unwrap();
            summed.iter_mut().zip(g.iter()).for_each(|(s, gi)| *s += gi);
        }
        for (a, b) in total.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    struct Rational;
    impl LossFn for Rational {
        fn eval<S: Real>(&self, _anchor: S, p: &[S]) -> S {
            (p[0] * p[1]).sin() * p[2].powi(2) + (p[0] - p[2]).cos() * p[1]
        }
    }

    #[test]
    fn finite_difference_agreement_on_smooth_loss() {
        let err = finite_diff_check(&[0.3, -0.8, 1.1], 1e-6, Rational).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    struct Quadratic;
    impl LossFn for Quadratic {
        fn eval<S: Real>(&self, _anchor: S, p: &[S]) -> S {
            p[0] * p[0] * 3.0 + p[0] * p[1] + p[1] * p[1] * 0.5 - p[1] * 2.0
        }
    }

    #[test]
    fn finite_difference_is_exact_for_quadratics() {
        let err = finite_diff_check(&[0.9, -1.3], 1e-3, Quadratic).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    struct Affine;
    impl ParamVjp for Affine {
        fn accumulate(&self, adjoint: f64, grad: &mut [f64]) {
            grad[1] += adjoint * 4.0;
        }
    }

    #[test]
    fn custom_op_scatters_to_inputs_and_params() {
        // y = 2 * p0 + 4 * p1 where p1's sensitivity is deferred to a rule.
        let (v, g) = grad(&[1.5, -0.5], |_, p| {
            let value = 2.0 * p[0].value() + 4.0 * p[1].value();
            let y = Var::custom(p[1], &[p[0]], value, &[2.0], Some(Box::new(Affine)));
            y * y
        })
        .unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g.0, vec![4.0, 8.0]);
    }

    #[test]
    fn masked_slots_are_zeroed() {
        let mut g = GradientVector(vec![1.0, 2.0, 3.0]);
        g.apply_mask(&[false, true, false]);
        assert_eq!(g.0, vec![1.0, 0.0, 3.0]);
    }
}
