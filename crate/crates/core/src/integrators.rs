//! One-step discretizations written as
//!
//! ```text
//! (x_{n+1} - x_n) / dt = Ψ_dt(g, x_n, x_{n+1}, t_n)
//! ```
//!
//! For training, both endpoints are data, so Ψ is evaluated explicitly with
//! no root finding. For simulation, [`step`] solves the implicit schemes by
//! damped fixed-point iteration.
//!
//! Mono-implicit schemes are stored in MIRK form: stage `i` is evaluated at
//!
//! ```text
//! Y_i = (1 - v_i) x_n + v_i x_{n+1} + dt Σ_j X_ij K_j,   K_i = g(Y_i, t_n + c_i dt)
//! ```
//!
//! and `Ψ = Σ_i b_i K_i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::dynamics::{Dynamics, StateVector, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Midpoint,
    Rk4,
    Srk4,
    Srk6,
    Prk4,
}

/// A property that holds only for separable systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Yes,
    No,
    IfSeparable,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Yes => "yes",
            Property::No => "no",
            Property::IfSeparable => "yes/no",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchemeInfo {
    pub name: &'static str,
    pub order: u32,
    pub g_evals: u32,
    pub explicit: Property,
    pub mono_implicit: Property,
    pub symmetric: bool,
    pub symplectic: Property,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Euler,
        Scheme::Midpoint,
        Scheme::Rk4,
        Scheme::Srk4,
        Scheme::Srk6,
        Scheme::Prk4,
    ];

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn info(self) -> SchemeInfo {
        use Property::*;
        let (name, order, g_evals, explicit, mono_implicit, symmetric, symplectic) = match self {
            Scheme::Euler => ("euler", 1, 1, Yes, Yes, false, No),
            Scheme::Midpoint => ("midpoint", 2, 1, No, Yes, true, Yes),
            Scheme::Rk4 => ("rk4", 4, 4, Yes, Yes, false, No),
            Scheme::Srk4 => ("srk4", 4, 4, No, Yes, true, No),
            Scheme::Srk6 => ("srk6", 6, 5, No, Yes, true, No),
            Scheme::Prk4 => ("prk4", 4, 7, IfSeparable, IfSeparable, true, IfSeparable),
        };
        SchemeInfo {
            name,
            order,
            g_evals,
            explicit,
            mono_implicit,
            symmetric,
            symplectic,
        }
    }

    /// Whether this build can evaluate the scheme.
    pub fn available(self) -> bool {
        self != Scheme::Srk6 || cfg!(feature = "srk6")
    }

    /// Ψ does not depend on `x_{n+1}`.
    pub fn is_explicit(self) -> bool {
        matches!(self, Scheme::Euler | Scheme::Rk4 | Scheme::Prk4)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| Error::Unknown {
                what: "integrator",
                name: s.to_string(),
            })
    }
}

/// Runge–Kutta coefficients `(A, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Largest deviation between row sums of `A` and the abscissae.
    pub fn row_sum_defect(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.c)
            .map(|(row, c)| (row.iter().sum::<f64>() - c).abs())
            .fold(0.0, f64::max)
    }
}

/// The fourth-order symmetric scheme as a four-stage tableau.
pub fn srk4_tableau() -> ButcherTableau {
    let s3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
    ButcherTableau {
        a: vec![
            vec![0.25, 0.0, -s3 / 6.0, 0.25],
            vec![0.25 - s3 / 12.0, 0.0, 0.0, 0.25 - s3 / 12.0],
            vec![0.25 + s3 / 12.0, 0.0, 0.0, 0.25 + s3 / 12.0],
            vec![0.25, s3 / 6.0, 0.0, 0.25],
        ],
        b: vec![0.5, 0.0, 0.0, 0.5],
        c: vec![c1, c1, c2, c2],
    }
}

/// Mono-implicit coefficients; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mirk {
    pub v: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    order: Vec<usize>,
}

impl Mirk {
    /// Validates shapes and finds an evaluation order in which every stage
    /// only references stages computed before it.
    pub fn new(v: Vec<f64>, x: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if v.len() != s || c.len() != s || x.len() != s || x.iter().any(|r| r.len() != s) {
            return Err(Error::Config("MIRK coefficient shapes disagree".into()));
        }
        let mut order = Vec::with_capacity(s);
        let mut done = vec![false; s];
        while order.len() < s {
            let next = (0..s).find(|&i| !done[i] && (0..s).all(|j| x[i][j] == 0.0 || done[j]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => return Err(Error::Config("MIRK stages are not explicitly ordered".into())),
            }
        }
        Ok(Self { v, x, b, c, order })
    }

    /// Rewrites a tableau whose rows restricted to the support of `b` are
    /// multiples of `b`.
    pub fn from_tableau(t: &ButcherTableau) -> Result<Self> {
        let j0 = t
            .b
            .iter()
            .position(|&bj| bj != 0.0)
            .ok_or_else(|| Error::Config("tableau has zero weights".into()))?;
        let mut v = Vec::with_capacity(t.stages());
        let mut x = Vec::with_capacity(t.stages());
        for row in &t.a {
            let vi = row[j0] / t.b[j0];
            let xi: Vec<f64> = row.iter().zip(&t.b).map(|(a, b)| a - vi * b).collect();
            let xi = xi.into_iter().map(|e| if e.abs() < 1e-15 { 0.0 } else { e }).collect();
            v.push(vi);
            x.push(xi);
        }
        Mirk::new(v, x, t.b.clone(), t.c.clone())
    }

    /// `A = v bᵀ + X`.
    pub fn to_tableau(&self) -> ButcherTableau {
        let a = self
            .x
            .iter()
            .zip(&self.v)
            .map(|(row, vi)| row.iter().zip(&self.b).map(|(x, b)| x + vi * b).collect())
            .collect();
        ButcherTableau {
            a,
            b: self.b.clone(),
            c: self.c.clone(),
        }
    }

    pub fn psi<S: Real, G>(&self, g: &G, x_n: &[S], x_np1: &[S], t: f64, dt: f64) -> Vec<S>
    where
        G: Fn(&[S], f64) -> Vec<S>,
    {
        let s = self.b.len();
        let mut k: Vec<Option<Vec<S>>> = vec![None; s];
        for &i in &self.order {
            let vi = self.v[i];
            let mut y: Vec<S> = x_n
                .iter()
                .zip(x_np1)
                .map(|(&a, &b)| {
                    if vi == 0.0 {
                        a
                    } else if vi == 1.0 {
                        b
                    } else {
                        a * (1.0 - vi) + b * vi
                    }
                })
                .collect();
            for (j, &xij) in self.x[i].iter().enumerate() {
                if xij != 0.0 {
                    let kj = k[j].as_ref().expect("stage order");
                    y.iter_mut().zip(kj).for_each(|(yy, &kk)| *yy = *yy + kk * (dt * xij));
                }
            }
            k[i] = Some(g(&y, t + self.c[i] * dt));
        }
        weighted_sum(&self.b, &k)
    }
}

fn weighted_sum<S: Real>(w: &[f64], k: &[Option<Vec<S>>]) -> Vec<S> {
    let mut out: Option<Vec<S>> = None;
    for (&wi, ki) in w.iter().zip(k) {
        if wi == 0.0 {
            continue;
        }
        let ki = ki.as_ref().expect("weighted stage evaluated");
        out = Some(match out {
            None => ki.iter().map(|&v| v * wi).collect(),
            Some(acc) => acc.into_iter().zip(ki).map(|(a, &v)| a + v * wi).collect(),
        });
    }
    out.unwrap_or_default()
}

/// Sixth-order symmetric five-stage scheme in MIRK form.
pub fn srk6_mirk() -> Mirk {
    let mut x = vec![vec![0.0; 5]; 5];
    x[2][0] = 9.0 / 64.0;
    x[2][1] = -3.0 / 64.0;
    x[3][0] = 3.0 / 64.0;
    x[3][1] = -9.0 / 64.0;
    x[4][0] = -5.0 / 24.0;
    x[4][1] = 5.0 / 24.0;
    x[4][2] = 2.0 / 3.0;
    x[4][3] = -2.0 / 3.0;
    Mirk::new(
        vec![0.0, 1.0, 5.0 / 32.0, 27.0 / 32.0, 0.5],
        x,
        vec![7.0 / 90.0, 7.0 / 90.0, 16.0 / 45.0, 16.0 / 45.0, 2.0 / 15.0],
        vec![0.0, 1.0, 0.25, 0.75, 0.5],
    )
    .expect("srk6 coefficients are ordered")
}

fn axpy<S: Real>(x: &[S], a: f64, y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(&xi, &yi)| xi + yi * a).collect()
}

fn lerp<S: Real>(a: f64, x: &[S], b: f64, y: &[S]) -> Vec<S> {
    x.iter().zip(y).map(|(&xi, &yi)| xi * a + yi * b).collect()
}

/// Ψ for every scheme except `prk4`, which needs a known partition; see
/// [`psi_partitioned`].
pub fn psi<S: Real, G>(scheme: Scheme, g: &G, x_n: &[S], x_np1: &[S], t: f64, dt: f64) -> Result<Vec<S>>
where
    G: Fn(&[S], f64) -> Vec<S>,
{
    psi_partitioned(scheme, g, None, x_n, x_np1, t, dt)
}

/// Ψ with an optional separable split `n`: `g(x)[..n]` depends on
/// `x[n..]` only and `g(x)[n..]` on `x[..n]` only.
pub fn psi_partitioned<S: Real, G>(
    scheme: Scheme,
    g: &G,
    split: Option<usize>,
    x_n: &[S],
    x_np1: &[S],
    t: f64,
    dt: f64,
) -> Result<Vec<S>>
where
    G: Fn(&[S], f64) -> Vec<S>,
{
    if x_n.len() != x_np1.len() {
        return Err(Error::Dimension {
            expected: x_n.len(),
            got: x_np1.len(),
        });
    }
    Ok(match scheme {
        Scheme::Euler => g(x_n, t),
        Scheme::Midpoint => g(&lerp(0.5, x_n, 0.5, x_np1), t + 0.5 * dt),
        Scheme::Rk4 => {
            let k1 = g(x_n, t);
            let k2 = g(&axpy(x_n, 0.5 * dt, &k1), t + 0.5 * dt);
            let k3 = g(&axpy(x_n, 0.5 * dt, &k2), t + 0.5 * dt);
            let k4 = g(&axpy(x_n, dt, &k3), t + dt);
            (0..x_n.len())
                .map(|i| (k1[i] + k4[i] + (k2[i] + k3[i]) * 2.0) * (1.0 / 6.0))
                .collect()
        }
        Scheme::Srk4 => srk4_psi(g, x_n, x_np1, t, dt),
        Scheme::Srk6 => {
            if !Scheme::Srk6.available() {
                return Err(Error::Unavailable("srk6"));
            }
            srk6_mirk().psi(g, x_n, x_np1, t, dt)
        }
        Scheme::Prk4 => {
            let n = split.ok_or(Error::NonSeparable("prk4"))?;
            if dt == 0.0 {
                return Ok(g(x_n, t));
            }
            let (q, p) = x_n.split_at(n);
            let (q1, p1) = yoshida(g, n, q.to_vec(), p.to_vec(), t, dt);
            q1.iter()
                .chain(&p1)
                .zip(x_n)
                .map(|(&a, &b)| (a - b) * (1.0 / dt))
                .collect()
        }
    })
}

/// The fourth-order symmetric scheme written out directly, including time
/// dependence of `g`.
fn srk4_psi<S: Real, G>(g: &G, x_n: &[S], x_np1: &[S], t: f64, dt: f64) -> Vec<S>
where
    G: Fn(&[S], f64) -> Vec<S>,
{
    let s3 = 3f64.sqrt() / 6.0;
    let (c1, c2) = (0.5 - s3, 0.5 + s3);
    let inner1 = g(&lerp(c1, x_n, c2, x_np1), t + c2 * dt);
    let inner2 = g(&lerp(c2, x_n, c1, x_np1), t + c1 * dt);
    let mid = lerp(0.5, x_n, 0.5, x_np1);
    let o1 = g(&axpy(&mid, -s3 * dt, &inner1), t + c1 * dt);
    let o2 = g(&axpy(&mid, s3 * dt, &inner2), t + c2 * dt);
    o1.into_iter().zip(o2).map(|(a, b)| (a + b) * 0.5).collect()
}

/// Scheme residual `x_{n+1} - x_n - dt Ψ`.
pub fn scheme_residual<G>(scheme: Scheme, g: &G, x_n: &[f64], x_np1: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    let p = psi(scheme, g, x_n, x_np1, t, dt)?;
    Ok((0..x_n.len()).map(|i| x_np1[i] - x_n[i] - dt * p[i]).collect())
}

/// Triple-jump weights `(w1, w0)` with `2 w1 + w0 = 1`.
pub fn yoshida_weights() -> (f64, f64) {
    let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
    (w1, 1.0 - 2.0 * w1)
}

fn yoshida<S: Real, G>(g: &G, n: usize, mut q: Vec<S>, mut p: Vec<S>, t: f64, dt: f64) -> (Vec<S>, Vec<S>)
where
    G: Fn(&[S], f64) -> Vec<S>,
{
    let (w1, w0) = yoshida_weights();
    let eval = |q: &[S], p: &[S]| {
        let x: Vec<S> = q.iter().chain(p).copied().collect();
        g(&x, t)
    };
    // Kick-drift-kick leapfrog substeps with weights w1, w0, w1; adjacent
    // half-kicks are merged.
    let kicks = [w1 / 2.0, (w1 + w0) / 2.0, (w0 + w1) / 2.0, w1 / 2.0];
    let drifts = [w1, w0, w1];
    for s in 0..4 {
        let f = eval(&q, &p);
        p.iter_mut()
            .zip(&f[n..])
            .for_each(|(pi, &fi)| *pi = *pi + fi * (kicks[s] * dt));
        if s < 3 {
            let f = eval(&q, &p);
            q.iter_mut()
                .zip(&f[..n])
                .for_each(|(qi, &fi)| *qi = *qi + fi * (drifts[s] * dt));
        }
    }
    (q, p)
}

/// One explicit step of the triple-jump composition for `q̇ = dq(p)`,
/// `ṗ = dp(q)`.
pub fn prk4_step<Q, P>(dq: Q, dp: P, q_n: &[f64], p_n: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>)
where
    Q: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = q_n.len();
    let g = |x: &[f64], _t: f64| {
        let mut out = dq(&x[n..]);
        out.extend(dp(&x[..n]));
        out
    };
    yoshida(&g, n, q_n.to_vec(), p_n.to_vec(), 0.0, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub x_next: StateVector,
    pub converged: bool,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Advances one step. Explicit schemes are evaluated in closed form;
/// implicit ones solve `x = x_n + dt Ψ(x_n, x)` by fixed-point iteration,
/// halving the relaxation factor whenever the residual grows.
pub fn step<G>(scheme: Scheme, g: &G, x_n: &[f64], t: f64, dt: f64, tol: f64, max_iter: usize) -> Result<StepResult>
where
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    step_partitioned(scheme, g, None, x_n, t, dt, tol, max_iter)
}

#[allow(clippy::too_many_arguments)]
pub fn step_partitioned<G>(
    scheme: Scheme,
    g: &G,
    split: Option<usize>,
    x_n: &[f64],
    t: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<StepResult>
where
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let update = |x: &[f64]| -> Result<Vec<f64>> {
        let p = psi_partitioned(scheme, g, split, x_n, x, t, dt)?;
        Ok(x_n.iter().zip(&p).map(|(a, b)| a + dt * b).collect())
    };
    if scheme.is_explicit() {
        return Ok(StepResult {
            x_next: update(x_n)?,
            converged: true,
            iterations: 1,
        });
    }
    let f0 = g(x_n, t);
    let mut x: Vec<f64> = x_n.iter().zip(&f0).map(|(a, b)| a + dt * b).collect();
    let mut best = (f64::INFINITY, x.clone());
    let mut omega = 1.0;
    let mut prev = f64::INFINITY;
    for it in 1..=max_iter {
        let fx = update(&x)?;
        let diff: Vec<f64> = fx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let res = inf_norm(&diff);
        if !res.is_finite() {
            break;
        }
        if res < best.0 {
            best = (res, fx.clone());
        }
        if res <= tol {
            return Ok(StepResult {
                x_next: fx,
                converged: true,
                iterations: it,
            });
        }
        if res > prev {
            omega *= 0.5;
        }
        prev = res;
        x.iter_mut().zip(&diff).for_each(|(xi, di)| *xi += omega * di);
    }
    Ok(StepResult {
        x_next: best.1,
        converged: false,
        iterations: max_iter,
    })
}

/// Classic RK4 with `substeps` internal steps per output interval.
pub fn reference_simulate<D: Dynamics + ?Sized>(
    system: &D,
    x0: &[f64],
    t_end: f64,
    dt_out: f64,
    substeps: usize,
) -> Result<Trajectory> {
    if substeps == 0 || !(dt_out > 0.0) || t_end < 0.0 {
        return Err(Error::Config(format!(
            "reference simulation needs substeps >= 1 and dt_out > 0 (got {substeps}, {dt_out})"
        )));
    }
    if x0.len() != system.dim() {
        return Err(Error::Dimension {
            expected: system.dim(),
            got: x0.len(),
        });
    }
    let n_out = (t_end / dt_out).round() as usize;
    let h = dt_out / substeps as f64;
    let mut times = Vec::with_capacity(n_out + 1);
    let mut states = Vec::with_capacity(n_out + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    let g = |y: &[f64], t: f64| system.eval(y, t);
    for i in 0..n_out {
        let t0 = i as f64 * dt_out;
        for s in 0..substeps {
            let t = t0 + s as f64 * h;
            let d = psi(Scheme::Rk4, &g, &x, &x, t, h)?;
            x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += h * di);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { trajectory: 0, time: t + h });
            }
        }
        times.push((i + 1) as f64 * dt_out);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        dt: dt_out,
    })
}

/// An ODE with a closed-form solution, for measuring global error.
#[derive(Clone)]
pub struct TestProblem {
    pub name: &'static str,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub split: Option<usize>,
    pub rhs: fn(&[f64], f64) -> Vec<f64>,
    pub exact: fn(f64) -> Vec<f64>,
}

impl TestProblem {
    /// `ẋ = x`, `x(0) = 1`.
    pub fn exponential() -> Self {
        Self {
            name: "exponential",
            x0: vec![1.0],
            t_end: 1.0,
            split: None,
            rhs: |x, _| vec![x[0]],
            exact: |t| vec![t.exp()],
        }
    }

    /// Harmonic oscillator `q̇ = p`, `ṗ = -q` from `(1, 0)`.
    pub fn oscillator() -> Self {
        Self {
            name: "oscillator",
            x0: vec![1.0, 0.0],
            t_end: 2.0,
            split: Some(1),
            rhs: |x, _| vec![x[1], -x[0]],
            exact: |t| vec![t.cos(), -t.sin()],
        }
    }

    /// Nonlinear and time-dependent: `ẋ = t x²`, `x(0) = 1`, exact
    /// `2 / (2 - t²)`.
    pub fn riccati() -> Self {
        Self {
            name: "riccati",
            x0: vec![1.0],
            t_end: 1.0,
            split: None,
            rhs: |x, t| vec![t * x[0] * x[0]],
            exact: |t| vec![2.0 / (2.0 - t * t)],
        }
    }

    /// Global error at `t_end` after stepping with `dt`.
    pub fn global_error(&self, scheme: Scheme, dt: f64) -> Result<f64> {
        let n = (self.t_end / dt).round() as usize;
        let mut x = self.x0.clone();
        for i in 0..n {
            let r = step_partitioned(scheme, &self.rhs, self.split, &x, i as f64 * dt, dt, 1e-14, 200)?;
            x = r.x_next;
        }
        let exact = (self.exact)(n as f64 * dt);
        Ok(inf_norm(&x.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>()))
    }
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn convergence_order(scheme: Scheme, problem: &TestProblem, dt_list: &[f64]) -> Result<f64> {
    if dt_list.len() < 3 || dt_list.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Config("convergence fit needs at least three positive step sizes".into()));
    }
    let mut pts = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let e = problem.global_error(scheme, dt)?;
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::Config(format!("degenerate global error {e} at dt = {dt}")));
        }
        pts.push((dt.ln(), e.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(Error::Config("step sizes must differ".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
