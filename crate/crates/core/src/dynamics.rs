//! Benchmark systems with known pseudo-Hamiltonian decompositions, and
//! seeded generation of (noisy) trajectory data.
//!
//! Every benchmark has a hand-written right-hand side that is independent of
//! its `(S, r, H, F)` decomposition; tests check the two against each other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::reference_simulate;

pub type StateVector = Vec<f64>;

/// Anything that can be integrated forward in time.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64>;
}

impl<F> Dynamics for (usize, F)
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.1)(x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    #[serde(alias = "henon-heiles")]
    HenonHeiles,
    Nls,
    #[serde(alias = "mass-spring")]
    MassSpring,
    Tanks,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::HenonHeiles,
        Benchmark::Nls,
        Benchmark::MassSpring,
        Benchmark::Tanks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::HenonHeiles => "henon_heiles",
            Benchmark::Nls => "nls",
            Benchmark::MassSpring => "mass_spring",
            Benchmark::Tanks => "tanks",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == norm)
            .ok_or_else(|| Error::Unknown {
                what: "benchmark",
                name: s.to_string(),
            })
    }
}

/// One overridable system constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
    List(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

pub type SystemParams = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakMode {
    /// `-rate * min(cap, max(mu, 0))`.
    Clamp,
    /// `-rate * min(cap, max(mu, cap))`, which is the constant `-rate * cap`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassSpring {
    pub k: f64,
    pub m: f64,
    pub alpha: f64,
    pub omega: f64,
    pub c: f64,
}

/// Tanks joined by pipes. State is `(phi_1..phi_M, mu_1..mu_N)`: scaled
/// pipe flows, then tank volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TankNetwork {
    /// `(from, to)` tank indices per pipe, zero-based.
    pub pipes: Vec<(usize, usize)>,
    pub n_tanks: usize,
    pub j: Vec<f64>,
    pub area: Vec<f64>,
    pub rho: f64,
    pub g: f64,
    pub r_p: Vec<f64>,
    pub leak_mode: LeakMode,
    /// Zero-based tank index.
    pub leak_tank: usize,
    pub leak_rate: f64,
    pub leak_cap: f64,
}

impl TankNetwork {
    pub fn n_pipes(&self) -> usize {
        self.pipes.len()
    }

    /// Pipes-by-tanks incidence: `-1` where a pipe leaves a tank, `+1` where
    /// it enters.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.n_pipes(), self.n_tanks);
        for (i, &(a, b)) in self.pipes.iter().enumerate() {
            e[(i, a)] -= 1.0;
            e[(i, b)] += 1.0;
        }
        e
    }

    pub fn leak(&self, mu: f64) -> f64 {
        let floor = match self.leak_mode {
            LeakMode::Clamp => 0.0,
            LeakMode::Literal => self.leak_cap,
        };
        -self.leak_rate * self.leak_cap.min(mu.max(floor))
    }

    fn pressure(&self, mu: &[f64], j: usize) -> f64 {
        self.g * self.rho / self.area[j] * mu[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    HenonHeiles,
    Nls,
    MassSpring(MassSpring),
    Tanks(TankNetwork),
}

/// A benchmark ODE with its ground-truth decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    pub benchmark: Benchmark,
    /// Parameters as supplied, echoed into dataset metadata.
    pub params: SystemParams,
    kind: Kind,
}

struct ParamReader<'a> {
    params: &'a SystemParams,
}

impl ParamReader<'_> {
    fn invalid(name: &str, reason: impl Into<String>) -> Error {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    fn scalar(&self, name: &str, default: f64) -> Result<f64> {
        match self.params.get(name) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(Self::invalid(name, format!("expected a finite number, got {other:?}"))),
        }
    }

    fn vector(&self, name: &str, len: usize, default: f64) -> Result<Vec<f64>> {
        match self.params.get(name) {
            None => Ok(vec![default; len]),
            Some(ParamValue::Number(v)) => Ok(vec![*v; len]),
            Some(ParamValue::List(v)) if v.len() == len => Ok(v.clone()),
            Some(ParamValue::List(v)) => Err(Self::invalid(
                name,
                format!("expected {len} entries, got {}", v.len()),
            )),
            Some(other) => Err(Self::invalid(name, format!("expected a list, got {other:?}"))),
        }
    }

    fn text(&self, name: &str, default: &str) -> Result<String> {
        match self.params.get(name) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(s)) => Ok(s.clone()),
            Some(other) => Err(Self::invalid(name, format!("expected text, got {other:?}"))),
        }
    }

    fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Self::invalid(k, "not a parameter of this benchmark")),
            None => Ok(()),
        }
    }
}

fn as_index(name: &str, v: f64, upper: usize) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > upper as f64 {
        return Err(ParamReader::invalid(name, format!("tank index {v} outside 1..={upper}")));
    }
    Ok(v as usize - 1)
}

/// Default pipe layout: a cycle through all four tanks plus a chord 1→3.
pub const DEFAULT_PIPES: [(usize, usize); 5] = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)];
pub const DEFAULT_PIPE_FRICTION: [f64; 5] = [0.03, 0.03, 0.09, 0.05, 0.05];

pub fn make_benchmark(name: &str, params: &SystemParams) -> Result<OdeSystem> {
    let benchmark: Benchmark = name.parse()?;
    let reader = ParamReader { params };
    let kind = match benchmark {
        Benchmark::HenonHeiles | Benchmark::Nls => {
            reader.reject_unknown(&[])?;
            if benchmark == Benchmark::Nls {
                Kind::Nls
            } else {
                Kind::HenonHeiles
            }
        }
        Benchmark::MassSpring => {
            reader.reject_unknown(&["k", "m", "alpha", "omega", "c"])?;
            let ms = MassSpring {
                k: reader.scalar("k", 1.0)?,
                m: reader.scalar("m", 1.0)?,
                alpha: reader.scalar("alpha", 2.0)?,
                omega: reader.scalar("omega", 0.5)?,
                c: reader.scalar("c", 0.3)?,
            };
            if ms.m <= 0.0 {
                return Err(ParamReader::invalid("m", "mass must be positive"));
            }
            Kind::MassSpring(ms)
        }
        Benchmark::Tanks => {
            reader.reject_unknown(&[
                "pipes", "n_tanks", "j", "area", "rho", "g", "r_p", "leak", "leak_tank", "leak_rate", "leak_cap",
            ])?;
            let n_tanks = reader.scalar("n_tanks", 4.0)?;
            if n_tanks.fract() != 0.0 || n_tanks < 1.0 {
                return Err(ParamReader::invalid("n_tanks", "must be a positive integer"));
            }
            let n_tanks = n_tanks as usize;
            let pipes = match params.get("pipes") {
                None => DEFAULT_PIPES.to_vec(),
                Some(ParamValue::Rows(rows)) => rows
                    .iter()
                    .map(|r| match r.as_slice() {
                        [a, b] => Ok((as_index("pipes", *a, n_tanks)?, as_index("pipes", *b, n_tanks)?)),
                        _ => Err(ParamReader::invalid("pipes", "each pipe is a [from, to] pair")),
                    })
                    .collect::<Result<Vec<_>>>()?,
                Some(other) => {
                    return Err(ParamReader::invalid("pipes", format!("expected [[from, to], ...], got {other:?}")))
                }
            };
            if pipes.iter().any(|(a, b)| a == b) {
                return Err(ParamReader::invalid("pipes", "a pipe must join two different tanks"));
            }
            let m = pipes.len();
            let r_p = match params.get("r_p") {
                None if m == DEFAULT_PIPE_FRICTION.len() => DEFAULT_PIPE_FRICTION.to_vec(),
                None => vec![0.05; m],
                Some(_) => reader.vector("r_p", m, 0.0)?,
            };
            let leak_mode = match reader.text("leak", "clamp")?.as_str() {
                "clamp" => LeakMode::Clamp,
                "literal" => LeakMode::Literal,
                other => {
                    return Err(Error::Unknown {
                        what: "leak mode",
                        name: other.to_string(),
                    })
                }
            };
            let net = TankNetwork {
                pipes,
                n_tanks,
                j: reader.vector("j", m, 0.02)?,
                area: reader.vector("area", n_tanks, 1.0)?,
                rho: reader.scalar("rho", 1.0)?,
                g: reader.scalar("g", 9.81)?,
                r_p,
                leak_mode,
                leak_tank: as_index("leak_tank", reader.scalar("leak_tank", 4.0)?, n_tanks)?,
                leak_rate: reader.scalar("leak_rate", 10.0)?,
                leak_cap: reader.scalar("leak_cap", 0.3)?,
            };
            if net.j.iter().chain(&net.area).any(|&v| v <= 0.0) {
                return Err(ParamReader::invalid("j/area", "must be positive"));
            }
            Kind::Tanks(net)
        }
    };
    Ok(OdeSystem {
        benchmark,
        params: params.clone(),
        kind,
    })
}

/// Canonical `[[0, I], [-I, 0]]` structure of size `2n`.
pub fn canonical_structure(n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = 1.0;
        s[(n + i, i)] = -1.0;
    }
    s
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::HenonHeiles | Kind::Nls => 4,
            Kind::MassSpring(_) => 2,
            Kind::Tanks(t) => t.n_pipes() + t.n_tanks,
        }
    }

    pub fn tanks(&self) -> Option<&TankNetwork> {
        match &self.kind {
            Kind::Tanks(t) => Some(t),
            _ => None,
        }
    }

    pub fn mass_spring(&self) -> Option<&MassSpring> {
        match &self.kind {
            Kind::MassSpring(m) => Some(m),
            _ => None,
        }
    }

    pub fn var_names(&self) -> Vec<String> {
        match &self.kind {
            Kind::HenonHeiles | Kind::Nls => ["q1", "q2", "p1", "p2"].map(String::from).to_vec(),
            Kind::MassSpring(_) => vec!["q".into(), "p".into()],
            Kind::Tanks(_) => (1..=self.dim()).map(|i| format!("x{i}")).collect(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_rhs(&self, x: &[f64], t: f64) -> Result<StateVector> {
        self.check_dim(x)?;
        Ok(self.rhs(x, t))
    }

    /// `g(x, t)`. Panics on a length mismatch; see [`OdeSystem::eval_rhs`].
    pub fn rhs(&self, x: &[f64], t: f64) -> StateVector {
        assert_eq!(x.len(), self.dim(), "state length");
        match &self.kind {
            Kind::HenonHeiles => {
                let [q1, q2, p1, p2] = [x[0], x[1], x[2], x[3]];
                vec![p1, p2, -q1 - 2.0 * q1 * q2, -q2 - q1 * q1 + q2 * q2]
            }
            Kind::Nls => {
                let g = nls_gradient(x);
                vec![g[2], g[3], -g[0], -g[1]]
            }
            Kind::MassSpring(ms) => {
                let (q, p) = (x[0], x[1]);
                vec![p / ms.m, -ms.k * q - ms.c * p / ms.m + ms.alpha * (ms.omega * t).sin()]
            }
            Kind::Tanks(net) => {
                let m = net.n_pipes();
                let (phi, mu) = x.split_at(m);
                let mut out = vec![0.0; x.len()];
                for (i, &(a, b)) in net.pipes.iter().enumerate() {
                    let flow = phi[i] / net.j[i];
                    out[i] = net.pressure(mu, a) - net.pressure(mu, b) - net.r_p[i] * flow;
                    out[m + a] -= flow;
                    out[m + b] += flow;
                }
                out[m + net.leak_tank] += net.leak(mu[net.leak_tank]);
                out
            }
        }
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::HenonHeiles => {
                let [q1, q2, p1, p2] = [x[0], x[1], x[2], x[3]];
                0.5 * (q1 * q1 + q2 * q2 + p1 * p1 + p2 * p2) + q1 * q1 * q2 - q2.powi(3) / 3.0
            }
            Kind::Nls => {
                let [q1, q2, p1, p2] = [x[0], x[1], x[2], x[3]];
                let (a, b) = (q1 * q1 + p1 * p1, q2 * q2 + p2 * p2);
                0.25 * a * a + 0.25 * b * b - q1 * q1 * q2 * q2 - p1 * p1 * p2 * p2
                    + q1 * q1 * p2 * p2
                    + q2 * q2 * p1 * p1
                    - 4.0 * q1 * q2 * p1 * p2
            }
            Kind::MassSpring(ms) => 0.5 * ms.k * x[0] * x[0] + x[1] * x[1] / (2.0 * ms.m),
            Kind::Tanks(net) => {
                let m = net.n_pipes();
                let flows: f64 = (0..m).map(|i| x[i] * x[i] / (2.0 * net.j[i])).sum();
                let heads: f64 = (0..net.n_tanks)
                    .map(|j| net.g * net.rho / (2.0 * net.area[j]) * x[m + j] * x[m + j])
                    .sum();
                flows + heads
            }
        }
    }

    pub fn grad_hamiltonian(&self, x: &[f64]) -> StateVector {
        match &self.kind {
            Kind::HenonHeiles => {
                let [q1, q2, p1, p2] = [x[0], x[1], x[2], x[3]];
                vec![q1 + 2.0 * q1 * q2, q2 + q1 * q1 - q2 * q2, p1, p2]
            }
            Kind::Nls => nls_gradient(x).to_vec(),
            Kind::MassSpring(ms) => vec![ms.k * x[0], x[1] / ms.m],
            Kind::Tanks(net) => {
                let m = net.n_pipes();
                (0..self.dim())
                    .map(|i| {
                        if i < m {
                            x[i] / net.j[i]
                        } else {
                            net.pressure(&x[m..], i - m)
                        }
                    })
                    .collect()
            }
        }
    }

    /// The antisymmetric structure matrix `S`.
    pub fn structure(&self) -> DMatrix<f64> {
        match &self.kind {
            Kind::HenonHeiles | Kind::Nls => canonical_structure(2),
            Kind::MassSpring(_) => canonical_structure(1),
            Kind::Tanks(net) => {
                let (m, n) = (net.n_pipes(), net.n_tanks);
                let e = net.incidence();
                let mut s = DMatrix::zeros(m + n, m + n);
                s.view_mut((0, m), (m, n)).copy_from(&(-&e));
                s.view_mut((m, 0), (n, m)).copy_from(&e.transpose());
                s
            }
        }
    }

    /// Diagonal of the true dissipation matrix.
    pub fn damping(&self) -> StateVector {
        let mut r = vec![0.0; self.dim()];
        match &self.kind {
            Kind::MassSpring(ms) => r[1] = ms.c,
            Kind::Tanks(net) => r[..net.n_pipes()].copy_from_slice(&net.r_p),
            _ => {}
        }
        r
    }

    /// Components that may carry damping in a model of this system.
    pub fn damping_support(&self) -> Vec<bool> {
        let mut s = vec![false; self.dim()];
        match &self.kind {
            Kind::MassSpring(_) => s[1] = true,
            Kind::Tanks(net) => s[..net.n_pipes()].iter_mut().for_each(|v| *v = true),
            _ => {}
        }
        s
    }

    pub fn force(&self, x: &[f64], t: f64) -> StateVector {
        let mut f = vec![0.0; self.dim()];
        match &self.kind {
            Kind::MassSpring(ms) => f[1] = ms.alpha * (ms.omega * t).sin(),
            Kind::Tanks(net) => {
                let k = net.n_pipes() + net.leak_tank;
                f[k] = net.leak(x[k]);
            }
            _ => {}
        }
        f
    }

    /// Components the external force acts on.
    pub fn force_components(&self) -> Vec<usize> {
        match &self.kind {
            Kind::MassSpring(_) => vec![1],
            Kind::Tanks(net) => vec![net.n_pipes() + net.leak_tank],
            _ => Vec::new(),
        }
    }

    /// Split index `n` when `H = T(x[n..]) + V(x[..n])` with canonical `S`
    /// and no damping or forcing.
    pub fn separable_split(&self) -> Option<usize> {
        match self.kind {
            Kind::HenonHeiles => Some(2),
            _ => None,
        }
    }

    /// Nonzero monomial coefficients of the true Hamiltonian as
    /// `(exponents, coefficient)` pairs.
    pub fn true_hamiltonian_terms(&self) -> Vec<(Vec<u32>, f64)> {
        match &self.kind {
            Kind::HenonHeiles => vec![
                (vec![2, 0, 0, 0], 0.5),
                (vec![0, 2, 0, 0], 0.5),
                (vec![0, 0, 2, 0], 0.5),
                (vec![0, 0, 0, 2], 0.5),
                (vec![2, 1, 0, 0], 1.0),
                (vec![0, 3, 0, 0], -1.0 / 3.0),
            ],
            Kind::Nls => vec![
                (vec![4, 0, 0, 0], 0.25),
                (vec![0, 4, 0, 0], 0.25),
                (vec![0, 0, 4, 0], 0.25),
                (vec![0, 0, 0, 4], 0.25),
                (vec![2, 0, 2, 0], 0.5),
                (vec![0, 2, 0, 2], 0.5),
                (vec![2, 2, 0, 0], -1.0),
                (vec![0, 0, 2, 2], -1.0),
                (vec![2, 0, 0, 2], 1.0),
                (vec![0, 2, 2, 0], 1.0),
                (vec![1, 1, 1, 1], -4.0),
            ],
            Kind::MassSpring(ms) => vec![(vec![2, 0], 0.5 * ms.k), (vec![0, 2], 0.5 / ms.m)],
            Kind::Tanks(net) => {
                let d = self.dim();
                let m = net.n_pipes();
                (0..d)
                    .map(|i| {
                        let mut e = vec![0; d];
                        e[i] = 2;
                        let c = if i < m {
                            1.0 / (2.0 * net.j[i])
                        } else {
                            net.g * net.rho / (2.0 * net.area[i - m])
                        };
                        (e, c)
                    })
                    .collect()
            }
        }
    }
}

impl Dynamics for OdeSystem {
    fn dim(&self) -> usize {
        OdeSystem::dim(self)
    }
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.rhs(x, t)
    }
}

fn nls_gradient(x: &[f64]) -> [f64; 4] {
    let [q1, q2, p1, p2] = [x[0], x[1], x[2], x[3]];
    let (a, b) = (q1 * q1 + p1 * p1, q2 * q2 + p2 * p2);
    [
        a * q1 - 2.0 * q1 * q2 * q2 + 2.0 * q1 * p2 * p2 - 4.0 * q2 * p1 * p2,
        b * q2 - 2.0 * q1 * q1 * q2 + 2.0 * q2 * p1 * p1 - 4.0 * q1 * p1 * p2,
        a * p1 - 2.0 * p1 * p2 * p2 + 2.0 * q2 * q2 * p1 - 4.0 * q1 * q2 * p2,
        b * p2 - 2.0 * p1 * p1 * p2 + 2.0 * q1 * q1 * p2 - 4.0 * q1 * q2 * p1,
    ]
}

/// Uniformly sampled states of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.times.len() {
            return Err(Error::Dimension {
                expected: self.times.len(),
                got: self.states.len(),
            });
        }
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - self.dt).abs() > 1e-12 * self.dt.abs().max(1.0) * 10.0 {
                return Err(Error::Parse {
                    what: "trajectory",
                    reason: format!("non-uniform spacing {} vs dt {}", w[1] - w[0], self.dt),
                });
            }
        }
        Ok(())
    }
}

/// One training sample `(x_n, x_{n+1}, t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub x0: StateVector,
    pub x1: StateVector,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: Benchmark,
    pub params: SystemParams,
    pub trajectories: Vec<Trajectory>,
    pub clean: Option<Vec<Trajectory>>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.trajectories.first().and_then(|t| t.states.first()).map_or(0, Vec::len)
    }

    pub fn n_points(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Consecutive-point pairs of every trajectory, trajectory-major.
    pub fn pairs(&self) -> Vec<Pair> {
        self.trajectories
            .iter()
            .flat_map(|tr| {
                tr.states.windows(2).zip(&tr.times).map(|(w, &t)| Pair {
                    x0: w[0].clone(),
                    x1: w[1].clone(),
                    t,
                })
            })
            .collect()
    }
}

/// Sampling budget for [`generate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub n_traj: usize,
    pub t_end: f64,
    pub dt: f64,
    pub init_low: f64,
    pub init_high: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Internal RK4 steps per output interval.
    pub substeps: usize,
    /// When set, initial states are redrawn until the true energy is below
    /// this level and the trajectory stays finite.
    pub max_energy: Option<f64>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            n_traj: 10,
            t_end: 1.0,
            dt: 0.1,
            init_low: -1.0,
            init_high: 1.0,
            sigma: 0.0,
            seed: 0,
            substeps: 100,
            max_energy: None,
        }
    }
}

/// Child generator for item `index` of a seeded family.
pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn uniform_state(rng: &mut impl Rng, d: usize, low: f64, high: f64) -> StateVector {
    (0..d).map(|_| rng.random_range(low..high)).collect()
}

pub fn generate_dataset(system: &OdeSystem, spec: &DataSpec) -> Result<Dataset> {
    if !(spec.dt > 0.0) || spec.n_traj == 0 || !(spec.init_low < spec.init_high) || spec.t_end < 0.0 {
        return Err(Error::Config(format!(
            "invalid data spec: n_traj={}, dt={}, init=({}, {}), t_end={}",
            spec.n_traj, spec.dt, spec.init_low, spec.init_high, spec.t_end
        )));
    }
    if !(spec.sigma >= 0.0) {
        return Err(Error::Config(format!("noise sigma must be nonnegative, got {}", spec.sigma)));
    }
    let noise = Normal::new(0.0, spec.sigma).expect("nonnegative sigma");
    let d = system.dim();
    let mut clean = Vec::with_capacity(spec.n_traj);
    let mut noisy = Vec::with_capacity(spec.n_traj);
    for k in 0..spec.n_traj {
        let mut rng = child_rng(spec.seed, k as u64);
        let mut draws = 0;
        let tr = loop {
            draws += 1;
            let x0 = uniform_state(&mut rng, d, spec.init_low, spec.init_high);
            let Some(level) = spec.max_energy else {
                break reference_simulate(system, &x0, spec.t_end, spec.dt, spec.substeps).map_err(|e| match e {
                    Error::BlowUp { time, .. } => Error::BlowUp { trajectory: k, time },
                    other => other,
                })?;
            };
            if draws > 100_000 {
                return Err(Error::Config(format!("no initial state below energy {level} found")));
            }
            if !(system.hamiltonian(&x0) < level) {
                continue;
            }
            match reference_simulate(system, &x0, spec.t_end, spec.dt, spec.substeps) {
                Ok(tr) => break tr,
                Err(Error::BlowUp { .. }) => continue,
                Err(e) => return Err(e),
            }
        };
        let mut n = tr.clone();
        if spec.sigma > 0.0 {
            for s in &mut n.states {
                s.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
        }
        clean.push(tr);
        noisy.push(n);
    }
    Ok(Dataset {
        system: system.benchmark,
        params: system.params.clone(),
        trajectories: noisy,
        clean: Some(clean),
        noise_sigma: spec.sigma,
        seed: spec.seed,
        dt: spec.dt,
    })
}

/// Standard deviation of the noise on the midpoint `(x_n + x_{n+1}) / 2`
/// when both endpoints carry independent noise of std `sigma`.
pub fn two_point_noise_std(sigma: f64) -> f64 {
    sigma / std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sys(name: &str) -> OdeSystem {
        make_benchmark(name, &SystemParams::new()).unwrap()
    }

    fn probe(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        uniform_state(rng, d, -2.0, 2.0)
    }

    #[test]
    fn henon_heiles_energy_values() {
        let hh = sys("henon_heiles");
        assert_eq!(hh.hamiltonian(&[0.0; 4]), 0.0);
        assert_eq!(hh.hamiltonian(&[1.0, 0.0, 0.0, 0.0]), 0.5);
        assert_eq!(hh.rhs(&[0.0; 4], 0.0), vec![0.0; 4]);
    }

    #[test]
    fn tank_hamiltonian_coefficients() {
        let tanks = sys("tanks");
        let terms = tanks.true_hamiltonian_terms();
        assert_eq!(terms.len(), 9);
        for (e, c) in &terms[..5] {
            assert_eq!(e.iter().sum::<u32>(), 2);
            assert!((c - 25.0).abs() < 1e-12);
        }
        for (_, c) in &terms[5..] {
            assert!((c - 4.905).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_spring_rhs_examples() {
        let ms = sys("mass-spring");
        assert_eq!(ms.eval_rhs(&[1.0, 0.0], 0.0).unwrap(), vec![0.0, -1.0]);
        let v = ms.eval_rhs(&[0.0, 0.0], PI).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn arity_and_name_errors() {
        assert!(matches!(
            make_benchmark("duffing", &SystemParams::new()),
            Err(Error::Unknown { .. })
        ));
        let mut p = SystemParams::new();
        p.insert("r_p".into(), ParamValue::List(vec![0.1; 4]));
        assert!(matches!(make_benchmark("tanks", &p), Err(Error::InvalidParam { .. })));
        let mut p = SystemParams::new();
        p.insert("kk".into(), ParamValue::Number(1.0));
        assert!(matches!(make_benchmark("mass_spring", &p), Err(Error::InvalidParam { .. })));
        assert!(matches!(
            sys("henon_heiles").eval_rhs(&[0.0; 3], 0.0),
            Err(Error::Dimension { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn structure_matrices_are_antisymmetric() {
        for b in Benchmark::ALL {
            let s = sys(b.name()).structure();
            assert_eq!(s.transpose(), -&s, "{b}");
        }
    }

    #[test]
    fn hamiltonian_gradients_match_finite_differences() {
        let mut rng = child_rng(7, 0);
        for b in Benchmark::ALL {
            let s = sys(b.name());
            for _ in 0..20 {
                let x = probe(&mut rng, s.dim());
                let g = s.grad_hamiltonian(&x);
                let fd = crate::autodiff::central_difference(&x, 1e-6, |y| s.hamiltonian(y));
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn rhs_matches_decomposition() {
        let mut rng = child_rng(11, 0);
        for b in Benchmark::ALL {
            let s = sys(b.name());
            let st = s.structure();
            let r = s.damping();
            for _ in 0..1000 {
                let x = probe(&mut rng, s.dim());
                let t = rng.random_range(0.0..20.0);
                let gh = nalgebra::DVector::from_vec(s.grad_hamiltonian(&x));
                let mut v = &st * &gh;
                let f = s.force(&x, t);
                for i in 0..s.dim() {
                    v[i] += -r[i] * gh[i] + f[i];
                }
                let g = s.rhs(&x, t);
                for i in 0..s.dim() {
                    assert!((v[i] - g[i]).abs() < 1e-10, "{b} component {i}: {} vs {}", v[i], g[i]);
                }
            }
        }
    }

    #[test]
    fn true_terms_reproduce_hamiltonian() {
        let mut rng = child_rng(3, 0);
        for b in Benchmark::ALL {
            let s = sys(b.name());
            for _ in 0..50 {
                let x = probe(&mut rng, s.dim());
                let h: f64 = s
                    .true_hamiltonian_terms()
                    .iter()
                    .map(|(e, c)| c * e.iter().zip(&x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
                    .sum();
                assert!((h - s.hamiltonian(&x)).abs() < 1e-10 * h.abs().max(1.0));
            }
        }
    }

    #[test]
    fn leak_modes() {
        let tanks = sys("tanks");
        let net = tanks.tanks().unwrap();
        assert_eq!(net.leak(-1.0), 0.0);
        assert!((net.leak(0.1) + 1.0).abs() < 1e-15);
        assert!((net.leak(2.0) + 3.0).abs() < 1e-15);
        let mut p = SystemParams::new();
        p.insert("leak".into(), ParamValue::Text("literal".into()));
        let lit = make_benchmark("tanks", &p).unwrap();
        for mu in [-1.0, 0.0, 0.1, 5.0] {
            assert!((lit.tanks().unwrap().leak(mu) + 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dataset_shapes_and_determinism() {
        let ms = sys("mass_spring");
        let spec = DataSpec {
            n_traj: 3,
            t_end: 10.0,
            dt: 0.1,
            sigma: 0.2,
            seed: 5,
            ..DataSpec::default()
        };
        let a = generate_dataset(&ms, &spec).unwrap();
        let b = generate_dataset(&ms, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectories.len(), 3);
        assert!(a.trajectories.iter().all(|t| t.len() == 101));
        a.trajectories.iter().for_each(|t| t.validate().unwrap());
        assert_ne!(a.trajectories, *a.clean.as_ref().unwrap());
        let clean = generate_dataset(&ms, &DataSpec { sigma: 0.0, ..spec }).unwrap();
        assert_eq!(clean.trajectories, *clean.clean.as_ref().unwrap());
        assert_eq!(clean.pairs().len(), 300);
    }

    #[test]
    fn noise_averaging_helper() {
        assert_eq!(two_point_noise_std(0.0), 0.0);
        assert!((two_point_noise_std(0.2) - 0.141_421_356_237_309_5).abs() < 1e-15);
        assert!((two_point_noise_std(1.0) - 0.707_106_781_186_547_5).abs() < 1e-15);
    }
}
