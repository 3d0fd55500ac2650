//! Candidate-term libraries: multivariate monomials plus trigonometric
//! terms in time with trainable amplitude and frequency.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigShape {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    /// Product of input variables raised to the given exponents.
    Monomial(Vec<u32>),
    /// `amplitude * shape(frequency * t)`.
    Trig(TrigShape),
}

impl Term {
    pub fn n_params(&self) -> usize {
        match self {
            Term::Monomial(_) => 1,
            Term::Trig(_) => 2,
        }
    }

    pub fn degree(&self) -> u32 {
        match self {
            Term::Monomial(e) => e.iter().sum(),
            Term::Trig(_) => 0,
        }
    }
}

/// Trigonometric slots of a library spec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrigSpec {
    pub sin: bool,
    pub cos: bool,
}

/// Declarative library description used in experiment configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibrarySpec {
    pub degree: u32,
    pub constant: bool,
    pub trig: TrigSpec,
    /// State components the library output acts on (forces and baselines).
    pub components: Vec<usize>,
    /// Polynomial terms are in `t` rather than in the state.
    pub time_only: bool,
}

impl Default for LibrarySpec {
    fn default() -> Self {
        Self {
            degree: 3,
            constant: false,
            trig: TrigSpec::default(),
            components: Vec::new(),
            time_only: false,
        }
    }
}

/// Ordered set of candidate terms over `dim` input variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisLibrary {
    pub dim: usize,
    pub degree: u32,
    pub includes_constant: bool,
    pub terms: Vec<Term>,
    pub var_names: Vec<String>,
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree 1..=n in `d` variables, the Hamiltonian
/// search space without a constant term.
pub fn library_size(d: usize, n: usize) -> usize {
    binomial((d + n) as u64, n as u64) as usize - 1
}

/// Size of the search space when each of the `d` right-hand-side components
/// is learned directly from a degree `n - 1` library with constant term.
pub fn bsi_library_size(d: usize, n: usize) -> usize {
    d * binomial((d + n - 1) as u64, (n - 1) as u64) as usize
}

/// Exponent vectors of total degree exactly `k`, graded-lex order (higher
/// power of earlier variables first).
fn exponents_of_degree(d: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == d - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(d, pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    rec(d, 0, k, &mut vec![0; d], &mut out);
    out
}

pub fn build_polynomial_library(d: usize, degree: u32, include_constant: bool) -> BasisLibrary {
    assert!(d >= 1, "library needs at least one variable");
    let start = if include_constant { 0 } else { 1 };
    let terms = (start..=degree)
        .flat_map(|k| exponents_of_degree(d, k))
        .map(Term::Monomial)
        .collect();
    BasisLibrary {
        dim: d,
        degree,
        includes_constant: include_constant,
        terms,
        var_names: (1..=d).map(|i| format!("x{i}")).collect(),
    }
}

impl BasisLibrary {
    /// Builds the library a spec describes over `dim` input variables.
    pub fn from_spec(spec: &LibrarySpec, dim: usize) -> Self {
        let mut lib = if spec.degree == 0 && !spec.constant {
            BasisLibrary {
                dim,
                degree: 0,
                includes_constant: false,
                terms: Vec::new(),
                var_names: (1..=dim).map(|i| format!("x{i}")).collect(),
            }
        } else {
            build_polynomial_library(dim, spec.degree, spec.constant)
        };
        lib = lib.with_trig(spec.trig.sin, spec.trig.cos);
        lib
    }

    pub fn with_trig(mut self, sin: bool, cos: bool) -> Self {
        if sin {
            self.terms.push(Term::Trig(TrigShape::Sin));
        }
        if cos {
            self.terms.push(Term::Trig(TrigShape::Cos));
        }
        self
    }

    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        assert_eq!(names.len(), self.dim, "one name per library variable");
        self.var_names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    /// Drops monomials mixing variables from both halves `[0, split)` and
    /// `[split, dim)`, leaving a library of the form `T(p) + V(q)`.
    pub fn retain_separable(mut self, split: usize) -> Self {
        self.terms.retain(|t| match t {
            Term::Monomial(e) => {
                let left = e[..split].iter().any(|&x| x > 0);
                let right = e[split..].iter().any(|&x| x > 0);
                !(left && right)
            }
            Term::Trig(_) => true,
        });
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.terms.iter().map(Term::n_params).sum()
    }

    /// Offset of each term's first parameter in the coefficient vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.terms
            .iter()
            .map(|t| {
                let o = off;
                off += t.n_params();
                o
            })
            .collect()
    }

    pub fn is_separable(&self, split: usize) -> bool {
        self.terms.iter().all(|t| match t {
            Term::Monomial(e) => !(e[..split].iter().any(|&x| x > 0) && e[split..].iter().any(|&x| x > 0)),
            Term::Trig(_) => true,
        })
    }

    pub fn has_trig(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Trig(_)))
    }

    fn check(&self, coeffs: usize, x: usize) -> Result<()> {
        if coeffs != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                got: coeffs,
            });
        }
        if x != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x,
            });
        }
        Ok(())
    }

    /// `powers[i][k] = x_i^k` for `k <= degree`; `None` stands for `x^0`.
    fn power_table<S: Real>(&self, x: &[S]) -> Vec<Vec<S>> {
        x.iter()
            .map(|&xi| {
                let mut row = Vec::with_capacity(self.degree as usize + 1);
                row.push(S::cst(1.0));
                for k in 1..=self.degree as usize {
                    let prev = row[k - 1];
                    row.push(if k == 1 { xi } else { prev * xi });
                }
                row
            })
            .collect()
    }

    /// Linear combination `sum_k coeff_k * term_k(x, t)`.
    pub fn eval<S: Real>(&self, coeffs: &[S], x: &[S], t: f64) -> Result<S> {
        self.check(coeffs.len(), x.len())?;
        let powers = self.power_table(x);
        let mut acc: Option<S> = None;
        let mut off = 0;
        for term in &self.terms {
            let c = coeffs[off];
            off += term.n_params();
            if c.is_const_zero() {
                continue;
            }
            let v = match term {
                Term::Monomial(e) => {
                    let mut v = c;
                    for (i, &ei) in e.iter().enumerate() {
                        if ei > 0 {
                            v = v * powers[i][ei as usize];
                        }
                    }
                    v
                }
                Term::Trig(shape) => trig_value(*shape, c, coeffs[off - 1], t),
            };
            acc = Some(match acc {
                Some(a) => a + v,
                None => v,
            });
        }
        Ok(acc.unwrap_or_else(S::zero))
    }

    /// Gradient of [`BasisLibrary::eval`] with respect to `x`. Trig terms
    /// depend on `t` only and contribute nothing.
    pub fn gradient<S: Real>(&self, coeffs: &[S], x: &[S]) -> Result<Vec<S>> {
        self.check(coeffs.len(), x.len())?;
        let powers = self.power_table(x);
        let mut out: Vec<Option<S>> = vec![None; self.dim];
        let mut off = 0;
        for term in &self.terms {
            let c = coeffs[off];
            off += term.n_params();
            let Term::Monomial(e) = term else { continue };
            if c.is_const_zero() {
                continue;
            }
            for (j, &ej) in e.iter().enumerate() {
                if ej == 0 {
                    continue;
                }
                let mut v = c * ej as f64;
                for (i, &ei) in e.iter().enumerate() {
                    let p = if i == j { ei - 1 } else { ei };
                    if p > 0 {
                        v = v * powers[i][p as usize];
                    }
                }
                out[j] = Some(match out[j] {
                    Some(a) => a + v,
                    None => v,
                });
            }
        }
        Ok(out.into_iter().map(|o| o.unwrap_or_else(S::zero)).collect())
    }

    /// Value of every term with unit coefficient. Trig terms use the
    /// frequency currently stored in `params`.
    pub fn feature_row(&self, params: &[f64], x: &[f64], t: f64) -> Vec<f64> {
        let offsets = self.param_offsets();
        self.terms
            .iter()
            .zip(offsets)
            .map(|(term, off)| match term {
                Term::Monomial(e) => e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product(),
                Term::Trig(shape) => trig_value(*shape, 1.0, params[off + 1], t),
            })
            .collect()
    }

    /// Human-readable rendering of one term with its parameters, e.g.
    /// `0.5·x1^2` or `2·sin(0.5·t)`.
    pub fn term_to_string(&self, index: usize, params: &[f64]) -> String {
        let mut s = String::new();
        match &self.terms[index] {
            Term::Monomial(e) => {
                s.push_str(&fmt_coeff(params[0]));
                for (name, &ei) in self.var_names.iter().zip(e) {
                    match ei {
                        0 => {}
                        1 => write!(s, "·{name}").unwrap(),
                        _ => write!(s, "·{name}^{ei}").unwrap(),
                    }
                }
            }
            Term::Trig(shape) => {
                let f = match shape {
                    TrigShape::Sin => "sin",
                    TrigShape::Cos => "cos",
                };
                write!(s, "{}·{f}({}·t)", fmt_coeff(params[0]), fmt_coeff(params[1])).unwrap();
            }
        }
        s
    }

    /// Name of the term without its coefficient, e.g. `x1^2·x2`, `1`, or
    /// `sin(w·t)`.
    pub fn term_label(&self, index: usize) -> String {
        match &self.terms[index] {
            Term::Monomial(e) => {
                let parts: Vec<String> = self
                    .var_names
                    .iter()
                    .zip(e)
                    .filter(|(_, &ei)| ei > 0)
                    .map(|(n, &ei)| if ei == 1 { n.clone() } else { format!("{n}^{ei}") })
                    .collect();
                if parts.is_empty() {
                    "1".to_string()
                } else {
                    parts.join("·")
                }
            }
            Term::Trig(TrigShape::Sin) => "sin(w·t)".to_string(),
            Term::Trig(TrigShape::Cos) => "cos(w·t)".to_string(),
        }
    }

    /// Index of the monomial with exactly these exponents.
    pub fn find_monomial(&self, exps: &[u32]) -> Option<usize> {
        self.terms
            .iter()
            .position(|t| matches!(t, Term::Monomial(e) if e == exps))
    }
}

fn trig_value<S: Real>(shape: TrigShape, amp: S, freq: S, t: f64) -> S {
    let arg = freq * t;
    match shape {
        TrigShape::Sin => amp * arg.sin(),
        TrigShape::Cos => amp * arg.cos(),
    }
}

/// Compact decimal rendering: four decimals, trailing zeros trimmed.
pub fn fmt_coeff(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

pub fn eval_library<S: Real>(lib: &BasisLibrary, coeffs: &[S], x: &[S], t: f64) -> Result<S> {
    lib.eval(coeffs, x, t)
}

pub fn eval_library_gradient<S: Real>(lib: &BasisLibrary, coeffs: &[S], x: &[S]) -> Result<Vec<S>> {
    lib.gradient(coeffs, x)
}
