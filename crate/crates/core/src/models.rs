//! Trainable right-hand-side models.
//!
//! [`PhsiModel`] is the structured model `(S − diag(r̂)) ∇Ĥ(x) + F̂(x, t)`
//! with a fixed antisymmetric `S`. [`BaselineModel`] learns every component
//! of `g` directly from a library, and is fitted either by the same
//! gradient training (BSI) or by sequential thresholded least squares
//! ([`sindy_fit`]).
//!
//! All parameters of a model live in one flat vector. Right-hand sides are
//! generic over [`Real`], so the same code serves simulation on `f64` and
//! training on tape variables.

use std::fmt;
use std::ops::Range;
use std::rc::Rc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamVjp, Real};
use crate::basis::{fmt_coeff, BasisLibrary, Term};
use crate::dynamics::{child_rng, Dataset, Dynamics};
use crate::error::{Error, Result};

/// Which penalty a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Hamiltonian,
    Damping,
    Force,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotKind {
    pub group: Group,
    /// Eligible for magnitude pruning.
    pub prunable: bool,
    /// Enters the L1 penalty of its group.
    pub penalized: bool,
    /// Masked whenever the referenced slot is masked (trig frequencies
    /// follow their amplitude).
    pub follows: Option<usize>,
}

/// Interface the training loop needs.
pub trait TrainableModel {
    fn dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// `true` marks a pruned slot.
    fn mask(&self) -> &[bool];
    fn mask_mut(&mut self) -> &mut [bool];
    fn slot_kinds(&self) -> Vec<SlotKind>;
    fn rhs<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Vec<S>;

    /// Per-sample force penalty for models whose force is not a coefficient
    /// vector.
    fn force_penalty<S: Real>(&self, _p: &[S], _x: &[S], _t: f64) -> Option<S> {
        None
    }

    /// Split for partitioned schemes when the model is separable.
    fn separable_split(&self) -> Option<usize> {
        None
    }

    fn active_terms(&self) -> usize {
        let kinds = self.slot_kinds();
        kinds
            .iter()
            .zip(self.mask())
            .filter(|(k, &m)| k.prunable && !m)
            .count()
    }
}

/// Initial parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub monomial: f64,
    pub trig_amplitude: f64,
    pub trig_frequency: f64,
    pub damping: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            monomial: 0.2,
            trig_amplitude: 1.0,
            trig_frequency: 1.0,
            damping: 0.2,
        }
    }
}

fn init_library(lib: &BasisLibrary, init: &InitSpec, out: &mut Vec<f64>) {
    for term in &lib.terms {
        match term {
            Term::Monomial(_) => out.push(init.monomial),
            Term::Trig(_) => {
                out.push(init.trig_amplitude);
                out.push(init.trig_frequency);
            }
        }
    }
}

fn library_kinds(lib: &BasisLibrary, group: Group, base: usize, out: &mut Vec<SlotKind>) {
    let mut slot = base;
    for term in &lib.terms {
        let kind = SlotKind {
            group,
            prunable: true,
            penalized: true,
            follows: None,
        };
        out.push(kind);
        if let Term::Trig(_) = term {
            out.push(SlotKind {
                prunable: false,
                penalized: false,
                follows: Some(slot),
                ..kind
            });
        }
        slot += term.n_params();
    }
}

/// Symbolic external force: one copy of `lib` per forced component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicForce {
    pub lib: BasisLibrary,
    pub components: Vec<usize>,
    /// The library's variable is `t` instead of the state.
    pub time_only: bool,
}

impl SymbolicForce {
    pub fn n_params(&self) -> usize {
        self.lib.n_params() * self.components.len()
    }

    fn eval<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Vec<S> {
        let np = self.lib.n_params();
        let tv = [S::cst(t)];
        let input = if self.time_only { &tv[..] } else { x };
        (0..self.components.len())
            .map(|k| self.lib.eval(&p[k * np..(k + 1) * np], input, t).expect("force library shape"))
            .collect()
    }
}

/// Fully connected ReLU network; the last layer is affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpForce {
    /// Layer widths from input to output.
    pub sizes: Vec<usize>,
    /// State components receiving the outputs.
    pub components: Vec<usize>,
}

impl MlpForce {
    pub fn new(input: usize, hidden: &[usize], components: Vec<usize>) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(components.len());
        Self { sizes, components }
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Uniform weights and biases in `±1/sqrt(fan_in)`.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = child_rng(seed, 0x4d4c50);
        let mut out = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                out.push(rng.random_range(-bound..bound));
            }
        }
        out
    }

    /// Layer inputs (the state, then each hidden activation) and the output.
    fn forward(&self, w: &[f64], x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let layers = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let wm = &w[off..off + n_in * n_out];
            let b = &w[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|i| b[i] + wm[i * n_in..(i + 1) * n_in].iter().zip(&h).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let next = if l + 1 < layers {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        (inputs, pre, h)
    }

    /// Network output; `anchor` ties the result to the tape when the input
    /// is constant.
    pub fn eval<S: Real>(&self, p: &[S], base: usize, x: &[S], anchor: S) -> Vec<S> {
        let w: Vec<f64> = p.iter().map(|v| v.value()).collect();
        let xv: Vec<f64> = x.iter().map(|v| v.value()).collect();
        let (inputs, pre, out) = self.forward(&w, &xv);
        if !S::TRACKS_GRADIENTS {
            return out.into_iter().map(S::cst).collect();
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let inputs = Rc::new(inputs);
        (0..out.len())
            .map(|o| {
                let mut deltas = vec![Vec::new(); layers];
                let mut delta = vec![0.0; self.sizes[layers]];
                delta[o] = 1.0;
                for l in (0..layers).rev() {
                    let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                    let wm = &w[offsets[l]..offsets[l] + n_in * n_out];
                    let mut back = vec![0.0; n_in];
                    for i in 0..n_out {
                        let di = delta[i];
                        if di != 0.0 {
                            back.iter_mut()
                                .zip(&wm[i * n_in..(i + 1) * n_in])
                                .for_each(|(b, &wij)| *b += di * wij);
                        }
                    }
                    if l > 0 {
                        back.iter_mut()
                            .zip(&pre[l - 1])
                            .for_each(|(b, &z)| *b = if z > 0.0 { *b } else { 0.0 });
                    }
                    deltas[l] = std::mem::replace(&mut delta, back);
                }
                let rule = MlpVjp {
                    base,
                    sizes: self.sizes.clone(),
                    offsets: offsets.clone(),
                    inputs: Rc::clone(&inputs),
                    deltas,
                };
                S::custom(anchor, x, out[o], &delta, Some(Box::new(rule)))
            })
            .collect()
    }
}

struct MlpVjp {
    base: usize,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    inputs: Rc<Vec<Vec<f64>>>,
    deltas: Vec<Vec<f64>>,
}

impl ParamVjp for MlpVjp {
    fn accumulate(&self, adjoint: f64, grad: &mut [f64]) {
        for (l, delta) in self.deltas.iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w0 = self.base + self.offsets[l];
            let h = &self.inputs[l];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let s = adjoint * d;
                grad[w0 + i * n_in..w0 + (i + 1) * n_in]
                    .iter_mut()
                    .zip(h)
                    .for_each(|(g, &hj)| *g += s * hj);
                grad[w0 + n_in * n_out + i] += s;
            }
        }
    }
}

/// Plain forward pass with an explicit weight vector.
pub fn mlp_forward(net: &MlpForce, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if params.len() != net.n_params() {
        return Err(Error::Dimension {
            expected: net.n_params(),
            got: params.len(),
        });
    }
    if x.len() != net.sizes[0] {
        return Err(Error::Dimension {
            expected: net.sizes[0],
            got: x.len(),
        });
    }
    Ok(net.forward(params, x).2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceModel {
    None,
    Symbolic(SymbolicForce),
    Mlp(MlpForce),
}

impl ForceModel {
    pub fn n_params(&self) -> usize {
        match self {
            ForceModel::None => 0,
            ForceModel::Symbolic(f) => f.n_params(),
            ForceModel::Mlp(m) => m.n_params(),
        }
    }

    pub fn components(&self) -> &[usize] {
        match self {
            ForceModel::None => &[],
            ForceModel::Symbolic(f) => &f.components,
            ForceModel::Mlp(m) => &m.components,
        }
    }
}

/// Slot ranges of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub hamiltonian: Range<usize>,
    pub damping: Range<usize>,
    pub force: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhsiModel {
    pub structure: Vec<Vec<f64>>,
    pub h_lib: BasisLibrary,
    /// State components carrying a trainable friction coefficient.
    pub damping_components: Vec<usize>,
    pub force: ForceModel,
    pub params: Vec<f64>,
    pub mask: Vec<bool>,
    #[serde(default)]
    pub split: Option<usize>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl PhsiModel {
    pub fn new(
        structure: &DMatrix<f64>,
        h_lib: BasisLibrary,
        damping_components: Vec<usize>,
        force: ForceModel,
        init: &InitSpec,
        seed: u64,
    ) -> Result<Self> {
        let d = structure.nrows();
        if structure.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: structure.ncols(),
            });
        }
        if (structure + structure.transpose()).abs().max() > 1e-14 {
            return Err(Error::InvalidParam {
                name: "structure".into(),
                reason: "S must be antisymmetric".into(),
            });
        }
        if h_lib.dim != d {
            return Err(Error::Dimension {
                expected: d,
                got: h_lib.dim,
            });
        }
        if let Some(&bad) = damping_components.iter().chain(force.components()).find(|&&c| c >= d) {
            return Err(Error::InvalidParam {
                name: "components".into(),
                reason: format!("component {bad} outside state of dimension {d}"),
            });
        }
        match &force {
            ForceModel::Symbolic(f) if f.lib.dim != if f.time_only { 1 } else { d } => {
                return Err(Error::InvalidParam {
                    name: "force".into(),
                    reason: "force library dimension does not match its input".into(),
                })
            }
            ForceModel::Mlp(m) if m.sizes[0] != d || *m.sizes.last().unwrap() != m.components.len() => {
                return Err(Error::InvalidParam {
                    name: "force".into(),
                    reason: "network widths do not match state and forced components".into(),
                })
            }
            _ => {}
        }
        let mut params = Vec::new();
        init_library(&h_lib, init, &mut params);
        params.extend(std::iter::repeat_n(init.damping, damping_components.len()));
        match &force {
            ForceModel::None => {}
            ForceModel::Symbolic(f) => {
                for _ in &f.components {
                    init_library(&f.lib, init, &mut params);
                }
            }
            ForceModel::Mlp(m) => params.extend(m.init_params(seed)),
        }
        let mask = vec![false; params.len()];
        Ok(Self {
            structure: matrix_rows(structure),
            h_lib,
            damping_components,
            force,
            params,
            mask,
            split: None,
        })
    }

    /// Declares the model separable at `split` for partitioned schemes.
    /// Fails if the Hamiltonian library mixes the two halves or the model
    /// has damping or forcing.
    pub fn with_split(mut self, split: usize) -> Result<Self> {
        if !self.h_lib.is_separable(split)
            || !self.damping_components.is_empty()
            || !matches!(self.force, ForceModel::None)
        {
            return Err(Error::NonSeparable("prk4"));
        }
        self.split = Some(split);
        Ok(self)
    }

    pub fn layout(&self) -> Layout {
        let h = self.h_lib.n_params();
        let r = h + self.damping_components.len();
        Layout {
            hamiltonian: 0..h,
            damping: h..r,
            force: r..r + self.force.n_params(),
        }
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        self.h_lib.eval(&self.params[self.layout().hamiltonian], x, 0.0).expect("state dimension")
    }

    pub fn grad_hamiltonian(&self, x: &[f64]) -> Vec<f64> {
        self.h_lib.gradient(&self.params[self.layout().hamiltonian], x).expect("state dimension")
    }

    /// Friction coefficients as a full-length diagonal.
    pub fn damping(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.structure.len()];
        let lay = self.layout();
        for (k, &c) in self.damping_components.iter().enumerate() {
            r[c] = self.params[lay.damping.start + k];
        }
        r
    }

    /// Coefficient of the Hamiltonian monomial with these exponents.
    pub fn coefficient(&self, exps: &[u32]) -> Option<f64> {
        let i = self.h_lib.find_monomial(exps)?;
        Some(self.params[self.h_lib.param_offsets()[i]])
    }

    /// Force output on the forced components.
    pub fn force_values(&self, x: &[f64], t: f64) -> Vec<f64> {
        let lay = self.layout();
        let p = &self.params[lay.force.clone()];
        match &self.force {
            ForceModel::None => Vec::new(),
            ForceModel::Symbolic(f) => f.eval(p, x, t),
            ForceModel::Mlp(m) => m.eval(p, lay.force.start, x, 0.0),
        }
    }

    fn force_eval<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Vec<S> {
        let lay = self.layout();
        let fp = &p[lay.force.clone()];
        match &self.force {
            ForceModel::None => Vec::new(),
            ForceModel::Symbolic(f) => f.eval(fp, x, t),
            ForceModel::Mlp(m) => m.eval(fp, lay.force.start, x, fp[0]),
        }
    }
}

/// Drops the external force, leaving the internal dynamics with damping.
pub fn remove_external_force(model: &PhsiModel) -> PhsiModel {
    let mut out = model.clone();
    let keep = model.layout().force.start;
    out.params.truncate(keep);
    out.mask.truncate(keep);
    out.force = ForceModel::None;
    out
}

impl TrainableModel for PhsiModel {
    fn dim(&self) -> usize {
        self.structure.len()
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    fn mask(&self) -> &[bool] {
        &self.mask
    }
    fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    fn slot_kinds(&self) -> Vec<SlotKind> {
        let lay = self.layout();
        let mut out = Vec::with_capacity(self.params.len());
        library_kinds(&self.h_lib, Group::Hamiltonian, 0, &mut out);
        out.extend(std::iter::repeat_n(
            SlotKind {
                group: Group::Damping,
                prunable: false,
                penalized: true,
                follows: None,
            },
            self.damping_components.len(),
        ));
        match &self.force {
            ForceModel::None => {}
            ForceModel::Symbolic(f) => {
                let np = f.lib.n_params();
                for k in 0..f.components.len() {
                    library_kinds(&f.lib, Group::Force, lay.force.start + k * np, &mut out);
                }
            }
            ForceModel::Mlp(m) => out.extend(std::iter::repeat_n(
                SlotKind {
                    group: Group::Network,
                    prunable: false,
                    penalized: false,
                    follows: None,
                },
                m.n_params(),
            )),
        }
        out
    }

    fn rhs<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Vec<S> {
        let lay = self.layout();
        let gh = self.h_lib.gradient(&p[lay.hamiltonian.clone()], x).expect("state dimension");
        let mut out: Vec<S> = self
            .structure
            .iter()
            .map(|row| {
                row.iter().zip(&gh).fold(S::zero(), |acc, (&s, &g)| {
                    if s == 0.0 {
                        acc
                    } else if s == 1.0 {
                        acc + g
                    } else if s == -1.0 {
                        acc - g
                    } else {
                        acc + g * s
                    }
                })
            })
            .collect();
        for (k, &c) in self.damping_components.iter().enumerate() {
            let r = p[lay.damping.start + k];
            if !r.is_const_zero() {
                out[c] = out[c] - r * gh[c];
            }
        }
        for (&c, f) in self.force.components().iter().zip(self.force_eval(p, x, t)) {
            out[c] = out[c] + f;
        }
        out
    }

    fn force_penalty<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Option<S> {
        match self.force {
            ForceModel::Mlp(_) => Some(
                self.force_eval(p, x, t)
                    .into_iter()
                    .fold(S::zero(), |acc, f| acc + f.abs()),
            ),
            _ => None,
        }
    }

    fn separable_split(&self) -> Option<usize> {
        self.split
    }
}

impl Dynamics for PhsiModel {
    fn dim(&self) -> usize {
        self.structure.len()
    }
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.rhs(&self.params, x, t)
    }
}

/// Learns `g` componentwise: `ẋ_i = Σ_k ξ_ik θ_k(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub dim: usize,
    pub lib: BasisLibrary,
    /// The library input is the state with `t` appended, and the model is
    /// read as an autonomous system with `ṫ = 1`.
    pub time_augmented: bool,
    pub params: Vec<f64>,
    pub mask: Vec<bool>,
    pub names: Vec<String>,
}

impl BaselineModel {
    pub fn new(dim: usize, lib: BasisLibrary, time_augmented: bool, init: &InitSpec) -> Result<Self> {
        let want = dim + time_augmented as usize;
        if lib.dim != want {
            return Err(Error::Dimension {
                expected: want,
                got: lib.dim,
            });
        }
        let mut params = Vec::new();
        for _ in 0..dim {
            init_library(&lib, init, &mut params);
        }
        let mask = vec![false; params.len()];
        Ok(Self {
            dim,
            names: (1..=dim).map(|i| format!("x{i}")).collect(),
            lib,
            time_augmented,
            params,
            mask,
        })
    }

    pub fn with_names<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.names = names.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    /// Coefficients of component `i`.
    pub fn component(&self, i: usize) -> &[f64] {
        let np = self.lib.n_params();
        &self.params[i * np..(i + 1) * np]
    }
}

impl TrainableModel for BaselineModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    fn mask(&self) -> &[bool] {
        &self.mask
    }
    fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    fn slot_kinds(&self) -> Vec<SlotKind> {
        let np = self.lib.n_params();
        let mut out = Vec::with_capacity(self.params.len());
        for i in 0..self.dim {
            library_kinds(&self.lib, Group::Hamiltonian, i * np, &mut out);
        }
        out
    }

    fn rhs<S: Real>(&self, p: &[S], x: &[S], t: f64) -> Vec<S> {
        let np = self.lib.n_params();
        let aug: Vec<S>;
        let input = if self.time_augmented {
            aug = x.iter().copied().chain(std::iter::once(S::cst(t))).collect();
            &aug[..]
        } else {
            x
        };
        (0..self.dim)
            .map(|i| self.lib.eval(&p[i * np..(i + 1) * np], input, t).expect("library shape"))
            .collect()
    }
}

impl Dynamics for BaselineModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.rhs(&self.params, x, t)
    }
}

pub fn phsi_rhs(model: &PhsiModel, x: &[f64], t: f64) -> Result<Vec<f64>> {
    if x.len() != model.structure.len() {
        return Err(Error::Dimension {
            expected: model.structure.len(),
            got: x.len(),
        });
    }
    Ok(model.rhs(&model.params, x, t))
}

/// Baseline right-hand side. A time-augmented model also accepts the
/// augmented state `(x, t)` and then returns `(ẋ, 1)`.
pub fn baseline_rhs(model: &BaselineModel, x: &[f64], t: f64) -> Result<Vec<f64>> {
    if x.len() == model.dim {
        return Ok(model.rhs(&model.params, x, t));
    }
    if model.time_augmented && x.len() == model.dim + 1 {
        let mut out = model.rhs(&model.params, &x[..model.dim], x[model.dim]);
        out.push(1.0);
        return Ok(out);
    }
    Err(Error::Dimension {
        expected: model.dim,
        got: x.len(),
    })
}

/// Either model family, as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnyModel {
    Phsi(PhsiModel),
    Baseline(BaselineModel),
}

impl AnyModel {
    pub fn equations(&self, names: &[String]) -> EquationReport {
        match self {
            AnyModel::Phsi(m) => extract_equations(m, names),
            AnyModel::Baseline(m) => extract_baseline_equations(m),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            AnyModel::Phsi(m) => &m.params,
            AnyModel::Baseline(m) => &m.params,
        }
    }

    pub fn active_terms(&self) -> usize {
        match self {
            AnyModel::Phsi(m) => m.active_terms(),
            AnyModel::Baseline(m) => m.active_terms(),
        }
    }
}

impl Dynamics for AnyModel {
    fn dim(&self) -> usize {
        match self {
            AnyModel::Phsi(m) => m.structure.len(),
            AnyModel::Baseline(m) => m.dim,
        }
    }
    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        match self {
            AnyModel::Phsi(m) => Dynamics::eval(m, x, t),
            AnyModel::Baseline(m) => Dynamics::eval(m, x, t),
        }
    }
}

/// One rendered nonzero term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationTerm {
    /// `H`, `r`, `F[p]` or `dx/dt` style owner.
    pub owner: String,
    /// Term name without coefficient, e.g. `q1^2` or `sin(w·t)`.
    pub label: String,
    pub coefficient: f64,
    /// Trig frequency, when the term has one.
    pub frequency: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct EquationReport {
    pub terms: Vec<EquationTerm>,
    /// Forced components modelled by a network.
    pub network_force: Vec<String>,
}

impl EquationReport {
    pub fn owner(&self, owner: &str) -> impl Iterator<Item = &EquationTerm> {
        let owner = owner.to_string();
        self.terms.iter().filter(move |t| t.owner == owner)
    }
}

impl fmt::Display for EquationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut owners: Vec<&str> = Vec::new();
        for t in &self.terms {
            if !owners.contains(&t.owner.as_str()) {
                owners.push(&t.owner);
            }
        }
        for o in owners {
            let parts: Vec<&str> = self.owner(o).map(|t| t.text.as_str()).collect();
            writeln!(f, "{o} = {}", parts.join(" + "))?;
        }
        for c in &self.network_force {
            writeln!(f, "F[{c}] = neural network")?;
        }
        Ok(())
    }
}

fn library_terms(lib: &BasisLibrary, params: &[f64], owner: &str, out: &mut Vec<EquationTerm>) {
    for (i, off) in lib.param_offsets().into_iter().enumerate() {
        let n = lib.terms[i].n_params();
        let p = &params[off..off + n];
        if p[0] == 0.0 {
            continue;
        }
        out.push(EquationTerm {
            owner: owner.to_string(),
            label: lib.term_label(i),
            coefficient: p[0],
            frequency: p.get(1).copied(),
            text: lib.term_to_string(i, p),
        });
    }
}

/// Nonzero terms of `Ĥ`, `r̂` and a symbolic `F̂`, in library order.
pub fn extract_equations(model: &PhsiModel, names: &[String]) -> EquationReport {
    let lay = model.layout();
    let mut rep = EquationReport::default();
    let lib = model.h_lib.clone().with_names(names);
    library_terms(&lib, &model.params[lay.hamiltonian.clone()], "H", &mut rep.terms);
    for (k, &c) in model.damping_components.iter().enumerate() {
        let v = model.params[lay.damping.start + k];
        if v != 0.0 {
            rep.terms.push(EquationTerm {
                owner: "r".into(),
                label: names[c].clone(),
                coefficient: v,
                frequency: None,
                text: format!("{}·[{}]", fmt_coeff(v), names[c]),
            });
        }
    }
    match &model.force {
        ForceModel::None => {}
        ForceModel::Symbolic(f) => {
            let lib = if f.time_only {
                f.lib.clone().with_names(&["t"])
            } else {
                f.lib.clone().with_names(names)
            };
            let np = lib.n_params();
            for (k, &c) in f.components.iter().enumerate() {
                let p = &model.params[lay.force.start + k * np..lay.force.start + (k + 1) * np];
                library_terms(&lib, p, &format!("F[{}]", names[c]), &mut rep.terms);
            }
        }
        ForceModel::Mlp(m) => rep.network_force = m.components.iter().map(|&c| names[c].clone()).collect(),
    }
    rep
}

/// Nonzero terms of each component of a baseline model.
pub fn extract_baseline_equations(model: &BaselineModel) -> EquationReport {
    let mut names = model.names.clone();
    if model.time_augmented {
        names.push("t".into());
    }
    let lib = model.lib.clone().with_names(&names);
    let mut rep = EquationReport::default();
    for i in 0..model.dim {
        library_terms(&lib, model.component(i), &format!("d{}/dt", model.names[i]), &mut rep.terms);
    }
    rep
}

/// Central differences in the interior, one-sided at the ends.
pub fn finite_difference_derivatives(states: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = states.len();
    (0..n)
        .map(|k| {
            let (a, b, h) = match k {
                0 => (0, 1, dt),
                _ if k == n - 1 => (n - 2, n - 1, dt),
                _ => (k - 1, k + 1, 2.0 * dt),
            };
            states[b].iter().zip(&states[a]).map(|(u, v)| (u - v) / h).collect()
        })
        .collect()
}

fn least_squares(theta: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let gram = theta.transpose() * theta;
    let rhs = theta.transpose() * y;
    if let Some(ch) = gram.clone().cholesky() {
        return ch.solve(&rhs);
    }
    warn!("rank-deficient regression; adding ridge 1e-10");
    let n = gram.nrows();
    let ridge = gram + DMatrix::identity(n, n) * 1e-10;
    match ridge.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => ridge
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(n)),
    }
}

/// Sequential thresholded least squares on finite-difference derivative
/// estimates. Trig terms keep the frequency given by `init` and only their
/// amplitude is regressed.
pub fn sindy_fit(
    dataset: &Dataset,
    lib: &BasisLibrary,
    threshold: f64,
    sweeps: usize,
    time_augmented: bool,
    init: &InitSpec,
) -> Result<BaselineModel> {
    let d = dataset.dim();
    let mut model = BaselineModel::new(d, lib.clone(), time_augmented, init)?;
    if dataset.trajectories.iter().any(|t| t.len() < 2) {
        return Err(Error::Config("regression needs at least two points per trajectory".into()));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let unit = model.component(0).to_vec();
    for tr in &dataset.trajectories {
        let deriv = finite_difference_derivatives(&tr.states, tr.dt);
        for ((x, &t), dx) in tr.states.iter().zip(&tr.times).zip(deriv) {
            let input: Vec<f64> = if time_augmented {
                x.iter().copied().chain(std::iter::once(t)).collect()
            } else {
                x.clone()
            };
            rows.push(lib.feature_row(&unit, &input, t));
            targets.push(dx);
        }
    }
    let n_terms = lib.len();
    let theta = DMatrix::from_fn(rows.len(), n_terms, |i, j| rows[i][j]);
    let offsets = lib.param_offsets();
    let np = lib.n_params();
    for c in 0..d {
        let y = DVector::from_fn(targets.len(), |i, _| targets[i][c]);
        let mut active: Vec<usize> = (0..n_terms).collect();
        let mut xi = vec![0.0; n_terms];
        for _ in 0..=sweeps {
            xi.iter_mut().for_each(|v| *v = 0.0);
            if active.is_empty() {
                break;
            }
            let sub = theta.select_columns(&active);
            let sol = least_squares(&sub, &y);
            for (k, &j) in active.iter().enumerate() {
                xi[j] = sol[k];
            }
            let keep: Vec<usize> = active.iter().copied().filter(|&j| xi[j].abs() >= threshold).collect();
            if keep.len() == active.len() {
                break;
            }
            active = keep;
        }
        for (j, &v) in xi.iter().enumerate() {
            let slot = c * np + offsets[j];
            let v = if v.abs() < threshold { 0.0 } else { v };
            model.params[slot] = v;
            model.mask[slot] = v == 0.0;
            if let Term::Trig(_) = lib.terms[j] {
                model.mask[slot + 1] = v == 0.0;
                if v == 0.0 {
                    model.params[slot + 1] = 0.0;
                }
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, LossFn};
    use crate::basis::build_polynomial_library;
    use crate::dynamics::{canonical_structure, make_benchmark, uniform_state, SystemParams};

    fn true_phsi(name: &str) -> (crate::dynamics::OdeSystem, PhsiModel) {
        let sys = make_benchmark(name, &SystemParams::new()).unwrap();
        let d = sys.dim();
        let lib = build_polynomial_library(d, 4, false);
        let mut m = PhsiModel::new(
            &sys.structure(),
            lib.clone(),
            Vec::new(),
            ForceModel::None,
            &InitSpec::default(),
            0,
        )
        .unwrap();
        m.params.iter_mut().for_each(|v| *v = 0.0);
        for (e, c) in sys.true_hamiltonian_terms() {
            let i = lib.find_monomial(&e).unwrap();
            m.params[lib.param_offsets()[i]] = c;
        }
        (sys, m)
    }

    fn mass_spring_model() -> PhsiModel {
        let lib = build_polynomial_library(2, 2, false);
        let flib = BasisLibrary::from_spec(
            &crate::basis::LibrarySpec {
                degree: 0,
                trig: crate::basis::TrigSpec { sin: true, cos: false },
                ..Default::default()
            },
            1,
        );
        let force = ForceModel::Symbolic(SymbolicForce {
            lib: flib,
            components: vec![1],
            time_only: true,
        });
        let mut m = PhsiModel::new(&canonical_structure(1), lib.clone(), vec![1], force, &InitSpec::default(), 0).unwrap();
        m.params.iter_mut().for_each(|v| *v = 0.0);
        m.params[lib.param_offsets()[lib.find_monomial(&[2, 0]).unwrap()]] = 0.5;
        m.params[lib.param_offsets()[lib.find_monomial(&[0, 2]).unwrap()]] = 0.5;
        let lay = m.layout();
        m.params[lay.damping.start] = 0.3;
        m.params[lay.force.start] = 2.0;
        m.params[lay.force.start + 1] = 0.5;
        m
    }

    #[test]
    fn mass_spring_truth_reproduces_rhs() {
        let m = mass_spring_model();
        assert_eq!(phsi_rhs(&m, &[1.0, 0.0], 0.0).unwrap(), vec![0.0, -1.0]);
        let sys = make_benchmark("mass_spring", &SystemParams::new()).unwrap();
        let mut rng = child_rng(1, 0);
        for _ in 0..100 {
            let x = uniform_state(&mut rng, 2, -2.0, 2.0);
            let t = rng.random_range(0.0..10.0);
            let a = phsi_rhs(&m, &x, t).unwrap();
            let b = sys.rhs(&x, t);
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn henon_heiles_truth_reproduces_rhs() {
        let (sys, m) = true_phsi("henon_heiles");
        let mut rng = child_rng(2, 0);
        for _ in 0..100 {
            let x = uniform_state(&mut rng, 4, -1.0, 1.0);
            let a = phsi_rhs(&m, &x, 0.0).unwrap();
            let b = sys.rhs(&x, 0.0);
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_model_is_zero() {
        let mut m = mass_spring_model();
        m.params.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(phsi_rhs(&m, &[0.3, -0.7], 1.3).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(phsi_rhs(&m, &[0.3], 0.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn removing_force_truncates_parameters() {
        let m = mass_spring_model();
        let r = remove_external_force(&m);
        assert_eq!(r.params.len(), m.layout().force.start);
        assert_eq!(r.force, ForceModel::None);
        assert_eq!(remove_external_force(&r), r);
    }

    #[test]
    fn equations_render_nonzero_terms() {
        let m = mass_spring_model();
        let names = vec!["q".to_string(), "p".to_string()];
        let rep = extract_equations(&m, &names);
        let texts: Vec<&str> = rep.terms.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["0.5·q^2", "0.5·p^2", "0.3·[p]", "2·sin(0.5·t)"]);
        let mut masked = m.clone();
        masked.mask[0] = true;
        assert_eq!(extract_equations(&masked, &names), rep);
    }

    #[test]
    fn mlp_examples() {
        let net = MlpForce::new(2, &[], vec![0]);
        assert_eq!(net.n_params(), 3);
        assert_eq!(mlp_forward(&net, &[0.0; 3], &[1.0, 2.0]).unwrap(), vec![0.0]);
        assert_eq!(mlp_forward(&net, &[3.0, 0.0, 0.0], &[1.5, 2.0]).unwrap(), vec![4.5]);
        let deep = MlpForce::new(9, &[100, 100, 100], vec![8]);
        assert_eq!(deep.n_params(), 21_301);
    }

    #[test]
    fn relu_net_is_positively_homogeneous_without_bias() {
        let net = MlpForce::new(1, &[1], vec![0]);
        let w = [2.0, 0.0, 3.0, 0.0];
        let a = mlp_forward(&net, &w, &[0.7]).unwrap()[0];
        let b = mlp_forward(&net, &w, &[1.4]).unwrap()[0];
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert_eq!(mlp_forward(&net, &w, &[-0.7]).unwrap()[0], 0.0);
    }

    struct NetLoss {
        net: MlpForce,
        x: Vec<f64>,
    }

    impl LossFn for NetLoss {
        fn eval<S: Real>(&self, anchor: S, p: &[S]) -> S {
            let x: Vec<S> = self.x.iter().map(|&v| S::cst(v)).collect();
            let y = self.net.eval(p, 0, &x, anchor);
            y[0] * y[0] + y[1]
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let net = MlpForce::new(3, &[8, 8], vec![0, 2]);
        let p = net.init_params(4);
        let loss = NetLoss {
            net,
            x: vec![0.3, -0.8, 0.5],
        };
        let err = finite_diff_check(&p, 1e-6, loss).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn conservation_for_random_hamiltonians() {
        let (_, mut m) = true_phsi("nls");
        let mut rng = child_rng(9, 0);
        for _ in 0..20 {
            m.params.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            for _ in 0..50 {
                let x = uniform_state(&mut rng, 4, -1.0, 1.0);
                let g = m.grad_hamiltonian(&x);
                let v = phsi_rhs(&m, &x, 0.0).unwrap();
                let hdot: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(hdot.abs() < 1e-12, "{hdot}");
            }
        }
    }

    #[test]
    fn baseline_examples() {
        let lib = build_polynomial_library(3, 1, true);
        let mut m = BaselineModel::new(2, lib.clone(), true, &InitSpec::default()).unwrap();
        m.params.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(baseline_rhs(&m, &[0.4, 0.1], 2.0).unwrap(), vec![0.0, 0.0]);
        let out = baseline_rhs(&m, &[0.4, 0.1, 2.0], 0.0).unwrap();
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn baseline_with_true_mass_spring_expansion() {
        let lib = build_polynomial_library(2, 1, true).with_trig(true, false);
        let mut m = BaselineModel::new(2, lib.clone(), false, &InitSpec::default()).unwrap();
        m.params.iter_mut().for_each(|v| *v = 0.0);
        let np = lib.n_params();
        let q = lib.find_monomial(&[1, 0]).unwrap();
        let p = lib.find_monomial(&[0, 1]).unwrap();
        let off = lib.param_offsets();
        m.params[off[p]] = 1.0;
        m.params[np + off[q]] = -1.0;
        m.params[np + off[p]] = -0.3;
        m.params[np + off[3]] = 2.0;
        m.params[np + off[3] + 1] = 0.5;
        let sys = make_benchmark("mass_spring", &SystemParams::new()).unwrap();
        let mut rng = child_rng(5, 0);
        for _ in 0..100 {
            let x = uniform_state(&mut rng, 2, -2.0, 2.0);
            let t = rng.random_range(0.0..10.0);
            let a = baseline_rhs(&m, &x, t).unwrap();
            let b = sys.rhs(&x, t);
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    #[test]
    fn stlsq_recovers_linear_system() {
        let a = [[-0.5, 1.0], [-1.0, -0.2]];
        let lin = (2usize, move |x: &[f64], _t: f64| {
            vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
        });
        let mut trajectories = Vec::new();
        let mut rng = child_rng(3, 0);
        for _ in 0..5 {
            let x0 = uniform_state(&mut rng, 2, -1.0, 1.0);
            trajectories.push(crate::integrators::reference_simulate(&lin, &x0, 2.0, 0.001, 10).unwrap());
        }
        let ds = Dataset {
            system: crate::dynamics::Benchmark::MassSpring,
            params: SystemParams::new(),
            trajectories,
            clean: None,
            noise_sigma: 0.0,
            seed: 0,
            dt: 0.001,
        };
        let lib = build_polynomial_library(2, 1, false);
        let m = sindy_fit(&ds, &lib, 0.05, 10, false, &InitSpec::default()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.component(i)[j] - a[i][j]).abs() < 1e-3, "{i}{j}: {}", m.component(i)[j]);
            }
        }
        let empty = sindy_fit(&ds, &lib, 10.0, 10, false, &InitSpec::default()).unwrap();
        assert!(empty.params.iter().all(|&v| v == 0.0));
        assert_eq!(extract_baseline_equations(&empty).terms.len(), 0);
    }
}
