//! Loss on the integration scheme, Adam, pruning and the epoch loop.

use std::collections::VecDeque;

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{GradientVector, Real, Tape, Var};
use crate::dynamics::{child_rng, Dataset, Pair};
use crate::error::{Error, Result};
use crate::integrators::{psi_partitioned, Scheme};
use crate::models::{Group, SlotKind, TrainableModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub lambda_h: f64,
    pub lambda_f: f64,
    pub lambda_r: f64,
    /// Prune every `prune_interval` epochs; 0 disables pruning.
    pub prune_interval: usize,
    pub prune_history: usize,
    pub prune_threshold: f64,
    pub integrator: Scheme,
    pub seed: u64,
    pub reg_drop_at_half: bool,
    /// Store the parameter vector at the end of every epoch.
    pub record_params: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            weight_decay: 1e-4,
            lambda_h: 0.0,
            lambda_f: 0.0,
            lambda_r: 0.0,
            prune_interval: 10,
            prune_history: 1,
            prune_threshold: 0.05,
            integrator: Scheme::Srk4,
            seed: 0,
            reg_drop_at_half: true,
            record_params: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParam {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.prune_history == 0 {
            return bad("prune_history", "must be positive");
        }
        for (name, v) in [
            ("weight_decay", self.weight_decay),
            ("lambda_h", self.lambda_h),
            ("lambda_f", self.lambda_f),
            ("lambda_r", self.lambda_r),
            ("prune_threshold", self.prune_threshold),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(name, "must be nonnegative");
            }
        }
        if !self.integrator.available() {
            return Err(Error::Unavailable(self.integrator.name()));
        }
        Ok(())
    }

    /// Whether the L1 penalties apply in `epoch` (1-based).
    pub fn reg_active(&self, epoch: usize) -> bool {
        !(self.reg_drop_at_half && 2 * epoch > self.epochs)
    }

    pub fn penalties(&self) -> Penalties {
        Penalties {
            hamiltonian: self.lambda_h,
            force: self.lambda_f,
            damping: self.lambda_r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalties {
    pub hamiltonian: f64,
    pub force: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the objective over all samples, penalties included.
    pub loss: f64,
    /// Penalty part of `loss`.
    pub penalty: f64,
    pub active_terms: usize,
    pub reg_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// `(epoch, slot)` for every pruned parameter.
    pub pruned: Vec<(usize, usize)>,
    pub final_mask: Vec<bool>,
    /// Parameters at the end of every epoch, if requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<Vec<f64>>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// JSON lines, one per epoch.
    pub fn progress_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain record") + "\n")
            .collect()
    }
}

/// Batch objective: mean squared scheme residual plus the active penalties.
/// Returns `(total, penalty)`.
pub fn loss<S: Real, M: TrainableModel>(
    model: &M,
    p: &[S],
    batch: &[&Pair],
    dt: f64,
    scheme: Scheme,
    lambdas: Penalties,
    reg_active: bool,
) -> Result<(S, S)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let d = model.dim();
    let split = model.separable_split();
    let g = |x: &[S], t: f64| model.rhs(p, x, t);
    let inv_dt = 1.0 / dt;
    let mut sum = S::zero();
    for pair in batch {
        if pair.x0.len() != d || pair.x1.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: pair.x0.len().min(pair.x1.len()),
            });
        }
        let x0: Vec<S> = pair.x0.iter().map(|&v| S::cst(v)).collect();
        let x1: Vec<S> = pair.x1.iter().map(|&v| S::cst(v)).collect();
        let psi = psi_partitioned(scheme, &g, split, &x0, &x1, pair.t, dt)?;
        for i in 0..d {
            let r = -psi[i] + (pair.x1[i] - pair.x0[i]) * inv_dt;
            sum = sum + r * r;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let residual = sum * scale;
    if !residual.value().is_finite() {
        return Err(Error::NonFinite {
            context: "scheme residual".into(),
            index: 0,
        });
    }
    if !reg_active {
        return Ok((residual, S::zero()));
    }
    let mut penalty = S::zero();
    let kinds = model.slot_kinds();
    let mut group_sum = |group: Group, lambda: f64| {
        if lambda == 0.0 {
            return;
        }
        let mut acc = S::zero();
        for (k, v) in kinds.iter().zip(p) {
            if k.group == group && k.penalized && !v.is_const_zero() {
                acc = acc + v.abs();
            }
        }
        penalty = penalty + acc * lambda;
    };
    group_sum(Group::Hamiltonian, lambdas.hamiltonian);
    group_sum(Group::Force, lambdas.force);
    group_sum(Group::Damping, lambdas.damping);
    if lambdas.force != 0.0 {
        let mut acc = S::zero();
        let mut any = false;
        for pair in batch {
            let x0: Vec<S> = pair.x0.iter().map(|&v| S::cst(v)).collect();
            if let Some(f) = model.force_penalty(p, &x0, pair.t) {
                acc = acc + f;
                any = true;
            }
        }
        if any {
            penalty = penalty + acc * (lambdas.force * scale);
        }
    }
    Ok((residual + penalty, penalty))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with decoupled weight decay. Masked slots are left
/// untouched, moments included.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], mask: &[bool], lr: f64, weight_decay: f64) {
    state.step += 1;
    let b1t = 1.0 - state.beta1.powi(state.step as i32);
    let b2t = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        if mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] -= lr * weight_decay * params[i] + lr * m_hat / (v_hat.sqrt() + state.eps);
    }
}

/// Epoch-end parameter snapshots for the "last p epochs" rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneHistory {
    depth: usize,
    snapshots: VecDeque<Vec<f64>>,
}

impl PruneHistory {
    pub fn new(depth: usize) -> Self {
        Self {
            depth: depth.max(1),
            snapshots: VecDeque::new(),
        }
    }

    pub fn record(&mut self, params: &[f64]) {
        if self.snapshots.len() == self.depth {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(params.to_vec());
    }

    fn below(&self, slot: usize, eps: f64) -> bool {
        self.snapshots.len() == self.depth && self.snapshots.iter().all(|s| s[slot].abs() < eps)
    }
}

/// Masks and zeroes every prunable slot that stayed strictly below `eps` in
/// all recorded snapshots, plus slots following a masked slot. Returns the
/// newly masked slots in ascending order.
pub fn prune(params: &mut [f64], mask: &mut [bool], kinds: &[SlotKind], history: &PruneHistory, eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..params.len() {
        if !mask[i] && kinds[i].prunable && history.below(i, eps) {
            mask[i] = true;
            params[i] = 0.0;
            out.push(i);
        }
    }
    for i in 0..params.len() {
        if let Some(j) = kinds[i].follows {
            if mask[j] && !mask[i] {
                mask[i] = true;
                params[i] = 0.0;
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Gradient of the batch objective with masked slots held at constant zero.
pub fn batch_gradient<M: TrainableModel>(
    model: &M,
    batch: &[&Pair],
    dt: f64,
    scheme: Scheme,
    lambdas: Penalties,
    reg_active: bool,
) -> Result<(f64, f64, GradientVector)> {
    let tape = Tape::new();
    let mask = model.mask();
    let vars: Vec<Var<'_>> = model
        .params()
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask[i] { Var::constant(0.0) } else { tape.param(i, v) })
        .collect();
    let (total, penalty) = loss(model, &vars, batch, dt, scheme, lambdas, reg_active)?;
    let mut g = GradientVector(tape.gradient(total, vars.len())?);
    g.apply_mask(mask);
    Ok((total.value(), penalty.value(), g))
}

/// Trains on all consecutive pairs of `dataset`.
pub fn train<M: TrainableModel>(model: &mut M, dataset: &Dataset, hyper: &Hyperparams) -> Result<TrainHistory> {
    train_pairs(model, &dataset.pairs(), dataset.dt, hyper, |_| {})
}

/// Epoch loop over explicit pairs. `observe` sees every epoch record as it
/// is produced. On divergence the error names the epoch and the records so
/// far have already been observed.
pub fn train_pairs<M, F>(model: &mut M, pairs: &[Pair], dt: f64, hyper: &Hyperparams, mut observe: F) -> Result<TrainHistory>
where
    M: TrainableModel,
    F: FnMut(&EpochRecord),
{
    hyper.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParam {
            name: "dt".into(),
            reason: "must be positive".into(),
        });
    }
    if hyper.integrator == Scheme::Prk4 && model.separable_split().is_none() {
        return Err(Error::NonSeparable("prk4"));
    }
    let kinds = model.slot_kinds();
    let n = model.params().len();
    let mut adam = AdamState::new(n);
    let mut ring = PruneHistory::new(hyper.prune_history);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=hyper.epochs {
        let reg_active = hyper.reg_active(epoch);
        let lambdas = if reg_active { hyper.penalties() } else { Penalties::default() };
        order.sort_unstable();
        order.shuffle(&mut child_rng(hyper.seed, epoch as u64));
        let (mut loss_sum, mut pen_sum) = (0.0, 0.0);
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<&Pair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let (total, penalty, g) =
                batch_gradient(model, &batch, dt, hyper.integrator, lambdas, reg_active).map_err(|e| match e {
                    Error::NonFinite { .. } => Error::Diverged { epoch },
                    other => other,
                })?;
            loss_sum += total * batch.len() as f64;
            pen_sum += penalty * batch.len() as f64;
            let mask = model.mask().to_vec();
            adam_step(&mut adam, model.params_mut(), &g, &mask, hyper.learning_rate, hyper.weight_decay);
        }
        if model.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        ring.record(model.params());
        if hyper.prune_interval > 0 && epoch % hyper.prune_interval == 0 {
            let mut params = model.params().to_vec();
            let mut mask = model.mask().to_vec();
            let pruned = prune(&mut params, &mut mask, &kinds, &ring, hyper.prune_threshold);
            model.params_mut().copy_from_slice(&params);
            model.mask_mut().copy_from_slice(&mask);
            history.pruned.extend(pruned.into_iter().map(|i| (epoch, i)));
        }
        let rec = EpochRecord {
            epoch,
            loss: loss_sum / pairs.len() as f64,
            penalty: pen_sum / pairs.len() as f64,
            active_terms: model.active_terms(),
            reg_active,
        };
        info!("{}", serde_json::to_string(&rec).expect("plain record"));
        observe(&rec);
        history.epochs.push(rec);
        if hyper.record_params {
            history.params.push(model.params().to_vec());
        }
    }
    history.final_mask = model.mask().to_vec();
    Ok(history)
}
