//! Limited-memory BFGS ascent with Armijo backtracking.
//!
//! Shared by the static unitary optimization and by GRAPE. Objectives are
//! maximized; the quasi-Newton model is kept for `-f`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};

pub trait AscentObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// Central differences with a fixed step.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + step;
            let up = f(&probe);
            probe[k] = x[k] - step;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentSettings {
    pub max_iter: usize,
    /// Stop when `‖∇f‖_∞` falls below this.
    pub grad_tol: f64,
    /// Number of curvature pairs kept.
    pub memory: usize,
    /// Cap on the Euclidean length of the first trial step.
    pub max_step: f64,
    /// Stop when the total gain over this many accepted steps is below
    /// `stall_tol · (1 + |f|)`.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Stop as soon as the objective reaches this value.
    pub target_value: Option<f64>,
}

impl Default for AscentSettings {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-12,
            memory: 30,
            max_step: 1.0,
            stall_window: 50,
            stall_tol: 1e-12,
            target_value: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    TargetReached,
    /// Gain over the stall window fell below tolerance.
    Stalled,
    /// No Armijo step exists even along the gradient: a numerical local
    /// maximum (typically at a kink of a non-smooth objective).
    LineSearchExhausted,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Clone, Debug)]
pub struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() || sy <= 0.0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// `H q` by the two-loop recursion, `H` the inverse-Hessian model of `-f`.
    fn apply(&self, q: &[f64]) -> Vec<f64> {
        let mut q = q.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q
    }
}

/// Maximizes `obj` from `x0`. The objective trace is non-decreasing.
pub fn maximize<O: AscentObjective + ?Sized>(
    obj: &O,
    x0: Vec<f64>,
    settings: &AscentSettings,
) -> Result<AscentOutcome> {
    let n = obj.dim();
    if x0.len() != n {
        return Err(CohError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x);
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(CohError::NonFinite(format!(
            "objective {f} at the initial point"
        )));
    }
    let mut trace = vec![f];
    let mut memory = Memory {
        pairs: VecDeque::new(),
        capacity: settings.memory.max(1),
    };
    let mut iterations = 0;
    let termination = loop {
        if settings.target_value.is_some_and(|t| f >= t) {
            break Termination::TargetReached;
        }
        if inf_norm(&g) < settings.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= settings.max_iter {
            break Termination::MaxIterations;
        }
        if trace.len() > settings.stall_window {
            let old = trace[trace.len() - 1 - settings.stall_window];
            if f - old <= settings.stall_tol * (1.0 + f.abs()) {
                break Termination::Stalled;
            }
        }

        // Ascent direction for f is a descent direction for -f: d = H g.
        let mut direction = memory.apply(&g);
        let mut slope = dot(&direction, &g);
        if !(slope > 0.0) {
            memory.pairs.clear();
            direction = g.clone();
            slope = dot(&g, &g);
        }

        // A raw gradient carries no length scale; its first trial goes the full
        // max_step and backtracks from there.
        let unscaled = memory.pairs.is_empty();
        let accepted = line_search(obj, &x, f, &direction, slope, settings.max_step, unscaled, &mut evaluations)?;
        let (step, f_new) = match accepted {
            Some(found) => found,
            None if !memory.pairs.is_empty() => {
                memory.pairs.clear();
                continue;
            }
            None => break Termination::LineSearchExhausted,
        };

        let x_new: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
        let (f_eval, g_new) = obj.value_and_gradient(&x_new);
        evaluations += 1;
        debug_assert!((f_eval - f_new).abs() <= 1e-9 * (1.0 + f_new.abs()));
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(CohError::NonFinite(format!(
                "gradient at iteration {iterations}"
            )));
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // Curvature pair of -f.
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        memory.push(s, y);

        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        iterations += 1;
    };

    Ok(AscentOutcome {
        gradient_inf_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        evaluations,
        termination,
        trace,
    })
}

/// Backtracking until `f(x + αd) ≥ f + c₁ α ∇f·d`. Returns the step and the
/// new value, or `None` when no step qualifies.
#[allow(clippy::too_many_arguments)]
fn line_search<O: AscentObjective + ?Sized>(
    obj: &O,
    x: &[f64],
    f: f64,
    direction: &[f64],
    slope: f64,
    max_step: f64,
    unscaled: bool,
    evaluations: &mut usize,
) -> Result<Option<(f64, f64)>> {
    let norm = dot(direction, direction).sqrt();
    let mut alpha = if norm > max_step || unscaled { max_step / norm } else { 1.0 };
    let mut trial = vec![0.0; x.len()];
    for _ in 0..MAX_BACKTRACKS {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(direction) {
            *t = xi + alpha * di;
        }
        let f_trial = obj.value(&trial);
        *evaluations += 1;
        if !f_trial.is_finite() {
            return Err(CohError::NonFinite(format!(
                "objective {f_trial} during line search at step {alpha:e} (f = {f}, |d| = {norm:e})"
            )));
        }
        if f_trial >= f + ARMIJO_C1 * alpha * slope && f_trial > f {
            return Ok(Some((alpha, f_trial)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}
