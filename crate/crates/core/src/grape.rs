//! Piecewise-constant field synthesis for `H(t) = H_n + ε(t) C`.

use std::io::{BufRead, Write};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CohError, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix};
use crate::optimizer::{self, AscentObjective, AscentSettings, Termination};

/// Steps between polar re-unitarizations of the running product.
pub const REUNITARIZE_EVERY: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    dt: f64,
    amplitudes: Vec<f64>,
}

impl ControlField {
    pub fn new(dt: f64, amplitudes: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CohError::Domain(format!("time step must be positive, got {dt}")));
        }
        if amplitudes.is_empty() {
            return Err(CohError::Domain("field needs at least one time step".into()));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(CohError::NonFinite("field amplitude".into()));
        }
        Ok(Self { dt, amplitudes })
    }

    pub fn zeros(total_time: f64, steps: usize) -> Result<Self> {
        Self::new(total_time / steps as f64, vec![0.0; steps])
    }

    /// Gaussian amplitudes with standard deviation `scale`.
    pub fn random(total_time: f64, steps: usize, scale: f64, seed: u64) -> Result<Self> {
        let dist = Normal::new(0.0, scale).map_err(|e| CohError::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(total_time / steps as f64, (0..steps).map(|_| dist.sample(&mut rng)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn steps(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.amplitudes.len() as f64
    }

    /// End time of each step, `(k+1)·dt`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.steps()).map(|k| k as f64 * self.dt)
    }

    /// Headerless two-column CSV `(time, amplitude)`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (t, a) in self.times().zip(&self.amplitudes) {
            writeln!(w, "{t:.16e},{a:.16e}")?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`ControlField::write_csv`]. The time step is
    /// taken from the first time stamp and the remaining stamps are checked
    /// against it.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut amplitudes = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.map(str::trim)
                    .ok_or_else(|| CohError::Parse(format!("line {}: expected two columns", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| CohError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let mut cols = line.split(',');
            times.push(parse(cols.next())?);
            amplitudes.push(parse(cols.next())?);
            if cols.next().is_some() {
                return Err(CohError::Parse(format!("line {}: expected two columns", lineno + 1)));
            }
        }
        let dt = *times.first().ok_or_else(|| CohError::Parse("empty field file".into()))?;
        for (k, t) in times.iter().enumerate() {
            let want = (k + 1) as f64 * dt;
            if (t - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(CohError::Parse(format!("non-uniform time grid at row {}", k + 1)));
            }
        }
        Self::new(dt, amplitudes)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationResult {
    pub u_final: CMatrix,
    pub fidelity: f64,
    /// Fidelity after each accepted iteration, starting with the initial field.
    pub fidelity_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrapeOptions {
    pub max_iter: usize,
    pub target_fidelity: f64,
    pub grad_tol: f64,
    pub memory: usize,
    /// Stagnation: relative fidelity gain below `stall_tol` over `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Cap on the first trial step in amplitude space.
    pub max_step: f64,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            target_fidelity: 0.9999,
            grad_tol: 1e-12,
            memory: 30,
            stall_window: 50,
            stall_tol: 1e-12,
            max_step: 1.0,
        }
    }
}

struct Step {
    eigvals: Vec<f64>,
    eigvecs: CMatrix,
    unitary: CMatrix,
}

fn step(h: &HermitianMatrix, control: &HermitianMatrix, eps: f64, dt: f64) -> Step {
    let hk = h.matrix() + control.matrix().scale(eps);
    let (eigvals, eigvecs) = linalg::eigh(&hk);
    let unitary = linalg::function_of(&eigvals, &eigvecs, |x| C64::new(0.0, -x * dt).exp());
    Step {
        eigvals,
        eigvecs,
        unitary,
    }
}

fn check_inputs(h: &HermitianMatrix, control: &HermitianMatrix) -> Result<()> {
    check_dim(h.dim(), control.dim())
}

/// `U(T) = P_M ⋯ P_1` with `P_k = exp(−i (H + ε_k C) dt)`.
pub fn propagate(h: &HermitianMatrix, control: &HermitianMatrix, field: &ControlField) -> Result<CMatrix> {
    check_inputs(h, control)?;
    let n = h.dim();
    let mut u = CMatrix::identity(n, n);
    for (k, &eps) in field.amplitudes().iter().enumerate() {
        u = step(h, control, eps, field.dt()).unitary * u;
        if (k + 1) % REUNITARIZE_EVERY == 0 {
            u = linalg::polar_unitary(&u);
        }
    }
    Ok(u)
}

/// `|Tr(U_target† U)|² / N²`.
pub fn unitary_fidelity(u: &CMatrix, target: &CMatrix) -> Result<f64> {
    check_dim(target.nrows(), u.nrows())?;
    check_dim(target.ncols(), u.ncols())?;
    let n = u.nrows() as f64;
    Ok(overlap(target, u).norm_sqr() / (n * n))
}

/// `Tr(A† B)`.
fn overlap(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

struct Landscape<'a> {
    h: &'a HermitianMatrix,
    control: &'a HermitianMatrix,
    target: &'a CMatrix,
    dt: f64,
    steps: usize,
}

impl Landscape<'_> {
    fn fidelity(&self, amplitudes: &[f64]) -> f64 {
        let field = ControlField {
            dt: self.dt,
            amplitudes: amplitudes.to_vec(),
        };
        let u = propagate(self.h, self.control, &field).expect("dimensions checked");
        unitary_fidelity(&u, self.target).expect("dimensions checked")
    }

    /// Fidelity and its exact gradient. With `R_k = P_{k−1}⋯P_1` and
    /// `B_k = T† P_M⋯P_{k+1}`, `∂z/∂ε_k = Tr(R_k B_k ∂P_k)` where `z = Tr(T† U)`.
    fn fidelity_and_gradient(&self, amplitudes: &[f64]) -> (f64, Vec<f64>) {
        let n = self.h.dim();
        let m = amplitudes.len();
        let steps: Vec<Step> = amplitudes
            .iter()
            .map(|&e| step(self.h, self.control, e, self.dt))
            .collect();

        // forward[k] = P_k ⋯ P_1, forward[0] = I
        let mut forward = Vec::with_capacity(m + 1);
        forward.push(CMatrix::identity(n, n));
        for (k, s) in steps.iter().enumerate() {
            let mut next = &s.unitary * &forward[k];
            if (k + 1) % REUNITARIZE_EVERY == 0 {
                next = linalg::polar_unitary(&next);
            }
            forward.push(next);
        }
        let z = overlap(self.target, &forward[m]);
        let nn = (n * n) as f64;

        let mut grad = vec![0.0; m];
        let mut back = self.target.adjoint();
        for k in (0..m).rev() {
            let s = &steps[k];
            let w = &s.eigvecs;
            let cp = w.adjoint() * self.control.matrix() * w;
            let kernel = linalg::exp_kernel(&s.eigvals, -self.dt);
            let inner = CMatrix::from_fn(n, n, |a, b| cp[(a, b)] * kernel[(a, b)]);
            let dp = w * inner * w.adjoint();
            let rb = &forward[k] * &back;
            // Tr(RB dP) = Σ_ab (RB)_ba dP_ab
            let dz: C64 = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| rb[(b, a)] * dp[(a, b)])
                .sum();
            grad[k] = 2.0 * (z.conj() * dz).re / nn;
            back = &back * &s.unitary;
        }
        (z.norm_sqr() / nn, grad)
    }
}

impl AscentObjective for Landscape<'_> {
    fn dim(&self) -> usize {
        self.steps
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.fidelity(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.fidelity_and_gradient(x)
    }
}

/// Exact gradient of the fidelity with respect to every amplitude.
pub fn fidelity_gradient(
    h: &HermitianMatrix,
    control: &HermitianMatrix,
    target: &CMatrix,
    field: &ControlField,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(h, control)?;
    check_dim(h.dim(), target.nrows())?;
    let l = Landscape {
        h,
        control,
        target,
        dt: field.dt(),
        steps: field.steps(),
    };
    Ok(l.fidelity_and_gradient(field.amplitudes()))
}

/// Gradient ascent (L-BFGS) on the fidelity over the field amplitudes.
pub fn grape_optimize(
    h: &HermitianMatrix,
    control: &HermitianMatrix,
    target: &CMatrix,
    field0: &ControlField,
    opts: &GrapeOptions,
) -> Result<(ControlField, PropagationResult)> {
    check_inputs(h, control)?;
    check_dim(h.dim(), target.nrows())?;
    check_dim(h.dim(), target.ncols())?;
    if linalg::unitarity_defect(target) > 1e-10 {
        return Err(CohError::Domain("target is not unitary".into()));
    }
    let objective = Landscape {
        h,
        control,
        target,
        dt: field0.dt(),
        steps: field0.steps(),
    };
    let settings = AscentSettings {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        memory: opts.memory,
        max_step: opts.max_step,
        stall_window: opts.stall_window,
        stall_tol: opts.stall_tol,
        target_value: Some(opts.target_fidelity),
    };
    let outcome = optimizer::maximize(&objective, field0.amplitudes().to_vec(), &settings)?;
    let field = ControlField::new(field0.dt(), outcome.x)?;
    let u_final = propagate(h, control, &field)?;
    let fidelity = unitary_fidelity(&u_final, target)?;
    Ok((
        field,
        PropagationResult {
            u_final,
            fidelity,
            fidelity_trace: outcome.trace,
            iterations: outcome.iterations,
            converged: fidelity >= opts.target_fidelity,
            termination: outcome.termination,
        },
    ))
}
