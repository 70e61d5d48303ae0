//! Run configuration: TOML file sections, flag overrides and resolution of
//! per-experiment defaults.

use std::path::Path;

use clap::ValueEnum;
use cohgen::harness::{log_grid, DEFAULT_ENERGY_TOL, DEFAULT_OVERLAP_TOL, DEFAULT_VALUE_TOL};
use cohgen::spinsys::ModelParams;
use cohgen::uopt::{Coupling, OptimizerOptions, Penalty};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invalid or incomplete configuration. Maps to exit code 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Microcanonical,
    Canonical,
    Grape,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Microcanonical => "microcanonical",
            Experiment::Canonical => "canonical",
            Experiment::Grape => "grape",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Maximal C over (j, β₀).
    Fig1,
    /// ⟨O⟩ over the (β₀, β_F) grid, small α.
    Fig4,
    /// ⟨O⟩ over the (β₀, β_F) grid, large α.
    Fig5,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Fig1 => "fig1",
            SweepKind::Fig4 => "fig4",
            SweepKind::Fig5 => "fig5",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CouplingArg {
    Mu,
    Mu2,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Mu => Coupling::Dipole,
            CouplingArg::Mu2 => Coupling::DipoleSquared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Spin sizes for the fig1 sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub js: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    pub u: f64,
    pub delta: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            j: None,
            js: None,
            beta0: None,
            u: m.u,
            delta: m.delta,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_f: Option<f64>,
    /// Target energy `E_f`, alternative to `beta_f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    pub penalty: Penalty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub coupling: Coupling,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            alpha: None,
            coupling: Coupling::Dipole,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<SweepKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_fs: Option<Vec<f64>>,
    /// Log-spaced default grid used when a list above is absent.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: None,
            beta0s: None,
            beta_fs: None,
            grid_min: 0.05,
            grid_max: 20.0,
            grid_points: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSection {
    pub total_time: f64,
    pub steps: usize,
    /// Standard deviation of the random initial field.
    pub init_scale: f64,
    pub max_iter: usize,
    pub target_fidelity: f64,
    pub grad_tol: f64,
}

impl Default for GrapeSection {
    fn default() -> Self {
        let o = cohgen::grape::GrapeOptions::default();
        Self {
            total_time: 20000.0,
            steps: 400,
            init_scale: 0.005,
            max_iter: o.max_iter,
            target_fidelity: o.target_fidelity,
            grad_tol: o.grad_tol,
        }
    }
}

impl GrapeSection {
    pub fn options(&self) -> cohgen::grape::GrapeOptions {
        cohgen::grape::GrapeOptions {
            max_iter: self.max_iter,
            target_fidelity: self.target_fidelity,
            grad_tol: self.grad_tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusSection {
    pub value_tol: f64,
    pub overlap_tol: f64,
    /// λ₀ is the smallest multiplier whose mean |σ| falls below this.
    pub energy_tol: f64,
}

impl Default for CensusSection {
    fn default() -> Self {
        Self {
            value_tol: DEFAULT_VALUE_TOL,
            overlap_tol: DEFAULT_OVERLAP_TOL,
            energy_tol: DEFAULT_ENERGY_TOL,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    pub system: SystemSection,
    pub constraint: ConstraintSection,
    pub target: TargetSection,
    pub sweep: SweepSection,
    pub optimizer: OptimizerOptions,
    pub grape: GrapeSection,
    pub census: CensusSection,
}

/// Values given on the command line; each one replaces the config entry.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub j: Vec<f64>,
    pub beta0: Option<f64>,
    pub beta_f: Option<f64>,
    pub energy: Option<f64>,
    pub lambda: Option<f64>,
    pub lambdas: Vec<f64>,
    pub alpha: Option<f64>,
    pub coupling: Option<CouplingArg>,
    pub kind: Option<SweepKind>,
    pub beta0s: Vec<f64>,
    pub beta_fs: Vec<f64>,
    pub grid_points: Option<usize>,
    pub total_time: Option<f64>,
    pub steps: Option<usize>,
    pub target_fidelity: Option<f64>,
    pub max_iter: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        fn set_list(slot: &mut Option<Vec<f64>>, v: &[f64]) {
            if !v.is_empty() {
                *slot = Some(v.to_vec());
            }
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        set(&mut self.runs, &o.runs);
        match o.j.as_slice() {
            [] => {}
            [j] => {
                self.system.j = Some(*j);
                self.system.js = Some(vec![*j]);
            }
            js => self.system.js = Some(js.to_vec()),
        }
        set(&mut self.system.beta0, &o.beta0);
        if o.beta_f.is_some() || o.energy.is_some() {
            self.constraint.beta_f = o.beta_f;
            self.constraint.energy = o.energy;
        }
        set(&mut self.constraint.lambda, &o.lambda);
        set_list(&mut self.constraint.lambdas, &o.lambdas);
        set(&mut self.target.alpha, &o.alpha);
        if let Some(c) = o.coupling {
            self.target.coupling = c.into();
        }
        set(&mut self.sweep.kind, &o.kind);
        set_list(&mut self.sweep.beta0s, &o.beta0s);
        set_list(&mut self.sweep.beta_fs, &o.beta_fs);
        if let Some(n) = o.grid_points {
            self.sweep.grid_points = n;
        }
        if let Some(t) = o.total_time {
            self.grape.total_time = t;
        }
        if let Some(m) = o.steps {
            self.grape.steps = m;
        }
        if let Some(f) = o.target_fidelity {
            self.grape.target_fidelity = f;
        }
        if let Some(m) = o.max_iter {
            self.optimizer.max_iter = m;
            self.grape.max_iter = m;
        }
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            u: self.system.u,
            delta: self.system.delta,
        }
    }

    /// Fills every default the experiment needs and validates the result, so
    /// the echoed config is complete and nothing is computed on bad input.
    pub fn resolve(mut self, experiment: Experiment) -> Result<Self, UsageError> {
        if !(self.system.u.is_finite() && self.system.delta.is_finite()) {
            return usage("model parameters u and delta must be finite");
        }
        check_tolerances(&self.census)?;
        // batches draw their own per-run seeds from the top-level seed
        self.optimizer.seed = self.seed;
        let o = &self.optimizer;
        positive("optimizer grad_tol", o.grad_tol)?;
        positive("optimizer fd_step", o.fd_step)?;
        positive("optimizer init_scale", o.init_scale)?;
        if o.max_iter == 0 || o.memory == 0 {
            return usage("optimizer max_iter and memory must be positive");
        }
        match experiment {
            Experiment::Microcanonical => {
                self.require_system()?;
                self.runs.get_or_insert(200);
            }
            Experiment::Canonical => {
                self.require_system()?;
                self.runs.get_or_insert(200);
                let c = &self.constraint;
                match (c.beta_f, c.energy) {
                    (None, None) => return usage("canonical needs --betaf or --energy"),
                    (Some(_), Some(_)) => return usage("give either --betaf or --energy, not both"),
                    (Some(b), None) => positive("betaf", b)?,
                    (None, Some(e)) => finite("energy", e)?,
                }
                if c.lambda.is_none() && c.lambdas.is_none() {
                    return usage("canonical needs --lambda or --lambdas");
                }
                if let Some(l) = c.lambda {
                    non_negative("lambda", l)?;
                }
                for &l in c.lambdas.iter().flatten() {
                    non_negative("lambdas", l)?;
                }
            }
            Experiment::Grape => {
                self.require_system()?;
                let g = &self.grape;
                positive("grape total_time", g.total_time)?;
                positive("grape init_scale", g.init_scale)?;
                positive("grape grad_tol", g.grad_tol)?;
                if g.steps == 0 || g.max_iter == 0 {
                    return usage("grape steps and max_iter must be positive");
                }
                if !(g.target_fidelity > 0.0 && g.target_fidelity <= 1.0) {
                    return usage("grape target_fidelity must lie in (0, 1]");
                }
            }
            Experiment::Sweep => self.resolve_sweep()?,
        }
        if self.runs == Some(0) {
            return usage("runs must be at least 1");
        }
        Ok(self)
    }

    fn require_system(&mut self) -> Result<(), UsageError> {
        let Some(j) = self.system.j else {
            return usage("missing required --j");
        };
        if self.system.js.as_ref().is_some_and(|js| js.len() > 1) {
            return usage("this command takes a single --j");
        }
        self.system.js = None;
        spin("j", j)?;
        let Some(b) = self.system.beta0 else {
            return usage("missing required --beta0");
        };
        non_negative("beta0", b)
    }

    fn grid(&self) -> Result<Vec<f64>, UsageError> {
        let s = &self.sweep;
        if !(s.grid_min > 0.0 && s.grid_max > s.grid_min && s.grid_max.is_finite()) || s.grid_points < 2 {
            return usage("sweep grid needs 0 < grid_min < grid_max and grid_points ≥ 2");
        }
        Ok(log_grid(s.grid_min, s.grid_max, s.grid_points))
    }

    fn resolve_sweep(&mut self) -> Result<(), UsageError> {
        let Some(kind) = self.sweep.kind else {
            return usage("sweep needs --kind");
        };
        if self.sweep.beta0s.is_none() {
            self.sweep.beta0s = Some(self.grid()?);
        }
        for &b in self.sweep.beta0s.iter().flatten() {
            non_negative("beta0s", b)?;
        }
        match kind {
            SweepKind::Fig1 => {
                self.runs.get_or_insert(20);
                let js = self.system.js.get_or_insert_with(|| vec![1.0, 2.0, 3.0]);
                for &j in js.iter() {
                    spin("j", j)?;
                }
                self.system.j = None;
            }
            SweepKind::Fig4 | SweepKind::Fig5 => {
                self.runs.get_or_insert(100);
                let j = *self.system.j.get_or_insert(3.0);
                if self.system.js.as_ref().is_some_and(|js| js.len() > 1) {
                    return usage("grid sweeps take a single --j");
                }
                self.system.js = None;
                spin("j", j)?;
                let alpha = *self
                    .target
                    .alpha
                    .get_or_insert(if kind == SweepKind::Fig4 { 0.04 } else { 40.0 });
                positive("alpha", alpha)?;
                non_negative("lambda", *self.constraint.lambda.get_or_insert(10.0))?;
                if self.sweep.beta_fs.is_none() {
                    self.sweep.beta_fs = Some(self.grid()?);
                }
                for &b in self.sweep.beta_fs.iter().flatten() {
                    positive("beta_fs", b)?;
                }
            }
        }
        Ok(())
    }
}

fn check_tolerances(c: &CensusSection) -> Result<(), UsageError> {
    positive("value_tol", c.value_tol)?;
    positive("overlap_tol", c.overlap_tol)?;
    positive("energy_tol", c.energy_tol)
}

fn finite(name: &str, x: f64) -> Result<(), UsageError> {
    if x.is_finite() {
        Ok(())
    } else {
        usage(format!("{name} must be finite, got {x}"))
    }
}

fn positive(name: &str, x: f64) -> Result<(), UsageError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        usage(format!("{name} must be positive, got {x}"))
    }
}

fn non_negative(name: &str, x: f64) -> Result<(), UsageError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        usage(format!("{name} must be non-negative, got {x}"))
    }
}

fn spin(name: &str, j: f64) -> Result<(), UsageError> {
    let twice = 2.0 * j;
    if j > 0.0 && twice.fract() == 0.0 && twice <= 64.0 {
        Ok(())
    } else {
        usage(format!("{name} must be a positive multiple of 1/2, got {j}"))
    }
}
