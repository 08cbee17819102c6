//! Lur'e plant, nonlinearity library, perturbation schedules and the
//! closed-loop PCAC driver.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::bocf::{build_realization, build_state, BocfRealization, IdentifiedModel};
use crate::bpre::{control, riccati_gain, saturate, BpreConfig, SaturationLimits};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, StateSpace, Vector};
use crate::rls::{RlsConfig, RlsState};
use crate::stability::AnalysisConfig;

/// States with `‖x‖∞` above this are treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarNonlinearity {
    Zero,
    Linear(f64),
    Tanh,
    /// `c1·y + c2·sin y`
    AffineSine { c1: f64, c2: f64 },
    /// A Gaussian-derivative bump plus a quadratic with linear tails of
    /// slopes `s_l` (below −0.4) and `s_h` (above 0.8).
    GaussianPlusPiecewise { s_l: f64, s_h: f64 },
    /// Piecewise-linear interpolation through `(x, y)` knots with strictly
    /// increasing `x`; the end segments are extended linearly.
    Table { x: Vec<f64>, y: Vec<f64> },
}

impl ScalarNonlinearity {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            ScalarNonlinearity::Zero => 0.0,
            ScalarNonlinearity::Linear(c) => c * y,
            ScalarNonlinearity::Tanh => y.tanh(),
            ScalarNonlinearity::AffineSine { c1, c2 } => c1 * y + c2 * y.sin(),
            ScalarNonlinearity::GaussianPlusPiecewise { s_l, s_h } => {
                let bump = y / (0.422 * (2.0 * PI).sqrt()) * (-y * y / 1.125).exp();
                let quad = if y <= -0.4 {
                    0.16 + s_l * (y + 0.4)
                } else if y < 0.8 {
                    y * y
                } else {
                    0.64 + s_h * (y - 0.8)
                };
                bump + quad
            }
            ScalarNonlinearity::Table { x, y: v } => {
                let n = x.len();
                let seg = match x.partition_point(|&xi| xi <= y) {
                    0 => 0,
                    i if i >= n => n - 2,
                    i => i - 1,
                };
                let t = (y - x[seg]) / (x[seg + 1] - x[seg]);
                v[seg] + t * (v[seg + 1] - v[seg])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ScalarNonlinearity::Table { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(Error::InvalidArgument(
                        "table nonlinearity needs at least two (x, y) knots of equal count".into(),
                    ));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument("table knots must be strictly increasing".into()));
                }
                if x.iter().chain(y).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("table nonlinearity".into()));
                }
            }
            ScalarNonlinearity::Linear(c) if !c.is_finite() => {
                return Err(Error::NonFinite("linear nonlinearity".into()))
            }
            ScalarNonlinearity::AffineSine { c1, c2 } if !(c1.is_finite() && c2.is_finite()) => {
                return Err(Error::NonFinite("affine-sine nonlinearity".into()))
            }
            ScalarNonlinearity::GaussianPlusPiecewise { s_l, s_h } if !(s_l.is_finite() && s_h.is_finite()) => {
                return Err(Error::NonFinite("piecewise slopes".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Static nonlinearity `γ: ℝᵖ → ℝᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// Channel `i` of the output is `γ_i(y_i)`, so `p = m`.
    Diagonal(Vec<ScalarNonlinearity>),
    /// Identically zero, with arbitrary dimensions.
    Zero { outputs: usize, inputs: usize },
}

impl Nonlinearity {
    pub fn scalar(f: ScalarNonlinearity) -> Self {
        Nonlinearity::Diagonal(vec![f])
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Nonlinearity::Diagonal(ch) => ch.len(),
            Nonlinearity::Zero { outputs, .. } => *outputs,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Nonlinearity::Diagonal(ch) => ch.len(),
            Nonlinearity::Zero { inputs, .. } => *inputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Nonlinearity::Diagonal(ch) = self {
            if ch.is_empty() {
                return Err(Error::InvalidArgument("nonlinearity needs at least one channel".into()));
            }
            for c in ch {
                c.validate()?;
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "nonlinearity expects {} outputs, got {}",
                self.input_dim(),
                y.len()
            )));
        }
        Ok(match self {
            Nonlinearity::Diagonal(ch) => Vector::from_iterator(ch.len(), ch.iter().zip(y.iter()).map(|(c, v)| c.eval(*v))),
            Nonlinearity::Zero { inputs, .. } => Vector::zeros(*inputs),
        })
    }

    /// `γ_{K_L}(y) = γ(y) + K_L y`, for square nonlinearities.
    pub fn eval_shifted(&self, y: &Vector, k_l: f64) -> Result<Vector> {
        if self.input_dim() != self.output_dim() {
            return Err(Error::Dimension("loop shift needs a square nonlinearity".into()));
        }
        Ok(self.eval(y)? + y * k_l)
    }
}

/// Impulsive perturbations `v_k`, zero at unlisted steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSchedule {
    dim: usize,
    impulses: BTreeMap<usize, Vector>,
}

impl PerturbationSchedule {
    pub fn new(dim: usize) -> Self {
        PerturbationSchedule {
            dim,
            impulses: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sets `v_k`, replacing any earlier entry at `k`.
    pub fn insert(&mut self, k: usize, v: Vector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "perturbation at step {k} has {} entries, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("perturbation at step {k}")));
        }
        self.impulses.insert(k, v);
        Ok(())
    }

    pub fn at(&self, k: usize) -> Vector {
        self.impulses.get(&k).cloned().unwrap_or_else(|| Vector::zeros(self.dim))
    }

    pub fn impulses(&self) -> &BTreeMap<usize, Vector> {
        &self.impulses
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LurePlant {
    ss: StateSpace,
    x: Vector,
}

impl LurePlant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, x0: Vector) -> Result<Self> {
        let ss = StateSpace::strictly_proper(a, b, c)?;
        if x0.len() != ss.order() {
            return Err(Error::Dimension(format!(
                "initial state has {} entries, plant order is {}",
                x0.len(),
                ss.order()
            )));
        }
        Ok(LurePlant { ss, x: x0 })
    }

    pub fn realization(&self) -> &StateSpace {
        &self.ss
    }

    pub fn state(&self) -> &Vector {
        &self.x
    }

    pub fn output(&self) -> Vector {
        &self.ss.c * &self.x
    }

    pub fn diverged(&self) -> bool {
        self.x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
    }

    /// Reads `y_k = C x_k`, then advances `x_{k+1} = A x_k + B(γ(y_k) + u_k + v_k)`.
    pub fn step(&mut self, u: &Vector, v: &Vector, gamma: &Nonlinearity) -> Result<Vector> {
        let m = self.ss.inputs();
        if u.len() != m || v.len() != m {
            return Err(Error::Dimension(format!("plant input must have {m} entries")));
        }
        let y = self.output();
        let g = gamma.eval(&y)?;
        if g.len() != m {
            return Err(Error::Dimension("nonlinearity output does not match plant input".into()));
        }
        self.x = &self.ss.a * &self.x + &self.ss.b * (g + u + v);
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Plant `(A, B, C)` with `D = 0`.
    pub plant: StateSpace,
    pub x0: Vector,
    pub nonlinearity: Nonlinearity,
    pub schedule: PerturbationSchedule,
    pub rls: RlsConfig,
    pub bpre: BpreConfig,
    pub limits: SaturationLimits,
    /// First step whose control is computed by the controller; before it `u = 0`.
    pub k_engage: usize,
    pub k_final: usize,
    pub analysis: AnalysisConfig,
}

impl SimulationConfig {
    pub fn outputs(&self) -> usize {
        self.plant.outputs()
    }

    pub fn inputs(&self) -> usize {
        self.plant.inputs()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.plant.order(), self.inputs(), self.outputs());
        if self.plant.d.iter().any(|&v| v != 0.0) {
            return Err(Error::config("plant.d", "plant must be strictly proper"));
        }
        if self.x0.len() != n {
            return Err(Error::config("plant.x0", format!("expected {n} entries, got {}", self.x0.len())));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("plant.x0", "must be finite"));
        }
        self.nonlinearity
            .validate()
            .map_err(|e| Error::config("nonlinearity", e.to_string()))?;
        if self.nonlinearity.input_dim() != p || self.nonlinearity.output_dim() != m {
            return Err(Error::config(
                "nonlinearity",
                format!("maps ℝ^{} → ℝ^{}, plant needs ℝ^{p} → ℝ^{m}", self.nonlinearity.input_dim(), self.nonlinearity.output_dim()),
            ));
        }
        if self.schedule.dim() != m {
            return Err(Error::config("perturbation", format!("entries must have {m} components")));
        }
        if self.rls.outputs != p || self.rls.inputs != m {
            return Err(Error::config("rls", "dimensions do not match the plant"));
        }
        self.rls.validate()?;
        let nm = self.rls.order * p;
        if self.bpre.state_dim() != nm || self.bpre.input_dim() != m {
            return Err(Error::config(
                "bpre",
                format!("weights must be {nm}×{nm} (R1, P_terminal) and {m}×{m} (R2)"),
            ));
        }
        self.bpre.validate().map_err(|e| Error::config("bpre", e.to_string()))?;
        self.limits.validate().map_err(|e| Error::config("limits", e.to_string()))?;
        if self.k_engage > self.k_final {
            return Err(Error::config("run.k_engage", "must not exceed run.k_final"));
        }
        self.analysis.validate(p, m)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub y: Vector,
    pub u_req: Vector,
    pub u: Vector,
    pub v: Vector,
    /// `‖θ_k‖₂`, the estimate available before `y_k` is processed.
    pub theta_norm: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outputs: usize,
    pub inputs: usize,
    pub records: Vec<StepRecord>,
    /// Step at which the plant state left the divergence bound, if any.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// RMS of the output over records with `k` in `[from, to)`.
    pub fn output_rms(&self, from: usize, to: usize) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for r in self.records.iter().filter(|r| r.k >= from && r.k < to) {
            acc += r.y.norm_squared();
            count += 1;
        }
        if count == 0 {
            return f64::NAN;
        }
        (acc / count as f64).sqrt()
    }
}

/// Controller state visible to an observer at step `k`: the model identified
/// from data through `y_k`, its realization and the gain `K_k` that produced
/// `u_k` (zero before engagement).
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub k: usize,
    pub model: &'a IdentifiedModel,
    pub realization: &'a BocfRealization,
    pub gain: &'a Matrix,
    pub rls: &'a RlsState,
}

pub fn simulate(config: &SimulationConfig) -> Result<Trajectory> {
    simulate_with_observer(config, |_| Ok(()))
}

/// Runs the closed loop for `k = 0..=k_final`, calling `observer` once per
/// step after the model update. Divergence stops the run and is reported in
/// the trajectory rather than as an error.
pub fn simulate_with_observer<F>(config: &SimulationConfig, mut observer: F) -> Result<Trajectory>
where
    F: FnMut(&Snapshot<'_>) -> Result<()>,
{
    config.validate()?;
    let (m, p) = (config.inputs(), config.outputs());
    let nm = config.rls.order * p;
    let mut plant = LurePlant::new(
        config.plant.a.clone(),
        config.plant.b.clone(),
        config.plant.c.clone(),
        config.x0.clone(),
    )?;
    let mut rls = RlsState::new(config.rls.clone())?;
    let mut u = Vector::zeros(m);
    let mut u_req = Vector::zeros(m);
    let mut gain = Matrix::zeros(m, nm);
    let mut records = Vec::with_capacity(config.k_final + 1);
    let mut diverged_at = None;

    for k in 0..=config.k_final {
        if plant.diverged() {
            diverged_at = Some(k);
            break;
        }
        let y = plant.output();
        let theta_norm = rls.theta().norm();
        let learn = config.rls.identify_during_open_loop || k >= config.k_engage;
        let step = rls.update(&y, &u, learn)?;
        let model = rls.model()?;
        let realization = build_realization(&model)?;
        let x_m = build_state(&model, rls.history())?;

        observer(&Snapshot {
            k,
            model: &model,
            realization: &realization,
            gain: &gain,
            rls: &rls,
        })?;

        let v = config.schedule.at(k);
        records.push(StepRecord {
            k,
            y: y.clone(),
            u_req: u_req.clone(),
            u: u.clone(),
            v: v.clone(),
            theta_norm,
            beta: step.forgetting.beta,
        });

        let (next_u_req, next_u) = if k + 1 >= config.k_engage {
            let x_next = realization.advance(&x_m, &u);
            gain = riccati_gain(&realization.a, &realization.b, &config.bpre)?;
            let req = control(&gain, &x_next)?;
            let applied = saturate(&req, &config.limits);
            (req, applied)
        } else {
            (Vector::zeros(m), Vector::zeros(m))
        };

        plant.step(&u, &v, &config.nonlinearity)?;
        u_req = next_u_req;
        u = next_u;
    }

    Ok(Trajectory {
        outputs: p,
        inputs: m,
        records,
        diverged_at,
    })
}
