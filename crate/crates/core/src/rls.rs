//! Online ARX identification by recursive least squares with variable-rate
//! forgetting driven by an F-test on windowed identification errors.
//!
//! The model is
//!
//! ```text
//! ŷ_k = −Σ_{i=1}^{n̂} F_i y_{k−i} + Σ_{i=1}^{n̂} G_i u_{k−i} = φ_k θ_k
//! ```
//!
//! with `θ = [vec[F_1 … F_n̂]; vec[G_1 … G_n̂]]` and
//! `φ_k = [−y_{k−1}ᵀ … −y_{k−n̂}ᵀ u_{k−1}ᵀ … u_{k−n̂}ᵀ] ⊗ I_p`.

use std::collections::VecDeque;

use nalgebra::Cholesky;

use crate::bocf::IdentifiedModel;
use crate::error::{Error, Result};
use crate::numerics::{f_inv_cdf, symmetrize, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct RlsConfig {
    /// Model order n̂.
    pub order: usize,
    /// Output dimension p.
    pub outputs: usize,
    /// Input dimension m.
    pub inputs: usize,
    pub theta0: Vector,
    pub psi0: Matrix,
    /// Numerator window τ_n.
    pub tau_n: usize,
    /// Denominator window τ_d.
    pub tau_d: usize,
    /// Forgetting gain η.
    pub eta: f64,
    /// Significance level α.
    pub alpha: f64,
    /// When false, identification starts at engagement: θ, Ψ and the error
    /// windows stay untouched while the loop is open.
    pub identify_during_open_loop: bool,
}

impl RlsConfig {
    pub fn num_params(&self) -> usize {
        self.order * self.outputs * (self.inputs + self.outputs)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.outputs;
        if self.order == 0 {
            return Err(Error::config("rls.order", "model order must be at least 1"));
        }
        if p == 0 || self.inputs == 0 {
            return Err(Error::config("rls", "input and output dimensions must be positive"));
        }
        let np = self.num_params();
        if self.theta0.len() != np {
            return Err(Error::config(
                "rls.theta0",
                format!("expected length {np}, got {}", self.theta0.len()),
            ));
        }
        if self.psi0.nrows() != np || self.psi0.ncols() != np {
            return Err(Error::config(
                "rls.psi0",
                format!("expected {np}x{np}, got {}x{}", self.psi0.nrows(), self.psi0.ncols()),
            ));
        }
        if self.theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("rls.theta0", "entries must be finite"));
        }
        let asym = (&self.psi0 - self.psi0.transpose()).amax();
        if asym > 1e-12 * self.psi0.amax().max(1.0) {
            return Err(Error::config("rls.psi0", "must be symmetric"));
        }
        if Cholesky::new(self.psi0.clone()).is_none() {
            return Err(Error::config("rls.psi0", "must be positive definite"));
        }
        if self.tau_n < p {
            return Err(Error::config("rls.tau_n", format!("must be at least p = {p}")));
        }
        if self.tau_d <= self.tau_n {
            return Err(Error::config("rls.tau_d", "must exceed tau_n"));
        }
        if self.tau_d <= p {
            return Err(Error::config("rls.tau_d", format!("must exceed p = {p}")));
        }
        if p > 1 && self.tau_d <= p + 3 {
            return Err(Error::config(
                "rls.tau_d",
                format!("must exceed p + 3 = {} for multi-output forgetting", p + 3),
            ));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("rls.eta", "must be nonnegative"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("rls.alpha", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Threshold `√F⁻¹(1 − α)` subtracted in the forgetting statistic.
    fn quantile_threshold(&self) -> Result<f64> {
        if self.alpha >= 1.0 {
            return Ok(0.0);
        }
        let p = self.outputs;
        let q = if p == 1 {
            f_inv_cdf(self.tau_n as f64, self.tau_d as f64, 1.0 - self.alpha)?
        } else {
            let (_, b, _) = multi_output_constants(p, self.tau_n, self.tau_d);
            f_inv_cdf((p * self.tau_n) as f64, b, 1.0 - self.alpha)?
        };
        Ok(q.sqrt())
    }
}

/// Constants `(a, b, c)` of the multi-output forgetting statistic.
pub fn multi_output_constants(p: usize, tau_n: usize, tau_d: usize) -> (f64, f64, f64) {
    let (p, tn, td) = (p as f64, tau_n as f64, tau_d as f64);
    let a = (tn + td - p - 1.0) * (td - 1.0) / ((td - p - 3.0) * (td - p));
    let b = 4.0 + (p * tn + 2.0) / (a - 1.0);
    let c = p * tn * (b - 2.0) / (b * (td - p - 1.0));
    (a, b, c)
}

/// The last `n̂` outputs and inputs, most recent first. Samples before the
/// start of the record read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IoHistory {
    order: usize,
    outputs: usize,
    inputs: usize,
    y: VecDeque<Vector>,
    u: VecDeque<Vector>,
}

impl IoHistory {
    pub fn new(order: usize, outputs: usize, inputs: usize) -> Self {
        IoHistory {
            order,
            outputs,
            inputs,
            y: VecDeque::with_capacity(order + 1),
            u: VecDeque::with_capacity(order + 1),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// Appends the newest sample pair.
    pub fn push(&mut self, y: &Vector, u: &Vector) -> Result<()> {
        if y.len() != self.outputs || u.len() != self.inputs {
            return Err(Error::Dimension(format!(
                "history sample has (y, u) lengths ({}, {}), expected ({}, {})",
                y.len(),
                u.len(),
                self.outputs,
                self.inputs
            )));
        }
        self.y.push_front(y.clone());
        self.u.push_front(u.clone());
        self.y.truncate(self.order);
        self.u.truncate(self.order);
        Ok(())
    }

    /// Output `lag` samples back from the newest (lag 0 is the newest).
    pub fn y(&self, lag: usize) -> Vector {
        self.y.get(lag).cloned().unwrap_or_else(|| Vector::zeros(self.outputs))
    }

    pub fn u(&self, lag: usize) -> Vector {
        self.u.get(lag).cloned().unwrap_or_else(|| Vector::zeros(self.inputs))
    }
}

/// Regressor `φ` for the step following the newest sample in `history`.
pub fn regressor(history: &IoHistory, order: usize, p: usize, m: usize) -> Result<Matrix> {
    if history.order() != order || history.outputs() != p || history.inputs() != m {
        return Err(Error::Dimension(format!(
            "history is (n̂={}, p={}, m={}), regressor asked for ({order}, {p}, {m})",
            history.order(),
            history.outputs(),
            history.inputs()
        )));
    }
    let row_len = order * (p + m);
    let mut row = Vec::with_capacity(row_len);
    for lag in 0..order {
        row.extend(history.y(lag).iter().map(|v| -v));
    }
    for lag in 0..order {
        row.extend(history.u(lag).iter().copied());
    }
    let mut phi = Matrix::zeros(p, row_len * p);
    for (j, &w) in row.iter().enumerate() {
        for r in 0..p {
            phi[(r, j * p + r)] = w;
        }
    }
    Ok(phi)
}

/// Un-vectorizes θ into the coefficient blocks `F_i` (p×p) and `G_i` (p×m).
pub fn extract_model(theta: &Vector, order: usize, p: usize, m: usize, step_tag: usize) -> Result<IdentifiedModel> {
    let nf = order * p * p;
    let ng = order * p * m;
    if theta.len() != nf + ng {
        return Err(Error::Dimension(format!(
            "θ has length {}, expected {}",
            theta.len(),
            nf + ng
        )));
    }
    let fblock = Matrix::from_column_slice(p, order * p, &theta.as_slice()[..nf]);
    let gblock = Matrix::from_column_slice(p, order * m, &theta.as_slice()[nf..]);
    let f = (0..order)
        .map(|i| fblock.columns(i * p, p).into_owned())
        .collect();
    let g = (0..order)
        .map(|i| gblock.columns(i * m, m).into_owned())
        .collect();
    IdentifiedModel::new(order, p, m, f, g, step_tag)
}

/// Inverse of [`extract_model`].
pub fn vectorize_model(model: &IdentifiedModel) -> Vector {
    let mut out = Vec::with_capacity(model.order * model.outputs * (model.outputs + model.inputs));
    for fi in &model.f {
        out.extend(fi.iter().copied());
    }
    for gi in &model.g {
        out.extend(gi.iter().copied());
    }
    Vector::from_vec(out)
}

/// Result of the forgetting-factor computation for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forgetting {
    pub beta: f64,
    /// The statistic `g` before clipping at zero, when it was computed.
    pub statistic: Option<f64>,
    /// True when the error statistics were degenerate and forgetting was
    /// suppressed.
    pub degenerate: bool,
}

fn window_covariance(samples: &[&Vector]) -> Matrix {
    let p = samples[0].len();
    let n = samples.len() as f64;
    let mean = samples.iter().fold(Vector::zeros(p), |acc, e| acc + *e) / n;
    let mut cov = Matrix::zeros(p, p);
    for e in samples {
        let d = *e - &mean;
        cov += &d * d.transpose();
    }
    cov / (n - 1.0)
}

/// Forgetting factor `β_k ≥ 1` from the trailing identification errors.
///
/// `errors` holds the most recent errors, newest last; `k` is the current
/// step and `threshold` is `√F⁻¹(1 − α)` for the configured windows.
pub fn forgetting_factor(errors: &VecDeque<Vector>, k: usize, config: &RlsConfig, threshold: f64) -> Forgetting {
    let none = Forgetting {
        beta: 1.0,
        statistic: None,
        degenerate: false,
    };
    let (tau_n, tau_d) = (config.tau_n, config.tau_d);
    if k < tau_d || errors.len() < tau_d + 1 {
        return none;
    }
    let len = errors.len();
    let long: Vec<&Vector> = errors.range(len - (tau_d + 1)..).collect();
    let short: Vec<&Vector> = errors.range(len - (tau_n + 1)..).collect();
    let degenerate = Forgetting {
        beta: 1.0,
        statistic: None,
        degenerate: true,
    };

    let g = if config.outputs == 1 {
        let var_d = window_covariance(&long)[(0, 0)];
        let var_n = window_covariance(&short)[(0, 0)];
        if !(var_d > 0.0) || !var_d.is_finite() || !var_n.is_finite() {
            return degenerate;
        }
        (var_n / var_d).sqrt() - threshold
    } else {
        let sigma_d = window_covariance(&long);
        let sigma_n = window_covariance(&short);
        let Some(chol) = Cholesky::new(sigma_d) else {
            return degenerate;
        };
        let ratio = chol.solve(&sigma_n.transpose()).transpose();
        let tr = ratio.trace();
        let (_, _, c) = multi_output_constants(config.outputs, tau_n, tau_d);
        let stat = tau_n as f64 / (c * tau_d as f64) * tr;
        if !stat.is_finite() || stat < 0.0 {
            return degenerate;
        }
        stat.sqrt() - threshold
    };
    Forgetting {
        beta: 1.0 + config.eta * g.max(0.0),
        statistic: Some(g),
        degenerate: false,
    }
}

/// Per-step diagnostics returned by [`RlsState::update`].
#[derive(Debug, Clone, PartialEq)]
pub struct RlsStep {
    /// Identification error `e_k(θ_k) = y_k − φ_k θ_k`.
    pub error: Vector,
    pub forgetting: Forgetting,
    /// Whether θ and Ψ were updated at this step.
    pub updated: bool,
}

#[derive(Debug, Clone)]
pub struct RlsState {
    config: RlsConfig,
    k: usize,
    /// Number of updates applied so far; the forgetting schedule runs on it.
    updates: usize,
    theta: Vector,
    psi: Matrix,
    errors: VecDeque<Vector>,
    history: IoHistory,
    threshold: f64,
}

impl RlsState {
    pub fn new(config: RlsConfig) -> Result<Self> {
        config.validate()?;
        let threshold = config.quantile_threshold()?;
        let history = IoHistory::new(config.order, config.outputs, config.inputs);
        Ok(RlsState {
            k: 0,
            updates: 0,
            theta: config.theta0.clone(),
            psi: config.psi0.clone(),
            errors: VecDeque::with_capacity(config.tau_d + 2),
            history,
            threshold,
            config,
        })
    }

    pub fn config(&self) -> &RlsConfig {
        &self.config
    }

    /// Index of the next sample to be processed.
    pub fn step(&self) -> usize {
        self.k
    }

    /// Number of samples that updated θ.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn history(&self) -> &IoHistory {
        &self.history
    }

    pub fn errors(&self) -> &VecDeque<Vector> {
        &self.errors
    }

    /// `√F⁻¹(1 − α)` used by the forgetting statistic.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Current estimate as coefficient blocks, tagged with the index of θ.
    pub fn model(&self) -> Result<IdentifiedModel> {
        let c = &self.config;
        extract_model(&self.theta, c.order, c.outputs, c.inputs, self.k)
    }

    /// Processes `y_k` together with the control `u_k` applied at the same
    /// step. θ and Ψ move to `θ_{k+1}`, `Ψ_{k+1}` unless `learn` is false;
    /// the input/output history always advances.
    pub fn update(&mut self, y: &Vector, u: &Vector, learn: bool) -> Result<RlsStep> {
        let c = &self.config;
        if y.len() != c.outputs || u.len() != c.inputs {
            return Err(Error::Dimension(format!(
                "RLS sample has (y, u) lengths ({}, {}), expected ({}, {})",
                y.len(),
                u.len(),
                c.outputs,
                c.inputs
            )));
        }
        let phi = regressor(&self.history, c.order, c.outputs, c.inputs)?;
        let error = y - &phi * &self.theta;
        let mut forgetting = Forgetting {
            beta: 1.0,
            statistic: None,
            degenerate: false,
        };
        if learn {
            self.errors.push_back(error.clone());
            while self.errors.len() > c.tau_d + 1 {
                self.errors.pop_front();
            }
            forgetting = forgetting_factor(&self.errors, self.updates, c, self.threshold);
            let (psi, theta) = rls_update(&self.psi, &self.theta, &phi, y, forgetting.beta)?;
            self.psi = psi;
            self.theta = theta;
            self.updates += 1;
        }
        self.history.push(y, u)?;
        self.k += 1;
        Ok(RlsStep {
            error,
            forgetting,
            updated: learn,
        })
    }
}

/// One RLS step with forgetting factor `β`:
///
/// ```text
/// Ψ⁺ = βΨ − βΨφᵀ(I/β + φΨφᵀ)⁻¹φΨ
/// θ⁺ = θ + Ψ⁺φᵀ(y − φθ)
/// ```
pub fn rls_update(psi: &Matrix, theta: &Vector, phi: &Matrix, y: &Vector, beta: f64) -> Result<(Matrix, Vector)> {
    let p = phi.nrows();
    let psi_phi_t = psi * phi.transpose();
    let mut inner = phi * &psi_phi_t;
    for i in 0..p {
        inner[(i, i)] += 1.0 / beta;
    }
    symmetrize(&mut inner);
    let chol = Cholesky::new(inner)
        .ok_or_else(|| Error::NotPositiveDefinite("RLS innovation matrix".into()))?;
    let gain_t = chol.solve(&psi_phi_t.transpose());
    let mut next_psi = (psi - &psi_phi_t * gain_t) * beta;
    symmetrize(&mut next_psi);
    let innovation = y - phi * theta;
    let next_theta = theta + &next_psi * (phi.transpose() * innovation);
    if next_theta.iter().any(|v| !v.is_finite()) || next_psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("RLS update".into()));
    }
    Ok((next_psi, next_theta))
}
