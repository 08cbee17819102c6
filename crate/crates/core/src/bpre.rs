//! Receding-horizon gain from the backward-propagating Riccati equation, and
//! control-magnitude saturation.

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, symmetric_min_eig, symmetrize, Matrix, Vector};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BpreConfig {
    /// Horizon ℓ.
    pub horizon: usize,
    /// State weight R1.
    pub r1: Matrix,
    /// Control weight R2.
    pub r2: Matrix,
    /// Terminal weight P_{ℓ+1}.
    pub p_terminal: Matrix,
    /// Optional factor with `E1ᵀE1 = R1`.
    pub e1: Option<Matrix>,
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    ensure_finite(m, what)?;
    if !m.is_square() {
        return Err(Error::Dimension(format!("{what} must be square, got {:?}", m.shape())));
    }
    if (m - m.transpose()).amax() > SYMMETRY_TOL * (1.0 + m.amax()) {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
    }
    Ok(())
}

impl BpreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        check_symmetric(&self.r1, "R1")?;
        check_symmetric(&self.r2, "R2")?;
        check_symmetric(&self.p_terminal, "P_terminal")?;
        if self.r1.shape() != self.p_terminal.shape() {
            return Err(Error::Dimension("R1 and P_terminal must have the same size".into()));
        }
        if symmetric_min_eig(&self.r1) < -PSD_TOL {
            return Err(Error::NotPositiveDefinite("R1 must be positive semidefinite".into()));
        }
        if symmetric_min_eig(&self.p_terminal) < -PSD_TOL {
            return Err(Error::NotPositiveDefinite("P_terminal must be positive semidefinite".into()));
        }
        if self.r2.nrows() == 0 || self.r2.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("R2 must be positive definite".into()));
        }
        if let Some(e1) = &self.e1 {
            if e1.ncols() != self.r1.nrows() {
                return Err(Error::Dimension("E1 must have as many columns as R1".into()));
            }
            if (e1.transpose() * e1 - &self.r1).norm() > 1e-10 {
                return Err(Error::InvalidArgument("E1ᵀE1 does not reproduce R1".into()));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.r1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r2.nrows()
    }

    fn check_model(&self, a: &Matrix, b: &Matrix) -> Result<()> {
        let n = self.state_dim();
        if a.shape() != (n, n) || b.shape() != (n, self.input_dim()) {
            return Err(Error::Dimension(format!(
                "model (A {:?}, B {:?}) does not match weights (n={n}, m={})",
                a.shape(),
                b.shape(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Per-channel magnitude limits. Unbounded by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationLimits {
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for SaturationLimits {
    fn default() -> Self {
        SaturationLimits {
            u_min: f64::NEG_INFINITY,
            u_max: f64::INFINITY,
        }
    }
}

impl SaturationLimits {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        let limits = SaturationLimits { u_min, u_max };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_min.is_nan() || self.u_max.is_nan() || self.u_min >= self.u_max {
            return Err(Error::InvalidArgument(format!(
                "saturation limits need u_min < u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    pub fn is_unbounded(&self) -> bool {
        self.u_min == f64::NEG_INFINITY && self.u_max == f64::INFINITY
    }
}

/// `(R2 + BᵀPB)⁻¹ BᵀPA` by Cholesky.
fn feedback_term(a: &Matrix, b: &Matrix, p: &Matrix, r2: &Matrix) -> Result<Matrix> {
    let btp = b.transpose() * p;
    let mut inner = r2 + &btp * b;
    symmetrize(&mut inner);
    let chol = inner
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("R2 + BᵀPB".into()))?;
    Ok(chol.solve(&(btp * a)))
}

/// Gain and the Riccati iterates `P_{ℓ+1}, P_ℓ, …, P_2` in that order.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub gain: Matrix,
    pub iterates: Vec<Matrix>,
}

pub fn riccati_solution(a: &Matrix, b: &Matrix, config: &BpreConfig) -> Result<RiccatiSolution> {
    config.check_model(a, b)?;
    let mut iterates = Vec::with_capacity(config.horizon);
    let mut p = config.p_terminal.clone();
    for _ in (2..=config.horizon).rev() {
        iterates.push(p.clone());
        p = riccati_step(a, b, &p, config)?;
    }
    let gain = -feedback_term(a, b, &p, &config.r2)?;
    iterates.push(p);
    Ok(RiccatiSolution { gain, iterates })
}

/// One backward step `P ← Aᵀ P (A − BΓ) + R1`.
fn riccati_step(a: &Matrix, b: &Matrix, p: &Matrix, config: &BpreConfig) -> Result<Matrix> {
    let gamma = feedback_term(a, b, p, &config.r2)?;
    let mut next = a.transpose() * p * (a - b * gamma) + &config.r1;
    symmetrize(&mut next);
    ensure_finite(&next, "Riccati iterate")?;
    Ok(next)
}

/// First-move gain `K` of the horizon-ℓ problem, so that `u_req = K x_m`.
pub fn riccati_gain(a: &Matrix, b: &Matrix, config: &BpreConfig) -> Result<Matrix> {
    config.check_model(a, b)?;
    let mut p = config.p_terminal.clone();
    for _ in (2..=config.horizon).rev() {
        p = riccati_step(a, b, &p, config)?;
    }
    Ok(-feedback_term(a, b, &p, &config.r2)?)
}

pub fn control(gain: &Matrix, x: &Vector) -> Result<Vector> {
    if gain.ncols() != x.len() {
        return Err(Error::Dimension(format!(
            "gain has {} columns, state has {} entries",
            gain.ncols(),
            x.len()
        )));
    }
    Ok(gain * x)
}

pub fn saturate(u: &Vector, limits: &SaturationLimits) -> Vector {
    u.map(|v| v.clamp(limits.u_min, limits.u_max))
}

/// `½Σⱼ(xⱼᵀR1xⱼ + uⱼᵀR2uⱼ) + ½x_{ℓ+1}ᵀP_{ℓ+1}x_{ℓ+1}` along the prediction
/// model started at `x_init`.
pub fn horizon_cost(a: &Matrix, b: &Matrix, config: &BpreConfig, x_init: &Vector, controls: &[Vector]) -> Result<f64> {
    config.check_model(a, b)?;
    if controls.len() != config.horizon {
        return Err(Error::Dimension(format!(
            "expected {} controls, got {}",
            config.horizon,
            controls.len()
        )));
    }
    if x_init.len() != config.state_dim() {
        return Err(Error::Dimension("initial state does not match R1".into()));
    }
    let mut x = x_init.clone();
    let mut cost = 0.0;
    for u in controls {
        if u.len() != config.input_dim() {
            return Err(Error::Dimension("control does not match R2".into()));
        }
        cost += x.dot(&(&config.r1 * &x)) + u.dot(&(&config.r2 * u));
        x = a * &x + b * u;
    }
    cost += x.dot(&(&config.p_terminal * &x));
    Ok(0.5 * cost)
}
