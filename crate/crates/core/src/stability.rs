//! Frozen-time absolute-stability certificates for the PCAC closed loop:
//! the discrete-time circle criterion and the Tsypkin criterion.
//!
//! At step `k` the identified model and gain define a linear controller
//! `G_c`. Closing it around the linear part `G` of the plant gives the
//! modified Lur'e system `G̃ = G (I − G_c G)⁻¹` in feedback with the original
//! nonlinearity, and the certificates are evaluated on `G̃`.
//!
//! Spectral radii are taken from the assembled realizations without
//! minimal-realization reduction, so uncontrollable or unobservable modes can
//! only make a verdict more conservative.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::bocf::{BocfRealization, IdentifiedModel};
use crate::error::{Error, Result};
use crate::lure::{simulate_with_observer, Nonlinearity, SimulationConfig, Trajectory};
use crate::numerics::{
    frequency_grid, hermitian_asymmetry, hermitian_min_eig, observability_rank, spectral_radius, symmetric_min_eig,
    FrequencySweep, Matrix, StateSpace, Vector,
};

/// Default number of frequency points on `[0, π]`.
pub const DEFAULT_GRID_SIZE: usize = 2048;
/// `|ζ₁|` must exceed this for the Tsypkin determinant condition.
pub const ZETA1_TOL: f64 = 1e-10;
/// Largest positive value of the sector quadratic form still counted as inside.
pub const SECTOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRealization {
    pub a_c: Matrix,
    pub b_c: Matrix,
    pub c_c: Matrix,
    pub f_k: Matrix,
    pub k: Matrix,
}

/// `A_c = A_m − F_k C_m + B_m K`, `B_c = F_k`, `C_c = K` with
/// `F_k = [−F_1; …; −F_n̂]`.
pub fn controller_realization(
    realization: &BocfRealization,
    model: &IdentifiedModel,
    gain: &Matrix,
) -> Result<ControllerRealization> {
    let nm = realization.state_dim();
    if gain.shape() != (realization.b.ncols(), nm) {
        return Err(Error::Dimension(format!(
            "gain is {:?}, expected {}×{nm}",
            gain.shape(),
            realization.b.ncols()
        )));
    }
    let f_k = model.output_injection();
    if f_k.nrows() != nm {
        return Err(Error::Dimension("model does not match realization".into()));
    }
    let a_c = &realization.a - &f_k * &realization.c + &realization.b * gain;
    Ok(ControllerRealization {
        a_c,
        b_c: f_k.clone(),
        c_c: gain.clone(),
        f_k,
        k: gain.clone(),
    })
}

/// Linear part `(Ã, B̃, C̃)` of the modified Lur'e system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedLure {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl ModifiedLure {
    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::strictly_proper(self.a.clone(), self.b.clone(), self.c.clone())
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// `Ã = [[A, B C_c], [B_c C, A_c]]`, `B̃ = [B; 0]`, `C̃ = [C, 0]`.
pub fn modified_lure(plant: &StateSpace, ctrl: &ControllerRealization) -> Result<ModifiedLure> {
    let (n, m, p) = (plant.order(), plant.inputs(), plant.outputs());
    let nc = ctrl.a_c.nrows();
    if ctrl.c_c.shape() != (m, nc) || ctrl.b_c.shape() != (nc, p) {
        return Err(Error::Dimension(format!(
            "controller (B_c {:?}, C_c {:?}) does not fit plant (p={p}, m={m})",
            ctrl.b_c.shape(),
            ctrl.c_c.shape()
        )));
    }
    let dim = n + nc;
    let mut a = Matrix::zeros(dim, dim);
    a.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a.view_mut((0, n), (n, nc)).copy_from(&(&plant.b * &ctrl.c_c));
    a.view_mut((n, 0), (nc, n)).copy_from(&(&ctrl.b_c * &plant.c));
    a.view_mut((n, n), (nc, nc)).copy_from(&ctrl.a_c);
    let mut b = Matrix::zeros(dim, m);
    b.view_mut((0, 0), (n, m)).copy_from(&plant.b);
    let mut c = Matrix::zeros(p, dim);
    c.view_mut((0, 0), (p, n)).copy_from(&plant.c);
    Ok(ModifiedLure { a, b, c })
}

/// Realizes `G̃ / (I + K_L G̃)` as `(Ã − B̃ K_L C̃, B̃, C̃)`.
pub fn loop_transform(tilde: &ModifiedLure, k_l: f64) -> Result<ModifiedLure> {
    if tilde.inputs() != tilde.outputs() {
        return Err(Error::Dimension("loop transformation needs m = p".into()));
    }
    Ok(ModifiedLure {
        a: &tilde.a - &tilde.b * &tilde.c * k_l,
        b: tilde.b.clone(),
        c: tilde.c.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpec {
    pub k1: Matrix,
    pub k2: Matrix,
    /// Tsypkin sector bound; defaults to `K2 + K_L I`.
    pub kappa: Option<Matrix>,
    pub k_l: f64,
    pub n: Matrix,
}

impl SectorSpec {
    /// Sector `[K1, K2]` with `K_L = 0` and `N = 0.1 I`.
    pub fn new(k1: Matrix, k2: Matrix) -> Self {
        let m = k1.nrows();
        SectorSpec {
            k1,
            k2,
            kappa: None,
            k_l: 0.0,
            n: Matrix::identity(m, m) * 0.1,
        }
    }

    pub fn kappa(&self) -> Matrix {
        match &self.kappa {
            Some(k) => k.clone(),
            None => {
                let m = self.k2.nrows();
                &self.k2 + Matrix::identity(m, self.k2.ncols()) * self.k_l
            }
        }
    }

    pub fn validate(&self, p: usize, m: usize) -> Result<()> {
        if self.k1.shape() != (m, p) || self.k2.shape() != (m, p) {
            return Err(Error::config("analysis.k1", format!("K1 and K2 must be {m}×{p}")));
        }
        if self.k1.iter().chain(self.k2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("analysis.k1", "sector bounds must be finite"));
        }
        let diff = &self.k2 - &self.k1;
        if m != p || (&diff - diff.transpose()).amax() > 1e-12 || diff.cholesky().is_none() {
            return Err(Error::config("analysis.k2", "K2 − K1 must be symmetric positive definite"));
        }
        if !self.k_l.is_finite() {
            return Err(Error::config("analysis.k_l", "must be finite"));
        }
        if self.n.shape() != (m, m) {
            return Err(Error::config("analysis.n", format!("must be {m}×{m}")));
        }
        for i in 0..m {
            for j in 0..m {
                let v = self.n[(i, j)];
                if (i == j && !(v > 0.0 && v.is_finite())) || (i != j && v != 0.0) {
                    return Err(Error::config("analysis.n", "must be diagonal with positive entries"));
                }
            }
        }
        let kappa = self.kappa();
        if kappa.shape() != (m, m) {
            return Err(Error::config("analysis.kappa", format!("must be {m}×{m}")));
        }
        if kappa.iter().any(|v| !v.is_finite()) || kappa.try_inverse().is_none() {
            return Err(Error::config("analysis.kappa", "must be finite and nonsingular"));
        }
        Ok(())
    }
}

/// Steps at which certificates are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoints {
    None,
    All,
    /// Multiples of the stride, plus the final step.
    Every(usize),
    List(BTreeSet<usize>),
}

impl Checkpoints {
    pub fn contains(&self, k: usize, k_final: usize) -> bool {
        match self {
            Checkpoints::None => false,
            Checkpoints::All => true,
            Checkpoints::Every(s) => k.is_multiple_of(*s) || k == k_final,
            Checkpoints::List(set) => set.contains(&k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub sector: SectorSpec,
    pub grid_size: usize,
    pub checkpoints: Checkpoints,
}

impl AnalysisConfig {
    pub fn validate(&self, p: usize, m: usize) -> Result<()> {
        self.sector.validate(p, m)?;
        if self.grid_size < 2 {
            return Err(Error::config("analysis.grid", "need at least two frequency points"));
        }
        if matches!(self.checkpoints, Checkpoints::Every(0)) {
            return Err(Error::config("analysis.checkpoints", "stride must be positive"));
        }
        Ok(())
    }
}

/// Minimum over the grid of `λ_min(M(e^{jψ}) + M(e^{jψ})ᴴ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMinimum {
    pub value: f64,
    /// Grid points skipped because the resolvent was singular there.
    pub skipped: usize,
    pub max_asymmetry: f64,
}

pub fn hermitian_sweep(ss: &StateSpace, grid_size: usize) -> Result<SweepMinimum> {
    let sweep = FrequencySweep::new(ss);
    let mut value = f64::INFINITY;
    let mut skipped = 0;
    let mut max_asymmetry: f64 = 0.0;
    for psi in frequency_grid(grid_size) {
        let m = match sweep.eval(psi) {
            Ok(m) => m,
            Err(Error::SingularResolvent(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let form = &m + m.adjoint();
        max_asymmetry = max_asymmetry.max(hermitian_asymmetry(&form));
        value = value.min(hermitian_min_eig(&form)?);
    }
    if skipped == grid_size {
        value = f64::NAN;
    }
    Ok(SweepMinimum {
        value,
        skipped,
        max_asymmetry,
    })
}

/// `H = (I − K2 G̃)(I − K1 G̃)⁻¹` as `(Ã + B̃K1C̃, B̃, (K1 − K2)C̃, I)`.
pub fn circle_realization(tilde: &ModifiedLure, k1: &Matrix, k2: &Matrix) -> Result<StateSpace> {
    let m = tilde.inputs();
    StateSpace::new(
        &tilde.a + &tilde.b * k1 * &tilde.c,
        tilde.b.clone(),
        (k1 - k2) * &tilde.c,
        Matrix::identity(m, m),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub skipped: usize,
    pub max_asymmetry: f64,
}

pub fn circle_criterion(tilde: &ModifiedLure, k1: &Matrix, k2: &Matrix, grid_size: usize) -> Result<CircleCertificate> {
    let h = circle_realization(tilde, k1, k2)?;
    let alpha = spectral_radius(&h.a)?;
    let sweep = hermitian_sweep(&h, grid_size)?;
    Ok(CircleCertificate {
        alpha,
        beta: sweep.value,
        skipped: sweep.skipped,
        max_asymmetry: sweep.max_asymmetry,
    })
}

/// `L_N(q) = κ⁻¹ − [I + (1 − q⁻¹)N] G̃_{K_L}(q)`, realized by appending a
/// one-step delay of `C̃x` to the state.
pub fn tsypkin_realization(tilde_kl: &ModifiedLure, kappa: &Matrix, n: &Matrix) -> Result<StateSpace> {
    let (nx, m, p) = (tilde_kl.order(), tilde_kl.inputs(), tilde_kl.outputs());
    if m != p || kappa.shape() != (m, m) || n.shape() != (m, m) {
        return Err(Error::Dimension("Tsypkin realization needs square κ, N and m = p".into()));
    }
    let kappa_inv = kappa
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("κ".into()))?;
    let dim = nx + p;
    let mut a = Matrix::zeros(dim, dim);
    a.view_mut((0, 0), (nx, nx)).copy_from(&tilde_kl.a);
    a.view_mut((nx, 0), (p, nx)).copy_from(&tilde_kl.c);
    let mut b = Matrix::zeros(dim, m);
    b.view_mut((0, 0), (nx, m)).copy_from(&tilde_kl.b);
    let mut c = Matrix::zeros(p, dim);
    c.view_mut((0, 0), (p, nx))
        .copy_from(&(-(Matrix::identity(p, p) + n) * &tilde_kl.c));
    c.view_mut((0, nx), (p, p)).copy_from(n);
    StateSpace::new(a, b, c, kappa_inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsypkinCertificate {
    /// `det(C̃ Ã_{K_L}⁻¹ B̃)`; NaN when `Ã_{K_L}` is singular.
    pub zeta1: f64,
    pub zeta2: usize,
    /// Rank `ζ₂` must reach, `n + n̂p`.
    pub zeta2_required: usize,
    pub zeta3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub skipped: usize,
    pub max_asymmetry: f64,
}

pub fn tsypkin_criterion(tilde_kl: &ModifiedLure, kappa: &Matrix, n: &Matrix, grid_size: usize) -> Result<TsypkinCertificate> {
    let ln = tsypkin_realization(tilde_kl, kappa, n)?;
    let required = tilde_kl.order();
    let (zeta1, zeta2) = match tilde_kl.a.clone().try_inverse() {
        Some(inv) => {
            let zeta1 = (&tilde_kl.c * &inv * &tilde_kl.b).determinant();
            let nc = n * &tilde_kl.c;
            let c_obs = &tilde_kl.c + &nc - &nc * &inv;
            (zeta1, observability_rank(&tilde_kl.a, &c_obs)?)
        }
        None => (f64::NAN, 0),
    };
    let zeta3 = symmetric_min_eig(&(&ln.d + ln.d.transpose()));
    let alpha = spectral_radius(&ln.a)?;
    let sweep = hermitian_sweep(&ln, grid_size)?;
    Ok(TsypkinCertificate {
        zeta1,
        zeta2,
        zeta2_required: required,
        zeta3,
        alpha,
        beta: sweep.value,
        skipped: sweep.skipped,
        max_asymmetry: sweep.max_asymmetry,
    })
}

pub fn circle_pass(alpha: f64, beta: f64) -> bool {
    alpha < 1.0 && beta > 0.0
}

pub fn tsypkin_pass(zeta1: f64, zeta2: usize, zeta2_required: usize, zeta3: f64, alpha: f64, beta: f64) -> bool {
    zeta1.abs() > ZETA1_TOL && zeta2 == zeta2_required && zeta3 > 0.0 && alpha < 1.0 && beta > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub k: usize,
    pub alpha_cc: f64,
    pub beta_cc: f64,
    pub cc_pass: bool,
    pub zeta1: f64,
    pub zeta2: usize,
    pub zeta2_required: usize,
    pub zeta3_min_eig: f64,
    pub alpha_tc: f64,
    pub beta_tc: f64,
    pub tc_pass: bool,
    pub grid_size: usize,
    pub skipped_points: usize,
    pub max_asymmetry: f64,
}

impl StabilityReport {
    pub fn from_certificates(k: usize, cc: &CircleCertificate, tc: &TsypkinCertificate, grid_size: usize) -> Self {
        StabilityReport {
            k,
            alpha_cc: cc.alpha,
            beta_cc: cc.beta,
            cc_pass: circle_pass(cc.alpha, cc.beta),
            zeta1: tc.zeta1,
            zeta2: tc.zeta2,
            zeta2_required: tc.zeta2_required,
            zeta3_min_eig: tc.zeta3,
            alpha_tc: tc.alpha,
            beta_tc: tc.beta,
            tc_pass: tsypkin_pass(tc.zeta1, tc.zeta2, tc.zeta2_required, tc.zeta3, tc.alpha, tc.beta),
            grid_size,
            skipped_points: cc.skipped + tc.skipped,
            max_asymmetry: cc.max_asymmetry.max(tc.max_asymmetry),
        }
    }

    /// The stored pass flags agree with the stored scalars.
    pub fn is_consistent(&self) -> bool {
        self.cc_pass == circle_pass(self.alpha_cc, self.beta_cc)
            && self.tc_pass
                == tsypkin_pass(
                    self.zeta1,
                    self.zeta2,
                    self.zeta2_required,
                    self.zeta3_min_eig,
                    self.alpha_tc,
                    self.beta_tc,
                )
    }
}

/// Controller data frozen at one step.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub k: usize,
    pub model: IdentifiedModel,
    pub realization: BocfRealization,
    pub gain: Matrix,
}

pub fn analyze_checkpoint(plant: &StateSpace, cp: &Checkpoint, analysis: &AnalysisConfig) -> Result<StabilityReport> {
    let ctrl = controller_realization(&cp.realization, &cp.model, &cp.gain)?;
    let tilde = modified_lure(plant, &ctrl)?;
    let sector = &analysis.sector;
    let cc = circle_criterion(&tilde, &sector.k1, &sector.k2, analysis.grid_size)?;
    let tilde_kl = loop_transform(&tilde, sector.k_l)?;
    let tc = tsypkin_criterion(&tilde_kl, &sector.kappa(), &sector.n, analysis.grid_size)?;
    Ok(StabilityReport::from_certificates(cp.k, &cc, &tc, analysis.grid_size))
}

#[derive(Debug, Clone)]
pub struct AnalysisRun {
    pub trajectory: Trajectory,
    /// One report per checkpoint, ordered by step.
    pub reports: Vec<StabilityReport>,
}

/// Simulates the closed loop, then evaluates both certificates at every
/// configured checkpoint in parallel.
pub fn run_analysis(config: &SimulationConfig) -> Result<AnalysisRun> {
    let mut checkpoints = Vec::new();
    let trajectory = simulate_with_observer(config, |snap| {
        if config.analysis.checkpoints.contains(snap.k, config.k_final) {
            checkpoints.push(Checkpoint {
                k: snap.k,
                model: snap.model.clone(),
                realization: snap.realization.clone(),
                gain: snap.gain.clone(),
            });
        }
        Ok(())
    })?;
    let reports = checkpoints
        .par_iter()
        .map(|cp| analyze_checkpoint(&config.plant, cp, &config.analysis))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisRun { trajectory, reports })
}

/// Probe points on `[lo, hi]ᵖ`: a tensor grid with about `total` points.
pub fn probe_grid(p: usize, lo: f64, hi: f64, total: usize) -> Vec<Vector> {
    if p == 0 || total == 0 {
        return Vec::new();
    }
    let per_axis = ((total as f64).powf(1.0 / p as f64).round() as usize).max(2);
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
        .collect();
    let count = per_axis.pow(p as u32);
    (0..count)
        .map(|mut idx| {
            Vector::from_fn(p, |_, _| {
                let v = axis[idx % per_axis];
                idx /= per_axis;
                v
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorCheck {
    pub pass: bool,
    /// Largest value of `[γ(y) − K1y]ᵀ[γ(y) − K2y]` over the probes.
    pub worst: f64,
}

pub fn sector_check(gamma: &Nonlinearity, k1: &Matrix, k2: &Matrix, probes: &[Vector]) -> Result<SectorCheck> {
    let mut worst = f64::NEG_INFINITY;
    for y in probes {
        let g = gamma.eval(y)?;
        let v = (&g - k1 * y).dot(&(&g - k2 * y));
        worst = worst.max(v);
    }
    Ok(SectorCheck {
        pass: worst <= SECTOR_TOL,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmisbCheck {
    pub pass: bool,
    pub monotone: bool,
    /// Largest value of `γ_{K_L}(y)ᵀ[γ_{K_L}(y) − κy]` over the probes.
    pub worst: f64,
}

/// Checks that `γ_{K_L}` is diagonal, strictly increasing per channel over the
/// probe coordinates, and in the sector `[0, κ]`.
pub fn dmisb_check(gamma: &Nonlinearity, k_l: f64, kappa: &Matrix, probes: &[Vector]) -> Result<DmisbCheck> {
    let channels = match gamma {
        Nonlinearity::Diagonal(ch) => ch,
        Nonlinearity::Zero { .. } => {
            return Err(Error::InvalidArgument("DMISB check needs a diagonal nonlinearity".into()))
        }
    };
    let p = channels.len();
    let mut monotone = true;
    for (i, ch) in channels.iter().enumerate() {
        let mut coords: Vec<f64> = probes.iter().map(|y| y[i]).collect();
        coords.sort_by(|a, b| a.total_cmp(b));
        coords.dedup();
        let values: Vec<f64> = coords.iter().map(|&y| ch.eval(y) + k_l * y).collect();
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            monotone = false;
        }
    }
    if kappa.shape() != (p, p) {
        return Err(Error::Dimension(format!("κ must be {p}×{p}")));
    }
    let mut worst = f64::NEG_INFINITY;
    for y in probes {
        let g = gamma.eval_shifted(y, k_l)?;
        worst = worst.max(g.dot(&(&g - kappa * y)));
    }
    Ok(DmisbCheck {
        pass: monotone && worst <= SECTOR_TOL,
        monotone,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bocf::build_realization;
    use crate::lure::ScalarNonlinearity;
    use crate::numerics::freq_response;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn m1(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn unit_delay() -> ModifiedLure {
        ModifiedLure {
            a: m1(0.0),
            b: m1(1.0),
            c: m1(1.0),
        }
    }

    fn scalar_model(f: &[f64], g: &[f64]) -> IdentifiedModel {
        IdentifiedModel::new(f.len(), 1, 1, f.iter().map(|v| m1(*v)).collect(), g.iter().map(|v| m1(*v)).collect(), 0).unwrap()
    }

    #[test]
    fn controller_with_zero_gain_and_model() {
        let model = scalar_model(&[0.0, 0.0], &[0.3, 0.1]);
        let real = build_realization(&model).unwrap();
        let ctrl = controller_realization(&real, &model, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(ctrl.a_c, real.a);
        assert_eq!(ctrl.b_c, Matrix::zeros(2, 1));
        assert_eq!(ctrl.c_c, Matrix::zeros(1, 2));
    }

    #[test]
    fn scalar_controller_substitution() {
        let (f, g, k0) = (0.4, 1.5, -0.2);
        let model = scalar_model(&[f], &[g]);
        let real = build_realization(&model).unwrap();
        let ctrl = controller_realization(&real, &model, &m1(k0)).unwrap();
        assert_abs_diff_eq!(ctrl.a_c[(0, 0)], g * k0, epsilon = 1e-15);
        assert_eq!(ctrl.b_c[(0, 0)], -f);
        assert_eq!(ctrl.a_c, &real.a - &ctrl.f_k * &real.c + &real.b * &ctrl.k);
    }

    #[test]
    fn open_controller_loop_is_block_diagonal() {
        let plant = StateSpace::strictly_proper(
            Matrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        let ctrl = ControllerRealization {
            a_c: m1(0.3),
            b_c: m1(0.0),
            c_c: m1(0.0),
            f_k: m1(0.0),
            k: m1(0.0),
        };
        let t = modified_lure(&plant, &ctrl).unwrap();
        assert_eq!(t.order(), 3);
        assert_eq!(t.a.view((0, 0), (2, 2)), plant.a);
        assert_eq!(t.a[(2, 2)], 0.3);
        assert_eq!(t.a.view((0, 2), (2, 1)), Matrix::zeros(2, 1));
        assert_eq!(t.a.view((2, 0), (1, 2)), Matrix::zeros(1, 2));
    }

    #[test]
    fn loop_shift_moves_scalar_pole() {
        let t = loop_transform(&unit_delay(), 0.3).unwrap();
        assert_abs_diff_eq!(t.a[(0, 0)], -0.3, epsilon = 1e-15);
        assert_eq!(loop_transform(&unit_delay(), 0.0).unwrap(), unit_delay());
        let rect = ModifiedLure {
            a: m1(0.0),
            b: Matrix::zeros(1, 2),
            c: m1(1.0),
        };
        assert!(loop_transform(&rect, 0.1).is_err());
    }

    #[test]
    fn circle_on_zero_input_gives_identity() {
        let t = ModifiedLure {
            a: Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, -0.7]),
            b: Matrix::zeros(2, 1),
            c: Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        };
        let cc = circle_criterion(&t, &m1(0.0), &m1(1.0), 64).unwrap();
        assert_abs_diff_eq!(cc.alpha, 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.beta, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn circle_on_unit_delay() {
        // H(q) = 1 − 1/q, so Re H = 1 − cos ψ, which vanishes at ψ = 0.
        let cc = circle_criterion(&unit_delay(), &m1(0.0), &m1(1.0), 257).unwrap();
        assert_eq!(cc.alpha, 0.0);
        assert_abs_diff_eq!(cc.beta, 0.0, epsilon = 1e-14);
        assert!(!circle_pass(cc.alpha, cc.beta));
    }

    #[test]
    fn tsypkin_on_zero_system() {
        let t = ModifiedLure {
            a: m1(0.5),
            b: m1(0.0),
            c: m1(1.0),
        };
        let tc = tsypkin_criterion(&t, &m1(1.0), &m1(0.1), 64).unwrap();
        assert_eq!(tc.zeta3, 2.0);
        assert_abs_diff_eq!(tc.beta, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tc.alpha, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tsypkin_on_unit_delay_matches_polynomial() {
        // L_N(q) = 1 − (1 + ν)/q + ν/q².
        let nu = 0.3;
        let ln = tsypkin_realization(&unit_delay(), &m1(1.0), &m1(nu)).unwrap();
        assert_eq!(spectral_radius(&ln.a).unwrap(), 0.0);
        for psi in frequency_grid(33) {
            let q = Complex64::new(psi.cos(), psi.sin());
            let direct = Complex64::new(1.0, 0.0) - (1.0 + nu) / q + nu / (q * q);
            let got = freq_response(&ln, psi).unwrap()[(0, 0)];
            assert!((got - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_closed_loop_flags_zeta1() {
        let t = ModifiedLure {
            a: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            c: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        };
        let tc = tsypkin_criterion(&t, &m1(1.0), &m1(0.1), 16).unwrap();
        assert!(tc.zeta1.is_nan());
        assert!(!tsypkin_pass(tc.zeta1, tc.zeta2, tc.zeta2_required, tc.zeta3, tc.alpha, tc.beta));
    }

    #[test]
    fn unit_circle_pole_is_skipped() {
        let t = ModifiedLure {
            a: m1(1.0),
            b: m1(1.0),
            c: m1(1.0),
        };
        let cc = circle_criterion(&t, &m1(0.0), &m1(1.0), 16).unwrap();
        assert_eq!(cc.skipped, 1);
        assert!(cc.beta.is_finite());
    }

    #[test]
    fn sector_checks() {
        let probes = probe_grid(1, -10.0, 10.0, 1001);
        let tanh = Nonlinearity::scalar(ScalarNonlinearity::Tanh);
        assert!(sector_check(&tanh, &m1(0.0), &m1(1.0), &probes).unwrap().pass);
        let twice = Nonlinearity::scalar(ScalarNonlinearity::Linear(2.0));
        let res = sector_check(&twice, &m1(0.0), &m1(1.0), &probes).unwrap();
        assert!(!res.pass && res.worst > 0.0);
    }

    #[test]
    fn dmisb_checks() {
        let probes = probe_grid(1, -PI, PI, 501);
        let lin = Nonlinearity::scalar(ScalarNonlinearity::Linear(1.0));
        assert!(dmisb_check(&lin, 0.0, &m1(2.0), &probes).unwrap().pass);
        let tanh = Nonlinearity::scalar(ScalarNonlinearity::Tanh);
        let wide = probe_grid(1, -20.0, 20.0, 2001);
        assert!(dmisb_check(&tanh, 0.1, &m1(1.1), &wide).unwrap().monotone);
        let sine = Nonlinearity::scalar(ScalarNonlinearity::AffineSine { c1: 0.0, c2: 1.0 });
        assert!(!dmisb_check(&sine, 0.0, &m1(1.0), &probes).unwrap().monotone);
    }

    #[test]
    fn probe_grid_shape() {
        let g = probe_grid(2, -1.0, 1.0, 10_000);
        assert_eq!(g.len(), 10_000);
        assert!(g.iter().all(|v| v.len() == 2 && v.amax() <= 1.0));
        assert_eq!(probe_grid(1, 0.0, 1.0, 11)[10][0], 1.0);
    }

    #[test]
    fn sector_spec_validation() {
        let mut s = SectorSpec::new(m1(0.0), m1(1.0));
        assert!(s.validate(1, 1).is_ok());
        assert_eq!(s.kappa(), m1(1.0));
        s.k_l = 0.5;
        assert_eq!(s.kappa(), m1(1.5));
        s.n = m1(0.0);
        assert!(s.validate(1, 1).is_err());
        let bad = SectorSpec::new(m1(1.0), m1(0.5));
        assert!(bad.validate(1, 1).is_err());
    }

    #[test]
    fn checkpoint_membership() {
        assert!(Checkpoints::Every(20).contains(40, 95));
        assert!(Checkpoints::Every(20).contains(95, 95));
        assert!(!Checkpoints::Every(20).contains(41, 95));
        assert!(!Checkpoints::None.contains(0, 1));
        assert!(Checkpoints::List([3, 7].into_iter().collect()).contains(7, 10));
    }
}
