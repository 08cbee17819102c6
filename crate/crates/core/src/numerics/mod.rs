//! Dense linear algebra and special functions shared by the controller and the
//! stability analysis.

mod eigen;
pub mod special;

use nalgebra::linalg::Hessenberg;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eigen::eigenvalues;
pub use special::{beta_reg, f_cdf, f_inv_cdf, ln_gamma};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Builds a matrix from row slices, rejecting ragged or non-finite input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `(M + Mᵀ) / 2`, in place.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn symmetric_min_eig(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().min()
}

/// Discrete-time realization `x⁺ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            ensure_finite(m, name)?;
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Strictly proper realization (`D = 0`).
    pub fn strictly_proper(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
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

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Largest entrywise deviation of `H` from `Hᴴ`.
pub fn hermitian_asymmetry(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Minimum eigenvalue of a Hermitian matrix. Inputs whose asymmetry exceeds
/// `1e-10` are rejected; the rest are symmetrized before solving.
pub fn hermitian_min_eig(h: &CMatrix) -> Result<f64> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "Hermitian eigenvalues need a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("Hermitian matrix".into()));
    }
    let asym = hermitian_asymmetry(h);
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let n = h.nrows();
    match n {
        0 => return Ok(f64::INFINITY),
        1 => return Ok(h[(0, 0)].re),
        2 => {
            // Closed form for the common 2x2 case.
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let b = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            return Ok(mean - rad);
        }
        _ => {}
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence(n))?;
    Ok(eig.eigenvalues.min())
}

#[inline]
fn unit_circle(psi: f64) -> Complex64 {
    Complex64::new(psi.cos(), psi.sin())
}

fn complexify(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `C (e^{jψ} I − A)⁻¹ B + D`, via a complex LU solve.
pub fn freq_response(ss: &StateSpace, psi: f64) -> Result<CMatrix> {
    let n = ss.order();
    let z = unit_circle(psi);
    let mut resolvent = complexify(&ss.a) * Complex64::new(-1.0, 0.0);
    for i in 0..n {
        resolvent[(i, i)] += z;
    }
    let scale = resolvent.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let lu = resolvent.lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].norm() <= 1e-14 * scale) {
        return Err(Error::SingularResolvent(psi));
    }
    let x = lu
        .solve(&complexify(&ss.b))
        .ok_or(Error::SingularResolvent(psi))?;
    let g = complexify(&ss.c) * x + complexify(&ss.d);
    if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularResolvent(psi));
    }
    Ok(g)
}

/// Repeated frequency-response evaluation. `A` is reduced once to Hessenberg
/// form `A = Q H Qᵀ`, after which each frequency costs an `O(n²)` Hessenberg
/// solve per input channel.
#[derive(Debug, Clone)]
pub struct FrequencySweep {
    n: usize,
    inputs: usize,
    outputs: usize,
    h: Vec<f64>,
    qt_b: Vec<f64>,
    c_q: Matrix,
    d: Matrix,
}

impl FrequencySweep {
    pub fn new(ss: &StateSpace) -> Self {
        let n = ss.order();
        let (q, h) = if n > 0 {
            Hessenberg::new(ss.a.clone()).unpack()
        } else {
            (Matrix::zeros(0, 0), Matrix::zeros(0, 0))
        };
        let qt_b = q.transpose() * &ss.b;
        let c_q = &ss.c * &q;
        let mut hv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hv[i * n + j] = h[(i, j)];
            }
        }
        let mut bv = vec![0.0; n * ss.inputs()];
        for i in 0..n {
            for j in 0..ss.inputs() {
                bv[i * ss.inputs() + j] = qt_b[(i, j)];
            }
        }
        FrequencySweep {
            n,
            inputs: ss.inputs(),
            outputs: ss.outputs(),
            h: hv,
            qt_b: bv,
            c_q,
            d: ss.d.clone(),
        }
    }

    /// Transfer matrix at `e^{jψ}`.
    pub fn eval(&self, psi: f64) -> Result<CMatrix> {
        let n = self.n;
        let ni = self.inputs;
        let z = unit_circle(psi);
        let mut m: Vec<Complex64> = self.h.iter().map(|&v| Complex64::new(-v, 0.0)).collect();
        for i in 0..n {
            m[i * n + i] += z;
        }
        let mut rhs: Vec<Complex64> = self.qt_b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);

        // Elimination with partial pivoting; only row i + 1 has a nonzero in
        // column i below the diagonal.
        for i in 0..n.saturating_sub(1) {
            if m[(i + 1) * n + i].norm() > m[i * n + i].norm() {
                for j in i..n {
                    m.swap(i * n + j, (i + 1) * n + j);
                }
                for j in 0..ni {
                    rhs.swap(i * ni + j, (i + 1) * ni + j);
                }
            }
            let piv = m[i * n + i];
            if piv.norm() <= 1e-14 * scale {
                return Err(Error::SingularResolvent(psi));
            }
            let f = m[(i + 1) * n + i] / piv;
            if f != Complex64::new(0.0, 0.0) {
                m[(i + 1) * n + i] = Complex64::new(0.0, 0.0);
                for j in (i + 1)..n {
                    let v = m[i * n + j];
                    m[(i + 1) * n + j] -= f * v;
                }
                for j in 0..ni {
                    let v = rhs[i * ni + j];
                    rhs[(i + 1) * ni + j] -= f * v;
                }
            }
        }
        for i in (0..n).rev() {
            let piv = m[i * n + i];
            if piv.norm() <= 1e-14 * scale {
                return Err(Error::SingularResolvent(psi));
            }
            for j in 0..ni {
                let mut acc = rhs[i * ni + j];
                for k in (i + 1)..n {
                    acc -= m[i * n + k] * rhs[k * ni + j];
                }
                rhs[i * ni + j] = acc / piv;
            }
        }

        let mut g = CMatrix::from_fn(self.outputs, ni, |r, c| Complex64::new(self.d[(r, c)], 0.0));
        for r in 0..self.outputs {
            for c in 0..ni {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += rhs[k * ni + c] * self.c_q[(r, k)];
                }
                g[(r, c)] += acc;
            }
        }
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularResolvent(psi));
        }
        Ok(g)
    }
}

/// Uniform grid of `size` points on `[0, π]`, endpoints included.
pub fn frequency_grid(size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..size)
            .map(|i| std::f64::consts::PI * i as f64 / (size - 1) as f64)
            .collect(),
    }
}

/// Stacked observability matrix `[C; CA; …; CA^{n−1}]`.
pub fn observability_matrix(a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "observability needs square A and C with {n} columns"
        )));
    }
    let p = c.nrows();
    let mut obs = Matrix::zeros(n * p, n);
    let mut block = c.clone();
    for i in 0..n {
        obs.view_mut((i * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    Ok(obs)
}

/// Numerical rank of the observability matrix, with the usual SVD tolerance
/// `max(rows, cols) · ε · σ_max`.
pub fn observability_rank(a: &Matrix, c: &Matrix) -> Result<usize> {
    let obs = observability_matrix(a, c)?;
    Ok(numerical_rank(&obs))
}

pub fn numerical_rank(m: &Matrix) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}
