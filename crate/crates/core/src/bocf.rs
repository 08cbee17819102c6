//! Block observable canonical form of the identified ARX model, with its state
//! reconstructed from the input/output history.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::rls::IoHistory;

/// ARX coefficient blocks `F_i` (p×p) and `G_i` (p×m), `i = 1..=n̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel {
    pub order: usize,
    pub outputs: usize,
    pub inputs: usize,
    pub f: Vec<Matrix>,
    pub g: Vec<Matrix>,
    /// Index of the θ estimate these blocks came from.
    pub step_tag: usize,
}

impl IdentifiedModel {
    pub fn new(order: usize, outputs: usize, inputs: usize, f: Vec<Matrix>, g: Vec<Matrix>, step_tag: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("model order must be at least 1".into()));
        }
        if f.len() != order || g.len() != order {
            return Err(Error::Dimension(format!(
                "expected {order} F and G blocks, got {} and {}",
                f.len(),
                g.len()
            )));
        }
        for fi in &f {
            if fi.shape() != (outputs, outputs) {
                return Err(Error::Dimension(format!("F block has shape {:?}", fi.shape())));
            }
        }
        for gi in &g {
            if gi.shape() != (outputs, inputs) {
                return Err(Error::Dimension(format!("G block has shape {:?}", gi.shape())));
            }
        }
        if f.iter().chain(g.iter()).any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("identified model".into()));
        }
        Ok(IdentifiedModel {
            order,
            outputs,
            inputs,
            f,
            g,
            step_tag,
        })
    }

    /// `[−F_1; …; −F_n̂]`, the output-injection gain of the realization.
    pub fn output_injection(&self) -> Matrix {
        let p = self.outputs;
        let mut out = Matrix::zeros(self.order * p, p);
        for (i, fi) in self.f.iter().enumerate() {
            out.view_mut((i * p, 0), (p, p)).copy_from(&(-fi));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BocfRealization {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl BocfRealization {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// One-step prediction `A x + B u`.
    pub fn advance(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

/// `A_m` has `−F_i` down its first block column and identity blocks on the
/// block superdiagonal; `B_m` stacks the `G_i`; `C_m = [I_p 0 … 0]`.
pub fn build_realization(model: &IdentifiedModel) -> Result<BocfRealization> {
    let (nh, p, m) = (model.order, model.outputs, model.inputs);
    if nh == 0 {
        return Err(Error::InvalidArgument("model order must be at least 1".into()));
    }
    let dim = nh * p;
    let mut a = Matrix::zeros(dim, dim);
    let mut b = Matrix::zeros(dim, m);
    for i in 0..nh {
        a.view_mut((i * p, 0), (p, p)).copy_from(&(-&model.f[i]));
        if i + 1 < nh {
            a.view_mut((i * p, (i + 1) * p), (p, p))
                .copy_from(&Matrix::identity(p, p));
        }
        b.view_mut((i * p, 0), (p, m)).copy_from(&model.g[i]);
    }
    let mut c = Matrix::zeros(p, dim);
    c.view_mut((0, 0), (p, p)).copy_from(&Matrix::identity(p, p));
    Ok(BocfRealization { a, b, c })
}

/// BOCF state at step k from a history whose newest sample is `(y_k, u_k)`.
///
/// Block 1 is `y_k`; block `j ≥ 2` is
/// `−Σ_{i=1}^{n̂−j+1} F_{i+j−1} y_{k−i} + Σ_{i=1}^{n̂−j+1} G_{i+j−1} u_{k−i}`.
pub fn build_state(model: &IdentifiedModel, history: &IoHistory) -> Result<Vector> {
    let (nh, p, m) = (model.order, model.outputs, model.inputs);
    if history.outputs() != p || history.inputs() != m || history.order() < nh {
        return Err(Error::Dimension(format!(
            "history (n̂={}, p={}, m={}) does not fit model (n̂={nh}, p={p}, m={m})",
            history.order(),
            history.outputs(),
            history.inputs()
        )));
    }
    let mut x = Vector::zeros(nh * p);
    x.rows_mut(0, p).copy_from(&history.y(0));
    for j in 2..=nh {
        let mut block = Vector::zeros(p);
        for i in 1..=(nh - j + 1) {
            block -= &model.f[i + j - 2] * history.y(i);
            block += &model.g[i + j - 2] * history.u(i);
        }
        x.rows_mut((j - 1) * p, p).copy_from(&block);
    }
    Ok(x)
}
