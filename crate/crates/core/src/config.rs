//! Run configuration in a flat `section.key = value` text format, and the
//! built-in example presets.
//!
//! Values are numbers, identifiers, bracketed lists (`[[1, 0], [0, 1]]` is a
//! matrix given by rows) or calls such as `diag(0, 0.115)`. Helpers that need
//! a size take it from the key they are assigned to:
//!
//! | helper | meaning |
//! |---|---|
//! | `fill(v)` | vector with every entry `v` |
//! | `identity(s)` | `s·I` |
//! | `output(s)` | `diag(s·I_p, 0, …, 0)`, weighting the output block of the model state |
//! | `diag(a, b, …)` | diagonal matrix |
//! | `blockdiag(M1, M2, …)` | block-diagonal matrix |
//! | `train(start, stride, end, v…)` | impulses `v` at `start, start+stride, …, end` |
//! | `impulse(k, v…)` | a single impulse |
//! | `every(n)` | checkpoints at multiples of `n` |
//!
//! A bare number assigned to a matrix-valued key means that multiple of the
//! identity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::bpre::{BpreConfig, SaturationLimits};
use crate::error::{Error, Result};
use crate::lure::{Nonlinearity, PerturbationSchedule, ScalarNonlinearity, SimulationConfig};
use crate::numerics::{Matrix, StateSpace, Vector};
use crate::rls::RlsConfig;
use crate::stability::{AnalysisConfig, Checkpoints, SectorSpec, DEFAULT_GRID_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Ident(String),
    List(Vec<Value>),
    Call(String, Vec<Value>),
}

const KEYS: &[&str] = &[
    "plant.a",
    "plant.b",
    "plant.c",
    "plant.x0",
    "nonlinearity",
    "perturbation",
    "rls.order",
    "rls.theta0",
    "rls.psi0",
    "rls.tau_n",
    "rls.tau_d",
    "rls.eta",
    "rls.alpha",
    "rls.identify_during_open_loop",
    "bpre.horizon",
    "bpre.r1",
    "bpre.r2",
    "bpre.p_terminal",
    "bpre.e1",
    "limits.u_min",
    "limits.u_max",
    "run.k_engage",
    "run.k_final",
    "analysis.k1",
    "analysis.k2",
    "analysis.kappa",
    "analysis.k_l",
    "analysis.n",
    "analysis.grid",
    "analysis.checkpoints",
];

pub const PRESET_NAMES: &[&str] = &["ex1", "ex1p", "ex2", "ex3", "ex4"];

const EX1: &str = "\
plant.a = [[1, -0.5], [1, 0]]
plant.b = [[1], [0]]
plant.c = [[1, -1]]
plant.x0 = [1000, 0]
nonlinearity = tanh
rls.order = 10
rls.theta0 = fill(1e-10)
rls.psi0 = identity(1e-4)
rls.tau_n = 40
rls.tau_d = 200
rls.eta = 0.1
rls.alpha = 0.001
bpre.horizon = 20
bpre.r1 = output(1)
bpre.r2 = 1e-4
bpre.p_terminal = output(1)
run.k_engage = 100
run.k_final = 1000
analysis.k1 = 0
analysis.k2 = 1
analysis.k_l = 0
analysis.n = 0.1
analysis.grid = 2048
analysis.checkpoints = all
";

const EX1_PERTURBED: &str = "\
perturbation = [train(1000, 400, 1800, 1), train(1200, 400, 2000, -1)]
run.k_final = 3000
";

const EX2: &str = "\
nonlinearity = affine_sine(0.25, 0.6)
perturbation = [train(1000, 400, 1800, 1), train(1200, 400, 2000, -1)]
run.k_final = 3000
analysis.k1 = 0.115
analysis.k2 = 0.85
";

const EX3: &str = "\
plant.a = [[0.5, 0, -0.25], [1, 0, 0], [0, 1, 0]]
plant.b = [[1], [0], [0]]
plant.c = [[1, -1, 0]]
plant.x0 = [1, 0, 0]
nonlinearity = gaussian_piecewise(1, 1)
perturbation = [train(400, 200, 2800, 5), train(500, 200, 2900, -5)]
rls.order = 20
bpre.r2 = 1e-6
run.k_final = 3000
analysis.k1 = -0.4
analysis.k2 = 1.35
analysis.k_l = 0.4
";

const EX4: &str = "\
plant.a = blockdiag([[1, -0.5], [1, 0]], [[0.8, -0.3], [0.5, 0]], [[1.4, -0.48], [1, 0]], [[0.6, -0.58], [1, 0]])
plant.b = [[2, 0], [0, 0], [2, 0], [0, 0], [0, 2], [0, 0], [0, 2], [0, 0]]
plant.c = [[0.5, -0.5, 0, 0, 0.5, -0.5, 0, 0], [0, 0, 0.5, -1, 0, 0, 0.5, -0.5]]
plant.x0 = [1, 0, 1, 0, 1, 0, 1, 0]
nonlinearity = diagonal(tanh, affine_sine(0.25, 0.6))
perturbation = [train(2000, 2000, 10000, 5, 5), train(3000, 2000, 11000, -5, -5)]
rls.psi0 = identity(1)
bpre.r2 = 1e-2
run.k_final = 12000
analysis.k1 = diag(0, 0.115)
analysis.k2 = diag(1, 0.85)
analysis.checkpoints = every(100)
";

/// Configuration text of a preset, as layered assignments.
pub fn preset_text(name: &str) -> Option<String> {
    let layers: &[&str] = match name {
        "ex1" => &[EX1],
        "ex1p" => &[EX1, EX1_PERTURBED],
        "ex2" => &[EX1, EX2],
        "ex3" => &[EX1, EX3],
        "ex4" => &[EX1, EX4],
        _ => return None,
    };
    Some(layers.concat())
}

/// Ordered key/value assignments; later assignments replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    values: BTreeMap<String, Value>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDocument::default();
        doc.merge_text(text)?;
        Ok(doc)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_assignment(line)
                .map_err(|e| match e {
                    Error::Config { key, msg } if key.starts_with("line ") => Error::config(format!("line {}", i + 1), msg),
                    other => other,
                })?;
        }
        Ok(())
    }

    /// Applies one `key = value` assignment, as given to `--set`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config("line ?", format!("expected `key = value`, got `{assignment}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        let value = parse_value(value).map_err(|msg| Error::config(key, msg))?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn parse_value(text: &str) -> std::result::Result<Value, String> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(format!("unexpected trailing input `{}`", &text[p.pos..]));
    }
    Ok(v)
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn list(&mut self, close: u8) -> std::result::Result<Vec<Value>, String> {
        let mut items = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.value()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(format!("expected `,` or `{}` at offset {}", close as char, self.pos)),
            }
        }
    }

    fn value(&mut self) -> std::result::Result<Value, String> {
        match self.peek() {
            None => Err("missing value".into()),
            Some(b'[') => {
                self.pos += 1;
                Ok(Value::List(self.list(b']')?))
            }
            Some(b'-') | Some(b'+') => {
                let neg = self.s[self.pos] == b'-';
                self.pos += 1;
                match self.value()? {
                    Value::Number(x) => Ok(Value::Number(if neg { -x } else { x })),
                    Value::Ident(id) if id == "inf" => Ok(Value::Number(if neg { f64::NEG_INFINITY } else { f64::INFINITY })),
                    _ => Err("sign must precede a number".into()),
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = (c == b'+' || c == b'-') && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let tok = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                tok.parse::<f64>()
                    .map(Value::Number)
                    .map_err(|_| format!("invalid number `{tok}`"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let args = self.list(b')')?;
                    Ok(Value::Call(name, args))
                } else if name == "inf" {
                    Ok(Value::Number(f64::INFINITY))
                } else {
                    Ok(Value::Ident(name))
                }
            }
            Some(c) => Err(format!("unexpected character `{}`", c as char)),
        }
    }
}

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(x) => Ok(*x),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    let x = number(key, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
        return Err(Error::config(key, "expected a nonnegative integer"));
    }
    Ok(x as usize)
}

fn numbers(key: &str, items: &[Value]) -> Result<Vec<f64>> {
    items.iter().map(|v| number(key, v)).collect()
}

/// A matrix literal without size context: nested lists are rows, a flat list
/// is a single row and a number is 1×1.
fn literal_matrix(key: &str, v: &Value) -> Result<Matrix> {
    match v {
        Value::Number(x) => Ok(Matrix::from_element(1, 1, *x)),
        Value::List(rows) if rows.iter().all(|r| matches!(r, Value::List(_))) => {
            let rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| match r {
                    Value::List(items) => numbers(key, items),
                    _ => unreachable!(),
                })
                .collect::<Result<_>>()?;
            let ncols = rows.first().map_or(0, |r| r.len());
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::config(key, "matrix rows have different lengths"));
            }
            Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
        }
        Value::List(items) => {
            let row = numbers(key, items)?;
            Ok(Matrix::from_row_slice(1, row.len(), &row))
        }
        Value::Call(name, args) if name == "diag" => {
            let d = numbers(key, args)?;
            Ok(Matrix::from_diagonal(&Vector::from_vec(d)))
        }
        Value::Call(name, args) if name == "blockdiag" => {
            let blocks: Vec<Matrix> = args.iter().map(|b| literal_matrix(key, b)).collect::<Result<_>>()?;
            let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
            let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
            let mut out = Matrix::zeros(rows, cols);
            let (mut r, mut c) = (0, 0);
            for b in &blocks {
                out.view_mut((r, c), b.shape()).copy_from(b);
                r += b.nrows();
                c += b.ncols();
            }
            Ok(out)
        }
        _ => Err(Error::config(key, "expected a matrix")),
    }
}

/// A matrix of known shape; `outputs` sizes the `output(s)` helper.
fn sized_matrix(key: &str, v: &Value, rows: usize, cols: usize, outputs: usize) -> Result<Matrix> {
    let m = match v {
        Value::Number(x) => Matrix::identity(rows, cols) * *x,
        Value::Call(name, args) if name == "identity" && args.len() == 1 => Matrix::identity(rows, cols) * number(key, &args[0])?,
        Value::Call(name, args) if name == "output" && args.len() == 1 => {
            let s = number(key, &args[0])?;
            let mut m = Matrix::zeros(rows, cols);
            for i in 0..outputs.min(rows).min(cols) {
                m[(i, i)] = s;
            }
            m
        }
        Value::Call(name, _) if name == "identity" || name == "output" => {
            return Err(Error::config(key, format!("{name}() takes one argument")))
        }
        other => literal_matrix(key, other)?,
    };
    if m.shape() != (rows, cols) {
        return Err(Error::config(key, format!("expected a {rows}×{cols} matrix, got {}×{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

fn sized_vector(key: &str, v: &Value, len: usize) -> Result<Vector> {
    let out = match v {
        Value::Call(name, args) if name == "fill" && args.len() == 1 => Vector::from_element(len, number(key, &args[0])?),
        Value::Number(x) if len == 1 => Vector::from_element(1, *x),
        Value::List(items) if items.iter().all(|i| matches!(i, Value::Number(_))) => Vector::from_vec(numbers(key, items)?),
        Value::List(rows) => {
            // A column given as nested single-entry rows.
            let m = literal_matrix(key, &Value::List(rows.clone()))?;
            if m.ncols() != 1 {
                return Err(Error::config(key, "expected a vector"));
            }
            m.column(0).into_owned()
        }
        _ => return Err(Error::config(key, "expected a vector")),
    };
    if out.len() != len {
        return Err(Error::config(key, format!("expected {len} entries, got {}", out.len())));
    }
    Ok(out)
}

fn scalar_nonlinearity(key: &str, v: &Value) -> Result<ScalarNonlinearity> {
    let args_of = |args: &[Value], n: usize, name: &str| -> Result<Vec<f64>> {
        if args.len() != n {
            return Err(Error::config(key, format!("{name}() takes {n} arguments")));
        }
        numbers(key, args)
    };
    match v {
        Value::Ident(id) if id == "tanh" => Ok(ScalarNonlinearity::Tanh),
        Value::Ident(id) if id == "zero" => Ok(ScalarNonlinearity::Zero),
        Value::Call(name, args) => match name.as_str() {
            "linear" => Ok(ScalarNonlinearity::Linear(args_of(args, 1, name)?[0])),
            "affine_sine" => {
                let a = args_of(args, 2, name)?;
                Ok(ScalarNonlinearity::AffineSine { c1: a[0], c2: a[1] })
            }
            "gaussian_piecewise" => {
                let a = args_of(args, 2, name)?;
                Ok(ScalarNonlinearity::GaussianPlusPiecewise { s_l: a[0], s_h: a[1] })
            }
            "table" => match args.as_slice() {
                [Value::List(x), Value::List(y)] => Ok(ScalarNonlinearity::Table {
                    x: numbers(key, x)?,
                    y: numbers(key, y)?,
                }),
                _ => Err(Error::config(key, "table() takes two lists")),
            },
            other => Err(Error::config(key, format!("unknown nonlinearity `{other}`"))),
        },
        _ => Err(Error::config(key, "unknown nonlinearity")),
    }
}

fn nonlinearity(key: &str, v: &Value, p: usize, m: usize) -> Result<Nonlinearity> {
    match v {
        Value::Ident(id) if id == "zero" && p != m => Ok(Nonlinearity::Zero { outputs: p, inputs: m }),
        Value::Call(name, args) if name == "diagonal" => Ok(Nonlinearity::Diagonal(
            args.iter().map(|a| scalar_nonlinearity(key, a)).collect::<Result<_>>()?,
        )),
        other => {
            let f = scalar_nonlinearity(key, other)?;
            Ok(Nonlinearity::Diagonal(vec![f; p]))
        }
    }
}

fn schedule(key: &str, v: Option<&Value>, m: usize) -> Result<PerturbationSchedule> {
    let mut s = PerturbationSchedule::new(m);
    let items = match v {
        None => return Ok(s),
        Some(Value::List(items)) => items.as_slice(),
        Some(single @ Value::Call(..)) => std::slice::from_ref(single),
        Some(_) => return Err(Error::config(key, "expected a list of train(...) or impulse(...) entries")),
    };
    let insert = |s: &mut PerturbationSchedule, k: usize, vals: &[f64]| -> Result<()> {
        s.insert(k, Vector::from_column_slice(vals))
            .map_err(|e| Error::config(key, e.to_string()))
    };
    for item in items {
        match item {
            Value::Call(name, args) if name == "train" && args.len() == 3 + m => {
                let start = count(key, &args[0])?;
                let stride = count(key, &args[1])?;
                let end = count(key, &args[2])?;
                if stride == 0 {
                    return Err(Error::config(key, "train stride must be positive"));
                }
                let vals = numbers(key, &args[3..])?;
                for k in (start..=end).step_by(stride) {
                    insert(&mut s, k, &vals)?;
                }
            }
            Value::Call(name, args) if name == "impulse" && args.len() == 1 + m => {
                let k = count(key, &args[0])?;
                insert(&mut s, k, &numbers(key, &args[1..])?)?;
            }
            _ => {
                return Err(Error::config(
                    key,
                    format!("entries must be train(start, stride, end, v1..v{m}) or impulse(k, v1..v{m})"),
                ))
            }
        }
    }
    Ok(s)
}

fn checkpoints(key: &str, v: &Value) -> Result<Checkpoints> {
    match v {
        Value::Ident(id) if id == "all" => Ok(Checkpoints::All),
        Value::Ident(id) if id == "none" => Ok(Checkpoints::None),
        Value::Call(name, args) if name == "every" && args.len() == 1 => Ok(Checkpoints::Every(count(key, &args[0])?)),
        Value::List(items) => Ok(Checkpoints::List(
            items.iter().map(|i| count(key, i)).collect::<Result<BTreeSet<_>>>()?,
        )),
        _ => Err(Error::config(key, "expected all, none, every(n) or a list of steps")),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Ident(id) if id == "true" => Ok(true),
        Value::Ident(id) if id == "false" => Ok(false),
        _ => Err(Error::config(key, "expected true or false")),
    }
}

impl ConfigDocument {
    fn required(&self, key: &str) -> Result<&Value> {
        self.get(key).ok_or_else(|| Error::config(key, "missing"))
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| number(key, v))
    }

    fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |v| count(key, v))
    }

    /// Resolves the document into a validated simulation configuration.
    pub fn resolve(&self) -> Result<SimulationConfig> {
        let a = literal_matrix("plant.a", self.required("plant.a")?)?;
        let b = literal_matrix("plant.b", self.required("plant.b")?)?;
        let c = literal_matrix("plant.c", self.required("plant.c")?)?;
        let plant = StateSpace::strictly_proper(a, b, c).map_err(|e| Error::config("plant", e.to_string()))?;
        let (n, m, p) = (plant.order(), plant.inputs(), plant.outputs());
        let x0 = match self.get("plant.x0") {
            Some(v) => sized_vector("plant.x0", v, n)?,
            None => Vector::zeros(n),
        };

        let gamma = nonlinearity("nonlinearity", self.required("nonlinearity")?, p, m)?;
        let schedule = schedule("perturbation", self.get("perturbation"), m)?;

        let order = count("rls.order", self.required("rls.order")?)?;
        if order == 0 {
            return Err(Error::config("rls.order", "must be at least 1"));
        }
        let nm = order * p;
        let n_theta = order * p * (p + m);
        let rls = RlsConfig {
            order,
            outputs: p,
            inputs: m,
            theta0: match self.get("rls.theta0") {
                Some(v) => sized_vector("rls.theta0", v, n_theta)?,
                None => Vector::zeros(n_theta),
            },
            psi0: match self.get("rls.psi0") {
                Some(v) => sized_matrix("rls.psi0", v, n_theta, n_theta, p)?,
                None => Matrix::identity(n_theta, n_theta),
            },
            tau_n: self.count_or("rls.tau_n", 40)?,
            tau_d: self.count_or("rls.tau_d", 200)?,
            eta: self.number_or("rls.eta", 0.1)?,
            alpha: self.number_or("rls.alpha", 0.001)?,
            identify_during_open_loop: self
                .get("rls.identify_during_open_loop")
                .map_or(Ok(false), |v| boolean("rls.identify_during_open_loop", v))?,
        };

        let weight = |key: &str, rows: usize, default: &Value| -> Result<Matrix> {
            sized_matrix(key, self.get(key).unwrap_or(default), rows, rows, p)
        };
        let unit_output = Value::Call("output".into(), vec![Value::Number(1.0)]);
        let bpre = BpreConfig {
            horizon: self.count_or("bpre.horizon", 20)?,
            r1: weight("bpre.r1", nm, &unit_output)?,
            r2: weight("bpre.r2", m, &Value::Number(1.0))?,
            p_terminal: weight("bpre.p_terminal", nm, &unit_output)?,
            e1: self.get("bpre.e1").map(|v| literal_matrix("bpre.e1", v)).transpose()?,
        };
        let limits = SaturationLimits {
            u_min: self.number_or("limits.u_min", f64::NEG_INFINITY)?,
            u_max: self.number_or("limits.u_max", f64::INFINITY)?,
        };

        let k1 = match self.get("analysis.k1") {
            Some(v) => sized_matrix("analysis.k1", v, m, p, p)?,
            None => Matrix::zeros(m, p),
        };
        let k2 = match self.get("analysis.k2") {
            Some(v) => sized_matrix("analysis.k2", v, m, p, p)?,
            None => Matrix::identity(m, p),
        };
        let sector = SectorSpec {
            k1,
            k2,
            kappa: self
                .get("analysis.kappa")
                .map(|v| sized_matrix("analysis.kappa", v, m, m, p))
                .transpose()?,
            k_l: self.number_or("analysis.k_l", 0.0)?,
            n: match self.get("analysis.n") {
                Some(v) => sized_matrix("analysis.n", v, m, m, p)?,
                None => Matrix::identity(m, m) * 0.1,
            },
        };
        let analysis = AnalysisConfig {
            sector,
            grid_size: self.count_or("analysis.grid", DEFAULT_GRID_SIZE)?,
            checkpoints: self
                .get("analysis.checkpoints")
                .map_or(Ok(Checkpoints::All), |v| checkpoints("analysis.checkpoints", v))?,
        };

        let config = SimulationConfig {
            plant,
            x0,
            nonlinearity: gamma,
            schedule,
            rls,
            bpre,
            limits,
            k_engage: self.count_or("run.k_engage", 100)?,
            k_final: self.count_or("run.k_final", 1000)?,
            analysis,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Loads a preset and applies `key=value` overrides in order.
pub fn load_preset(name: &str, overrides: &[String]) -> Result<SimulationConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::config("preset", format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", ")))
    })?;
    load_text(&text, overrides)
}

pub fn load_text(text: &str, overrides: &[String]) -> Result<SimulationConfig> {
    let mut doc = ConfigDocument::parse(text)?;
    for o in overrides {
        doc.set_assignment(o)?;
    }
    doc.resolve()
}

fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn fmt_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let r: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
            format!("[{}]", r.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_vector(v: &Vector) -> String {
    let r: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", r.join(", "))
}

fn fmt_scalar_nonlinearity(f: &ScalarNonlinearity) -> String {
    match f {
        ScalarNonlinearity::Zero => "zero".into(),
        ScalarNonlinearity::Tanh => "tanh".into(),
        ScalarNonlinearity::Linear(c) => format!("linear({})", fmt_f64(*c)),
        ScalarNonlinearity::AffineSine { c1, c2 } => format!("affine_sine({}, {})", fmt_f64(*c1), fmt_f64(*c2)),
        ScalarNonlinearity::GaussianPlusPiecewise { s_l, s_h } => {
            format!("gaussian_piecewise({}, {})", fmt_f64(*s_l), fmt_f64(*s_h))
        }
        ScalarNonlinearity::Table { x, y } => format!(
            "table({}, {})",
            fmt_vector(&Vector::from_column_slice(x)),
            fmt_vector(&Vector::from_column_slice(y))
        ),
    }
}

/// Renders a configuration as fully explicit assignments; parsing the result
/// reproduces the configuration.
pub fn render(config: &SimulationConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("plant.a", fmt_matrix(&config.plant.a));
    put("plant.b", fmt_matrix(&config.plant.b));
    put("plant.c", fmt_matrix(&config.plant.c));
    put("plant.x0", fmt_vector(&config.x0));
    put(
        "nonlinearity",
        match &config.nonlinearity {
            Nonlinearity::Diagonal(ch) => {
                let parts: Vec<String> = ch.iter().map(fmt_scalar_nonlinearity).collect();
                format!("diagonal({})", parts.join(", "))
            }
            Nonlinearity::Zero { .. } => "zero".into(),
        },
    );
    let impulses: Vec<String> = config
        .schedule
        .impulses()
        .iter()
        .map(|(k, v)| {
            let vals: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
            format!("impulse({k}, {})", vals.join(", "))
        })
        .collect();
    put("perturbation", format!("[{}]", impulses.join(", ")));
    let r = &config.rls;
    put("rls.order", r.order.to_string());
    put("rls.theta0", fmt_vector(&r.theta0));
    put("rls.psi0", fmt_matrix(&r.psi0));
    put("rls.tau_n", r.tau_n.to_string());
    put("rls.tau_d", r.tau_d.to_string());
    put("rls.eta", fmt_f64(r.eta));
    put("rls.alpha", fmt_f64(r.alpha));
    put("rls.identify_during_open_loop", r.identify_during_open_loop.to_string());
    let b = &config.bpre;
    put("bpre.horizon", b.horizon.to_string());
    put("bpre.r1", fmt_matrix(&b.r1));
    put("bpre.r2", fmt_matrix(&b.r2));
    put("bpre.p_terminal", fmt_matrix(&b.p_terminal));
    if let Some(e1) = &b.e1 {
        put("bpre.e1", fmt_matrix(e1));
    }
    put("limits.u_min", fmt_f64(config.limits.u_min));
    put("limits.u_max", fmt_f64(config.limits.u_max));
    put("run.k_engage", config.k_engage.to_string());
    put("run.k_final", config.k_final.to_string());
    let s = &config.analysis.sector;
    put("analysis.k1", fmt_matrix(&s.k1));
    put("analysis.k2", fmt_matrix(&s.k2));
    if let Some(kappa) = &s.kappa {
        put("analysis.kappa", fmt_matrix(kappa));
    }
    put("analysis.k_l", fmt_f64(s.k_l));
    put("analysis.n", fmt_matrix(&s.n));
    put("analysis.grid", config.analysis.grid_size.to_string());
    put(
        "analysis.checkpoints",
        match &config.analysis.checkpoints {
            Checkpoints::None => "none".into(),
            Checkpoints::All => "all".into(),
            Checkpoints::Every(n) => format!("every({n})"),
            Checkpoints::List(set) => {
                let ks: Vec<String> = set.iter().map(|k| k.to_string()).collect();
                format!("[{}]", ks.join(", "))
            }
        },
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values() {
        assert_eq!(parse_value(" 1e-4 ").unwrap(), Value::Number(1e-4));
        assert_eq!(parse_value("-2.5E+3").unwrap(), Value::Number(-2500.0));
        assert_eq!(parse_value("-inf").unwrap(), Value::Number(f64::NEG_INFINITY));
        assert_eq!(parse_value("tanh").unwrap(), Value::Ident("tanh".into()));
        assert_eq!(
            parse_value("[[1, 2], [3]]").unwrap(),
            Value::List(vec![
                Value::List(vec![Value::Number(1.0), Value::Number(2.0)]),
                Value::List(vec![Value::Number(3.0)]),
            ])
        );
        assert_eq!(
            parse_value("every(20)").unwrap(),
            Value::Call("every".into(), vec![Value::Number(20.0)])
        );
        assert_eq!(parse_value("[]").unwrap(), Value::List(vec![]));
        assert!(parse_value("[1, 2").is_err());
        assert!(parse_value("1 2").is_err());
        assert!(parse_value("").is_err());
        assert!(parse_value("-tanh").is_err());
    }

    #[test]
    fn ex1_preset_values() {
        let c = load_preset("ex1", &[]).unwrap();
        assert_eq!(c.plant.a, Matrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]));
        assert_eq!(c.x0, &c.plant.b.column(0) * 1000.0);
        assert_eq!(c.nonlinearity, Nonlinearity::scalar(ScalarNonlinearity::Tanh));
        assert_eq!(c.rls.order, 10);
        assert_eq!(c.rls.psi0, Matrix::identity(20, 20) * 1e-4);
        assert_eq!(c.rls.theta0, Vector::from_element(20, 1e-10));
        assert_eq!((c.rls.tau_n, c.rls.tau_d, c.rls.eta, c.rls.alpha), (40, 200, 0.1, 0.001));
        assert_eq!(c.bpre.horizon, 20);
        assert_eq!(c.bpre.r2, Matrix::from_element(1, 1, 1e-4));
        let mut r1 = Matrix::zeros(10, 10);
        r1[(0, 0)] = 1.0;
        assert_eq!(c.bpre.r1, r1);
        assert_eq!(c.bpre.p_terminal, r1);
        assert_eq!(c.k_final, 1000);
        assert!(c.schedule.is_empty());
    }

    #[test]
    fn perturbed_preset_schedule() {
        let c = load_preset("ex1p", &[]).unwrap();
        assert_eq!(c.k_final, 3000);
        assert_eq!(c.schedule.at(1000)[0], 1.0);
        assert_eq!(c.schedule.at(1200)[0], -1.0);
        assert_eq!(c.schedule.at(2000)[0], -1.0);
        assert_eq!(c.schedule.at(1100)[0], 0.0);
        assert_eq!(c.schedule.impulses().len(), 6);
    }

    #[test]
    fn other_presets() {
        let c = load_preset("ex2", &[]).unwrap();
        assert_eq!(c.analysis.sector.k1[(0, 0)], 0.115);
        assert_eq!(c.analysis.sector.k2[(0, 0)], 0.85);
        let c = load_preset("ex3", &[]).unwrap();
        assert_eq!(c.rls.order, 20);
        assert_eq!(c.schedule.impulses().len(), 26);
        assert_eq!(c.schedule.at(2900)[0], -5.0);
        let c = load_preset("ex4", &[]).unwrap();
        assert_eq!((c.plant.order(), c.inputs(), c.outputs()), (8, 2, 2));
        assert_eq!(c.rls.psi0, Matrix::identity(80, 80));
        assert_eq!(c.bpre.r1.nrows(), 20);
        assert_eq!((c.bpre.r1[(0, 0)], c.bpre.r1[(1, 1)], c.bpre.r1[(2, 2)]), (1.0, 1.0, 0.0));
        assert_eq!(c.bpre.r2, Matrix::identity(2, 2) * 1e-2);
        assert_eq!(c.schedule.at(10000), Vector::from_vec(vec![5.0, 5.0]));
        assert_eq!(c.schedule.at(11000), Vector::from_vec(vec![-5.0, -5.0]));
        assert_eq!(c.plant.a[(3, 2)], 0.5);
    }

    #[test]
    fn overrides_replace_single_keys() {
        let base = load_preset("ex1", &[]).unwrap();
        let c = load_preset("ex1", &["bpre.horizon=5".into()]).unwrap();
        assert_eq!(c.bpre.horizon, 5);
        let mut expected = base.clone();
        expected.bpre.horizon = 5;
        assert_eq!(c, expected);
        assert_eq!(load_preset("ex1", &[]).unwrap(), base);
    }

    #[test]
    fn errors_name_the_key() {
        match load_preset("ex1", &["bpre.horizn=5".into()]) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bpre.horizn"),
            other => panic!("{other:?}"),
        }
        match load_preset("ex1", &["rls.tau_d=10".into()]) {
            Err(Error::Config { key, .. }) => assert!(key.starts_with("rls")),
            other => panic!("{other:?}"),
        }
        match load_preset("ex1", &["analysis.k2=-1".into()]) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "analysis.k2"),
            other => panic!("{other:?}"),
        }
        assert!(load_preset("ex9", &[]).is_err());
        assert!(load_text("plant.a = [[1]]\nbogus", &[]).is_err());
    }

    #[test]
    fn render_round_trips() {
        for name in PRESET_NAMES {
            let c = load_preset(name, &[]).unwrap();
            let again = load_text(&render(&c), &[]).unwrap();
            assert_eq!(c, again, "{name}");
        }
    }
}
