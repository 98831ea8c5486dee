//! Text serialization of a trained model.
//!
//! ```text
//! mtfs-model 1
//! method mtl-somp
//! n_features 500
//! n_tasks 3
//! config budget=8
//! warning solver stopped after 100 iterations
//! support shared 17 4 250
//! bias 0 -0.125
//! bias 1 0.5
//! bias 2 0.0625
//! weights
//! 4,0,0.3125
//! 17,2,-1.5
//! ```
//!
//! Models with one support per task write `support task <l> <indices...>`
//! lines instead of a single shared line. Values use the shortest decimal
//! form that parses back to the same `f64`. Blank lines are not allowed.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linear_model::{CoefficientMatrix, SupportSet};

pub const MAGIC_LINE: &str = "mtfs-model 1";
const FORMAT: &str = "model";
/// Upper bound on `n_features * n_tasks` accepted by the parser.
pub const MAX_ENTRIES: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSupport {
    Shared(SupportSet),
    PerTask(Vec<SupportSet>),
}

impl ModelSupport {
    fn allows(&self, row: usize, task: usize) -> bool {
        match self {
            ModelSupport::Shared(s) => s.contains(row),
            ModelSupport::PerTask(v) => v[task].contains(row),
        }
    }

    /// Union of all rows in use, ascending.
    pub fn union(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = match self {
            ModelSupport::Shared(s) => s.indices().to_vec(),
            ModelSupport::PerTask(v) => v.iter().flat_map(|s| s.indices().iter().copied()).collect(),
        };
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub method: String,
    /// Echo of the training configuration, in the order written.
    pub config: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub support: ModelSupport,
    pub coefficients: CoefficientMatrix,
}

fn check_token(what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '=') {
        return Err(Error::invalid(format!("{what} {s:?} must be a non-empty token without spaces or '='")));
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Model {
    /// Checks supports and weights against each other.
    pub fn validate(&self) -> Result<()> {
        check_token("method", &self.method)?;
        for (k, _) in &self.config {
            check_token("config key", k)?;
        }
        let (d, l) = (self.coefficients.n_features(), self.coefficients.n_tasks());
        match &self.support {
            ModelSupport::Shared(s) => s.check_bound(d)?,
            ModelSupport::PerTask(v) => {
                if v.len() != l {
                    return Err(Error::invalid(format!("{} task supports for {l} tasks", v.len())));
                }
                for s in v {
                    s.check_bound(d)?;
                }
            }
        }
        let w = self.coefficients.weights();
        for ((row, task), &v) in w.indexed_iter() {
            if v != 0.0 && !self.support.allows(row, task) {
                return Err(Error::invalid(format!(
                    "nonzero weight at row {row}, task {task} outside the support"
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let c = &self.coefficients;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC_LINE}");
        let _ = writeln!(out, "method {}", self.method);
        let _ = writeln!(out, "n_features {}", c.n_features());
        let _ = writeln!(out, "n_tasks {}", c.n_tasks());
        for (k, v) in &self.config {
            let _ = writeln!(out, "config {k}={}", one_line(v));
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning {}", one_line(w));
        }
        let join = |s: &SupportSet| {
            s.indices().iter().map(|i| format!(" {i}")).collect::<String>()
        };
        match &self.support {
            ModelSupport::Shared(s) => {
                let _ = writeln!(out, "support shared{}", join(s));
            }
            ModelSupport::PerTask(v) => {
                for (l, s) in v.iter().enumerate() {
                    let _ = writeln!(out, "support task {l}{}", join(s));
                }
            }
        }
        for (l, b) in c.biases().iter().enumerate() {
            let _ = writeln!(out, "bias {l} {b:?}");
        }
        let _ = writeln!(out, "weights");
        for ((row, task), v) in c.weights().indexed_iter() {
            if *v != 0.0 {
                let _ = writeln!(out, "{row},{task},{v:?}");
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::default().run(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::malformed(FORMAT, format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, format!("bad {what} {s:?}")))
}

fn parse_value(line: usize, s: &str) -> Result<f64> {
    let v: f64 = parse_num(line, "value", s)?;
    if !v.is_finite() {
        return Err(bad(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

#[derive(Default)]
struct Parser {
    method: Option<String>,
    n_features: Option<usize>,
    n_tasks: Option<usize>,
    config: Vec<(String, String)>,
    warnings: Vec<String>,
    shared: Option<Vec<usize>>,
    per_task: Vec<(usize, Vec<usize>)>,
    biases: Vec<(usize, f64)>,
}

impl Parser {
    fn run(mut self, text: &str) -> Result<Model> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC_LINE => {}
            _ => return Err(bad(1, format!("expected {MAGIC_LINE:?}"))),
        }
        let mut weights_line = None;
        for (n, line) in lines.by_ref() {
            if line == "weights" {
                weights_line = Some(n);
                break;
            }
            self.header(n, line)?;
        }
        let weights_line = weights_line.ok_or_else(|| bad(text.lines().count(), "missing weights section"))?;

        let d = self.n_features.ok_or_else(|| bad(weights_line, "missing n_features"))?;
        let l = self.n_tasks.ok_or_else(|| bad(weights_line, "missing n_tasks"))?;
        let method = self.method.take().ok_or_else(|| bad(weights_line, "missing method"))?;
        if l == 0 {
            return Err(bad(weights_line, "n_tasks must be positive"));
        }
        d.checked_mul(l)
            .filter(|&n| n <= MAX_ENTRIES)
            .ok_or_else(|| bad(weights_line, "model dimensions too large"))?;

        let support = match (self.shared.take(), self.per_task.is_empty()) {
            (Some(s), true) => ModelSupport::Shared(
                SupportSet::new(s).map_err(|e| bad(weights_line, e))?,
            ),
            (None, false) => {
                self.per_task.sort_by_key(|(t, _)| *t);
                if self.per_task.iter().enumerate().any(|(i, (t, _))| i != *t) || self.per_task.len() != l {
                    return Err(bad(weights_line, "need exactly one support line per task"));
                }
                let sets = self
                    .per_task
                    .drain(..)
                    .map(|(_, s)| SupportSet::new(s))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| bad(weights_line, e))?;
                ModelSupport::PerTask(sets)
            }
            (Some(_), false) => return Err(bad(weights_line, "both shared and per-task supports")),
            (None, true) => return Err(bad(weights_line, "missing support")),
        };

        let mut biases = vec![None; l];
        for &(t, b) in &self.biases {
            match biases.get_mut(t) {
                Some(slot @ None) => *slot = Some(b),
                Some(Some(_)) => return Err(bad(weights_line, format!("duplicate bias for task {t}"))),
                None => return Err(bad(weights_line, format!("bias task {t} out of range"))),
            }
        }
        let biases: Array1<f64> = biases
            .into_iter()
            .enumerate()
            .map(|(t, b)| b.ok_or_else(|| bad(weights_line, format!("missing bias for task {t}"))))
            .collect::<Result<_>>()?;

        let mut w = Array2::zeros((d, l));
        let mut seen = std::collections::HashSet::new();
        for (n, line) in lines {
            let mut parts = line.split(',');
            let (Some(r), Some(t), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad(n, "expected row,task,value"));
            };
            let row: usize = parse_num(n, "row", r)?;
            let task: usize = parse_num(n, "task", t)?;
            let v = parse_value(n, v)?;
            if row >= d || task >= l {
                return Err(bad(n, format!("entry ({row}, {task}) outside {d}x{l}")));
            }
            if !seen.insert((row, task)) {
                return Err(bad(n, format!("duplicate entry ({row}, {task})")));
            }
            w[[row, task]] = v;
        }
        let model = Model {
            method,
            config: self.config,
            warnings: self.warnings,
            support,
            coefficients: CoefficientMatrix::new(w, biases)?,
        };
        model.validate().map_err(|e| Error::malformed(FORMAT, e.to_string()))?;
        Ok(model)
    }

    fn header(&mut self, n: usize, line: &str) -> Result<()> {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "method" => {
                check_token("method", rest).map_err(|e| bad(n, e))?;
                if self.method.replace(rest.to_string()).is_some() {
                    return Err(bad(n, "duplicate method"));
                }
            }
            "n_features" => {
                if self.n_features.replace(parse_num(n, "n_features", rest)?).is_some() {
                    return Err(bad(n, "duplicate n_features"));
                }
            }
            "n_tasks" => {
                if self.n_tasks.replace(parse_num(n, "n_tasks", rest)?).is_some() {
                    return Err(bad(n, "duplicate n_tasks"));
                }
            }
            "config" => {
                let (k, v) = rest.split_once('=').ok_or_else(|| bad(n, "expected config key=value"))?;
                check_token("config key", k).map_err(|e| bad(n, e))?;
                self.config.push((k.to_string(), v.to_string()));
            }
            "warning" => self.warnings.push(rest.to_string()),
            "support" => {
                let mut it = rest.split(' ');
                let kind = it.next().unwrap_or("");
                let indices = |it: std::str::Split<'_, char>| -> Result<Vec<usize>> {
                    it.filter(|s| !s.is_empty()).map(|s| parse_num(n, "support index", s)).collect()
                };
                match kind {
                    "shared" => {
                        if self.shared.replace(indices(it)?).is_some() {
                            return Err(bad(n, "duplicate shared support"));
                        }
                    }
                    "task" => {
                        let t = parse_num(n, "task", it.next().unwrap_or(""))?;
                        self.per_task.push((t, indices(it)?));
                    }
                    other => return Err(bad(n, format!("unknown support kind {other:?}"))),
                }
            }
            "bias" => {
                let (t, v) = rest.split_once(' ').ok_or_else(|| bad(n, "expected bias <task> <value>"))?;
                self.biases.push((parse_num(n, "task", t)?, parse_value(n, v)?));
            }
            other => return Err(bad(n, format!("unknown header key {other:?}"))),
        }
        Ok(())
    }
}
