//! JSON configuration.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "form": [["1", "0"], ["0", "1"]],
//!   "module": {"weights": ["0"], "action": [[["0"]], [["0"]]], "dm": [["0"]]},
//!   "suite": {"max_weight": 4, "exhaustive_weight": 2, "samples": 6,
//!             "window": [-6, 3], "seed": 0},
//!   "tasks": ["associativity", "witness"]
//! }
//! ```
//!
//! Only `dim` and `form` are required. Rationals are `"p/q"` strings or JSON
//! integers.

use std::path::Path;

use serde_json::Value;

use crate::checker::{CheckKind, SuiteConfig};
use crate::error::{Error, Result};
use crate::halgebra::{validate_hspace, HSpace};
use crate::module::{validate_module, Matrix, ModulePresentation};
use crate::scalar::{parse_scalar, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub h: HSpace,
    pub module: ModulePresentation,
    pub suite: SuiteConfig,
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<Option<&'a Value>> {
    match obj {
        Value::Object(map) => Ok(map.get(key)),
        _ => Err(Error::config(path, "expected an object")),
    }
}

fn required<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    field(obj, key, path)?.ok_or_else(|| Error::config(join(path, key), "missing field"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn scalar(v: &Value, path: &str) -> Result<Scalar> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_i64() => n.to_string(),
        _ => return Err(Error::config(path, "expected a rational string such as \"1/2\"")),
    };
    parse_scalar(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::config(path, message),
        other => other,
    })
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::config(path, "expected an array"))
}

fn vector(v: &Value, path: &str) -> Result<Vec<Scalar>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| scalar(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<Matrix> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| vector(row, &format!("{path}[{i}]")))
        .collect()
}

fn uint(v: &Value, path: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::config(path, "expected a nonnegative integer"))
}

fn parse_form(root: &Value, dim: usize) -> Result<HSpace> {
    let form = matrix(required(root, "form", "")?, "form")?;
    if form.len() != dim {
        return Err(Error::config("form", format!("expected {dim} rows, found {}", form.len())));
    }
    for (i, row) in form.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::config(
                format!("form[{i}]"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
    }
    HSpace::new(form)
}

fn parse_module(v: &Value, dim: usize) -> Result<ModulePresentation> {
    let weights = vector(required(v, "weights", "module")?, "module.weights")?;
    let r = weights.len();
    let action = match field(v, "action", "module")? {
        Some(a) => {
            let list = array(a, "module.action")?;
            if list.len() != dim {
                return Err(Error::config(
                    "module.action",
                    format!("expected {dim} matrices, found {}", list.len()),
                ));
            }
            list.iter()
                .enumerate()
                .map(|(i, m)| matrix(m, &format!("module.action[{i}]")))
                .collect::<Result<Vec<_>>>()?
        }
        None => vec![crate::module::zero_matrix(r); dim],
    };
    let dm = match field(v, "dm", "module")? {
        Some(m) => matrix(m, "module.dm")?,
        None => crate::module::zero_matrix(r),
    };
    ModulePresentation::new(weights, action, dm)
}

fn parse_suite(root: &Value) -> Result<SuiteConfig> {
    let mut cfg = SuiteConfig::default();
    if let Some(s) = field(root, "suite", "")? {
        if let Some(v) = field(s, "max_weight", "suite")? {
            cfg.max_weight = uint(v, "suite.max_weight")? as u32;
        }
        if let Some(v) = field(s, "exhaustive_weight", "suite")? {
            cfg.exhaustive_weight = uint(v, "suite.exhaustive_weight")? as u32;
        }
        if let Some(v) = field(s, "samples", "suite")? {
            cfg.samples = uint(v, "suite.samples")? as usize;
        }
        if let Some(v) = field(s, "seed", "suite")? {
            cfg.seed = uint(v, "suite.seed")?;
        }
        if let Some(v) = field(s, "window", "suite")? {
            let w = array(v, "suite.window")?;
            let bound = |i: usize| -> Result<i64> {
                w.get(i)
                    .and_then(Value::as_i64)
                    .ok_or_else(|| Error::config(format!("suite.window[{i}]"), "expected an integer"))
            };
            if w.len() != 2 {
                return Err(Error::config("suite.window", "expected [lo, hi]"));
            }
            let (lo, hi) = (bound(0)?, bound(1)?);
            if lo > hi {
                return Err(Error::config("suite.window", format!("lower bound {lo} exceeds upper bound {hi}")));
            }
            cfg.window = (lo, hi);
        }
    }
    if let Some(t) = field(root, "tasks", "")? {
        cfg.checks = array(t, "tasks")?
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let path = format!("tasks[{i}]");
                let name = v.as_str().ok_or_else(|| Error::config(&path, "expected a check name"))?;
                CheckKind::from_name(name).ok_or_else(|| Error::config(&path, format!("unknown check `{name}`")))
            })
            .collect::<Result<_>>()?;
    }
    Ok(cfg)
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Config> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        Error::config(
            "",
            format!("malformed JSON at line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    let dim = uint(required(&root, "dim", "")?, "dim")? as usize;
    if dim == 0 {
        return Err(Error::config("dim", "dimension must be positive"));
    }
    let h = parse_form(&root, dim)?;
    let symmetric = match field(&root, "require_symmetric", "")? {
        Some(v) => v
            .as_bool()
            .ok_or_else(|| Error::config("require_symmetric", "expected a boolean"))?,
        None => false,
    };
    let diag = validate_hspace(&h, true, symmetric);
    if !diag.passed() {
        return Err(Error::config("form", diag.issues.join("; ")));
    }
    let module = match field(&root, "module", "")? {
        Some(m) => parse_module(m, dim)?,
        None => ModulePresentation::trivial(dim),
    };
    let diag = validate_module(&module);
    if !diag.passed() {
        return Err(Error::config("module", diag.issues.join("; ")));
    }
    Ok(Config {
        h,
        module,
        suite: parse_suite(&root)?,
    })
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}
