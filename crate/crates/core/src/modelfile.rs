//! JSON model files.
//!
//! ```json
//! {
//!   "map_a": {"c": [[-10, 0], [1, -1]], "d": [[9, 1], [0, 0]]},
//!   "map_b": {"poisson": "41/9"},
//!   "theta1": 0.25,
//!   "theta2": 1,
//!   "solver": {"epsilon": 1e-20, "schedule_step": 10, "max_schedule_steps": 50, "series_tol": 1e-14}
//! }
//! ```
//!
//! A MAP is given as `{"c": ..., "d": ...}`, `{"poisson": rate}` or
//! `{"erlang": [stages, stage_rate]}`. Any number may also be written as a
//! string holding a decimal or a fraction `"p/q"`. `"description"` is free text.

use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::error::Error;
use crate::linalg::Matrix;
use crate::map::MarkovianArrivalProcess;
use crate::model::QueueModel;
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("field `{field}`: {source}")]
    Model {
        field: String,
        #[source]
        source: Error,
    },
}

impl ModelFileError {
    /// True when the file parsed but describes an invalid model.
    pub fn is_invalid_model(&self) -> bool {
        matches!(self, ModelFileError::Model { .. })
    }
}

#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: QueueModel,
    pub solver: SolverConfig,
    pub description: Option<String>,
}

fn field_err(field: &str, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Reads a number, a decimal string, or a `"p/q"` fraction string.
pub fn parse_number(v: &Value, field: &str) -> Result<f64, ModelFileError> {
    let x = match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| field_err(field, "number out of range"))?,
        Value::String(s) => parse_number_str(s).map_err(|m| field_err(field, m))?,
        other => {
            return Err(field_err(
                field,
                format!("expected a number, found {}", kind(other)),
            ))
        }
    };
    if !x.is_finite() {
        return Err(field_err(field, "number is not finite"));
    }
    Ok(x)
}

/// Parses `"1.5"`, `"41/9"` or `"-1/2"`.
pub fn parse_number_str(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in \"{s}\""))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in \"{s}\""))?;
        if q == 0.0 {
            return Err(format!("zero denominator in \"{s}\""));
        }
        return Ok(p / q);
    }
    s.parse().map_err(|_| format!("\"{s}\" is not a number"))
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn parse_matrix(v: &Value, field: &str) -> Result<Matrix, ModelFileError> {
    let rows = v
        .as_array()
        .ok_or_else(|| field_err(field, format!("expected an array of rows, found {}", kind(v))))?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let path = format!("{field}[{i}]");
        let entries = row
            .as_array()
            .ok_or_else(|| field_err(&path, format!("expected a row array, found {}", kind(row))))?;
        let parsed = entries
            .iter()
            .enumerate()
            .map(|(j, x)| parse_number(x, &format!("{path}[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(parsed);
    }
    Matrix::from_rows(&out).map_err(|e| field_err(field, e.to_string()))
}

fn parse_map(v: &Value, field: &str) -> Result<MarkovianArrivalProcess, ModelFileError> {
    let obj = v
        .as_object()
        .ok_or_else(|| field_err(field, format!("expected an object, found {}", kind(v))))?;
    let invalid = |e: crate::error::MapError| ModelFileError::Model {
        field: field.to_string(),
        source: e.into(),
    };
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    match keys.as_slice() {
        ["poisson"] => {
            let rate = parse_number(&obj["poisson"], &format!("{field}.poisson"))?;
            MarkovianArrivalProcess::poisson(rate).map_err(invalid)
        }
        ["erlang"] => {
            let path = format!("{field}.erlang");
            let pair = obj["erlang"]
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| field_err(&path, "expected [stages, stage_rate]"))?;
            let stages = parse_number(&pair[0], &format!("{path}[0]"))?;
            if stages < 1.0 || stages.fract() != 0.0 {
                return Err(field_err(
                    &format!("{path}[0]"),
                    "stages must be a positive integer",
                ));
            }
            let rate = parse_number(&pair[1], &format!("{path}[1]"))?;
            MarkovianArrivalProcess::erlang(stages as usize, rate).map_err(invalid)
        }
        _ if obj.len() == 2 && obj.contains_key("c") && obj.contains_key("d") => {
            let c = parse_matrix(&obj["c"], &format!("{field}.c"))?;
            let d = parse_matrix(&obj["d"], &format!("{field}.d"))?;
            MarkovianArrivalProcess::validate(c, d).map_err(invalid)
        }
        _ => Err(field_err(
            field,
            "expected {\"c\": .., \"d\": ..}, {\"poisson\": rate} or {\"erlang\": [stages, rate]}",
        )),
    }
}

fn parse_solver(v: &Value) -> Result<SolverConfig, ModelFileError> {
    let obj = v
        .as_object()
        .ok_or_else(|| field_err("solver", format!("expected an object, found {}", kind(v))))?;
    let defaults = SolverConfig::default();
    let mut epsilon = defaults.epsilon;
    let mut series_tol = defaults.series_tol;
    let mut step = 10usize;
    let mut steps = defaults.level_schedule.len();
    for (key, value) in obj {
        let path = format!("solver.{key}");
        match key.as_str() {
            "epsilon" => epsilon = parse_number(value, &path)?,
            "series_tol" => series_tol = parse_number(value, &path)?,
            "schedule_step" | "max_schedule_steps" => {
                let n = parse_number(value, &path)?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(field_err(&path, "must be a positive integer"));
                }
                if key == "schedule_step" {
                    step = n as usize;
                } else {
                    steps = n as usize;
                }
            }
            _ => return Err(field_err(&path, "unknown solver setting")),
        }
    }
    let cfg = SolverConfig::linear(epsilon, step, steps, series_tol);
    cfg.validate().map_err(|e| ModelFileError::Model {
        field: "solver".into(),
        source: e,
    })?;
    Ok(cfg)
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ModelFileError> {
    obj.get(key).ok_or_else(|| field_err(key, "missing"))
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let root: Value = serde_json::from_str(text).map_err(|e| ModelFileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let obj = root
            .as_object()
            .ok_or_else(|| field_err("<root>", format!("expected an object, found {}", kind(&root))))?;
        for key in obj.keys() {
            if !matches!(
                key.as_str(),
                "map_a" | "map_b" | "theta1" | "theta2" | "solver" | "description"
            ) {
                return Err(field_err(key, "unknown field"));
            }
        }
        let map_a = parse_map(get(obj, "map_a")?, "map_a")?;
        let map_b = parse_map(get(obj, "map_b")?, "map_b")?;
        let theta1 = parse_number(get(obj, "theta1")?, "theta1")?;
        let theta2 = parse_number(get(obj, "theta2")?, "theta2")?;
        let model = QueueModel::new(map_a, map_b, theta1, theta2).map_err(|e| ModelFileError::Model {
            field: if theta1 < 0.0 { "theta1" } else { "theta2" }.into(),
            source: e,
        })?;
        let solver = match obj.get("solver") {
            Some(v) => parse_solver(v)?,
            None => SolverConfig::default(),
        };
        let description = match obj.get("description") {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => {
                return Err(field_err(
                    "description",
                    format!("expected a string, found {}", kind(other)),
                ))
            }
        };
        Ok(Self {
            model,
            solver,
            description,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelFileError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_map_forms() {
        let f = ModelFile::parse(
            r#"{
                "map_a": {"c": [[-10, 0], [1, -1]], "d": [[9, 1], [0, 0]]},
                "map_b": {"erlang": [2, 4]},
                "theta1": "1/4", "theta2": 1,
                "description": "mixed"
            }"#,
        )
        .unwrap();
        assert_eq!(f.model.theta1, 0.25);
        assert_eq!(f.model.m1(), 2);
        assert!((f.model.map_b.rate().unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(f.solver, SolverConfig::default());

        let f = ModelFile::parse(
            r#"{"map_a": {"poisson": 5}, "map_b": {"poisson": "41/9"}, "theta1": 0.75, "theta2": 1,
                "solver": {"epsilon": 1e-12, "schedule_step": 5}}"#,
        )
        .unwrap();
        assert!((f.model.map_b.rate().unwrap() - 41.0 / 9.0).abs() < 1e-14);
        assert_eq!(f.solver.epsilon, 1e-12);
        assert_eq!(f.solver.level_schedule[..3], [5, 10, 15]);
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = ModelFile::parse("{\n  \"map_a\": {\"poisson\": 5},\n  \"map_b\" {}\n}").unwrap_err();
        match err {
            ModelFileError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_errors_name_the_field() {
        let err = ModelFile::parse(
            r#"{"map_a": {"c": [[-1, "x"]], "d": [[1, 0]]}, "map_b": {"poisson": 1}, "theta1": 1, "theta2": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("map_a.c[0][1]"), "{err}");
        let err = ModelFile::parse(r#"{"map_a": {"poisson": 1}, "theta1": 1, "theta2": 1}"#).unwrap_err();
        assert!(err.to_string().contains("map_b"), "{err}");
        let err = ModelFile::parse(
            r#"{"map_a": {"poisson": 1}, "map_b": {"poisson": 1}, "theta1": 1, "theta2": 1, "thetaa": 3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("thetaa"), "{err}");
    }

    #[test]
    fn invalid_models_are_flagged() {
        let err = ModelFile::parse(
            r#"{"map_a": {"c": [[-1]], "d": [[2]]}, "map_b": {"poisson": 1}, "theta1": 1, "theta2": 1}"#,
        )
        .unwrap_err();
        assert!(err.is_invalid_model());
        let err = ModelFile::parse(
            r#"{"map_a": {"poisson": 1}, "map_b": {"poisson": 1}, "theta1": -1, "theta2": 1}"#,
        )
        .unwrap_err();
        assert!(err.is_invalid_model());
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_number_str("41/9").unwrap(), 41.0 / 9.0);
        assert_eq!(parse_number_str(" -1/2 ").unwrap(), -0.5);
        assert_eq!(parse_number_str("2.5").unwrap(), 2.5);
        assert!(parse_number_str("1/0").is_err());
        assert!(parse_number_str("abc").is_err());
    }
}
