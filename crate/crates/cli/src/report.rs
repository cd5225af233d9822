//! Deterministic JSON reports.
//!
//! Every floating point number is serialized with 17 significant digits
//! through the arbitrary-precision number type, keys are emitted sorted,
//! and nothing time- or environment-dependent enters unless explicitly
//! requested, so reports are byte-identical across runs.

use std::str::FromStr;

use serde_json::{Map, Number, Value};

use chronoctl_core::analysis::{GramianReport, RankReport};
use chronoctl_core::exact::to_f64;
use chronoctl_core::linsys::FactorInvertibility;
use chronoctl_core::realization::MinimalityReport;

/// A float rendered with 17 significant digits.
pub fn float(x: f64) -> Value {
    let text = format!("{x:.16e}");
    Value::Number(Number::from_str(&text).expect("formatted float is a valid JSON number"))
}

pub fn float_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

pub fn matrix(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| float(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn rank_report(r: &RankReport) -> Value {
    let mut obj = Map::new();
    obj.insert("test".into(), Value::String(r.test.to_string()));
    obj.insert("rows".into(), Value::from(r.rows));
    obj.insert("cols".into(), Value::from(r.cols));
    obj.insert("singular_values".into(), float_vec(&r.singular_values));
    obj.insert("rank".into(), Value::from(r.rank));
    obj.insert("threshold".into(), float(r.threshold));
    obj.insert(
        "test_point".into(),
        r.test_point.map(float).unwrap_or(Value::Null),
    );
    obj.insert(
        "order".into(),
        r.order.map(Value::from).unwrap_or(Value::Null),
    );
    obj.insert(
        "verdict".into(),
        Value::String(r.verdict.as_str().to_string()),
    );
    Value::Object(obj)
}

pub fn gramian_report(name: &str, g: &GramianReport) -> Value {
    let mut obj = Map::new();
    obj.insert("test".into(), Value::String(name.to_string()));
    obj.insert("gramian".into(), matrix(&g.gramian));
    obj.insert("eigenvalues".into(), float_vec(&g.eigenvalues));
    obj.insert("rank".into(), Value::from(g.rank));
    obj.insert("threshold".into(), float(g.threshold));
    obj.insert(
        "interval".into(),
        Value::Array(vec![
            float(to_f64(&g.interval.0)),
            float(to_f64(&g.interval.1)),
        ]),
    );
    obj.insert("progressive".into(), Value::Bool(g.progressive));
    obj.insert("full_rank".into(), Value::Bool(g.full_rank));
    Value::Object(obj)
}

pub fn invertibility(name: &str, f: &FactorInvertibility) -> Value {
    let mut obj = Map::new();
    obj.insert("check".into(), Value::String(name.to_string()));
    obj.insert("ok".into(), Value::Bool(f.ok));
    obj.insert(
        "witness".into(),
        f.witness
            .as_ref()
            .map(|w| float(to_f64(w)))
            .unwrap_or(Value::Null),
    );
    obj.insert("checked_points".into(), Value::from(f.checked_points));
    Value::Object(obj)
}

pub fn minimality_report(r: &MinimalityReport) -> Value {
    let mut obj = Map::new();
    obj.insert(
        "verdict".into(),
        Value::String(r.verdict.as_str().to_string()),
    );
    obj.insert("controllability".into(), rank_report(&r.controllability));
    obj.insert("observability".into(), rank_report(&r.observability));
    obj.insert(
        "progressivity".into(),
        r.progressivity
            .as_ref()
            .map(|p| invertibility("progressive", p))
            .unwrap_or(Value::Null),
    );
    obj.insert("separable_rank".into(), Value::from(r.separable_rank));
    obj.insert("kernel_residual".into(), float(r.kernel_residual));
    obj.insert("state_dim".into(), Value::from(r.state_dim));
    obj.insert(
        "realizable_at_sampled_resolution".into(),
        Value::Bool(r.separable_rank <= r.state_dim),
    );
    Value::Object(obj)
}

/// Assembles the envelope shared by all report-producing commands.
pub fn envelope(
    command: &str,
    config_path: &str,
    dense_step: f64,
    body: Vec<(&'static str, Value)>,
    wall_time_ms: Option<f64>,
) -> Value {
    let mut obj = Map::new();
    obj.insert("command".into(), Value::String(command.to_string()));
    obj.insert("config".into(), Value::String(config_path.to_string()));
    obj.insert(
        "library_version".into(),
        Value::String(env!("CARGO_PKG_VERSION").to_string()),
    );
    obj.insert("dense_step".into(), float(dense_step));
    let mut tol = Map::new();
    tol.insert(
        "rank_rel_threshold".into(),
        float(chronoctl_core::analysis::RANK_REL_TOL),
    );
    tol.insert(
        "invertibility_rel_threshold".into(),
        float(chronoctl_core::linsys::INVERTIBILITY_REL_TOL),
    );
    tol.insert(
        "separable_rel_tol".into(),
        float(chronoctl_core::realization::SEPARABLE_REL_TOL),
    );
    obj.insert("tolerances".into(), Value::Object(tol));
    for (key, value) in body {
        obj.insert(key.to_string(), value);
    }
    if let Some(ms) = wall_time_ms {
        obj.insert("wall_time_ms".into(), float(ms));
    }
    Value::Object(obj)
}

/// Renders a report with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    text
}

/// Formats one float for CSV output (17 significant digits).
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
