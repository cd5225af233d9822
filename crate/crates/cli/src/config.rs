//! System definition files.
//!
//! Configs are JSON with exact time values: integers and decimal literals
//! are parsed to exact rationals (never through binary floating point), and
//! strings like `"1/3"` are accepted where a decimal cannot express the
//! value. Matrix entries are expression strings in the time variable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use chronoctl_core::error::Error as CoreError;
use chronoctl_core::exact::{self, TimePoint};
use chronoctl_core::expr::MatrixExpr;
use chronoctl_core::linsys::{Control, Direction, LinearSystem};
use chronoctl_core::timescale::{Grid, ScaleKind, TimeScale};

use crate::CliError;

/// Exact time value in a config: a JSON number (parsed from its literal
/// text) or a string, including `p/q` fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExactValue {
    Number(serde_json::Number),
    Text(String),
}

impl ExactValue {
    pub fn to_time(&self) -> Result<TimePoint, CoreError> {
        match self {
            ExactValue::Number(n) => exact::parse_time(&n.to_string()),
            ExactValue::Text(s) => exact::parse_time(s),
        }
    }

    pub fn from_time(t: &TimePoint) -> ExactValue {
        if t.is_integer() {
            ExactValue::Number(serde_json::Number::from(*t.numer()))
        } else {
            ExactValue::Text(exact::format_time(t))
        }
    }
}

/// Time-scale descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<ExactValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<ExactValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<ExactValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentConfig>>,
    pub window: [ExactValue; 2],
}

/// Explicit component: an interval `[a, b]` or a single point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentConfig {
    Interval([ExactValue; 2]),
    Point(ExactValue),
}

/// A complete system definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub timescale: ScaleConfig,
    pub direction: String,
    pub a: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<String>>>,
    pub anchor: ExactValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[ExactValue; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_step: Option<f64>,
}

/// A loaded and validated system, ready to run.
pub struct LoadedSystem {
    pub system: LinearSystem,
    pub grid: Arc<Grid>,
    pub initial_state: Option<Vec<f64>>,
    pub control: Option<Control>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl SystemConfig {
    pub fn from_path(path: &std::path::Path) -> Result<SystemConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| config_err(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn build_scale(&self) -> Result<Arc<TimeScale>, CliError> {
        let lo = self.timescale.window[0].to_time()?;
        let hi = self.timescale.window[1].to_time()?;
        let kind = match self.timescale.kind.as_str() {
            "reals" => ScaleKind::Reals,
            "integers" => ScaleKind::Integers,
            "h_integers" => {
                let h = self
                    .timescale
                    .h
                    .as_ref()
                    .ok_or_else(|| config_err("h_integers needs field 'h'"))?
                    .to_time()?;
                ScaleKind::HIntegers(h)
            }
            "periodic_union" => {
                let a = self
                    .timescale
                    .a
                    .as_ref()
                    .ok_or_else(|| config_err("periodic_union needs field 'a'"))?
                    .to_time()?;
                let b = self
                    .timescale
                    .b
                    .as_ref()
                    .ok_or_else(|| config_err("periodic_union needs field 'b'"))?
                    .to_time()?;
                ScaleKind::PeriodicUnion(a, b)
            }
            "explicit" => {
                let comps = self
                    .timescale
                    .components
                    .as_ref()
                    .ok_or_else(|| config_err("explicit scale needs field 'components'"))?;
                let mut list = Vec::with_capacity(comps.len());
                for c in comps {
                    match c {
                        ComponentConfig::Interval([a, b]) => {
                            list.push((a.to_time()?, b.to_time()?))
                        }
                        ComponentConfig::Point(p) => {
                            let t = p.to_time()?;
                            list.push((t, t));
                        }
                    }
                }
                ScaleKind::Explicit(list)
            }
            other => return Err(config_err(format!("unknown time scale kind '{other}'"))),
        };
        Ok(Arc::new(TimeScale::from_generator(kind, lo, hi)?))
    }

    fn parse_matrix(name: &str, rows: &[Vec<String>]) -> Result<MatrixExpr, CliError> {
        MatrixExpr::parse(rows).map_err(|e| config_err(format!("matrix {name}: {e}")))
    }

    /// Builds the system, its grid, and the optional solver inputs.
    pub fn load(&self) -> Result<LoadedSystem, CliError> {
        let ts = self.build_scale()?;
        let direction = match self.direction.as_str() {
            "forward" => Direction::Forward,
            "backward" => Direction::Backward,
            other => return Err(config_err(format!("unknown direction '{other}'"))),
        };
        let a = Self::parse_matrix("a", &self.a)?;
        let n = a.rows();
        let b = match &self.b {
            Some(rows) => Self::parse_matrix("b", rows)?,
            None => MatrixExpr::zeros(n, 1),
        };
        let m = b.cols();
        let c = match &self.c {
            Some(rows) => Self::parse_matrix("c", rows)?,
            None => MatrixExpr::identity(n),
        };
        let p = c.rows();
        let d = match &self.d {
            Some(rows) => Self::parse_matrix("d", rows)?,
            None => MatrixExpr::zeros(p, m),
        };
        let anchor = self.anchor.to_time()?;
        let horizon = match &self.window {
            Some([lo, hi]) => {
                let lo = lo.to_time()?;
                let hi = hi.to_time()?;
                match direction {
                    Direction::Backward => {
                        if hi != anchor {
                            return Err(config_err("backward window must end at the anchor"));
                        }
                        lo
                    }
                    Direction::Forward => {
                        if lo != anchor {
                            return Err(config_err("forward window must start at the anchor"));
                        }
                        hi
                    }
                }
            }
            None => match direction {
                Direction::Backward => ts.min(),
                Direction::Forward => ts.max(),
            },
        };
        let system = LinearSystem::new(direction, ts, a, b, c, d, anchor, horizon)?;

        let dense_step = match std::env::var("CHRONOCTL_DENSE_STEP") {
            Ok(text) => Some(text.parse::<f64>().map_err(|_| {
                config_err(format!("CHRONOCTL_DENSE_STEP is not a number: '{text}'"))
            })?),
            Err(_) => self.dense_step,
        };
        if let Some(h) = dense_step {
            if h.is_nan() || h <= 0.0 {
                return Err(config_err("dense_step must be positive"));
            }
        }
        let grid = Arc::new(system.grid(dense_step)?);

        if let Some(state) = &self.initial_state {
            if state.len() != system.dims().n {
                return Err(config_err(format!(
                    "initial_state has {} entries, expected {}",
                    state.len(),
                    system.dims().n
                )));
            }
        }
        let control = match &self.control {
            Some(entries) => {
                if entries.len() != system.dims().m {
                    return Err(config_err(format!(
                        "control has {} entries, expected {}",
                        entries.len(),
                        system.dims().m
                    )));
                }
                let rows: Vec<Vec<String>> = entries.iter().map(|e| vec![e.clone()]).collect();
                Some(Control::Expr(Self::parse_matrix("control", &rows)?))
            }
            None => None,
        };
        Ok(LoadedSystem {
            system,
            grid,
            initial_state: self.initial_state.clone(),
            control,
        })
    }

    /// The dual config: scale dualized (serialized as explicit components),
    /// direction flipped, matrix entries substituted and signed per the
    /// duality rules, anchor and window negated, control reflected.
    pub fn dualize(&self) -> Result<SystemConfig, CliError> {
        let loaded = self.load()?;
        let dual = loaded.system.dualize();
        let comps: Vec<ComponentConfig> = dual
            .scale()
            .components()
            .iter()
            .map(|(a, b)| {
                if a == b {
                    ComponentConfig::Point(ExactValue::from_time(a))
                } else {
                    ComponentConfig::Interval([ExactValue::from_time(a), ExactValue::from_time(b)])
                }
            })
            .collect();
        let window = [
            ExactValue::from_time(&dual.scale().min()),
            ExactValue::from_time(&dual.scale().max()),
        ];
        let direction = match dual.direction() {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        };
        let work_window = {
            let (lo, hi) = if dual.anchor() <= dual.horizon() {
                (dual.anchor(), dual.horizon())
            } else {
                (dual.horizon(), dual.anchor())
            };
            Some([ExactValue::from_time(&lo), ExactValue::from_time(&hi)])
        };
        let control = self.control.as_ref().map(|entries| {
            entries
                .iter()
                .map(|text| {
                    chronoctl_core::expr::Expr::parse(text).map(|e| e.reflect().to_string())
                })
                .collect::<Result<Vec<String>, _>>()
        });
        let control = match control {
            Some(Ok(c)) => Some(c),
            Some(Err(e)) => return Err(config_err(format!("control: {e}"))),
            None => None,
        };
        Ok(SystemConfig {
            timescale: ScaleConfig {
                kind: "explicit".into(),
                a: None,
                b: None,
                h: None,
                components: Some(comps),
                window,
            },
            direction: direction.into(),
            a: dual.a().to_strings(),
            b: Some(dual.b().to_strings()),
            c: Some(dual.c().to_strings()),
            d: Some(dual.d().to_strings()),
            anchor: ExactValue::from_time(&dual.anchor()),
            window: work_window,
            initial_state: self.initial_state.clone(),
            control,
            dense_step: self.dense_step,
        })
    }
}
