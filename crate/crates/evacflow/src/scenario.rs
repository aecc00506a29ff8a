//! Scenario files: parsing, validation and emission.
//!
//! A scenario is a line-oriented text file of `key = value` entries plus a
//! mask block. The block starts at a line reading `mask:` and consumes the
//! following non-empty lines verbatim:
//!
//! ```text
//! # strip with a right-edge exit
//! hx = 0.015625
//! hy = 0.015625
//! delta = 0.5
//! rho0 = uniform 0.5
//! mask:
//! ....E
//! ....E
//! ```
//!
//! `#` starts a comment outside the mask block. `path = x y` may repeat.
//! Unknown keys, malformed values and rule violations are all collected and
//! reported together; parsing succeeds only for a fully valid scenario.

use crate::geometry::build_grid;
use crate::hyperbolic::SpeedLaw;
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedLawSpec {
    Linear { r_max: f64, v_max: f64 },
    Custom { table: Vec<(f64, f64)> },
}

impl SpeedLawSpec {
    pub fn r_max(&self) -> f64 {
        match self {
            SpeedLawSpec::Linear { r_max, .. } => *r_max,
            SpeedLawSpec::Custom { table } => table.last().map_or(0.0, |t| t.0),
        }
    }

    pub fn build(&self) -> Result<SpeedLaw, crate::hyperbolic::HyperbolicError> {
        match self {
            SpeedLawSpec::Linear { r_max, v_max } => SpeedLaw::linear(*r_max, *v_max),
            SpeedLawSpec::Custom { table } => SpeedLaw::custom(table),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rho0Spec {
    Uniform(f64),
    /// CSV with `i,j,...,value` rows; resolved relative to the scenario file.
    Csv(PathBuf),
}

/// A fully validated scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mask: String,
    pub hx: f64,
    pub hy: f64,
    pub delta: f64,
    pub theta: f64,
    pub law: SpeedLawSpec,
    pub rho0: Rho0Spec,
    pub cfl: f64,
    pub t_end: f64,
    pub mass_threshold: f64,
    pub output_instants: Vec<f64>,
    pub paths: Vec<[f64; 2]>,
    pub trace_stride: usize,
    pub cg_tol: f64,
    /// 0 selects the solver default of 50·(nx+ny).
    pub cg_max_iter: usize,
    pub stall_tol: f64,
    pub grad_tol: f64,
    /// 0 selects the default min(hx, hy)/2.
    pub dt_path: f64,
    pub t_cap: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            mask: String::new(),
            hx: 1.0,
            hy: 1.0,
            delta: 0.5,
            theta: 0.1,
            law: SpeedLawSpec::Linear {
                r_max: 1.0,
                v_max: 1.0,
            },
            rho0: Rho0Spec::Uniform(0.0),
            cfl: 0.4,
            t_end: 1.0,
            mass_threshold: 1e-3,
            output_instants: Vec::new(),
            paths: Vec::new(),
            trace_stride: 1,
            cg_tol: 1e-10,
            cg_max_iter: 0,
            stall_tol: 1e-3,
            grad_tol: 1e-4,
            dt_path: 0.0,
            t_cap: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Short rule name, e.g. `RhoOutOfRange` or `NoExit`.
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Violation>),
}

fn parse_f64(raw: &str, key: &str, line: usize) -> Result<f64, ScenarioError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| ScenarioError::Syntax {
            line,
            message: format!("{key} expects a number, got {raw:?}"),
        })
}

fn parse_f64_list(raw: &str, key: &str, line: usize) -> Result<Vec<f64>, ScenarioError> {
    raw.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| ScenarioError::Syntax {
                line,
                message: format!("{key} expects numbers, got {tok:?}"),
            })
        })
        .collect()
}

/// Parses and fully validates a scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut seen: Vec<String> = Vec::new();
    let mut mask_lines: Vec<String> = Vec::new();
    let mut in_mask = false;
    let mut mask_seen = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);

        if in_mask {
            if line.trim().is_empty() {
                in_mask = false;
            } else {
                mask_lines.push(line.to_string());
            }
            continue;
        }

        let stripped = line.trim();
        if stripped.is_empty() || stripped.starts_with('#') {
            continue;
        }
        if stripped == "mask:" {
            if mask_seen {
                return Err(ScenarioError::Syntax {
                    line: line_no,
                    message: "duplicate mask block".into(),
                });
            }
            in_mask = true;
            mask_seen = true;
            continue;
        }

        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ScenarioError::Syntax {
                line: line_no,
                message: format!("expected `key = value` or `mask:`, got {stripped:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();

        // Repeatable keys are exempt from the duplicate check.
        if key != "path" {
            if seen.iter().any(|k| k == key) {
                return Err(ScenarioError::Syntax {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
            seen.push(key.to_string());
        }

        match key {
            "hx" => sc.hx = parse_f64(value, key, line_no)?,
            "hy" => sc.hy = parse_f64(value, key, line_no)?,
            "delta" => sc.delta = parse_f64(value, key, line_no)?,
            "theta" => sc.theta = parse_f64(value, key, line_no)?,
            "cfl" => sc.cfl = parse_f64(value, key, line_no)?,
            "t_end" => sc.t_end = parse_f64(value, key, line_no)?,
            "mass_threshold" => sc.mass_threshold = parse_f64(value, key, line_no)?,
            "cg_tol" => sc.cg_tol = parse_f64(value, key, line_no)?,
            "stall_tol" => sc.stall_tol = parse_f64(value, key, line_no)?,
            "grad_tol" => sc.grad_tol = parse_f64(value, key, line_no)?,
            "dt_path" => sc.dt_path = parse_f64(value, key, line_no)?,
            "t_cap" => sc.t_cap = parse_f64(value, key, line_no)?,
            "cg_max_iter" => {
                sc.cg_max_iter = value.parse().map_err(|_| ScenarioError::Syntax {
                    line: line_no,
                    message: format!("cg_max_iter expects an integer, got {value:?}"),
                })?
            }
            "trace_stride" => {
                sc.trace_stride = value.parse().map_err(|_| ScenarioError::Syntax {
                    line: line_no,
                    message: format!("trace_stride expects an integer, got {value:?}"),
                })?
            }
            "seed" => {
                sc.seed = value.parse().map_err(|_| ScenarioError::Syntax {
                    line: line_no,
                    message: format!("seed expects an unsigned integer, got {value:?}"),
                })?
            }
            "output_instants" => sc.output_instants = parse_f64_list(value, key, line_no)?,
            "path" => {
                let nums = parse_f64_list(value, key, line_no)?;
                if nums.len() != 2 {
                    return Err(ScenarioError::Syntax {
                        line: line_no,
                        message: format!("path expects `x y`, got {value:?}"),
                    });
                }
                sc.paths.push([nums[0], nums[1]]);
            }
            "speed_law" => match value {
                "linear" => {
                    if !matches!(sc.law, SpeedLawSpec::Linear { .. }) {
                        sc.law = SpeedLawSpec::Linear {
                            r_max: 1.0,
                            v_max: 1.0,
                        };
                    }
                }
                "custom" => sc.law = SpeedLawSpec::Custom { table: Vec::new() },
                other => {
                    return Err(ScenarioError::Syntax {
                        line: line_no,
                        message: format!("speed_law must be `linear` or `custom`, got {other:?}"),
                    })
                }
            },
            "r_max" | "v_max" => {
                let v = parse_f64(value, key, line_no)?;
                match &mut sc.law {
                    SpeedLawSpec::Linear { r_max, v_max } => {
                        if key == "r_max" {
                            *r_max = v;
                        } else {
                            *v_max = v;
                        }
                    }
                    SpeedLawSpec::Custom { .. } => {
                        return Err(ScenarioError::Syntax {
                            line: line_no,
                            message: format!("{key} applies to the linear law only"),
                        })
                    }
                }
            }
            "speed_table" => {
                let mut table = Vec::new();
                for pair in value.split(',') {
                    let Some((r, v)) = pair.split_once(':') else {
                        return Err(ScenarioError::Syntax {
                            line: line_no,
                            message: format!("speed_table entries are `rho:v`, got {pair:?}"),
                        });
                    };
                    table.push((
                        parse_f64(r, "speed_table rho", line_no)?,
                        parse_f64(v, "speed_table v", line_no)?,
                    ));
                }
                sc.law = SpeedLawSpec::Custom { table };
            }
            "rho0" => {
                let mut parts = value.splitn(2, char::is_whitespace);
                match (parts.next(), parts.next()) {
                    (Some("uniform"), Some(v)) => {
                        sc.rho0 = Rho0Spec::Uniform(parse_f64(v, "rho0 uniform", line_no)?)
                    }
                    (Some("csv"), Some(p)) => sc.rho0 = Rho0Spec::Csv(PathBuf::from(p.trim())),
                    _ => {
                        return Err(ScenarioError::Syntax {
                            line: line_no,
                            message: format!(
                                "rho0 is `uniform VALUE` or `csv PATH`, got {value:?}"
                            ),
                        })
                    }
                }
            }
            other => {
                return Err(ScenarioError::Syntax {
                    line: line_no,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }

    sc.mask = mask_lines.join("\n");
    validate(&sc)?;
    Ok(sc)
}

/// Checks every scenario rule, collecting all violations.
pub fn validate(sc: &Scenario) -> Result<(), ScenarioError> {
    let mut violations = Vec::new();
    let mut push = |rule: &str, message: String| {
        violations.push(Violation {
            rule: rule.to_string(),
            message,
        });
    };

    if sc.mask.is_empty() {
        push("MissingMask", "scenario has no mask block".into());
    } else if let Err(e) = build_grid(
        &sc.mask,
        sc.hx.max(f64::MIN_POSITIVE),
        sc.hy.max(f64::MIN_POSITIVE),
    ) {
        push(grid_rule_name(&e), e.to_string());
    }
    if !(sc.hx > 0.0 && sc.hy > 0.0) {
        push(
            "NonPositiveSpacing",
            format!("hx = {}, hy = {}", sc.hx, sc.hy),
        );
    }
    if !(sc.delta > 0.0) {
        push(
            "NonPositiveDelta",
            format!("delta must be strictly positive, got {}", sc.delta),
        );
    }
    if !(sc.theta > 0.0) {
        push(
            "NonPositiveTheta",
            format!("theta must be strictly positive, got {}", sc.theta),
        );
    }
    if !(sc.cfl > 0.0 && sc.cfl < 1.0) {
        push(
            "CflOutOfRange",
            format!("cfl must lie in (0, 1), got {}", sc.cfl),
        );
    }
    if !(sc.t_end > 0.0) {
        push(
            "NonPositiveTEnd",
            format!("t_end must be positive, got {}", sc.t_end),
        );
    }
    if !(sc.mass_threshold > 0.0 && sc.mass_threshold < 1.0) {
        push(
            "MassThresholdOutOfRange",
            format!(
                "mass_threshold must lie in (0, 1), got {}",
                sc.mass_threshold
            ),
        );
    }
    if !(sc.cg_tol > 0.0 && sc.cg_tol < 1.0) {
        push(
            "CgTolOutOfRange",
            format!("cg_tol must lie in (0, 1), got {}", sc.cg_tol),
        );
    }
    if !(sc.stall_tol > 0.0) {
        push(
            "NonPositiveStallTol",
            format!("stall_tol must be positive, got {}", sc.stall_tol),
        );
    }
    if !(sc.grad_tol > 0.0) {
        push(
            "NonPositiveGradTol",
            format!("grad_tol must be positive, got {}", sc.grad_tol),
        );
    }
    if sc.dt_path < 0.0 {
        push(
            "NegativeDtPath",
            format!("dt_path must be nonnegative, got {}", sc.dt_path),
        );
    }
    if sc.t_cap < 0.0 {
        push(
            "NegativeTCap",
            format!("t_cap must be nonnegative, got {}", sc.t_cap),
        );
    }
    if sc.trace_stride == 0 {
        push("ZeroTraceStride", "trace_stride must be at least 1".into());
    }
    for t in &sc.output_instants {
        if !(*t > 0.0) {
            push(
                "NonPositiveInstant",
                format!("output instant {t} must be positive"),
            );
        }
    }

    match sc.law.build() {
        Ok(_) => {
            if let Rho0Spec::Uniform(v) = sc.rho0 {
                let r_max = sc.law.r_max();
                if !(0.0..=r_max).contains(&v) {
                    push("RhoOutOfRange", format!("rho0 = {v} outside [0, {r_max}]"));
                }
            }
        }
        Err(e) => push("BadSpeedLaw", e.to_string()),
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(ScenarioError::Validation(violations))
    }
}

fn grid_rule_name(e: &crate::geometry::GridError) -> &'static str {
    use crate::geometry::GridError::*;
    match e {
        RaggedMask { .. } => "RaggedMask",
        InvalidMaskChar { .. } => "InvalidMaskChar",
        NonPositiveSpacing { .. } => "NonPositiveSpacing",
        EmptyDomain => "EmptyDomain",
        DisconnectedDomain => "DisconnectedDomain",
        NoExit => "NoExit",
        AdjacentExitRuns { .. } => "AdjacentExitRuns",
        DanglingExitCell { .. } => "DanglingExitCell",
    }
}

/// Serializes a scenario to the text format; `parse_scenario(emit(s)) == s`
/// for every valid scenario.
pub fn emit(sc: &Scenario) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("hx", format!("{}", sc.hx));
    kv("hy", format!("{}", sc.hy));
    kv("delta", format!("{}", sc.delta));
    kv("theta", format!("{}", sc.theta));
    match &sc.law {
        SpeedLawSpec::Linear { r_max, v_max } => {
            kv("speed_law", "linear".into());
            kv("r_max", format!("{r_max}"));
            kv("v_max", format!("{v_max}"));
        }
        SpeedLawSpec::Custom { table } => {
            let entries: Vec<String> = table.iter().map(|(r, v)| format!("{r}:{v}")).collect();
            kv("speed_table", entries.join(", "));
        }
    }
    match &sc.rho0 {
        Rho0Spec::Uniform(v) => kv("rho0", format!("uniform {v}")),
        Rho0Spec::Csv(p) => kv("rho0", format!("csv {}", p.display())),
    }
    kv("cfl", format!("{}", sc.cfl));
    kv("t_end", format!("{}", sc.t_end));
    kv("mass_threshold", format!("{}", sc.mass_threshold));
    if !sc.output_instants.is_empty() {
        let list: Vec<String> = sc.output_instants.iter().map(|t| format!("{t}")).collect();
        kv("output_instants", list.join(" "));
    }
    for p in &sc.paths {
        kv("path", format!("{} {}", p[0], p[1]));
    }
    kv("trace_stride", format!("{}", sc.trace_stride));
    kv("cg_tol", format!("{}", sc.cg_tol));
    kv("cg_max_iter", format!("{}", sc.cg_max_iter));
    kv("stall_tol", format!("{}", sc.stall_tol));
    kv("grad_tol", format!("{}", sc.grad_tol));
    kv("dt_path", format!("{}", sc.dt_path));
    kv("t_cap", format!("{}", sc.t_cap));
    kv("seed", format!("{}", sc.seed));
    out.push_str("mask:\n");
    out.push_str(&sc.mask);
    out.push('\n');
    out
}
