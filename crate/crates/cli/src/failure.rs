use serde::Serialize;
use serde_json::Value;

use sdot_core::Error;

/// Why a command stopped without success, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: unreadable or malformed input.
    Malformed { field: String, message: String },
    /// Exit 2: a precondition or checked property does not hold.
    Check {
        check: String,
        message: String,
        details: Value,
    },
    /// Exit 3: the Newton iteration hit its cap.
    IterationCap { iterations: usize, residual: f64 },
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    exit_code: i32,
    kind: &'static str,
    name: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Value::is_null")]
    details: &'a Value,
}

impl Failure {
    pub fn malformed(field: impl Into<String>, message: impl Into<String>) -> Self {
        Failure::Malformed {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn check(check: impl Into<String>, message: impl Into<String>, details: Value) -> Self {
        Failure::Check {
            check: check.into(),
            message: message.into(),
            details,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Malformed { .. } => 1,
            Failure::Check { .. } => 2,
            Failure::IterationCap { .. } => 3,
        }
    }

    /// One JSON object describing the failure.
    pub fn diagnostic(&self) -> String {
        let null = Value::Null;
        let cap_message;
        let (kind, name, message, details) = match self {
            Failure::Malformed { field, message } => ("malformed_input", field.as_str(), message.as_str(), &null),
            Failure::Check {
                check,
                message,
                details,
            } => ("failed_check", check.as_str(), message.as_str(), details),
            Failure::IterationCap {
                iterations,
                residual,
            } => {
                cap_message = format!("stopped after {iterations} Newton steps with residual {residual:.3e}");
                ("iteration_cap", "max_newton_iters", cap_message.as_str(), &null)
            }
        };
        serde_json::to_string(&Diagnostic {
            exit_code: self.exit_code(),
            kind,
            name,
            message,
            details,
        })
        .expect("diagnostics serialize")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Invalid { field, .. } => Failure::malformed(field, message),
            Error::DimensionMismatch { what, .. } | Error::NonFinite { what, .. } => {
                Failure::malformed(what, message)
            }
            Error::Io(_) => Failure::malformed("io", message),
            Error::InfeasibleFee { .. } => Failure::malformed("fee", message),
            Error::BacktrackExhausted(ref f) => Failure::check(
                "backtracking",
                message,
                serde_json::json!({
                    "iteration": f.iteration,
                    "psi": f.psi,
                    "masses": f.masses,
                    "gradient": f.gradient,
                    "direction": f.direction,
                }),
            ),
            Error::NotConverged {
                iterations,
                residual,
            } => Failure::IterationCap {
                iterations,
                residual,
            },
            other => Failure::check(error_name(&other), message, Value::Null),
        }
    }
}

fn error_name(e: &Error) -> &'static str {
    match e {
        Error::Conditioning { .. } => "cell_mass_floor",
        Error::JacobianUnavailable { .. } => "jacobian",
        Error::RootBracket { .. } => "conjugate_root",
        Error::ClampedCoordinate { .. } => "interior_maximizer",
        Error::DegenerateCurvature { .. } => "strong_convexity",
        Error::ShuffleBisection { .. } => "shuffle_bisection",
        Error::ShuffleIterationCap { .. } => "shuffle_iteration_cap",
        Error::SingularHessian => "newton_system",
        Error::TooManySites { .. } => "brute_force_sites",
        Error::EmptyFeasibleGrid => "brute_force_grid",
        _ => "error",
    }
}
