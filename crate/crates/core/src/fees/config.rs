//! JSON form of a fee: a list of `{kind, params, domain, offset?}` parts.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{FeeKind, ScalarConvexFn, SmoothedProfile, SplittingFee};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeePartConfig {
    pub kind: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    pub domain: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParams {
    #[serde(default)]
    center: f64,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportParams {
    #[serde(default = "one")]
    scale: f64,
    support: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedParams {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothedParams {
    x0: f64,
    h: f64,
    second: Vec<f64>,
    first: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvexifiedParams {
    eta: f64,
    inner: FeePartConfig,
}

fn params<T: for<'de> Deserialize<'de>>(kind: &str, value: &Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| Error::invalid("fee.params", format!("{kind}: {e}")))
}

impl FeePartConfig {
    pub fn build(&self) -> Result<ScalarConvexFn> {
        let domain = self.domain;
        let part = match self.kind.as_str() {
            "quadratic" => {
                let p: QuadraticParams = params(&self.kind, &self.params)?;
                ScalarConvexFn::quadratic(p.center, p.scale, domain)?
            }
            "entropy" => {
                let p: SupportParams = params(&self.kind, &self.params)?;
                let support = p.support.unwrap_or(domain);
                ScalarConvexFn::new(FeeKind::Entropy { scale: p.scale, support }, domain)?
            }
            "log_barrier" => {
                let p: SupportParams = params(&self.kind, &self.params)?;
                let support = p.support.unwrap_or(domain);
                ScalarConvexFn::log_barrier(p.scale, support, domain)?
            }
            "indicator" => {
                if self.params.as_object().is_some_and(|m| !m.is_empty()) {
                    return Err(Error::invalid("fee.params", "indicator takes no parameters"));
                }
                ScalarConvexFn::indicator(domain)?
            }
            "tabulated" => {
                let p: TabulatedParams = params(&self.kind, &self.params)?;
                ScalarConvexFn::tabulated(p.knots, p.values, domain)?
            }
            "tabulated_smoothed" => {
                let p: SmoothedParams = params(&self.kind, &self.params)?;
                let profile = SmoothedProfile::new(p.x0, p.h, p.second, p.first, p.values)?;
                ScalarConvexFn::new(FeeKind::Smoothed(profile), domain)?
            }
            "convexified" => {
                let p: ConvexifiedParams = params(&self.kind, &self.params)?;
                let inner = Box::new(p.inner.build()?);
                ScalarConvexFn::new(FeeKind::Convexified { inner, eta: p.eta }, domain)?
            }
            other => {
                return Err(Error::invalid(
                    "fee.kind",
                    format!(
                        "unknown kind {other:?}; expected quadratic, entropy, log_barrier, \
                         indicator, tabulated, tabulated_smoothed or convexified"
                    ),
                ))
            }
        };
        Ok(part.with_offset(self.offset.unwrap_or(0.0)))
    }

    pub fn describe(f: &ScalarConvexFn) -> Self {
        let params = match f.kind() {
            FeeKind::Quadratic { center, scale } => json!({ "center": center, "scale": scale }),
            FeeKind::Entropy { scale, support } | FeeKind::LogBarrier { scale, support } => {
                json!({ "scale": scale, "support": support })
            }
            FeeKind::Indicator => json!({}),
            FeeKind::Tabulated { knots, values } => json!({ "knots": knots, "values": values }),
            FeeKind::Smoothed(p) => json!({
                "x0": p.x0(),
                "h": p.h(),
                "second": p.second(),
                "first": p.first(),
                "values": p.values(),
            }),
            FeeKind::Convexified { inner, eta } => json!({
                "eta": eta,
                "inner": FeePartConfig::describe(inner),
            }),
        };
        Self {
            kind: f.kind_name().to_string(),
            params,
            domain: f.domain(),
            offset: (f.offset() != 0.0).then_some(f.offset()),
        }
    }
}

pub fn fee_from_config(parts: &[FeePartConfig]) -> Result<SplittingFee> {
    let parts = parts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.build().map_err(|e| match e {
                Error::Invalid { field, reason } => Error::Invalid {
                    field,
                    reason: format!("part {i}: {reason}"),
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    SplittingFee::new(parts)
}

pub fn fee_to_config(fee: &SplittingFee) -> Vec<FeePartConfig> {
    fee.parts().iter().map(FeePartConfig::describe).collect()
}
