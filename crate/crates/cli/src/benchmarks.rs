//! Built-in nonlinear benchmark systems, addressable by name from configs.

use serde::{Deserialize, Serialize};

use zonoreach_core::data::NonlinearSystem;
use zonoreach_core::Vector;

use crate::config::{HarnessError, HarnessResult};

/// Name of the 2-state exothermic-reactor benchmark.
pub const EXOTHERMIC_REACTOR: &str = "exothermic-reactor";

/// Parameters of the Euler-discretized exothermic reactor.
///
/// States: `x1` reactant concentration (mol/l), `x2` temperature deviation
/// from the operating point (K). Inputs: `u1` feed-concentration factor,
/// `u2` coolant temperature deviation (K). With reaction rate
/// `r = rate_constant * x1 * exp(x2 / temperature_scale)`, one step of
/// length `dt` is
///
/// ```text
/// x1' = x1 + dt * ( flow * (feed_concentration * u1 - x1) - r )
/// x2' = x2 + dt * ( -cooling * x2 + heat_release * r
///                   + heat_transfer * (u2 - x2) )
/// ```
///
/// The map is smooth, hence Lipschitz on any compact operating region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactorParams {
    pub dt: f64,
    pub rate_constant: f64,
    pub temperature_scale: f64,
    pub flow: f64,
    pub feed_concentration: f64,
    pub cooling: f64,
    pub heat_release: f64,
    pub heat_transfer: f64,
}

impl Default for ReactorParams {
    fn default() -> Self {
        ReactorParams {
            dt: 0.1,
            rate_constant: 1.0,
            temperature_scale: 15.0,
            flow: 0.8,
            feed_concentration: 0.02,
            cooling: 0.5,
            heat_release: 3000.0,
            heat_transfer: 0.2,
        }
    }
}

impl ReactorParams {
    pub fn system(&self) -> NonlinearSystem {
        let p = *self;
        NonlinearSystem::new(2, 2, move |x, u| {
            let rate = p.rate_constant * x[0] * (x[1] / p.temperature_scale).exp();
            let dx1 = p.flow * (p.feed_concentration * u[0] - x[0]) - rate;
            let dx2 = -p.cooling * x[1] + p.heat_release * rate + p.heat_transfer * (u[1] - x[1]);
            Vector::from_row_slice(&[x[0] + p.dt * dx1, x[1] + p.dt * dx2])
        })
    }
}

/// Look up a benchmark by name.
pub fn build(name: &str, params: Option<&ReactorParams>) -> HarnessResult<NonlinearSystem> {
    match name {
        EXOTHERMIC_REACTOR => Ok(params.copied().unwrap_or_default().system()),
        other => Err(HarnessError::config(
            "system.name",
            format!("unknown benchmark `{other}` (available: {EXOTHERMIC_REACTOR})"),
        )),
    }
}
