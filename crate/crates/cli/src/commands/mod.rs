pub mod gait;
pub mod relax;
pub mod sweep;
pub mod validate;

use serde_json::{json, Value};
use threelp::analysis::economy_body;
use threelp::{BodyParams, BodySize, ModelConfig};

use crate::args::{Common, Preset};
use crate::CliError;

/// Body and optional phase durations from `--config` or `--preset`.
pub struct Body {
    pub params: BodyParams,
    pub t_ds: Option<f64>,
    pub t_ss: Option<f64>,
    pub source: Value,
}

pub fn body(common: &Common, default: Preset) -> Result<Body, CliError> {
    if let Some(path) = &common.config {
        let cfg = ModelConfig::load(path)?;
        return Ok(Body {
            params: cfg.params,
            t_ds: cfg.t_ds,
            t_ss: cfg.t_ss,
            source: json!({ "config": path.display().to_string() }),
        });
    }
    let preset = common.preset.unwrap_or(default);
    let params = match preset {
        Preset::Adult => BodyParams::preset(BodySize::Adult),
        Preset::Kid => BodyParams::preset(BodySize::Kid),
        Preset::Economy => economy_body(),
    };
    Ok(Body { params, t_ds: None, t_ss: None, source: json!({ "preset": preset }) })
}

impl Body {
    pub fn describe(&self) -> Value {
        json!({
            "source": self.source,
            "params": serde_json::to_value(self.params).expect("parameters serialize"),
        })
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")))
    }
}

/// Lossless float formatting used by every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
