//! Gait families: which extra constraints and which body/timing are used.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BodyParams, StrideTiming};

pub const DEFAULT_STAGE_SAMPLES: usize = 50;
pub const DEFAULT_FOOT_LENGTH: f64 = 0.24;
pub const DEFAULT_LEG_MASS_FRACTION: f64 = 0.05;
pub const DEFAULT_HEIGHT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    /// Least torque; zero torque when the timing allows it.
    PseudoPassive,
    /// Twice the double-support time at the same stride time, ankles off.
    LongDoubleSupport,
    /// Least lateral CoM velocity over `samples` uniform instants, ankles off.
    StageWalk { samples: usize },
    /// Centre of pressure rolls from the ankle to the toe over single support.
    CopModulated { foot_length: f64 },
    /// Leg masses moved into the torso and all masses brought close to the pelvis, ankles off.
    LipLike { leg_mass_fraction: f64, height_fraction: f64 },
}

impl ScenarioSpec {
    pub const NAMES: [&'static str; 5] = ["pseudo-passive", "long-ds", "stage-walk", "cop", "lip-like"];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::PseudoPassive => Self::NAMES[0],
            ScenarioSpec::LongDoubleSupport => Self::NAMES[1],
            ScenarioSpec::StageWalk { .. } => Self::NAMES[2],
            ScenarioSpec::CopModulated { .. } => Self::NAMES[3],
            ScenarioSpec::LipLike { .. } => Self::NAMES[4],
        }
    }

    /// Body and timing the gait is actually solved with.
    pub fn prepare(&self, params: &BodyParams, timing: &StrideTiming) -> Result<(BodyParams, StrideTiming)> {
        match *self {
            ScenarioSpec::LongDoubleSupport => {
                let t_ds = 2.0 * timing.t_ds();
                Ok((*params, StrideTiming::new(t_ds, timing.stride() - t_ds)?))
            }
            ScenarioSpec::LipLike { leg_mass_fraction, height_fraction } => {
                if !(0.0..1.0).contains(&leg_mass_fraction) || leg_mass_fraction == 0.0 {
                    return Err(Error::InvalidParam {
                        name: "leg_mass_fraction",
                        reason: format!("{leg_mass_fraction} not in (0, 1)"),
                    });
                }
                Ok((params.lip_like(1.0 - leg_mass_fraction, height_fraction)?, *timing))
            }
            _ => Ok((*params, *timing)),
        }
    }

    pub fn ankles_off(&self) -> bool {
        matches!(
            self,
            ScenarioSpec::LongDoubleSupport | ScenarioSpec::StageWalk { .. } | ScenarioSpec::LipLike { .. }
        )
    }
}

impl FromStr for ScenarioSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo-passive" => Ok(ScenarioSpec::PseudoPassive),
            "long-ds" => Ok(ScenarioSpec::LongDoubleSupport),
            "stage-walk" => Ok(ScenarioSpec::StageWalk { samples: DEFAULT_STAGE_SAMPLES }),
            "cop" => Ok(ScenarioSpec::CopModulated { foot_length: DEFAULT_FOOT_LENGTH }),
            "lip-like" => Ok(ScenarioSpec::LipLike {
                leg_mass_fraction: DEFAULT_LEG_MASS_FRACTION,
                height_fraction: DEFAULT_HEIGHT_FRACTION,
            }),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ankle ramp that moves the centre of pressure by `foot_length` over single support.
pub fn cop_ramp_torque(params: &BodyParams, foot_length: f64) -> Result<f64> {
    if !(foot_length >= 0.0) || !foot_length.is_finite() {
        return Err(Error::InvalidParam { name: "foot_length", reason: format!("{foot_length} must be >= 0") });
    }
    Ok(params.weight() * foot_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BodySize;

    #[test]
    fn names_round_trip() {
        for name in ScenarioSpec::NAMES {
            assert_eq!(name.parse::<ScenarioSpec>().unwrap().name(), name);
        }
        assert!("walk".parse::<ScenarioSpec>().is_err());
    }

    #[test]
    fn long_double_support_keeps_stride() {
        let p = BodyParams::preset(BodySize::Adult);
        let t = StrideTiming::new(0.1, 0.6028).unwrap();
        let (_, t2) = ScenarioSpec::LongDoubleSupport.prepare(&p, &t).unwrap();
        assert!((t2.t_ds() - 0.2).abs() < 1e-15);
        assert!((t2.stride() - t.stride()).abs() < 1e-15);
    }

    #[test]
    fn ramp_torque() {
        let p = BodyParams::preset(BodySize::Adult);
        assert!((cop_ramp_torque(&p, 0.24).unwrap() - 70.0 * 9.81 * 0.24).abs() < 1e-9);
        assert_eq!(cop_ramp_torque(&p, 0.0).unwrap(), 0.0);
    }
}
