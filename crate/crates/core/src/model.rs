//! Body parameters, stride timing, the 23-entry augmented state and the
//! geometric relations between pelvis, hips, feet and the three masses.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the augmented state vector.
pub const STATE_DIM: usize = 23;

pub type Vec23 = SVector<f64, STATE_DIM>;
pub type Mat23 = nalgebra::SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Index layout of the augmented state `[X, Xdot, P, U, rU, W, d]`.
///
/// Within every 2- and 4-wide block the sagittal component comes first, so
/// apart from `d` even indices are sagittal and odd indices are lateral.
pub mod idx {
    /// Swing foot, sagittal.
    pub const X2X: usize = 0;
    pub const X2Y: usize = 1;
    /// Pelvis, sagittal.
    pub const X1X: usize = 2;
    pub const X1Y: usize = 3;
    pub const V2X: usize = 4;
    pub const V2Y: usize = 5;
    pub const V1X: usize = 6;
    pub const V1Y: usize = 7;
    /// Stance contact point.
    pub const PX: usize = 8;
    pub const PY: usize = 9;
    /// Constant swing-hip torques.
    pub const MHY: usize = 10;
    pub const MHX: usize = 11;
    /// Constant ankle torques.
    pub const MAY: usize = 12;
    pub const MAX: usize = 13;
    /// Ramp coefficients, reaching their value at the end of single support.
    pub const RMHY: usize = 14;
    pub const RMHX: usize = 15;
    pub const RMAY: usize = 16;
    pub const RMAX: usize = 17;
    /// Disturbance force and moment on the torso.
    pub const F1X: usize = 18;
    pub const F1Y: usize = 19;
    pub const M1Y: usize = 20;
    pub const M1X: usize = 21;
    /// Support side.
    pub const D: usize = 22;

    pub const X: std::ops::Range<usize> = 0..4;
    pub const XDOT: std::ops::Range<usize> = 4..8;
    pub const P: std::ops::Range<usize> = 8..10;
    pub const U: std::ops::Range<usize> = 10..14;
    pub const RU: std::ops::Range<usize> = 14..18;
    pub const W: std::ops::Range<usize> = 18..22;
    /// Everything that stays constant within a phase: `[P, U, rU, W, d]`.
    pub const FORCING: std::ops::Range<usize> = 8..23;

    /// Human readable column names, in layout order.
    pub const NAMES: [&str; super::STATE_DIM] = [
        "X2x", "X2y", "X1x", "X1y", "vX2x", "vX2y", "vX1x", "vX1y", "Px", "Py", "Mhy", "Mhx",
        "May", "Max", "rMhy", "rMhx", "rMay", "rMax", "F1x", "F1y", "M1y", "M1x", "d",
    ];

    /// True for lateral (frontal plane) entries, including the support side.
    pub const fn is_lateral(i: usize) -> bool {
        i == D || i % 2 == 1
    }
}

/// Masses and heights of the three pendulums.
///
/// `z1` is the pelvis height, `z2` the distance of each leg mass below its
/// hip and `z3` the height of the torso mass above the pelvis. `w` is the
/// full pelvis width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    m1: f64,
    m2: f64,
    m3: f64,
    z1: f64,
    z2: f64,
    z3: f64,
    w: f64,
    g: f64,
}

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Preset body sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodySize {
    Adult,
    Kid,
}

impl BodyParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(m1: f64, m2: f64, m3: f64, z1: f64, z2: f64, z3: f64, w: f64, g: f64) -> Result<Self> {
        let check = |name: &'static str, v: f64, ok: bool, what: &str| {
            if !v.is_finite() || !ok {
                Err(Error::InvalidParam { name, reason: format!("{v} must be {what}") })
            } else {
                Ok(())
            }
        };
        check("m1", m1, m1 > 0.0, "> 0")?;
        check("m2", m2, m2 > 0.0, "> 0")?;
        check("m3", m3, m3 > 0.0, "> 0")?;
        check("z1", z1, z1 > 0.0, "> 0")?;
        check("z2", z2, z2 >= 0.0, ">= 0")?;
        check("z3", z3, z3 >= 0.0, ">= 0")?;
        check("w", w, w >= 0.0, ">= 0")?;
        check("g", g, g > 0.0, "> 0")?;
        if m2 != m3 {
            return Err(Error::InvalidParam {
                name: "m3",
                reason: format!("leg masses must be equal (m2 = {m2}, m3 = {m3})"),
            });
        }
        Ok(Self { m1, m2, m3, z1, z2, z3, w, g })
    }

    /// Preset parameters for an adult (70 kg, 1.7 m) or a kid (30 kg, 1.0 m).
    pub fn preset(size: BodySize) -> Self {
        let p = match size {
            BodySize::Adult => Self::new(45.7, 12.15, 12.15, 0.89, 0.32, 0.36, 0.2, DEFAULT_GRAVITY),
            BodySize::Kid => Self::new(19.6, 5.2, 5.2, 0.52, 0.19, 0.22, 0.12, DEFAULT_GRAVITY),
        };
        p.expect("preset parameters are valid")
    }

    /// Reported total mass of each preset.
    pub fn preset_total_mass(size: BodySize) -> f64 {
        match size {
            BodySize::Adult => 70.0,
            BodySize::Kid => 30.0,
        }
    }

    /// Fails unless `m1 + m2 + m3` equals `expected` within 1e-6 kg.
    pub fn check_total_mass(&self, expected: f64) -> Result<()> {
        if (self.total_mass() - expected).abs() > 1e-6 {
            return Err(Error::InvalidParam {
                name: "m1",
                reason: format!("total mass {} differs from {expected}", self.total_mass()),
            });
        }
        Ok(())
    }

    /// Same geometry with every mass scaled so the total equals `total`.
    pub fn with_total_mass(&self, total: f64) -> Result<Self> {
        let s = total / self.total_mass();
        Self::new(self.m1 * s, self.m2 * s, self.m3 * s, self.z1, self.z2, self.z3, self.w, self.g)
    }

    /// Moves `leg_transfer` of each leg mass into the torso and scales the
    /// leg-mass and torso offsets by `height_scale`.
    pub fn lip_like(&self, leg_transfer: f64, height_scale: f64) -> Result<Self> {
        let moved = self.m2 * leg_transfer;
        Self::new(
            self.m1 + 2.0 * moved,
            self.m2 - moved,
            self.m3 - moved,
            self.z1,
            self.z2 * height_scale,
            self.z3 * height_scale,
            self.w,
            self.g,
        )
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn m3(&self) -> f64 {
        self.m3
    }
    pub fn z1(&self) -> f64 {
        self.z1
    }
    pub fn z2(&self) -> f64 {
        self.z2
    }
    pub fn z3(&self) -> f64 {
        self.z3
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2 + self.m3
    }
    pub fn weight(&self) -> f64 {
        self.total_mass() * self.g
    }
    /// Fraction of the hip-to-foot segment at which the leg mass sits.
    pub fn leg_ratio(&self) -> f64 {
        self.z2 / self.z1
    }

    /// Bit pattern of every field, used as a cache key.
    pub fn bits(&self) -> [u64; 8] {
        [self.m1, self.m2, self.m3, self.z1, self.z2, self.z3, self.w, self.g].map(f64::to_bits)
    }
}

/// Durations of the two phases of a stride (double support first).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideTiming {
    t_ds: f64,
    t_ss: f64,
}

impl StrideTiming {
    pub fn new(t_ds: f64, t_ss: f64) -> Result<Self> {
        if !(t_ds.is_finite() && t_ds > 0.0) {
            return Err(Error::InvalidTiming(format!("T_ds = {t_ds} must be > 0")));
        }
        if !(t_ss.is_finite() && t_ss > 0.0) {
            return Err(Error::InvalidTiming(format!("T_ss = {t_ss} must be > 0")));
        }
        Ok(Self { t_ds, t_ss })
    }

    /// Timing with the given stride time and double-support fraction.
    pub fn from_ratio(t_stride: f64, ds_ratio: f64) -> Result<Self> {
        Self::new(t_stride * ds_ratio, t_stride * (1.0 - ds_ratio))
    }

    pub fn t_ds(&self) -> f64 {
        self.t_ds
    }
    pub fn t_ss(&self) -> f64 {
        self.t_ss
    }
    pub fn stride(&self) -> f64 {
        self.t_ds + self.t_ss
    }
    pub fn bits(&self) -> [u64; 2] {
        [self.t_ds.to_bits(), self.t_ss.to_bits()]
    }
}

/// The augmented vector `Q = [X, Xdot, P, U, rU, W, d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState(pub Vec23);

impl AugmentedState {
    pub fn zeros() -> Self {
        Self(Vec23::zeros())
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != STATE_DIM {
            return Err(Error::Config(format!(
                "augmented state needs {STATE_DIM} entries, got {}",
                values.len()
            )));
        }
        Ok(Self(Vec23::from_column_slice(values)))
    }

    pub fn vector(&self) -> &Vec23 {
        &self.0
    }
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
    pub fn set(&mut self, i: usize, v: f64) {
        self.0[i] = v;
    }
    pub fn d(&self) -> f64 {
        self.0[idx::D]
    }
    pub fn swing_foot(&self) -> Vector3<f64> {
        Vector3::new(self.0[idx::X2X], self.0[idx::X2Y], 0.0)
    }
    pub fn stance_foot(&self) -> Vector3<f64> {
        Vector3::new(self.0[idx::PX], self.0[idx::PY], 0.0)
    }
    /// Pelvis centre at height `z1`.
    pub fn pelvis(&self, params: &BodyParams) -> Vector3<f64> {
        Vector3::new(self.0[idx::X1X], self.0[idx::X1Y], params.z1())
    }
    pub fn is_support_side(&self) -> bool {
        self.d() == 1.0 || self.d() == -1.0
    }
}

impl From<Vec23> for AugmentedState {
    fn from(v: Vec23) -> Self {
        Self(v)
    }
}

/// Hip and mass positions derived from pelvis and foot positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Swing hip.
    pub x2: Vector3<f64>,
    /// Stance hip.
    pub x3: Vector3<f64>,
    /// Torso mass.
    pub y1: Vector3<f64>,
    /// Swing-leg mass.
    pub y2: Vector3<f64>,
    /// Stance-leg mass.
    pub y3: Vector3<f64>,
}

/// Positions of hips and masses for pelvis `x1`, feet `foot2`, `foot3` and support side `d`.
pub fn geometry(
    params: &BodyParams,
    x1: &Vector3<f64>,
    foot2: &Vector3<f64>,
    foot3: &Vector3<f64>,
    d: f64,
) -> Geometry {
    let half = Vector3::new(0.0, params.w() * d / 2.0, 0.0);
    let k = params.leg_ratio();
    let x2 = x1 + half;
    let x3 = x1 - half;
    Geometry {
        x2,
        x3,
        y1: x1 + Vector3::new(0.0, 0.0, params.z3()),
        y2: x2 + (foot2 - x2) * k,
        y3: x3 + (foot3 - x3) * k,
    }
}

/// Body parameters plus optional timing, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub params: BodyParams,
    pub t_ds: Option<f64>,
    pub t_ss: Option<f64>,
}

const CONFIG_KEYS: [&str; 10] = ["m1", "m2", "m3", "z1", "z2", "z3", "w", "g", "T_ds", "T_ss"];

impl ModelConfig {
    /// Parses a TOML key-value document. Body keys are required, `g` defaults
    /// to 9.81 and the two durations are optional.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (key, value) in &table {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::UnknownConfigKey(key.clone()));
            }
            let v = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                other => {
                    return Err(Error::Config(format!("key `{key}` must be a number, got {}", other.type_str())))
                }
            };
            values.insert(key.as_str(), v);
        }
        let req = |k: &str| values.get(k).copied().ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let params = BodyParams::new(
            req("m1")?,
            req("m2")?,
            req("m3")?,
            req("z1")?,
            req("z2")?,
            req("z3")?,
            req("w")?,
            values.get("g").copied().unwrap_or(DEFAULT_GRAVITY),
        )?;
        let cfg = Self { params, t_ds: values.get("T_ds").copied(), t_ss: values.get("T_ss").copied() };
        if let (Some(ds), Some(ss)) = (cfg.t_ds, cfg.t_ss) {
            StrideTiming::new(ds, ss)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_preset(size: BodySize) -> Self {
        Self { params: BodyParams::preset(size), t_ds: None, t_ss: None }
    }

    /// Renders the config back to the same key-value format.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let mut s = format!(
            "m1 = {:?}\nm2 = {:?}\nm3 = {:?}\nz1 = {:?}\nz2 = {:?}\nz3 = {:?}\nw = {:?}\ng = {:?}\n",
            p.m1, p.m2, p.m3, p.z1, p.z2, p.z3, p.w, p.g
        );
        if let Some(ds) = self.t_ds {
            s.push_str(&format!("T_ds = {ds:?}\n"));
        }
        if let Some(ss) = self.t_ss {
            s.push_str(&format!("T_ss = {ss:?}\n"));
        }
        s
    }
}

/// Horizontal centre-of-mass position and velocity as linear rows over the
/// augmented state, `[x row, y row]`.
///
/// During double support the swing-velocity slot holds a stale value and the
/// planted foot is still, so `swing_moving` must be false there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComRows {
    pub position: [Vec23; 2],
    pub velocity: [Vec23; 2],
}

pub fn com_rows(params: &BodyParams, swing_moving: bool) -> ComRows {
    let total = params.total_mass();
    let k = params.leg_ratio();
    // hip offsets of the two legs cancel because the legs weigh the same
    let pelvis = (params.m1() + (params.m2() + params.m3()) * (1.0 - k)) / total;
    let swing = params.m2() * k / total;
    let stance = params.m3() * k / total;
    let mut position = [Vec23::zeros(); 2];
    let mut velocity = [Vec23::zeros(); 2];
    for axis in 0..2 {
        position[axis][idx::X1X + axis] = pelvis;
        position[axis][idx::X2X + axis] = swing;
        position[axis][idx::PX + axis] = stance;
        velocity[axis][idx::V1X + axis] = pelvis;
        if swing_moving {
            velocity[axis][idx::V2X + axis] = swing;
        }
    }
    ComRows { position, velocity }
}
