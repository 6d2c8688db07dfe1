//! Per-phase equations of motion.
//!
//! Two independent routes live here. [`PhaseOde`] is obtained by eliminating
//! the internal forces of each plane by hand: what remains is a 2x2 system in
//! single support (swing foot and pelvis) and a scalar equation in double
//! support (pelvis only, both feet fixed). [`forces`] instead assembles every
//! vector balance equation in 3-D and solves for all forces, torques and
//! accelerations at once; it is used for force reconstruction and to check
//! the reduced route.

mod forces;

pub use forces::{solve_forces, ForceSolution};

use nalgebra::{Matrix2, SMatrix, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{idx, BodyParams, StrideTiming, Vec23, STATE_DIM};

/// The two phases of a stride, in the order they occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Double,
    Single,
}

impl Phase {
    pub fn duration(self, timing: &StrideTiming) -> f64 {
        match self {
            Phase::Double => timing.t_ds(),
            Phase::Single => timing.t_ss(),
        }
    }

    /// Whether entry `i` of the augmented state is constant during the phase.
    pub fn is_constant(self, i: usize) -> bool {
        match self {
            Phase::Single => i >= idx::PX,
            // both feet are planted; the swing velocity slot is carried along unchanged
            Phase::Double => i >= idx::PX || matches!(i, idx::X2X | idx::X2Y | idx::V2X | idx::V2Y),
        }
    }
}

/// Accelerations of one phase as a time-affine linear map of the augmented
/// state: `Xddot = (K0 + t K1) Q`, with `t` local to the phase.
///
/// `K1` only touches entries that are constant within the phase, so the
/// system is a constant-coefficient ODE with polynomial forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOde {
    pub phase: Phase,
    pub duration: f64,
    k0: SMatrix<f64, 4, STATE_DIM>,
    k1: SMatrix<f64, 4, STATE_DIM>,
}

impl PhaseOde {
    pub fn k0(&self) -> &SMatrix<f64, 4, STATE_DIM> {
        &self.k0
    }
    pub fn k1(&self) -> &SMatrix<f64, 4, STATE_DIM> {
        &self.k1
    }

    /// Position feedback `A` (4x4) acting on `X`.
    pub fn a(&self) -> SMatrix<f64, 4, 4> {
        self.k0.fixed_columns::<4>(idx::X2X).into_owned()
    }

    /// Constant forcing map `B0` (4x15) acting on `[P, U, rU, W, d]`.
    pub fn b0(&self) -> SMatrix<f64, 4, 15> {
        self.k0.fixed_columns::<15>(idx::PX).into_owned()
    }

    /// Time-slope forcing map `B1` (4x15).
    pub fn b1(&self) -> SMatrix<f64, 4, 15> {
        self.k1.fixed_columns::<15>(idx::PX).into_owned()
    }

    /// Time-slope coupling to positions; non-zero only on the planted swing
    /// foot during double support, where the support point migrates with the load.
    pub fn a_t(&self) -> SMatrix<f64, 4, 4> {
        self.k1.fixed_columns::<4>(idx::X2X).into_owned()
    }

    pub fn accel(&self, q: &Vec23, t: f64) -> Vector4<f64> {
        (self.k0 + self.k1 * t) * q
    }
}

/// `(c + t ct) . Q`, one scalar equation side.
#[derive(Debug, Clone, Copy)]
struct Affine {
    c: [f64; STATE_DIM],
    ct: [f64; STATE_DIM],
}

impl Affine {
    fn zero() -> Self {
        Self { c: [0.0; STATE_DIM], ct: [0.0; STATE_DIM] }
    }
    fn add(&mut self, j: usize, v: f64) -> &mut Self {
        self.c[j] += v;
        self
    }
    fn add_t(&mut self, j: usize, v: f64) -> &mut Self {
        self.ct[j] += v;
        self
    }
}

/// Common coefficients of the reduced equations.
struct Coeffs {
    k: f64,
    m1: f64,
    m: f64,
    z1: f64,
    z3: f64,
    g: f64,
    weight: f64,
    half_w: f64,
}

impl Coeffs {
    fn new(p: &BodyParams) -> Self {
        Self {
            k: p.leg_ratio(),
            m1: p.m1(),
            m: p.m2(),
            z1: p.z1(),
            z3: p.z3(),
            g: p.g(),
            weight: p.weight(),
            half_w: p.w() / 2.0,
        }
    }

    /// Pelvis inertia seen by the torso and planted-leg masses.
    fn pelvis_inertia(&self, planted_legs: f64) -> f64 {
        (self.z1 + self.z3) * self.m1 + planted_legs * (1.0 - self.k).powi(2) * self.z1 * self.m
    }
}

fn put(row: &Affine, k0: &mut SMatrix<f64, 4, STATE_DIM>, k1: &mut SMatrix<f64, 4, STATE_DIM>, r: usize, scale: f64) {
    for j in 0..STATE_DIM {
        k0[(r, j)] += scale * row.c[j];
        k1[(r, j)] += scale * row.ct[j];
    }
}

/// Single support: swing foot free of contact, stance foot at `P`, hip and
/// ankle torques `U + (t / T_ss) rU`.
pub fn assemble_single_support(params: &BodyParams, timing: &StrideTiming) -> Result<PhaseOde> {
    let c = Coeffs::new(params);
    let t_ss = timing.t_ss();
    let (k, m, z1, g) = (c.k, c.m, c.z1, c.g);

    // unknowns ordered (swing-foot accel, pelvis accel); identical in both planes
    let mass = Matrix2::new(k * m * z1 * k, k * m * z1 * (1.0 - k), z1 * m * k, c.pelvis_inertia(1.0) + z1 * m * (1.0 - k));
    let inv = mass
        .try_inverse()
        .filter(|_| mass.determinant().abs() > 1e-12 * mass.norm().powi(2))
        .ok_or_else(|| Error::Singular("eliminating single-support forces (check z1, z2)".into()))?;

    let mut k0 = SMatrix::<f64, 4, STATE_DIM>::zeros();
    let mut k1 = SMatrix::<f64, 4, STATE_DIM>::zeros();

    // sagittal: y-moments drive x-motion
    let mut swing = Affine::zero();
    swing.add(idx::X2X, -k * m * g).add(idx::X1X, k * m * g).add(idx::MHY, -1.0).add_t(idx::RMHY, -1.0 / t_ss);
    let mut total = Affine::zero();
    total
        .add(idx::F1X, z1 + c.z3)
        .add(idx::M1Y, 1.0)
        .add(idx::PX, -c.weight + k * m * g)
        .add(idx::X1X, c.weight - k * m * g)
        .add(idx::MAY, 1.0)
        .add_t(idx::RMAY, 1.0 / t_ss)
        .add(idx::MHY, -1.0)
        .add_t(idx::RMHY, -1.0 / t_ss);
    for (r, sel) in [(idx::X2X, 0), (idx::X1X, 1)] {
        put(&swing, &mut k0, &mut k1, r, inv[(sel, 0)]);
        put(&total, &mut k0, &mut k1, r, inv[(sel, 1)]);
    }

    // lateral: x-moments drive y-motion, hips offset by +-w d / 2
    let hw = c.half_w;
    let mut swing = Affine::zero();
    swing
        .add(idx::X2Y, -k * m * g)
        .add(idx::X1Y, k * m * g)
        .add(idx::D, k * m * g * hw)
        .add(idx::MHX, 1.0)
        .add_t(idx::RMHX, 1.0 / t_ss);
    let mut total = Affine::zero();
    total
        .add(idx::F1Y, z1 + c.z3)
        .add(idx::M1X, -1.0)
        .add(idx::PY, -c.weight + k * m * g)
        .add(idx::X1Y, c.weight - k * m * g)
        .add(idx::D, -c.weight * hw + k * m * g * hw + c.weight * hw)
        .add(idx::MAX, -1.0)
        .add_t(idx::RMAX, -1.0 / t_ss)
        .add(idx::MHX, 1.0)
        .add_t(idx::RMHX, 1.0 / t_ss);
    for (r, sel) in [(idx::X2Y, 0), (idx::X1Y, 1)] {
        put(&swing, &mut k0, &mut k1, r, inv[(sel, 0)]);
        put(&total, &mut k0, &mut k1, r, inv[(sel, 1)]);
    }

    Ok(PhaseOde { phase: Phase::Single, duration: t_ss, k0, k1 })
}

/// Double support: both feet planted, vertical load moving linearly from the
/// trailing foot (2) to the leading foot (3), each foot keeping its centre of
/// pressure.
pub fn assemble_double_support(params: &BodyParams, timing: &StrideTiming) -> Result<PhaseOde> {
    let c = Coeffs::new(params);
    let t_ds = timing.t_ds();
    let (k, m, g, w, hw) = (c.k, c.m, c.g, c.weight, c.half_w);
    let inertia = c.pelvis_inertia(2.0);
    if inertia.abs() < 1e-12 {
        return Err(Error::Singular("eliminating double-support forces".into()));
    }
    let rate = 1.0 / t_ds;

    let mut k0 = SMatrix::<f64, 4, STATE_DIM>::zeros();
    let mut k1 = SMatrix::<f64, 4, STATE_DIM>::zeros();

    // Trailing leg carries (1 - s) W, leading leg s W, s = t / T_ds.
    // sagittal
    let mut sag = Affine::zero();
    sag.add(idx::F1X, c.z1 + c.z3).add(idx::M1Y, 1.0);
    // trailing: -(X2x - X1x)(1 - s) W + k m g (X2x - X1x) + (1 - s)(May + rMay)
    sag.add(idx::X2X, -w + k * m * g)
        .add_t(idx::X2X, w * rate)
        .add(idx::X1X, w - k * m * g)
        .add_t(idx::X1X, -w * rate)
        .add(idx::MAY, 1.0)
        .add_t(idx::MAY, -rate)
        .add(idx::RMAY, 1.0)
        .add_t(idx::RMAY, -rate);
    // leading: -(Px - X1x) s W + k m g (Px - X1x) + s May
    sag.add_t(idx::PX, -w * rate)
        .add(idx::PX, k * m * g)
        .add_t(idx::X1X, w * rate)
        .add(idx::X1X, -k * m * g)
        .add_t(idx::MAY, rate);
    put(&sag, &mut k0, &mut k1, idx::X1X, 1.0 / inertia);

    // lateral
    let mut lat = Affine::zero();
    lat.add(idx::F1Y, c.z1 + c.z3).add(idx::M1X, -1.0);
    // pelvis moment from the unequal hip loads: h d (2 s - 1) W
    lat.add(idx::D, -hw * w).add_t(idx::D, 2.0 * hw * w * rate);
    // trailing: r2 = X2y - X1y - h d; -r2 (1 - s) W + k m g r2 + (1 - s)(Max + rMax)
    for (j, sign) in [(idx::X2Y, 1.0), (idx::X1Y, -1.0), (idx::D, -hw)] {
        lat.add(j, sign * (-w + k * m * g)).add_t(j, sign * w * rate);
    }
    lat.add(idx::MAX, 1.0).add_t(idx::MAX, -rate).add(idx::RMAX, 1.0).add_t(idx::RMAX, -rate);
    // leading: r3 = Py - X1y + h d; -r3 s W + k m g r3 - s Max
    for (j, sign) in [(idx::PY, 1.0), (idx::X1Y, -1.0), (idx::D, hw)] {
        lat.add(j, sign * k * m * g).add_t(j, -sign * w * rate);
    }
    lat.add_t(idx::MAX, -rate);
    put(&lat, &mut k0, &mut k1, idx::X1Y, 1.0 / inertia);

    Ok(PhaseOde { phase: Phase::Double, duration: t_ds, k0, k1 })
}

pub fn assemble(params: &BodyParams, timing: &StrideTiming, phase: Phase) -> Result<PhaseOde> {
    match phase {
        Phase::Double => assemble_double_support(params, timing),
        Phase::Single => assemble_single_support(params, timing),
    }
}

/// Hip and ankle torques prescribed by the inputs during single support.
pub fn single_support_inputs(q: &Vec23, t: f64, t_ss: f64) -> (Vector2<f64>, Vector2<f64>) {
    let s = t / t_ss;
    // (x, y) components
    let hip = Vector2::new(q[idx::MHX] + s * q[idx::RMHX], q[idx::MHY] + s * q[idx::RMHY]);
    let ankle = Vector2::new(q[idx::MAX] + s * q[idx::RMAX], q[idx::MAY] + s * q[idx::RMAY]);
    (hip, ankle)
}

/// Contact moments of the trailing (2) and leading (3) feet during double
/// support, as (x, y) pairs. Each foot keeps the centre of pressure it has in
/// the neighbouring single-support phase.
pub fn double_support_contact_moments(q: &Vec23, t: f64, t_ds: f64) -> (Vector2<f64>, Vector2<f64>) {
    let s = t / t_ds;
    let trailing = Vector2::new(-(q[idx::MAX] + q[idx::RMAX]), q[idx::MAY] + q[idx::RMAY]) * (1.0 - s);
    let leading = Vector2::new(q[idx::MAX], q[idx::MAY]) * s;
    (trailing, leading)
}

/// Hip torques the trailing leg reaches at lift-off and the leading leg
/// carries at touch-down, as (x, y) pairs.
pub fn double_support_hip_targets(q: &Vec23) -> (Vector2<f64>, Vector2<f64>) {
    let trailing = Vector2::new(q[idx::MHX], q[idx::MHY]);
    let leading = Vector2::new(-q[idx::MHX] - q[idx::RMHX], q[idx::MHY] + q[idx::RMHY]);
    (trailing, leading)
}
