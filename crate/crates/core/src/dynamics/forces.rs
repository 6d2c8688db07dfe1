//! Full 3-D balance equations, solved for every force and torque at once.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::{double_support_contact_moments, double_support_hip_targets, single_support_inputs, Phase};
use crate::error::{Error, Result};
use crate::model::{geometry, idx, BodyParams, Geometry, StrideTiming, Vec23};

/// Interaction forces, contact wrenches and hip torques at one instant.
///
/// `f_i` acts on mass `i` from the pelvis, `F_i`/`M_i` act on foot `i` from the
/// ground (`F1`/`M1` are the external push on the torso), `tau_i` is the hip
/// torque on body `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSolution {
    pub f1: Vector3<f64>,
    pub f2: Vector3<f64>,
    pub f3: Vector3<f64>,
    #[serde(rename = "F1")]
    pub big_f1: Vector3<f64>,
    #[serde(rename = "F2")]
    pub big_f2: Vector3<f64>,
    #[serde(rename = "F3")]
    pub big_f3: Vector3<f64>,
    #[serde(rename = "M1")]
    pub m1: Vector3<f64>,
    #[serde(rename = "M2")]
    pub m2: Vector3<f64>,
    #[serde(rename = "M3")]
    pub m3: Vector3<f64>,
    pub tau1: Vector3<f64>,
    pub tau2: Vector3<f64>,
    pub tau3: Vector3<f64>,
    /// `[X2x, X2y, X1x, X1y]` second derivatives.
    pub accel: Vector4<f64>,
}

const N: usize = 34;
const ACC: usize = 0;
const F1: usize = 4;
const F2: usize = 7;
const F3: usize = 10;
const G2: usize = 13;
const G3: usize = 16;
const MM2: usize = 19;
const MM3: usize = 22;
const T1: usize = 25;
const T2: usize = 28;
const T3: usize = 31;

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

struct System {
    a: DMatrix<f64>,
    b: DVector<f64>,
    row: usize,
}

impl System {
    fn new(rows: usize) -> Self {
        Self { a: DMatrix::zeros(rows, N), b: DVector::zeros(rows), row: 0 }
    }

    /// Add `m` times the 3-vector unknown starting at `col` into the next three rows.
    fn block(&mut self, col: usize, m: &Matrix3<f64>) {
        let mut view = self.a.view_mut((self.row, col), (3, 3));
        view += m;
    }

    fn rhs3(&mut self, v: &Vector3<f64>) {
        let mut view = self.b.rows_mut(self.row, 3);
        view += v;
    }

    fn next3(&mut self) {
        self.row += 3;
    }

    fn fix(&mut self, col: usize, value: f64) {
        self.a[(self.row, col)] = 1.0;
        self.b[self.row] = value;
        self.row += 1;
    }
}

fn vertical() -> Vector3<f64> {
    Vector3::z()
}

/// Mass accelerations as linear maps of `[X2x, X2y, X1x, X1y]`, one 3x4 block per mass.
fn mass_accel_maps(k: f64) -> [nalgebra::Matrix3x4<f64>; 3] {
    let mut torso = nalgebra::Matrix3x4::zeros();
    torso[(0, 2)] = 1.0;
    torso[(1, 3)] = 1.0;
    let mut swing = nalgebra::Matrix3x4::zeros();
    swing[(0, 0)] = k;
    swing[(1, 1)] = k;
    swing[(0, 2)] = 1.0 - k;
    swing[(1, 3)] = 1.0 - k;
    let stance = torso * (1.0 - k);
    [torso, swing, stance]
}

/// Balance equations shared by both phases: Newton for each mass, moments
/// about each mass, and the massless pelvis. 24 rows.
fn balance_rows(sys: &mut System, p: &BodyParams, q: &Vec23, geo: &Geometry, foot2: &Vector3<f64>, foot3: &Vector3<f64>) {
    let g = p.g();
    let masses = [p.m1(), p.m2(), p.m3()];
    let maps = mass_accel_maps(p.leg_ratio());
    let push = Vector3::new(q[idx::F1X], q[idx::F1Y], 0.0);
    let push_moment = Vector3::new(q[idx::M1X], q[idx::M1Y], 0.0);
    let id = Matrix3::identity();

    // m_i yddot_i - f_i - F_i = F_ext - m_i g e_z
    for (i, (&m, map)) in masses.iter().zip(maps.iter()).enumerate() {
        let mut view = sys.a.view_mut((sys.row, ACC), (3, 4));
        view += map * m;
        sys.block([F1, F2, F3][i], &(-id));
        match i {
            0 => sys.rhs3(&push),
            1 => sys.block(G2, &(-id)),
            _ => sys.block(G3, &(-id)),
        }
        sys.rhs3(&(-m * g * vertical()));
        sys.next3();
    }

    // torso, about its mass: (X1 - y1) x f1 + tau1 + M1 = 0
    let pelvis = Vector3::new(q[idx::X1X], q[idx::X1Y], p.z1());
    sys.block(F1, &skew(&(pelvis - geo.y1)));
    sys.block(T1, &id);
    sys.rhs3(&(-push_moment));
    sys.next3();

    // legs, about their masses: (foot - y) x F + (hip - y) x f + M + tau = 0
    for (foot, hip, y, cf, cg, cm, ct) in [
        (foot2, geo.x2, geo.y2, F2, G2, MM2, T2),
        (foot3, geo.x3, geo.y3, F3, G3, MM3, T3),
    ] {
        sys.block(cg, &skew(&(foot - y)));
        sys.block(cf, &skew(&(hip - y)));
        sys.block(cm, &id);
        sys.block(ct, &id);
        sys.next3();
    }

    // pelvis: sum f = 0, sum tau + sum (hip - X1) x f = 0
    for c in [F1, F2, F3] {
        sys.block(c, &id);
    }
    sys.next3();
    for c in [T1, T2, T3] {
        sys.block(c, &id);
    }
    sys.block(F2, &skew(&(geo.x2 - pelvis)));
    sys.block(F3, &skew(&(geo.x3 - pelvis)));
    sys.next3();
}

/// Columns of the torques and vertical load that the weight-transfer closure
/// splits between the legs: `[tau_x, tau_y, tau_z, F_z]`.
const TRAILING_SPLIT: [usize; 4] = [T2, T2 + 1, T2 + 2, G2 + 2];
const LEADING_SPLIT: [usize; 4] = [T3, T3 + 1, T3 + 2, G3 + 2];

/// Left null space of the columns not split by the closure.
fn residual_combinations(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let split: Vec<usize> = TRAILING_SPLIT.iter().chain(LEADING_SPLIT.iter()).copied().collect();
    let others: Vec<usize> = (0..N).filter(|c| !split.contains(c)).collect();
    let rows = a.nrows();
    // transpose of the "others" block, padded square so the full right basis is returned
    let mut at = DMatrix::zeros(rows, rows);
    for (r, &c) in others.iter().enumerate() {
        for j in 0..rows {
            at[(r, j)] = a[(j, c)];
        }
    }
    let svd = at.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("closure null space".into()))?;
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values.max();
    let dim = rows - others.len();
    if svd.singular_values[order[dim]] <= 1e-10 * smax {
        return Err(Error::Singular("closure residual system is rank deficient".into()));
    }
    let mut n = DMatrix::zeros(rows, dim);
    for (k, &i) in order.iter().take(dim).enumerate() {
        n.set_column(k, &v_t.row(i).transpose());
    }
    Ok(n)
}

fn add_closure(sys: &mut System, q: &Vec23, s: f64) -> Result<()> {
    let base_rows = sys.row;
    let base = sys.a.rows(0, base_rows).into_owned();
    let n = residual_combinations(&base)?;
    let pick = |cols: &[usize; 4]| {
        let mut m = DMatrix::zeros(base_rows, 4);
        for (k, &c) in cols.iter().enumerate() {
            m.set_column(k, &base.column(c));
        }
        n.transpose() * m
    };
    let j2 = pick(&TRAILING_SPLIT);
    let j3 = pick(&LEADING_SPLIT);
    let (t2, t3) = double_support_hip_targets(q);
    let v2 = DVector::from_vec(vec![t2.x, t2.y, 0.0, 0.0]);
    let v3 = DVector::from_vec(vec![t3.x, t3.y, 0.0, 0.0]);
    // s J2 (V2 - V2hat) = (1 - s) J3 (V3 - V3hat)
    let rhs = &j2 * &v2 * s - &j3 * &v3 * (1.0 - s);
    for r in 0..4 {
        for k in 0..4 {
            sys.a[(sys.row + r, TRAILING_SPLIT[k])] += s * j2[(r, k)];
            sys.a[(sys.row + r, LEADING_SPLIT[k])] -= (1.0 - s) * j3[(r, k)];
        }
        sys.b[sys.row + r] = rhs[r];
    }
    sys.row += 4;
    Ok(())
}

/// Solves every force, torque and acceleration of `phase` at local time `t`.
pub fn solve_forces(params: &BodyParams, timing: &StrideTiming, phase: Phase, q: &Vec23, t: f64) -> Result<ForceSolution> {
    let duration = phase.duration(timing);
    if !(0.0..=duration).contains(&t) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    let pelvis = Vector3::new(q[idx::X1X], q[idx::X1Y], params.z1());
    let foot2 = Vector3::new(q[idx::X2X], q[idx::X2Y], 0.0);
    let foot3 = Vector3::new(q[idx::PX], q[idx::PY], 0.0);
    let geo = geometry(params, &pelvis, &foot2, &foot3, q[idx::D]);

    let mut sys = System::new(N);
    balance_rows(&mut sys, params, q, &geo, &foot2, &foot3);
    match phase {
        Phase::Single => {
            for c in 0..3 {
                sys.fix(G2 + c, 0.0);
                sys.fix(MM2 + c, 0.0);
            }
            let (hip, ankle) = single_support_inputs(q, t, timing.t_ss());
            sys.fix(T2, hip.x);
            sys.fix(T2 + 1, hip.y);
            sys.fix(MM3, ankle.x);
            sys.fix(MM3 + 1, ankle.y);
        }
        Phase::Double => {
            let (trailing, leading) = double_support_contact_moments(q, t, timing.t_ds());
            sys.fix(MM2, trailing.x);
            sys.fix(MM2 + 1, trailing.y);
            sys.fix(MM3, leading.x);
            sys.fix(MM3 + 1, leading.y);
            sys.fix(ACC, 0.0);
            sys.fix(ACC + 1, 0.0);
            add_closure(&mut sys, q, t / timing.t_ds())?;
        }
    }
    debug_assert_eq!(sys.row, N);

    let scale = sys.a.amax();
    let lu = sys.a.clone().lu();
    let x = lu
        .solve(&sys.b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{phase:?} balance system")))?;
    let residual = (&sys.a * &x - &sys.b).amax();
    if residual > 1e-6 * scale * (1.0 + x.amax()) {
        return Err(Error::Singular(format!("{phase:?} balance system (residual {residual:e})")));
    }

    let v3 = |c: usize| Vector3::new(x[c], x[c + 1], x[c + 2]);
    Ok(ForceSolution {
        f1: v3(F1),
        f2: v3(F2),
        f3: v3(F3),
        big_f1: Vector3::new(q[idx::F1X], q[idx::F1Y], 0.0),
        big_f2: v3(G2),
        big_f3: v3(G3),
        m1: Vector3::new(q[idx::M1X], q[idx::M1Y], 0.0),
        m2: v3(MM2),
        m3: v3(MM3),
        tau1: v3(T1),
        tau2: v3(T2),
        tau3: v3(T3),
        accel: Vector4::new(x[ACC], x[ACC + 1], x[ACC + 2], x[ACC + 3]),
    })
}

impl ForceSolution {
    /// Largest violation of the Newton/Euler and pelvis balance equations,
    /// relative to the largest force or torque present.
    pub fn balance_residual(&self, params: &BodyParams, q: &Vec23) -> f64 {
        let pelvis = Vector3::new(q[idx::X1X], q[idx::X1Y], params.z1());
        let foot2 = Vector3::new(q[idx::X2X], q[idx::X2Y], 0.0);
        let foot3 = Vector3::new(q[idx::PX], q[idx::PY], 0.0);
        let geo = geometry(params, &pelvis, &foot2, &foot3, q[idx::D]);
        let maps = mass_accel_maps(params.leg_ratio());
        let gz = params.g() * vertical();
        let acc = [maps[0] * self.accel, maps[1] * self.accel, maps[2] * self.accel];
        let residuals = [
            acc[0] * params.m1() - self.f1 - self.big_f1 + gz * params.m1(),
            acc[1] * params.m2() - self.f2 - self.big_f2 + gz * params.m2(),
            acc[2] * params.m3() - self.f3 - self.big_f3 + gz * params.m3(),
            (pelvis - geo.y1).cross(&self.f1) + self.tau1 + self.m1,
            (foot2 - geo.y2).cross(&self.big_f2) + (geo.x2 - geo.y2).cross(&self.f2) + self.m2 + self.tau2,
            (foot3 - geo.y3).cross(&self.big_f3) + (geo.x3 - geo.y3).cross(&self.f3) + self.m3 + self.tau3,
            self.f1 + self.f2 + self.f3,
            self.tau1 + self.tau2 + self.tau3 + (geo.x2 - pelvis).cross(&self.f2) + (geo.x3 - pelvis).cross(&self.f3),
        ];
        let scale = [
            self.f1, self.f2, self.f3, self.big_f1, self.big_f2, self.big_f3, self.m1, self.m2, self.m3, self.tau1,
            self.tau2, self.tau3,
        ]
        .iter()
        .map(|v| v.amax())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
        residuals.iter().map(|r| r.amax()).fold(0.0, f64::max) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::assemble;
    use crate::model::BodySize;

    fn setup() -> (BodyParams, StrideTiming) {
        (BodyParams::preset(BodySize::Adult), StrideTiming::new(0.3, 0.56).unwrap())
    }

    fn sample_state(seed: u64) -> Vec23 {
        // small deterministic pseudo-random state
        let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut q = Vec23::from_fn(|_, _| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        q[idx::D] = if seed % 2 == 0 { 1.0 } else { -1.0 };
        q
    }

    #[test]
    fn matches_reduced_equations() {
        let (p, timing) = setup();
        for phase in [Phase::Single, Phase::Double] {
            let ode = assemble(&p, &timing, phase).unwrap();
            for seed in 0..20 {
                let q = sample_state(seed);
                let t = phase.duration(&timing) * (seed as f64 + 0.5) / 20.0;
                let full = solve_forces(&p, &timing, phase, &q, t).unwrap();
                let reduced = ode.accel(&q, t);
                let err = (full.accel - reduced).amax();
                assert!(err <= 1e-10 * (1.0 + reduced.amax()), "{phase:?} seed {seed}: {err:e}");
            }
        }
    }

    #[test]
    fn balance_holds() {
        let (p, timing) = setup();
        for phase in [Phase::Single, Phase::Double] {
            for seed in 0..10 {
                let q = sample_state(seed);
                for t in [0.0, phase.duration(&timing) * 0.37, phase.duration(&timing)] {
                    let sol = solve_forces(&p, &timing, phase, &q, t).unwrap();
                    assert!(sol.balance_residual(&p, &q) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn static_standing_load() {
        let p = BodyParams::new(45.7, 12.15, 12.15, 0.89, 0.32, 0.36, 0.0, 9.81).unwrap();
        let timing = StrideTiming::new(0.3, 0.56).unwrap();
        let sol = solve_forces(&p, &timing, Phase::Single, &Vec23::zeros(), 0.2).unwrap();
        assert!((sol.big_f3.z - p.weight()).abs() < 1e-9);
        assert_eq!(sol.big_f2, Vector3::zeros());
        assert_eq!(sol.m2, Vector3::zeros());
    }

    #[test]
    fn vertical_load_transfers_linearly() {
        let (p, timing) = setup();
        let q = sample_state(3);
        for k in 0..=10 {
            let t = timing.t_ds() * k as f64 / 10.0;
            let sol = solve_forces(&p, &timing, Phase::Double, &q, t).unwrap();
            let s = t / timing.t_ds();
            assert!((sol.big_f2.z - (1.0 - s) * p.weight()).abs() < 1e-9 * p.weight());
            assert!((sol.big_f3.z - s * p.weight()).abs() < 1e-9 * p.weight());
        }
    }

    #[test]
    fn hip_torques_continuous_at_phase_ends() {
        let (p, timing) = setup();
        let q = sample_state(5);
        let start = solve_forces(&p, &timing, Phase::Double, &q, 0.0).unwrap();
        let end = solve_forces(&p, &timing, Phase::Double, &q, timing.t_ds()).unwrap();
        let (t2, t3) = double_support_hip_targets(&q);
        assert!((end.tau2.x - t2.x).abs() < 1e-9 && (end.tau2.y - t2.y).abs() < 1e-9);
        assert!((start.tau3.x - t3.x).abs() < 1e-9 && (start.tau3.y - t3.y).abs() < 1e-9);
    }

    #[test]
    fn rejects_time_outside_phase() {
        let (p, timing) = setup();
        let err = solve_forces(&p, &timing, Phase::Single, &Vec23::zeros(), 0.6);
        assert!(matches!(err, Err(Error::TimeOutOfRange { .. })));
    }
}
