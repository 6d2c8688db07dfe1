//! Reference integrator for checking the closed-form maps.
//!
//! Accelerations come from solving the horizontal balance equations of every
//! body directly at each RK4 stage, with no pre-elimination. Vertical loads
//! are solved from their own (decoupled) equations first. Nothing here reuses
//! the reduced equations of [`crate::dynamics`].

use nalgebra::{DMatrix, SMatrix, SVector, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::model::{idx, BodyParams, StrideTiming, Vec23};
use crate::transition::StrideMap;

const N: usize = 24;
type Mat = SMatrix<f64, N, N>;
type Rhs = SVector<f64, N>;

// unknown layout, (x, y) pairs
const ACC: usize = 0;
const F1: usize = 4;
const F2: usize = 6;
const F3: usize = 8;
const G2: usize = 10;
const G3: usize = 12;
const M2: usize = 14;
const M3: usize = 16;
const T1: usize = 18;
const T2: usize = 20;
const T3: usize = 22;

/// Which part of the stride is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Double,
    Single,
}

/// A piecewise-constant external push on the torso, in stride time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Push {
    pub start: f64,
    pub duration: f64,
    /// `[F1x, F1y, M1y, M1x]`
    pub wrench: [f64; 4],
}

impl Push {
    fn end(&self) -> f64 {
        self.start + self.duration
    }
    fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

/// Span of the stride an oracle run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleSpan {
    #[default]
    Stride,
    /// Double support only, `[0, T_ds]`.
    Double,
    /// Single support only, starting from the state at `T_ds`.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub step: f64,
    pub span: OracleSpan,
    /// Store every `record_every`-th state; 0 keeps only the end points.
    pub record_every: usize,
    pub push: Option<Push>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { step: 1e-5, span: OracleSpan::Stride, record_every: 0, push: None }
    }
}

impl OracleConfig {
    fn validate(&self, timing: &StrideTiming) -> Result<()> {
        let limit = timing.t_ds().min(timing.t_ss()) / 100.0;
        if !(self.step > 0.0) || self.step > limit {
            return Err(Error::Config(format!("oracle step {} must be in (0, {limit}]", self.step)));
        }
        if let Some(p) = self.push {
            if self.span != OracleSpan::Stride {
                return Err(Error::Config("pushes are only scheduled over a full stride".into()));
            }
            if !(p.start >= 0.0 && p.duration >= 0.0 && p.end() <= timing.stride() * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "push [{}, {}] must lie inside the stride [0, {}]",
                    p.start,
                    p.end(),
                    timing.stride()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec23>,
}

impl OracleTrajectory {
    pub fn end(&self) -> &Vec23 {
        self.states.last().expect("trajectory has an end point")
    }
}

/// Horizontal forces and wrenches of one instant, as solved by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleForces {
    pub accel: Vector4<f64>,
    /// Horizontal pelvis forces on masses 1..3.
    pub hip: [Vector2<f64>; 3],
    /// Horizontal ground forces on feet 2 and 3.
    pub ground: [Vector2<f64>; 2],
    /// Vertical ground loads on feet 2 and 3.
    pub vertical: [f64; 2],
}

/// Balance equations for one body, ready to be solved at any instant.
#[derive(Debug, Clone)]
pub struct Oracle {
    params: BodyParams,
    timing: StrideTiming,
    single: nalgebra::LU<f64, nalgebra::Const<N>, nalgebra::Const<N>>,
    double_base: Mat,
    /// Left null vectors of the double-support rows, restricted to columns not split by the closure.
    residual: SMatrix<f64, 2, 22>,
}

fn add_cross(m: &mut Mat, row: usize, col: usize, rz: f64) {
    // horizontal part of r x f for horizontal f: (-rz fy, rz fx)
    m[(row, col + 1)] += -rz;
    m[(row + 1, col)] += rz;
}

fn known_cross(r: (f64, f64), fz: f64) -> (f64, f64) {
    // horizontal part of r x (0, 0, fz)
    (r.1 * fz, -r.0 * fz)
}

impl Oracle {
    pub fn new(params: &BodyParams, timing: &StrideTiming) -> Result<Self> {
        let (k, z1, z3) = (params.leg_ratio(), params.z1(), params.z3());
        let mut base = Mat::zeros();
        let masses = [params.m1(), params.m2(), params.m3()];
        // Newton, horizontal: m_i yddot_i - f_i - F_i = (push on the torso)
        for axis in 0..2 {
            base[(axis, ACC + 2 + axis)] = masses[0];
            base[(axis, F1 + axis)] = -1.0;
            base[(2 + axis, ACC + axis)] = masses[1] * k;
            base[(2 + axis, ACC + 2 + axis)] = masses[1] * (1.0 - k);
            base[(2 + axis, F2 + axis)] = -1.0;
            base[(2 + axis, G2 + axis)] = -1.0;
            base[(4 + axis, ACC + 2 + axis)] = masses[2] * (1.0 - k);
            base[(4 + axis, F3 + axis)] = -1.0;
            base[(4 + axis, G3 + axis)] = -1.0;
        }
        // torso about its mass: (X1 - y1) x f1 + M1 + tau1 = 0, X1 - y1 = -z3 e_z
        add_cross(&mut base, 6, F1, -z3);
        // legs about their masses: (foot - y) x F + (hip - y) x f + M + tau = 0
        for (row, g, f, m, t) in [(8, G2, F2, M2, T2), (10, G3, F3, M3, T3)] {
            add_cross(&mut base, row, g, -(z1 - k * z1));
            add_cross(&mut base, row, f, k * z1);
            for axis in 0..2 {
                base[(row + axis, m + axis)] = 1.0;
                base[(row + axis, t + axis)] = 1.0;
            }
        }
        for axis in 0..2 {
            base[(6 + axis, T1 + axis)] = 1.0;
            // pelvis: -f1 - f2 - f3 = 0
            for c in [F1, F2, F3] {
                base[(12 + axis, c + axis)] = -1.0;
            }
            // pelvis moment: hip offsets lie along y, so horizontal f only enters the yaw row
            for c in [T1, T2, T3] {
                base[(14 + axis, c + axis)] = -1.0;
            }
        }

        let mut single = base;
        for (r, c) in [(16, G2), (18, M2), (20, T2), (22, M3)] {
            for axis in 0..2 {
                single[(r + axis, c + axis)] = 1.0;
            }
        }
        let single = single.lu();
        if !single.is_invertible() {
            return Err(Error::Singular("oracle single-support system".into()));
        }

        let mut double_base = base;
        for (r, c) in [(16, M2), (18, M3), (20, ACC)] {
            for axis in 0..2 {
                double_base[(r + axis, c + axis)] = 1.0;
            }
        }
        // left null space of the first 22 rows over the columns the closure leaves alone
        let others: Vec<usize> = (0..N).filter(|c| !(T2..T2 + 4).contains(c)).collect();
        let mut at = DMatrix::zeros(22, 22);
        for (r, &c) in others.iter().enumerate() {
            for j in 0..22 {
                at[(r, j)] = double_base[(j, c)];
            }
        }
        let svd = at.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Singular("oracle closure".into()))?;
        let mut order: Vec<usize> = (0..22).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        if svd.singular_values[order[2]] <= 1e-10 * svd.singular_values.max() {
            return Err(Error::Singular("oracle closure rows".into()));
        }
        let mut residual = SMatrix::<f64, 2, 22>::zeros();
        for (k, &i) in order.iter().take(2).enumerate() {
            for j in 0..22 {
                residual[(k, j)] = v_t[(i, j)];
            }
        }
        Ok(Self { params: *params, timing: *timing, single, double_base, residual })
    }

    fn closure_gains(&self) -> (SMatrix<f64, 2, 2>, SMatrix<f64, 2, 2>) {
        let pick = |c: usize| {
            let mut m = SMatrix::<f64, 22, 2>::zeros();
            for j in 0..22 {
                m[(j, 0)] = self.double_base[(j, c)];
                m[(j, 1)] = self.double_base[(j, c + 1)];
            }
            self.residual * m
        };
        (pick(T2), pick(T3))
    }

    fn double_matrix(&self, s: f64) -> Mat {
        let (j2, j3) = self.closure_gains();
        let mut m = self.double_base;
        // s J2 (tau2 - tau2_target) = (1 - s) J3 (tau3 - tau3_target)
        for r in 0..2 {
            for c in 0..2 {
                m[(22 + r, T2 + c)] = s * j2[(r, c)];
                m[(22 + r, T3 + c)] = -(1.0 - s) * j3[(r, c)];
            }
        }
        m
    }

    /// Vertical loads `[f1z, f2z, f3z, F2z, F3z]` from their own balance and load-transfer rule.
    fn vertical(&self, segment: Segment, s: f64) -> [f64; 5] {
        let p = &self.params;
        let g = p.g();
        // rows: m_i g = f_iz + F_iz (three), f1z + f2z + f3z = 0
        let mut a = SMatrix::<f64, 5, 5>::zeros();
        let mut b = SVector::<f64, 5>::zeros();
        a[(0, 0)] = 1.0;
        b[0] = p.m1() * g;
        a[(1, 1)] = 1.0;
        a[(1, 3)] = 1.0;
        b[1] = p.m2() * g;
        a[(2, 2)] = 1.0;
        a[(2, 4)] = 1.0;
        b[2] = p.m3() * g;
        a[(3, 0)] = 1.0;
        a[(3, 1)] = 1.0;
        a[(3, 2)] = 1.0;
        match segment {
            Segment::Single => a[(4, 3)] = 1.0,
            Segment::Double => {
                // the one combination free of f: sum of the first three minus the fourth
                let n = [1.0, 1.0, 1.0, -1.0];
                let j2: f64 = (0..4).map(|r| n[r] * a[(r, 3)]).sum();
                let j3: f64 = (0..4).map(|r| n[r] * a[(r, 4)]).sum();
                a[(4, 3)] = s * j2;
                a[(4, 4)] = -(1.0 - s) * j3;
            }
        }
        let x = a.lu().solve(&b).expect("vertical loads are determined");
        [x[0], x[1], x[2], x[3], x[4]]
    }

    fn rhs(&self, segment: Segment, q: &Vec23, w: &[f64; 4], t: f64, vertical: &[f64; 5]) -> Rhs {
        let p = &self.params;
        let k = p.leg_ratio();
        let hd = p.w() * q[idx::D] / 2.0;
        let [_, f2z, f3z, g2z, g3z] = *vertical;
        let pelvis = (q[idx::X1X], q[idx::X1Y]);
        let hip2 = (pelvis.0, pelvis.1 + hd);
        let hip3 = (pelvis.0, pelvis.1 - hd);
        let foot2 = (q[idx::X2X], q[idx::X2Y]);
        let foot3 = (q[idx::PX], q[idx::PY]);
        let mass = |hip: (f64, f64), foot: (f64, f64)| (hip.0 + k * (foot.0 - hip.0), hip.1 + k * (foot.1 - hip.1));
        let (y2, y3) = (mass(hip2, foot2), mass(hip3, foot3));
        let diff = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);

        let mut b = Rhs::zeros();
        b[0] = w[0];
        b[1] = w[1];
        // torso: M1 = (M1x, M1y) moves to the right-hand side
        b[6] = -w[3];
        b[7] = -w[2];
        for (row, foot, hip, y, gz, fz) in [(8, foot2, hip2, y2, g2z, f2z), (10, foot3, hip3, y3, g3z, f3z)] {
            let a = known_cross(diff(foot, y), gz);
            let c = known_cross(diff(hip, y), fz);
            b[row] = -(a.0 + c.0);
            b[row + 1] = -(a.1 + c.1);
        }
        // pelvis moment, horizontal part of -(hd e_y) x (f2 - f3): -hd (f2z - f3z) about x
        b[14] = hd * (f2z - f3z);

        match segment {
            Segment::Single => {
                let s = t / self.timing.t_ss();
                b[20] = q[idx::MHX] + s * q[idx::RMHX];
                b[21] = q[idx::MHY] + s * q[idx::RMHY];
                b[22] = q[idx::MAX] + s * q[idx::RMAX];
                b[23] = q[idx::MAY] + s * q[idx::RMAY];
            }
            Segment::Double => {
                let s = t / self.timing.t_ds();
                b[16] = (1.0 - s) * (-q[idx::MAX] - q[idx::RMAX]);
                b[17] = (1.0 - s) * (q[idx::MAY] + q[idx::RMAY]);
                b[18] = s * q[idx::MAX];
                b[19] = s * q[idx::MAY];
                let (j2, j3) = self.closure_gains();
                let t2 = nalgebra::Vector2::new(q[idx::MHX], q[idx::MHY]);
                let t3 = nalgebra::Vector2::new(-q[idx::MHX] - q[idx::RMHX], q[idx::MHY] + q[idx::RMHY]);
                let c = j2 * t2 * s - j3 * t3 * (1.0 - s);
                b[22] = c[0];
                b[23] = c[1];
            }
        }
        b
    }

    /// Direct solve at one instant; `t` is local to the segment.
    pub fn solve(&self, segment: Segment, q: &Vec23, t: f64) -> Result<OracleForces> {
        let w = [q[idx::F1X], q[idx::F1Y], q[idx::M1Y], q[idx::M1X]];
        let (x, vertical) = match segment {
            Segment::Single => {
                let v = self.vertical(segment, 0.0);
                (self.single.solve(&self.rhs(segment, q, &w, t, &v)), v)
            }
            Segment::Double => {
                let s = t / self.timing.t_ds();
                let v = self.vertical(segment, s);
                (self.double_matrix(s).lu().solve(&self.rhs(segment, q, &w, t, &v)), v)
            }
        };
        let x = x.ok_or_else(|| Error::Singular("oracle balance system".into()))?;
        let pair = |c: usize| Vector2::new(x[c], x[c + 1]);
        Ok(OracleForces {
            accel: Vector4::new(x[0], x[1], x[2], x[3]),
            hip: [pair(F1), pair(F2), pair(F3)],
            ground: [pair(G2), pair(G3)],
            vertical: [vertical[3], vertical[4]],
        })
    }

    /// Rows of the inverse that give the accelerations, for a batch sharing one factorisation.
    fn accel_rows(&self, segment: Segment, t: f64) -> Result<(SMatrix<f64, 4, N>, [f64; 5])> {
        let (lu, s) = match segment {
            Segment::Single => (None, 0.0),
            Segment::Double => {
                let s = t / self.timing.t_ds();
                (Some(self.double_matrix(s).lu()), s)
            }
        };
        let lu = lu.as_ref().unwrap_or(&self.single);
        let mut rows = SMatrix::<f64, 4, N>::zeros();
        // rows of A^-1 are solutions of A^T y = e_i; use the LU of A on unit columns instead
        let mut inv_cols = SMatrix::<f64, N, N>::identity();
        if !lu.solve_mut(&mut inv_cols) {
            return Err(Error::Singular("oracle balance system".into()));
        }
        for r in 0..4 {
            rows.set_row(r, &inv_cols.row(r));
        }
        Ok((rows, self.vertical(segment, s)))
    }
}

/// RK4 over the stride for several initial states at once.
struct Batch<'a> {
    oracle: &'a Oracle,
    push: Option<Push>,
}

impl Batch<'_> {
    fn wrench(&self, q: &Vec23, stride_t: f64) -> [f64; 4] {
        match self.push {
            Some(p) if p.active(stride_t) => p.wrench,
            _ => [q[idx::F1X], q[idx::F1Y], q[idx::M1Y], q[idx::M1X]],
        }
    }

    fn derivatives(
        &self,
        segment: Segment,
        local: f64,
        stride_t: f64,
        rows: &(SMatrix<f64, 4, N>, [f64; 5]),
        q: &Vec23,
    ) -> SVector<f64, 8> {
        let w = self.wrench(q, stride_t);
        let b = self.oracle.rhs(segment, q, &w, local, &rows.1);
        let acc = rows.0 * b;
        let mut d = SVector::<f64, 8>::zeros();
        let moving_swing = segment == Segment::Single;
        for i in 0..4 {
            if i >= 2 || moving_swing {
                d[i] = q[4 + i];
            }
            d[4 + i] = acc[i];
        }
        d
    }

    /// Integrates one segment `[t0, t1]` of a phase (local times), offset by `base` in stride time.
    fn segment(
        &self,
        segment: Segment,
        t0: f64,
        t1: f64,
        base: f64,
        step: f64,
        states: &mut [Vec23],
        mut record: impl FnMut(f64, &[Vec23], usize),
    ) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let n = ((t1 - t0) / step).ceil() as usize;
        let h = (t1 - t0) / n as f64;
        let mut rows_start = self.oracle.accel_rows(segment, t0)?;
        for k in 0..n {
            let ta = t0 + h * k as f64;
            let tm = ta + 0.5 * h;
            let tb = if k + 1 == n { t1 } else { ta + h };
            let rows_mid = self.oracle.accel_rows(segment, tm)?;
            let rows_end = self.oracle.accel_rows(segment, tb)?;
            // pushes switch on stage times inside a step; segments are split at push edges
            let sa = base + ta + 1e-3 * h;
            let sm = base + tm;
            let sb = base + tb - 1e-3 * h;
            for q in states.iter_mut() {
                let y0 = q.fixed_rows::<8>(0).into_owned();
                let at = |y: &SVector<f64, 8>| {
                    let mut s = *q;
                    s.fixed_rows_mut::<8>(0).copy_from(y);
                    s
                };
                let k1 = self.derivatives(segment, ta, sa, &rows_start, q);
                let k2 = self.derivatives(segment, tm, sm, &rows_mid, &at(&(y0 + k1 * (0.5 * h))));
                let k3 = self.derivatives(segment, tm, sm, &rows_mid, &at(&(y0 + k2 * (0.5 * h))));
                let k4 = self.derivatives(segment, tb, sb, &rows_end, &at(&(y0 + k3 * h)));
                let y1 = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                q.fixed_rows_mut::<8>(0).copy_from(&y1);
            }
            record(base + tb, states, k + 1);
            rows_start = rows_end;
        }
        Ok(())
    }
}

fn breakpoints(timing: &StrideTiming, push: Option<Push>) -> Vec<f64> {
    let mut pts = vec![0.0, timing.t_ds(), timing.stride()];
    if let Some(p) = push {
        pts.push(p.start.min(timing.stride()));
        pts.push(p.end().min(timing.stride()));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn run(
    params: &BodyParams,
    timing: &StrideTiming,
    q0s: &[Vec23],
    config: &OracleConfig,
    mut record: impl FnMut(f64, &[Vec23], usize),
) -> Result<Vec<Vec23>> {
    config.validate(timing)?;
    if q0s.iter().any(|q| q.iter().any(|v| !v.is_finite())) {
        return Err(Error::Config("initial state must be finite".into()));
    }
    let oracle = Oracle::new(params, timing)?;
    let batch = Batch { oracle: &oracle, push: config.push };
    let mut states = q0s.to_vec();
    let mut pts = breakpoints(timing, config.push);
    match config.span {
        OracleSpan::Stride => {}
        OracleSpan::Double => pts = vec![0.0, timing.t_ds()],
        OracleSpan::Single => pts = vec![timing.t_ds(), timing.stride()],
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a < timing.t_ds() {
            batch.segment(Segment::Double, a, b, 0.0, config.step, &mut states, &mut record)?;
        } else {
            let base = timing.t_ds();
            batch.segment(Segment::Single, a - base, b - base, base, config.step, &mut states, &mut record)?;
        }
    }
    if config.push.is_some() {
        // the push lives outside the state; restore the nominal wrench slots
        for (q, q0) in states.iter_mut().zip(q0s) {
            for i in idx::W {
                q[i] = q0[i];
            }
        }
    }
    Ok(states)
}

/// Integrates the configured span from `q0` (stride times in the result).
pub fn integrate(params: &BodyParams, timing: &StrideTiming, q0: &Vec23, config: &OracleConfig) -> Result<OracleTrajectory> {
    let (start, end_time) = match config.span {
        OracleSpan::Stride => (0.0, timing.stride()),
        OracleSpan::Double => (0.0, timing.t_ds()),
        OracleSpan::Single => (timing.t_ds(), timing.stride()),
    };
    let mut times = vec![start];
    let mut states = vec![*q0];
    let every = config.record_every;
    let end = run(params, timing, std::slice::from_ref(q0), config, |t, s, k| {
        if every > 0 && k % every == 0 {
            times.push(t);
            states.push(s[0]);
        }
    })?;
    let recorded = times.len() > 1;
    match times.last_mut() {
        Some(t) if every > 0 && recorded && (*t - end_time).abs() <= 1e-12 => *t = end_time,
        _ => {
            times.push(end_time);
            states.push(end[0]);
        }
    }
    Ok(OracleTrajectory { times, states })
}

/// End states of one stride for many initial states, sharing every factorisation.
pub fn integrate_batch(params: &BodyParams, timing: &StrideTiming, q0s: &[Vec23], config: &OracleConfig) -> Result<Vec<Vec23>> {
    run(params, timing, q0s, config, |_, _, _| {})
}

/// Closed-form counterpart of a pushed stride: compose the exact maps over
/// the intervals before, during and after the push.
pub fn push_closed_form(map: &StrideMap, q0: &Vec23, push: &Push) -> Result<Vec23> {
    let total = map.timing().stride();
    if push.start < 0.0 || push.duration < 0.0 || push.end() > total * (1.0 + 1e-12) {
        return Err(Error::Config(format!("push [{}, {}] outside the stride", push.start, push.end())));
    }
    let mut q = map.propagate(0.0, push.start)? * q0;
    let nominal: Vec<f64> = idx::W.map(|i| q[i]).collect();
    for (k, i) in idx::W.enumerate() {
        q[i] = push.wrench[k];
    }
    q = map.propagate(push.start, push.end().min(total))? * q;
    for (k, i) in idx::W.enumerate() {
        q[i] = nominal[k];
    }
    Ok(map.propagate(push.end().min(total), total)? * q)
}

/// Work done on the three masses against the change of their horizontal kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub work: f64,
    pub kinetic_change: f64,
    /// Integral of the absolute power, a scale for comparing the two.
    pub gross_work: f64,
}

impl EnergyBalance {
    pub fn relative_error(&self) -> f64 {
        (self.work - self.kinetic_change).abs() / self.kinetic_change.abs().max(self.gross_work).max(f64::MIN_POSITIVE)
    }
}

fn mass_velocities(params: &BodyParams, q: &Vec23, segment: Segment) -> [Vector2<f64>; 3] {
    let k = params.leg_ratio();
    let pelvis = Vector2::new(q[idx::V1X], q[idx::V1Y]);
    let swing = if segment == Segment::Single { Vector2::new(q[idx::V2X], q[idx::V2Y]) } else { Vector2::zeros() };
    [pelvis, pelvis * (1.0 - k) + swing * k, pelvis * (1.0 - k)]
}

fn kinetic(params: &BodyParams, v: &[Vector2<f64>; 3]) -> f64 {
    0.5 * (params.m1() * v[0].norm_squared() + params.m2() * v[1].norm_squared() + params.m3() * v[2].norm_squared())
}

/// Integrates the power of every horizontal force acting on the masses
/// (hip interaction, ground and push) along an oracle stride, by Simpson's
/// rule on the oracle's own force solution at each step.
pub fn energy_balance(params: &BodyParams, timing: &StrideTiming, q0: &Vec23, step: f64) -> Result<EnergyBalance> {
    let config = OracleConfig { step, record_every: 1, ..Default::default() };
    let traj = integrate(params, timing, q0, &config)?;
    let oracle = Oracle::new(params, timing)?;
    let mut work = 0.0;
    let mut gross_work = 0.0;
    let mut kinetic_change = 0.0;
    for w in traj.times.windows(2).zip(traj.states.windows(2)) {
        let ([ta, tb], [qa, qb]) = (w.0, w.1) else { unreachable!() };
        let single = *ta >= timing.t_ds();
        let segment = if single { Segment::Single } else { Segment::Double };
        // Simpson's rule, midpoint from the cubic Hermite interpolant of the recorded states
        let h = tb - ta;
        let (la, lb) = if single { (ta - timing.t_ds(), tb - timing.t_ds()) } else { (*ta, *tb) };
        let fa = oracle.solve(segment, qa, la)?;
        let fb = oracle.solve(segment, qb, lb)?;
        let mid = hermite_mid(qa, qb, &fa.accel, &fb.accel, h, segment);
        let pa = power_at(params, &fa, qa, segment);
        let pb = power_at(params, &fb, qb, segment);
        let fm = oracle.solve(segment, &mid, (la + lb) / 2.0)?;
        let pm = power_at(params, &fm, &mid, segment);
        work += h / 6.0 * (pa + 4.0 * pm + pb);
        gross_work += h / 6.0 * (pa.abs() + 4.0 * pm.abs() + pb.abs());
        kinetic_change += kinetic(params, &mass_velocities(params, qb, segment))
            - kinetic(params, &mass_velocities(params, qa, segment));
    }
    Ok(EnergyBalance { work, kinetic_change, gross_work })
}

/// Positive work of the CoM and of the three masses, from the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveWork {
    /// Integral of the positive part of d/dt (1/2 M |v_com|^2).
    pub com: f64,
    /// Integral of the positive part of d/dt of the masses' summed kinetic energy.
    pub segments: f64,
}

/// Integrates the positive part of the kinetic power along an oracle stride
/// (Simpson per step, midpoint from Hermite interpolation).
pub fn positive_work(params: &BodyParams, timing: &StrideTiming, q0: &Vec23, step: f64) -> Result<PositiveWork> {
    let config = OracleConfig { step, record_every: 1, ..Default::default() };
    let traj = integrate(params, timing, q0, &config)?;
    let oracle = Oracle::new(params, timing)?;
    let k = params.leg_ratio();
    let total = params.total_mass();
    let rates = |q: &Vec23, segment: Segment, local: f64| -> Result<(f64, f64)> {
        let a = oracle.solve(segment, q, local)?.accel;
        let v = mass_velocities(params, q, segment);
        let pelvis_acc = Vector2::new(a[2], a[3]);
        let swing_acc = if segment == Segment::Single { Vector2::new(a[0], a[1]) } else { Vector2::zeros() };
        let acc = [pelvis_acc, pelvis_acc * (1.0 - k) + swing_acc * k, pelvis_acc * (1.0 - k)];
        let m = [params.m1(), params.m2(), params.m3()];
        let seg: f64 = (0..3).map(|i| m[i] * v[i].dot(&acc[i])).sum();
        let vc = (0..3).fold(Vector2::zeros(), |s, i| s + v[i] * m[i]) / total;
        let ac = (0..3).fold(Vector2::zeros(), |s, i| s + acc[i] * m[i]) / total;
        Ok((total * vc.dot(&ac), seg))
    };
    let mut work = PositiveWork { com: 0.0, segments: 0.0 };
    for w in traj.times.windows(2).zip(traj.states.windows(2)) {
        let ([ta, tb], [qa, qb]) = (w.0, w.1) else { unreachable!() };
        let single = *ta >= timing.t_ds();
        let segment = if single { Segment::Single } else { Segment::Double };
        let (la, lb) = if single { (ta - timing.t_ds(), tb - timing.t_ds()) } else { (*ta, *tb) };
        let h = tb - ta;
        let aa = oracle.solve(segment, qa, la)?.accel;
        let ab = oracle.solve(segment, qb, lb)?.accel;
        let mid = hermite_mid(qa, qb, &aa, &ab, h, segment);
        let (pa, pm, pb) = (rates(qa, segment, la)?, rates(&mid, segment, (la + lb) / 2.0)?, rates(qb, segment, lb)?);
        let simpson = |a: f64, m: f64, b: f64| h / 6.0 * (a.max(0.0) + 4.0 * m.max(0.0) + b.max(0.0));
        work.com += simpson(pa.0, pm.0, pb.0);
        work.segments += simpson(pa.1, pm.1, pb.1);
    }
    Ok(work)
}

fn power_at(params: &BodyParams, f: &OracleForces, q: &Vec23, segment: Segment) -> f64 {
    let v = mass_velocities(params, q, segment);
    let push = Vector2::new(q[idx::F1X], q[idx::F1Y]);
    (f.hip[0] + push).dot(&v[0]) + (f.hip[1] + f.ground[0]).dot(&v[1]) + (f.hip[2] + f.ground[1]).dot(&v[2])
}

/// Midpoint of a step from cubic Hermite interpolation of positions and velocities.
fn hermite_mid(qa: &Vec23, qb: &Vec23, aa: &Vector4<f64>, ab: &Vector4<f64>, h: f64, segment: Segment) -> Vec23 {
    let mut m = *qa;
    for i in 0..4 {
        let moving = i >= 2 || segment == Segment::Single;
        if moving {
            m[i] = 0.5 * (qa[i] + qb[i]) + h / 8.0 * (qa[4 + i] - qb[4 + i]);
        }
        m[4 + i] = 0.5 * (qa[4 + i] + qb[4 + i]) + h / 8.0 * (aa[i] - ab[i]);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{assemble, Phase};
    use crate::model::BodySize;

    fn setup() -> (BodyParams, StrideTiming) {
        (BodyParams::preset(BodySize::Adult), StrideTiming::new(0.3, 0.56).unwrap())
    }

    fn state(seed: u64) -> Vec23 {
        let mut x = seed.wrapping_add(7).wrapping_mul(0x2545_F491_4F6C_DD1D);
        let mut q = Vec23::from_fn(|_, _| {
            x ^= x >> 12;
            x ^= x << 25;
            x ^= x >> 27;
            (x.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        q[idx::D] = 1.0;
        q
    }

    #[test]
    fn accelerations_match_reduced_equations() {
        let (p, t) = setup();
        let oracle = Oracle::new(&p, &t).unwrap();
        for (segment, phase) in [(Segment::Double, Phase::Double), (Segment::Single, Phase::Single)] {
            let ode = assemble(&p, &t, phase).unwrap();
            for seed in 0..10 {
                let q = state(seed);
                let time = 0.1 * (1 + seed % 3) as f64;
                let a = oracle.solve(segment, &q, time).unwrap().accel;
                let b = ode.accel(&q, time);
                assert!((a - b).amax() <= 1e-10 * (1.0 + b.amax()), "{phase:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn vertical_loads_transfer_linearly() {
        let (p, t) = setup();
        let oracle = Oracle::new(&p, &t).unwrap();
        let v = oracle.vertical(Segment::Double, 0.25);
        assert!((v[3] - 0.75 * p.weight()).abs() < 1e-9);
        assert!((v[4] - 0.25 * p.weight()).abs() < 1e-9);
    }

    #[test]
    fn rejects_coarse_step() {
        let (p, t) = setup();
        let cfg = OracleConfig { step: 0.01, ..Default::default() };
        assert!(integrate(&p, &t, &Vec23::zeros(), &cfg).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let p = BodyParams::new(45.7, 12.15, 12.15, 0.89, 0.32, 0.36, 0.0, 9.81).unwrap();
        let t = StrideTiming::new(0.3, 0.56).unwrap();
        let cfg = OracleConfig { step: 1e-3, ..Default::default() };
        let end = integrate(&p, &t, &Vec23::zeros(), &cfg).unwrap();
        assert_eq!(*end.end(), Vec23::zeros());
    }
}
