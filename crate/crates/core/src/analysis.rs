//! Trajectories, reconstructed forces and walking economy of periodic gaits.

use std::fmt::Write as _;

use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble, solve_forces, ForceSolution, Phase, PhaseOde};
use crate::error::{Error, Result};
use crate::gaits::{solve_gait, GaitSolution, ScenarioSpec};
use crate::model::{com_rows, geometry, idx, BodyParams, BodySize, StrideTiming, Vec23};

type Gen10 = SMatrix<f64, 10, 10>;
type Flow10 = SVector<f64, 10>;

/// Motion of one phase for fixed forcing, over `[X; Xdot; 1; t]`.
#[derive(Debug, Clone)]
struct PhaseFlow {
    phase: Phase,
    generator: Gen10,
    start: Flow10,
    forcing: Vec23,
}

impl PhaseFlow {
    fn new(ode: &PhaseOde, q_start: &Vec23) -> Self {
        let mut gen = Gen10::zeros();
        for i in 0..4 {
            if !ode.phase.is_constant(i) {
                gen[(i, 4 + i)] = 1.0;
            }
        }
        let a = ode.a();
        let mut forcing = *q_start;
        for i in 0..8 {
            forcing[i] = 0.0;
        }
        let c0 = ode.k0() * forcing;
        // the slope map only touches entries that stay constant in the phase
        let c1 = ode.k1() * q_start;
        for r in 0..4 {
            for c in 0..4 {
                gen[(4 + r, c)] = a[(r, c)];
            }
            gen[(4 + r, 8)] = c0[r];
            gen[(4 + r, 9)] = c1[r];
        }
        gen[(9, 8)] = 1.0;
        let mut start = Flow10::zeros();
        for i in 0..8 {
            start[i] = q_start[i];
        }
        start[8] = 1.0;
        Self { phase: ode.phase, generator: gen, start, forcing }
    }

    fn state(&self, t: f64) -> Vec23 {
        let y = (self.generator * t).exp() * self.start;
        let mut q = self.forcing;
        for i in 0..8 {
            q[i] = y[i];
        }
        q
    }
}

/// Cheap evaluation of a gait's augmented state at any stride time.
#[derive(Debug, Clone)]
pub struct GaitTrajectory {
    params: BodyParams,
    timing: StrideTiming,
    double: PhaseFlow,
    single: PhaseFlow,
}

impl GaitTrajectory {
    pub fn new(params: &BodyParams, timing: &StrideTiming, q0: &Vec23) -> Result<Self> {
        let double = PhaseFlow::new(&assemble(params, timing, Phase::Double)?, q0);
        let q_mid = double.state(timing.t_ds());
        let single = PhaseFlow::new(&assemble(params, timing, Phase::Single)?, &q_mid);
        Ok(Self { params: *params, timing: *timing, double, single })
    }

    pub fn of(gait: &GaitSolution) -> Result<Self> {
        Self::new(&gait.params, &gait.timing, &gait.q0)
    }

    /// Phase, local time and state at stride time `t`; `T_ds` counts as double support.
    pub fn state(&self, t: f64) -> Result<(Phase, f64, Vec23)> {
        let total = self.timing.stride();
        if !(0.0..=total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, duration: total });
        }
        if t <= self.timing.t_ds() {
            Ok((Phase::Double, t, self.double.state(t)))
        } else {
            let local = t - self.timing.t_ds();
            Ok((Phase::Single, local, self.single.state(local)))
        }
    }

    pub fn com_velocity(&self, t: f64) -> Result<Vector2<f64>> {
        let (phase, _, q) = self.state(t)?;
        let rows = com_rows(&self.params, phase == Phase::Single).velocity;
        Ok(Vector2::new(rows[0].dot(&q), rows[1].dot(&q)))
    }

    pub fn kinetic_energy(&self, t: f64) -> Result<f64> {
        Ok(0.5 * self.params.total_mass() * self.com_velocity(t)?.norm_squared())
    }

    /// Horizontal kinetic energy of the three masses, each at its own velocity.
    pub fn segment_kinetic_energy(&self, t: f64) -> Result<f64> {
        let (phase, _, q) = self.state(t)?;
        let p = &self.params;
        let k = p.leg_ratio();
        let pelvis = Vector2::new(q[idx::V1X], q[idx::V1Y]);
        let swing = match phase {
            Phase::Single => Vector2::new(q[idx::V2X], q[idx::V2Y]),
            Phase::Double => Vector2::zeros(),
        };
        let y2 = pelvis * (1.0 - k) + swing * k;
        let y3 = pelvis * (1.0 - k);
        Ok(0.5 * (p.m1() * pelvis.norm_squared() + p.m2() * y2.norm_squared() + p.m3() * y3.norm_squared()))
    }

    pub fn timing(&self) -> &StrideTiming {
        &self.timing
    }
    pub fn params(&self) -> &BodyParams {
        &self.params
    }
    pub(crate) fn flow_phase(&self, phase: Phase) -> Phase {
        match phase {
            Phase::Double => self.double.phase,
            Phase::Single => self.single.phase,
        }
    }
}

/// Everything known about a gait at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub phase: Phase,
    pub q: Vec23,
    /// Actual swing-foot velocity (zero while planted).
    pub swing_velocity: Vector2<f64>,
    pub foot2: Vector3<f64>,
    pub foot3: Vector3<f64>,
    pub y1: Vector3<f64>,
    pub y2: Vector3<f64>,
    pub y3: Vector3<f64>,
    pub forces: ForceSolution,
    pub com: Vector2<f64>,
    pub com_velocity: Vector2<f64>,
    pub kinetic_energy: f64,
}

impl TrajectorySample {
    pub const CSV_HEADER: &'static str =
        "t,X2x,X2y,X1x,X1y,vX2x,vX2y,vX1x,vX1y,comx,comy,comvx,comvy,grf3z,grf2z,tau2y,tau2x,M3y,M3x,tau1y,tau1x";

    pub fn csv_row(&self) -> String {
        let q = &self.q;
        let f = &self.forces;
        let values = [
            self.t,
            q[idx::X2X],
            q[idx::X2Y],
            q[idx::X1X],
            q[idx::X1Y],
            self.swing_velocity.x,
            self.swing_velocity.y,
            q[idx::V1X],
            q[idx::V1Y],
            self.com.x,
            self.com.y,
            self.com_velocity.x,
            self.com_velocity.y,
            f.big_f3.z,
            f.big_f2.z,
            f.tau2.y,
            f.tau2.x,
            f.m3.y,
            f.m3.x,
            f.tau1.y,
            f.tau1.x,
        ];
        values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

fn sample_at(traj: &GaitTrajectory, t: f64) -> Result<TrajectorySample> {
    let params = traj.params();
    let (phase, local, q) = traj.state(t)?;
    let phase = traj.flow_phase(phase);
    let forces = solve_forces(params, traj.timing(), phase, &q, local)?;
    let moving = phase == Phase::Single;
    let swing_velocity = if moving { Vector2::new(q[idx::V2X], q[idx::V2Y]) } else { Vector2::zeros() };
    let pelvis = Vector3::new(q[idx::X1X], q[idx::X1Y], params.z1());
    let foot2 = Vector3::new(q[idx::X2X], q[idx::X2Y], 0.0);
    let foot3 = Vector3::new(q[idx::PX], q[idx::PY], 0.0);
    let geo = geometry(params, &pelvis, &foot2, &foot3, q[idx::D]);
    let rows = com_rows(params, moving);
    let com = Vector2::new(rows.position[0].dot(&q), rows.position[1].dot(&q));
    let com_velocity = Vector2::new(rows.velocity[0].dot(&q), rows.velocity[1].dot(&q));
    Ok(TrajectorySample {
        t,
        phase,
        q,
        swing_velocity,
        foot2,
        foot3,
        y1: geo.y1,
        y2: geo.y2,
        y3: geo.y3,
        forces,
        com,
        com_velocity,
        kinetic_energy: 0.5 * params.total_mass() * com_velocity.norm_squared(),
    })
}

/// `n` uniform samples over the stride plus the end of double support.
pub fn sample_trajectory(gait: &GaitSolution, n: usize) -> Result<Vec<TrajectorySample>> {
    if n < 2 {
        return Err(Error::InvalidParam { name: "samples", reason: format!("{n} < 2") });
    }
    let traj = GaitTrajectory::of(gait)?;
    let total = gait.timing.stride();
    let mut times: Vec<f64> = (0..n).map(|j| total * j as f64 / (n - 1) as f64).collect();
    times[n - 1] = total;
    if !times.contains(&gait.timing.t_ds()) {
        times.push(gait.timing.t_ds());
        times.sort_by(f64::total_cmp);
    }
    times.iter().map(|&t| sample_at(&traj, t)).collect()
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::with_capacity(samples.len() * 400);
    out.push_str(TrajectorySample::CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

/// Largest deviation of the vertical ground reactions from the trapezoid,
/// relative to body weight: in single support the stance foot carries the
/// weight alone; in double support both loads are affine in time (checked by
/// second differences over uniform samples) and sum to the weight.
pub fn grf_shape_error(gait: &GaitSolution, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParam { name: "samples", reason: format!("{n} < 3") });
    }
    let traj = GaitTrajectory::of(gait)?;
    let weight = gait.params.weight();
    let load = |t: f64| -> Result<(Phase, [f64; 2])> {
        let (phase, local, q) = traj.state(t)?;
        let f = solve_forces(&gait.params, &gait.timing, phase, &q, local)?;
        Ok((phase, [f.big_f2.z, f.big_f3.z]))
    };
    let mut worst = 0.0f64;
    let (t_ds, t_ss) = (gait.timing.t_ds(), gait.timing.t_ss());
    let ds: Vec<[f64; 2]> =
        (0..n).map(|j| load(t_ds * j as f64 / (n - 1) as f64).map(|x| x.1)).collect::<Result<_>>()?;
    for w in ds.windows(3) {
        for leg in 0..2 {
            worst = worst.max((w[0][leg] - 2.0 * w[1][leg] + w[2][leg]).abs() / weight);
        }
    }
    for l in &ds {
        worst = worst.max((l[0] + l[1] - weight).abs() / weight);
    }
    for j in 1..n {
        let (phase, l) = load(t_ds + t_ss * j as f64 / (n - 1) as f64)?;
        debug_assert_eq!(phase, Phase::Single);
        worst = worst.max((l[1] - weight).abs() / weight).max(l[0].abs() / weight);
    }
    Ok(worst)
}

/// Points used to bracket kinetic-energy extrema before refinement.
pub const KE_SCAN_POINTS: usize = 1000;

fn golden(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Endpoints and every local extremum of `energy` over the stride, in time
/// order; extrema are bracketed on a uniform scan and refined to 1e-10 s.
fn energy_extrema(total: f64, energy: &impl Fn(f64) -> Result<f64>, n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidParam { name: "scan_points", reason: format!("{n} < 3") });
    }
    let ts: Vec<f64> = (0..n).map(|j| total * j as f64 / (n - 1) as f64).collect();
    let ke: Vec<f64> = ts.iter().map(|&t| energy(t)).collect::<Result<_>>()?;
    let mut out = vec![ke[0]];
    for j in 1..n - 1 {
        let (a, b) = (ts[j - 1], ts[j + 1]);
        if ke[j] <= ke[j - 1] && ke[j] < ke[j + 1] {
            let (_, lo) = golden(energy, a, b, 1e-10)?;
            out.push(lo.min(ke[j]));
        } else if ke[j] >= ke[j - 1] && ke[j] > ke[j + 1] {
            let (_, neg) = golden(&|t| energy(t).map(|e| -e), a, b, 1e-10)?;
            out.push((-neg).max(ke[j]));
        }
    }
    out.push(ke[n - 1]);
    Ok(out)
}

/// Smallest and largest CoM kinetic energy over the stride.
pub fn kinetic_energy_range(traj: &GaitTrajectory) -> Result<(f64, f64)> {
    kinetic_energy_range_sampled(traj, KE_SCAN_POINTS)
}

/// [`kinetic_energy_range`] with `n` bracketing samples.
pub fn kinetic_energy_range_sampled(traj: &GaitTrajectory, n: usize) -> Result<(f64, f64)> {
    let e = energy_extrema(traj.timing().stride(), &|t| traj.kinetic_energy(t), n)?;
    Ok(e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

/// Total rise of the kinetic energy of the three masses over the stride,
/// i.e. the time integral of the positive part of its rate of change.
pub fn segment_positive_work(traj: &GaitTrajectory) -> Result<f64> {
    let e = energy_extrema(traj.timing().stride(), &|t| traj.segment_kinetic_energy(t), KE_SCAN_POINTS)?;
    Ok(e.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum())
}

fn distance_mass(gait: &GaitSolution) -> Result<f64> {
    if gait.v_des == 0.0 {
        return Err(Error::Undefined("work per distance needs a non-zero speed".into()));
    }
    Ok(gait.params.total_mass() * gait.v_des.abs() * gait.timing.stride())
}

/// Positive CoM work per unit mass and distance, `(KE_max - KE_min) / (m v T)`.
pub fn com_work_per_distance(gait: &GaitSolution) -> Result<f64> {
    let scale = distance_mass(gait)?;
    let (lo, hi) = kinetic_energy_range(&GaitTrajectory::of(gait)?)?;
    Ok((hi - lo) / scale)
}

/// Net positive work on the three masses per unit mass and distance.
pub fn segment_work_per_distance(gait: &GaitSolution) -> Result<f64> {
    let scale = distance_mass(gait)?;
    Ok(segment_positive_work(&GaitTrajectory::of(gait)?)? / scale)
}

/// Inverse of [`com_work_per_distance`].
pub fn economy(gait: &GaitSolution) -> Result<f64> {
    Ok(1.0 / com_work_per_distance(gait)?)
}

/// Which mechanical work an economy value is the inverse of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EconomyMetric {
    /// Swing of the whole-body CoM kinetic energy, see [`com_work_per_distance`].
    ComRange,
    /// Positive work on the torso and both legs, see [`segment_work_per_distance`].
    #[default]
    SegmentWork,
}

impl EconomyMetric {
    pub fn name(&self) -> &'static str {
        match self {
            EconomyMetric::ComRange => "com-range",
            EconomyMetric::SegmentWork => "segment-work",
        }
    }

    pub fn work_per_distance(&self, gait: &GaitSolution) -> Result<f64> {
        match self {
            EconomyMetric::ComRange => com_work_per_distance(gait),
            EconomyMetric::SegmentWork => segment_work_per_distance(gait),
        }
    }
}

impl std::str::FromStr for EconomyMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "com-range" => Ok(EconomyMetric::ComRange),
            "segment-work" => Ok(EconomyMetric::SegmentWork),
            other => Err(Error::Config(format!("economy metric `{other}` (expected `com-range` or `segment-work`)"))),
        }
    }
}

/// Peak-to-peak forward CoM velocity over the stride, sampled at `n` points.
pub fn sagittal_velocity_range(gait: &GaitSolution, n: usize) -> Result<f64> {
    velocity_range(gait, n, 0)
}

/// Largest lateral CoM speed over the stride, sampled at `n` points.
pub fn max_lateral_velocity(gait: &GaitSolution, n: usize) -> Result<f64> {
    let traj = GaitTrajectory::of(gait)?;
    let total = gait.timing.stride();
    (0..n).try_fold(0.0f64, |m, j| Ok(m.max(traj.com_velocity(total * j as f64 / (n - 1) as f64)?.y.abs())))
}

fn velocity_range(gait: &GaitSolution, n: usize, axis: usize) -> Result<f64> {
    let traj = GaitTrajectory::of(gait)?;
    let total = gait.timing.stride();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..n {
        let v = traj.com_velocity(total * j as f64 / (n - 1) as f64)?[axis];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

/// Double-support share of the stride observed in human walking at speed `v`.
pub fn human_ds_ratio(v: f64) -> f64 {
    0.12 + (2.5 - v) * 0.09
}

/// How the double-support time of each grid cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TdsPolicy {
    FixedRatio(f64),
    HumanLaw,
}

impl TdsPolicy {
    pub fn ratio(&self, v: f64) -> f64 {
        match *self {
            TdsPolicy::FixedRatio(r) => r,
            TdsPolicy::HumanLaw => human_ds_ratio(v),
        }
    }
}

impl std::str::FromStr for TdsPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "human" {
            return Ok(TdsPolicy::HumanLaw);
        }
        let r = s
            .strip_prefix("fixed:")
            .and_then(|r| r.parse::<f64>().ok())
            .filter(|r| *r > 0.0 && *r < 1.0)
            .ok_or_else(|| Error::Config(format!("double-support policy `{s}` (expected `human` or `fixed:R`, 0 < R < 1)")))?;
        Ok(TdsPolicy::FixedRatio(r))
    }
}

/// The body used for economy studies: adult proportions at 66 kg.
pub fn economy_body() -> BodyParams {
    BodyParams::preset(BodySize::Adult)
        .with_total_mass(66.0)
        .expect("scaling a valid preset")
}

/// Economy over a speed x step-frequency grid (`T_stride = 1 / frequency`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyGrid {
    pub speeds: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub policy: TdsPolicy,
    pub metric: EconomyMetric,
    /// `ratios[i][j]`: double-support share for speed `i`, frequency `j`.
    pub ratios: Vec<Vec<f64>>,
    /// `None` marks cells where no gait could be solved.
    pub economy: Vec<Vec<Option<f64>>>,
}

fn cell_economy(params: &BodyParams, v: f64, f: f64, ratio: f64, metric: EconomyMetric) -> Result<f64> {
    let timing = StrideTiming::from_ratio(1.0 / f, ratio)?;
    let gait = solve_gait(params, &timing, v, ScenarioSpec::PseudoPassive, 1.0)?;
    let e = 1.0 / metric.work_per_distance(&gait)?;
    if e.is_finite() && e > 0.0 {
        Ok(e)
    } else {
        Err(Error::Undefined(format!("economy {e} at v = {v}, f = {f}")))
    }
}

pub fn economy_surface(
    params: &BodyParams,
    speeds: &[f64],
    frequencies: &[f64],
    policy: TdsPolicy,
    metric: EconomyMetric,
) -> Result<EconomyGrid> {
    if speeds.is_empty() || frequencies.is_empty() {
        return Err(Error::Config("economy grid needs at least one speed and one frequency".into()));
    }
    if frequencies.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Config("frequencies must be positive".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..speeds.len()).flat_map(|i| (0..frequencies.len()).map(move |j| (i, j))).collect();
    let values: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(i, j)| cell_economy(params, speeds[i], frequencies[j], policy.ratio(speeds[i]), metric).ok())
        .collect();
    let nf = frequencies.len();
    Ok(EconomyGrid {
        speeds: speeds.to_vec(),
        frequencies: frequencies.to_vec(),
        policy,
        metric,
        ratios: speeds.iter().map(|&v| vec![policy.ratio(v); nf]).collect(),
        economy: values.chunks(nf).map(|row| row.to_vec()).collect(),
    })
}

impl EconomyGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("speed,frequency,tds_ratio,economy,feasible\n");
        for (i, v) in self.speeds.iter().enumerate() {
            for (j, f) in self.frequencies.iter().enumerate() {
                let (e, ok) = match self.economy[i][j] {
                    Some(e) => (e, true),
                    None => (f64::NAN, false),
                };
                let _ = writeln!(out, "{v:.16e},{f:.16e},{:.16e},{e:.16e},{ok}", self.ratios[i][j]);
            }
        }
        out
    }
}

/// Most economical frequency at one speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPoint {
    pub speed: f64,
    pub frequency: f64,
    pub economy: f64,
    /// The discrete maximum sits on the first or last grid frequency.
    pub boundary: bool,
}

/// Per-speed argmax over frequency, refined by a parabola through the three
/// cells around the discrete maximum.
pub fn peak_line(grid: &EconomyGrid) -> Result<Vec<PeakPoint>> {
    let f = &grid.frequencies;
    grid.speeds
        .iter()
        .zip(&grid.economy)
        .map(|(&speed, row)| {
            let (j, e) = row
                .iter()
                .enumerate()
                .filter_map(|(j, e)| e.map(|e| (j, e)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::Undefined(format!("no feasible cell at speed {speed}")))?;
            let boundary = j == 0 || j + 1 == f.len();
            if boundary {
                return Ok(PeakPoint { speed, frequency: f[j], economy: e, boundary });
            }
            let (Some(e0), Some(e2)) = (row[j - 1], row[j + 1]) else {
                return Ok(PeakPoint { speed, frequency: f[j], economy: e, boundary });
            };
            let (x0, x1, x2) = (f[j - 1], f[j], f[j + 1]);
            // vertex of the parabola through the three points
            let num = (x1 - x0).powi(2) * (e - e2) - (x1 - x2).powi(2) * (e - e0);
            let den = (x1 - x0) * (e - e2) - (x1 - x2) * (e - e0);
            let (frequency, economy) = if den != 0.0 {
                let xv = (x1 - 0.5 * num / den).clamp(x0, x2);
                let l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
                let l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
                let l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
                (xv, e0 * l0 + e * l1 + e2 * l2)
            } else {
                (x1, e)
            };
            Ok(PeakPoint { speed, frequency, economy, boundary })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::StrideMap;

    fn gait() -> GaitSolution {
        let p = BodyParams::preset(BodySize::Adult);
        let t = StrideTiming::new(0.1, 0.6028).unwrap();
        solve_gait(&p, &t, 1.0, ScenarioSpec::PseudoPassive, 1.0).unwrap()
    }

    #[test]
    fn flow_matches_stride_map() {
        let g = gait();
        let traj = GaitTrajectory::of(&g).unwrap();
        let map = StrideMap::cached(&g.params, &g.timing).unwrap();
        for t in [0.0, 0.05, 0.1, 0.3, 0.7028] {
            let a = traj.state(t).unwrap().2;
            let b = map.at(t).unwrap() * g.q0;
            assert!((a - b).amax() < 1e-10, "t {t}: {}", (a - b).amax());
        }
    }

    #[test]
    fn human_ratio_law() {
        assert_eq!(human_ds_ratio(0.8), 0.273);
        assert_eq!(human_ds_ratio(2.5), 0.12);
    }

    #[test]
    fn samples_include_phase_boundary() {
        let g = gait();
        let s = sample_trajectory(&g, 11).unwrap();
        assert!(s.iter().any(|x| x.t == g.timing.t_ds()));
        assert!(s.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(s[0].swing_velocity, Vector2::zeros());
    }

    #[test]
    fn csv_header_and_width() {
        let g = gait();
        let s = sample_trajectory(&g, 3).unwrap();
        let csv = trajectory_csv(&s);
        let cols = TrajectorySample::CSV_HEADER.split(',').count();
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn boundary_peak_is_flagged() {
        let grid = EconomyGrid {
            speeds: vec![1.0],
            frequencies: vec![1.0, 1.5, 2.0],
            policy: TdsPolicy::FixedRatio(0.1),
            metric: EconomyMetric::SegmentWork,
            ratios: vec![vec![0.1; 3]],
            economy: vec![vec![Some(1.0), Some(2.0), Some(3.0)]],
        };
        let p = peak_line(&grid).unwrap();
        assert!(p[0].boundary);
        assert_eq!(p[0].frequency, 2.0);
    }

    #[test]
    fn parabolic_peak_is_exact_for_parabola() {
        let f = vec![1.0, 1.5, 2.0, 2.5];
        let e: Vec<Option<f64>> = f.iter().map(|x| Some(5.0 - (x - 1.7f64).powi(2))).collect();
        let grid = EconomyGrid {
            speeds: vec![1.0],
            frequencies: f,
            policy: TdsPolicy::FixedRatio(0.1),
            metric: EconomyMetric::SegmentWork,
            ratios: vec![vec![0.1; 4]],
            economy: vec![e],
        };
        let p = peak_line(&grid).unwrap();
        assert!(!p[0].boundary);
        assert!((p[0].frequency - 1.7).abs() < 1e-12);
    }

    #[test]
    fn all_infeasible_row_is_an_error() {
        let grid = EconomyGrid {
            speeds: vec![1.0],
            frequencies: vec![1.0],
            policy: TdsPolicy::HumanLaw,
            metric: EconomyMetric::SegmentWork,
            ratios: vec![vec![0.2]],
            economy: vec![vec![None]],
        };
        assert!(peak_line(&grid).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("human".parse::<TdsPolicy>().unwrap(), TdsPolicy::HumanLaw);
        assert_eq!("fixed:0.1".parse::<TdsPolicy>().unwrap(), TdsPolicy::FixedRatio(0.1));
        assert!("fixed:1.5".parse::<TdsPolicy>().is_err());
    }
}
