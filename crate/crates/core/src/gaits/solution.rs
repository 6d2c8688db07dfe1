//! Periodic gaits as least-torque points of the null space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::periodicity::{build_periodicity, foot_exchange, lift, mirror_signs, null_basis, relative_vectors, Reduced};
use super::qp::{solve_equality_qp, ConstraintBlock};
use super::scenario::{cop_ramp_torque, ScenarioSpec};
use crate::dynamics::Phase;
use crate::error::{Error, Result};
use crate::model::{com_rows, idx, BodyParams, StrideTiming, Vec23, STATE_DIM};
use crate::selection::{s_d, s_ma, s_rma, s_u, s_x2x, s_xdot2, s_xp, Selector};
use crate::transition::StrideMap;

/// Dimension of the null space of the torque-augmented periodicity system.
pub const GAIT_MANIFOLD_DIM: usize = 7;

/// A synthesised periodic gait.
#[derive(Debug, Clone)]
pub struct GaitSolution {
    pub scenario: ScenarioSpec,
    /// Body the gait was solved with (differs from the input for LIP-like).
    pub params: BodyParams,
    pub timing: StrideTiming,
    pub v_des: f64,
    /// Support side `d` at the start of the stride.
    pub side: f64,
    pub alpha: DVector<f64>,
    /// Null-space basis over the 15 reduced columns.
    pub basis: DMatrix<f64>,
    pub q0: Vec23,
    pub diagnostics: GaitDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitDiagnostics {
    /// `|R0 v|_max` of the reduced solution.
    pub null_residual: f64,
    /// Largest mismatch of the mirrored relative vectors after one stride.
    pub periodicity_error: f64,
    /// Swing-foot speed at the end of the stride.
    pub end_swing_speed: f64,
    /// Euclidean norm of the eight torque entries.
    pub torque_norm: f64,
}

fn rows_through(sel: &Selector, lifted: &DMatrix<f64>) -> DMatrix<f64> {
    sel.matrix() * lifted
}

/// Columns of `basis` (15 x k) zero-filled to the 23-entry layout.
pub fn lift_basis(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(STATE_DIM, basis.ncols());
    for c in 0..basis.ncols() {
        out.set_column(c, &lift(Reduced::WithTorques, &basis.column(c).into_owned()));
    }
    out
}

/// Lateral CoM velocity rows at `samples` uniform instants of the stride, through `lifted`.
fn lateral_com_velocity_rows(
    params: &BodyParams,
    map: &StrideMap,
    lifted: &DMatrix<f64>,
    samples: usize,
) -> Result<DMatrix<f64>> {
    let total = map.timing().stride();
    let mut rows = DMatrix::zeros(samples, lifted.ncols());
    for j in 0..samples {
        let t = total * j as f64 / (samples - 1) as f64;
        let (phase, _) = map.locate(t)?;
        let row = com_rows(params, phase == Phase::Single).velocity[1];
        let h = map.at(t)?;
        let through = row.transpose() * h;
        let through = DMatrix::from_row_slice(1, STATE_DIM, through.as_slice());
        rows.row_mut(j).copy_from(&(through * lifted));
    }
    Ok(rows)
}

/// Solves one periodic gait.
///
/// `timing` and `params` are the nominal ones; the scenario may alter them
/// before solving (see [`ScenarioSpec::prepare`]).
pub fn solve_gait(
    params: &BodyParams,
    timing: &StrideTiming,
    v_des: f64,
    scenario: ScenarioSpec,
    side: f64,
) -> Result<GaitSolution> {
    if side != 1.0 && side != -1.0 {
        return Err(Error::InvalidParam { name: "side", reason: format!("{side} must be +1 or -1") });
    }
    if !v_des.is_finite() {
        return Err(Error::InvalidParam { name: "v_des", reason: "not finite".into() });
    }
    let (params, timing) = scenario.prepare(params, timing)?;
    let system = build_periodicity(&params, &timing)?;
    let basis = null_basis(&system, Reduced::WithTorques, Some(GAIT_MANIFOLD_DIM))?;
    let lifted = lift_basis(&basis);
    let map = StrideMap::cached(&params, &timing)?;

    let mut blocks = vec![
        ConstraintBlock::new("support side", rows_through(&s_d(), &lifted), DVector::from_vec(vec![side])),
        ConstraintBlock::new(
            "step length",
            rows_through(&s_x2x(), &lifted),
            DVector::from_vec(vec![-v_des * timing.stride()]),
        ),
    ];
    if scenario.ankles_off() {
        blocks.push(ConstraintBlock::new("ankle torques", rows_through(&s_ma(), &lifted), DVector::zeros(2)));
        blocks.push(ConstraintBlock::new("ankle ramps", rows_through(&s_rma(), &lifted), DVector::zeros(2)));
    }
    if let ScenarioSpec::CopModulated { foot_length } = scenario {
        let tau = cop_ramp_torque(&params, foot_length)?;
        blocks.push(ConstraintBlock::new("ankle torques", rows_through(&s_ma(), &lifted), DVector::zeros(2)));
        // s_rma = [rMay, rMax]
        blocks.push(ConstraintBlock::new(
            "ankle ramps",
            rows_through(&s_rma(), &lifted),
            DVector::from_vec(vec![cop_sagittal_ramp(tau), 0.0]),
        ));
    }

    let objective = match scenario {
        ScenarioSpec::StageWalk { samples } => {
            if samples < 2 {
                return Err(Error::InvalidParam { name: "samples", reason: "need at least 2".into() });
            }
            lateral_com_velocity_rows(&params, &map, &lifted, samples)?
        }
        _ => rows_through(&s_u(), &lifted),
    };

    let alpha = solve_equality_qp(&objective, &blocks)?;
    let reduced = &basis * &alpha;
    let q0 = lift(Reduced::WithTorques, &reduced);
    let diagnostics = GaitDiagnostics {
        null_residual: (&system.r0 * &reduced).amax(),
        periodicity_error: periodicity_error(&map, &q0),
        end_swing_speed: end_swing_speed(&map, &q0),
        torque_norm: (s_u().matrix() * DVector::from_column_slice(q0.as_slice())).norm(),
    };
    Ok(GaitSolution { scenario, params, timing, v_des, side, alpha, basis, q0, diagnostics })
}

/// Sign of the ankle ramp that moves the centre of pressure forward.
///
/// The ground moment about the ankle of a vertical load `F_z` acting a
/// distance `x` ahead is `-x F_z` about `y`.
pub fn cop_sagittal_ramp(tau: f64) -> f64 {
    -tau
}

/// Largest mismatch between the relative vectors at the start of the stride
/// and the mirrored ones at its end.
pub fn periodicity_error(map: &StrideMap, q0: &Vec23) -> f64 {
    let q_end = map.h() * q0;
    let sxp = s_xp();
    let pick = |q: &Vec23| nalgebra::SVector::<f64, 8>::from_iterator(sxp.indices().iter().map(|&i| q[i]));
    let before = relative_vectors() * pick(q0);
    let after = mirror_signs() * relative_vectors() * foot_exchange() * pick(&q_end);
    (after - before).amax()
}

pub fn end_swing_speed(map: &StrideMap, q0: &Vec23) -> f64 {
    let q_end = map.h() * q0;
    s_xdot2().indices().iter().map(|&i| q_end[i] * q_end[i]).sum::<f64>().sqrt()
}

/// Text record of a gait solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitRecord {
    pub scenario: ScenarioSpec,
    pub v_des: f64,
    pub side: f64,
    pub t_ds: f64,
    pub t_ss: f64,
    pub params: BodyParams,
    pub alpha: Vec<f64>,
    pub layout: Vec<String>,
    pub q0: Vec<f64>,
    pub diagnostics: GaitDiagnostics,
}

impl GaitSolution {
    pub fn stride_map(&self) -> Result<std::sync::Arc<StrideMap>> {
        StrideMap::cached(&self.params, &self.timing)
    }

    /// Augmented state at stride time `t`.
    pub fn state_at(&self, t: f64) -> Result<Vec23> {
        Ok(self.stride_map()?.at(t)? * self.q0)
    }

    pub fn record(&self) -> GaitRecord {
        GaitRecord {
            scenario: self.scenario,
            v_des: self.v_des,
            side: self.side,
            t_ds: self.timing.t_ds(),
            t_ss: self.timing.t_ss(),
            params: self.params,
            alpha: self.alpha.iter().copied().collect(),
            layout: idx::NAMES.iter().map(|s| s.to_string()).collect(),
            q0: self.q0.iter().copied().collect(),
            diagnostics: self.diagnostics,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(&self.record()).map_err(|e| Error::Config(e.to_string()))
    }
}
