use serde_json::json;
use threelp::analysis::{
    grf_shape_error, max_lateral_velocity, sagittal_velocity_range, sample_trajectory, trajectory_csv,
};
use threelp::gaits::{cop_ramp_torque, find_relax_time, solve_gait, ScenarioSpec};
use threelp::model::idx;
use threelp::StrideTiming;

use super::{body, positive, Body};
use crate::args::{Common, GaitArgs, Preset};
use crate::manifest::Run;
use crate::CliError;

/// Default timing of the scenario examples: 0.1 s double and 0.6028 s single support.
const DEFAULT_TDS: f64 = 0.1;
const DEFAULT_TSS: f64 = 0.6028;
const PROFILE_SAMPLES: usize = 2001;

fn timing(body: &Body, args: &GaitArgs) -> Result<StrideTiming, CliError> {
    let v = args.speed;
    if let Some(policy) = args.tds_policy {
        let f = args.freq.ok_or_else(|| CliError::Usage("--tds-policy needs --freq".into()))?;
        let stride = 1.0 / positive("freq", f)?;
        return Ok(StrideTiming::from_ratio(stride, policy.ratio(v))?);
    }
    let t_ds = positive("tds", args.tds.or(body.t_ds).unwrap_or(DEFAULT_TDS))?;
    if args.relax {
        if args.freq.is_some() || args.tss.is_some() {
            return Err(CliError::Usage("--relax sets the stride time; drop --freq/--tss".into()));
        }
        let t = find_relax_time(&body.params, t_ds, (t_ds, 1.5))?;
        return Ok(StrideTiming::new(t_ds, t - t_ds)?);
    }
    if let Some(f) = args.freq {
        let stride = 1.0 / positive("freq", f)?;
        if stride <= t_ds {
            return Err(CliError::Usage(format!("step period {stride} s is not longer than T_ds = {t_ds} s")));
        }
        return Ok(StrideTiming::new(t_ds, stride - t_ds)?);
    }
    let t_ss = positive("tss", args.tss.or(body.t_ss).unwrap_or(DEFAULT_TSS))?;
    Ok(StrideTiming::new(t_ds, t_ss)?)
}

pub fn run(common: &Common, args: &GaitArgs) -> Result<(), CliError> {
    let body = body(common, Preset::Adult)?;
    if !args.speed.is_finite() || args.speed < 0.0 {
        return Err(CliError::Usage(format!("--speed must be >= 0, got {}", args.speed)));
    }
    if args.side != 1.0 && args.side != -1.0 {
        return Err(CliError::Usage(format!("--side must be 1 or -1, got {}", args.side)));
    }
    if args.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let timing = timing(&body, args)?;
    let mut run = Run::start("gait", common.config.as_deref(), &common.out)?;
    let params = json!({
        "body": body.describe(),
        "scenario": args.scenario,
        "speed": args.speed,
        "t_ds": timing.t_ds(),
        "t_ss": timing.t_ss(),
        "side": args.side,
        "samples": args.samples,
    });
    let gait = match solve_gait(&body.params, &timing, args.speed, args.scenario, args.side) {
        Ok(g) => g,
        Err(e) => {
            run.finish(params)?;
            return Err(e.into());
        }
    };

    let samples = sample_trajectory(&gait, args.samples)?;
    run.write("trajectory.csv", &trajectory_csv(&samples))?;
    run.write("gait.toml", &gait.to_toml()?)?;

    let q = &gait.q0;
    let d = &gait.diagnostics;
    let mut report = json!({
        "scenario": gait.scenario,
        "speed": gait.v_des,
        "t_ds": gait.timing.t_ds(),
        "t_ss": gait.timing.t_ss(),
        "null_residual": d.null_residual,
        "periodicity_residual": d.periodicity_error,
        "end_swing_speed": d.end_swing_speed,
        "torque_norm": d.torque_norm,
        "torques": {
            "Mhy": q[idx::MHY], "Mhx": q[idx::MHX], "May": q[idx::MAY], "Max": q[idx::MAX],
            "rMhy": q[idx::RMHY], "rMhx": q[idx::RMHX], "rMay": q[idx::RMAY], "rMax": q[idx::RMAX],
        },
        "max_lateral_com_velocity": max_lateral_velocity(&gait, PROFILE_SAMPLES)?,
        "sagittal_com_velocity_range": sagittal_velocity_range(&gait, PROFILE_SAMPLES)?,
        "grf_shape_error": grf_shape_error(&gait, 101)?,
    });
    if let ScenarioSpec::CopModulated { foot_length } = gait.scenario {
        report["cop_ramp_torque"] = json!(cop_ramp_torque(&gait.params, foot_length)?);
    }
    run.write("residuals.json", &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;

    println!(
        "{} gait at {} m/s, T_ds = {} s, T_ss = {} s",
        gait.scenario,
        gait.v_des,
        gait.timing.t_ds(),
        gait.timing.t_ss()
    );
    println!(
        "periodicity residual {:.3e}, end swing speed {:.3e} m/s, torque norm {:.6e} N m",
        d.periodicity_error, d.end_swing_speed, d.torque_norm
    );
    run.finish(params)
}
