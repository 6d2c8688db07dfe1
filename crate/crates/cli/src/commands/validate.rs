use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use threelp::model::{idx, Vec23};
use threelp::oracle::{integrate_batch, OracleConfig, OracleSpan};
use threelp::transition::StrideMap;
use threelp::StrideTiming;

use super::{body, positive};
use crate::args::{Common, Preset, ValidateArgs};
use crate::manifest::Run;
use crate::CliError;

/// Largest accepted oracle discrepancy per component.
pub const TOLERANCE: f64 = 1e-6;

/// Uniform bounded state: positions within 0.5 m, velocities within 1 m/s,
/// torques within 20 N m, push forces within 50 N, side +-1.
pub fn random_state(rng: &mut impl Rng) -> Vec23 {
    let mut q = Vec23::zeros();
    for i in 0..idx::D {
        let bound = match i {
            0..=3 | 8 | 9 => 0.5,
            4..=7 => 1.0,
            18 | 19 => 50.0,
            _ => 20.0,
        };
        q[i] = rng.random_range(-bound..bound);
    }
    q[idx::D] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    q
}

fn max_error(a: &[Vec23], b: &[Vec23]) -> (f64, usize) {
    a.iter().zip(b).enumerate().fold((0.0, 0), |(m, at), (k, (x, y))| {
        let e = (x - y).amax();
        if e > m {
            (e, k)
        } else {
            (m, at)
        }
    })
}

pub fn run(common: &Common, args: &ValidateArgs) -> Result<(), CliError> {
    let body = body(common, Preset::Adult)?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let step = positive("step", args.step)?;
    let timing = StrideTiming::new(
        positive("tds", args.tds.or(body.t_ds).unwrap_or(0.3))?,
        positive("tss", args.tss.or(body.t_ss).unwrap_or(0.5))?,
    )?;
    let mut run = Run::start("validate", common.config.as_deref(), &common.out)?;
    let map = StrideMap::new(&body.params, &timing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let q0s: Vec<Vec23> = (0..args.trials).map(|_| random_state(&mut rng)).collect();

    let config = |span| OracleConfig { step, span, ..Default::default() };
    let ds_closed: Vec<Vec23> = q0s.iter().map(|q| map.h_ds_end() * q).collect();
    let ds_oracle = integrate_batch(&body.params, &timing, &q0s, &config(OracleSpan::Double))?;
    let ss_closed: Vec<Vec23> = ds_closed.iter().map(|q| map.h_ss_end() * q).collect();
    let ss_oracle = integrate_batch(&body.params, &timing, &ds_closed, &config(OracleSpan::Single))?;
    let full_closed: Vec<Vec23> = q0s.iter().map(|q| map.h() * q).collect();
    let full_oracle = integrate_batch(&body.params, &timing, &q0s, &config(OracleSpan::Stride))?;

    let (ds, ds_at) = max_error(&ds_oracle, &ds_closed);
    let (ss, ss_at) = max_error(&ss_oracle, &ss_closed);
    let (full, full_at) = max_error(&full_oracle, &full_closed);
    let pass = ds <= TOLERANCE && ss <= TOLERANCE && full <= TOLERANCE;
    let report = json!({
        "seed": args.seed,
        "trials": args.trials,
        "step": step,
        "t_ds": timing.t_ds(),
        "t_ss": timing.t_ss(),
        "tolerance": TOLERANCE,
        "max_discrepancy": {
            "double_support": { "value": ds, "trial": ds_at },
            "single_support": { "value": ss, "trial": ss_at },
            "stride": { "value": full, "trial": full_at },
        },
        "pass": pass,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    run.write("validate_report.json", &text)?;
    println!("double support: max discrepancy {ds:.3e}");
    println!("single support: max discrepancy {ss:.3e}");
    println!("full stride:    max discrepancy {full:.3e}");
    run.finish(json!({
        "body": body.describe(),
        "seed": args.seed,
        "trials": args.trials,
        "step": step,
        "t_ds": timing.t_ds(),
        "t_ss": timing.t_ss(),
    }))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(format!("oracle discrepancy above {TOLERANCE}")))
    }
}
