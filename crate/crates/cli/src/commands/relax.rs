use serde_json::json;
use threelp::gaits::{build_periodicity, find_relax_time, singular_spectrum, Reduced};
use threelp::StrideTiming;

use super::{body, num, positive};
use crate::args::{Common, Preset, RelaxArgs};
use crate::manifest::Run;
use crate::CliError;

pub fn run(common: &Common, args: &RelaxArgs) -> Result<(), CliError> {
    let body = body(common, Preset::Adult)?;
    let t_ds = positive("tds", args.tds.or(body.t_ds).unwrap_or(0.3))?;
    if args.scan_points < 2 {
        return Err(CliError::Usage("--scan-points must be at least 2".into()));
    }
    let mut run = Run::start("relax", common.config.as_deref(), &common.out)?;
    let (lo, hi) = (args.bracket.0.max(t_ds), args.bracket.1);
    if !(hi > lo) {
        return Err(CliError::Usage(format!("bracket {}:{} leaves no stride time above T_ds = {t_ds}", lo, hi)));
    }

    // scan starts just past T_ds so the single-support phase is never empty
    let first = lo + (hi - lo) * 1e-3;
    let mut csv = String::from("t_stride,sigma1,sigma2,sigma3,sigma4,sigma5,sigma6,sigma7,passive_gap\n");
    for k in 0..args.scan_points {
        let t = first + (hi - first) * k as f64 / (args.scan_points - 1) as f64;
        let s = singular_spectrum(&build_periodicity(&body.params, &StrideTiming::new(t_ds, t - t_ds)?)?, Reduced::Passive);
        let cells: Vec<String> = s.iter().map(|&v| num(v)).collect();
        csv.push_str(&format!("{},{},{}\n", num(t), cells.join(","), num(s[s.len() - 2] / s[0])));
    }
    run.write("relax_scan.csv", &csv)?;

    let params = json!({
        "body": body.describe(),
        "t_ds": t_ds,
        "bracket": [args.bracket.0, args.bracket.1],
        "scan_points": args.scan_points,
    });
    let t_relax = match find_relax_time(&body.params, t_ds, (first, hi)) {
        Ok(t) => t,
        Err(e) => {
            run.finish(params)?;
            return Err(e.into());
        }
    };
    let timing = StrideTiming::new(t_ds, t_relax - t_ds)?;
    let s = singular_spectrum(&build_periodicity(&body.params, &timing)?, Reduced::Passive);
    let n = s.len();
    println!("T_relax = {t_relax:.7} s (T_ds = {t_ds} s, T_ss = {:.7} s)", t_relax - t_ds);
    println!(
        "passive singular values at T_relax, relative to the largest: smallest {:.3e}, second {:.3e}, third {:.3e}",
        s[n - 1] / s[0],
        s[n - 2] / s[0],
        s[n - 3] / s[0]
    );
    let report = json!({
        "t_relax": t_relax,
        "t_ds": t_ds,
        "t_ss": t_relax - t_ds,
        "singular_values": s,
    });
    run.write("relax.json", &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    run.finish(params)
}
