use serde_json::json;
use threelp::analysis::{economy_surface, peak_line};

use super::{body, num};
use crate::args::{Common, Preset, SweepArgs};
use crate::manifest::Run;
use crate::CliError;

/// Share of feasible cells below which the sweep counts as failed.
pub const MIN_FEASIBLE: f64 = 0.9;

pub fn run(common: &Common, args: &SweepArgs) -> Result<(), CliError> {
    let body = body(common, Preset::Economy)?;
    let (speeds, freqs) = (&args.speed.values, &args.freq.values);
    if speeds.iter().any(|v| *v <= 0.0) {
        return Err(CliError::Usage("--speed values must be positive".into()));
    }
    if freqs.iter().any(|f| *f <= 0.0) {
        return Err(CliError::Usage("--freq values must be positive".into()));
    }
    let mut run = Run::start("sweep", common.config.as_deref(), &common.out)?;
    let grid = economy_surface(&body.params, speeds, freqs, args.tds_policy, args.metric)?;
    run.write("economy.csv", &grid.to_csv())?;

    let cells = speeds.len() * freqs.len();
    let feasible = grid.economy.iter().flatten().filter(|e| e.is_some()).count();
    let mut csv = String::from("speed,frequency,economy,boundary\n");
    let peaks = peak_line(&grid);
    if let Ok(peaks) = &peaks {
        for p in peaks {
            csv.push_str(&format!("{},{},{},{}\n", num(p.speed), num(p.frequency), num(p.economy), p.boundary));
            println!(
                "v = {:.3} m/s: peak {:.4} steps/s{}",
                p.speed,
                p.frequency,
                if p.boundary { " (grid edge)" } else { "" }
            );
        }
    }
    run.write("peak_line.csv", &csv)?;
    println!("{feasible}/{cells} cells feasible");
    run.finish(json!({
        "body": body.describe(),
        "speeds": args.speed.text,
        "frequencies": args.freq.text,
        "tds_policy": args.tds_policy,
        "metric": args.metric,
    }))?;
    peaks?;
    if (feasible as f64) < MIN_FEASIBLE * cells as f64 {
        return Err(CliError::Failed(format!("only {feasible} of {cells} cells feasible")));
    }
    Ok(())
}
