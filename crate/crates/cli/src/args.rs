use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use threelp::analysis::{EconomyMetric, TdsPolicy};
use threelp::gaits::ScenarioSpec;

#[derive(Debug, Parser)]
#[command(name = "threelp", version, about = "Three-linear-pendulum walking model")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Body config (TOML keys m1 m2 m3 z1 z2 z3 w g T_ds T_ss); overrides --preset.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in body when no config is given.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Adult,
    Kid,
    /// Adult proportions at 66 kg, used for economy studies.
    Economy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the stride time of pseudo-passive walking and write the singular-value scan.
    Relax(RelaxArgs),
    /// Synthesise one periodic gait and write its trajectory, record and residuals.
    Gait(GaitArgs),
    /// Economy over a speed x step-frequency grid, with its peak line.
    Sweep(SweepArgs),
    /// Compare the closed-form maps against direct RK4 integration on random states.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    /// Double-support time [s]; defaults to the config value or 0.3.
    #[arg(long)]
    pub tds: Option<f64>,
    /// Stride-time bracket to search, `LO:HI` [s].
    #[arg(long, default_value = "0.3:1.5")]
    pub bracket: Bracket,
    /// Number of stride times in the written scan.
    #[arg(long, default_value_t = 241)]
    pub scan_points: usize,
}

#[derive(Debug, Args)]
pub struct GaitArgs {
    #[arg(long, default_value = "pseudo-passive", value_parser = ScenarioSpec::from_str)]
    pub scenario: ScenarioSpec,
    /// Desired speed [m/s].
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Step frequency [steps/s]; sets T_stride = 1/f.
    #[arg(long)]
    pub freq: Option<f64>,
    /// Double-support share when --freq is given: `fixed:R` or `human`.
    #[arg(long, value_parser = TdsPolicy::from_str)]
    pub tds_policy: Option<TdsPolicy>,
    /// Double-support time [s] when no policy is given; defaults to the config value or 0.1.
    #[arg(long)]
    pub tds: Option<f64>,
    /// Single-support time [s] without --freq; defaults to the config value or 0.6028.
    #[arg(long)]
    pub tss: Option<f64>,
    /// Use the pseudo-passive stride time for the chosen double-support time.
    #[arg(long)]
    pub relax: bool,
    /// Support side at the start of the stride (+1 or -1).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub side: f64,
    /// Trajectory samples written to the CSV.
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Speeds `START:STEP:END` [m/s].
    #[arg(long, default_value = "0.8:0.1:2.0")]
    pub speed: Range,
    /// Step frequencies `START:STEP:END` [steps/s].
    #[arg(long, default_value = "0.8:0.05:3.0")]
    pub freq: Range,
    #[arg(long, default_value = "human", value_parser = TdsPolicy::from_str)]
    pub tds_policy: TdsPolicy,
    /// Work measure behind the economy: `segment-work` or `com-range`.
    #[arg(long, default_value = "segment-work", value_parser = EconomyMetric::from_str)]
    pub metric: EconomyMetric,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// RK4 step [s].
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Double-support time [s]; defaults to the config value or 0.3.
    #[arg(long)]
    pub tds: Option<f64>,
    /// Single-support time [s]; defaults to the config value or 0.5.
    #[arg(long)]
    pub tss: Option<f64>,
}

/// Inclusive arithmetic range `START:STEP:END`, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub text: String,
    pub values: Vec<f64>,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let nums: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number in range `{s}`")))
            .collect::<Result<_, _>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(format!("range `{s}` must be finite"));
        }
        let values = match nums[..] {
            [v] => vec![v],
            [start, step, end] => {
                if !(step > 0.0) {
                    return Err(format!("range `{s}` needs a positive step"));
                }
                if end < start {
                    return Err(format!("range `{s}` is empty"));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                // values are rounded so 0.8 + 0.1 k prints as written
                (0..=n).map(|k| ((start + step * k as f64) * 1e9).round() / 1e9).collect()
            }
            _ => return Err(format!("range `{s}` must be `START:STEP:END` or a single value")),
        };
        Ok(Range { text: s.to_string(), values })
    }
}

/// Stride-time search bracket `LO:HI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket(pub f64, pub f64);

impl FromStr for Bracket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("bracket `{s}` must be `LO:HI`"))?;
        let lo: f64 = a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?;
        let hi: f64 = b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(format!("bracket `{s}` must satisfy 0 < LO < HI"));
        }
        Ok(Bracket(lo, hi))
    }
}
