use charflow::config::ConfigOverrides;
use clap::Parser;
use std::path::PathBuf;

/// Energy-conservative λ-family solver in characteristic coordinates.
///
/// Exit codes: 0 success, 2 invalid configuration, 3 integration stopped,
/// 4 a diagnostic or a priori bound failed, 5 output could not be written.
#[derive(Debug, Parser)]
#[command(name = "charflow", version)]
pub struct Cli {
    /// Initial-data preset.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Nonlinearity exponent: 0 Camassa–Holm, 1 Novikov.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Half width of the physical domain [−L, L].
    #[arg(long = "L", value_name = "L")]
    pub half_width: Option<f64>,
    /// Number of characteristic labels.
    #[arg(long = "N", value_name = "N")]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Steps between diagnostic checks.
    #[arg(long)]
    pub check_every: Option<usize>,
    /// cos²(v/2) below this marks a singular label.
    #[arg(long)]
    pub epsilon_sing: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Use the O(N²) reference sums for the nonlocal fields.
    #[arg(long)]
    pub oracle: bool,
    /// Compensated summation in the O(N) sweeps.
    #[arg(long)]
    pub compensated_sum: bool,
    /// Flat JSON file of options; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Two-column CSV (x, u) for the tabulated_file scenario.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl Cli {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            scenario: self.scenario.clone(),
            lambda: self.lambda,
            half_width: self.half_width,
            n_points: self.n_points,
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            check_every: self.check_every,
            epsilon_sing: self.epsilon_sing,
            output_dir: self.output_dir.clone(),
            oracle: self.oracle.then_some(true),
            compensated_sum: self.compensated_sum.then_some(true),
            input: self.input.clone(),
        }
    }
}
