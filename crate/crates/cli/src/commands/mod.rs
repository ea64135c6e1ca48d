mod calibrate;
mod isolation;
mod limits;
mod simulate;
mod sweep;

pub use calibrate::calibrate;
pub use isolation::isolation;
pub use limits::limits;
pub use simulate::simulate;
pub use sweep::sweep;

use crate::output::OutDir;
use crate::scenario::Scenario;

/// Everything a subcommand needs.
pub struct Context {
    pub scenario: Scenario,
    /// `--seed` if given, else the scenario seed.
    pub seed: u64,
    pub seed_override: Option<u64>,
    pub out: OutDir,
}
