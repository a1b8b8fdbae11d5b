//! Reference procedures: round-robin elimination (UP), the naive Hoeffding
//! procedure and Successive Halving.

mod halving;
mod naive;
mod up;

pub use halving::{successive_halving, HalvingOutcome};
pub use naive::{naive_captime, naive_run, naive_sample_count, NaiveOutcome};
pub use up::UpRun;
