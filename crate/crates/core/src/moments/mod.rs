//! Moment estimation, exact second moments, the temporal model and the intermittency verdict.

mod exact;
mod exponent;
mod mc;
mod temporal;
mod verdict;

pub use exact::{exact_second_moment, SecondMoments, SupRow};
pub use exponent::{default_window, estimate_exponent, ExponentEstimate};
pub use mc::{mc_moments, McOptions, MomentSeries, MomentTarget};
pub use temporal::{check_temporal_assumptions, temporal_report, GammaPoint, MomentCheck, TemporalOptions, TemporalReport};
pub use verdict::{intermittency_verdict, Clause, ClauseResult, Outcome, Verdict, VerdictReport};
