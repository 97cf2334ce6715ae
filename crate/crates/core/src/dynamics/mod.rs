//! The particle dynamics: event-driven simulation on large graphs and the
//! exact generator on tiny ones.

mod configuration;
pub mod exact;
mod fenwick;
pub mod gillespie;
mod replicas;

pub use configuration::{Configuration, SimClock};
pub use exact::{build_exact_model, dirichlet_form, relative_entropy, stationarity_residual, ExactModel};
pub use fenwick::FenwickTree;
pub use gillespie::{gillespie_step, simulate, Jump, RunSummary, Simulator, StepOutcome};
pub use replicas::{replica_rng, run_replicas, thread_limit};
