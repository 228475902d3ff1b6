//! Federated training: client sampling, local SGD, aggregation and server
//! optimizers.

pub mod aggregate;
pub mod eval;
pub mod experiment;
pub mod local;
pub mod sampling;
pub mod server_opt;

pub use aggregate::{aggregate, ClientUpdate, PseudoGradient};
pub use experiment::{run_experiment, ExperimentOutcome, Hooks, RoundReport, Upload, CSV_HEADER};
pub use local::{local_train, LocalTrainConfig, StyleContext};
pub use sampling::sample_clients;
pub use server_opt::{ServerOptConfig, ServerOptKind, ServerOptState};
