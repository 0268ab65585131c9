//! Monte Carlo designs for sparse factor panels: data generation, accuracy
//! metrics, seeded replications and the table layouts.

pub mod dgp;
pub mod ks;
pub mod metrics;
pub mod replication;
pub mod tables;

pub use dgp::{default_sparsity, generate, DgpConfig, GroundTruth, LoadingRule, NoiseKind, SparsityRule};
pub use ks::{ks_standard_normal, KsResult};
pub use metrics::{factor_angle_error, factor_matrix_error, recovery_rate};
pub use replication::{
    replication_seed, run_replications, EstimatorSettings, ReplicationFailure, ReplicationRecord, ReplicationSummary,
    Stat, Task,
};
pub use tables::{run_table, TableCell, TableDesign, TableMetric, TableRun};
