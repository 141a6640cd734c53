//! Graph states of QSP qubits and adaptive one-way measurement patterns.
//!
//! Byproducts are tracked in a Pauli frame derived from the causal flow of
//! the graph. Measurement angles absorb the frame of the measured vertex;
//! the frame left on the outputs is removed from the tomographic state at
//! the logical level.

mod oracle;
mod pattern;
mod run;

pub use oracle::{default_inputs, qubit_oracle, remove_frame, OracleBranch, OracleResult};
pub use pattern::{
    Adapt, ByproductFrame, Flow, FrameEntry, GraphPattern, Role, Step, Vertex, MAX_VERTICES,
};
pub use run::{
    build_cluster, run_pattern, Backend, ClusterSampler, ClusterState, DenseSelection, PatternRun,
    Shot, DEFAULT_TRAJECTORIES, MAX_DENSE_MODES, MAX_TRAJECTORY_AMPLITUDES,
};
