//! Classical simulation and training of quantum convolutional neural networks
//! restricted to low-bodyness Pauli operators.

pub mod check;
pub mod circuit;
pub mod dataset;
mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod learn;
pub mod optim;
pub mod pauli;
pub mod propagation;
pub mod purity;
pub mod rng;
pub mod shadows;
pub mod statevector;
pub mod surrogate;

pub use circuit::{build_qcnn, readout_observables, Circuit, Gate, LayoutStyle, QcnnLayout, Task};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentResult};
pub use hamiltonian::{assign_label, ground_state, hamiltonian_terms, HamiltonianSpec, Model};
pub use pauli::{Pauli, PauliString, PauliSum, Phase};
pub use propagation::{propagate, PropagatedOperator, TruncationPolicy};
pub use purity::{purities_mc, purities_network, purities_recursive, PurityDistribution};
pub use shadows::{build_feature_table, exact_feature_table, sample_shadows, FeatureTable, ShadowRecord, ShadowSet};
pub use statevector::StateVector;
pub use surrogate::{ActiveSet, SurrogateGraph};
