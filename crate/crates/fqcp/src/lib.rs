//! Simulators for a dissipative quantum circuit with two-qubit random
//! resets — the Floquet quantum contact process — together with the
//! [[4,2,2]] error-detection machinery needed to run it as an adaptive
//! logical circuit without post-selection.
//!
//! The crate is organized around the pipeline used in such experiments:
//!
//! - [`model`] lays out the periodic circuit over the exact causal cone;
//! - [`dephased`] samples the classical (fully dephased) limit at scale and
//!   carries an exhaustive small-instance oracle;
//! - [`dm`] evolves the exact open-system density matrix with qubit-reuse
//!   windowing;
//! - [`code422`] holds the code algebra, gadget library, Pauli propagation
//!   and fault-tolerance checker, plus the memory-error mitigations;
//! - [`adaptive`] implements the calibration/injection/main-run protocol and
//!   the importance-sampling reweighting estimator;
//! - [`analysis`] extracts effective exponents, curve crossings, and
//!   bootstrap errors.
//!
//! See the `examples/` directory for one runnable entry point per
//! capability; the `fqcp` binary wraps the same functions behind
//! subcommands.

pub mod adaptive;
pub mod analysis;
pub mod cli;
pub mod code422;
pub mod dephased;
pub mod dm;
pub mod model;
pub mod observables;
pub mod report;
pub mod rng;

pub use model::{build_circuit, causal_cone, flip_prob, CircuitSpec, ModelParams, SpacetimePoint};
pub use observables::ObservableSeries;
