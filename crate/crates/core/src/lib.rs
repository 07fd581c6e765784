//! Pulse-coupled oscillators with Type II phase response curves on delayed
//! directed networks.
//!
//! - [`graph`]: directed graphs, random generators, edge-list I/O, structure checks.
//! - [`prc`]: phase response curves and their inhibition/excitation classification.
//! - [`sim`]: exact event-driven dynamics, the critical-range certificate and
//!   the one-shot collapse window.
//! - [`bounds`]: closed-form probabilistic lower bounds and density thresholds.
//! - [`mc`]: Monte Carlo estimators, confidence intervals and sweeps.
//! - [`cli`]: the `pcosync` command line.

pub mod bounds;
pub mod cli;
pub mod graph;
pub mod mc;
pub mod prc;
pub mod sim;

pub use graph::{Graph, RggSpec};
pub use prc::{Prc, PrcParams};
pub use sim::{Certificate, ModelParams, SimState, Simulation};
