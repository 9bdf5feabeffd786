//! Event-based tactile texture classification pipeline.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`aer`]: address-event data model, binary/CSV file formats and the
//!   spatial/temporal preprocessing chain (crop, grid pooling, time binning).
//! - [`sim`]: procedural texture fields, exploratory motion kinematics and a
//!   rapidly-adapting marker sensor model that emits synthetic event streams.
//! - [`snn`]: spiking convolutional network with integrate-and-fire neurons,
//!   surrogate-gradient training and synaptic-operation accounting.
//! - [`metrics`]: accuracy-vs-sample-length curves, convergence reports,
//!   generalization sweeps and the calibrated event-rate power model.
//! - [`cli`]: subcommand front end gluing the stages into reproducible runs.

pub mod aer;
pub mod cli;
pub mod hash;
pub mod metrics;
pub mod sim;
pub mod snn;
