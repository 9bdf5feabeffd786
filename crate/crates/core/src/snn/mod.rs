//! Spiking convolutional network.
//!
//! Networks are described by a [`NetworkSpec`] (conv / pool / linear layers
//! with integrate-and-fire activations), compiled into a [`Plan`] with
//! resolved shapes, and executed time step by time step over spike count
//! tensors. The forward pass is event-driven: only nonzero inputs and
//! emitted spikes propagate, which also yields the exact synaptic-operation
//! counts used for power estimation. Training is backpropagation through
//! time with a surrogate derivative standing in for the spike
//! discontinuity.

mod backward;
mod config;
mod forward;
mod io;
mod params;
pub mod reference;
mod surrogate;
mod train;

pub use backward::{loss_and_grads, Gradients};
pub use config::{
    compile, IfConfig, InputShape, LayerSpec, NetworkSpec, Plan, PoolKind, ResetMode,
};
pub use forward::{
    argmax_class, count_synops, forward, forward_with, if_step, predict, ForwardOptions,
    ForwardOutput, ForwardTrace, SpikeMode, SynopsReport,
};
pub use io::{load_params, save_params, PARAMS_FILE_MAGIC, PARAMS_FORMAT_VERSION};
pub use params::Parameters;
pub use surrogate::{SurrogateKind, SurrogateSpec};
pub use train::{train, EpochLog, Hyperparams, Split, TrainItem, TrainOutcome};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model file incompatible: spec hash {found:#018x}, expected {expected:#018x}")]
    IncompatibleModel { found: u64, expected: u64 },
    #[error("bad parameter file: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SnnError>;
