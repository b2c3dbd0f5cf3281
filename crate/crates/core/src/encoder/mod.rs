//! BERT-style encoder with a tied-decoder MLM head.

pub mod checkpoint;
pub mod config;
pub mod model;
pub mod params;
pub mod parity;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{count_parameters, ModelConfig, PRESET_NAMES};
pub use model::{encode_hidden, forward, mean_pool, mlm_head, EncoderModel, ForwardOutput, InputBatch, Mode, ParamVars};
pub use params::{init_parameters, parameter_specs, ParameterStore};
pub use parity::{check_parity, load_references, ParityResult, ReferenceActivation};
