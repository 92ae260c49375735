//! The trainable denoiser: tensors, layer primitives, the encoder-decoder
//! network with manual reverse-mode differentiation, the Adam optimizer and
//! the checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod net;
pub mod tensor;

pub use adam::{adam_step, adam_step_with_lr, effective_lr, AdamState};
pub use checkpoint::{CheckpointMeta, Phase, ProvenanceEntry};
pub use net::{backward, forward, NetworkConfig, NetworkParams, ParamGrads};
pub use tensor::Tensor;
