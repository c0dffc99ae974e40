//! Minimal numeric core: dense tensors, named parameters, the layers the
//! encoder and classifier are built from, Adam, and checkpointing. Every
//! layer exposes an explicit backward pass.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod ops;
mod params;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::{CharConv, Highway, Linear};
pub use lstm::{BiLstm, Lstm, LstmOutput};
pub use params::{uniform, xavier_uniform, GradBuffer, Param, ParamId, ParamStore};
pub use tensor::Tensor;
