//! Small dense network toolkit with hand-derived gradients.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod mlp;
pub mod params;
pub mod se;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use linear::Linear;
pub use loss::{attention_entropy, softmax, softmax_cross_entropy};
pub use mlp::{mlp_value_and_grad, MlpCache, MlpParams};
pub use params::Parameters;
pub use se::{se_gate, SeGateParams};
pub use tensor::Tensor;
