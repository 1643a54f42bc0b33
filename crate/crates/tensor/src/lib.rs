//! Dense tensors, deterministic RNG streams and a small tape-based
//! reverse-mode autodiff engine. The op set is exactly what the image
//! encoder/generator/discriminator stack and the recurrent text heads need,
//! in f32 for training and f64 for numerical verification.

pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use rng::Rng;
pub use scalar::Scalar;
pub use tape::{Tape, VarId};
pub use tensor::Tensor;
