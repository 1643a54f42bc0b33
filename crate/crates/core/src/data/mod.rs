//! Label encoding, cutout corruption and batch assembly.

pub mod batch;
pub mod codec;
pub mod cutout;

pub use batch::{Batch, BatchSampler, PairStyleMode};
pub use codec::{CharsetCodec, EOS, GO, NUM_SPECIALS, PAD};
pub use cutout::{cutout, dataset_mean, CutoutFill, CutoutSpec};
