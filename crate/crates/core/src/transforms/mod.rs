//! Input front-ends that turn a 2×N I/Q frame into a 2×W×W image.

mod ct;
mod stft;

pub use ct::{conv_transform, conv_transform_dataset, conv_transform_tape, init_ct_weights, CtConfig, CtWeights};
pub use stft::{
    hann_window, resample_bilinear, stft, stft_dataset, stft_image, stft_to_image, ChannelMode, Stft, StftConfig,
    Window,
};
