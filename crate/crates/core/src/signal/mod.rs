//! Baseband I/Q synthesis: modulation schemes, waveform generators, the
//! gain-plus-AWGN channel, and labeled dataset generation.

mod channel;
mod frame;
mod generate;
mod modulate;
mod scheme;

pub use channel::{add_awgn, apply_channel, ChannelConfig, NoiseMode};
pub use frame::{SignalFrame, NOISELESS_CENTI_DB};
pub use generate::{frame_seed, generate_dataset, SnrPolicy};
pub use modulate::{modulate, qam_point, qpsk_point, rrc_taps, OfdmConfig, SynthConfig};
pub use scheme::{ModScheme, Modulation, RadioMlScheme};
