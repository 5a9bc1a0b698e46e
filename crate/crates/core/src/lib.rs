//! Line-of-sight MIMO channel synthesis, structure-aware estimation of
//! channel coefficients and carrier frequency offsets, and Cramér-Rao bounds.
//!
//! The crate is `no_std` with `alloc`; enable the `std` feature to get
//! `std::error::Error` impls and faster float routines.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod channel;
pub mod crb;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod signal;

pub use channel::{
    condition_number, joint_channel, los_channel, structure_map, ChannelMatrix, JointChannel,
    StructureMap,
};
pub use crb::{crb_no_offset, crb_with_offset, structured_crb, system_scale, CrbReport};
pub use error::{Error, Result};
pub use estimators::{
    diag_channel, estimate_consecutive, freq_offset_pairwise, ls_channel,
    toeplitz_channel_average, EstimationResult, EstimatorId, FreqPairing,
};
pub use geometry::{
    build_ula, build_ura, optimal_spacing, pairwise_distances, perturb_positions, ArrayGeometry,
    GridShape, LinkConfig, Vec3,
};
pub use signal::{
    draw_offsets, snr_to_noise_variance, synthesize_rx, training_orthogonal,
    training_shifted_identity, OffsetKind, OscillatorModel, PilotBlock, TrainingKind,
    TrainingMatrix,
};
