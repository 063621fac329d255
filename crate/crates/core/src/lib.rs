//! Streaming stereo speech enhancement with interaural cue preservation.
//!
//! A stereo STFT frame is projected onto two orthonormal steering vectors,
//! each projection is enhanced by a monaural gain estimator on an ERB band
//! grid, and the gained spatial images are summed back into stereo. The first
//! steering vector tracks the dominant source through a mask-weighted spatial
//! covariance; the second is its orthogonal complement.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod enhance;
pub mod erb;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod signal;
pub mod simulate;
pub mod spatial;
pub mod stft;
pub mod wav;

pub use enhance::{Enhancer, EnhancerFrame, EnhancerKind, SpecSubParams};
pub use erb::{BandGains, ErbFilterbank};
pub use error::{Error, Result};
pub use metrics::{MetricParams, MetricReport};
pub use pipeline::{Mode, Pipeline, PipelineConfig, RunReport, StreamOutput};
pub use scalar::Real;
pub use signal::StereoSignal;
pub use spatial::{SpatialCovariance, SteeringTracker, SteeringVector};
pub use stft::{FrameParams, MonoSpectrum, StereoSpectrum};

pub type PipelineF64 = Pipeline<f64>;
pub type PipelineF32 = Pipeline<f32>;
pub type StereoSpectrumF64 = StereoSpectrum<f64>;
pub type StereoSpectrumF32 = StereoSpectrum<f32>;
pub type StereoSignalF64 = StereoSignal<f64>;
pub type StereoSignalF32 = StereoSignal<f32>;
pub type SteeringVectorF64 = SteeringVector<f64>;
pub type SteeringVectorF32 = SteeringVector<f32>;
