//! Numerical primitives shared by the synthesizer, the attack and the detector.

mod grid;
mod spectrum;
mod stats;

pub(crate) use grid::{read_series_csv, write_series_csv};
pub use grid::{enf_phase, synth_enf, EnfSeries, GridParams, PhaseTable};
pub use spectrum::{dft, dft_at_rate, idft, stft, FrameTransform, SpectrumBlock, StftLayout, Window};
pub use stats::{pearson, rmse};
