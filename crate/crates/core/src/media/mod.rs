//! Synthetic surveillance media with an embedded ENF fingerprint.

mod camera;
mod frame;
pub mod fseq;
mod labels;
mod render;
mod scene;
pub mod wav;
pub use wav::{into_blocks, into_blocks_iter, read_wav, WavWriter};
pub use fseq::{validate_fseq, FseqHeader, FseqReader, FseqWriter};

pub use camera::{audio_sample_of_frame, frame_timestamp_ns, CameraParams};
pub use frame::{AudioBlock, Frame};
pub use labels::{ground_truth, AttackTimeline, Label, LabelTrack, ReplaySpan};
pub use render::{
    fiducial_template, render_audio, render_audio_blocks, render_frames, AudioRenderer,
    FrameRenderer, AUDIO_BLOCK, FIDUCIAL_SIZE,
};
pub use scene::{Event, SceneScript, SCENE_SCHEMA_VERSION};
