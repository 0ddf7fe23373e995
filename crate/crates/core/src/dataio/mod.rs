//! Recording ingestion, windowing, quality filtering, normalization and
//! label encoding.

mod corpus;
mod label;
mod recording;
mod window;

pub use corpus::{build_windows, load_corpus, load_windows, save_windows, split_dataset, CorpusReport};
pub use label::{
    decode_label, encode_label, ClassLabel, Dimension, LabelMode, PersonalityProfile, ALL_DIMS_CLASSES, BIN_NAMES,
};
pub use recording::{parse_personality, parse_recording, GazeSample};
pub use window::{
    denormalize, expected_window_count, normalize, quality_filter, window_stream, Frames, GazeWindow, NormStats,
    CHANNELS, CH_BLINK, CH_PUPIL, CH_X, CH_Y, DEFAULT_STRIDE, SAMPLE_RATE_HZ, WINDOW_LEN,
};
