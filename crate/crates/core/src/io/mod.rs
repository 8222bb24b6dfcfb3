//! Trial ingestion, gait events, stride segmentation and series export.

mod events;
mod series;
mod stride;
mod trial;

pub use events::{detect_events_from_kinematics, resolve_events, DetectedEvents, EventSource, GaitEvents};
pub use series::{format_value, read_series_csv, write_series_csv, SeriesTable};
pub use stride::{resample_linear, segment_strides, RejectedStride, Segmentation, StrideSeries, DEFAULT_GRID, MIN_STRIDE_SAMPLES};
pub use trial::{
    load_trial, load_trial_with_metadata, metadata_path, write_trial, Condition, Leg, LoadOptions, MomentUnits,
    TrialMetadata, TrialRecord, ANGLE_COLUMNS, MOMENT_STEMS,
};
