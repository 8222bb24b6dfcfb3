//! Elevation-angle kinematics, elevation space moments and intersegmental
//! coordination analysis for lower-limb gait data.
//!
//! Joint angles follow the 12-element layout
//! `[pelvis tilt, obliquity, rotation, hip flex/add/rot, knee flex/add/rot,
//! ankle dorsiflexion/inversion/rotation]`, in radians unless a name says
//! otherwise.

pub mod analysis;
pub mod coordination;
pub mod error;
pub mod io;
pub mod jacobian;
pub mod kinematics;
pub mod synthetic;

pub use analysis::{analyze_stride, AnalysisOptions, StrideAnalysis};
pub use coordination::{fit_cvp, predict_shank, shank_foot_fit, CvpModel, LinearCouplingFit, PlaneConstraint, SwingWindow};
pub use error::{Error, Result};
pub use jacobian::{elevation_space_moments, esm_at, jacobian_at, power_check, EsmOptions, JointMoments, PelvisColumns, ReducedJacobian};
pub use kinematics::{
    compose_segment_frames, elevation_angle, elevation_angles, AnatomicalAngles, ElevationAngles, JointAngles, Laterality,
    Segment, SegmentFrames,
};
