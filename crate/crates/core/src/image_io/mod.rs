//! Volume and label-map I/O, orientation codes and reorientation.

mod affine;
mod nifti;
mod orientation;
mod volume;

pub use affine::Affine;
pub use nifti::{encode_volume, read_label_volume, read_volume, write_label_volume, write_volume};
pub use orientation::{orientation_from_affine, reorient_array, reorient_volume, AxCodes, AxisCode};
pub use volume::{LabelVolume, VolumeGrid};

/// Working orientation assumed by every downstream module.
pub const WORKING_ORIENTATION: AxCodes = AxCodes::PLS;
