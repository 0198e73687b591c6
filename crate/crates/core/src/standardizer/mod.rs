//! Volume bounds from reference anatomies, crop checks, prosthesis
//! detection, arm/leg separation and the dataset exclusion ledger.

mod arms;
mod bounds;
mod bright;
mod labeling;
mod prosthesis;
mod tags;

pub use arms::{separate_arms_and_legs, trunk_crop_axis, ArmLegSplit, BODY_EXTREMITIES_LABEL, BODY_TRUNK_LABEL};
pub use bounds::{
    anatomy_mask, define_volume_bounds_by_anatomies, detect_mask_cropping, mask_extent, resolve_reference_anatomy,
    Bound, CropReport, Side, TouchedSide, VolumeBounds, BOUND_CROPPED, BOUND_MISSING,
};
pub use bright::{
    binary_closing, binary_opening, farid_magnitude, label_areas, segment_bright_objects, watershed,
    BrightObjectParams, FARID_D1, FARID_P,
};
pub use labeling::{components_3d, label_2d};
pub use prosthesis::{coronal_mip_above, detect_hip_prosthesis, ProsthesisParams, ProsthesisReport};
pub use tags::*;
