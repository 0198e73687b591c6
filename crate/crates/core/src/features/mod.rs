//! Body composition metrics, histogram bin width, voxel-based first-order
//! features and subset average pooling.

mod binwidth;
mod body;
mod config;
mod hu_range;
mod params;
mod reconstruct;
mod sap;
mod stack;
mod voxel;

pub use binwidth::{doane_bin_width, optimal_hist_bin_width, round_bin_width, DEFAULT_TARGET_BIN_WIDTHS};
pub use body::{body_component_analysis, central_plane, AnalysisRegion, ComponentMetrics, PlaneMode};
pub use config::{Reference, TargetEvaConfig, TaskEvaConfig, DEFAULT_REFERENCE_TASK, SUPPORTED_KEYS};
pub use hu_range::{
    enforce_fat_range, split_muscle_by_hu, HuRangeDict, MuscleClass, MuscleSplit, FAT, LOW_ATTENUATION_MUSCLE,
    NORMAL_MUSCLE,
};
pub use params::ExtractionParams;
pub use reconstruct::{dense_feature_map, reconstruct_global_feature_map};
pub use sap::{combinations, sap_pool, standardize, SapResult};
pub use stack::FeatureMapStack;
pub use voxel::{
    build_condition_stack, extract_label_features, extract_voxel_features, first_order_features, percentile_sorted,
    voxel_features, ConditionParam, FirstOrderFeature,
};
