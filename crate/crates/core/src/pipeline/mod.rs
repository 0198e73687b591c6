//! Workflow config, batch orchestration, run manifest and bundled phantoms.

mod config;
mod manifest;
mod phantoms;
mod run;

pub use config::{load_workflow_config, ControlImageConfig, IoConfig, RobustnessConfig, VoxelFeatureConfig, WorkflowConfig};
pub use manifest::{export_dataset_tags, export_manifest, load_manifest, InstanceStatus, ManifestEntry, RunManifest};
pub use phantoms::{
    demo_workflow_config, make_phantom, write_phantom_dataset, Phantom, PhantomKind, EXAMPLE_VOXEL_YAML,
    PHANTOM_LOWER_Z, PHANTOM_SHAPE, PHANTOM_SPACING, PHANTOM_UPPER_Z,
};
pub use run::{discover_instances, extraction_params, run_pipeline, Instance, DATASET_TAG_FILE, MANIFEST_FILE};
