//! CT display windows, MIP control images and feature overlays.

mod control;
mod image;
mod overlay;
mod window;

pub use control::{choose_control_plane, mip, project_mask, render_control_image, z_to_row, ControlOverlays, Plane};
pub use image::{boundary, render_boxplot, Rgba, RgbaImage, CYAN, MAGENTA, RED, YELLOW};
pub use overlay::{overlay_to_rgba, render_feature_overlay};
pub use window::{
    apply_window, select_window_for_anatomy, WindowSetting, BONE_WINDOW, LUNG_WINDOW, SOFT_TISSUE_WINDOW,
};
