use ndarray::{Array, ArrayBase, Data, Dimension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Category, Registry};

/// CT display window in HU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSetting {
    pub width: f64,
    pub level: f64,
}

pub const LUNG_WINDOW: WindowSetting = WindowSetting {
    width: 1500.0,
    level: -600.0,
};
pub const SOFT_TISSUE_WINDOW: WindowSetting = WindowSetting {
    width: 350.0,
    level: 50.0,
};
pub const BONE_WINDOW: WindowSetting = WindowSetting {
    width: 1800.0,
    level: 400.0,
};

impl WindowSetting {
    pub fn new(width: f64, level: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() || !level.is_finite() {
            return Err(Error::InvalidParameter(format!("window width {width} must be positive")));
        }
        Ok(WindowSetting { width, level })
    }

    /// Displayed HU range: level -/+ width / 2.
    pub fn display_range(&self) -> (f64, f64) {
        (self.level - self.width / 2.0, self.level + self.width / 2.0)
    }

    pub fn for_category(c: Category) -> Self {
        match c {
            Category::Bone => BONE_WINDOW,
            Category::Lung => LUNG_WINDOW,
            Category::SoftTissue => SOFT_TISSUE_WINDOW,
        }
    }

    /// One value mapped to [0, 1].
    pub fn map(&self, v: f64) -> f64 {
        let (lo, hi) = self.display_range();
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// Clamp to the window and rescale linearly to [0, 1].
pub fn apply_window<S, D>(values: &ArrayBase<S, D>, w: WindowSetting) -> Array<f64, D>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    values.mapv(|v| w.map(v))
}

/// Window for a structure or selector, chosen from its top-level category;
/// selections spanning several categories use the soft tissue window.
pub fn select_window_for_anatomy(name: &str, registry: &Registry) -> Result<WindowSetting> {
    let leaves = registry.expand_selection(name)?;
    Ok(WindowSetting::for_category(registry.category_of_selection(&leaves)))
}
