//! Soft point-in-cell inclusion and cell-level aggregated features.

mod derive;
mod grid;
mod softpi;

pub use derive::{
    bev_aggregate, derive_features, format_feature_grid, hard_count_oracle, parse_feature_grid, roi_filter,
    save_feature_grid, Aabb, Channel, FeatureGrid, DEFAULT_EPS_DIV, MIN_SUPPORT, OCCUPANCY_THRESHOLD,
};
pub use grid::CellGrid;
pub use softpi::{soft_pi_tanh, soft_pi_trilinear, TanhSharpness};
