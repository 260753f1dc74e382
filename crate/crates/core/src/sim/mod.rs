//! Synthetic ground truth and acquisition chain.

mod acquisition;
mod phantom;

pub use acquisition::{add_noise, estimate_field, simulate_gre, AcquisitionParams, EchoSeries, FieldEstimate};
pub use phantom::{
    default_grid, default_scene, rasterize, simulate_total_field, true_local_field, EllipsoidSpec, PhantomScene,
    Rasterized, PAD_FACTOR,
};
