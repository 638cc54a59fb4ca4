pub mod correlation;
pub mod dimension;
pub mod exact;
pub mod fit;
pub mod hitting;
pub mod sampling;
pub mod saussol;

pub use correlation::{
    correlation_mc, correlation_measure, DecayFit, DecaySeries, Linear, McOptions, Observable,
};
pub use dimension::{
    dimension_from_masses, dyadic_radii, flow_occupation, grid_local_dimension, loglaw_slope,
    orbit_ball_counts, window_slopes, DimensionEstimate, HittingSample,
};
pub use exact::{exact_dimension, exact_dimension_closed_form, ExactDimension};
pub use hitting::{
    hitting_time_flow, hitting_time_map, hitting_times_flow, hitting_times_map,
    recurrence_time_map, recurrence_times_flow, recurrence_times_map, sandwich_sample, FlowTarget,
    Outcome, SandwichSample,
};
pub use sampling::SrbSampler;
pub use saussol::{saussol_check, SaussolReport};
