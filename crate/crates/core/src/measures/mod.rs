pub mod density;
pub mod family;
pub mod ulam;
pub mod wasserstein;

pub use density::Density1D;
pub use family::{
    disintegrate, lipschitz_restrict, prod_bound, push_forward, push_leaf_into, srb_iterate, var_g,
    variation_report, FamilyOperator, JointGrid, LeafFamily, LyConstants, ProdBound, Restricted,
    VariationReport,
};
pub use ulam::{invariant_density, power_iteration, ulam_operator, TransferOperator};
pub use wasserstein::{w1_1d, w1_zero, Measure1D};
