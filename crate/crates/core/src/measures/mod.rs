//! Jump rates, the fugacity machinery and the stationary product measures.

mod fugacity;
mod jump_rate;
mod large_deviations;
mod sampling;

pub use fugacity::{
    mean_density, partition_function, series_moments, FugacityTable, SeriesMoments, TableRow, DEFAULT_RHO_MAX,
    TABLE_NODES,
};
pub use jump_rate::JumpRate;
pub use large_deviations::{curvature_gap, proposition4_check, rate_function, EntropyBoundGrid};
pub use sampling::{sample_marginal, sample_product_configuration, MarginalSampler, ProductSampler};
