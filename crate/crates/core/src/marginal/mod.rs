//! From raw ticks to per-component marginal schedules.

pub mod em;
pub mod features;
pub mod ingest;

pub use em::{component_marginals, fit_mixture_em, EmOptions, MixtureFit};
pub use features::{default_scale, feature_matrix, scale_series, FeatureMatrix};
pub use ingest::{
    ingest_series, read_ticks, BarSeries, DayBars, DroppedDay, Ingested, SessionConfig, Tick,
};
