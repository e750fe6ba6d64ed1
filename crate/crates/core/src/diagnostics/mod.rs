//! Posterior summaries, credible-interval networks, convergence checks and exports.

mod convergence;
mod export;
mod network;
mod summary;

pub use convergence::{convergence_stats, split_rhat_ess, ConvergenceStat, MIN_CHAIN_LENGTH};
pub use export::{
    rmse_surface, write_b3_summary_csv, write_convergence_csv, write_edges_csv, write_rmse_grid_csv,
    write_rmse_grids_json, write_summary_csv, write_trace_csv, RmseGrid,
};
pub use network::{coefficient_network, diag_dominance, ActorMatrix, CoefficientNetwork, Edge};
pub use summary::{quantile_sorted, summarize_chain, summarize_pooled, ParameterSummary, PosteriorSummary, QUANTILE_LEVELS};
