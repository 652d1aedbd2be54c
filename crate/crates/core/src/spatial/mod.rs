//! Sparse ground-plot inventory, ordinary kriging and census/plot ensembling.
//!
//! Biomass densities are Mg/ha throughout; coordinates are projected metres.

mod ensemble;
mod kriging;
mod plots;
mod variogram;

pub use ensemble::{census_estimate, census_variance, ensemble, error_report, EnsembleEstimate, ErrorReport, DEFAULT_RECALL};
pub use kriging::{krige, BlockEstimate, KrigingPoint, OrdinaryKriging};
pub use plots::{parse_plots_csv, plot_centres, plots_to_csv, sample_plots, GroundPlot, PlotParams, StemRecord, DEFAULT_PLOT_RADIUS_M};
pub use variogram::{empirical_semivariogram, fit_variogram, VariogramBin, VariogramModel, VARIOGRAM_BINS};

use crate::grid::GridError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpatialError {
    #[error("need at least {needed} plots, got {got}")]
    TooFewPlots { needed: usize, got: usize },
    #[error("kriging system is singular: {0}")]
    SingularSystem(String),
    #[error("variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("plots file line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}
