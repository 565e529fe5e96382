//! Interval and point estimates of mean achievement in two-stage sampled
//! assessments where schools and students may decline to take part.
//!
//! The crate computes identification regions for the population mean under a
//! ladder of assumptions about non-participants, from support limits and
//! quantile restrictions through monotone selection to the standard
//! adjustment-cell model, and ships a synthetic-population oracle that checks
//! those regions against known truth.
//!
//! ```no_run
//! use bounds_kit::{aggregate_over_pvs, AssumptionSet, Dataset, Regime};
//! # fn main() -> bounds_kit::Result<()> {
//! let data = Dataset::load_from_dir(std::path::Path::new("data/"))?;
//! let a1 = aggregate_over_pvs(&data, &AssumptionSet::with_alpha(Regime::Quantile, 0.05))?;
//! println!("[{:.1}, {:.1}]", a1.combined.lower, a1.combined.upper);
//! # Ok(())
//! # }
//! ```

pub mod cli_io;
pub mod error;
pub mod identification;
pub mod oracle_sim;
pub mod plausible_values;
pub mod survey_model;
pub mod weighted_stats;

pub use error::{BoundsError, Result};
pub use identification::{
    bounded_support, bounds_a1, bounds_a12_a2, bounds_a1_stratified, bounds_monotone, bounds_monotone_stratified,
    bounds_worst_case, estimate, point_standard, region_width, AssumptionSet, IdentificationRegion, Ingredients,
    Regime, StratumBounds,
};
pub use oracle_sim::{
    census_truth, draw_sample, generate_population, verify_coverage, CoverageReport, MechanismConfig, MechanismKind,
    PopulationShape, SampleDesign, SyntheticPopulation, TruthReport,
};
pub use plausible_values::{aggregate_over_pvs, PvAggregate};
pub use survey_model::{
    link_replacements, load_dataset, validate, write_dataset, Dataset, SchoolRecord, StratumRecord, StudentRecord,
    ValidationReport,
};
pub use weighted_stats::{
    participation_rate, school_adjustment_factor, school_participation_rate, stratum_adjustment_factor,
    student_participation_rate, weighted_mean, weighted_quantile, ParticipationEstimates, WeightedSample,
};
