//! Analog coverage engine.
//!
//! Computes interval-based coverage artifacts over simulation traces, tracks
//! covered/target/illegal bins in a persistent database, and closes coverage
//! gaps with two guided-input strategies: Bode-peak frequency selection and
//! Gaussian-process Bayesian optimization with Expected Improvement.
//!
//! Everything numeric is generic over the scalar type (see [`scalar::Real`]);
//! the aliases at the crate root fix it to `f64`, which is what the CLI uses.

pub mod bayes;
pub mod bins;
pub mod coverage;
pub mod explore;
pub mod scalar;
pub mod sim;
pub mod space;
pub mod specfile;
pub mod trace;

pub use scalar::Real;

// f64 aliases for the common case.
pub type Bin = bins::Bin<f64>;
pub type BinSet = bins::BinSet<f64>;
pub type BinGrid = bins::BinGrid<f64>;
pub type Trace = trace::Trace<f64>;
pub type Event = trace::Event<f64>;
pub type CoverPoint = coverage::CoverPoint<f64>;
pub type ArtifactParams = coverage::ArtifactParams<f64>;
pub type CoverageResult = coverage::CoverageResult<f64>;
pub type TargetSpec = space::TargetSpec<f64>;
pub type TargetEntry = space::TargetEntry<f64>;
pub type CoverageDatabase = space::CoverageDatabase<f64>;
pub type GapReport = space::GapReport<f64>;
pub type LtiModel = sim::LtiModel<f64>;
pub type StaticMapModel = sim::StaticMapModel<f64>;
pub type Model = sim::Model<f64>;
pub type BodePlot = sim::BodePlot<f64>;
pub type Waveform = sim::Waveform<f64>;
pub type PeakSet = explore::PeakSet<f64>;
pub type ExplorationReport = explore::ExplorationReport<f64>;
pub type ParameterSpace = bayes::ParameterSpace<f64>;
pub type GpPosterior = bayes::GpPosterior<f64>;
pub type EiState = bayes::EiState<f64>;
pub type OptimizationHistory = bayes::OptimizationHistory<f64>;
pub type CoverageSpec = specfile::CoverageSpec<f64>;
