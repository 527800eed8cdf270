//! Post-processing of sweep statistics: site entropies, condensation
//! temperatures, regime segmentation and the two-regime theory curve.

pub mod condensation;
pub mod entropy;
pub mod regime;
pub mod theory;

pub use condensation::{
    classify_site, classify_sites, condensation_temperature, Condensation, CondensationFlag, CondensationMap,
    SiteState, CONDENSATION_THRESHOLD, S_HIGH, S_LOW,
};
pub use entropy::{bootstrap_entropy_se, max_entropy_reference, site_entropy, EntropyMap, MaxEntropyReference};
pub use regime::{rank_correlation, regime_fit, RegimeFit, Segment};
pub use theory::{theory_mean_compliance, TheoryModel, TheoryMoments};
