//! ANOVA, Tukey HSD, least squares and the country-level fit.

pub mod anova;
pub mod ols;
pub mod report;
pub mod tukey;

pub use anova::{one_way_anova, AnovaResult};
pub use ols::{ols, ols_with_intercept, OlsResult};
pub use report::{
    build_report, country_mean_floors, floors_from_pairs, hardware_fit, macro_fit, AnovaRow, FloorObservation, InsightsConfig,
    InsightsReport, OlsRow, TukeyRow, HARDWARE_COLUMNS,
};
pub use tukey::{studentized_range_cdf, studentized_range_quantile, tukey_hsd, TukeyPair, TukeyResult};
