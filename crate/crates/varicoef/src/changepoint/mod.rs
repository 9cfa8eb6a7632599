//! Change-point analysis of inferred coefficient traces and fields:
//! Gaussian-mixture soft classification, windowed change probabilities,
//! threshold detection, and a CUSUM baseline.

mod cusum;
mod detect;
mod gmm;
mod prob;
mod summary;

pub use cusum::{cusum_detect, CusumConfig, CusumResult};
pub use detect::{detect, detect_field, ChangePointReport, FieldReport, Region, SegmentEstimate};
pub use gmm::{
    em_fit, em_fit_1d, em_fit_weighted, responsibilities, select_k, GmmInit, GmmModel,
    VARIANCE_FLOOR,
};
pub use prob::{change_prob_1d, change_prob_2d};
pub use summary::{relative_l2, segment_summary, SummaryRow};
