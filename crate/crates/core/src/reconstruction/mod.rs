//! Inverse pipeline: set distances, localization, dataset comparison,
//! charts, lens extraction and the I₀ certificate.

pub mod charts;
pub mod compare;
pub mod hausdorff;
pub mod invariant;
pub mod lens;
pub mod localize;

pub use charts::{boundary_chart, interior_chart, interior_chart_with, theta_chart, ChartCandidate, ChartKind, ChartOptions};
pub use compare::{compare_datasets, BoundaryMap, MatchReport};
pub use hausdorff::{hausdorff, PreparedSet, SetDistance};
pub use invariant::{i0, i0_invariant, i0_trace, I0Report};
pub use lens::{agreement_with_model, extract_lens_data, LensExtraction};
pub use localize::{localize, refine, Localization, LocalizeIndex, RefineOptions};
