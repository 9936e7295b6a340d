//! Group metrics, error-set diagnostics and error-set ablations.

mod ablation;
mod diagnostics;
mod metrics;

pub use ablation::{replace_error_set, EditedErrorSet, ErrorSetEdit};
pub use diagnostics::{
    enrichment_table, error_set_stats, top_loss_set, track_cvar_composition, CompositionPoint,
    EnrichmentRow, EnrichmentTable, ErrorSetStats,
};
pub use metrics::{evaluate_groups, predictions, Criterion, GroupMetrics, GroupStat};
