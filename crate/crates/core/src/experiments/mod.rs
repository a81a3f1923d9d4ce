//! Ground-truth settings, the seeded experiment runner, bootstrap summaries
//! and CSV/SVG output.

mod bootstrap;
mod config;
mod output;
mod runner;
mod settings;
mod svg;

pub use bootstrap::bootstrap_quantiles;
pub use config::{BootstrapConfig, EstimatorSpec, ExperimentConfig, Setting};
pub use output::{
    emit_csv, metadata_value, read_rows_csv, rows_from_csv, rows_to_csv, summarize, summary_to_csv, SummaryRow,
    CSV_HEADER,
};
pub use runner::{build_instance, cell_samples, run_experiment, sample_seed, ExperimentOutput, ResultRow, METRICS};
pub use settings::{
    stripes_flipped_map, gen_checkerboard, gen_stripes, gen_setting_a, gen_setting_b, lb_instance_sampling, Instance,
};
pub use svg::{emit_checkerboard_svg, emit_svg_plot, render_checkerboard_svg, render_svg_plot, PlotSpec};
