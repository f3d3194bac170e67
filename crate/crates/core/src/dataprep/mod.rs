//! Record ingestion, gap filling, scaling and windowing.

mod acf;
mod dataset;
mod external;
mod interpolate;
mod record;
mod scaler;
mod series;
mod split;
mod window;

pub use acf::autocorrelation;
pub use dataset::{inference_series, CellData, DataSpec, Dataset, OutputKind};
pub use external::{day_of_week, ExternalFeatures, EXTERNAL_DIM};
pub use interpolate::interpolate_missing;
pub use record::{parse_line, read_records, read_records_file, write_records, CellRecord, ParsedLine, RecordBatch, Topic, RSRQ_BINS};
pub use scaler::ScalerParams;
pub use series::{
    build_series, expand_channels, is_fraction_channel, is_histogram_channel, rsrq_histogram, CellConfig, ConfigTimeline, KpiSeries,
    RsrqHistograms, RSRQ_CHANNEL_PREFIX,
};
pub(crate) use series::normalize_counts;
pub use split::{split_4_1_1, split_counts};
pub use window::{aggregate_targets, make_window, make_windows, TargetSpec, WindowSpec, WindowedSample};
