//! File formats and dataset plumbing: polygon label files, polygon
//! rasterisation, binary PGM, JSON-lines predictions, report documents and
//! the seeded dataset split.

mod dataset;
mod labels;
mod pgm;
mod predictions;
mod raster;
mod reports;
mod split;

pub use dataset::{DatasetIndex, IndexEntry};
pub use labels::{format_label_file, parse_label_file, LabelRecord};
pub use pgm::{read_pgm, read_pgm_extent, write_pgm};
pub use predictions::{format_predictions, read_predictions, DetectionRecord};
pub use raster::{point_in_polygon, polygon_to_mask, Rasterized};
pub use reports::{pr_csv, to_json_document, MetricsSummary, WidthDocument};
pub use split::{split_dataset, SplitMix64, SplitSpec, Splits};
