//! Dataset formats, feature construction and synthetic graphs.

mod node_format;
mod sbm;
mod tu;

pub use node_format::{
    format_node_dataset, load_node_dataset, parse_node_dataset, save_node_dataset, NodeDataset,
    UNLABELED,
};
pub use sbm::{generate_sbm, SbmConfig};
pub use tu::{build_features, load_tu_dataset, FeatureMode, TuDataset};
