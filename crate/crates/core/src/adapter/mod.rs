//! External model integration and on-disk data formats.

pub mod formats;
pub mod protocol;

pub use formats::{
    read_ground_truth_json, read_mask_json, read_series_csv, read_series_csv_labeled, write_atomic, write_ground_truth_json,
    write_mask_json, write_series_csv, LoadedMask,
};
pub use protocol::{
    spawn_external_model, ExternalModel, ExternalModelOptions, ExternalModelPool, ModelCommand,
    ProtocolError, PROTOCOL_VERSION,
};
