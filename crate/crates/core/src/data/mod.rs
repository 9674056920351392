//! Utterance-level multimodal datasets: schema, disk format, batching,
//! splits and synthetic tasks.

mod batch;
mod io;
mod schema;
mod split;
mod synth;

pub use batch::{pad_batch, Batch, VideoInput};
pub use io::{load_dataset, read_video, write_dataset, write_video, Declared, Manifest, VideoEntry, WriteOptions, MANIFEST_FORMAT};
pub use schema::{Dataset, Modality, Schema, UtteranceRecord, VideoSample};
pub use split::{split_counts, split_dataset, Partitions};
pub use synth::{generate_xor_fusion, XorFusionParams};
