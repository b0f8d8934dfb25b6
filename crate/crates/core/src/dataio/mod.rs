//! On-disk formats and dataset assembly: feature containers, the manifest,
//! validated subject records and the synthetic planted-model generator.

mod container;
mod manifest;
mod synth;

pub use container::{decode_container, encode_container, read_container, write_container, HEADER_LEN, MAGIC, VERSION};
pub use manifest::{
    load_dataset, Dataset, Manifest, ResponseEntry, ResponseFeatures, Split, SubjectEntry, SubjectRecord,
    RESPONSES_PER_SUBJECT,
};
pub use synth::{gen_synthetic, OracleMeta, PlantedModel, SplitFloors, SynthSpec, MANIFEST_FILE, ORACLE_FILE};
