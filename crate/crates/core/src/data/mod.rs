//! Datasets, synthetic and MNIST-derived generators, file formats.

mod dataset;
mod io;
mod mnist;
mod model_io;
mod synthetic;

pub use dataset::{split, standardize, DatasetMeta, MultiViewDataset, Split, Standardization};
pub use io::{
    encode_idx_images, encode_idx_labels, load_csv_view, load_dataset, load_dataset_from, load_idx, load_manifest,
    parse_csv, parse_idx, parse_labels_csv, write_csv_view, write_manifest, DatasetManifest, FileFormat, IdxData,
    LabelEntry, ViewEntry,
};
pub use mnist::{make_noisy_two_view, make_noisy_two_view_with, rotate_image, NoisyTwoViewOptions};
pub use model_io::{decode_model, encode_model, load_model, model_header, save_model, MODEL_VERSION};
pub use synthetic::{make_synthetic, PlantedGenerator, PlantedStructure, PlantedTruth};
