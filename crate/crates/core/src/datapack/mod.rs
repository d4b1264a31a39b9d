//! Feature packs, clip segmentation, context windows, and synthetic data.

mod clips;
mod pack;
mod synthetic;

pub use clips::{make_windows, segment_clips, ClipSample, ContextWindow, Segmented, WindowMode, CLIP_SECONDS};
pub use pack::{load_dataset, load_pack, write_pack, Manifest, ManifestModality, ModalitySpec, MoviePack, MANIFEST};
pub use synthetic::{gen_synthetic, synthesize, AR_COEFF, AR_NOISE, NOISE_MODALITY, NUISANCE_STD};
