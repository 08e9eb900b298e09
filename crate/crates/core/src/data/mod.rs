//! Dataset format, synthetic brain-image-caption world, and the fMRI
//! preprocessing applied before modeling: voxel alignment, patching, trial
//! averaging, standardization, and noise injection.

pub mod generate;
pub mod load;
pub mod preprocess;
pub mod world;

pub use generate::{make_synth, SynthConfig};
pub use load::{load_dataset, Dataset};
pub use preprocess::{
    align_and_patchify, average_repetitions, inject_noise, standardize, unpatchify, BaseStd,
    TrainStats,
};
pub use world::SynthWorld;

use serde::{Deserialize, Serialize};

/// Sentinel repetition for trial-averaged samples.
pub const REPETITION_AVERAGED: u32 = u32::MAX;

/// One voxel vector with subject, stimulus, and repetition identity.
#[derive(Debug, Clone)]
pub struct FmriSample {
    pub subject_id: String,
    pub stimulus_id: String,
    pub repetition: u32,
    pub voxels: Vec<f64>,
}

impl FmriSample {
    pub fn all_finite(&self) -> bool {
        self.voxels.iter().all(|v| v.is_finite())
    }
}

/// A voxel vector zero-padded to the cross-subject alignment length.
#[derive(Debug, Clone)]
pub struct AlignedFmri {
    pub voxels: Vec<f64>,
    pub subject_id: String,
    pub stimulus_id: String,
    pub repetition: u32,
    /// Length of the source vector before padding.
    pub source_len: usize,
}

/// An aligned vector sliced into fixed-size contiguous patches.
#[derive(Debug, Clone)]
pub struct PatchSequence {
    /// P x patch_size, row-major; flattening reproduces the aligned vector.
    pub patches: crate::nn::Matrix,
    pub source_len: usize,
}

impl PatchSequence {
    pub fn patch_count(&self) -> usize {
        self.patches.rows()
    }

    pub fn patch_size(&self) -> usize {
        self.patches.cols()
    }
}

/// The reference caption strings for one stimulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptionSet {
    pub stimulus_id: String,
    pub captions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub voxel_count: usize,
    pub train_voxels: String,
    pub test_voxels: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StimulusEntry {
    pub id: String,
    pub color: String,
    pub object: String,
    pub context: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SplitLists {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// On-disk dataset description. Serialized as TOML ("structured text").
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub v_align: usize,
    pub attr_embed_dim: usize,
    pub obs_noise_std: f64,
    pub trials_per_stimulus: usize,
    pub colors: Vec<String>,
    pub objects: Vec<String>,
    pub contexts: Vec<String>,
    pub captions_file: String,
    pub image_features_file: String,
    pub subjects: Vec<SubjectEntry>,
    pub splits: SplitLists,
    pub stimuli: Vec<StimulusEntry>,
}

impl DatasetManifest {
    pub fn to_toml(&self) -> crate::Result<String> {
        toml::to_string(self).map_err(|e| crate::Error::Format(format!("manifest encode: {e}")))
    }

    pub fn from_toml(s: &str) -> crate::Result<Self> {
        toml::from_str(s).map_err(|e| crate::Error::Format(format!("manifest decode: {e}")))
    }

    pub fn stimulus(&self, id: &str) -> Option<&StimulusEntry> {
        self.stimuli.iter().find(|s| s.id == id)
    }
}
