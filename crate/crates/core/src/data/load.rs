//! Dataset loading and validation. Voxels are loaded eagerly (desk scale);
//! read paths are immutable afterwards and safe to share across threads.

use super::world::SynthWorld;
use super::{CaptionSet, DatasetManifest, FmriSample};
use crate::error::{Error, Result};
use crate::util::seeded_rng;
use rand::seq::SliceRandom;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
    /// (subject, split) -> trials as rows of f64, file order.
    voxels: HashMap<(String, String), Vec<Vec<f64>>>,
    captions: HashMap<String, CaptionSet>,
    features: HashMap<String, Vec<f64>>,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let man_path = dir.join("manifest");
    let text = std::fs::read_to_string(&man_path)
        .map_err(|e| Error::io(man_path.display().to_string(), e))?;
    let manifest = DatasetManifest::from_toml(&text)?;

    // Split hygiene.
    for id in &manifest.splits.train {
        if manifest.splits.test.contains(id) {
            return Err(Error::Format(format!("stimulus {id} appears in both splits")));
        }
    }
    let split_sizes = [
        ("train", manifest.splits.train.len()),
        ("test", manifest.splits.test.len()),
    ];

    let mut voxels = HashMap::new();
    for sub in &manifest.subjects {
        for (split, n_stimuli) in split_sizes {
            let rel = if split == "train" { &sub.train_voxels } else { &sub.test_voxels };
            let path = dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            let trials = n_stimuli * manifest.trials_per_stimulus;
            let expect = trials * sub.voxel_count * 4;
            if bytes.len() != expect {
                return Err(Error::Format(format!(
                    "{}: byte length {} does not match {} trials x {} voxels x 4",
                    path.display(),
                    bytes.len(),
                    trials,
                    sub.voxel_count
                )));
            }
            let mut rows = Vec::with_capacity(trials);
            for t in 0..trials {
                let mut row = Vec::with_capacity(sub.voxel_count);
                for v in 0..sub.voxel_count {
                    let off = (t * sub.voxel_count + v) * 4;
                    let x = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
                    if !x.is_finite() {
                        return Err(Error::Format(format!(
                            "{}: non-finite voxel value",
                            path.display()
                        )));
                    }
                    row.push(x);
                }
                rows.push(row);
            }
            voxels.insert((sub.id.clone(), split.to_string()), rows);
        }
    }

    // Captions for every stimulus.
    let cap_path = dir.join(&manifest.captions_file);
    let cap_text = std::fs::read_to_string(&cap_path)
        .map_err(|e| Error::io(cap_path.display().to_string(), e))?;
    let mut captions = HashMap::new();
    for (lineno, line) in cap_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let set: CaptionSet = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("captions.jsonl line {}: {e}", lineno + 1)))?;
        if set.captions.is_empty() || set.captions.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Format(format!(
                "captions.jsonl line {}: empty caption",
                lineno + 1
            )));
        }
        captions.insert(set.stimulus_id.clone(), set);
    }
    for s in &manifest.stimuli {
        if !captions.contains_key(&s.id) {
            return Err(Error::Format(format!("missing captions for stimulus {}", s.id)));
        }
    }

    // Ground-truth features, manifest stimulus order.
    let feat_path = dir.join(&manifest.image_features_file);
    let feat_bytes =
        std::fs::read(&feat_path).map_err(|e| Error::io(feat_path.display().to_string(), e))?;
    let expect = manifest.stimuli.len() * manifest.attr_embed_dim * 4;
    if feat_bytes.len() != expect {
        return Err(Error::Format(format!(
            "{}: byte length {} does not match {} stimuli x {} dims x 4",
            feat_path.display(),
            feat_bytes.len(),
            manifest.stimuli.len(),
            manifest.attr_embed_dim
        )));
    }
    let mut features = HashMap::new();
    for (i, s) in manifest.stimuli.iter().enumerate() {
        let mut v = Vec::with_capacity(manifest.attr_embed_dim);
        for d in 0..manifest.attr_embed_dim {
            let off = (i * manifest.attr_embed_dim + d) * 4;
            v.push(f32::from_le_bytes(feat_bytes[off..off + 4].try_into().unwrap()) as f64);
        }
        features.insert(s.id.clone(), v);
    }

    Ok(Dataset { manifest, root: dir.to_path_buf(), voxels, captions, features })
}

impl Dataset {
    /// Samples of one subject and split, in file order (stimulus order of
    /// the split list, repetitions consecutive).
    pub fn samples(&self, subject: &str, split: &str) -> Result<Vec<FmriSample>> {
        let rows = self
            .voxels
            .get(&(subject.to_string(), split.to_string()))
            .ok_or_else(|| Error::Invalid(format!("no voxels for subject '{subject}' split '{split}'")))?;
        let ids = match split {
            "train" => &self.manifest.splits.train,
            "test" => &self.manifest.splits.test,
            other => return Err(Error::Invalid(format!("unknown split '{other}'"))),
        };
        let reps = self.manifest.trials_per_stimulus;
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            out.push(FmriSample {
                subject_id: subject.to_string(),
                stimulus_id: ids[i / reps].clone(),
                repetition: (i % reps) as u32,
                voxels: row.clone(),
            });
        }
        Ok(out)
    }

    /// Test samples averaged over repetitions, one per stimulus.
    pub fn averaged_test_samples(&self, subject: &str) -> Result<Vec<FmriSample>> {
        let all = self.samples(subject, "test")?;
        let reps = self.manifest.trials_per_stimulus;
        all.chunks(reps).map(super::preprocess::average_repetitions).collect()
    }

    /// A seeded shuffle of sample indices; identical for identical seeds.
    pub fn shuffled_order(&self, n: usize, seed: u64, tag: &str) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seeded_rng(seed, &format!("order:{tag}"));
        idx.shuffle(&mut rng);
        idx
    }

    pub fn caption_set(&self, stimulus_id: &str) -> Result<&CaptionSet> {
        self.captions
            .get(stimulus_id)
            .ok_or_else(|| Error::Invalid(format!("no captions for stimulus '{stimulus_id}'")))
    }

    pub fn feature(&self, stimulus_id: &str) -> Result<&[f64]> {
        self.features
            .get(stimulus_id)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Invalid(format!("no feature for stimulus '{stimulus_id}'")))
    }

    pub fn world(&self) -> Result<SynthWorld> {
        SynthWorld::from_manifest(&self.manifest)
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.manifest.subjects.iter().map(|s| s.id.clone()).collect()
    }

    pub fn voxel_count(&self, subject: &str) -> Result<usize> {
        self.manifest
            .subjects
            .iter()
            .find(|s| s.id == subject)
            .map(|s| s.voxel_count)
            .ok_or_else(|| Error::Invalid(format!("unknown subject '{subject}'")))
    }

    /// All caption sets of a split, split-list order.
    pub fn split_caption_sets(&self, split: &str) -> Result<Vec<CaptionSet>> {
        let ids = match split {
            "train" => &self.manifest.splits.train,
            "test" => &self.manifest.splits.test,
            other => return Err(Error::Invalid(format!("unknown split '{other}'"))),
        };
        ids.iter().map(|id| self.caption_set(id).cloned()).collect()
    }
}
