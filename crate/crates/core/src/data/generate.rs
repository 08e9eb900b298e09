//! Synthetic dataset generation: samples stimulus triples, writes voxel
//! binaries, captions, ground-truth image features, and the manifest.

use super::world::{SynthWorld, CAPTIONS_PER_STIMULUS, IMG_SIZE};
use super::{CaptionSet, DatasetManifest, SplitLists, StimulusEntry, SubjectEntry};
use crate::error::{Error, Result};
use crate::util::seeded_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub colors: usize,
    pub objects: usize,
    pub contexts: usize,
    pub attr_embed_dim: usize,
    /// (subject id, voxel count) pairs.
    pub subjects: Vec<(String, usize)>,
    pub train_stimuli: usize,
    pub test_stimuli: usize,
    pub trials_per_stimulus: usize,
    pub obs_noise_std: f64,
    pub v_align: usize,
    pub seed: u64,
    /// Also write `images/{id}.png` renders.
    #[serde(default)]
    pub render_images: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            colors: 8,
            objects: 16,
            contexts: 8,
            attr_embed_dim: 48,
            subjects: vec![("sub01".into(), 496), ("sub02".into(), 444)],
            train_stimuli: 512,
            test_stimuli: 128,
            trials_per_stimulus: 3,
            obs_noise_std: 0.6,
            v_align: 512,
            seed: 7,
            render_images: false,
        }
    }
}

/// Generate the dataset under `dir`. Byte-identical across runs with the
/// same config.
pub fn make_synth(config: &SynthConfig, dir: &Path) -> Result<DatasetManifest> {
    let total = config.train_stimuli + config.test_stimuli;
    let combos = config.colors * config.objects * config.contexts;
    if total > combos {
        return Err(Error::Config(format!(
            "requested {total} stimuli but only {combos} attribute combinations exist"
        )));
    }
    if config.trials_per_stimulus == 0 {
        return Err(Error::Config("trials_per_stimulus must be positive".into()));
    }
    for (sid, v_s) in &config.subjects {
        if *v_s > config.v_align {
            return Err(Error::Config(format!(
                "subject {sid} voxel count {v_s} exceeds v_align {}",
                config.v_align
            )));
        }
    }
    let world = SynthWorld::new(
        config.colors,
        config.objects,
        config.contexts,
        config.attr_embed_dim,
        config.obs_noise_std,
        &config.subjects,
        config.seed,
    )?;

    // Deterministic triple sample: shuffle the full grid, take the head.
    let mut triples: Vec<(usize, usize, usize)> = Vec::with_capacity(combos);
    for c in 0..config.colors {
        for o in 0..config.objects {
            for k in 0..config.contexts {
                triples.push((c, o, k));
            }
        }
    }
    let mut rng = seeded_rng(config.seed, "stimulus-triples");
    triples.shuffle(&mut rng);
    triples.truncate(total);

    let stimuli: Vec<StimulusEntry> = triples
        .iter()
        .enumerate()
        .map(|(i, &(c, o, k))| StimulusEntry {
            id: format!("s{i:04}"),
            color: world.color_vocab[c].clone(),
            object: world.object_vocab[o].clone(),
            context: world.context_vocab[k].clone(),
        })
        .collect();
    let train_ids: Vec<String> = stimuli[..config.train_stimuli].iter().map(|s| s.id.clone()).collect();
    let test_ids: Vec<String> = stimuli[config.train_stimuli..].iter().map(|s| s.id.clone()).collect();

    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    // Voxel binaries: per subject, per split; row = one trial (f32 LE),
    // stimuli in split order, repetitions consecutive.
    let mut subject_entries = Vec::new();
    for (sid, _v_s) in &config.subjects {
        let sub_dir = dir.join(sid);
        std::fs::create_dir_all(&sub_dir).map_err(|e| Error::io(sub_dir.display().to_string(), e))?;
        for (split, ids) in [("train", &train_ids), ("test", &test_ids)] {
            let path = sub_dir.join(format!("{split}.f32"));
            let mut buf: Vec<u8> = Vec::new();
            for stim_id in ids.iter() {
                let entry = stimuli.iter().find(|s| &s.id == stim_id).unwrap();
                let feature = world.feature(&entry.color, &entry.object, &entry.context)?;
                for rep in 0..config.trials_per_stimulus {
                    let trial = world.trial(sid, stim_id, rep as u32, &feature)?;
                    for v in trial {
                        buf.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
            }
            let mut f =
                std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            f.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        subject_entries.push(SubjectEntry {
            id: sid.clone(),
            voxel_count: *_v_s,
            train_voxels: format!("{sid}/train.f32"),
            test_voxels: format!("{sid}/test.f32"),
        });
    }

    // Captions, one JSON record per stimulus.
    let cap_path = dir.join("captions.jsonl");
    {
        let mut out = String::new();
        for s in &stimuli {
            let set = CaptionSet {
                stimulus_id: s.id.clone(),
                captions: SynthWorld::captions(&s.color, &s.object, &s.context),
            };
            debug_assert_eq!(set.captions.len(), CAPTIONS_PER_STIMULUS);
            out.push_str(
                &serde_json::to_string(&set)
                    .map_err(|e| Error::Format(format!("caption encode: {e}")))?,
            );
            out.push('\n');
        }
        std::fs::write(&cap_path, out).map_err(|e| Error::io(cap_path.display().to_string(), e))?;
    }

    // Ground-truth feature vectors, manifest stimulus order.
    let feat_path = dir.join("imgfeat.f32");
    {
        let mut buf: Vec<u8> = Vec::new();
        for s in &stimuli {
            let feature = world.feature(&s.color, &s.object, &s.context)?;
            for v in feature {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        std::fs::write(&feat_path, buf).map_err(|e| Error::io(feat_path.display().to_string(), e))?;
    }

    if config.render_images {
        let img_dir = dir.join("images");
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(img_dir.display().to_string(), e))?;
        for s in &stimuli {
            let px = world.render(&s.color, &s.object, &s.context)?;
            let bytes: Vec<u8> = px.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
            let img = image::RgbImage::from_raw(IMG_SIZE as u32, IMG_SIZE as u32, bytes)
                .ok_or_else(|| Error::Format("render buffer size".into()))?;
            let p = img_dir.join(format!("{}.png", s.id));
            img.save(&p).map_err(|e| Error::Format(format!("png write {}: {e}", p.display())))?;
        }
    }

    let manifest = DatasetManifest {
        version: 1,
        seed: config.seed,
        v_align: config.v_align,
        attr_embed_dim: config.attr_embed_dim,
        obs_noise_std: config.obs_noise_std,
        trials_per_stimulus: config.trials_per_stimulus,
        colors: world.color_vocab.clone(),
        objects: world.object_vocab.clone(),
        contexts: world.context_vocab.clone(),
        captions_file: "captions.jsonl".into(),
        image_features_file: "imgfeat.f32".into(),
        subjects: subject_entries,
        splits: SplitLists { train: train_ids, test: test_ids },
        stimuli,
    };
    let man_path = dir.join("manifest");
    std::fs::write(&man_path, manifest.to_toml()?)
        .map_err(|e| Error::io(man_path.display().to_string(), e))?;
    Ok(manifest)
}
