//! The synthetic brain-image-caption world.
//!
//! A stimulus is a (color, object, context) triple. Its ground-truth feature
//! vector is the scaled sum of fixed random attribute embeddings; per-subject
//! voxel responses are a fixed random linear mixture of that feature plus
//! observation noise; captions come from five fixed paraphrase templates; the
//! rendered stimulus is a 32x32 RGB scene (context background, object glyph,
//! color fill). Everything is a pure function of (vocab sizes, seed).

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::util::seeded_rng;
use rand_distr::{Distribution, Normal};

pub const IMG_SIZE: usize = 32;
pub const CAPTIONS_PER_STIMULUS: usize = 5;

const COLOR_WORDS: &[&str] = &[
    "red", "blue", "green", "yellow", "purple", "orange", "pink", "brown", "black", "white",
    "gray", "teal",
];
const OBJECT_WORDS: &[&str] = &[
    "cube", "ball", "cone", "star", "ring", "cross", "heart", "moon", "tree", "fish", "bird",
    "boat", "lamp", "drum", "kite", "shell", "leaf", "bell", "crown", "arrow",
];
const CONTEXT_WORDS: &[&str] = &[
    "forest", "desert", "beach", "meadow", "cave", "harbor", "garden", "street", "kitchen",
    "attic", "plaza", "tundra",
];

/// Fully seeded world definition shared by generation and loading.
pub struct SynthWorld {
    pub color_vocab: Vec<String>,
    pub object_vocab: Vec<String>,
    pub context_vocab: Vec<String>,
    pub attr_embed_dim: usize,
    pub obs_noise_std: f64,
    pub seed: u64,
    /// One embedding row per attribute token, keyed by token string.
    attr_embeddings: Vec<(String, Vec<f64>)>,
    /// Per-subject mixing matrix, V_s x attr_embed_dim.
    subject_mixers: Vec<(String, Matrix)>,
}

impl SynthWorld {
    pub fn new(
        colors: usize,
        objects: usize,
        contexts: usize,
        attr_embed_dim: usize,
        obs_noise_std: f64,
        subjects: &[(String, usize)],
        seed: u64,
    ) -> Result<Self> {
        if colors == 0 || objects == 0 || contexts == 0 {
            return Err(Error::Config("vocab sizes must be positive".into()));
        }
        if colors > COLOR_WORDS.len() || objects > OBJECT_WORDS.len() || contexts > CONTEXT_WORDS.len()
        {
            return Err(Error::Config(format!(
                "vocab sizes exceed the built-in word lists ({} colors, {} objects, {} contexts)",
                COLOR_WORDS.len(),
                OBJECT_WORDS.len(),
                CONTEXT_WORDS.len()
            )));
        }
        if obs_noise_std < 0.0 {
            return Err(Error::Config("obs_noise_std must be nonnegative".into()));
        }
        let color_vocab: Vec<String> = COLOR_WORDS[..colors].iter().map(|s| s.to_string()).collect();
        let object_vocab: Vec<String> = OBJECT_WORDS[..objects].iter().map(|s| s.to_string()).collect();
        let context_vocab: Vec<String> =
            CONTEXT_WORDS[..contexts].iter().map(|s| s.to_string()).collect();

        let mut attr_embeddings = Vec::new();
        for token in color_vocab.iter().chain(&object_vocab).chain(&context_vocab) {
            let mut rng = seeded_rng(seed, &format!("attr:{token}"));
            let normal = Normal::new(0.0, 1.0).unwrap();
            let v: Vec<f64> = (0..attr_embed_dim).map(|_| normal.sample(&mut rng)).collect();
            attr_embeddings.push((token.clone(), v));
        }

        let mut subject_mixers = Vec::new();
        for (sid, v_s) in subjects {
            let mut rng = seeded_rng(seed, &format!("mixer:{sid}"));
            let std = 1.0 / (attr_embed_dim as f64).sqrt();
            subject_mixers.push((sid.clone(), Matrix::randn(*v_s, attr_embed_dim, std, &mut rng)));
        }

        Ok(Self {
            color_vocab,
            object_vocab,
            context_vocab,
            attr_embed_dim,
            obs_noise_std,
            seed,
            attr_embeddings,
            subject_mixers,
        })
    }

    /// Rebuild the world a manifest was generated from. Bit-identical to the
    /// original construction because every draw is keyed by (seed, name).
    pub fn from_manifest(m: &super::DatasetManifest) -> Result<Self> {
        let subjects: Vec<(String, usize)> = m
            .subjects
            .iter()
            .map(|s| (s.id.clone(), s.voxel_count))
            .collect();
        let w = Self::new(
            m.colors.len(),
            m.objects.len(),
            m.contexts.len(),
            m.attr_embed_dim,
            m.obs_noise_std,
            &subjects,
            m.seed,
        )?;
        if w.color_vocab != m.colors || w.object_vocab != m.objects || w.context_vocab != m.contexts {
            return Err(Error::Format(
                "manifest vocabulary does not match the seeded word lists".into(),
            ));
        }
        Ok(w)
    }

    pub fn attr_embedding(&self, token: &str) -> Option<&[f64]> {
        self.attr_embeddings
            .iter()
            .find(|(t, _)| t == token)
            .map(|(_, v)| v.as_slice())
    }

    pub fn subject_mixer(&self, subject: &str) -> Option<&Matrix> {
        self.subject_mixers
            .iter()
            .find(|(s, _)| s == subject)
            .map(|(_, m)| m)
    }

    /// Ground-truth feature vector of a triple: scaled sum of its attribute
    /// embeddings.
    pub fn feature(&self, color: &str, object: &str, context: &str) -> Result<Vec<f64>> {
        let scale = 1.0 / 3f64.sqrt();
        let mut v = vec![0.0; self.attr_embed_dim];
        for token in [color, object, context] {
            let e = self
                .attr_embedding(token)
                .ok_or_else(|| Error::Invalid(format!("unknown attribute token '{token}'")))?;
            for (a, b) in v.iter_mut().zip(e) {
                *a += b * scale;
            }
        }
        Ok(v)
    }

    /// Noiseless voxel response of `subject` to a feature vector.
    pub fn clean_response(&self, subject: &str, feature: &[f64]) -> Result<Vec<f64>> {
        let mixer = self
            .subject_mixer(subject)
            .ok_or_else(|| Error::Invalid(format!("unknown subject '{subject}'")))?;
        let f = Matrix::from_vec(feature.len(), 1, feature.to_vec());
        Ok(mixer.matmul_nn(&f).data().to_vec())
    }

    /// One noisy trial: clean response plus per-trial Gaussian noise, keyed
    /// by (seed, subject, stimulus, repetition).
    pub fn trial(
        &self,
        subject: &str,
        stimulus_id: &str,
        repetition: u32,
        feature: &[f64],
    ) -> Result<Vec<f64>> {
        let mut x = self.clean_response(subject, feature)?;
        if self.obs_noise_std > 0.0 {
            let mut rng = seeded_rng(self.seed, &format!("trial:{subject}:{stimulus_id}:{repetition}"));
            let normal = Normal::new(0.0, self.obs_noise_std).unwrap();
            for v in x.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        Ok(x)
    }

    /// The five paraphrase templates instantiated for a triple.
    pub fn captions(color: &str, object: &str, context: &str) -> Vec<String> {
        vec![
            format!("a {color} {object} in the {context}"),
            format!("there is a {color} {object} at the {context}"),
            format!("the {object} in the {context} is {color}"),
            format!("one {color} {object} sits near the {context}"),
            format!("a photo of the {color} {object} by the {context}"),
        ]
    }

    pub fn color_index(&self, token: &str) -> Option<usize> {
        self.color_vocab.iter().position(|t| t == token)
    }

    pub fn object_index(&self, token: &str) -> Option<usize> {
        self.object_vocab.iter().position(|t| t == token)
    }

    pub fn context_index(&self, token: &str) -> Option<usize> {
        self.context_vocab.iter().position(|t| t == token)
    }

    /// Render the 32x32 RGB stimulus for a triple: context background with a
    /// stripe texture, object glyph mask, color fill. Pixels in [0, 1],
    /// row-major RGB.
    pub fn render(&self, color: &str, object: &str, context: &str) -> Result<Vec<f64>> {
        let ci = self
            .color_index(color)
            .ok_or_else(|| Error::Invalid(format!("unknown color '{color}'")))?;
        let oi = self
            .object_index(object)
            .ok_or_else(|| Error::Invalid(format!("unknown object '{object}'")))?;
        let ki = self
            .context_index(context)
            .ok_or_else(|| Error::Invalid(format!("unknown context '{context}'")))?;
        Ok(render_triple(ci, oi, ki))
    }
}

/// Distinct hues for color fills.
fn color_rgb(ci: usize) -> [f64; 3] {
    const PALETTE: &[[f64; 3]] = &[
        [0.90, 0.15, 0.15], // red
        [0.15, 0.25, 0.90], // blue
        [0.10, 0.75, 0.20], // green
        [0.95, 0.85, 0.10], // yellow
        [0.60, 0.20, 0.80], // purple
        [0.95, 0.55, 0.10], // orange
        [0.95, 0.55, 0.75], // pink
        [0.55, 0.35, 0.15], // brown
        [0.05, 0.05, 0.05], // black
        [0.95, 0.95, 0.95], // white
        [0.50, 0.50, 0.50], // gray
        [0.10, 0.65, 0.65], // teal
    ];
    PALETTE[ci % PALETTE.len()]
}

/// Muted background colors for contexts.
fn context_rgb(ki: usize) -> [f64; 3] {
    const PALETTE: &[[f64; 3]] = &[
        [0.12, 0.30, 0.14],
        [0.75, 0.65, 0.40],
        [0.80, 0.75, 0.55],
        [0.35, 0.55, 0.25],
        [0.20, 0.18, 0.22],
        [0.30, 0.40, 0.55],
        [0.30, 0.50, 0.35],
        [0.45, 0.45, 0.48],
        [0.60, 0.55, 0.45],
        [0.40, 0.30, 0.25],
        [0.55, 0.50, 0.60],
        [0.70, 0.75, 0.80],
    ];
    PALETTE[ki % PALETTE.len()]
}

/// Glyph mask for object `oi`: a filled regular star/polygon whose vertex
/// count and spikiness vary with the index.
fn glyph_mask(oi: usize) -> Vec<bool> {
    let n = IMG_SIZE;
    let cx = (n as f64 - 1.0) / 2.0;
    let cy = cx;
    let points = 3 + (oi % 8); // 3..10 vertices
    let inner = if oi / 8 == 0 { 0.95 } else { 0.45 }; // polygon vs star
    let r_outer = 11.0;
    let mut mask = vec![false; n * n];
    for y in 0..n {
        for x in 0..n {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let r = (dx * dx + dy * dy).sqrt();
            if r < 1e-9 {
                mask[y * n + x] = true;
                continue;
            }
            let theta = dy.atan2(dx);
            // angular distance to the nearest outer vertex, folded into one sector
            let sector = std::f64::consts::TAU / points as f64;
            let a = ((theta % sector) + sector) % sector;
            let frac = (a / sector - 0.5).abs() * 2.0; // 1 at vertex, 0 mid-edge
            let boundary = r_outer * (inner + (1.0 - inner) * frac);
            if r <= boundary {
                mask[y * n + x] = true;
            }
        }
    }
    mask
}

fn render_triple(ci: usize, oi: usize, ki: usize) -> Vec<f64> {
    let n = IMG_SIZE;
    let bg = context_rgb(ki);
    let fg = color_rgb(ci);
    let mask = glyph_mask(oi);
    // stripe texture direction/phase varies with context
    let stripe_period = 4 + (ki % 4);
    let mut img = vec![0.0; n * n * 3];
    for y in 0..n {
        for x in 0..n {
            let stripe = if ((x + y * (ki % 2 + 1)) / stripe_period) % 2 == 0 { 0.05 } else { -0.05 };
            let p = (y * n + x) * 3;
            if mask[y * n + x] {
                img[p] = fg[0];
                img[p + 1] = fg[1];
                img[p + 2] = fg[2];
            } else {
                img[p] = (bg[0] + stripe).clamp(0.0, 1.0);
                img[p + 1] = (bg[1] + stripe).clamp(0.0, 1.0);
                img[p + 2] = (bg[2] + stripe).clamp(0.0, 1.0);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> SynthWorld {
        SynthWorld::new(
            4,
            6,
            4,
            16,
            0.5,
            &[("subA".to_string(), 64), ("subB".to_string(), 48)],
            42,
        )
        .unwrap()
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = small_world();
        let b = small_world();
        assert_eq!(a.attr_embedding("red"), b.attr_embedding("red"));
        assert_eq!(
            a.subject_mixer("subA").unwrap().data(),
            b.subject_mixer("subA").unwrap().data()
        );
        let fa = a.feature("red", "ball", "desert").unwrap();
        let fb = b.feature("red", "ball", "desert").unwrap();
        assert_eq!(fa, fb);
        let ta = a.trial("subA", "s0001", 2, &fa).unwrap();
        let tb = b.trial("subA", "s0001", 2, &fb).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn zero_noise_trials_are_identical() {
        let w = SynthWorld::new(2, 2, 2, 8, 0.0, &[("s".to_string(), 32)], 7).unwrap();
        let f = w.feature("red", "cube", "forest").unwrap();
        let t0 = w.trial("s", "x", 0, &f).unwrap();
        let t1 = w.trial("s", "x", 1, &f).unwrap();
        assert_eq!(t0, t1);
    }

    #[test]
    fn captions_have_five_templates_mentioning_all_attributes() {
        let caps = SynthWorld::captions("red", "ball", "desert");
        assert_eq!(caps.len(), CAPTIONS_PER_STIMULUS);
        for c in &caps {
            assert!(c.contains("red") && c.contains("ball") && c.contains("desert"));
            assert!(!c.trim().is_empty());
        }
        // templates are distinct paraphrases
        let mut uniq = caps.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), CAPTIONS_PER_STIMULUS);
    }

    #[test]
    fn renders_differ_across_attributes() {
        let w = small_world();
        let a = w.render("red", "ball", "desert").unwrap();
        let b = w.render("blue", "ball", "desert").unwrap();
        let c = w.render("red", "cube", "desert").unwrap();
        let d = w.render("red", "ball", "forest").unwrap();
        assert_eq!(a.len(), IMG_SIZE * IMG_SIZE * 3);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
