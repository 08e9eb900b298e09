//! Voxel preprocessing: alignment + patching, trial averaging, train-split
//! standardization, and seeded noise injection.

use super::{AlignedFmri, FmriSample, PatchSequence, REPETITION_AVERAGED};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::util::seeded_rng;
use rand_distr::{Distribution, Normal};

/// Zero-pad to `v_align` and slice into contiguous patches.
pub fn align_and_patchify(
    sample: &FmriSample,
    v_align: usize,
    patch_size: usize,
) -> Result<PatchSequence> {
    let v_s = sample.voxels.len();
    if v_align < v_s {
        return Err(Error::Invalid(format!(
            "v_align {v_align} is smaller than the sample length {v_s}"
        )));
    }
    if patch_size == 0 || v_align % patch_size != 0 {
        return Err(Error::Invalid(format!(
            "v_align {v_align} is not divisible by patch_size {patch_size}"
        )));
    }
    let mut padded = sample.voxels.clone();
    padded.resize(v_align, 0.0);
    let p = v_align / patch_size;
    Ok(PatchSequence { patches: Matrix::from_vec(p, patch_size, padded), source_len: v_s })
}

/// Flatten patches back into the aligned voxel vector (exact inverse of the
/// padding + slicing).
pub fn unpatchify(seq: &PatchSequence) -> Vec<f64> {
    seq.patches.data().to_vec()
}

pub fn align(sample: &FmriSample, v_align: usize) -> Result<AlignedFmri> {
    if v_align < sample.voxels.len() {
        return Err(Error::Invalid(format!(
            "v_align {v_align} is smaller than the sample length {}",
            sample.voxels.len()
        )));
    }
    let mut voxels = sample.voxels.clone();
    let source_len = voxels.len();
    voxels.resize(v_align, 0.0);
    Ok(AlignedFmri {
        voxels,
        subject_id: sample.subject_id.clone(),
        stimulus_id: sample.stimulus_id.clone(),
        repetition: sample.repetition,
        source_len,
    })
}

/// Element-wise mean over repetitions of one stimulus.
pub fn average_repetitions(samples: &[FmriSample]) -> Result<FmriSample> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Invalid("cannot average an empty trial list".into()))?;
    let n = first.voxels.len();
    let mut mean = vec![0.0; n];
    for s in samples {
        if s.subject_id != first.subject_id || s.stimulus_id != first.stimulus_id {
            return Err(Error::Invalid(format!(
                "mixed identities in trial average: {}/{} vs {}/{}",
                first.subject_id, first.stimulus_id, s.subject_id, s.stimulus_id
            )));
        }
        if s.voxels.len() != n {
            return Err(Error::Shape("trial length mismatch in average".into()));
        }
        for (m, v) in mean.iter_mut().zip(&s.voxels) {
            *m += v;
        }
    }
    let inv = 1.0 / samples.len() as f64;
    for m in mean.iter_mut() {
        *m *= inv;
    }
    Ok(FmriSample {
        subject_id: first.subject_id.clone(),
        stimulus_id: first.stimulus_id.clone(),
        repetition: REPETITION_AVERAGED,
        voxels: mean,
    })
}

/// Per-voxel mean and (population) std computed on the training split only.
#[derive(Debug, Clone)]
pub struct TrainStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl TrainStats {
    pub fn fit(train: &[FmriSample]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Invalid("cannot fit statistics on an empty split".into()))?;
        let n = first.voxels.len();
        let count = train.len() as f64;
        let mut mean = vec![0.0; n];
        for s in train {
            if s.voxels.len() != n {
                return Err(Error::Shape("voxel length mismatch in statistics".into()));
            }
            for (m, v) in mean.iter_mut().zip(&s.voxels) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }
        let mut var = vec![0.0; n];
        for s in train {
            for ((vv, v), m) in var.iter_mut().zip(&s.voxels).zip(&mean) {
                let d = v - m;
                *vv += d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
        Ok(Self { mean, std })
    }
}

/// Z-score a sample with train statistics; voxels whose train std is under
/// the floor map to 0.
pub fn standardize(sample: &FmriSample, stats: &TrainStats) -> Result<FmriSample> {
    if sample.voxels.len() != stats.mean.len() {
        return Err(Error::Shape(format!(
            "statistics length {} does not match sample length {}",
            stats.mean.len(),
            sample.voxels.len()
        )));
    }
    let voxels = sample
        .voxels
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(&v, (&m, &s))| if s < STD_FLOOR { 0.0 } else { (v - m) / s })
        .collect();
    Ok(FmriSample { voxels, ..sample.clone() })
}

/// How the noise scale of [`inject_noise`] is chosen.
#[derive(Debug, Clone, Copy)]
pub enum BaseStd {
    /// Mean of absolute voxel values of the given (raw) signal.
    MeanAbsSignal,
    Fixed(f64),
}

impl BaseStd {
    pub fn resolve(&self, sample: &FmriSample) -> f64 {
        match self {
            BaseStd::MeanAbsSignal => {
                sample.voxels.iter().map(|v| v.abs()).sum::<f64>() / sample.voxels.len().max(1) as f64
            }
            BaseStd::Fixed(s) => *s,
        }
    }
}

/// Add zero-mean Gaussian noise with std `coeff * base_std`. The noise draw
/// is keyed by (seed, identity) only, so different coefficients scale the
/// same noise vector and `coeff = 0` returns the input bit-identically.
pub fn inject_noise(
    sample: &FmriSample,
    coeff: f64,
    base_std_mode: BaseStd,
    seed: u64,
) -> Result<FmriSample> {
    if !sample.all_finite() {
        return Err(Error::Invalid("non-finite voxel values in noise injection".into()));
    }
    if coeff < 0.0 {
        return Err(Error::Invalid("noise coefficient must be nonnegative".into()));
    }
    if coeff == 0.0 {
        return Ok(sample.clone());
    }
    let base = base_std_mode.resolve(sample);
    let std = coeff * base;
    let mut out = sample.clone();
    if std > 0.0 {
        let mut rng = seeded_rng(
            seed,
            &format!(
                "inject:{}:{}:{}",
                sample.subject_id, sample.stimulus_id, sample.repetition
            ),
        );
        let normal = Normal::new(0.0, 1.0).unwrap();
        for v in out.voxels.iter_mut() {
            *v += std * normal.sample(&mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(voxels: Vec<f64>) -> FmriSample {
        FmriSample {
            subject_id: "subA".into(),
            stimulus_id: "s0001".into(),
            repetition: 0,
            voxels,
        }
    }

    #[test]
    fn paper_scale_alignment_example() {
        // Subject-1-sized vector: 15724 voxels aligned to 15728, patch 16.
        let s = sample(vec![1.0; 15724]);
        let seq = align_and_patchify(&s, 15728, 16).unwrap();
        assert_eq!(seq.patch_count(), 983);
        assert_eq!(seq.patch_size(), 16);
        let last = seq.patches.row(982);
        assert_eq!(&last[12..], &[0.0, 0.0, 0.0, 0.0]);
        assert!(last[..12].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn no_padding_when_lengths_match() {
        let s = sample((0..1024).map(|i| i as f64).collect());
        let seq = align_and_patchify(&s, 1024, 16).unwrap();
        assert_eq!(seq.patch_count(), 64);
        assert_eq!(unpatchify(&seq), s.voxels);
    }

    #[test]
    fn round_trip_equals_padded_input() {
        let s = sample((0..1020).map(|i| (i as f64).sin()).collect());
        let seq = align_and_patchify(&s, 1024, 16).unwrap();
        let flat = unpatchify(&seq);
        assert_eq!(&flat[..1020], s.voxels.as_slice());
        assert_eq!(&flat[1020..], &[0.0; 4]);
    }

    #[test]
    fn alignment_preconditions() {
        let s = sample(vec![0.0; 100]);
        assert!(align_and_patchify(&s, 99, 16).is_err());
        assert!(align_and_patchify(&s, 100, 16).is_err()); // 100 % 16 != 0
    }

    #[test]
    fn averaging_is_idempotent_and_linear() {
        let a = sample(vec![0.0, 2.0]);
        let b = sample(vec![2.0, 0.0]);
        let avg = average_repetitions(&[a.clone(), b]).unwrap();
        assert_eq!(avg.voxels, vec![1.0, 1.0]);
        assert_eq!(avg.repetition, REPETITION_AVERAGED);
        let same = average_repetitions(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(same.voxels, a.voxels);
    }

    #[test]
    fn averaging_rejects_mixed_and_empty() {
        let a = sample(vec![1.0]);
        let mut b = sample(vec![1.0]);
        b.stimulus_id = "other".into();
        assert!(average_repetitions(&[a, b]).is_err());
        assert!(average_repetitions(&[]).is_err());
    }

    #[test]
    fn standardization_zero_mean_unit_std_on_train() {
        let mut rng = crate::util::seeded_rng(5, "std-test");
        let normal = Normal::new(3.0, 2.5).unwrap();
        let train: Vec<FmriSample> = (0..200)
            .map(|i| {
                let mut s = sample((0..16).map(|_| normal.sample(&mut rng)).collect());
                s.repetition = i;
                s
            })
            .collect();
        let stats = TrainStats::fit(&train).unwrap();
        let z: Vec<FmriSample> = train.iter().map(|s| standardize(s, &stats).unwrap()).collect();
        for v in 0..16 {
            let vals: Vec<f64> = z.iter().map(|s| s.voxels[v]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6, "voxel {v} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-6, "voxel {v} std {}", var.sqrt());
        }
    }

    #[test]
    fn constant_voxel_maps_to_zero() {
        let train: Vec<FmriSample> = (0..10).map(|_| sample(vec![4.2, 1.0])).collect();
        let stats = TrainStats::fit(&train).unwrap();
        let z = standardize(&train[0], &stats).unwrap();
        assert_eq!(z.voxels[0], 0.0);
    }

    #[test]
    fn test_split_standardization_uses_train_stats() {
        let train: Vec<FmriSample> = (0..50)
            .map(|i| sample(vec![i as f64, -(i as f64)]))
            .collect();
        let stats = TrainStats::fit(&train).unwrap();
        let test = sample(vec![100.0, 3.0]);
        let z = standardize(&test, &stats).unwrap();
        assert!(z.all_finite());
        assert!(z.voxels[0].abs() > 1e-9); // not centered on the test point
    }

    #[test]
    fn noise_zero_coeff_is_identity() {
        let s = sample(vec![1.5, -2.5, 0.5]);
        let out = inject_noise(&s, 0.0, BaseStd::MeanAbsSignal, 9).unwrap();
        assert_eq!(out.voxels, s.voxels);
    }

    #[test]
    fn noise_scale_matches_coefficient() {
        let n = 20_000;
        let s = sample(vec![2.0; n]); // mean |v| = 2.0
        let out = inject_noise(&s, 1.0, BaseStd::MeanAbsSignal, 11).unwrap();
        let diffs: Vec<f64> = out.voxels.iter().zip(&s.voxels).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 2.0).abs() / 2.0 < 0.03, "empirical std {std}");
    }

    #[test]
    fn noise_sweep_is_reproducible_and_shares_direction() {
        let s = sample((0..64).map(|i| (i as f64 * 0.3).cos()).collect());
        let coeffs: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let run: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|&c| inject_noise(&s, c, BaseStd::MeanAbsSignal, 13).unwrap().voxels)
            .collect();
        let rerun: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|&c| inject_noise(&s, c, BaseStd::MeanAbsSignal, 13).unwrap().voxels)
            .collect();
        assert_eq!(run, rerun);
        assert_eq!(run.len(), 10);
    }
}
