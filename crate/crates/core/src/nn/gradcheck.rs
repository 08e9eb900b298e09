//! Central finite-difference verification of analytic gradients.

use super::params::{ParamId, ParamSet};
use super::tape::Grads;
use rand::seq::SliceRandom;
use crate::util::seeded_rng;

/// Compare analytic gradients against central finite differences on a random
/// `fraction` of the entries of `check_ids` (at least one entry per tensor).
/// Returns the worst relative error observed.
///
/// `f` must be a pure function of the parameter values.
pub fn check_gradients<F>(
    params: &mut ParamSet,
    check_ids: &[ParamId],
    fraction: f64,
    f: F,
    seed: u64,
) -> f64
where
    F: Fn(&ParamSet) -> (f64, Grads),
{
    let (_, grads) = f(params);
    let mut rng = seeded_rng(seed, "gradcheck");
    let mut worst: f64 = 0.0;
    for &pid in check_ids {
        let n = params.get(pid).len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        for &i in idx.iter().take(take) {
            let orig = params.get(pid).data()[i];
            let h = 1e-5 * orig.abs().max(1.0);

            params.get_mut(pid).data_mut()[i] = orig + h;
            let (lp, _) = f(params);
            params.get_mut(pid).data_mut()[i] = orig - h;
            let (lm, _) = f(params);
            params.get_mut(pid).data_mut()[i] = orig;

            let fd = (lp - lm) / (2.0 * h);
            let an = grads.get(pid).map(|g| g.data()[i]).unwrap_or(0.0);
            let denom = an.abs().max(fd.abs()).max(1e-6);
            let rel = (an - fd).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
