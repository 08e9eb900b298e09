//! AdamW with decoupled weight decay and a linear-warmup + cosine-decay
//! learning-rate schedule.

use super::matrix::Matrix;
use super::params::{ParamId, ParamSet};
use super::tape::Grads;

#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if self.total_steps == 0 {
            return self.base;
        }
        if step < self.warmup_steps {
            return self.base * (step + 1) as f64 / self.warmup_steps.max(1) as f64;
        }
        let span = (self.total_steps.saturating_sub(self.warmup_steps)).max(1) as f64;
        let t = (step - self.warmup_steps) as f64 / span;
        let t = t.clamp(0.0, 1.0);
        0.5 * self.base * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

pub struct AdamW {
    pub schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: usize,
    m: Vec<Option<Matrix>>,
    v: Vec<Option<Matrix>>,
    trainable: Vec<ParamId>,
}

impl AdamW {
    pub fn new(n_params: usize, trainable: Vec<ParamId>, schedule: LrSchedule, weight_decay: f64) -> Self {
        Self {
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: (0..n_params).map(|_| None).collect(),
            v: (0..n_params).map(|_| None).collect(),
            trainable,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.schedule.lr(self.step)
    }

    /// Apply one update. Only the declared trainable parameters move; any
    /// gradient for other parameters is ignored.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) {
        let lr = self.schedule.lr(self.step);
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for &pid in &self.trainable {
            let g = match grads.get(pid) {
                Some(g) => g,
                None => continue,
            };
            let value = params.get(pid);
            if self.m[pid].is_none() {
                self.m[pid] = Some(Matrix::zeros(value.rows(), value.cols()));
                self.v[pid] = Some(Matrix::zeros(value.rows(), value.cols()));
            }
            let m = self.m[pid].as_mut().unwrap();
            let v = self.v[pid].as_mut().unwrap();
            let value = params.get_mut(pid);
            for i in 0..value.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                let x = value.data()[i];
                value.data_mut()[i] = x - lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_warms_up_then_decays() {
        let s = LrSchedule { base: 1.0, warmup_steps: 10, total_steps: 110 };
        assert!(s.lr(0) < s.lr(5));
        assert!((s.lr(9) - 1.0).abs() < 1e-12);
        assert!(s.lr(50) < 1.0);
        assert!(s.lr(109) < s.lr(50));
        assert!(s.lr(109) >= 0.0);
    }

    #[test]
    fn zero_lr_leaves_parameters_frozen() {
        let mut params = ParamSet::new();
        let w = params.add_init("w", 3, 3, 1);
        let before = params.digest();
        let mut opt = AdamW::new(
            params.len(),
            vec![w],
            LrSchedule { base: 0.0, warmup_steps: 0, total_steps: 10 },
            0.05,
        );
        // fake gradient of ones
        let f = |ps: &ParamSet| {
            let mut t = crate::nn::tape::Tape::new(ps);
            let wn = t.param(w);
            let target = Matrix::zeros(3, 3);
            let loss = t.mse_rows(wn, &target, &[true, true, true]);
            t.backward(loss)
        };
        let grads = f(&params);
        opt.step(&mut params, &grads);
        assert_eq!(params.digest(), before);
    }
}
