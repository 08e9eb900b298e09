//! Named parameter storage shared by all models.
//!
//! A model registers its tensors under a name prefix (`be.`, `pfmri.`,
//! `lm.` ...). Digests over name-sorted entries give a stable identity for
//! freeze checks and checkpoint bookkeeping.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::util::digest::Sha256Stream;
use crate::util::seeded_rng;
use std::collections::HashMap;

pub type ParamId = usize;

pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name: {name}"
        );
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    /// Xavier/Glorot-style init keyed by `(seed, name)` so layout changes in
    /// unrelated modules cannot shift this tensor's draw.
    pub fn add_init(&mut self, name: &str, rows: usize, cols: usize, seed: u64) -> ParamId {
        let std = (2.0 / (rows + cols) as f64).sqrt();
        let mut rng = seeded_rng(seed, &format!("init:{name}"));
        self.add(name, Matrix::randn(rows, cols, std, &mut rng))
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        0..self.values.len()
    }

    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(i, _)| i)
            .collect();
        ids.sort();
        ids
    }

    pub fn total_scalars(&self) -> usize {
        self.values.iter().map(|m| m.len()).sum()
    }

    /// Digest over every parameter, ordered by name: name bytes, shape, and
    /// little-endian f64 payload.
    pub fn digest(&self) -> String {
        self.digest_of(&self.ids().collect::<Vec<_>>())
    }

    pub fn digest_prefix(&self, prefix: &str) -> String {
        self.digest_of(&self.ids_with_prefix(prefix))
    }

    pub fn digest_of(&self, ids: &[ParamId]) -> String {
        let mut sorted: Vec<ParamId> = ids.to_vec();
        sorted.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        let mut h = Sha256Stream::new();
        for id in sorted {
            let m = &self.values[id];
            h.update(self.names[id].as_bytes());
            h.update(&(m.rows() as u64).to_le_bytes());
            h.update(&(m.cols() as u64).to_le_bytes());
            h.update_f64s(m.data());
        }
        h.finish_hex()
    }

    /// Copy every entry of `other` into this set under `prefix`.
    pub fn import(&mut self, other: &ParamSet, prefix: &str) {
        for id in other.ids() {
            self.add(format!("{prefix}{}", other.name(id)), other.get(id).clone());
        }
    }

    /// Overwrite values by name from another set. Every entry of `src` must
    /// exist here with the same shape.
    pub fn load_values_from(&mut self, src: &ParamSet) -> Result<()> {
        for sid in src.ids() {
            let name = src.name(sid);
            let id = self
                .id_of(name)
                .ok_or_else(|| Error::Format(format!("unknown parameter '{name}' in checkpoint")))?;
            let (r0, c0) = (self.values[id].rows(), self.values[id].cols());
            let m = src.get(sid);
            if (m.rows(), m.cols()) != (r0, c0) {
                return Err(Error::Shape(format!(
                    "parameter '{name}': expected {r0}x{c0}, checkpoint has {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            self.values[id] = m.clone();
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|m| m.all_finite())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_changes_with_values_not_registration_order() {
        let mut a = ParamSet::new();
        a.add_init("w1", 3, 4, 9);
        a.add_init("w2", 2, 2, 9);
        let mut b = ParamSet::new();
        b.add_init("w2", 2, 2, 9);
        b.add_init("w1", 3, 4, 9);
        assert_eq!(a.digest(), b.digest());

        b.get_mut(0).data_mut()[0] += 1e-12;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn init_is_keyed_by_name() {
        let mut a = ParamSet::new();
        let w = a.add_init("w", 4, 4, 1);
        let v = a.add_init("v", 4, 4, 1);
        assert_ne!(a.get(w).data(), a.get(v).data());
    }
}
