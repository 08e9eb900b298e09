//! Shared plumbing: seeded RNG derivation, content digests, and the
//! sequential/parallel execution switch.

pub mod digest;
pub mod par;
pub mod rng;

pub use digest::{sha256_hex, Sha256Stream};
pub use par::{execution_mode, par_map, set_execution_mode, ExecutionMode};
pub use rng::{derive_seed, seeded_rng};
