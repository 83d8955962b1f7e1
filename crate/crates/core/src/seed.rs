//! Seed derivation.
//!
//! Every random stage gets its own stream: the stage seed is the first eight
//! bytes (little endian) of `SHA-256(global_seed_le || stage_name)`. This keeps
//! stages decorrelated while making every stream a pure function of the one
//! global seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stage names used by the pipelines.
pub mod stage {
    pub const AUTOENCODER_INIT: &str = "autoencoder/init";
    pub const AUTOENCODER_TRAIN: &str = "autoencoder/train";
    pub const FCM_INIT: &str = "fcm/init";
    pub const SVD: &str = "svd/sketch";
}

pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
