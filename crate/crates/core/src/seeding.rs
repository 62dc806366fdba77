//! Root-seed splitting.
//!
//! Every component draws from its own generator, seeded with the first eight
//! bytes (little-endian) of `SHA-256(root_seed as u64 LE || component name)`.
//! Indexed streams append `"#" || index as u64 LE` to the name bytes. The
//! derivation depends only on the name, so sub-seeds stay stable when
//! components are added or reordered.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(root: u64, component: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(component.as_bytes());
    first_u64(&hasher.finalize())
}

pub fn derive_indexed_seed(root: u64, component: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(component.as_bytes());
    hasher.update(b"#");
    hasher.update(index.to_le_bytes());
    first_u64(&hasher.finalize())
}

fn first_u64(digest: &[u8]) -> u64 {
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn component_rng(root: u64, component: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(root, component))
}

pub fn indexed_rng(root: u64, component: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_indexed_seed(root, component, index))
}
