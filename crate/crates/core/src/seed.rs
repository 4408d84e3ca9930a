//! Named seed derivation: every random stream is a function of the root seed,
//! a component name and an index.

use sha2::{Digest, Sha256};

pub fn derive_seed(root: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
