//! File formats and configuration: the float image container, the plain-text
//! run configuration, run manifests and 8-bit previews.

pub mod config;
pub mod image_file;
pub mod manifest;
pub mod pgm;

pub use config::RunConfig;
pub use image_file::{read_image, write_image};
pub use manifest::Manifest;

/// FNV-1a 64-bit hash; used for config fingerprints in manifests and
/// checkpoint provenance.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
