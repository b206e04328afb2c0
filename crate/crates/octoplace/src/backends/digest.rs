use sha2::{Digest, Sha256};

use super::{Capability, Request};

const DOMAIN: &[u8] = b"octoplace-request-v1\0";

/// SHA-256 over the capability name, the text field and the raw image
/// bytes (with dimensions), hex encoded.
///
/// Absent and empty fields hash differently; every field is length- or
/// tag-prefixed so no two requests share an encoding.
pub fn request_digest(capability: Capability, request: &Request<'_>) -> String {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(capability.as_str().as_bytes());
    h.update([0]);
    match request.text {
        Some(text) => {
            h.update(b"T");
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
        }
        None => h.update(b"-"),
    }
    match request.image {
        Some(image) => {
            h.update(b"I");
            h.update(image.width().to_le_bytes());
            h.update(image.height().to_le_bytes());
            h.update(image.pixels());
        }
        None => h.update(b"-"),
    }
    hex::encode(h.finalize())
}
