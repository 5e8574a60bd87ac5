//! Deterministic feature-hashing embedder.
//!
//! Tokens are the Unicode-whitespace-separated pieces of the lowercased text.
//! Each token is hashed with 64-bit FNV-1a over `salt.to_le_bytes()` followed
//! by the token's UTF-8 bytes. The hash modulo `dim` picks the bucket and its
//! top bit picks the sign (set means -1). The bucket sums are L2-normalized
//! unless every bucket is zero.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(salt: u64, bytes: &[u8]) -> u64 {
    salt.to_le_bytes()
        .iter()
        .chain(bytes)
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Embeds `text` into `dim` buckets. `dim` must be at least 1; a zero `dim`
/// yields an empty vector.
pub fn hash_embed(text: &str, dim: usize, salt: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    let lowered = text.to_lowercase();
    for token in lowered.split_whitespace() {
        let h = fnv1a64(salt, token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        if h >> 63 == 1 {
            v[bucket] -= 1.0;
        } else {
            v[bucket] += 1.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_zero_vector() {
        assert_eq!(hash_embed("", 8, 0), vec![0.0; 8]);
        assert_eq!(hash_embed("  \t\n ", 8, 0), vec![0.0; 8]);
    }

    #[test]
    fn deterministic_and_case_insensitive() {
        let a = hash_embed("The Death Penalty debate", 32, 0);
        assert_eq!(a, hash_embed("The Death Penalty debate", 32, 0));
        assert_eq!(a, hash_embed("the death   penalty\tDEBATE", 32, 0));
    }

    #[test]
    fn salt_changes_output() {
        assert_ne!(hash_embed("death penalty", 64, 0), hash_embed("death penalty", 64, 1));
    }

    #[test]
    fn fnv_reference_vectors() {
        // Standard FNV-1a 64 test vectors, with an all-zero salt prefix removed
        // by checking the plain fold directly.
        let plain = |bytes: &[u8]| {
            bytes
                .iter()
                .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
        };
        assert_eq!(plain(b""), 0xcbf29ce484222325);
        assert_eq!(plain(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(plain(b"foobar"), 0x85944171f73967e8);
    }
}
