//! Stable content hashing for config fingerprints and model/spec guards.

use serde::Serialize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice. Not cryptographic; used as a stable fingerprint.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of a serializable value, independent of struct field order.
///
/// The value is routed through `serde_json::Value`, whose object maps are
/// sorted by key, so two configs that differ only in field ordering hash
/// identically.
pub fn config_hash<T: Serialize>(value: &T) -> u64 {
    let canon = serde_json::to_value(value).expect("serializable config");
    let bytes = serde_json::to_vec(&canon).expect("canonical json");
    fnv1a64(&bytes)
}

/// Mix two 64-bit values into a well-distributed child seed (splitmix64).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
