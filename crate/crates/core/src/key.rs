//! Hash functions and bit-string prefixes.
//!
//! Keys are routed by the most significant bits of their hash, so a bucket
//! is identified by a [`Prefix`]: the leading `len` bits of every hash it
//! may hold.

use std::fmt;
use std::str::FromStr;

/// Mixing function applied to keys before routing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HashFn {
    /// 64-bit avalanche mixer (multiply / xor-shift finalizer).
    #[default]
    Mix,
    /// The key bits are used as-is. Useful when the bit layout of keys
    /// has to be controlled, e.g. to reproduce hand-drawn tables.
    Identity,
}

impl HashFn {
    #[inline]
    pub fn hash(self, key: u64) -> u64 {
        match self {
            HashFn::Identity => key,
            HashFn::Mix => {
                let mut k = key;
                k ^= k >> 33;
                k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
                k ^= k >> 33;
                k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
                k ^= k >> 33;
                k
            }
        }
    }
}

/// A most-significant-bit-first bit string of length `0..=64`.
///
/// `bits` holds the prefix right-aligned: prefix `01` is `bits = 1, len = 2`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Prefix {
    bits: u64,
    len: u8,
}

impl Prefix {
    /// Builds a prefix from its right-aligned value. Bits above `len` are masked off.
    pub fn new(bits: u64, len: u8) -> Self {
        assert!(len <= 64, "prefix length {len} exceeds 64 bits");
        let bits = if len == 64 { bits } else { bits & ((1u64 << len) - 1) };
        Prefix { bits, len }
    }

    /// The leading `len` bits of `hash`.
    #[inline]
    pub fn of(hash: u64, len: u8) -> Self {
        Prefix { bits: top_bits(hash, len), len }
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> u8 {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    /// Whether `hash` starts with this prefix.
    #[inline]
    pub fn covers(self, hash: u64) -> bool {
        top_bits(hash, self.len) == self.bits
    }

    /// Whether `self` extends `other` (every string with prefix `self` also has prefix `other`).
    pub fn starts_with(self, other: Prefix) -> bool {
        other.len <= self.len && (self.bits >> (self.len - other.len)) == other.bits
    }

    /// The prefix extended by one bit.
    pub fn child(self, bit: bool) -> Self {
        debug_assert!(self.len < 64);
        Prefix { bits: (self.bits << 1) | bit as u64, len: self.len + 1 }
    }

    /// The prefix padded with zeros to a full 64-bit word.
    pub fn left_aligned(self) -> u64 {
        if self.len == 0 {
            0
        } else {
            self.bits << (64 - self.len as u32)
        }
    }

    /// Range of directory indices `[start, end)` this prefix owns in a
    /// directory of depth `depth >= len`.
    pub fn dir_range(self, depth: u8) -> std::ops::Range<usize> {
        debug_assert!(depth >= self.len);
        let shift = (depth - self.len) as u32;
        let start = (self.bits << shift) as usize;
        start..start + (1usize << shift)
    }
}

/// The `len` most significant bits of `word`, right-aligned.
#[inline]
pub(crate) fn top_bits(word: u64, len: u8) -> u64 {
    if len == 0 {
        0
    } else {
        word >> (64 - len as u32)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("ε");
        }
        for i in (0..self.len).rev() {
            f.write_str(if (self.bits >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prefix({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit string {0:?}")]
pub struct ParsePrefixError(String);

impl FromStr for Prefix {
    type Err = ParsePrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > 64 {
            return Err(ParsePrefixError(s.to_owned()));
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = match c {
                '0' => bits << 1,
                '1' => (bits << 1) | 1,
                _ => return Err(ParsePrefixError(s.to_owned())),
            };
        }
        Ok(Prefix { bits, len: s.len() as u8 })
    }
}

/// Turns a bit string such as `"0100"` into a key whose leading bits are
/// that string, so that with [`HashFn::Identity`] it routes exactly like the
/// written bit string.
///
/// Panics on characters other than `0` and `1`.
pub fn key_from_bits(s: &str) -> u64 {
    s.parse::<Prefix>().expect("bit string").left_aligned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let p: Prefix = "0110".parse().unwrap();
        assert_eq!(p.bits(), 0b0110);
        assert_eq!(p.len(), 4);
        assert_eq!(p.to_string(), "0110");
        assert!("01x".parse::<Prefix>().is_err());
    }

    #[test]
    fn key_bits_are_left_aligned() {
        assert_eq!(key_from_bits("1"), 1 << 63);
        assert_eq!(key_from_bits("0100"), 1 << 62);
        let k = key_from_bits("010000");
        assert_eq!(Prefix::of(k, 3).to_string(), "010");
    }

    #[test]
    fn covers_and_starts_with() {
        let p: Prefix = "01".parse().unwrap();
        assert!(p.covers(key_from_bits("0110")));
        assert!(!p.covers(key_from_bits("1110")));
        assert!(p.child(true).starts_with(p));
        assert!(!p.starts_with(p.child(false)));
        assert_eq!(p.child(false).to_string(), "010");
    }

    #[test]
    fn dir_range_matches_msb_first_indexing() {
        let p: Prefix = "01".parse().unwrap();
        assert_eq!(p.dir_range(3), 2..4);
        assert_eq!(p.dir_range(2), 1..2);
    }

    #[test]
    fn mixer_is_a_bijection_on_samples() {
        let mut seen = std::collections::HashSet::new();
        for k in 0..10_000u64 {
            assert!(seen.insert(HashFn::Mix.hash(k)));
        }
        assert_eq!(HashFn::Identity.hash(42), 42);
    }
}
