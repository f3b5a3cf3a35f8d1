//! Fixed-width binary signatures and the Hamming distance kernel.
//!
//! A signature is `B` bits packed LSB-first: bit `i` lives in byte `i / 8`
//! at position `i % 8`. When `B` is not a multiple of 8 the trailing pad
//! bits of the last byte are zero. This layout is part of the index file
//! format and must not change.

use crate::error::{Error, Result};

/// Default signature width in bits (512 bytes per signature).
pub const DEFAULT_SIGNATURE_BITS: u32 = 4096;

/// Number of bytes needed to store `bits` bits.
pub const fn byte_len(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

/// A fixed-width bit vector; the unit of similarity everywhere else.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinarySignature {
    bits: u32,
    bytes: Vec<u8>,
}

impl BinarySignature {
    /// All-zero signature of the given width.
    pub fn zeros(bits: u32) -> Self {
        assert!(bits > 0, "signature width must be positive");
        BinarySignature {
            bits,
            bytes: vec![0u8; byte_len(bits)],
        }
    }

    /// All-ones signature; pad bits in the last byte stay zero.
    pub fn ones(bits: u32) -> Self {
        let mut sig = Self::zeros(bits);
        for i in 0..bits {
            sig.set(i, true);
        }
        sig
    }

    /// Wraps raw packed bytes, validating length and zero padding.
    pub fn from_bytes(bits: u32, bytes: Vec<u8>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("signature width must be positive"));
        }
        if bytes.len() != byte_len(bits) {
            return Err(Error::invalid(format!(
                "expected {} bytes for {} bits, got {}",
                byte_len(bits),
                bits,
                bytes.len()
            )));
        }
        let pad = (8 - (bits % 8) as usize) % 8;
        if pad > 0 {
            let last = *bytes.last().unwrap();
            if last >> (8 - pad) != 0 {
                return Err(Error::invalid("trailing pad bits must be zero"));
            }
        }
        Ok(BinarySignature { bits, bytes })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    /// Reads bit `i` (LSB-first within each byte).
    pub fn get(&self, i: u32) -> bool {
        assert!(i < self.bits, "bit index {i} out of range");
        self.bytes[(i / 8) as usize] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: u32, value: bool) {
        assert!(i < self.bits, "bit index {i} out of range");
        let mask = 1u8 << (i % 8);
        if value {
            self.bytes[(i / 8) as usize] |= mask;
        } else {
            self.bytes[(i / 8) as usize] &= !mask;
        }
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> u32 {
        self.bytes.iter().map(|b| b.count_ones()).sum()
    }
}

impl std::fmt::Debug for BinarySignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let head: Vec<String> = self.bytes.iter().take(8).map(|b| format!("{b:02x}")).collect();
        write!(f, "BinarySignature({} bits, {}..)", self.bits, head.join(""))
    }
}

/// Hamming distance between two signatures of equal width.
pub fn hamming(a: &BinarySignature, b: &BinarySignature) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::WidthMismatch {
            left: a.bits,
            right: b.bits,
        });
    }
    Ok(hamming_bytes(&a.bytes, &b.bytes))
}

/// Raw Hamming kernel over equal-length packed byte slices.
///
/// Word-level popcount with four independent accumulators and no early
/// exit; this is the inner loop of every partition scan. On x86-64 with
/// the POPCNT feature a hardware-popcount variant is dispatched at
/// runtime; both paths produce identical counts.
#[inline]
pub fn hamming_bytes(a: &[u8], b: &[u8]) -> u32 {
    #[cfg(target_arch = "x86_64")]
    {
        if *HAVE_POPCNT {
            // Safety: guarded by the runtime feature check.
            return unsafe { hamming_bytes_popcnt(a, b) };
        }
    }
    hamming_bytes_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
static HAVE_POPCNT: std::sync::LazyLock<bool> =
    std::sync::LazyLock::new(|| std::arch::is_x86_feature_detected!("popcnt"));

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn hamming_bytes_popcnt(a: &[u8], b: &[u8]) -> u32 {
    // Identical loop body; the enabled feature lets count_ones lower to
    // the POPCNT instruction.
    hamming_bytes_portable(a, b)
}

/// `popcount(a AND b)` over equal-length word slices; the inner product
/// of a signature with one bit-plane of a count vector.
#[inline]
pub fn popcount_and_words(a: &[u64], b: &[u64]) -> u64 {
    #[cfg(target_arch = "x86_64")]
    {
        if *HAVE_POPCNT {
            return unsafe { popcount_and_words_popcnt(a, b) };
        }
    }
    popcount_and_words_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn popcount_and_words_popcnt(a: &[u64], b: &[u64]) -> u64 {
    popcount_and_words_portable(a, b)
}

#[inline(always)]
fn popcount_and_words_portable(a: &[u64], b: &[u64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| u64::from((x & y).count_ones()))
        .sum()
}

/// Hamming distance over equal-length word slices.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    #[cfg(target_arch = "x86_64")]
    {
        if *HAVE_POPCNT {
            return unsafe { hamming_words_popcnt(a, b) };
        }
    }
    hamming_words_portable(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn hamming_words_popcnt(a: &[u64], b: &[u64]) -> u32 {
    hamming_words_portable(a, b)
}

#[inline(always)]
fn hamming_words_portable(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

#[inline(always)]
fn hamming_bytes_portable(a: &[u8], b: &[u8]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    let len = a.len().min(b.len());
    let mut acc0 = 0u32;
    let mut acc1 = 0u32;
    let mut acc2 = 0u32;
    let mut acc3 = 0u32;
    let mut off = 0usize;
    while off + 32 <= len {
        acc0 += (word(a, off) ^ word(b, off)).count_ones();
        acc1 += (word(a, off + 8) ^ word(b, off + 8)).count_ones();
        acc2 += (word(a, off + 16) ^ word(b, off + 16)).count_ones();
        acc3 += (word(a, off + 24) ^ word(b, off + 24)).count_ones();
        off += 32;
    }
    while off + 8 <= len {
        acc0 += (word(a, off) ^ word(b, off)).count_ones();
        off += 8;
    }
    let mut tail = 0u32;
    while off < len {
        tail += (a[off] ^ b[off]).count_ones();
        off += 1;
    }
    acc0 + acc1 + acc2 + acc3 + tail
}

#[inline(always)]
fn word(s: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(s[off..off + 8].try_into().unwrap())
}
