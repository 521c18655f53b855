//! Toeplitz hashing over GF(2).
//!
//! A seed of `n + l - 1` bits defines the `l x n` matrix with
//! `T[i][j] = bits[i - j + n - 1]`, constant along each diagonal. The family
//! is universal: distinct inputs collide with probability exactly `2^-l`
//! over a uniform seed.

use std::fmt;
use std::ops::BitXor;

use crate::error::{invalid, Error, Result};

/// Largest input length accepted by [`collision_probability_exhaustive`].
pub const MAX_COLLISION_INPUT_BITS: u32 = 12;

/// Fixed-length bit vector packed into 64-bit words. Bits past `len` are
/// always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Parse `"1011"`-style strings; `_` and spaces are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let bits = text
            .chars()
            .filter(|c| !matches!(c, '_' | ' '))
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => invalid(format!("`{other}` is not a bit")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }

    /// Low `len` bits of `value`, bit 0 first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut s = Self::zeros(len);
        if len > 0 {
            s.words[0] = if len == 64 {
                value
            } else {
                value & ((1u64 << len) - 1)
            };
        }
        s
    }

    /// First `len` bits of `bytes`, most-significant bit first within each byte.
    pub fn from_bytes_msb(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return invalid(format!("{} bytes hold fewer than {len} bits", bytes.len()));
        }
        let mut s = Self::zeros(len);
        for i in 0..len {
            s.set(i, bytes[i / 8] >> (7 - i % 8) & 1 == 1);
        }
        Ok(s)
    }

    /// Packs most-significant bit first; the final byte is zero padded.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in (0..self.len).filter(|&i| self.get(i)) {
            out[i / 8] |= 1 << (7 - i % 8);
        }
        out
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    fn reversed(&self) -> Self {
        let mut r = Self::zeros(self.len);
        for i in (0..self.len).filter(|&i| self.get(i)) {
            r.set(self.len - 1 - i, true);
        }
        r
    }

    /// 64 bits starting at `start`, zero filled past the end.
    fn word_at(&self, start: usize) -> u64 {
        let (w, o) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0) >> o;
        let hi = if o == 0 {
            0
        } else {
            self.words.get(w + 1).copied().unwrap_or(0) << (64 - o)
        };
        lo | hi
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        assert_eq!(
            self.len, rhs.len,
            "xor of bit strings with different lengths"
        );
        BitString {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&rhs.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }
}

/// Shape of a Toeplitz family: input length `n`, output length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashFamilyDescriptor {
    input_len: usize,
    output_len: usize,
}

impl HashFamilyDescriptor {
    pub fn new(input_len: usize, output_len: usize) -> Result<Self> {
        if output_len == 0 || output_len > input_len {
            return invalid(format!(
                "need 1 <= output length <= input length, got n={input_len}, l={output_len}"
            ));
        }
        Ok(Self {
            input_len,
            output_len,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    /// Seed length `n + l - 1`.
    pub fn seed_len(&self) -> usize {
        self.input_len + self.output_len - 1
    }

    /// `2^(n + l - 1)`, or `None` if that overflows.
    pub fn family_size(&self) -> Option<u64> {
        (self.seed_len() < 64).then(|| 1u64 << self.seed_len())
    }

    /// Collision bound `2^-l`.
    pub fn delta(&self) -> f64 {
        (-(self.output_len as f64)).exp2()
    }
}

/// A member of the Toeplitz family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: BitString,
    family: HashFamilyDescriptor,
}

impl ToeplitzSeed {
    pub fn new(bits: BitString, input_len: usize, output_len: usize) -> Result<Self> {
        let family = HashFamilyDescriptor::new(input_len, output_len)?;
        if bits.len() != family.seed_len() {
            return invalid(format!(
                "seed has {} bits, n + l - 1 = {}",
                bits.len(),
                family.seed_len()
            ));
        }
        Ok(Self { bits, family })
    }

    /// Seed number `index` in enumeration order: bit `k` of the seed is bit `k`
    /// of `index`.
    pub fn from_index(family: HashFamilyDescriptor, index: u64) -> Result<Self> {
        let size = family.family_size().ok_or_else(|| {
            Error::Resource(format!("seed length {} too long", family.seed_len()))
        })?;
        if index >= size {
            return invalid(format!("seed index {index} outside family of size {size}"));
        }
        Ok(Self {
            bits: BitString::from_u64(index, family.seed_len()),
            family,
        })
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn family(&self) -> HashFamilyDescriptor {
        self.family
    }

    pub fn input_len(&self) -> usize {
        self.family.input_len
    }

    pub fn output_len(&self) -> usize {
        self.family.output_len
    }
}

/// `T x` over GF(2).
pub fn toeplitz_hash(seed: &ToeplitzSeed, input: &BitString) -> Result<BitString> {
    let n = seed.input_len();
    if input.len() != n {
        return invalid(format!("input has {} bits, seed expects {n}", input.len()));
    }
    // sum_j bits[i - j + n - 1] x[j] = sum_k bits[i + k] x[n - 1 - k]
    let rev = input.reversed();
    let mut out = BitString::zeros(seed.output_len());
    for i in 0..seed.output_len() {
        let parity = rev.words.iter().enumerate().fold(0u32, |acc, (w, &y)| {
            acc ^ (seed.bits.word_at(i + 64 * w) & y).count_ones()
        });
        out.set(i, parity & 1 == 1);
    }
    Ok(out)
}

/// Compress an error-corrected key with a Toeplitz seed.
pub fn privacy_amplify(corrected_key: &BitString, seed: &ToeplitzSeed) -> Result<BitString> {
    toeplitz_hash(seed, corrected_key)
}

/// Hash of a short input held in an integer (bit `j` of `x` is input bit `j`),
/// with the seed given by its enumeration index. Requires `n + l - 1 <= 63`.
pub(crate) fn hash_small(seed_index: u64, n: usize, l: usize, x: u64) -> u64 {
    let rev = reverse_low_bits(x, n);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    (0..l).fold(0u64, |acc, i| {
        let row = (seed_index >> i) & mask;
        acc | (u64::from((row & rev).count_ones() & 1) << i)
    })
}

fn reverse_low_bits(x: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - n)
    }
}

/// Number of seeds (out of `2^(n+l-1)`) on which `x` and `x2` collide.
pub fn collision_count_exhaustive(
    family: HashFamilyDescriptor,
    x: &BitString,
    x2: &BitString,
) -> Result<(u64, u64)> {
    let n = family.input_len();
    if n > MAX_COLLISION_INPUT_BITS as usize {
        return Err(Error::Resource(format!(
            "n = {n} exceeds the enumeration bound of {MAX_COLLISION_INPUT_BITS}"
        )));
    }
    if x.len() != n || x2.len() != n {
        return invalid(format!("inputs must have {n} bits"));
    }
    if x == x2 {
        return invalid("collision probability needs two distinct inputs");
    }
    let d = (x ^ x2).words[0];
    let total = family
        .family_size()
        .expect("bounded by MAX_COLLISION_INPUT_BITS");
    // f(x) = f(x2) iff T (x ^ x2) = 0
    let hits = (0..total)
        .filter(|&s| hash_small(s, n, family.output_len(), d) == 0)
        .count() as u64;
    Ok((hits, total))
}

/// Fraction of seeds on which `x` and `x2` collide, by full enumeration.
pub fn collision_probability_exhaustive(
    input_len: usize,
    output_len: usize,
    x: &BitString,
    x2: &BitString,
) -> Result<f64> {
    let family = HashFamilyDescriptor::new(input_len, output_len)?;
    let (hits, total) = collision_count_exhaustive(family, x, x2)?;
    Ok(hits as f64 / total as f64)
}
