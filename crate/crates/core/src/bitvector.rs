//! Plain bitvectors with constant-time rank.
//!
//! The rank directory is two-level: an absolute 64-bit count every
//! [`SUPERBLOCK_BITS`] bits and a 16-bit count relative to the enclosing
//! superblock every [`BLOCK_BITS`] bits. A query adds the two samples and
//! popcounts at most eight payload words, for about 3.2% space on top of the
//! payload.

use std::fmt;

/// Bits covered by one absolute rank sample.
pub const SUPERBLOCK_BITS: u64 = 1 << 16;
/// Bits covered by one relative rank sample.
pub const BLOCK_BITS: u64 = 512;

const WORDS_PER_BLOCK: usize = (BLOCK_BITS / 64) as usize;

/// Immutable bitvector supporting `access`, `rank0` and `rank1`.
#[derive(Clone, PartialEq, Eq)]
pub struct BitVector {
    len: u64,
    words: Vec<u64>,
    superblocks: Vec<u64>,
    blocks: Vec<u16>,
}

impl BitVector {
    /// Builds a bitvector from a sequence of booleans.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut builder = BitVectorBuilder::new();
        for b in bits {
            builder.push(b);
        }
        builder.finish()
    }

    /// Builds a bitvector from packed words; bits at or beyond `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: u64) -> Self {
        let needed = word_count(len);
        words.resize(needed, 0);
        if !len.is_multiple_of(64) {
            let last = needed - 1;
            words[last] &= (1u64 << (len % 64)) - 1;
        }
        let (superblocks, blocks) = build_directory(&words, len);
        BitVector {
            len,
            words,
            superblocks,
            blocks,
        }
    }

    /// Reassembles a bitvector from stored parts, checking that the directory
    /// agrees with the payload.
    pub fn from_parts(
        len: u64,
        words: Vec<u64>,
        superblocks: Vec<u64>,
        blocks: Vec<u16>,
    ) -> Result<Self, &'static str> {
        if words.len() != word_count(len) {
            return Err("payload word count does not match bit length");
        }
        if !len.is_multiple_of(64) && words[words.len() - 1] >> (len % 64) != 0 {
            return Err("payload has bits set past the end");
        }
        let (expected_super, expected_blocks) = build_directory(&words, len);
        if expected_super != superblocks || expected_blocks != blocks {
            return Err("rank directory does not match payload");
        }
        Ok(BitVector {
            len,
            words,
            superblocks,
            blocks,
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn superblocks(&self) -> &[u64] {
        &self.superblocks
    }

    pub fn blocks(&self) -> &[u16] {
        &self.blocks
    }

    /// Total number of set bits.
    pub fn count_ones(&self) -> u64 {
        self.rank1(self.len)
    }

    /// Bit at 0-based position `i`.
    #[inline]
    pub fn access(&self, i: u64) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range (len {})",
            self.len
        );
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    /// Number of 1-bits among the first `i` positions.
    ///
    /// Panics if `i > len`.
    #[inline]
    pub fn rank1(&self, i: u64) -> u64 {
        assert!(i <= self.len, "rank prefix {i} exceeds length {}", self.len);
        let word = (i / 64) as usize;
        let block = (i / BLOCK_BITS) as usize;
        let mut r = self.superblocks[(i / SUPERBLOCK_BITS) as usize] + self.blocks[block] as u64;
        for w in &self.words[block * WORDS_PER_BLOCK..word] {
            r += w.count_ones() as u64;
        }
        let rem = i % 64;
        if rem != 0 {
            r += (self.words[word] & ((1u64 << rem) - 1)).count_ones() as u64;
        }
        r
    }

    /// Number of 0-bits among the first `i` positions.
    #[inline]
    pub fn rank0(&self, i: u64) -> u64 {
        i - self.rank1(i)
    }

    /// Serialized size in bytes (see `persist` for the layout).
    pub fn size_in_bytes(&self) -> usize {
        8 + 8 * self.words.len()
            + 8
            + 8 * self.superblocks.len()
            + 8
            + 8 * self.blocks.len().div_ceil(4)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            let s: String = (0..self.len)
                .map(|i| if self.access(i) { '1' } else { '0' })
                .collect();
            write!(f, "BitVector({s})")
        } else {
            write!(
                f,
                "BitVector {{ len: {}, ones: {} }}",
                self.len,
                self.count_ones()
            )
        }
    }
}

fn word_count(len: u64) -> usize {
    len.div_ceil(64) as usize
}

fn build_directory(words: &[u64], len: u64) -> (Vec<u64>, Vec<u16>) {
    // One sample per started (super)block plus a trailing sample so that
    // rank1(len) never indexes past the end.
    let n_super = (len / SUPERBLOCK_BITS) as usize + 1;
    let n_blocks = (len / BLOCK_BITS) as usize + 1;
    let mut superblocks = Vec::with_capacity(n_super);
    let mut blocks = Vec::with_capacity(n_blocks);
    let blocks_per_super = (SUPERBLOCK_BITS / BLOCK_BITS) as usize;
    let mut total = 0u64;
    let mut super_base = 0u64;
    for b in 0..n_blocks {
        if b % blocks_per_super == 0 {
            super_base = total;
            superblocks.push(total);
        }
        blocks.push((total - super_base) as u16);
        let start = b * WORDS_PER_BLOCK;
        let end = (start + WORDS_PER_BLOCK).min(words.len());
        if start < end {
            total += words[start..end]
                .iter()
                .map(|w| w.count_ones() as u64)
                .sum::<u64>();
        }
    }
    debug_assert_eq!(superblocks.len(), n_super);
    (superblocks, blocks)
}

/// Incremental bit appender.
#[derive(Default)]
pub struct BitVectorBuilder {
    len: u64,
    words: Vec<u64>,
}

impl BitVectorBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: u64) -> Self {
        BitVectorBuilder {
            len: 0,
            words: Vec::with_capacity(word_count(bits)),
        }
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            let last = self.words.len() - 1;
            self.words[last] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn finish(self) -> BitVector {
        BitVector::from_words(self.words, self.len)
    }
}
