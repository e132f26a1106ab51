//! On-disk index format.
//!
//! Every integer is an 8-byte little-endian word unless stated otherwise.
//!
//! ```text
//! magic      4 bytes "RRPQ"
//! version    u64
//! n |V| σp   u64 x3          σp counts base and inverse predicates
//! L_p, L_s   wavelet tree    sigma, n, level count, then per level a bitvector
//! C_o        u64 width, u64 count, packed words (width bits per entry)
//! C_p        u64 count, entries
//! dictionary u64 node count, u64 blob length, newline-joined names,
//!            then the same for predicates, then σp inverse ids
//! crc        u64 holding the CRC-32 of every preceding byte
//! ```
//!
//! A bitvector is its bit length, its payload words, its superblock counts and
//! its 16-bit block counts packed four per word (first block in the low bits).

use crate::bitvector::BitVector;
use crate::dictionary::{DictError, Dictionary};
use crate::index::Index;
use crate::ring::{Ring, RingError};
use crate::wavelet_tree::{WaveletError, WaveletTree};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"RRPQ";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not an index file")]
    BadMagic,
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("checksum mismatch: file is corrupt")]
    Checksum,
    #[error("file is truncated")]
    Truncated,
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

impl From<RingError> for PersistError {
    fn from(e: RingError) -> Self {
        PersistError::Corrupt(e.to_string())
    }
}

impl From<WaveletError> for PersistError {
    fn from(e: WaveletError) -> Self {
        PersistError::Corrupt(e.to_string())
    }
}

impl From<DictError> for PersistError {
    fn from(e: DictError) -> Self {
        PersistError::Corrupt(e.to_string())
    }
}

/// Sizes of a serialized index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeReport {
    pub triples: u64,
    pub total_bytes: u64,
    pub dictionary_bytes: u64,
    /// `2n(⌈log2 |V|⌉ + ⌈log2 σp⌉) / 8`.
    pub payload_bound_bytes: f64,
}

impl SizeReport {
    pub fn bytes_per_triple(&self) -> f64 {
        if self.triples == 0 {
            0.0
        } else {
            self.total_bytes as f64 / self.triples as f64
        }
    }

    /// File size over the payload bound plus the dictionary section.
    pub fn payload_ratio(&self) -> f64 {
        self.total_bytes as f64 / (self.payload_bound_bytes + self.dictionary_bytes as f64)
    }
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

fn bit_width(x: u64) -> u32 {
    64 - x.leading_zeros()
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn words(&mut self, xs: &[u64]) {
        for &x in xs {
            self.u64(x);
        }
    }

    fn bitvector(&mut self, bv: &BitVector) {
        self.u64(bv.len());
        self.words(bv.words());
        self.words(bv.superblocks());
        for chunk in bv.blocks().chunks(4) {
            let mut w = 0u64;
            for (k, &b) in chunk.iter().enumerate() {
                w |= (b as u64) << (16 * k);
            }
            self.u64(w);
        }
    }

    fn tree(&mut self, wt: &WaveletTree) {
        self.u64(wt.sigma() as u64);
        self.u64(wt.len());
        self.u64(wt.levels().len() as u64);
        for level in wt.levels() {
            self.bitvector(level);
        }
    }

    fn packed(&mut self, xs: &[u64], width: u32) {
        self.u64(width as u64);
        self.u64(xs.len() as u64);
        let mut words = vec![0u64; (xs.len() as u64 * width as u64).div_ceil(64) as usize];
        for (i, &x) in xs.iter().enumerate().filter(|_| width > 0) {
            let bit = i as u64 * width as u64;
            let (w, off) = ((bit / 64) as usize, bit % 64);
            words[w] |= x << off;
            if off + width as u64 > 64 {
                words[w + 1] |= x >> (64 - off);
            }
        }
        self.words(&words);
    }

    fn names(&mut self, names: &[String]) {
        self.u64(names.len() as u64);
        let blob = names.join("\n");
        self.u64(blob.len() as u64);
        self.buf.extend_from_slice(blob.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, k: usize) -> Result<&'a [u8], PersistError> {
        let end = self
            .pos
            .checked_add(k)
            .filter(|&e| e <= self.buf.len())
            .ok_or(PersistError::Truncated)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize, PersistError> {
        let k = self.u64()?;
        // Every counted item occupies at least one byte.
        if k > (self.buf.len() - self.pos) as u64 * 8 {
            return Err(PersistError::Truncated);
        }
        Ok(k as usize)
    }

    fn words(&mut self, k: usize) -> Result<Vec<u64>, PersistError> {
        let raw = self.bytes(k.checked_mul(8).ok_or(PersistError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u32(&mut self, what: &str) -> Result<u32, PersistError> {
        let x = self.u64()?;
        u32::try_from(x).map_err(|_| PersistError::Corrupt(format!("{what} {x} too large")))
    }

    fn bitvector(&mut self) -> Result<BitVector, PersistError> {
        let len = self.u64()?;
        if len.div_ceil(8) > (self.buf.len() - self.pos) as u64 {
            return Err(PersistError::Truncated);
        }
        let words = self.words(len.div_ceil(64) as usize)?;
        let superblocks = self.words((len / crate::bitvector::SUPERBLOCK_BITS) as usize + 1)?;
        let nblocks = (len / crate::bitvector::BLOCK_BITS) as usize + 1;
        let packed = self.words(nblocks.div_ceil(4))?;
        let blocks: Vec<u16> = (0..nblocks)
            .map(|k| (packed[k / 4] >> (16 * (k % 4))) as u16)
            .collect();
        if !nblocks.is_multiple_of(4) && packed[packed.len() - 1] >> (16 * (nblocks % 4)) != 0 {
            return Err(PersistError::Corrupt(
                "padding bits set in block counts".into(),
            ));
        }
        BitVector::from_parts(len, words, superblocks, blocks)
            .map_err(|e| PersistError::Corrupt(e.into()))
    }

    fn tree(&mut self) -> Result<WaveletTree, PersistError> {
        let sigma = self.u32("alphabet size")?;
        let n = self.u64()?;
        let levels = self.count()?;
        let levels = (0..levels)
            .map(|_| self.bitvector())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WaveletTree::from_levels(n, sigma, levels)?)
    }

    fn packed(&mut self) -> Result<Vec<u64>, PersistError> {
        let width = self.u64()?;
        if width > 64 {
            return Err(PersistError::Corrupt(format!("packed width {width}")));
        }
        let k = self.u64()?;
        if k > u32::MAX as u64 + 2 {
            return Err(PersistError::Corrupt(format!("packed length {k}")));
        }
        let k = k as usize;
        let words = self.words((k as u64 * width).div_ceil(64) as usize)?;
        let mask = if width == 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        Ok((0..k)
            .map(|i| {
                let bit = i as u64 * width;
                let (w, off) = ((bit / 64) as usize, bit % 64);
                let mut x = words.get(w).map_or(0, |&v| v >> off);
                if off + width > 64 {
                    x |= words[w + 1] << (64 - off);
                }
                x & mask
            })
            .collect())
    }

    fn names(&mut self) -> Result<Vec<String>, PersistError> {
        let k = self.count()?;
        let len = self.count()?;
        let blob = std::str::from_utf8(self.bytes(len)?)
            .map_err(|_| PersistError::Corrupt("name is not UTF-8".into()))?;
        let names: Vec<String> = if k == 0 {
            Vec::new()
        } else {
            blob.split('\n').map(str::to_owned).collect()
        };
        if names.len() != k || (k == 0 && !blob.is_empty()) {
            return Err(PersistError::Corrupt("name count mismatch".into()));
        }
        Ok(names)
    }
}

fn dictionary_section(dict: &Dictionary) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.names(dict.node_names());
    w.names(dict.pred_names());
    w.words(
        &dict
            .inverse_table()
            .iter()
            .map(|&q| q as u64)
            .collect::<Vec<_>>(),
    );
    w.buf
}

/// Serializes `index`.
pub fn to_bytes(index: &Index) -> Vec<u8> {
    let ring = &index.ring;
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u64(FORMAT_VERSION);
    w.u64(ring.len());
    w.u64(ring.num_nodes() as u64);
    w.u64(ring.num_preds() as u64);
    w.tree(ring.lp());
    w.tree(ring.ls());
    w.packed(ring.c_o_table(), bit_width(ring.len()));
    let c_p: Vec<u64> = (0..=ring.num_preds() + 1).map(|p| ring.c_p(p)).collect();
    w.u64(c_p.len() as u64);
    w.words(&c_p);
    w.buf.extend_from_slice(&dictionary_section(&index.dict));
    let crc = crc32fast::hash(&w.buf);
    w.u64(crc as u64);
    w.buf
}

/// Deserializes an index, validating the checksum and every structure.
pub fn from_bytes(bytes: &[u8]) -> Result<Index, PersistError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(PersistError::Truncated);
    }
    let version = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(PersistError::Version { found: version });
    }
    if bytes.len() < 20 {
        return Err(PersistError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if stored != crc32fast::hash(body) as u64 {
        return Err(PersistError::Checksum);
    }
    let mut r = Reader { buf: body, pos: 12 };
    let n = r.u64()?;
    let num_nodes = r.u32("node count")?;
    let num_preds = r.u32("predicate count")?;
    let lp = r.tree()?;
    let ls = r.tree()?;
    if lp.len() != n {
        return Err(PersistError::Corrupt(
            "triple count does not match header".into(),
        ));
    }
    let c_o = r.packed()?;
    let k = r.count()?;
    let c_p = r.words(k)?;
    let ring = Ring::from_parts(num_nodes, num_preds, lp, ls, c_o)?;
    if c_p.len() != num_preds as usize + 2
        || c_p
            .iter()
            .enumerate()
            .any(|(p, &c)| ring.c_p(p as u32) != c)
    {
        return Err(PersistError::Corrupt(
            "predicate counts disagree with L_p".into(),
        ));
    }
    let node_names = r.names()?;
    let pred_names = r.names()?;
    let inverse = r.words(pred_names.len())?;
    let inverse = inverse
        .into_iter()
        .map(|q| u32::try_from(q).map_err(|_| PersistError::Corrupt("inverse id too large".into())))
        .collect::<Result<Vec<_>, _>>()?;
    if r.pos != body.len() {
        return Err(PersistError::Corrupt("trailing bytes".into()));
    }
    let dict = Dictionary::from_parts(node_names, pred_names, inverse)?;
    if dict.num_nodes() != num_nodes || dict.num_preds() != num_preds {
        return Err(PersistError::Corrupt(
            "dictionary size does not match header".into(),
        ));
    }
    Ok(Index { ring, dict })
}

pub fn save(index: &Index, path: &Path) -> Result<SizeReport, PersistError> {
    let bytes = to_bytes(index);
    std::fs::write(path, &bytes)?;
    Ok(size_report(index, bytes.len() as u64))
}

pub fn load(path: &Path) -> Result<Index, PersistError> {
    from_bytes(&std::fs::read(path)?)
}

/// Size breakdown for `index` serialized in `total_bytes`.
pub fn size_report(index: &Index, total_bytes: u64) -> SizeReport {
    let ring = &index.ring;
    let n = ring.len();
    let bits = ceil_log2(ring.num_nodes() as u64) + ceil_log2(ring.num_preds() as u64);
    SizeReport {
        triples: n,
        total_bytes,
        dictionary_bytes: dictionary_section(&index.dict).len() as u64,
        payload_bound_bytes: 2.0 * n as f64 * bits as f64 / 8.0,
    }
}
