//! MSB-first bit packing with an optional hard length cap.

/// Packed bits plus their exact count. Trailing bits of the last byte are
/// zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bitstream {
    bytes: Vec<u8>,
    len_bits: usize,
}

impl Bitstream {
    pub fn from_bytes(mut bytes: Vec<u8>, len_bits: usize) -> Self {
        let need = len_bits.div_ceil(8);
        bytes.truncate(need);
        let len_bits = len_bits.min(bytes.len() * 8);
        if !len_bits.is_multiple_of(8) {
            if let Some(last) = bytes.last_mut() {
                *last &= 0xFF << (8 - len_bits % 8);
            }
        }
        Self { bytes, len_bits }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    pub fn is_empty(&self) -> bool {
        self.len_bits == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len_bits);
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    /// The first `k` bits (all of them if `k` exceeds the length).
    pub fn prefix(&self, k: usize) -> Bitstream {
        Bitstream::from_bytes(self.bytes.clone(), k.min(self.len_bits))
    }

    /// Bits `[start, start + len)`, clipped to the stream's end.
    pub fn slice(&self, start: usize, len: usize) -> Bitstream {
        let start = start.min(self.len_bits);
        let end = start.saturating_add(len).min(self.len_bits);
        let mut w = BitWriter::new();
        for i in start..end {
            let _ = w.put(self.bit(i));
        }
        w.finish()
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            bytes: &self.bytes,
            len_bits: self.len_bits,
            pos: 0,
        }
    }
}

/// Returned when a write would exceed the writer's cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Full;

pub struct BitWriter {
    bytes: Vec<u8>,
    len_bits: usize,
    cap: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::with_cap(usize::MAX)
    }

    pub fn with_cap(cap: usize) -> Self {
        Self {
            bytes: Vec::new(),
            len_bits: 0,
            cap,
        }
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    #[inline]
    pub fn put(&mut self, bit: bool) -> Result<(), Full> {
        if self.len_bits >= self.cap {
            return Err(Full);
        }
        if self.len_bits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len_bits % 8);
        }
        self.len_bits += 1;
        Ok(())
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn put_bits(&mut self, value: u64, n: u32) -> Result<(), Full> {
        for i in (0..n).rev() {
            self.put((value >> i) & 1 == 1)?;
        }
        Ok(())
    }

    pub fn append(&mut self, bits: &Bitstream) -> Result<(), Full> {
        for i in 0..bits.len_bits() {
            self.put(bits.bit(i))?;
        }
        Ok(())
    }

    pub fn finish(self) -> Bitstream {
        Bitstream {
            bytes: self.bytes,
            len_bits: self.len_bits,
        }
    }
}

impl Default for BitWriter {
    fn default() -> Self {
        Self::new()
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    len_bits: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len_bits: usize) -> Self {
        Self {
            bytes,
            len_bits: len_bits.min(bytes.len() * 8),
            pos: 0,
        }
    }

    /// Next bit, or `None` once the stream is exhausted.
    #[inline]
    pub fn get(&mut self) -> Option<bool> {
        if self.pos >= self.len_bits {
            return None;
        }
        let b = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Some(b)
    }

    pub fn get_bits(&mut self, n: u32) -> Option<u64> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | u64::from(self.get()?);
        }
        Some(v)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.len_bits - self.pos
    }
}
