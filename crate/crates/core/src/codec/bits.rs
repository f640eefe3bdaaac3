//! MSB-first bit packing with Exp-Golomb codes. Lengths are computable
//! without writing, so mode decisions can price symbols before choosing
//! which ones to emit.

use crate::error::{Error, Result};

/// Bits of ue(v): a 2n-1 bit code where n is the bit length of v+1.
pub fn len_ue(v: u32) -> usize {
    let n = 64 - (v as u64 + 1).leading_zeros() as usize;
    2 * n - 1
}

/// Bits of se(v) under the positive-first signed mapping.
pub fn len_se(v: i32) -> usize {
    len_ue(se_to_ue(v))
}

fn se_to_ue(v: i32) -> u32 {
    if v > 0 {
        (2 * v as i64 - 1) as u32
    } else {
        (-2 * v as i64) as u32
    }
}

fn ue_to_se(v: u32) -> i32 {
    if v % 2 == 1 {
        ((v as i64 + 1) / 2) as i32
    } else {
        (-(v as i64) / 2) as i32
    }
}

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    nbits: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len_bits(&self) -> usize {
        self.nbits
    }

    pub fn put_bit(&mut self, bit: u32) {
        let idx = self.nbits / 8;
        if idx == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit != 0 {
            self.bytes[idx] |= 0x80 >> (self.nbits % 8);
        }
        self.nbits += 1;
    }

    pub fn put_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let n = 64 - x.leading_zeros();
        for _ in 0..n - 1 {
            self.put_bit(0);
        }
        for i in (0..n).rev() {
            self.put_bit(((x >> i) & 1) as u32);
        }
    }

    pub fn put_se(&mut self, v: i32) {
        self.put_ue(se_to_ue(v));
    }

    /// Packed bytes and the exact bit length (the last byte may be partial).
    pub fn finish(self) -> (Vec<u8>, usize) {
        (self.bytes, self.nbits)
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0 }
    }

    pub fn bits_read(&self) -> usize {
        self.pos
    }

    pub fn get_bit(&mut self) -> Result<u32> {
        let idx = self.pos / 8;
        if idx >= self.data.len() {
            return Err(Error::domain("bitstream exhausted"));
        }
        let bit = (self.data[idx] >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(bit as u32)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let mut zeros = 0u32;
        while self.get_bit()? == 0 {
            zeros += 1;
            if zeros > 32 {
                return Err(Error::domain("malformed exp-golomb prefix"));
            }
        }
        let mut rest = 0u64;
        for _ in 0..zeros {
            rest = rest << 1 | self.get_bit()? as u64;
        }
        Ok(((1u64 << zeros) - 1 + rest) as u32)
    }

    pub fn get_se(&mut self) -> Result<i32> {
        Ok(ue_to_se(self.get_ue()?))
    }
}
