//! Fixed-width bit vectors used by the ECC codecs and the reference model.
//!
//! Widths can exceed machine words (TMR on a wide register needs 3x the data
//! width), so the storage is a plain `Vec<bool>` indexed LSB-first.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A fixed-width bit vector, bit 0 = LSB.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn zeros(width: usize) -> Self {
        Bits(vec![false; width])
    }

    /// Low `width` bits of `value`, LSB-first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        Bits((0..width).map(|i| i < 64 && (value >> i) & 1 == 1).collect())
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    /// Value as u64; panics if the width exceeds 64 bits with high bits set.
    pub fn to_u64(&self) -> u64 {
        let mut v = 0u64;
        for (i, &b) in self.0.iter().enumerate() {
            if b {
                assert!(i < 64, "bit vector too wide for u64");
                v |= 1 << i;
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| !b)
    }

    /// Bitwise XOR; both operands must have equal width.
    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len(), other.len(), "width mismatch in xor");
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    /// Slice [lsb ..= msb], inclusive, LSB-first.
    pub fn slice(&self, msb: usize, lsb: usize) -> Bits {
        Bits(self.0[lsb..=msb].to_vec())
    }

    /// Writes `src` into self at [lsb ..= lsb+src.len()-1].
    pub fn splice(&mut self, lsb: usize, src: &Bits) {
        for (k, &b) in src.0.iter().enumerate() {
            self.0[lsb + k] = b;
        }
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Bits(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // MSB-first, verilog style
        write!(f, "{}'b", self.len())?;
        for &b in self.0.iter().rev() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u64_round_trip() {
        let b = Bits::from_u64(0b1011, 4);
        assert_eq!(b.to_u64(), 0b1011);
        assert_eq!(b.len(), 4);
        assert!(b.get(0) && b.get(1) && !b.get(2) && b.get(3));
    }

    #[test]
    fn slice_and_splice() {
        let b = Bits::from_u64(0b110100, 6);
        assert_eq!(b.slice(4, 2).to_u64(), 0b101);
        let mut z = Bits::zeros(6);
        z.splice(2, &Bits::from_u64(0b101, 3));
        assert_eq!(z.to_u64(), 0b10100);
    }

    #[test]
    fn xor_popcount() {
        let a = Bits::from_u64(0b1100, 4);
        let b = Bits::from_u64(0b1010, 4);
        assert_eq!(a.xor(&b).to_u64(), 0b0110);
        assert_eq!(a.popcount(), 2);
    }
}
