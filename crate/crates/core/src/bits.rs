//! Small fixed-width bit strings. Bit 0 is the least significant position of
//! whatever field starts there; layouts are documented by the modules that
//! define them.

use std::fmt;
use std::ops::{Index, Range};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn zeros(width: usize) -> Self {
        Bits(vec![false; width])
    }

    pub fn from_slice(bits: &[bool]) -> Self {
        Bits(bits.to_vec())
    }

    /// Low `width` bits of `value`, position 0 = least significant.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        Bits((0..width).map(|i| value >> i & 1 == 1).collect())
    }

    /// Parses a left-to-right bit string such as "1011" (leftmost char is
    /// position 0).
    pub fn from_str01(s: &str) -> Self {
        Bits(
            s.chars()
                .map(|c| match c {
                    '0' => false,
                    '1' => true,
                    _ => panic!("bad bit char {c:?}"),
                })
                .collect(),
        )
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

    pub fn slice(&self, r: Range<usize>) -> Bits {
        Bits(self.0[r].to_vec())
    }

    /// Interprets `self[r]` as an integer, position `r.start` least
    /// significant.
    pub fn read_u64(&self, r: Range<usize>) -> u64 {
        assert!(r.len() <= 64);
        let mut v = 0u64;
        for (k, i) in r.enumerate() {
            if self.0[i] {
                v |= 1 << k;
            }
        }
        v
    }

    pub fn write_u64(&mut self, r: Range<usize>, value: u64) {
        for (k, i) in r.enumerate() {
            self.0[i] = value >> k & 1 == 1;
        }
    }

    pub fn to_u64(&self) -> u64 {
        self.read_u64(0..self.len())
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Bits(v)
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.0
    }
}

impl Index<usize> for Bits {
    type Output = bool;
    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u64_round_trip() {
        let b = Bits::from_u64(0b1011, 6);
        assert_eq!(b.to_u64(), 0b1011);
        assert_eq!(b.len(), 6);
        assert_eq!(format!("{b}"), "110100");
    }

    #[test]
    fn field_read_write() {
        let mut b = Bits::zeros(10);
        b.write_u64(3..7, 0b1101);
        assert_eq!(b.read_u64(3..7), 0b1101);
        assert_eq!(b.read_u64(0..3), 0);
    }

    #[test]
    fn str01_matches_display() {
        let b = Bits::from_str01("10110");
        assert_eq!(format!("{b}"), "10110");
        assert!(b.get(0) && !b.get(1) && b.get(2));
    }
}
