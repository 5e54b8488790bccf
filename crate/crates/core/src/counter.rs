//! Carry-explicit counters. The counter stores a carry bit next to every
//! value bit so that one increment touches at most two input bits per output
//! bit. Used for circuit timesteps, routing column indices, and positional
//! chaining in structured checkers.
//!
//! Bit layout of an `m`-pair counter (width `2m`): position `2i` holds `b_{i+1}`
//! and position `2i+1` holds `c_{i+1}`, so the most significant carry `c_m`
//! sits at position `2m-1`.

use crate::bits::Bits;
use crate::localmap::LocalMap;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CarryCounter {
    bits: Bits,
}

impl CarryCounter {
    /// The all-zeros counter, the unique initial value.
    pub fn zero(pairs: usize) -> Self {
        assert!(pairs >= 1);
        CarryCounter {
            bits: Bits::zeros(2 * pairs),
        }
    }

    pub fn from_bits(bits: Bits) -> Self {
        assert!(bits.len() >= 2 && bits.len() % 2 == 0);
        CarryCounter { bits }
    }

    pub fn pairs(&self) -> usize {
        self.bits.len() / 2
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    /// Value bit `b_i`, 1-indexed.
    pub fn b(&self, i: usize) -> bool {
        self.bits.get(2 * (i - 1))
    }

    /// Carry bit `c_i`, 1-indexed.
    pub fn c(&self, i: usize) -> bool {
        self.bits.get(2 * (i - 1) + 1)
    }

    /// One simultaneous update: `c_1 <- b_1`, `b_1 <- b_1 xor 1`, and for
    /// `i > 1`: `c_i <- b_i and c_{i-1}`, `b_i <- b_i xor c_{i-1}`. Total on
    /// all bit strings.
    pub fn increment(&self) -> Self {
        let m = self.pairs();
        let mut next = Bits::zeros(2 * m);
        next.set(0, !self.b(1));
        next.set(1, self.b(1));
        for i in 2..=m {
            next.set(2 * (i - 1), self.b(i) ^ self.c(i - 1));
            next.set(2 * (i - 1) + 1, self.b(i) && self.c(i - 1));
        }
        CarryCounter { bits: next }
    }

    /// A counter is final once its most significant carry bit is set.
    pub fn is_final(&self) -> bool {
        self.c(self.pairs())
    }
}

/// Steps from the zero counter to the first final value: `2^m + m - 1`.
pub fn steps_to_final(pairs: usize) -> u64 {
    assert!(pairs >= 1);
    (1u64 << pairs) + pairs as u64 - 1
}

/// The increment published as a decision-tree forest, so downstream label
/// maps can compose it bitwise. Every output bit reads at most two inputs.
pub fn increment_map(pairs: usize) -> LocalMap {
    let w = 2 * pairs;
    LocalMap::from_fn(
        w,
        w,
        |j| {
            let i = j / 2 + 1; // pair index, 1-based
            if i == 1 {
                vec![0]
            } else {
                // b_i and c_{i-1}
                vec![2 * (i - 1), 2 * (i - 1) - 1]
            }
        },
        |x, j| {
            let i = j / 2 + 1;
            let b_i = x[2 * (i - 1)];
            if j % 2 == 0 {
                // next b_i
                if i == 1 {
                    !b_i
                } else {
                    b_i ^ x[2 * (i - 1) - 1]
                }
            } else {
                // next c_i
                if i == 1 {
                    b_i
                } else {
                    b_i && x[2 * (i - 1) - 1]
                }
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_all_zeros() {
        for m in [1usize, 2, 4] {
            let z = CarryCounter::zero(m);
            assert_eq!(z.bits().count_ones(), 0);
            assert_eq!(z.bits().len(), 2 * m);
            assert!(!z.is_final());
        }
    }

    #[test]
    fn first_increments() {
        // (0,0) -> (0,1): b_1 set, no carry
        let z = CarryCounter::zero(1);
        let one = z.increment();
        assert!(one.b(1) && !one.c(1));
        // (c_1,b_1) = (0,1) -> (1,0)
        let two = one.increment();
        assert!(!two.b(1) && two.c(1));
        assert!(two.is_final());
    }

    #[test]
    fn msb_first_set_at_closed_form_step() {
        for m in 1..=12usize {
            let mut ctr = CarryCounter::zero(m);
            let want = steps_to_final(m);
            let mut t = 0u64;
            while !ctr.is_final() {
                ctr = ctr.increment();
                t += 1;
                assert!(t <= want, "m={m}: final later than closed form");
            }
            assert_eq!(t, want, "m={m}");
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(steps_to_final(1), 2);
        assert_eq!(steps_to_final(2), 5);
        assert_eq!(steps_to_final(10), 1033);
    }

    #[test]
    fn four_increments_of_two_pairs_not_final() {
        let mut ctr = CarryCounter::zero(2);
        for _ in 0..4 {
            ctr = ctr.increment();
        }
        assert!(!ctr.is_final());
        ctr = ctr.increment();
        assert!(ctr.is_final());
    }

    #[test]
    fn increment_map_matches_native_and_is_2_local() {
        for m in [1usize, 2, 3, 4] {
            let map = increment_map(m);
            let rep = map.measure();
            assert!(rep.max_dependency_set <= 2, "m={m}");
            for v in 0..1u64 << (2 * m) {
                let ctr = CarryCounter::from_bits(Bits::from_u64(v, 2 * m));
                assert_eq!(map.eval(ctr.bits()), ctr.increment().bits().clone());
            }
        }
    }

    #[test]
    fn iterating_from_any_string_reaches_final() {
        // totality: no livelock of the MSB even from invalid states
        for m in [1usize, 2, 3] {
            let bound = 1u64 << (2 * m);
            for v in 0..bound {
                let mut ctr = CarryCounter::from_bits(Bits::from_u64(v, 2 * m));
                let mut ok = false;
                for _ in 0..bound {
                    if ctr.is_final() {
                        ok = true;
                        break;
                    }
                    ctr = ctr.increment();
                }
                assert!(ok, "m={m} start={v:b} never reached a final counter");
            }
        }
    }
}
