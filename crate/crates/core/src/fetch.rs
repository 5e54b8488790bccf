//! The chain-of-copies circuit that resolves bits of a hardwired string.
//! Following the label map from the `i`-th out gate walks a weight-one
//! marker right `i-1` positions, ANDs in the relevant segment of the
//! string, walks back, and lands on the constant gate holding the bit. The
//! marker is split into a segment word `p` of `n/r` bits and a segment
//! number `k` of `log r` bits, trading label length against the tree depth
//! of the step map (which must read all of `k`).
//!
//! Label layout, low offsets first:
//!   t: 2    gate type: 00 chain (copy), 01 constant-0, 10 constant-1
//!   p: n/r  marker bits within the segment
//!   k: log r    segment number
//!   d: 1    direction, 0 = right
//!   i: log n    target index, stored as i-1
//!   c: machine configuration: log n cells of (1 value + 3 state) bits,
//!      then a carry-counter timestep

use crate::bits::Bits;
use crate::counter::{increment_map, steps_to_final, CarryCounter};
use crate::localmap::LocalMap;
use thiserror::Error;

pub const T_CHAIN: u64 = 0b00;
pub const T_CONST0: u64 = 0b01;
pub const T_CONST1: u64 = 0b10;

// decrement machine states
const ST_CHK: u32 = 1; // scanning for a nonzero bit
const ST_GOL: u32 = 2; // walking back left after an aborted scan
const ST_DEC: u32 = 3; // borrow walk
const ST_RET: u32 = 4; // walking back left after a decrement
const ST_QSTAR: u32 = 5; // the shift beat, one step at cell 0
const ST_HALT: u32 = 6;

#[derive(Error, Debug)]
pub enum FetchError {
    #[error("tradeoff parameter {r} out of range for n = {n}")]
    BadTradeoff { r: usize, n: usize },
    #[error("chain from index {0} exceeded its budget")]
    ChainBudgetExceeded(usize),
}

#[derive(Clone, Debug)]
pub struct FetchShape {
    pub n: usize,
    pub r: usize,
    pub log_n: usize,
    pub seg: usize,
    pub log_r: usize,
    pub counter_pairs: usize,
}

impl FetchShape {
    pub fn new(n: usize, r: usize) -> Result<Self, FetchError> {
        if r < 1 || r > n || n % r != 0 || !r.is_power_of_two() || n == 0 {
            return Err(FetchError::BadTradeoff { r, n });
        }
        let log_n = (usize::BITS - (n - 1).max(1).leading_zeros()).max(1) as usize;
        let log_r = r.trailing_zeros() as usize;
        // worst-case machine running time over all start values, by direct
        // simulation of the decrement schedule
        let worst = (0..n as u64).map(|v| machine_steps(log_n, v)).max().unwrap();
        let mut pairs = 1;
        while steps_to_final(pairs) < worst {
            pairs += 1;
        }
        Ok(FetchShape {
            n,
            r,
            log_n,
            seg: n / r,
            log_r,
            counter_pairs: pairs,
        })
    }

    pub fn t_off(&self) -> usize {
        0
    }
    pub fn p_off(&self) -> usize {
        2
    }
    pub fn k_off(&self) -> usize {
        2 + self.seg
    }
    pub fn d_off(&self) -> usize {
        self.k_off() + self.log_r
    }
    pub fn i_off(&self) -> usize {
        self.d_off() + 1
    }
    pub fn c_off(&self) -> usize {
        self.i_off() + self.log_n
    }
    pub fn cell_off(&self, j: usize) -> usize {
        self.c_off() + 4 * j
    }
    pub fn ctr_off(&self) -> usize {
        self.c_off() + 4 * self.log_n
    }
    pub fn label_width(&self) -> usize {
        self.ctr_off() + 2 * self.counter_pairs
    }
    pub fn final_bit(&self) -> usize {
        self.label_width() - 1
    }
    /// The beat flag: the machine sits at cell 0 in its shift state.
    pub fn beat_bits(&self) -> std::ops::Range<usize> {
        self.cell_off(0) + 1..self.cell_off(0) + 4
    }

    pub fn tag(&self, label: &Bits) -> u64 {
        label.read_u64(0..2)
    }

    pub fn g_const(&self, bit: bool) -> Bits {
        let mut b = Bits::zeros(self.label_width());
        b.write_u64(0..2, if bit { T_CONST1 } else { T_CONST0 });
        b
    }
}

/// Steps the decrement machine takes from start value `v` until it halts:
/// one check pass per value, a borrow walk and return per decrement, and
/// one beat state after each return.
fn machine_steps(log_n: usize, start: u64) -> u64 {
    let mut tape: Vec<bool> = (0..log_n).map(|j| start >> j & 1 == 1).collect();
    let (mut head, mut state, mut steps) = (0usize, ST_CHK, 0u64);
    loop {
        let (ns, write, mv): (u32, bool, i8) = match (state, tape[head]) {
            (ST_CHK, false) => {
                if head + 1 == log_n {
                    (ST_HALT, false, 0)
                } else {
                    (ST_CHK, false, 1)
                }
            }
            (ST_CHK, true) => {
                if head == 0 {
                    (ST_DEC, true, 0)
                } else {
                    (ST_GOL, true, -1)
                }
            }
            (ST_GOL, b) => {
                if head == 0 {
                    (ST_DEC, b, 0)
                } else {
                    (ST_GOL, b, -1)
                }
            }
            (ST_DEC, false) => (ST_DEC, true, 1),
            (ST_DEC, true) => (ST_RET, false, 0),
            (ST_RET, b) => {
                if head == 0 {
                    (ST_QSTAR, b, 0)
                } else {
                    (ST_RET, b, -1)
                }
            }
            (ST_QSTAR, b) => (ST_CHK, b, 0),
            _ => return steps,
        };
        tape[head] = write;
        state = ns;
        head = (head as i64 + mv as i64).clamp(0, log_n as i64 - 1) as usize;
        steps += 1;
    }
}

/// One machine step on the encoded configuration region, as a per-cell
/// local rule. Boundary behaviour is positional: cell 0 and the last cell
/// carry their own variants.
fn step_machine_cells(shape: &FetchShape, x: &[bool], out: &mut Bits) {
    let log_n = shape.log_n;
    let cell = |j: usize| -> (bool, u32) {
        let o = shape.cell_off(j);
        let mut s = 0u32;
        for b in 0..3 {
            if x[o + 1 + b] {
                s |= 1 << b;
            }
        }
        (x[o], s)
    };
    // machine transition viewed from one cell
    let rule = |j: usize, v: bool, s: u32| -> (u32, bool, i8) {
        let last = j + 1 == log_n;
        match (s, v) {
            (ST_CHK, false) => {
                if last {
                    (ST_HALT, false, 0)
                } else {
                    (ST_CHK, false, 1)
                }
            }
            (ST_CHK, true) => {
                if j == 0 {
                    (ST_DEC, true, 0)
                } else {
                    (ST_GOL, true, -1)
                }
            }
            (ST_GOL, b) => {
                if j == 0 {
                    (ST_DEC, b, 0)
                } else {
                    (ST_GOL, b, -1)
                }
            }
            (ST_DEC, false) => (ST_DEC, true, 1),
            (ST_DEC, true) => (ST_RET, false, 0),
            (ST_RET, b) => {
                if j == 0 {
                    (ST_QSTAR, b, 0)
                } else {
                    (ST_RET, b, -1)
                }
            }
            (ST_QSTAR, b) => (ST_CHK, b, 0),
            (s, b) => (s, b, 0), // halt or garbage states stay put
        }
    };
    for j in 0..log_n {
        let (v, s) = cell(j);
        let mut new_v = v;
        let mut new_s: u32 = 0;
        if s != 0 {
            let (ns, w, mv) = rule(j, v, s);
            new_v = w;
            if mv == 0 {
                new_s = ns;
            }
        }
        if j > 0 {
            let (lv, ls) = cell(j - 1);
            if ls != 0 {
                let (ns, _, mv) = rule(j - 1, lv, ls);
                if mv == 1 {
                    new_s = ns;
                }
            }
        }
        if j + 1 < log_n {
            let (rv, rs) = cell(j + 1);
            if rs != 0 {
                let (ns, _, mv) = rule(j + 1, rv, rs);
                if mv == -1 {
                    new_s = ns;
                }
            }
        }
        let o = shape.cell_off(j);
        out.set(o, new_v);
        for b in 0..3 {
            out.set(o + 1 + b, new_s >> b & 1 == 1);
        }
    }
}

fn beat_now(shape: &FetchShape, x: &[bool]) -> bool {
    let o = shape.cell_off(0);
    let s = u32::from(x[o + 1]) | u32::from(x[o + 2]) << 1 | u32::from(x[o + 3]) << 2;
    s == ST_QSTAR
}

/// Resets the configuration region to the machine's initial configuration
/// on the stored index.
fn reset_machine(shape: &FetchShape, x: &[bool], out: &mut Bits) {
    for j in 0..shape.log_n {
        let o = shape.cell_off(j);
        out.set(o, x[shape.i_off() + j]);
        for b in 0..3 {
            out.set(o + 1 + b, false);
        }
    }
    let o0 = shape.cell_off(0) + 1;
    for b in 0..3 {
        out.set(o0 + b, ST_CHK >> b & 1 == 1);
    }
    for j in shape.ctr_off()..shape.label_width() {
        out.set(j, false);
    }
}

/// The label-following step, total on all labels. Constants are fixed
/// points.
pub fn step_native(shape: &FetchShape, x_str: &Bits, label: &Bits) -> Bits {
    let x = label.as_slice();
    if label.read_u64(0..2) != T_CHAIN {
        return label.clone();
    }
    let mut out = label.clone();
    let final_now = x[shape.final_bit()];
    let dir_left = x[shape.d_off()];
    if final_now && !dir_left {
        // AND in the segment of the string selected by k, flip direction,
        // restart the machine
        let k = label.read_u64(shape.k_off()..shape.k_off() + shape.log_r) as usize;
        for j in 0..shape.seg {
            let xbit = k < shape.r && x_str.get(k * shape.seg + j);
            out.set(shape.p_off() + j, x[shape.p_off() + j] && xbit);
        }
        out.set(shape.d_off(), true);
        reset_machine(shape, x, &mut out);
        return out;
    }
    if final_now && dir_left {
        // the marker is back at the left end; emit the constant gate named
        // by the first bit (which requires the marker to sit in segment 0)
        let k = label.read_u64(shape.k_off()..shape.k_off() + shape.log_r);
        let bit = x[shape.p_off()] && k == 0;
        return shape.g_const(bit);
    }
    // ordinary tick: advance the machine, and on the beat shift the marker
    let beat = beat_now(shape, x);
    step_machine_cells(shape, x, &mut out);
    let ctr = CarryCounter::from_bits(label.slice(shape.ctr_off()..shape.label_width()));
    for (j, b) in ctr.increment().bits().iter().enumerate() {
        out.set(shape.ctr_off() + j, b);
    }
    if beat {
        if !dir_left {
            // shift right: marker moves toward higher positions, wrapping
            // into the next segment
            for j in 0..shape.seg {
                let prev = if j == 0 { shape.seg - 1 } else { j - 1 };
                out.set(shape.p_off() + j, x[shape.p_off() + prev]);
            }
            if x[shape.p_off() + shape.seg - 1] {
                let k = label.read_u64(shape.k_off()..shape.k_off() + shape.log_r);
                out.write_u64(
                    shape.k_off()..shape.k_off() + shape.log_r,
                    (k + 1) & (shape.r as u64 - 1),
                );
            }
        } else {
            for j in 0..shape.seg {
                let next = if j + 1 == shape.seg { 0 } else { j + 1 };
                out.set(shape.p_off() + j, x[shape.p_off() + next]);
            }
            if x[shape.p_off()] {
                let k = label.read_u64(shape.k_off()..shape.k_off() + shape.log_r);
                out.write_u64(
                    shape.k_off()..shape.k_off() + shape.log_r,
                    k.wrapping_sub(1) & (shape.r as u64 - 1),
                );
            }
        }
    }
    out
}

/// The out-gate label for 1-indexed `i`: marker at position 1, direction
/// right, machine initialized on `i - 1`.
pub fn out_label(shape: &FetchShape, i: usize) -> Bits {
    assert!(i >= 1 && i <= shape.n);
    let mut b = Bits::zeros(shape.label_width());
    b.write_u64(0..2, T_CHAIN);
    b.set(shape.p_off(), true);
    b.write_u64(shape.i_off()..shape.i_off() + shape.log_n, i as u64 - 1);
    for j in 0..shape.log_n {
        b.set(shape.cell_off(j), (i as u64 - 1) >> j & 1 == 1);
    }
    let o0 = shape.cell_off(0) + 1;
    for bit in 0..3 {
        b.set(o0 + bit, ST_CHK >> bit & 1 == 1);
    }
    b
}

/// Publishes the out-gate constructor as a local map from the `log n` index
/// bits (storing `i - 1`); every output bit reads at most one input bit.
pub fn out_label_map(shape: &FetchShape) -> LocalMap {
    let sh = shape.clone();
    let w = shape.label_width();
    LocalMap::from_fn(
        shape.log_n,
        w,
        {
            let sh = sh.clone();
            move |j| {
                if j >= sh.i_off() && j < sh.i_off() + sh.log_n {
                    vec![j - sh.i_off()]
                } else if j >= sh.c_off() && j < sh.ctr_off() && (j - sh.c_off()) % 4 == 0 {
                    vec![(j - sh.c_off()) / 4]
                } else {
                    vec![]
                }
            }
        },
        {
            let sh = sh.clone();
            move |x, j| {
                // rebuild from the index bits
                let mut i0 = 0u64;
                for (k, &b) in x.iter().take(sh.log_n).enumerate() {
                    if b {
                        i0 |= 1 << k;
                    }
                }
                out_label(&sh, i0 as usize + 1).get(j)
            }
        },
    )
}

/// The step map as a decision-tree forest. The `k` field is the only wide
/// dependency: marker and segment-number bits read all of `k` plus a
/// constant number of other bits, so the depth grows with `log r` and
/// nothing else.
pub fn step_map(shape: &FetchShape, x_str: &Bits) -> LocalMap {
    let w = shape.label_width();
    let sh = shape.clone();
    let xs = x_str.clone();
    let inc = increment_map(shape.counter_pairs);
    LocalMap::from_fn(
        w,
        w,
        {
            let sh = sh.clone();
            move |j| {
                // every bit copies itself when the label is a constant gate
                let mut deps: Vec<usize> = vec![0, 1, sh.final_bit(), sh.d_off(), j];
                if j < 2 {
                    // the emitted constant gate is named by the marker's
                    // first bit and segment number
                    deps.push(sh.p_off());
                    deps.extend(sh.k_off()..sh.k_off() + sh.log_r);
                } else if j >= sh.p_off() && j < sh.k_off() {
                    // marker bit: neighbours for the shift on the beat,
                    // itself for the AND, the whole of k for the segment
                    let r = j - sh.p_off();
                    deps.extend(sh.beat_bits());
                    deps.push(sh.p_off() + (r + 1) % sh.seg);
                    deps.push(sh.p_off() + (r + sh.seg - 1) % sh.seg);
                    deps.extend(sh.k_off()..sh.k_off() + sh.log_r);
                } else if j >= sh.k_off() && j < sh.d_off() {
                    deps.extend(sh.beat_bits());
                    deps.extend(sh.k_off()..sh.k_off() + sh.log_r);
                    deps.push(sh.p_off());
                    deps.push(sh.p_off() + sh.seg - 1);
                } else if j >= sh.c_off() && j < sh.ctr_off() {
                    // a machine cell reads its neighbourhood and, on reset,
                    // the matching index bit
                    let cell = (j - sh.c_off()) / 4;
                    let lo = cell.saturating_sub(1);
                    let hi = (cell + 2).min(sh.log_n);
                    deps.extend(sh.cell_off(lo)..sh.cell_off(hi));
                    deps.push(sh.i_off() + cell);
                } else if j >= sh.ctr_off() {
                    for p in inc.tree(j - sh.ctr_off()).dependencies() {
                        deps.push(sh.ctr_off() + p);
                    }
                }
                deps.sort_unstable();
                deps.dedup();
                deps
            }
        },
        move |x, j| {
            let label = Bits::from_slice(x);
            step_native(&sh, &xs, &label).get(j)
        },
    )
}

/// Walks the chain from `out_i` and returns the resolved bit with the chain
/// length.
pub fn resolve(shape: &FetchShape, x_str: &Bits, i: usize) -> Result<(bool, u64), FetchError> {
    let budget = 4 * (shape.n as u64 + 2) * (steps_to_final(shape.counter_pairs) + 2);
    let mut label = out_label(shape, i);
    for hops in 0..budget {
        match shape.tag(&label) {
            T_CONST0 => return Ok((false, hops)),
            T_CONST1 => return Ok((true, hops)),
            _ => label = step_native(shape, x_str, &label),
        }
    }
    Err(FetchError::ChainBudgetExceeded(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_all(n: usize, r: usize) {
        let shape = FetchShape::new(n, r).unwrap();
        for xv in 0..1u64 << n {
            let x = Bits::from_u64(xv, n);
            for i in 1..=n {
                let (bit, _) = resolve(&shape, &x, i).unwrap();
                assert_eq!(bit, x.get(i - 1), "n={n} r={r} x={x} i={i}");
            }
        }
    }

    #[test]
    fn resolves_every_bit_exhaustively_small() {
        for n in [1usize, 2, 4, 8] {
            for r in [1usize, 2, 4, n] {
                if r <= n && n % r == 0 {
                    check_all(n, r);
                }
            }
        }
    }

    #[test]
    fn all_zero_string_always_lands_on_g0() {
        let shape = FetchShape::new(8, 2).unwrap();
        let x = Bits::zeros(8);
        for i in 1..=8 {
            let (bit, _) = resolve(&shape, &x, i).unwrap();
            assert!(!bit);
        }
    }

    #[test]
    fn single_bit_string() {
        let shape = FetchShape::new(1, 1).unwrap();
        assert_eq!(resolve(&shape, &Bits::from_u64(1, 1), 1).unwrap().0, true);
        assert_eq!(resolve(&shape, &Bits::from_u64(0, 1), 1).unwrap().0, false);
    }

    #[test]
    fn chain_length_is_uniform_in_i() {
        // both machine phases run the full counter schedule, so every chain
        // has the same length: 2 * steps_to_final + 2
        let shape = FetchShape::new(8, 1).unwrap();
        let want = 2 * steps_to_final(shape.counter_pairs) + 2;
        let x = Bits::from_u64(0b10010110, 8);
        for i in 1..=8 {
            let (bit, hops) = resolve(&shape, &x, i).unwrap();
            assert_eq!(bit, x.get(i - 1));
            assert_eq!(hops, want, "i={i}");
        }
        // and the same closed form holds at n = 16
        let shape = FetchShape::new(16, 1).unwrap();
        let want = 2 * steps_to_final(shape.counter_pairs) + 2;
        let x = Bits::from_u64(0xbeef, 16);
        for i in [1usize, 7, 16] {
            assert_eq!(resolve(&shape, &x, i).unwrap().1, want);
        }
    }

    #[test]
    fn sampled_resolution_at_16() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for r in [1usize, 2, 4, 16] {
            let shape = FetchShape::new(16, r).unwrap();
            for _ in 0..40 {
                let x = Bits::from_u64(rng.gen::<u64>() & 0xffff, 16);
                for i in 1..=16 {
                    assert_eq!(resolve(&shape, &x, i).unwrap().0, x.get(i - 1));
                }
            }
        }
    }

    #[test]
    fn out_label_structure() {
        let shape = FetchShape::new(8, 2).unwrap();
        let l1 = out_label(&shape, 1);
        assert_eq!(shape.tag(&l1), T_CHAIN);
        assert!(l1.get(shape.p_off()));
        assert!(!l1.get(shape.d_off()), "direction starts right");
        assert_eq!(l1.read_u64(shape.k_off()..shape.k_off() + shape.log_r), 0);
        let ln = out_label(&shape, 8);
        // only the index field and machine tape differ from i = 1
        assert_eq!(
            ln.slice(shape.p_off()..shape.i_off()),
            l1.slice(shape.p_off()..shape.i_off())
        );
        // and the map form matches the constructor on every index
        let m = out_label_map(&shape);
        for i in 1..=8usize {
            let idx = Bits::from_u64(i as u64 - 1, shape.log_n);
            assert_eq!(m.eval(&idx), out_label(&shape, i));
        }
        assert!(m.measure().max_dependency_set <= 1);
    }

    #[test]
    fn step_map_matches_native_and_depth_tracks_log_r() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut depths = Vec::new();
        for r in [1usize, 2, 4, 8] {
            let shape = FetchShape::new(8, r).unwrap();
            let x = Bits::from_u64(rng.gen::<u64>() & 0xff, 8);
            let m = step_map(&shape, &x);
            for _ in 0..400 {
                let mut label = Bits::zeros(shape.label_width());
                for j in 0..label.len() {
                    label.set(j, rng.gen());
                }
                assert_eq!(m.eval(&label), step_native(&shape, &x, &label), "r={r} {label}");
            }
            depths.push(m.measure().max_depth);
        }
        // depth grows by at most one per doubling of r
        for pair in depths.windows(2) {
            assert!(pair[1] <= pair[0] + 1, "depths {depths:?}");
        }
    }

    #[test]
    fn step_depth_constant_across_n_at_r1() {
        let mut depths = Vec::new();
        for n in [8usize, 16, 32] {
            let shape = FetchShape::new(n, 1).unwrap();
            let x = Bits::zeros(n);
            depths.push(step_map(&shape, &x).measure().max_depth);
        }
        assert!(depths.windows(2).all(|w| w[0] == w[1]), "depths {depths:?}");
    }

    #[test]
    fn valid_chains_never_cycle_small() {
        // exhaustive over all labels at n = 4, r = 1: every chain reaches a
        // constant gate within the budget
        let shape = FetchShape::new(4, 1).unwrap();
        let x = Bits::from_u64(0b1010, 4);
        let w = shape.label_width();
        assert!(w <= 26, "width {w}");
        let budget = 4 * (shape.n as u64 + 2) * (steps_to_final(shape.counter_pairs) + 2);
        // sample the space densely rather than all 2^w when wide
        let samples: Box<dyn Iterator<Item = u64>> = if w <= 20 {
            Box::new(0..1u64 << w)
        } else {
            Box::new((0..1u64 << 20).map(|v| v * 31))
        };
        for v in samples {
            let mut label = Bits::from_u64(v & ((1 << w) - 1), w);
            let mut ok = false;
            for _ in 0..budget {
                if shape.tag(&label) != T_CHAIN {
                    ok = true;
                    break;
                }
                label = step_native(&shape, &x, &label);
            }
            assert!(ok, "label {v:b} cycled");
        }
    }

    #[test]
    fn bad_tradeoff_is_rejected() {
        assert!(FetchShape::new(8, 16).is_err());
        assert!(FetchShape::new(8, 3).is_err());
    }
}
