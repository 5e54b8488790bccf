//! The nondeterministic permutation network. Rows are wired with shift
//! structure: a node sends its two outputs to the rows obtained by shifting
//! in a 0 or a 1 at the top. Columns are numbered by a carry counter in
//! reverse order, so computing a child increments the counter and the
//! counter's top bit marks the input column. Every node is a 2x2 switch
//! built from a fixed 16-gate layout, one per selected configuration bit.
//!
//! Label layout (`t`, `w`, `i`, `s`, `d` at fixed offsets, low bits first):
//!   t: 2   region tag: 00 switch gate, 01 first input, 10 control bit,
//!          11 constant-0
//!   w: log T   row, bit 0 = least significant = "last" bit of the row word
//!   i: 2 * ceil(log2(4 log T))   column counter
//!   s: ceil(log2(width))   which configuration bit
//!   d: 4   gate inside the bit switch

use crate::bits::Bits;
use crate::circuit::{GateType, ImplicitCircuit};
use crate::counter::{increment_map, steps_to_final, CarryCounter};
use crate::localmap::LocalMap;
use thiserror::Error;

/// The 16-slot bit-switch gadget. Outputs: `OUT0 = (a0 and not z) or
/// (a1 and z)`, `OUT1 = (a0 and z) or (a1 and not z)`; `z = 0` passes
/// straight through.
pub mod gadget {
    pub const OUT0: u64 = 0;
    pub const OUT1: u64 = 1;
    pub const NAND0: u64 = 2; // And(4, 5)
    pub const NAND1: u64 = 3; // And(6, 7)
    pub const N_A0_NZ: u64 = 4; // Not(8)
    pub const N_A1_Z: u64 = 5; // Not(9)
    pub const N_A0_Z: u64 = 6; // Not(10)
    pub const N_A1_NZ: u64 = 7; // Not(11)
    pub const A0_NZ: u64 = 8; // And(A0, ZN)
    pub const A1_Z: u64 = 9; // And(A1, Z)
    pub const A0_Z: u64 = 10; // And(A0, Z)
    pub const A1_NZ: u64 = 11; // And(A1, ZN)
    pub const ZN: u64 = 12; // Not(Z)
    pub const A0: u64 = 13; // Copy of in-edge 0
    pub const A1: u64 = 14; // Copy of in-edge 1
    pub const Z: u64 = 15; // Copy of the control bit

    /// (type-ish arity, children) of each internal gate; `A0`, `A1` and `Z`
    /// cross out of the switch and are handled by the child map directly.
    pub fn internal_children(d: u64) -> Option<(u64, u64)> {
        match d {
            OUT0 => Some((NAND0, NAND0)),
            OUT1 => Some((NAND1, NAND1)),
            NAND0 => Some((N_A0_NZ, N_A1_Z)),
            NAND1 => Some((N_A0_Z, N_A1_NZ)),
            N_A0_NZ => Some((A0_NZ, A0_NZ)),
            N_A1_Z => Some((A1_Z, A1_Z)),
            N_A0_Z => Some((A0_Z, A0_Z)),
            N_A1_NZ => Some((A1_NZ, A1_NZ)),
            A0_NZ => Some((A0, ZN)),
            A1_Z => Some((A1, Z)),
            A0_Z => Some((A0, Z)),
            A1_NZ => Some((A1, ZN)),
            ZN => Some((Z, Z)),
            _ => None,
        }
    }

    pub fn gate_type(d: u64) -> crate::circuit::GateType {
        use crate::circuit::GateType::*;
        match d {
            OUT0 | OUT1 | N_A0_NZ | N_A1_Z | N_A0_Z | N_A1_NZ | ZN => Not,
            NAND0 | NAND1 | A0_NZ | A1_Z | A0_Z | A1_NZ => And,
            _ => Copy,
        }
    }
}

/// Region tags in the `t` field.
pub const TAG_SWITCH: u64 = 0b00;
pub const TAG_INPUT: u64 = 0b01;
pub const TAG_CONTROL: u64 = 0b10;
pub const TAG_CONST0: u64 = 0b11;

/// Shape of one network: `rows = T` (a power of two) copies of `width`-bit
/// values routed through `columns()` switch columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub rows_log2: usize,
    pub width: usize,
}

impl NetShape {
    pub fn new(rows: u64, width: usize) -> Self {
        assert!(rows.is_power_of_two() && rows >= 2);
        assert!(width >= 1);
        NetShape {
            rows_log2: rows.trailing_zeros() as usize,
            width,
        }
    }

    pub fn rows(&self) -> u64 {
        1 << self.rows_log2
    }

    /// Counter pair count: enough pairs to count `4 log T` columns.
    pub fn counter_pairs(&self) -> usize {
        let need = 4 * self.rows_log2.max(1);
        let mut m = 1;
        while (1usize << m) < need {
            m += 1;
        }
        m.max(2)
    }

    /// Total node columns, input column included: the counter walks from its
    /// first final value down to zero.
    pub fn columns(&self) -> u64 {
        steps_to_final(self.counter_pairs()) + 1
    }

    /// Free switch transitions between consecutive columns, excluding the
    /// fixed fan-out of the input column.
    pub fn transitions(&self) -> u64 {
        self.columns() - 2
    }

    // label field offsets, low bits first
    pub fn t_off(&self) -> usize {
        0
    }
    pub fn w_off(&self) -> usize {
        2
    }
    pub fn i_off(&self) -> usize {
        2 + self.rows_log2
    }
    pub fn s_off(&self) -> usize {
        self.i_off() + 2 * self.counter_pairs()
    }
    pub fn s_bits(&self) -> usize {
        (usize::BITS - (self.width - 1).max(1).leading_zeros()) as usize
    }
    pub fn d_off(&self) -> usize {
        self.s_off() + self.s_bits()
    }
    pub fn label_width(&self) -> usize {
        self.d_off() + 4
    }

    /// Counter value at a data-flow layer: layer 0 is the input column (the
    /// first final value), the last layer is the zero counter.
    pub fn counter_at_layer(&self, layer: u64) -> CarryCounter {
        let mut c = CarryCounter::zero(self.counter_pairs());
        for _ in 0..(self.columns() - 1 - layer) {
            c = c.increment();
        }
        c
    }

    pub fn switch_label(&self, row: u64, layer: u64, s: u64, d: u64) -> Bits {
        let mut b = Bits::zeros(self.label_width());
        b.write_u64(self.t_off()..self.t_off() + 2, TAG_SWITCH);
        b.write_u64(self.w_off()..self.w_off() + self.rows_log2, row);
        let ctr = self.counter_at_layer(layer);
        for (j, bit) in ctr.bits().iter().enumerate() {
            b.set(self.i_off() + j, bit);
        }
        b.write_u64(self.s_off()..self.s_off() + self.s_bits(), s);
        b.write_u64(self.d_off()..self.d_off() + 4, d);
        b
    }

    pub fn input_label(&self, row: u64, s: u64) -> Bits {
        let mut b = Bits::zeros(self.label_width());
        b.write_u64(self.t_off()..self.t_off() + 2, TAG_INPUT);
        b.write_u64(self.w_off()..self.w_off() + self.rows_log2, row);
        b.write_u64(self.s_off()..self.s_off() + self.s_bits(), s);
        b
    }

    pub fn control_label(&self, row: u64, layer: u64) -> Bits {
        let mut b = Bits::zeros(self.label_width());
        b.write_u64(self.t_off()..self.t_off() + 2, TAG_CONTROL);
        b.write_u64(self.w_off()..self.w_off() + self.rows_log2, row);
        let ctr = self.counter_at_layer(layer);
        for (j, bit) in ctr.bits().iter().enumerate() {
            b.set(self.i_off() + j, bit);
        }
        b
    }

    /// Output gate of row `row`, bit `s`: the OUT0 gate of the last-column
    /// switch, whose counter is zero.
    pub fn output_label(&self, row: u64, s: u64) -> Bits {
        self.switch_label(row, self.columns() - 1, s, gadget::OUT0)
    }

    pub fn tag(&self, label: &Bits) -> u64 {
        label.read_u64(self.t_off()..self.t_off() + 2)
    }
    pub fn row(&self, label: &Bits) -> u64 {
        label.read_u64(self.w_off()..self.w_off() + self.rows_log2)
    }
    pub fn s(&self, label: &Bits) -> u64 {
        label.read_u64(self.s_off()..self.s_off() + self.s_bits())
    }
    pub fn d(&self, label: &Bits) -> u64 {
        label.read_u64(self.d_off()..self.d_off() + 4)
    }
    /// The final flag of the column counter marks the input column.
    pub fn at_input_column(&self, label: &Bits) -> bool {
        label.get(self.i_off() + 2 * self.counter_pairs() - 1)
    }

    /// Index of an input gate `(row, s)`, the inverse of `input_label`.
    pub fn input_index(&self, label: &Bits) -> (u64, u64) {
        (self.row(label), self.s(label))
    }
}

/// Native child computation for every label. Selector picks between the two
/// children of fan-in-2 gates; fan-in-1 gates ignore it. Labels with no
/// children return the all-zero label.
pub fn child_native(shape: &NetShape, label: &Bits, sel: bool) -> Bits {
    let t = shape.tag(label);
    if t != TAG_SWITCH {
        // input gates resolve outside the network; control bits and
        // constants have no children
        return Bits::zeros(shape.label_width());
    }
    let d = shape.d(label);
    if shape.at_input_column(label) {
        // fan-out nodes: OUT0/OUT1 copy the input configuration on the side
        // matching the row's low bit and the all-zero constant on the other
        if d <= gadget::OUT1 {
            let row = shape.row(label);
            if d == (row & 1) {
                return shape.input_label(row, shape.s(label));
            }
            let mut z = Bits::zeros(shape.label_width());
            z.write_u64(shape.t_off()..shape.t_off() + 2, TAG_CONST0);
            return z;
        }
        // other gadget gates are unused in the input column; send them to
        // the constant as well
        let mut z = Bits::zeros(shape.label_width());
        z.write_u64(shape.t_off()..shape.t_off() + 2, TAG_CONST0);
        return z;
    }
    if let Some((c0, c1)) = gadget::internal_children(d) {
        let mut out = label.clone();
        out.write_u64(shape.d_off()..shape.d_off() + 4, if sel { c1 } else { c0 });
        return out;
    }
    match d {
        d if d == gadget::Z => {
            // the control bit for this switch
            let mut out = Bits::zeros(shape.label_width());
            out.write_u64(shape.t_off()..shape.t_off() + 2, TAG_CONTROL);
            let w0 = shape.w_off();
            for j in 0..shape.rows_log2 {
                out.set(w0 + j, label.get(w0 + j));
            }
            for j in 0..2 * shape.counter_pairs() {
                out.set(shape.i_off() + j, label.get(shape.i_off() + j));
            }
            out
        }
        _ => {
            // A0 or A1: the matching output gate of the preceding switch.
            // The in-edge bit enters at the bottom of the predecessor's row
            // word; the out-edge side used is this row's top bit; the column
            // counter increments toward the input column.
            let e = u64::from(shape.d(label) == gadget::A1);
            let mut out = label.clone();
            let w0 = shape.w_off();
            let t_log = shape.rows_log2;
            let row = shape.row(label);
            let mask = (1u64 << t_log) - 1;
            let prow = ((row << 1) | e) & mask;
            out.write_u64(w0..w0 + t_log, prow);
            let inc = shape.counter_at(label);
            for (j, b) in inc.increment().bits().iter().enumerate() {
                out.set(shape.i_off() + j, b);
            }
            let side = row >> (t_log - 1) & 1;
            out.write_u64(shape.d_off()..shape.d_off() + 4, side);
            out
        }
    }
}

impl NetShape {
    fn counter_at(&self, label: &Bits) -> CarryCounter {
        CarryCounter::from_bits(label.slice(self.i_off()..self.i_off() + 2 * self.counter_pairs()))
    }
}

pub fn type_native(shape: &NetShape, label: &Bits) -> GateType {
    match shape.tag(label) {
        TAG_INPUT | TAG_CONTROL => GateType::Input,
        TAG_CONST0 => GateType::Const0,
        _ => {
            if shape.at_input_column(label) {
                // fan-out nodes forward inputs or the constant
                GateType::Copy
            } else {
                gadget::gate_type(shape.d(label))
            }
        }
    }
}

/// Publishes the child computation as a decision-tree forest. Per output
/// bit the tree reads the tag (2), the gadget position (4), the input-column
/// flag (1) and then a constant number of label bits.
pub fn children_map(shape: &NetShape) -> LocalMap {
    let w = shape.label_width();
    let sh = shape.clone();
    let inc = increment_map(shape.counter_pairs());
    LocalMap::from_fn(
        w + 1,
        w,
        {
            let sh = shape.clone();
            let inc = inc.clone();
            move |j| {
                // dispatch bits read by every output: tag, gadget position,
                // input-column flag, selector, and the row's two end bits
                // (fan-out side and predecessor out-gate side)
                let mut deps: Vec<usize> = vec![sh.t_off(), sh.t_off() + 1, w];
                deps.extend(sh.d_off()..sh.d_off() + 4);
                deps.push(sh.i_off() + 2 * sh.counter_pairs() - 1);
                deps.push(sh.w_off());
                deps.push(sh.w_off() + sh.rows_log2 - 1);
                if j >= sh.w_off() && j < sh.w_off() + sh.rows_log2 {
                    deps.push(j); // copied row bit
                    if j > sh.w_off() {
                        deps.push(j - 1); // shifted-up row bit
                    }
                } else if j >= sh.i_off() && j < sh.s_off() {
                    for p in inc.tree(j - sh.i_off()).dependencies() {
                        deps.push(sh.i_off() + p);
                    }
                    deps.push(j);
                } else if j >= sh.s_off() && j < sh.d_off() {
                    deps.push(j);
                }
                deps.sort_unstable();
                deps.dedup();
                deps
            }
        },
        move |x, j| {
            let label = Bits::from_slice(&x[..w]);
            child_native(&sh, &label, x[w]).get(j)
        },
    )
}

pub fn type_map(shape: &NetShape) -> LocalMap {
    let w = shape.label_width();
    let sh = shape.clone();
    LocalMap::from_fn(
        w,
        GateType::CODE_BITS,
        {
            let sh = shape.clone();
            move |_| {
                let mut deps = vec![sh.t_off(), sh.t_off() + 1];
                deps.extend(sh.d_off()..sh.d_off() + 4);
                deps.push(sh.i_off() + 2 * sh.counter_pairs() - 1);
                deps
            }
        },
        move |x, j| {
            let label = Bits::from_slice(x);
            type_native(&sh, &label).code() >> j & 1 == 1
        },
    )
}

pub fn implicit_circuit(shape: &NetShape) -> ImplicitCircuit {
    ImplicitCircuit {
        label_width: shape.label_width(),
        type_map: type_map(shape),
        child_map: children_map(shape),
        root_label: shape.output_label(0, 0),
    }
}

/// Control bits: one per switch in layers `1..columns()-1` plus the select
/// bit of every last-column node (held uniformly as the last layer's
/// controls). Indexed `[layer - 1][row]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchSettings {
    pub rows_log2: usize,
    pub bits: Vec<Vec<bool>>,
}

impl SwitchSettings {
    pub fn all_direct(shape: &NetShape) -> Self {
        SwitchSettings {
            rows_log2: shape.rows_log2,
            bits: vec![vec![false; shape.rows() as usize]; (shape.columns() - 1) as usize],
        }
    }

    pub fn get(&self, layer: u64, row: u64) -> bool {
        self.bits[layer as usize - 1][row as usize]
    }

    pub fn set(&mut self, layer: u64, row: u64, v: bool) {
        self.bits[layer as usize - 1][row as usize] = v;
    }

    pub fn bit_count(&self) -> usize {
        self.bits.iter().map(|l| l.len()).sum()
    }
}

#[derive(Error, Debug)]
pub enum RoutingError {
    #[error("no routing plan for {rows} rows within {transitions} transitions")]
    RoutingFailed { rows: u64, transitions: u64 },
}

/// Reference semantics of the whole network: every switch either passes its
/// two values straight or crossed. The input column fans each configuration
/// out on the side matching its row's low bit and the all-zero string on the
/// other; the last column's control bit selects which input each output row
/// keeps.
pub fn eval_network(shape: &NetShape, inputs: &[Bits], settings: &SwitchSettings) -> Vec<Bits> {
    let rows = shape.rows() as usize;
    assert_eq!(inputs.len(), rows);
    for i in inputs {
        assert_eq!(i.len(), shape.width);
    }
    let t_log = shape.rows_log2;
    let zero = Bits::zeros(shape.width);
    // out[row][side] = value leaving the node on out-edge `side`
    let mut out: Vec<[Bits; 2]> = (0..rows)
        .map(|r| {
            let side = r & 1;
            if side == 0 {
                [inputs[r].clone(), zero.clone()]
            } else {
                [zero.clone(), inputs[r].clone()]
            }
        })
        .collect();
    for layer in 1..shape.columns() {
        let mut next: Vec<[Bits; 2]> = Vec::with_capacity(rows);
        for v in 0..rows {
            // in-edge e comes from predecessor (v >> 1 .. e at the top)'s
            // out-edge matching our row's top bit
            let side = v >> (t_log - 1) & 1;
            let in0 = out[(v << 1 | 0) & (rows - 1)][side].clone();
            let in1 = out[(v << 1 | 1) & (rows - 1)][side].clone();
            let z = settings.get(layer, v as u64);
            next.push(if z { [in1, in0] } else { [in0, in1] });
        }
        out = next;
    }
    // outputs are the OUT0 values of the last column
    out.into_iter().map(|pair| pair[0].clone()).collect()
}

// ---------------------------------------------------------------------------
// the router
//
// In transformed coordinates x = rot_left(row, layer - 1), the transition
// from layer L to L+1 is an exchange on the single x-bit (L-1) mod log T:
// the paired nodes are {x, x xor e_dim} and each member either keeps or
// flips that bit (members must end up distinct). The plan below opens one
// exchange level per bit and closes it in mirrored order, which is the
// classical recursive pairing decomposition; all other transitions stay
// direct. Direct transitions do not move anything in x-space.
// ---------------------------------------------------------------------------

fn rot_left(t_log: usize, w: u64, k: u64) -> u64 {
    let k = (k % t_log as u64) as u32;
    if k == 0 {
        return w;
    }
    let mask = (1u64 << t_log) - 1;
    ((w << k) | (w >> (t_log as u32 - k))) & mask
}

/// Planned transition indices (1-based): `open[d]` handles x-bit `d` on the
/// way in, `close[d]` on the way out; bit `t-1` is the palindrome centre and
/// has no close. Requires `(t-1)t + 1` transitions.
struct StagePlan {
    open: Vec<u64>,
    close: Vec<u64>,
}

fn plan_stages(t_log: usize, transitions: u64) -> Option<StagePlan> {
    let t = t_log as u64;
    let need = if t == 1 { 1 } else { (t - 1) * t + 1 };
    if need > transitions {
        return None;
    }
    // pass p (1-based) covers transitions (p-1)t+1 .. pt with dims 0..t-1
    let open = (0..t).map(|d| d + 1).collect();
    let close = (0..t.saturating_sub(1))
        .map(|d| (t - d - 1) * t + d + 1)
        .collect();
    Some(StagePlan { open, close })
}

/// Recursive pairing: assigns, for every planned transition, the new value
/// of the exchanged x-bit of every configuration.
fn solve_level(
    d: usize,
    t_log: usize,
    group: &[usize],
    x: &mut [u64],
    tx: &[u64],
    plan: &StagePlan,
    assign: &mut [Vec<bool>],
) {
    let bit = 1u64 << d;
    if d == t_log - 1 {
        // centre: the pair takes its target bits directly
        debug_assert_eq!(group.len(), 2);
        let tr = plan.open[d] as usize - 1;
        for &c in group {
            let v = tx[c] & bit != 0;
            assign[tr][c] = v;
            x[c] = x[c] & !bit | if v { bit } else { 0 };
        }
        debug_assert_ne!(x[group[0]], x[group[1]]);
        return;
    }
    // 2-colour the alternating cycles of current pairs and target pairs;
    // pairing keys ignore bits below the current level (the group shares
    // its current low bits, but target low bits vary freely)
    use std::collections::HashMap;
    let by_x: HashMap<u64, usize> = group.iter().map(|&c| (x[c] >> d, c)).collect();
    let by_tx: HashMap<u64, usize> = group.iter().map(|&c| (tx[c] >> d, c)).collect();
    let mut colour: HashMap<usize, bool> = HashMap::new();
    for &start in group {
        if colour.contains_key(&start) {
            continue;
        }
        // walk the alternating cycle: leave by the target edge, come back
        // by a current edge; colours alternate along each edge
        let mut c = start;
        let col = false;
        loop {
            colour.insert(c, col);
            let tp = by_tx[&((tx[c] >> d) ^ 1)];
            colour.insert(tp, !col);
            let cp = by_x[&((x[tp] >> d) ^ 1)];
            if cp == start {
                break;
            }
            c = cp;
        }
    }
    let tr_open = plan.open[d] as usize - 1;
    let tr_close = plan.close[d] as usize - 1;
    let mut g0 = Vec::with_capacity(group.len() / 2);
    let mut g1 = Vec::with_capacity(group.len() / 2);
    for &c in group {
        let h = colour[&c];
        assign[tr_open][c] = h;
        x[c] = x[c] & !bit | if h { bit } else { 0 };
        if h {
            g1.push(c);
        } else {
            g0.push(c);
        }
    }
    solve_level(d + 1, t_log, &g0, x, tx, plan, assign);
    solve_level(d + 1, t_log, &g1, x, tx, plan, assign);
    for &c in group {
        let v = tx[c] & bit != 0;
        assign[tr_close][c] = v;
        x[c] = x[c] & !bit | if v { bit } else { 0 };
    }
}

/// Finds switch settings realizing `pi`: output row `i` carries input
/// `pi(i)`. Verified against `eval_network` by the tests; fails only when
/// the stage plan does not fit the column budget (rows > 64).
pub fn route(shape: &NetShape, pi: &[u64]) -> Result<SwitchSettings, RoutingError> {
    let t_log = shape.rows_log2;
    let rows = shape.rows();
    assert_eq!(pi.len() as u64, rows, "permutation size");
    {
        let mut seen = vec![false; rows as usize];
        for &p in pi {
            assert!(p < rows && !seen[p as usize], "not a permutation");
            seen[p as usize] = true;
        }
    }
    let transitions = shape.transitions();
    let plan = plan_stages(t_log, transitions).ok_or(RoutingError::RoutingFailed {
        rows,
        transitions,
    })?;

    // x at layer 1 equals the row there: config w sits at sr(w)
    let mut x: Vec<u64> = (0..rows)
        .map(|w| (w >> 1) | ((w & 1) << (t_log - 1)))
        .collect();
    // x at the last layer: output row v transformed through all transitions
    let mut tx: Vec<u64> = vec![0; rows as usize];
    for v in 0..rows {
        tx[pi[v as usize] as usize] = rot_left(t_log, v, transitions);
    }
    let mut assign: Vec<Vec<bool>> = vec![vec![false; rows as usize]; transitions as usize];
    let mut planned = vec![false; transitions as usize];
    for &tr in plan.open.iter().chain(plan.close.iter()) {
        planned[tr as usize - 1] = true;
    }
    let group: Vec<usize> = (0..rows as usize).collect();
    solve_level(0, t_log, &group, &mut x, &tx, &plan, &mut assign);

    // replay the arrangement and derive per-node control bits
    let mut settings = SwitchSettings::all_direct(shape);
    let mut row_of: Vec<u64> = (0..rows)
        .map(|w| (w >> 1) | ((w & 1) << (t_log - 1)))
        .collect();
    let mut in_edge: Vec<u64> = (0..rows).map(|w| w & 1).collect();
    for tr in 1..=transitions {
        for cfg in 0..rows as usize {
            let row = row_of[cfg];
            // the exchanged x-bit equals the row's low bit at this layer
            let b = if planned[tr as usize - 1] {
                u64::from(assign[tr as usize - 1][cfg])
            } else {
                row & 1
            };
            settings.set(tr, row, b != in_edge[cfg]);
            row_of[cfg] = (row >> 1) | (b << (t_log - 1));
            in_edge[cfg] = row & 1;
        }
        debug_assert!({
            let mut seen = vec![false; rows as usize];
            row_of.iter().all(|&r| {
                let fresh = !seen[r as usize];
                seen[r as usize] = true;
                fresh
            })
        });
    }
    // last column: select the in-edge each configuration arrived on
    for cfg in 0..rows as usize {
        settings.set(shape.columns() - 1, row_of[cfg], in_edge[cfg] == 1);
    }
    Ok(settings)
}

/// Exhaustive backtracking router used as a verification oracle at small
/// sizes: searches per-transition exchange assignments directly.
pub fn route_oracle(shape: &NetShape, pi: &[u64]) -> Option<SwitchSettings> {
    let t_log = shape.rows_log2;
    let rows = shape.rows();
    assert!(rows <= 8, "oracle is exhaustive, keep it small");
    let transitions = shape.transitions();
    let tx: Vec<u64> = {
        let mut v = vec![0u64; rows as usize];
        for r in 0..rows {
            v[pi[r as usize] as usize] = rot_left(t_log, r, transitions);
        }
        v
    };
    let x0: Vec<u64> = (0..rows)
        .map(|w| (w >> 1) | ((w & 1) << (t_log - 1)))
        .collect();

    fn dfs(
        t_log: usize,
        tr: u64,
        transitions: u64,
        x: &Vec<u64>,
        tx: &Vec<u64>,
        choice: &mut Vec<Vec<bool>>,
    ) -> bool {
        if tr > transitions {
            return x == tx;
        }
        let dim = ((tr as usize - 1) % t_log) as u64;
        let bit = 1u64 << dim;
        // remaining transitions can still fix bits whose dimension recurs
        let mut fixable = vec![false; t_log];
        for rest in tr + 1..=transitions {
            fixable[(rest as usize - 1) % t_log] = true;
        }
        // prune: bits not touched now or later must already match
        for c in 0..x.len() {
            for d in 0..t_log {
                if d as u64 != dim && !fixable[d] && (x[c] ^ tx[c]) & (1 << d) != 0 {
                    return false;
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..x.len())
            .filter(|&c| x[c] & bit == 0)
            .map(|c| {
                let partner = (0..x.len()).find(|&p| x[p] == x[c] | bit).unwrap();
                (c, partner)
            })
            .collect();
        // each pair independently keeps or swaps its bit
        let k = pairs.len();
        for mask in 0..1u32 << k {
            let mut nx = x.clone();
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    nx[a] |= bit;
                    nx[b] &= !bit;
                }
            }
            choice.push(nx.iter().map(|&v| v & bit != 0).collect());
            if dfs(t_log, tr + 1, transitions, &nx, tx, choice) {
                return true;
            }
            choice.pop();
        }
        false
    }

    let mut choices: Vec<Vec<bool>> = Vec::new();
    if !dfs(t_log, 1, transitions, &x0, &tx, &mut choices) {
        return None;
    }
    // convert to control bits exactly as `route` does
    let mut settings = SwitchSettings::all_direct(shape);
    let mut row_of: Vec<u64> = (0..rows)
        .map(|w| (w >> 1) | ((w & 1) << (t_log - 1)))
        .collect();
    let mut in_edge: Vec<u64> = (0..rows).map(|w| w & 1).collect();
    for tr in 1..=transitions {
        for cfg in 0..rows as usize {
            let row = row_of[cfg];
            let b = u64::from(choices[tr as usize - 1][cfg]);
            settings.set(tr, row, b != in_edge[cfg]);
            row_of[cfg] = (row >> 1) | (b << (t_log - 1));
            in_edge[cfg] = row & 1;
        }
    }
    for cfg in 0..rows as usize {
        settings.set(shape.columns() - 1, row_of[cfg], in_edge[cfg] == 1);
    }
    Some(settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(rows: u64, width: usize) -> NetShape {
        NetShape::new(rows, width)
    }

    fn test_inputs(shape: &NetShape, rng: &mut ChaCha8Rng) -> Vec<Bits> {
        (0..shape.rows())
            .map(|r| {
                let mut b = Bits::from_u64(rng.gen::<u64>() & ((1 << shape.width) - 1), shape.width);
                b.set(0, true); // keep configurations distinct from the dummy
                b.write_u64(1..shape.width.min(7), r + 1);
                b
            })
            .collect()
    }

    fn perms(n: u64) -> Vec<Vec<u64>> {
        fn rec(rest: &mut Vec<u64>, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if rest.is_empty() {
                out.push(acc.clone());
                return;
            }
            for i in 0..rest.len() {
                let v = rest.remove(i);
                acc.push(v);
                rec(rest, acc, out);
                acc.pop();
                rest.insert(i, v);
            }
        }
        let mut out = Vec::new();
        rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn route_all_permutations_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rows in [2u64, 4] {
            let sh = shape(rows, 6);
            for pi in perms(rows) {
                let settings = route(&sh, &pi).unwrap();
                let inputs = test_inputs(&sh, &mut rng);
                let out = eval_network(&sh, &inputs, &settings);
                for (i, o) in out.iter().enumerate() {
                    assert_eq!(o, &inputs[pi[i] as usize], "rows={rows} pi={pi:?} row {i}");
                }
            }
        }
    }

    #[test]
    fn route_random_permutations_medium() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for rows in [8u64, 16, 32] {
            let sh = shape(rows, 9);
            let count = if rows == 8 { 60 } else { 25 };
            for _ in 0..count {
                let mut pi: Vec<u64> = (0..rows).collect();
                pi.shuffle(&mut rng);
                let settings = route(&sh, &pi).unwrap();
                let inputs = test_inputs(&sh, &mut rng);
                let out = eval_network(&sh, &inputs, &settings);
                for (i, o) in out.iter().enumerate() {
                    assert_eq!(o, &inputs[pi[i] as usize], "rows={rows} row {i}");
                }
            }
        }
    }

    #[test]
    fn oracle_agrees_with_router_at_4() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sh = shape(4, 5);
        for pi in perms(4) {
            let oracle = route_oracle(&sh, &pi).expect("oracle finds a routing");
            let inputs = test_inputs(&sh, &mut rng);
            let out = eval_network(&sh, &inputs, &oracle);
            for (i, o) in out.iter().enumerate() {
                assert_eq!(o, &inputs[pi[i] as usize]);
            }
        }
    }

    #[test]
    fn identity_routes_with_direct_middle() {
        // the identity permutation needs no crossings away from the planned
        // stages; just check it routes and verifies
        let sh = shape(8, 6);
        let pi: Vec<u64> = (0..8).collect();
        let settings = route(&sh, &pi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs = test_inputs(&sh, &mut rng);
        assert_eq!(eval_network(&sh, &inputs, &settings), inputs);
    }

    #[test]
    fn random_settings_permute_or_emit_dummy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rows in [4u64, 8] {
            let sh = shape(rows, 8);
            for _ in 0..500 {
                let mut settings = SwitchSettings::all_direct(&sh);
                for layer in 1..sh.columns() {
                    for row in 0..rows {
                        settings.set(layer, row, rng.gen());
                    }
                }
                let inputs = test_inputs(&sh, &mut rng);
                let out = eval_network(&sh, &inputs, &settings);
                let mut sorted_in: Vec<&Bits> = inputs.iter().collect();
                let mut sorted_out: Vec<&Bits> = out.iter().collect();
                sorted_in.sort();
                sorted_out.sort();
                let is_perm = sorted_in == sorted_out;
                let has_dummy = out.iter().any(|o| !o.any());
                assert!(is_perm || has_dummy, "rows={rows}");
            }
        }
    }

    #[test]
    fn children_match_shift_structure() {
        // a switch gate's two data leaves point at the rows obtained by
        // shifting in a 0 or a 1
        let sh = shape(4, 4);
        // row "01" in word order is integer 1 (top bit first)
        let g = sh.switch_label(1, 3, 2, gadget::A0);
        let c0 = child_native(&sh, &g, false);
        let g1 = sh.switch_label(1, 3, 2, gadget::A1);
        let c1 = child_native(&sh, &g1, false);
        assert_eq!(sh.row(&c0), 0b10);
        assert_eq!(sh.row(&c1), 0b11);
        // both are output gates of the previous column
        assert_eq!(sh.d(&c0), gadget::OUT0); // side = top bit of row 01
        assert_eq!(sh.tag(&c0), TAG_SWITCH);
        // and their counters are one increment further along
        assert_eq!(
            sh.counter_at(&c0).bits(),
            sh.counter_at(&g).increment().bits()
        );
    }

    #[test]
    fn const0_labels_have_no_children() {
        let sh = shape(4, 4);
        let mut z = Bits::zeros(sh.label_width());
        z.write_u64(0..2, TAG_CONST0);
        assert_eq!(type_native(&sh, &z), GateType::Const0);
    }

    #[test]
    fn first_column_gates_copy_inputs_or_zero() {
        let sh = shape(4, 4);
        // row 2 word is "10"; its low bit is 0, so OUT0 carries the input
        let g = sh.switch_label(2, 0, 1, gadget::OUT0);
        assert!(sh.at_input_column(&g));
        let c = child_native(&sh, &g, false);
        assert_eq!(sh.tag(&c), TAG_INPUT);
        assert_eq!(sh.input_index(&c), (2, 1));
        let g1 = sh.switch_label(2, 0, 1, gadget::OUT1);
        let c1 = child_native(&sh, &g1, false);
        assert_eq!(sh.tag(&c1), TAG_CONST0);
    }

    #[test]
    fn output_and_input_index_round_trip() {
        let sh = shape(4, 4);
        for row in 0..4 {
            for s in 0..4 {
                let out = sh.output_label(row, s);
                assert_eq!(sh.tag(&out), TAG_SWITCH);
                assert_eq!((sh.row(&out), sh.s(&out)), (row, s));
                assert!(!sh.counter_at(&out).bits().any(), "last column counter is zero");
                assert_eq!(sh.d(&out), gadget::OUT0);
                let inp = sh.input_label(row, s);
                assert_eq!(sh.input_index(&inp), (row, s));
            }
        }
    }

    #[test]
    fn switch_gate_count_is_sixteen() {
        // the gadget table covers every d code
        for d in 0..16u64 {
            let _ = gadget::gate_type(d);
        }
        // and the mux semantics hold gate by gate
        for a0 in [false, true] {
            for a1 in [false, true] {
                for z in [false, true] {
                    let mut vals = [false; 16];
                    vals[gadget::A0 as usize] = a0;
                    vals[gadget::A1 as usize] = a1;
                    vals[gadget::Z as usize] = z;
                    vals[gadget::ZN as usize] = !z;
                    for d in [
                        gadget::A0_NZ,
                        gadget::A1_Z,
                        gadget::A0_Z,
                        gadget::A1_NZ,
                        gadget::N_A0_NZ,
                        gadget::N_A1_Z,
                        gadget::N_A0_Z,
                        gadget::N_A1_NZ,
                        gadget::NAND0,
                        gadget::NAND1,
                        gadget::OUT0,
                        gadget::OUT1,
                    ] {
                        let (c0, c1) = gadget::internal_children(d).unwrap();
                        let (v0, v1) = (vals[c0 as usize], vals[c1 as usize]);
                        vals[d as usize] = match gadget::gate_type(d) {
                            GateType::And => v0 && v1,
                            GateType::Not => !v0,
                            _ => v0,
                        };
                    }
                    let want0 = if z { a1 } else { a0 };
                    let want1 = if z { a0 } else { a1 };
                    assert_eq!(vals[gadget::OUT0 as usize], want0);
                    assert_eq!(vals[gadget::OUT1 as usize], want1);
                }
            }
        }
    }

    #[test]
    fn children_map_locality_constant_across_sizes() {
        let mut depths = Vec::new();
        for rows in [4u64, 8, 16, 32] {
            let sh = shape(rows, 8);
            let m = children_map(&sh);
            depths.push(m.measure().max_depth);
        }
        assert!(
            depths.windows(2).all(|w| w[0] == w[1]),
            "depths vary: {depths:?}"
        );
    }

    #[test]
    fn children_map_matches_native() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sh = shape(8, 5);
        let m = children_map(&sh);
        let w = sh.label_width();
        for _ in 0..3000 {
            let mut label = Bits::zeros(w);
            for j in 0..w {
                label.set(j, rng.gen());
            }
            for sel in [false, true] {
                let mut inp = label.clone();
                inp.push(sel);
                assert_eq!(m.eval(&inp), child_native(&sh, &label, sel), "{label} {sel}");
            }
        }
    }

    #[test]
    fn network_circuit_acyclic_exhaustive_at_4() {
        let sh = shape(4, 2);
        let circ = implicit_circuit(&sh);
        assert!(circ.label_width <= 16, "width {}", circ.label_width);
        let r = circ.check_acyclic(true, 0);
        assert!(r.acyclic && !r.partial);
    }

    #[test]
    fn routing_fails_beyond_plan_budget() {
        let sh = shape(128, 4);
        let pi: Vec<u64> = (0..128).collect();
        assert!(matches!(
            route(&sh, &pi),
            Err(RoutingError::RoutingFailed { .. })
        ));
    }

    #[test]
    fn network_evaluates_like_circuit_gates() {
        // evaluate a routed network both ways: array semantics vs label
        // semantics through the implicit circuit
        let sh = shape(4, 3);
        let pi = vec![2u64, 0, 3, 1];
        let settings = route(&sh, &pi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs = test_inputs(&sh, &mut rng);
        let out = eval_network(&sh, &inputs, &settings);
        let circ = implicit_circuit(&sh);
        let assignment = |label: &Bits| -> bool {
            match sh.tag(label) {
                TAG_INPUT => {
                    let (row, s) = sh.input_index(label);
                    inputs[row as usize].get(s as usize)
                }
                TAG_CONTROL => {
                    // recover (layer, row) from the counter value
                    let ctr = sh.counter_at(label);
                    let mut layer = None;
                    for l in 1..sh.columns() {
                        if sh.counter_at_layer(l).bits() == ctr.bits() {
                            layer = Some(l);
                            break;
                        }
                    }
                    settings.get(layer.expect("control at a real layer"), sh.row(label))
                }
                _ => unreachable!(),
            }
        };
        for row in 0..4u64 {
            for s in 0..3u64 {
                let got = circ
                    .evaluate_from(&sh.output_label(row, s), None, Some(&assignment), 1 << 20)
                    .unwrap();
                assert_eq!(got, out[row as usize].get(s as usize), "row {row} bit {s}");
            }
        }
    }
}
