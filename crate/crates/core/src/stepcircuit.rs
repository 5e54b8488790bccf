//! Turns a space-bounded child-computing machine into an implicit circuit
//! whose child map has constant per-bit locality. Gate labels are machine
//! configurations; computing a child is one machine step, so every output
//! bit of the child map reads a bounded neighborhood of the label.

use crate::bits::Bits;
use crate::circuit::{GateType, ImplicitCircuit};
use crate::counter::{increment_map, steps_to_final, CarryCounter};
use crate::localmap::LocalMap;
use crate::machine::Sym;
use thiserror::Error;

/// Where a child machine finds its input `(g, c, n)` and leaves its output.
/// The output is the child's label in the value bits of `label_cells` and
/// the child's type in three fixed tape bits (`(cell, bit)` pairs; bit 0 is
/// the value bit, bit 1 the blank flag).
#[derive(Clone, Debug)]
pub struct IoLayout {
    pub label_cells: std::ops::Range<usize>,
    pub csel_cell: usize,
    pub n_cells: std::ops::Range<usize>,
    pub type_bits: [(usize, usize); 3],
}

/// A deterministic single-tape machine with `2^q - 1` states (state code 0
/// means "no head here"), `k * log n` cells and `n^k'` time. A missing rule
/// halts the machine in place.
#[derive(Clone, Debug)]
pub struct ChildMachine {
    pub q: usize,
    pub k: usize,
    pub kprime: usize,
    pub start_state: u32,
    pub io: IoLayout,
    rules: Vec<Option<(u32, Sym, i8)>>,
}

#[derive(Error, Debug)]
pub enum SpreadError {
    #[error("machine violates its budget on input g={g} c={c}: {reason}")]
    BudgetViolation { g: u64, c: bool, reason: String },
    #[error("layout does not fit: {0}")]
    Layout(String),
}

impl ChildMachine {
    pub fn new(q: usize, k: usize, kprime: usize, start_state: u32, io: IoLayout) -> Self {
        assert!(q >= 1 && start_state >= 1 && (start_state as u64) < (1 << q));
        ChildMachine {
            q,
            k,
            kprime,
            start_state,
            io,
            rules: vec![None; (1usize << q) * 3],
        }
    }

    fn sym_digit(s: Sym) -> usize {
        match s {
            Sym::S0 => 0,
            Sym::S1 => 1,
            Sym::Blank => 2,
        }
    }

    pub fn add_rule(&mut self, state: u32, read: Sym, next: u32, write: Sym, mv: i8) {
        assert!(state >= 1 && (state as u64) < (1 << self.q));
        assert!(next >= 1 && (next as u64) < (1 << self.q));
        let idx = state as usize * 3 + Self::sym_digit(read);
        assert!(self.rules[idx].is_none(), "duplicate rule");
        self.rules[idx] = Some((next, write, mv));
    }

    pub fn rule(&self, state: u32, read: Sym) -> Option<(u32, Sym, i8)> {
        if state == 0 || (state as u64) >= (1 << self.q) {
            return None;
        }
        self.rules[state as usize * 3 + Self::sym_digit(read)]
    }
}

/// Fixed bit layout of a configuration label: `cells` cells of `q + 2` bits
/// each (value bit, blank flag, `q` state bits), then a carry counter of
/// `pairs` pairs.
#[derive(Clone, Debug)]
pub struct SpreadLayout {
    pub q: usize,
    pub cells: usize,
    pub pairs: usize,
}

impl SpreadLayout {
    pub fn for_machine(m: &ChildMachine, log_n: usize) -> Self {
        SpreadLayout {
            q: m.q,
            cells: m.k * log_n,
            pairs: m.kprime * log_n,
        }
    }

    pub fn width(&self) -> usize {
        (self.q + 2) * self.cells + 2 * self.pairs
    }

    pub fn cell_off(&self, i: usize) -> usize {
        i * (self.q + 2)
    }

    pub fn counter_off(&self) -> usize {
        (self.q + 2) * self.cells
    }

    /// Position of the final flag, the counter's most significant carry.
    pub fn final_bit(&self) -> usize {
        self.counter_off() + 2 * self.pairs - 1
    }

    pub fn sym(&self, cfg: &Bits, cell: usize) -> Sym {
        let o = self.cell_off(cell);
        Sym::from_code(cfg.read_u64(o..o + 2))
    }

    pub fn set_sym(&self, cfg: &mut Bits, cell: usize, s: Sym) {
        let o = self.cell_off(cell);
        cfg.write_u64(o..o + 2, s.code());
    }

    pub fn state(&self, cfg: &Bits, cell: usize) -> u32 {
        let o = self.cell_off(cell) + 2;
        cfg.read_u64(o..o + self.q) as u32
    }

    pub fn set_state(&self, cfg: &mut Bits, cell: usize, state: u32) {
        let o = self.cell_off(cell) + 2;
        cfg.write_u64(o..o + self.q, state as u64);
    }

    pub fn counter(&self, cfg: &Bits) -> CarryCounter {
        CarryCounter::from_bits(cfg.slice(self.counter_off()..self.width()))
    }

    pub fn is_final(&self, cfg: &Bits) -> bool {
        cfg.get(self.final_bit())
    }
}

fn sym_at(lay: &SpreadLayout, x: &[bool], cell: usize) -> Sym {
    let o = lay.cell_off(cell);
    Sym::from_code(u64::from(x[o]) | u64::from(x[o + 1]) << 1)
}

fn state_at(lay: &SpreadLayout, x: &[bool], cell: usize) -> u32 {
    let o = lay.cell_off(cell) + 2;
    let mut s = 0u32;
    for b in 0..lay.q {
        if x[o + b] {
            s |= 1 << b;
        }
    }
    s
}

/// Next (symbol, state) of one cell, reading only the cell and its two
/// neighbours. Total on all bit strings; where no machine rule applies the
/// cell keeps its bits.
pub fn upd_cell(m: &ChildMachine, lay: &SpreadLayout, x: &[bool], cell: usize) -> (Sym, u32) {
    let (sym, state) = (sym_at(lay, x, cell), state_at(lay, x, cell));
    let mut new_sym = sym;
    let mut stay: u32 = state; // state bits if nothing moves
    if state != 0 {
        if let Some((next, w, mv)) = m.rule(state, sym) {
            new_sym = w;
            stay = if mv == 0 { next } else { 0 };
        }
    }
    let mut arrival: u32 = 0;
    let mut arrivals = 0usize;
    if cell > 0 {
        let (ls, lstate) = (sym_at(lay, x, cell - 1), state_at(lay, x, cell - 1));
        if lstate != 0 {
            if let Some((next, _, 1)) = m.rule(lstate, ls) {
                arrival = next;
                arrivals += 1;
            }
        }
    }
    if cell + 1 < lay.cells {
        let (rs, rstate) = (sym_at(lay, x, cell + 1), state_at(lay, x, cell + 1));
        if rstate != 0 {
            if let Some((next, _, -1)) = m.rule(rstate, rs) {
                arrival = next;
                arrivals += 1;
            }
        }
    }
    let new_state = match (stay, arrivals) {
        (0, 1) => arrival,
        (s, 0) => s,
        // conflicting heads never occur on valid configurations; keep the
        // old bits so the map stays total
        _ => state,
    };
    (new_sym, new_state)
}

/// One local step: the counter is incremented unconditionally and every cell
/// is updated from itself and its two neighbours.
pub fn upd_native(m: &ChildMachine, lay: &SpreadLayout, cfg: &Bits) -> Bits {
    let mut out = cfg.clone();
    let ctr = lay.counter(cfg).increment();
    for (j, b) in ctr.bits().iter().enumerate() {
        out.set(lay.counter_off() + j, b);
    }
    for cell in 0..lay.cells {
        let (s, st) = upd_cell(m, lay, cfg.as_slice(), cell);
        lay.set_sym(&mut out, cell, s);
        lay.set_state(&mut out, cell, st);
    }
    out
}

/// The child circuit family description a fixture ships alongside its
/// machine, used as the direct-evaluation side of equivalence tests.
#[derive(Clone, Debug)]
pub struct FamilyCircuit {
    /// (type, children); child entries index into this list.
    pub gates: Vec<(GateType, [usize; 2])>,
    pub output: usize,
    pub inputs: usize,
}

impl FamilyCircuit {
    pub fn eval(&self, x: &Bits) -> bool {
        self.eval_gate(self.output, x)
    }

    fn eval_gate(&self, g: usize, x: &Bits) -> bool {
        let (ty, ch) = &self.gates[g];
        match ty {
            GateType::Const0 => false,
            GateType::Const1 => true,
            GateType::Input => x.get(g % self.inputs),
            GateType::Not => !self.eval_gate(ch[0], x),
            GateType::And => self.eval_gate(ch[0], x) && self.eval_gate(ch[1], x),
            _ => unreachable!("family circuits use the five base types"),
        }
    }
}

/// A built step circuit: the implicit circuit plus the pieces needed to
/// resolve inputs and to run the reference machine.
pub struct StepCircuit {
    pub circuit: ImplicitCircuit,
    pub layout: SpreadLayout,
    pub machine: ChildMachine,
    pub log_n: usize,
    pub n_param: usize,
}

/// The gate label held in a configuration's label cells, read as raw value
/// bits.
pub fn label_value(m: &ChildMachine, lay: &SpreadLayout, cfg: &Bits) -> u64 {
    let mut g = 0u64;
    for (k, cell) in m.io.label_cells.clone().enumerate() {
        if cfg.get(lay.cell_off(cell)) {
            g |= 1 << k;
        }
    }
    g
}

impl StepCircuit {
    /// Input index named by an input-type configuration: the label cells'
    /// value bits reduced mod the input count.
    pub fn input_index(&self, label: &Bits, inputs: usize) -> usize {
        label_value(&self.machine, &self.layout, label) as usize % inputs
    }

    pub fn evaluate_on(&self, x: &Bits, inputs: usize) -> bool {
        let resolve = |label: &Bits| x.get(self.input_index(label, inputs));
        self.circuit.evaluate(None, Some(&resolve)).expect("step circuit evaluates")
    }
}

/// Simulates the machine from the initial configuration on `(g, c)` and
/// checks its budgets: it must halt within the counter schedule and stay on
/// its tape.
fn check_budget(m: &ChildMachine, lay: &SpreadLayout, n_param: usize, g: u64, c: bool) -> Result<(), SpreadError> {
    let mut tape: Vec<Sym> = vec![Sym::Blank; lay.cells];
    for (k, cell) in m.io.label_cells.clone().enumerate() {
        tape[cell] = Sym::from_bit(g >> k & 1 == 1);
    }
    tape[m.io.csel_cell] = Sym::from_bit(c);
    for (k, cell) in m.io.n_cells.clone().enumerate() {
        tape[cell] = Sym::from_bit(n_param >> k & 1 == 1);
    }
    let mut head: i64 = 0;
    let mut state = m.start_state;
    let deadline = steps_to_final(lay.pairs);
    for _ in 0..deadline {
        let sym = tape[head as usize];
        match m.rule(state, sym) {
            None => return Ok(()),
            Some((next, w, mv)) => {
                tape[head as usize] = w;
                head += mv as i64;
                state = next;
                if head < 0 || head as usize >= lay.cells {
                    return Err(SpreadError::BudgetViolation {
                        g,
                        c,
                        reason: format!("head left the tape at {head}"),
                    });
                }
            }
        }
    }
    if m.rule(state, tape[head as usize]).is_some() {
        return Err(SpreadError::BudgetViolation {
            g,
            c,
            reason: format!("still running after {deadline} steps"),
        });
    }
    Ok(())
}

/// Builds the initial configuration labelling the first gate of the copy
/// chain that computes child `c` of gate `g`.
pub fn initial_config(m: &ChildMachine, lay: &SpreadLayout, n_param: usize, g: u64, c: bool) -> Bits {
    let mut cfg = Bits::zeros(lay.width());
    for cell in 0..lay.cells {
        lay.set_sym(&mut cfg, cell, Sym::Blank);
    }
    for (k, cell) in m.io.label_cells.clone().enumerate() {
        lay.set_sym(&mut cfg, cell, Sym::from_bit(g >> k & 1 == 1));
    }
    lay.set_sym(&mut cfg, m.io.csel_cell, Sym::from_bit(c));
    for (k, cell) in m.io.n_cells.clone().enumerate() {
        lay.set_sym(&mut cfg, cell, Sym::from_bit(n_param >> k & 1 == 1));
    }
    lay.set_state(&mut cfg, 0, m.start_state);
    cfg
}

/// The root label: a final configuration whose tape holds the output gate's
/// label and type; the head region is left clear.
pub fn root_config(m: &ChildMachine, lay: &SpreadLayout, n_param: usize, g_out: u64, t_out: GateType) -> Bits {
    let mut cfg = initial_config(m, lay, n_param, g_out, false);
    lay.set_state(&mut cfg, 0, 0);
    let code = t_out.code();
    for (j, (cell, bit)) in m.io.type_bits.iter().enumerate() {
        cfg.set(lay.cell_off(*cell) + bit, code >> j & 1 == 1);
    }
    // fast-forward the counter to the first final value
    let mut ctr = CarryCounter::zero(lay.pairs);
    for _ in 0..steps_to_final(lay.pairs) {
        ctr = ctr.increment();
    }
    for (j, b) in ctr.bits().iter().enumerate() {
        cfg.set(lay.counter_off() + j, b);
    }
    cfg
}

fn type_of_native(m: &ChildMachine, lay: &SpreadLayout, cfg: &Bits) -> GateType {
    if !lay.is_final(cfg) {
        return GateType::Copy;
    }
    let mut code = 0u64;
    for (j, (cell, bit)) in m.io.type_bits.iter().enumerate() {
        if cfg.get(lay.cell_off(*cell) + bit) {
            code |= 1 << j;
        }
    }
    // the source families use the five base types; stray codes become
    // constants so every invalid chain bottoms out
    match GateType::from_code(code) {
        GateType::XOracle | GateType::Copy => GateType::Const0,
        t => t,
    }
}

fn child_native(m: &ChildMachine, lay: &SpreadLayout, n_param: usize, cfg: &Bits, sel: bool) -> Bits {
    if !lay.is_final(cfg) {
        return upd_native(m, lay, cfg);
    }
    let ty = type_of_native(m, lay, cfg);
    match ty {
        GateType::And | GateType::Not => {
            let sel = ty == GateType::And && sel;
            let g = label_value(m, lay, cfg);
            initial_config(m, lay, n_param, g, sel)
        }
        _ => Bits::zeros(lay.width()),
    }
}

/// Builds the implicit circuit for one size parameter. The child and type
/// maps are decision-tree forests; the final/non-final split is a dispatch
/// on the counter's top carry bit so the non-final branch inherits the step
/// map's locality unchanged.
pub fn spread(m: &ChildMachine, n_param: usize, g_out: u64, t_out: GateType) -> Result<StepCircuit, SpreadError> {
    let log_n = (usize::BITS - (n_param - 1).leading_zeros()).max(1) as usize;
    let lay = SpreadLayout::for_machine(m, log_n);
    let need = m
        .io
        .type_bits
        .iter()
        .map(|&(c, _)| c + 1)
        .max()
        .unwrap()
        .max(m.io.n_cells.end)
        .max(m.io.csel_cell + 1)
        .max(m.io.label_cells.end);
    if lay.cells < need {
        return Err(SpreadError::Layout(format!(
            "{} cells but io layout needs {need}",
            lay.cells
        )));
    }
    assert!(m.q <= 5, "locality budget: child machines keep q small");
    let label_bits = m.io.label_cells.len();
    for g in 0..1u64 << label_bits {
        for c in [false, true] {
            check_budget(m, &lay, n_param, g, c)?;
        }
    }
    let w = lay.width();

    let type_map = build_type_map(m, &lay);
    let child_map = build_child_map(m, &lay, n_param);
    let root_label = root_config(m, &lay, n_param, g_out, t_out);
    Ok(StepCircuit {
        circuit: ImplicitCircuit {
            label_width: w,
            type_map,
            child_map,
            root_label,
        },
        layout: lay,
        machine: m.clone(),
        log_n,
        n_param,
    })
}

fn build_type_map(m: &ChildMachine, lay: &SpreadLayout) -> LocalMap {
    let w = lay.width();
    let m2 = m.clone();
    let lay2 = lay.clone();
    LocalMap::from_fn(
        w,
        GateType::CODE_BITS,
        |_| {
            // the stray-code remap couples the three type bits
            let mut deps = vec![lay2.final_bit()];
            for (cell, bit) in m2.io.type_bits {
                deps.push(lay2.cell_off(cell) + bit);
            }
            deps
        },
        {
            let m3 = m.clone();
            let lay3 = lay.clone();
            move |x, j| {
                let cfg = Bits::from_slice(x);
                type_of_native(&m3, &lay3, &cfg).code() >> j & 1 == 1
            }
        },
    )
}

fn build_child_map(m: &ChildMachine, lay: &SpreadLayout, n_param: usize) -> LocalMap {
    let w = lay.width();
    let inc = increment_map(lay.pairs);
    // non-final case: one machine step; cell bits read their neighbourhood,
    // counter bits read their two counter inputs
    let lay1 = lay.clone();
    let nonfinal = LocalMap::from_fn(
        w + 1,
        w,
        |j| {
            if j >= lay1.counter_off() {
                inc.tree(j - lay1.counter_off())
                    .dependencies()
                    .into_iter()
                    .map(|p| p + lay1.counter_off())
                    .collect()
            } else {
                let cell = j / (lay1.q + 2);
                if j % (lay1.q + 2) < 2 {
                    // symbol bits only read their own cell
                    (lay1.cell_off(cell)..lay1.cell_off(cell + 1)).collect()
                } else {
                    let lo = cell.saturating_sub(1);
                    let hi = (cell + 2).min(lay1.cells);
                    (lay1.cell_off(lo)..lay1.cell_off(hi)).collect()
                }
            }
        },
        {
            let m2 = m.clone();
            let lay2 = lay.clone();
            let inc2 = increment_map(lay.pairs);
            move |x, j| {
                if j >= lay2.counter_off() {
                    return inc2.tree(j - lay2.counter_off()).eval_slice(&x[lay2.counter_off()..w]);
                }
                let cell = j / (lay2.q + 2);
                let (s, st) = upd_cell(&m2, &lay2, &x[..w], cell);
                match j % (lay2.q + 2) {
                    0 => s.code() & 1 == 1,
                    1 => s.code() >> 1 & 1 == 1,
                    b => st >> (b - 2) & 1 == 1,
                }
            }
        },
    );
    // final case: rebuild an initial configuration from the label cells
    let m3 = m.clone();
    let lay3 = lay.clone();
    let type_positions: Vec<usize> = m
        .io
        .type_bits
        .iter()
        .map(|(cell, bit)| lay.cell_off(*cell) + bit)
        .collect();
    let tp = type_positions.clone();
    let final_case = LocalMap::from_fn(
        w + 1,
        w,
        {
            let lay4 = lay.clone();
            let m4 = m.clone();
            move |j| {
                let mut deps = tp.clone();
                deps.push(w); // selector
                // label-cell value bits copy themselves
                let cell = if j < lay4.counter_off() { j / (lay4.q + 2) } else { usize::MAX };
                if cell != usize::MAX && m4.io.label_cells.contains(&cell) && j % (lay4.q + 2) == 0 {
                    deps.push(j);
                }
                deps
            }
        },
        move |x, j| {
            // this branch is grafted under final = 1; the builder's scratch
            // input leaves non-dependency bits at 0, so force the flag
            let mut cfg = Bits::from_slice(&x[..w]);
            cfg.set(lay3.final_bit(), true);
            child_native(&m3, &lay3, n_param, &cfg, x[w]).get(j)
        },
    );
    LocalMap::dispatch(w + 1, &[lay.final_bit()], &[nonfinal, final_case])
}

// ---------------------------------------------------------------------------
// a tiny structured program form, compiled to machine states
// ---------------------------------------------------------------------------

/// One operation of a child program. Programs are lists of blocks; control
/// falls through a block and ends with an explicit jump, branch or halt.
#[derive(Clone, Debug)]
pub enum ChildOp {
    /// Move the head, leaving the cell unchanged.
    Move(i8),
    /// Write a symbol then move.
    Write(Sym, i8),
    /// Jump to a block depending on the symbol read (stays in place).
    Branch { on0: usize, on1: usize, onblank: usize },
    Jump(usize),
    Halt,
}

pub struct ChildProgram {
    pub blocks: Vec<Vec<ChildOp>>,
    pub entry: usize,
}

/// Compiles a block program to machine rules. Every non-jump op becomes one
/// state; `Halt` becomes a rule-less state shared by the whole program.
pub fn compile_program(prog: &ChildProgram, k: usize, kprime: usize, io: IoLayout) -> ChildMachine {
    // state 0 is reserved; allocate 1.. in block order
    let mut ids: Vec<Vec<u32>> = Vec::new();
    let mut next_id = 1u32;
    for block in &prog.blocks {
        let mut v = Vec::new();
        for op in block {
            match op {
                ChildOp::Jump(_) | ChildOp::Halt => v.push(0),
                _ => {
                    v.push(next_id);
                    next_id += 1;
                }
            }
        }
        ids.push(v);
    }
    let halt_state = next_id;
    let q = (32 - halt_state.leading_zeros()) as usize;
    let mut m = ChildMachine::new(q, k, kprime, entry_state(prog, &ids, prog.entry), io);
    for (b, block) in prog.blocks.iter().enumerate() {
        for (i, op) in block.iter().enumerate() {
            let state = ids[b][i];
            if state == 0 {
                continue;
            }
            let fallthrough = next_state(prog, &ids, halt_state, b, i);
            match op {
                ChildOp::Move(mv) => {
                    for r in [Sym::S0, Sym::S1, Sym::Blank] {
                        m.add_rule(state, r, fallthrough, r, *mv);
                    }
                }
                ChildOp::Write(s, mv) => {
                    for r in [Sym::S0, Sym::S1, Sym::Blank] {
                        m.add_rule(state, r, fallthrough, *s, *mv);
                    }
                }
                ChildOp::Branch { on0, on1, onblank } => {
                    m.add_rule(state, Sym::S0, entry_state(prog, &ids, *on0), Sym::S0, 0);
                    m.add_rule(state, Sym::S1, entry_state(prog, &ids, *on1), Sym::S1, 0);
                    m.add_rule(state, Sym::Blank, entry_state(prog, &ids, *onblank), Sym::Blank, 0);
                }
                ChildOp::Jump(_) | ChildOp::Halt => {}
            }
        }
    }
    m
}

fn entry_state(prog: &ChildProgram, ids: &[Vec<u32>], block: usize) -> u32 {
    match &prog.blocks[block][0] {
        ChildOp::Jump(t) => entry_state(prog, ids, *t),
        ChildOp::Halt => ids_halt(ids),
        _ => ids[block][0],
    }
}

fn ids_halt(ids: &[Vec<u32>]) -> u32 {
    ids.iter().flatten().copied().max().unwrap_or(0) + 1
}

fn next_state(prog: &ChildProgram, ids: &[Vec<u32>], halt: u32, b: usize, i: usize) -> u32 {
    match prog.blocks[b].get(i + 1) {
        None => halt,
        Some(ChildOp::Jump(t)) => entry_state(prog, ids, *t),
        Some(ChildOp::Halt) => halt,
        Some(_) => ids[b][i + 1],
    }
}

// ---------------------------------------------------------------------------
// fixture families
// ---------------------------------------------------------------------------

/// A family fixture: the child machine, the source circuit it describes and
/// the root gate data.
pub struct Family {
    pub name: &'static str,
    pub machine: ChildMachine,
    pub circuit: FamilyCircuit,
    pub n_param: usize,
    pub g_out: u64,
    pub t_out: GateType,
}

impl Family {
    pub fn build(&self) -> StepCircuit {
        spread(&self.machine, self.n_param, self.g_out, self.t_out)
            .expect("fixture family is within budget")
    }
}

/// Trivial one-state halting machine: used by families whose valid tree is
/// the root alone.
fn inert_machine(k: usize, kprime: usize, io: IoLayout) -> ChildMachine {
    ChildMachine::new(1, k, kprime, 1, io)
}

fn small_io() -> IoLayout {
    // label in cell 0's value bit; the type rides on blank flags so a fresh
    // configuration spells a fan-in-0 code and garbage chains stay sinks
    IoLayout {
        label_cells: 0..1,
        csel_cell: 1,
        n_cells: 2..3,
        type_bits: [(1, 1), (2, 1), (3, 1)],
    }
}

/// `f(x) = x_1` over two inputs. 16-bit labels, checked exhaustively.
pub fn family_identity() -> Family {
    Family {
        name: "identity",
        machine: inert_machine(4, 2, small_io()),
        circuit: FamilyCircuit {
            gates: vec![(GateType::Input, [0, 0]), (GateType::Const0, [0, 0])],
            output: 0,
            inputs: 2,
        },
        n_param: 2,
        g_out: 0,
        t_out: GateType::Input,
    }
}

/// Constant-1 output over two (ignored) inputs. 16-bit labels.
pub fn family_const1() -> Family {
    Family {
        name: "const1",
        machine: inert_machine(4, 2, small_io()),
        circuit: FamilyCircuit {
            gates: vec![(GateType::Const1, [0, 0]), (GateType::Const0, [0, 0])],
            output: 0,
            inputs: 2,
        },
        n_param: 2,
        g_out: 0,
        t_out: GateType::Const1,
    }
}

/// The identity family at an arbitrary power-of-two size parameter, for
/// locality-versus-n assertions.
pub fn family_identity_at(n_param: usize) -> Family {
    let mut f = family_identity();
    f.n_param = n_param;
    f
}

/// `f() = And(g1, g1)` with `g1` a Constant-1 gate: the valid tree is an And
/// whose both children sit under copy chains of length `steps_to_final`.
pub fn family_and_const1() -> Family {
    // gate labels: 0 = the And gate, 1 = the Const1 gate. The machine
    // writes child label 1 and stamps the Constant-1 code on the blank
    // flags of cells 1..4.
    let io = small_io();
    let prog = ChildProgram {
        entry: 0,
        blocks: vec![
            // every g gets the same child: label 1, type code 6
            vec![
                ChildOp::Write(Sym::S1, 1),    // cell 0: child label bit 1
                ChildOp::Write(Sym::S0, 1),    // cell 1: type bit0 = 0
                ChildOp::Write(Sym::Blank, 1), // cell 2: type bit1 = 1
                ChildOp::Write(Sym::Blank, 0), // cell 3: type bit2 = 1
                ChildOp::Halt,
            ],
        ],
    };
    let machine = compile_program(&prog, 4, 2, io);
    Family {
        name: "and-const1",
        machine,
        circuit: FamilyCircuit {
            gates: vec![(GateType::And, [1, 1]), (GateType::Const1, [0, 0])],
            output: 0,
            inputs: 2,
        },
        n_param: 2,
        g_out: 0,
        t_out: GateType::And,
    }
}

fn two_bit_io() -> IoLayout {
    // labels in the value bits of cells 3 and 4; type in the value bits of
    // cells 0..3 so programs can walk left writing label then type
    IoLayout {
        label_cells: 3..5,
        csel_cell: 5,
        n_cells: 6..7,
        type_bits: [(0, 0), (1, 0), (2, 0)],
    }
}

fn write_type_block(code: u64, blocks: &mut Vec<Vec<ChildOp>>) -> usize {
    // entered at cell 2, writes (t2, t1, t0) walking left, halts at cell 0
    let b = |v: u64| if v == 1 { Sym::S1 } else { Sym::S0 };
    blocks.push(vec![
        ChildOp::Write(b(code >> 2 & 1), -1),
        ChildOp::Write(b(code >> 1 & 1), -1),
        ChildOp::Write(b(code & 1), 0),
        ChildOp::Halt,
    ]);
    blocks.len() - 1
}

/// Small builder for the two-bit-label programs: collects blocks and lets
/// later blocks be patched in by index.
struct Blocks {
    v: Vec<Vec<ChildOp>>,
}

impl Blocks {
    fn new() -> Self {
        Blocks { v: vec![vec![]] } // 0 = entry, patched last
    }
    fn push(&mut self, ops: Vec<ChildOp>) -> usize {
        self.v.push(ops);
        self.v.len() - 1
    }
    fn finish(mut self, entry_branch: Vec<ChildOp>, k: usize, kprime: usize) -> ChildMachine {
        // the head starts on the leftmost cell; walk to the label first
        let mut ops = vec![ChildOp::Move(1), ChildOp::Move(1), ChildOp::Move(1)];
        ops.extend(entry_branch);
        self.v[0] = ops;
        compile_program(&ChildProgram { blocks: self.v, entry: 0 }, k, kprime, two_bit_io())
    }
}

/// Child-writing tail used by the input gates of the two-bit families:
/// entered at cell 5 having just read `c`, writes the label `(c, 1)` and the
/// Input type.
fn input_child_blocks(b: &mut Blocks, t_input: usize) -> (usize, usize) {
    let mut ids = [0usize; 2];
    for (k, c) in [Sym::S0, Sym::S1].into_iter().enumerate() {
        ids[k] = b.push(vec![
            ChildOp::Move(-1),
            ChildOp::Write(Sym::S1, -1), // cell 4 <- 1
            ChildOp::Write(c, -1),       // cell 3 <- c
            ChildOp::Jump(t_input),
        ]);
    }
    (ids[0], ids[1])
}

/// `f(x1, x2) = x1 and x2`: four gate labels, output gate 0 is the And of
/// the two input gates 2 and 3.
pub fn family_and_inputs() -> Family {
    let mut b = Blocks::new();
    let t_input = write_type_block(GateType::Input.code(), &mut b.v);
    let t_const0 = write_type_block(GateType::Const0.code(), &mut b.v);
    // padding gates: stamp Constant-0, label untouched
    let bad3 = b.push(vec![ChildOp::Move(-1), ChildOp::Jump(t_const0)]);
    let bad4 = b.push(vec![ChildOp::Move(-1), ChildOp::Move(-1), ChildOp::Jump(t_const0)]);
    let (c0, c1) = input_child_blocks(&mut b, t_input);
    let read_c = b.push(vec![
        ChildOp::Move(1),
        ChildOp::Branch { on0: c0, on1: c1, onblank: c0 },
    ]);
    // label bit0 = 0 at cell 3: bit1 decides And gate vs padding
    let check_bit1 = b.push(vec![
        ChildOp::Move(1),
        ChildOp::Branch { on0: read_c, on1: bad4, onblank: bad4 },
    ]);
    let machine = b.finish(
        vec![ChildOp::Branch { on0: check_bit1, on1: bad3, onblank: bad3 }],
        7,
        5,
    );
    Family {
        name: "and-inputs",
        machine,
        circuit: FamilyCircuit {
            gates: vec![
                (GateType::And, [2, 3]),
                (GateType::Const0, [0, 0]),
                (GateType::Input, [0, 0]),
                (GateType::Input, [0, 0]),
            ],
            output: 0,
            inputs: 2,
        },
        n_param: 2,
        g_out: 0,
        t_out: GateType::And,
    }
}

/// `f(x1, x2) = not(x1 and x2)`: gate 0 = Not(gate 1), gate 1 = And(2, 3).
pub fn family_not_and() -> Family {
    let mut b = Blocks::new();
    let t_input = write_type_block(GateType::Input.code(), &mut b.v);
    let t_const0 = write_type_block(GateType::Const0.code(), &mut b.v);
    let t_and = write_type_block(GateType::And.code(), &mut b.v);
    let bad3 = b.push(vec![ChildOp::Move(-1), ChildOp::Jump(t_const0)]);
    let bad4 = b.push(vec![ChildOp::Move(-1), ChildOp::Move(-1), ChildOp::Jump(t_const0)]);
    // the Not gate's only child is the And gate, label (1, 0); entered at
    // cell 4 after the bit1 probe
    let to_and = b.push(vec![
        ChildOp::Write(Sym::S0, -1), // cell 4 <- 0
        ChildOp::Write(Sym::S1, -1), // cell 3 <- 1
        ChildOp::Jump(t_and),
    ]);
    let (c0, c1) = input_child_blocks(&mut b, t_input);
    let read_c = b.push(vec![
        ChildOp::Move(1),
        ChildOp::Branch { on0: c0, on1: c1, onblank: c0 },
    ]);
    // bit0 = 0 at cell 3: bit1 = 0 is the Not gate
    let check0 = b.push(vec![
        ChildOp::Move(1),
        ChildOp::Branch { on0: to_and, on1: bad4, onblank: bad4 },
    ]);
    // bit0 = 1 at cell 3: bit1 = 0 is the And gate
    let check1 = b.push(vec![
        ChildOp::Move(1),
        ChildOp::Branch { on0: read_c, on1: bad4, onblank: bad4 },
    ]);
    let machine = b.finish(
        vec![ChildOp::Branch { on0: check0, on1: check1, onblank: bad3 }],
        7,
        5,
    );
    Family {
        name: "not-and",
        machine,
        circuit: FamilyCircuit {
            gates: vec![
                (GateType::Not, [1, 0]),
                (GateType::And, [2, 3]),
                (GateType::Input, [0, 0]),
                (GateType::Input, [0, 0]),
            ],
            output: 0,
            inputs: 2,
        },
        n_param: 2,
        g_out: 0,
        t_out: GateType::Not,
    }
}

// ---------------------------------------------------------------------------
// child machine file format: like the machine format, with a `childtm`
// header and single-tape deterministic rules
// ---------------------------------------------------------------------------

pub fn format_child_spec(m: &ChildMachine) -> String {
    let mut out = String::new();
    out.push_str("childtm\n");
    out.push_str(&format!("qbits {}\n", m.q));
    out.push_str(&format!("space {}\n", m.k));
    out.push_str(&format!("time {}\n", m.kprime));
    out.push_str(&format!("start {}\n", m.start_state));
    out.push_str(&format!(
        "label {} {}\n",
        m.io.label_cells.start,
        m.io.label_cells.len()
    ));
    out.push_str(&format!("csel {}\n", m.io.csel_cell));
    out.push_str(&format!("ninput {} {}\n", m.io.n_cells.start, m.io.n_cells.len()));
    out.push_str(&format!(
        "typebits {}:{} {}:{} {}:{}\n",
        m.io.type_bits[0].0,
        m.io.type_bits[0].1,
        m.io.type_bits[1].0,
        m.io.type_bits[1].1,
        m.io.type_bits[2].0,
        m.io.type_bits[2].1
    ));
    for state in 1..1u32 << m.q {
        for read in [Sym::S0, Sym::S1, Sym::Blank] {
            if let Some((next, w, mv)) = m.rule(state, read) {
                out.push_str(&format!(
                    "trans {} {} -> {} {} {}\n",
                    state,
                    read.to_char(),
                    next,
                    w.to_char(),
                    match mv {
                        1 => '+',
                        -1 => '-',
                        _ => '.',
                    }
                ));
            }
        }
    }
    out
}

pub fn parse_child_spec(text: &str) -> Result<ChildMachine, String> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    if lines.next() != Some("childtm") {
        return Err("missing childtm header".into());
    }
    let mut q = None;
    let mut k = None;
    let mut kprime = None;
    let mut start = None;
    let mut label = None;
    let mut csel = None;
    let mut ninput = None;
    let mut typebits = None;
    let mut trans: Vec<(u32, Sym, u32, Sym, i8)> = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        let geti = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());
        match t[0] {
            "qbits" => q = Some(geti(t[1])?),
            "space" => k = Some(geti(t[1])?),
            "time" => kprime = Some(geti(t[1])?),
            "start" => start = Some(geti(t[1])? as u32),
            "label" => label = Some(geti(t[1])?..geti(t[1])? + geti(t[2])?),
            "csel" => csel = Some(geti(t[1])?),
            "ninput" => ninput = Some(geti(t[1])?..geti(t[1])? + geti(t[2])?),
            "typebits" => {
                let mut tb = [(0usize, 0usize); 3];
                for (i, spec) in t[1..4].iter().enumerate() {
                    let (c, b) = spec.split_once(':').ok_or("bad typebits")?;
                    tb[i] = (geti(c)?, geti(b)?);
                }
                typebits = Some(tb);
            }
            "trans" => {
                if t.len() != 7 || t[3] != "->" {
                    return Err(format!("bad trans line {line:?}"));
                }
                let mv = match t[6] {
                    "+" => 1,
                    "-" => -1,
                    "." => 0,
                    _ => return Err("bad move".into()),
                };
                trans.push((
                    geti(t[1])? as u32,
                    Sym::from_char(t[2].chars().next().unwrap()).ok_or("bad read")?,
                    geti(t[4])? as u32,
                    Sym::from_char(t[5].chars().next().unwrap()).ok_or("bad write")?,
                    mv,
                ));
            }
            other => return Err(format!("unknown directive {other:?}")),
        }
    }
    let io = IoLayout {
        label_cells: label.ok_or("missing label")?,
        csel_cell: csel.ok_or("missing csel")?,
        n_cells: ninput.ok_or("missing ninput")?,
        type_bits: typebits.ok_or("missing typebits")?,
    };
    let mut m = ChildMachine::new(
        q.ok_or("missing qbits")?,
        k.ok_or("missing space")?,
        kprime.ok_or("missing time")?,
        start.ok_or("missing start")? ,
        io,
    );
    for (s, r, n, w, mv) in trans {
        m.add_rule(s, r, n, w, mv);
    }
    Ok(m)
}
