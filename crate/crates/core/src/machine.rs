//! The nondeterministic machine model: a multi-tape Turing machine whose
//! nondeterminism enters through one guess bit per step; the witness string
//! `y` is exactly the guess stream (`guess at step t = y_t`). Tapes start
//! with the input `x` at positions `1..n` of tape 1 and blanks elsewhere.
//! Heads live on positions `>= 1`.

use crate::bits::Bits;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// A tape symbol. Encoded in two bits as value/blank: `0 -> 00`, `1 -> 10`,
/// `blank -> 01` (bit 0 is the value bit, bit 1 the blank flag).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Sym {
    S0,
    S1,
    Blank,
}

impl Sym {
    pub fn code(self) -> u64 {
        match self {
            Sym::S0 => 0b00,
            Sym::S1 => 0b01,
            Sym::Blank => 0b10,
        }
    }

    /// Total decoding; the unused code reads as blank.
    pub fn from_code(c: u64) -> Sym {
        match c & 3 {
            0b00 => Sym::S0,
            0b01 => Sym::S1,
            _ => Sym::Blank,
        }
    }

    pub fn from_bit(b: bool) -> Sym {
        if b {
            Sym::S1
        } else {
            Sym::S0
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Sym::S0 => '0',
            Sym::S1 => '1',
            Sym::Blank => '_',
        }
    }

    pub fn from_char(c: char) -> Option<Sym> {
        match c {
            '0' => Some(Sym::S0),
            '1' => Some(Sym::S1),
            '_' => Some(Sym::Blank),
            _ => None,
        }
    }
}

/// Right-hand side of a transition rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transition {
    pub next_state: u32,
    pub writes: Vec<Sym>,
    /// One of -1, 0, +1 per tape.
    pub moves: Vec<i8>,
}

/// A machine description. Rules are total: every `(state, reads, guess)`
/// triple has exactly one rule, checked at load time.
#[derive(Clone, Debug)]
pub struct MachineSpec {
    pub tape_count: usize,
    pub state_count: u32,
    pub start_state: u32,
    pub accept_state: u32,
    rules: Vec<Option<Transition>>,
}

#[derive(Error, Debug)]
pub enum MachineError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing rule for state {state} reads {reads} guess {guess}")]
    MissingRule {
        state: u32,
        reads: String,
        guess: u8,
    },
    #[error("duplicate rule for state {0}")]
    DuplicateRule(u32),
    #[error("accept state {0} is not absorbing")]
    AcceptNotAbsorbing(u32),
    #[error("a move takes a head index below 1 at step {0}")]
    IndexUnderflow(u64),
    #[error("input-scan convention violated: state {state} reachable at step {step} <= n moves head 1 by {mv}")]
    ScanViolation { state: u32, step: u64, mv: i8 },
    #[error("witness search budget exceeded ({0} nodes)")]
    BudgetExceeded(u64),
}

fn sym_digit(s: Sym) -> usize {
    match s {
        Sym::S0 => 0,
        Sym::S1 => 1,
        Sym::Blank => 2,
    }
}

impl MachineSpec {
    pub fn new(
        tape_count: usize,
        state_count: u32,
        start_state: u32,
        accept_state: u32,
    ) -> Self {
        let combos = 3usize.pow(tape_count as u32) * 2;
        MachineSpec {
            tape_count,
            state_count,
            start_state,
            accept_state,
            rules: vec![None; state_count as usize * combos],
        }
    }

    fn rule_index(&self, state: u32, reads: &[Sym], guess: bool) -> usize {
        let mut d = 0usize;
        for &r in reads {
            d = d * 3 + sym_digit(r);
        }
        (state as usize * 3usize.pow(self.tape_count as u32) + d) * 2 + usize::from(guess)
    }

    pub fn add_rule(
        &mut self,
        state: u32,
        reads: &[Sym],
        guess: bool,
        t: Transition,
    ) -> Result<(), MachineError> {
        assert_eq!(reads.len(), self.tape_count);
        assert_eq!(t.writes.len(), self.tape_count);
        assert_eq!(t.moves.len(), self.tape_count);
        let idx = self.rule_index(state, reads, guess);
        if self.rules[idx].is_some() {
            return Err(MachineError::DuplicateRule(state));
        }
        self.rules[idx] = Some(t);
        Ok(())
    }

    pub fn rule(&self, state: u32, reads: &[Sym], guess: bool) -> &Transition {
        self.rules[self.rule_index(state, reads, guess)]
            .as_ref()
            .expect("rule table is total after validation")
    }

    pub fn try_rule(&self, state: u32, reads: &[Sym], guess: bool) -> Option<&Transition> {
        if state >= self.state_count {
            return None;
        }
        self.rules[self.rule_index(state, reads, guess)].as_ref()
    }

    /// Checks totality of the rule table and that the accept state is
    /// absorbing (its rules keep the state and write back what they read).
    pub fn validate(&self) -> Result<(), MachineError> {
        let k = self.tape_count;
        let mut reads = vec![Sym::S0; k];
        let combos = 3usize.pow(k as u32);
        for state in 0..self.state_count {
            for d in 0..combos {
                let mut dd = d;
                for j in (0..k).rev() {
                    reads[j] = match dd % 3 {
                        0 => Sym::S0,
                        1 => Sym::S1,
                        _ => Sym::Blank,
                    };
                    dd /= 3;
                }
                for guess in [false, true] {
                    let t = self.rules[self.rule_index(state, &reads, guess)]
                        .as_ref()
                        .ok_or(MachineError::MissingRule {
                            state,
                            reads: reads.iter().map(|s| s.to_char()).collect(),
                            guess: u8::from(guess),
                        })?;
                    if state == self.accept_state
                        && (t.next_state != self.accept_state || t.writes != reads)
                    {
                        return Err(MachineError::AcceptNotAbsorbing(state));
                    }
                }
                // the accept state must also ignore the guess bit, so padded
                // runs never consume witness bits
                if state == self.accept_state {
                    let a = self.rules[self.rule_index(state, &reads, false)].clone();
                    let b = self.rules[self.rule_index(state, &reads, true)].clone();
                    if a != b {
                        return Err(MachineError::AcceptNotAbsorbing(state));
                    }
                }
            }
        }
        Ok(())
    }

    /// Verifies that the first `n` steps sweep head 1 rightward regardless of
    /// reads and guesses. Uses an abstract step over (state, head-1 position)
    /// sets; positions `1..=n` read from `{0,1}` (they hold input bits).
    pub fn verify_input_scan(&self, n: usize) -> Result<(), MachineError> {
        let mut states: Vec<u32> = vec![self.start_state];
        for step in 1..=n as u64 {
            let mut next: Vec<u32> = Vec::new();
            for &s in &states {
                // head 1 is at position `step`, a cell holding an input bit
                for r1 in [Sym::S0, Sym::S1] {
                    for rest in 0..3usize.pow(self.tape_count as u32 - 1) {
                        let mut reads = vec![r1];
                        let mut dd = rest;
                        for _ in 1..self.tape_count {
                            reads.push(match dd % 3 {
                                0 => Sym::S0,
                                1 => Sym::S1,
                                _ => Sym::Blank,
                            });
                            dd /= 3;
                        }
                        for guess in [false, true] {
                            let t = self.rule(s, &reads, guess);
                            if t.moves[0] != 1 {
                                return Err(MachineError::ScanViolation {
                                    state: s,
                                    step,
                                    mv: t.moves[0],
                                });
                            }
                            if !next.contains(&t.next_state) {
                                next.push(t.next_state);
                            }
                        }
                    }
                }
            }
            states = next;
        }
        Ok(())
    }
}

/// A machine snapshot: timestamp, state, per-tape head index and the symbol
/// under each head, plus the guess bit consumed by the step taken from this
/// configuration.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Configuration {
    pub time: u64,
    pub state: u32,
    pub index: Vec<u64>,
    pub read: Vec<Sym>,
    pub guess: bool,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} q={} idx={:?} read={} g={}",
            self.time,
            self.state,
            self.index,
            self.read.iter().map(|s| s.to_char()).collect::<String>(),
            u8::from(self.guess)
        )
    }
}

/// Sparse tape contents; unwritten cells are blank.
#[derive(Clone, Default, Debug)]
pub struct Tapes {
    cells: Vec<HashMap<u64, Sym>>,
}

impl Tapes {
    pub fn new(tape_count: usize) -> Self {
        Tapes {
            cells: vec![HashMap::new(); tape_count],
        }
    }

    pub fn read(&self, tape: usize, pos: u64) -> Sym {
        *self.cells[tape].get(&pos).unwrap_or(&Sym::Blank)
    }

    pub fn write(&mut self, tape: usize, pos: u64, s: Sym) {
        self.cells[tape].insert(pos, s);
    }
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub configs: Vec<Configuration>,
    pub witness: Bits,
    pub accept: bool,
}

/// One step under the rule matching `(c.state, c.read, guess)`.
pub fn step(
    spec: &MachineSpec,
    c: &Configuration,
    tapes: &Tapes,
    guess: bool,
) -> Result<(Configuration, Tapes), MachineError> {
    let t = spec.rule(c.state, &c.read, guess);
    let mut tapes = tapes.clone();
    let mut index = c.index.clone();
    for j in 0..spec.tape_count {
        tapes.write(j, c.index[j], t.writes[j]);
        let next = c.index[j] as i64 + t.moves[j] as i64;
        if next < 1 {
            return Err(MachineError::IndexUnderflow(c.time));
        }
        index[j] = next as u64;
    }
    let read = (0..spec.tape_count).map(|j| tapes.read(j, index[j])).collect();
    Ok((
        Configuration {
            time: c.time + 1,
            state: t.next_state,
            index,
            read,
            guess: false,
        },
        tapes,
    ))
}

fn initial_tapes(spec: &MachineSpec, x: &Bits) -> Tapes {
    let mut tapes = Tapes::new(spec.tape_count);
    for (i, b) in x.iter().enumerate() {
        tapes.write(0, i as u64 + 1, Sym::from_bit(b));
    }
    tapes
}

pub fn initial_configuration(spec: &MachineSpec, tapes: &Tapes) -> Configuration {
    Configuration {
        time: 1,
        state: spec.start_state,
        index: vec![1; spec.tape_count],
        read: (0..spec.tape_count).map(|j| tapes.read(j, 1)).collect(),
        guess: false,
    }
}

/// Deterministic simulation given the witness. The guess bit at step `t` is
/// `y_t` (0 past the end of `y`, but a step whose two guess rules differ is
/// only taken while `t <= |y|`; otherwise the run parks and rejects).
/// Produces exactly `t_prime` configurations.
pub fn run(spec: &MachineSpec, x: &Bits, y: &Bits, t_prime: u64) -> Result<Trace, MachineError> {
    assert!(t_prime >= 1);
    let mut tapes = initial_tapes(spec, x);
    let mut configs = Vec::with_capacity(t_prime as usize);
    let mut c = initial_configuration(spec, &tapes);
    let mut stuck = false;
    while (configs.len() as u64) < t_prime {
        let t = c.time;
        let guess = t as usize <= y.len() && y.get(t as usize - 1);
        let branching =
            spec.rule(c.state, &c.read, false) != spec.rule(c.state, &c.read, true);
        let mut done = c.clone();
        done.guess = guess;
        configs.push(done);
        if configs.len() as u64 == t_prime {
            break;
        }
        if branching && t as usize > y.len() {
            // witness exhausted at a branching step: park in place
            stuck = true;
        }
        if stuck {
            let mut frozen = c.clone();
            frozen.time += 1;
            c = frozen;
            continue;
        }
        let (next, next_tapes) = step(spec, &c, &tapes, guess)?;
        c = next;
        tapes = next_tapes;
    }
    let accept = !stuck && configs.last().map(|z| z.state == spec.accept_state) == Some(true);
    Ok(Trace {
        configs,
        witness: y.clone(),
        accept,
    })
}

/// Brute-force acceptance oracle: depth-first search over the run tree,
/// branching only at steps whose two guess rules differ, guess 0 explored
/// first. Returns the lexicographically first accepting witness, as a string
/// ending at the last branching step.
pub fn witness_exists(
    spec: &MachineSpec,
    x: &Bits,
    t_prime: u64,
    node_budget: u64,
) -> Result<(bool, Option<Bits>), MachineError> {
    struct Dfs<'a> {
        spec: &'a MachineSpec,
        t_prime: u64,
        budget: u64,
        nodes: u64,
    }
    impl Dfs<'_> {
        fn go(
            &mut self,
            c: &Configuration,
            tapes: &Tapes,
            decisions: &mut Vec<(u64, bool)>,
        ) -> Result<bool, MachineError> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(MachineError::BudgetExceeded(self.nodes));
            }
            if c.state == self.spec.accept_state {
                return Ok(true);
            }
            if c.time >= self.t_prime {
                return Ok(false);
            }
            let branching = self.spec.rule(c.state, &c.read, false)
                != self.spec.rule(c.state, &c.read, true);
            let guesses: &[bool] = if branching { &[false, true] } else { &[false] };
            for &g in guesses {
                if branching {
                    decisions.push((c.time, g));
                }
                let (next, next_tapes) = step(self.spec, c, tapes, g)?;
                if self.go(&next, &next_tapes, decisions)? {
                    return Ok(true);
                }
                if branching {
                    decisions.pop();
                }
            }
            Ok(false)
        }
    }
    let tapes = initial_tapes(spec, x);
    let c = initial_configuration(spec, &tapes);
    let mut dfs = Dfs {
        spec,
        t_prime,
        budget: node_budget,
        nodes: 0,
    };
    let mut decisions = Vec::new();
    if dfs.go(&c, &tapes, &mut decisions)? {
        let last = decisions.iter().map(|&(t, _)| t).max().unwrap_or(0);
        let mut y = Bits::zeros(last as usize);
        for &(t, g) in &decisions {
            y.set(t as usize - 1, g);
        }
        Ok((true, Some(y)))
    } else {
        Ok((false, None))
    }
}

/// Rounds the machine's declared running time up to the padded bound that
/// the reduction works over: the next power of two, at least 4. The padding
/// factor beyond the power of two is 1 in this build and is reported through
/// `Params`.
pub fn padded_time(t: u64) -> u64 {
    t.max(4).next_power_of_two()
}

// ---------------------------------------------------------------------------
// machine spec file format
//
//   # comment
//   tapes 1
//   states 3
//   start 0
//   accept 2
//   trans 0 1 0 -> 1 1 +
//
// Reads/writes are one symbol per tape from {0,1,_}; moves from {+,-,.}.
// ---------------------------------------------------------------------------

pub fn parse_spec(text: &str) -> Result<MachineSpec, MachineError> {
    let mut tapes = None;
    let mut states = None;
    let mut start = None;
    let mut accept = None;
    let mut trans: Vec<(usize, Vec<&str>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| MachineError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        match toks[0] {
            "tapes" => tapes = Some(toks.get(1).ok_or_else(|| err("missing count"))?.parse::<usize>().map_err(|e| err(&e.to_string()))?),
            "states" => states = Some(toks.get(1).ok_or_else(|| err("missing count"))?.parse::<u32>().map_err(|e| err(&e.to_string()))?),
            "start" => start = Some(toks.get(1).ok_or_else(|| err("missing state"))?.parse::<u32>().map_err(|e| err(&e.to_string()))?),
            "accept" => accept = Some(toks.get(1).ok_or_else(|| err("missing state"))?.parse::<u32>().map_err(|e| err(&e.to_string()))?),
            "trans" => trans.push((ln + 1, toks)),
            other => return Err(err(&format!("unknown directive {other:?}"))),
        }
    }
    let k = tapes.ok_or(MachineError::Parse { line: 0, msg: "missing tapes".into() })?;
    let m = states.ok_or(MachineError::Parse { line: 0, msg: "missing states".into() })?;
    let mut spec = MachineSpec::new(
        k,
        m,
        start.ok_or(MachineError::Parse { line: 0, msg: "missing start".into() })?,
        accept.ok_or(MachineError::Parse { line: 0, msg: "missing accept".into() })?,
    );
    for (ln, toks) in trans {
        let err = |msg: String| MachineError::Parse { line: ln, msg };
        // trans <state> <reads> <guess> -> <state'> <writes> <moves>
        if toks.len() != 8 || toks[4] != "->" {
            return Err(err("expected: trans <state> <reads> <guess> -> <state'> <writes> <moves>".into()));
        }
        let state: u32 = toks[1].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        let reads: Option<Vec<Sym>> = toks[2].chars().map(Sym::from_char).collect();
        let reads = reads.ok_or_else(|| err(format!("bad reads {:?}", toks[2])))?;
        let guess = match toks[3] {
            "0" => false,
            "1" => true,
            g => return Err(err(format!("bad guess {g:?}"))),
        };
        let next: u32 = toks[5].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        let writes: Option<Vec<Sym>> = toks[6].chars().map(Sym::from_char).collect();
        let writes = writes.ok_or_else(|| err(format!("bad writes {:?}", toks[6])))?;
        let moves: Option<Vec<i8>> = toks[7]
            .chars()
            .map(|c| match c {
                '+' => Some(1),
                '-' => Some(-1),
                '.' => Some(0),
                _ => None,
            })
            .collect();
        let moves = moves.ok_or_else(|| err(format!("bad moves {:?}", toks[7])))?;
        if reads.len() != k || writes.len() != k || moves.len() != k {
            return Err(err("field width does not match tape count".into()));
        }
        spec.add_rule(state, &reads, guess, Transition { next_state: next, writes, moves })?;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn format_spec(spec: &MachineSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("tapes {}\n", spec.tape_count));
    out.push_str(&format!("states {}\n", spec.state_count));
    out.push_str(&format!("start {}\n", spec.start_state));
    out.push_str(&format!("accept {}\n", spec.accept_state));
    let k = spec.tape_count;
    let combos = 3usize.pow(k as u32);
    let mut reads = vec![Sym::S0; k];
    for state in 0..spec.state_count {
        for d in 0..combos {
            let mut dd = d;
            for j in (0..k).rev() {
                reads[j] = match dd % 3 {
                    0 => Sym::S0,
                    1 => Sym::S1,
                    _ => Sym::Blank,
                };
                dd /= 3;
            }
            for guess in [false, true] {
                if let Some(t) = spec.try_rule(state, &reads, guess) {
                    out.push_str(&format!(
                        "trans {} {} {} -> {} {} {}\n",
                        state,
                        reads.iter().map(|s| s.to_char()).collect::<String>(),
                        u8::from(guess),
                        t.next_state,
                        t.writes.iter().map(|s| s.to_char()).collect::<String>(),
                        t.moves
                            .iter()
                            .map(|&m| match m {
                                1 => '+',
                                -1 => '-',
                                _ => '.',
                            })
                            .collect::<String>()
                    ));
                }
            }
        }
    }
    out
}
