//! A small conflict-driven SAT solver: two watched literals, first-UIP
//! learning, exponential moving average branching, phase saving and Luby
//! restarts. Complete and self-contained; the `tinysat` binary wraps it
//! behind the standard solver output contract.

/// Literals are `2 * var + sign` with sign 1 for negative; variables are
/// 0-based dense indices.
pub type Lit = u32;

pub fn lit(var: u32, positive: bool) -> Lit {
    var << 1 | u32::from(!positive)
}
pub fn lit_var(l: Lit) -> u32 {
    l >> 1
}
pub fn lit_positive(l: Lit) -> bool {
    l & 1 == 0
}
fn neg(l: Lit) -> Lit {
    l ^ 1
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Val {
    Undef,
    True,
    False,
}

pub struct Cnf {
    pub vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

pub enum Outcome {
    Sat(Vec<bool>),
    Unsat,
    BudgetExceeded,
}

struct Solver {
    vars: u32,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<u32>>, // literal -> clause indices
    assign: Vec<Val>,
    phase: Vec<bool>,
    level: Vec<u32>,
    reason: Vec<i64>, // clause index or -1
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    act_inc: f64,
    conflicts: u64,
}

impl Solver {
    fn new(cnf: &Cnf) -> Option<Solver> {
        let vars = cnf.vars;
        let mut s = Solver {
            vars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * vars as usize],
            assign: vec![Val::Undef; vars as usize],
            phase: vec![false; vars as usize],
            level: vec![0; vars as usize],
            reason: vec![-1; vars as usize],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; vars as usize],
            act_inc: 1.0,
            conflicts: 0,
        };
        for c in &cnf.clauses {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            if c.windows(2).any(|w| w[0] == neg(w[1]) || w[1] == neg(w[0])) {
                continue; // tautology
            }
            match c.len() {
                0 => return None,
                1 => {
                    if !s.enqueue(c[0], -1) {
                        return None;
                    }
                }
                _ => {
                    s.add_clause(c);
                }
            }
        }
        Some(s)
    }

    fn add_clause(&mut self, c: Vec<Lit>) -> u32 {
        let idx = self.clauses.len() as u32;
        self.watches[c[0] as usize].push(idx);
        self.watches[c[1] as usize].push(idx);
        self.clauses.push(c);
        idx
    }

    fn value(&self, l: Lit) -> Val {
        match self.assign[lit_var(l) as usize] {
            Val::Undef => Val::Undef,
            Val::True => {
                if lit_positive(l) {
                    Val::True
                } else {
                    Val::False
                }
            }
            Val::False => {
                if lit_positive(l) {
                    Val::False
                } else {
                    Val::True
                }
            }
        }
    }

    fn enqueue(&mut self, l: Lit, reason: i64) -> bool {
        match self.value(l) {
            Val::True => true,
            Val::False => false,
            Val::Undef => {
                let v = lit_var(l) as usize;
                self.assign[v] = if lit_positive(l) { Val::True } else { Val::False };
                self.phase[v] = lit_positive(l);
                self.level[v] = self.trail_lim.len() as u32;
                self.reason[v] = reason;
                self.trail.push(l);
                true
            }
        }
    }

    /// Unit propagation; returns a conflicting clause index.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let l = self.trail[self.qhead];
            self.qhead += 1;
            let falsified = neg(l);
            let ws = std::mem::take(&mut self.watches[falsified as usize]);
            let mut keep = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                if self.clauses[ci as usize][0] == falsified {
                    self.clauses[ci as usize].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[ci as usize][1], falsified);
                let first = self.clauses[ci as usize][0];
                if self.value(first) == Val::True {
                    keep.push(ci);
                    continue;
                }
                // look for a new watch
                let mut moved = false;
                let len = self.clauses[ci as usize].len();
                for k in 2..len {
                    let lk = self.clauses[ci as usize][k];
                    if self.value(lk) != Val::False {
                        self.clauses[ci as usize].swap(1, k);
                        self.watches[lk as usize].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                keep.push(ci);
                if self.value(first) == Val::False {
                    // conflict: keep remaining watches and bail
                    while i < ws.len() {
                        keep.push(ws[i]);
                        i += 1;
                    }
                    conflict = Some(ci);
                    break;
                }
                if !self.enqueue(first, ci as i64) {
                    unreachable!("enqueue of undef literal");
                }
            }
            self.watches[falsified as usize] = keep;
            if conflict.is_some() {
                return conflict;
            }
            drop(ws);
        }
        None
    }

    fn bump(&mut self, v: u32) {
        self.activity[v as usize] += self.act_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    /// First-UIP conflict analysis; returns the learnt clause and the level
    /// to jump back to.
    fn analyze(&mut self, mut conflict: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![0]; // slot for the asserting literal
        let mut seen = vec![false; self.vars as usize];
        let mut counter = 0u32;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let cur_level = self.trail_lim.len() as u32;
        loop {
            let cl = self.clauses[conflict as usize].clone();
            let start = usize::from(p.is_some());
            for k in start..cl.len() {
                let q = cl[k];
                let v = lit_var(q) as usize;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump(v as u32);
                    if self.level[v] == cur_level {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // pick the next trail literal to resolve on
            loop {
                index -= 1;
                let l = self.trail[index];
                if seen[lit_var(l) as usize] {
                    p = Some(l);
                    break;
                }
            }
            counter -= 1;
            let v = lit_var(p.unwrap()) as usize;
            if counter == 0 {
                learnt[0] = neg(p.unwrap());
                break;
            }
            conflict = self.reason[v] as u32;
        }
        let back = learnt[1..]
            .iter()
            .map(|&l| self.level[lit_var(l) as usize])
            .max()
            .unwrap_or(0);
        // move a literal of the backjump level into the second watch slot
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 1..learnt.len() {
                if self.level[lit_var(learnt[k]) as usize] == back {
                    best = k;
                    break;
                }
            }
            learnt.swap(1, best);
        }
        (learnt, back)
    }

    fn cancel_until(&mut self, level: u32) {
        while self.trail_lim.len() as u32 > level {
            let lim = self.trail_lim.pop().unwrap();
            while self.trail.len() > lim {
                let l = self.trail.pop().unwrap();
                self.assign[lit_var(l) as usize] = Val::Undef;
                self.reason[lit_var(l) as usize] = -1;
            }
        }
        self.qhead = self.trail.len();
    }

    fn decide(&mut self) -> Option<Lit> {
        let mut best: Option<u32> = None;
        for v in 0..self.vars {
            if self.assign[v as usize] == Val::Undef {
                match best {
                    None => best = Some(v),
                    Some(b) if self.activity[v as usize] > self.activity[b as usize] => {
                        best = Some(v)
                    }
                    _ => {}
                }
            }
        }
        best.map(|v| lit(v, self.phase[v as usize]))
    }

    fn solve(&mut self, conflict_budget: u64) -> Outcome {
        if self.propagate().is_some() {
            return Outcome::Unsat;
        }
        let mut luby_idx = 0u64;
        let mut restart_at = self.conflicts + 64 * luby(luby_idx);
        loop {
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                if self.conflicts > conflict_budget {
                    return Outcome::BudgetExceeded;
                }
                if self.trail_lim.is_empty() {
                    return Outcome::Unsat;
                }
                let (learnt, back) = self.analyze(conflict);
                self.cancel_until(back);
                self.act_inc *= 1.0 / 0.95;
                if learnt.len() == 1 {
                    if !self.enqueue(learnt[0], -1) {
                        return Outcome::Unsat;
                    }
                } else {
                    let ci = self.add_clause(learnt.clone());
                    if !self.enqueue(learnt[0], ci as i64) {
                        return Outcome::Unsat;
                    }
                }
            } else if self.conflicts >= restart_at && !self.trail_lim.is_empty() {
                luby_idx += 1;
                restart_at = self.conflicts + 64 * luby(luby_idx);
                self.cancel_until(0);
            } else {
                match self.decide() {
                    None => {
                        let model = self
                            .assign
                            .iter()
                            .map(|v| matches!(v, Val::True))
                            .collect();
                        return Outcome::Sat(model);
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        let ok = self.enqueue(l, -1);
                        debug_assert!(ok);
                    }
                }
            }
        }
    }
}

fn luby(idx: u64) -> u64 {
    // the Luby restart sequence 1 1 2 1 1 2 4 ..., 1-indexed internally
    let mut i = idx + 1;
    loop {
        let mut k = 1u64;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

pub fn solve(cnf: &Cnf, conflict_budget: u64) -> Outcome {
    match Solver::new(cnf) {
        None => Outcome::Unsat,
        Some(mut s) => s.solve(conflict_budget),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute(cnf: &Cnf) -> Option<Vec<bool>> {
        for m in 0..1u64 << cnf.vars {
            let model: Vec<bool> = (0..cnf.vars).map(|v| m >> v & 1 == 1).collect();
            if cnf.clauses.iter().all(|c| {
                c.iter()
                    .any(|&l| model[lit_var(l) as usize] == lit_positive(l))
            }) {
                return Some(model);
            }
        }
        None
    }

    #[test]
    fn trivial_cases() {
        let c = Cnf { vars: 1, clauses: vec![vec![lit(0, true)], vec![lit(0, false)]] };
        assert!(matches!(solve(&c, 1000), Outcome::Unsat));
        let c = Cnf { vars: 1, clauses: vec![vec![lit(0, true)]] };
        match solve(&c, 1000) {
            Outcome::Sat(m) => assert!(m[0]),
            _ => panic!(),
        }
        let c = Cnf { vars: 0, clauses: vec![] };
        assert!(matches!(solve(&c, 1000), Outcome::Sat(_)));
    }

    #[test]
    fn agrees_with_brute_force_on_random_cnfs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for round in 0..600 {
            let vars = rng.gen_range(1..=12u32);
            let n_clauses = rng.gen_range(1..=(4 * vars as usize + 4));
            let clauses: Vec<Vec<Lit>> = (0..n_clauses)
                .map(|_| {
                    let len = rng.gen_range(1..=3usize);
                    (0..len)
                        .map(|_| lit(rng.gen_range(0..vars), rng.gen()))
                        .collect()
                })
                .collect();
            let cnf = Cnf { vars, clauses };
            let want = brute(&cnf);
            match solve(&cnf, 1 << 20) {
                Outcome::Sat(m) => {
                    assert!(want.is_some(), "round {round}: solver sat, brute unsat");
                    for c in &cnf.clauses {
                        assert!(c.iter().any(|&l| m[lit_var(l) as usize] == lit_positive(l)));
                    }
                }
                Outcome::Unsat => assert!(want.is_none(), "round {round}: solver unsat, brute sat"),
                Outcome::BudgetExceeded => panic!("budget on a tiny instance"),
            }
        }
    }
}
