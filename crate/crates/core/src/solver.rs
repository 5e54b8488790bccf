//! SAT back ends: an external solver invoked over the standard output
//! contract (`s SATISFIABLE` / `s UNSATISFIABLE` plus `v` lines), and a
//! brute-force oracle (unit propagation plus exhaustive chronological
//! search) for desk-scale cross-checks. Models are validated against the
//! formula before being returned.

use crate::dimacs::ParsedCnf;
use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfiable,
    Unsatisfiable,
}

#[derive(Error, Debug)]
pub enum SolveError {
    #[error("solver failed: {0}")]
    SolverError(String),
    #[error("solver produced an invalid model")]
    ModelInvalid,
    #[error("brute-force budget exceeded ({0} nodes)")]
    BudgetExceeded(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A model as 1-based assignments.
pub type Model = HashMap<u64, bool>;

pub fn validate_model(cnf: &ParsedCnf, model: &Model) -> bool {
    cnf.clauses.iter().all(|c| {
        c.iter().any(|&l| {
            model
                .get(&l.unsigned_abs())
                .map(|&v| v == (l > 0))
                .unwrap_or(false)
        })
    })
}

/// Runs `command <cnf-path>` and parses the verdict and model. Exit codes
/// 0, 10 and 20 are accepted; anything else is a solver failure.
pub fn solve_external(cnf: &ParsedCnf, cnf_path: &Path, command: &str) -> Result<(Verdict, Option<Model>), SolveError> {
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| SolveError::SolverError("empty solver command".into()))?;
    let output = Command::new(program)
        .args(parts)
        .arg(cnf_path)
        .output()
        .map_err(|e| SolveError::SolverError(format!("spawn {program:?}: {e}")))?;
    let code = output.status.code().unwrap_or(-1);
    if !matches!(code, 0 | 10 | 20) {
        return Err(SolveError::SolverError(format!("exit code {code}")));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut verdict = None;
    let mut model: Model = HashMap::new();
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            verdict = match rest.trim() {
                "SATISFIABLE" => Some(Verdict::Satisfiable),
                "UNSATISFIABLE" => Some(Verdict::Unsatisfiable),
                other => {
                    return Err(SolveError::SolverError(format!("bad status {other:?}")))
                }
            };
        } else if let Some(rest) = line.strip_prefix("v ") {
            for tok in rest.split_whitespace() {
                let v: i64 = tok
                    .parse()
                    .map_err(|e| SolveError::SolverError(format!("bad v line: {e}")))?;
                if v != 0 {
                    model.insert(v.unsigned_abs(), v > 0);
                }
            }
        }
    }
    match verdict {
        None => Err(SolveError::SolverError("no status line".into())),
        Some(Verdict::Unsatisfiable) => Ok((Verdict::Unsatisfiable, None)),
        Some(Verdict::Satisfiable) => {
            if !validate_model(cnf, &model) {
                return Err(SolveError::ModelInvalid);
            }
            Ok((Verdict::Satisfiable, Some(model)))
        }
    }
}

/// The in-process reference solver: exhaustive depth-first search with unit
/// propagation at every node. Exact; `BudgetExceeded` when the node budget
/// runs out. Guaranteed cheap when at most 24 variables occur in clauses.
pub fn brute_force_sat(cnf: &ParsedCnf, node_budget: u64) -> Result<(Verdict, Option<Model>), SolveError> {
    let vars = cnf.vars as usize;
    // occurrence lists
    let mut occ: Vec<Vec<u32>> = vec![Vec::new(); vars + 1];
    for (ci, c) in cnf.clauses.iter().enumerate() {
        if c.is_empty() {
            return Ok((Verdict::Unsatisfiable, None));
        }
        for &l in c {
            occ[l.unsigned_abs() as usize].push(ci as u32);
        }
    }
    #[derive(Clone, Copy, PartialEq)]
    enum V {
        U,
        T,
        F,
    }
    struct Dfs<'a> {
        cnf: &'a ParsedCnf,
        occ: &'a [Vec<u32>],
        assign: Vec<V>,
        trail: Vec<u64>,
        nodes: u64,
        budget: u64,
    }
    impl Dfs<'_> {
        fn lit_val(&self, l: i64) -> V {
            match self.assign[l.unsigned_abs() as usize] {
                V::U => V::U,
                V::T => {
                    if l > 0 {
                        V::T
                    } else {
                        V::F
                    }
                }
                V::F => {
                    if l > 0 {
                        V::F
                    } else {
                        V::T
                    }
                }
            }
        }
        /// Propagates all unit clauses; false on conflict.
        fn propagate(&mut self) -> bool {
            loop {
                let mut changed = false;
                for ci in 0..self.cnf.clauses.len() {
                    let c = &self.cnf.clauses[ci];
                    let mut unassigned = None;
                    let mut count = 0;
                    let mut sat = false;
                    for &l in c {
                        match self.lit_val(l) {
                            V::T => {
                                sat = true;
                                break;
                            }
                            V::U => {
                                unassigned = Some(l);
                                count += 1;
                            }
                            V::F => {}
                        }
                    }
                    if sat {
                        continue;
                    }
                    match count {
                        0 => return false,
                        1 => {
                            let l = unassigned.unwrap();
                            self.assign[l.unsigned_abs() as usize] =
                                if l > 0 { V::T } else { V::F };
                            self.trail.push(l.unsigned_abs());
                            changed = true;
                        }
                        _ => {}
                    }
                }
                if !changed {
                    return true;
                }
            }
        }
        fn go(&mut self) -> Result<bool, SolveError> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(SolveError::BudgetExceeded(self.nodes));
            }
            let mark = self.trail.len();
            if !self.propagate() {
                self.undo(mark);
                return Ok(false);
            }
            // pick the first unassigned variable occurring in clauses
            let v = (1..self.assign.len())
                .find(|&v| self.assign[v] == V::U && !self.occ[v].is_empty());
            let Some(v) = v else {
                return Ok(true); // every clause satisfied
            };
            for val in [V::F, V::T] {
                self.assign[v] = val;
                self.trail.push(v as u64);
                if self.go()? {
                    return Ok(true);
                }
                let l = self.trail.pop().unwrap();
                self.assign[l as usize] = V::U;
            }
            self.undo(mark);
            Ok(false)
        }
        fn undo(&mut self, mark: usize) {
            while self.trail.len() > mark {
                let v = self.trail.pop().unwrap();
                self.assign[v as usize] = V::U;
            }
        }
    }
    let mut dfs = Dfs {
        cnf,
        occ: &occ,
        assign: vec![V::U; vars + 1],
        trail: Vec::new(),
        nodes: 0,
        budget: node_budget,
    };
    if dfs.go()? {
        let model: Model = (1..=vars as u64)
            .map(|v| (v, dfs.assign[v as usize] == V::T))
            .collect();
        debug_assert!(validate_model(cnf, &model));
        Ok((Verdict::Satisfiable, Some(model)))
    } else {
        Ok((Verdict::Unsatisfiable, None))
    }
}

/// The internal CDCL engine behind the same interface, for in-process
/// solving of bigger instances.
pub fn cdcl_sat(cnf: &ParsedCnf, conflict_budget: u64) -> Result<(Verdict, Option<Model>), SolveError> {
    let internal = crate::cdcl::Cnf {
        vars: cnf.vars as u32,
        clauses: cnf
            .clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&l| crate::cdcl::lit(l.unsigned_abs() as u32 - 1, l > 0))
                    .collect()
            })
            .collect(),
    };
    match crate::cdcl::solve(&internal, conflict_budget) {
        crate::cdcl::Outcome::Unsat => Ok((Verdict::Unsatisfiable, None)),
        crate::cdcl::Outcome::BudgetExceeded => Err(SolveError::BudgetExceeded(conflict_budget)),
        crate::cdcl::Outcome::Sat(m) => {
            let model: Model = m
                .iter()
                .enumerate()
                .map(|(v, &b)| (v as u64 + 1, b))
                .collect();
            if !validate_model(cnf, &model) {
                return Err(SolveError::ModelInvalid);
            }
            Ok((Verdict::Satisfiable, Some(model)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn cnf(clauses: &[&[i64]]) -> ParsedCnf {
        ParsedCnf {
            vars: clauses
                .iter()
                .flat_map(|c| c.iter())
                .map(|l| l.unsigned_abs())
                .max()
                .unwrap_or(0),
            clauses: clauses.iter().map(|c| c.to_vec()).collect(),
        }
    }

    #[test]
    fn brute_force_basics() {
        let c = cnf(&[&[1], &[-1]]);
        assert_eq!(brute_force_sat(&c, 1000).unwrap().0, Verdict::Unsatisfiable);
        let c = cnf(&[&[1]]);
        let (v, m) = brute_force_sat(&c, 1000).unwrap();
        assert_eq!(v, Verdict::Satisfiable);
        assert_eq!(m.unwrap()[&1], true);
        let empty = ParsedCnf::default();
        assert_eq!(brute_force_sat(&empty, 1000).unwrap().0, Verdict::Satisfiable);
    }

    #[test]
    fn brute_matches_cdcl_on_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let vars = rng.gen_range(1..=10i64);
            let m = rng.gen_range(1..=30usize);
            let clauses: Vec<Vec<i64>> = (0..m)
                .map(|_| {
                    (0..rng.gen_range(1..=3))
                        .map(|_| {
                            let v = rng.gen_range(1..=vars);
                            if rng.gen() {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let c = ParsedCnf { vars: vars as u64, clauses };
            let a = brute_force_sat(&c, 1 << 22).unwrap().0;
            let b = cdcl_sat(&c, 1 << 22).unwrap().0;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn external_contract_violations() {
        let dir = tempfile::tempdir().unwrap();
        let cnf_path = dir.path().join("f.cnf");
        std::fs::write(&cnf_path, "p cnf 1 1\n1 1 1 0\n").unwrap();
        let c = cnf(&[&[1, 1, 1]]);
        // a script that prints garbage
        let bogus = dir.path().join("bogus.sh");
        std::fs::write(&bogus, "#!/bin/sh\necho gibberish\n").unwrap();
        let mut perms = std::fs::metadata(&bogus).unwrap().permissions();
        use std::os::unix::fs::PermissionsExt;
        perms.set_mode(0o755);
        std::fs::set_permissions(&bogus, perms).unwrap();
        let err = solve_external(&c, &cnf_path, bogus.to_str().unwrap());
        assert!(matches!(err, Err(SolveError::SolverError(_))));
        // a script that claims sat with a bogus model
        let lying = dir.path().join("lying.sh");
        let mut f = std::fs::File::create(&lying).unwrap();
        writeln!(f, "#!/bin/sh\necho 's SATISFIABLE'\necho 'v -1 0'").unwrap();
        drop(f);
        let mut perms = std::fs::metadata(&lying).unwrap().permissions();
        perms.set_mode(0o755);
        std::fs::set_permissions(&lying, perms).unwrap();
        let err = solve_external(&c, &cnf_path, lying.to_str().unwrap());
        assert!(matches!(err, Err(SolveError::ModelInvalid)));
    }
}
