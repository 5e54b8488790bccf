//! DIMACS CNF export and parsing. Variables are renumbered densely in first
//! appearance order; two-pass mode counts first and writes exact header
//! numbers, single-pass mode streams with an upper-bound header.

use crate::assembler::{Assembler, Clause};
use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DimacsError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("parse error at line {0}: {1}")]
    Parse(usize, String),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExportOptions {
    pub dedup: bool,
    pub two_pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ExportStats {
    pub vars: u64,
    pub clauses_written: u64,
    pub clauses_dropped: u64,
    pub gates: u64,
}

/// Dense renumbering table from packed variable ids to positive DIMACS
/// variables.
#[derive(Default)]
pub struct Renumbering {
    map: HashMap<u64, u32>,
    back: Vec<u64>,
}

impl Renumbering {
    pub fn get(&mut self, var: u64) -> u32 {
        match self.map.get(&var) {
            Some(&v) => v,
            None => {
                let v = self.back.len() as u32 + 1;
                self.map.insert(var, v);
                self.back.push(var);
                v
            }
        }
    }
    pub fn len(&self) -> usize {
        self.back.len()
    }
    pub fn is_empty(&self) -> bool {
        self.back.is_empty()
    }
    pub fn original(&self, dimacs_var: u32) -> Option<u64> {
        self.back.get(dimacs_var as usize - 1).copied()
    }
}

/// Streams the reachable formula of an assembled instance. Returns the
/// stats and the renumbering used, which witness decoding needs.
pub fn stream_dimacs(
    asm: &Assembler,
    out: &mut dyn Write,
    options: ExportOptions,
) -> Result<(ExportStats, Renumbering), DimacsError> {
    let core = asm.export_core();
    let mut ren = Renumbering::default();
    let mut stats = ExportStats {
        gates: core.gate_count,
        ..Default::default()
    };
    let mut seen: std::collections::HashSet<[i64; 3]> = std::collections::HashSet::new();
    let mut lines: Vec<[i64; 3]> = Vec::new();
    let dummy = asm.dummy_var();
    let mut dummy_written = false;
    for c in &core.clauses {
        let is_dummy = c.lits.iter().all(|l| l.var == dummy);
        if options.dedup && is_dummy && dummy_written {
            stats.clauses_dropped += 1;
            continue;
        }
        let mut row = [0i64; 3];
        for (k, lit) in c.lits.iter().enumerate() {
            let v = ren.get(lit.var) as i64;
            row[k] = if lit.positive { v } else { -v };
        }
        if options.dedup {
            let mut canon = row;
            canon.sort_unstable();
            if !seen.insert(canon) {
                stats.clauses_dropped += 1;
                continue;
            }
        }
        if is_dummy {
            dummy_written = true;
        }
        lines.push(row);
    }
    stats.vars = ren.len() as u64;
    stats.clauses_written = lines.len() as u64;
    if options.two_pass {
        writeln!(out, "p cnf {} {}", stats.vars, stats.clauses_written)?;
    } else {
        // upper bound header for single-pass consumers
        writeln!(out, "p cnf {} {}", stats.vars, core.clauses.len())?;
    }
    for row in &lines {
        writeln!(out, "{} {} {} 0", row[0], row[1], row[2])?;
    }
    Ok((stats, ren))
}

/// Writes an arbitrary clause list (already renumbered) as DIMACS.
pub fn write_clauses(out: &mut dyn Write, vars: u64, clauses: &[Vec<i64>]) -> io::Result<()> {
    writeln!(out, "p cnf {} {}", vars, clauses.len())?;
    for c in clauses {
        for l in c {
            write!(out, "{l} ")?;
        }
        writeln!(out, "0")?;
    }
    Ok(())
}

/// A parsed CNF with 1-based signed literals.
#[derive(Clone, Debug, Default)]
pub struct ParsedCnf {
    pub vars: u64,
    pub clauses: Vec<Vec<i64>>,
}

pub fn parse_dimacs(input: &mut dyn BufRead) -> Result<ParsedCnf, DimacsError> {
    let mut cnf = ParsedCnf::default();
    let mut current: Vec<i64> = Vec::new();
    for (ln, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != "cnf" {
                return Err(DimacsError::Parse(ln + 1, format!("bad header {line:?}")));
            }
            cnf.vars = toks[1]
                .parse()
                .map_err(|e| DimacsError::Parse(ln + 1, format!("{e}")))?;
            continue;
        }
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|e| DimacsError::Parse(ln + 1, format!("{e}")))?;
            if v == 0 {
                cnf.clauses.push(std::mem::take(&mut current));
            } else {
                cnf.vars = cnf.vars.max(v.unsigned_abs());
                current.push(v);
            }
        }
    }
    if !current.is_empty() {
        cnf.clauses.push(current);
    }
    Ok(cnf)
}

/// Packs a clause list from the assembler into the in-memory CNF form the
/// internal solvers take.
pub fn to_internal(clauses: &[Clause]) -> (crate::cdcl::Cnf, Renumbering) {
    let mut ren = Renumbering::default();
    let cls = clauses
        .iter()
        .map(|c| {
            c.lits
                .iter()
                .map(|l| crate::cdcl::lit(ren.get(l.var) - 1, l.positive))
                .collect()
        })
        .collect();
    (
        crate::cdcl::Cnf {
            vars: ren.len() as u32,
            clauses: cls,
        },
        ren,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn single_unit_clause_golden() {
        let mut out = Vec::new();
        write_clauses(&mut out, 1, &[vec![1, 1, 1]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "p cnf 1 1\n1 1 1 0\n");
    }

    #[test]
    fn parse_round_trip() {
        let text = "c comment\np cnf 3 2\n1 -2 3 0\n-1 2 0\n";
        let cnf = parse_dimacs(&mut Cursor::new(text)).unwrap();
        assert_eq!(cnf.vars, 3);
        assert_eq!(cnf.clauses, vec![vec![1, -2, 3], vec![-1, 2]]);
    }

    #[test]
    fn parser_rejects_garbage() {
        let text = "p cnf x y\n";
        assert!(parse_dimacs(&mut Cursor::new(text)).is_err());
        let text = "hello world\n";
        assert!(parse_dimacs(&mut Cursor::new(text)).is_err());
    }
}
