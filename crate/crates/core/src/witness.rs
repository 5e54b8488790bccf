//! Witness decoding: reads the configuration variables out of a satisfying
//! model, reorders slots by their timestamp values, reconstructs the
//! witness string, and replays it through the reference simulator.

use crate::assembler::Assembler;
use crate::bits::Bits;
use crate::dimacs::Renumbering;
use crate::machine::{run, Configuration};
use crate::solver::Model;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DecodeError {
    #[error("model does not describe timestamps 1..T' ({0})")]
    BadTimestamps(String),
    #[error("decoded witness does not replay to acceptance")]
    DecodeMismatch,
    #[error(transparent)]
    Machine(#[from] crate::machine::MachineError),
}

pub struct DecodedWitness {
    pub y: Bits,
    pub configs: Vec<Configuration>,
    pub summary: String,
}

/// Reads configuration bits from a model keyed by original variable ids.
pub fn configs_from_model(asm: &Assembler, value: &dyn Fn(u64) -> bool) -> Vec<Configuration> {
    let p = &asm.params;
    (0..p.t_prime)
        .map(|i| {
            let mut b = Bits::zeros(p.cfg.width());
            for m in 0..p.cfg.width() {
                let label = p.config_label(i, m as u64);
                if value(asm.var_of(&label)) {
                    b.set(m, true);
                }
            }
            p.cfg.decode(&b)
        })
        .collect()
}

/// Decodes the witness from a model over renumbered DIMACS variables.
pub fn decode_witness(
    asm: &Assembler,
    ren: &Renumbering,
    model: &Model,
    dimacs_model: bool,
) -> Result<DecodedWitness, DecodeError> {
    let lookup: Box<dyn Fn(u64) -> bool> = if dimacs_model {
        // model keys are dense DIMACS variables; invert through the table
        let mut back: std::collections::HashMap<u64, bool> = std::collections::HashMap::new();
        for (&dv, &val) in model {
            if let Some(orig) = ren.original(dv as u32) {
                back.insert(orig, val);
            }
        }
        Box::new(move |v| back.get(&v).copied().unwrap_or(false))
    } else {
        let m = model.clone();
        Box::new(move |v| m.get(&v).copied().unwrap_or(false))
    };
    decode_from(asm, &lookup)
}

pub fn decode_from(asm: &Assembler, value: &dyn Fn(u64) -> bool) -> Result<DecodedWitness, DecodeError> {
    let p = &asm.params;
    let spec = &asm.spec;
    let slots = configs_from_model(asm, value);
    // order by timestamp; the slot assignment may be rotated
    let mut by_time: Vec<Option<&Configuration>> = vec![None; p.t_prime as usize + 1];
    for c in &slots {
        if c.time < 1 || c.time > p.t_prime {
            return Err(DecodeError::BadTimestamps(format!("time {}", c.time)));
        }
        if by_time[c.time as usize].replace(c).is_some() {
            return Err(DecodeError::BadTimestamps(format!("duplicate time {}", c.time)));
        }
    }
    let ordered: Vec<&Configuration> = (1..=p.t_prime)
        .map(|t| by_time[t as usize].expect("all times present"))
        .collect();
    // witness bits: the guess consumed at each branching step
    let mut last_used = 0usize;
    let mut y = Bits::zeros(p.t_prime as usize);
    for (t0, c) in ordered.iter().enumerate() {
        let branching = c.state < spec.state_count
            && spec.rule(c.state, &c.read, false) != spec.rule(c.state, &c.read, true);
        if branching {
            last_used = t0 + 1;
            y.set(t0, c.guess);
        }
    }
    let y = y.slice(0..last_used);
    let trace = run(spec, &asm.x, &y, p.t_prime)?;
    if !trace.accept {
        return Err(DecodeError::DecodeMismatch);
    }
    let summary = format!(
        "witness {} replays to acceptance in {} padded steps (final state {})",
        if y.is_empty() { "(empty)".to_string() } else { y.to_string() },
        p.t_prime,
        trace.configs.last().unwrap().state
    );
    Ok(DecodedWitness {
        y,
        configs: ordered.into_iter().cloned().collect(),
        summary,
    })
}
