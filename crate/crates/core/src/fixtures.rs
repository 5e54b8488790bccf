//! Canonical machine fixtures used across tests, the verify subcommand and
//! the acceptance suite. Each constructor documents its timing so callers
//! can pick a padded bound.

use crate::bits::Bits;
use crate::machine::{MachineSpec, Sym, Transition};

fn rule(next: u32, writes: &[Sym], moves: &[i8]) -> Transition {
    Transition {
        next_state: next,
        writes: writes.to_vec(),
        moves: moves.to_vec(),
    }
}

/// Adds the same rule for every read symbol, writing back what was read.
fn for_all_reads(spec: &mut MachineSpec, state: u32, guess: bool, next: u32, mv: i8) {
    for r in [Sym::S0, Sym::S1, Sym::Blank] {
        spec.add_rule(state, &[r], guess, rule(next, &[r], &[mv])).unwrap();
    }
}

/// Accepts iff the witness equals the input: step `t <= n` compares the
/// guess bit against `x_t` while sweeping right; the first blank read flips
/// to accept. States: 0 = compare, 1 = reject, 2 = accept. Runs in `n + 1`
/// steps before padding.
pub fn eq_machine() -> MachineSpec {
    let mut m = MachineSpec::new(1, 3, 0, 2);
    for (read, bit) in [(Sym::S0, false), (Sym::S1, true)] {
        for guess in [false, true] {
            let next = if guess == bit { 0 } else { 1 };
            m.add_rule(0, &[read], guess, rule(next, &[read], &[1])).unwrap();
        }
    }
    for guess in [false, true] {
        m.add_rule(0, &[Sym::Blank], guess, rule(2, &[Sym::Blank], &[0])).unwrap();
    }
    for guess in [false, true] {
        for_all_reads(&mut m, 1, guess, 1, 1);
        for_all_reads(&mut m, 2, guess, 2, 0);
    }
    m.validate().unwrap();
    m
}

/// Accepts iff the four witness bits form a palindrome; takes no input
/// (`n = 0`). Writes the first two guesses on tape, then compares them with
/// the last two. States: 0,1 write, 2,3 compare, 4 accept, 5 reject. Runs in
/// 5 steps.
pub fn palindrome_machine() -> MachineSpec {
    let mut m = MachineSpec::new(1, 6, 0, 4);
    for guess in [false, true] {
        let w = Sym::from_bit(guess);
        for r in [Sym::S0, Sym::S1, Sym::Blank] {
            // write w1 at cell 1, move right
            m.add_rule(0, &[r], guess, rule(1, &[w], &[1])).unwrap();
            // write w2 at cell 2, stay
            m.add_rule(1, &[r], guess, rule(2, &[w], &[0])).unwrap();
        }
        // compare w3 against the stored w2, move left
        for (r, bit) in [(Sym::S0, false), (Sym::S1, true)] {
            let next = if guess == bit { 3 } else { 5 };
            m.add_rule(2, &[r], guess, rule(next, &[r], &[-1])).unwrap();
        }
        m.add_rule(2, &[Sym::Blank], guess, rule(5, &[Sym::Blank], &[0])).unwrap();
        // compare w4 against the stored w1
        for (r, bit) in [(Sym::S0, false), (Sym::S1, true)] {
            let next = if guess == bit { 4 } else { 5 };
            m.add_rule(3, &[r], guess, rule(next, &[r], &[0])).unwrap();
        }
        m.add_rule(3, &[Sym::Blank], guess, rule(5, &[Sym::Blank], &[0])).unwrap();
        for_all_reads(&mut m, 4, guess, 4, 0);
        for_all_reads(&mut m, 5, guess, 5, 0);
    }
    m.validate().unwrap();
    m
}

/// Never accepts. State 0 sweeps right forever; state 1 is the (unreachable)
/// accept state.
pub fn reject_machine() -> MachineSpec {
    let mut m = MachineSpec::new(1, 2, 0, 1);
    for guess in [false, true] {
        for_all_reads(&mut m, 0, guess, 0, 1);
        for_all_reads(&mut m, 1, guess, 1, 0);
    }
    m.validate().unwrap();
    m
}

/// Accepts immediately: the start state is the accept state (`n = 0`).
pub fn trivial_machine() -> MachineSpec {
    let mut m = MachineSpec::new(1, 1, 0, 0);
    for guess in [false, true] {
        for_all_reads(&mut m, 0, guess, 0, 0);
    }
    m.validate().unwrap();
    m
}

/// Accepts iff the first guess bit is 1 (`n = 0`); exercises branching on
/// the guess channel. States: 0 branch, 1 reject, 2 accept.
pub fn coin_machine() -> MachineSpec {
    let mut m = MachineSpec::new(1, 3, 0, 2);
    for r in [Sym::S0, Sym::S1, Sym::Blank] {
        m.add_rule(0, &[r], false, rule(1, &[r], &[0])).unwrap();
        m.add_rule(0, &[r], true, rule(2, &[r], &[0])).unwrap();
    }
    for guess in [false, true] {
        for_all_reads(&mut m, 1, guess, 1, 0);
        for_all_reads(&mut m, 2, guess, 2, 0);
    }
    m.validate().unwrap();
    m
}

/// A named fixture instance: machine, input, and a comfortable padded bound.
pub struct Fixture {
    pub name: &'static str,
    pub spec: MachineSpec,
    pub x: Bits,
    pub t_prime: u64,
    pub satisfiable: bool,
}

/// The instances the verify subcommand and the acceptance suite run
/// end to end.
pub fn standard_fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "eq-n1",
            spec: eq_machine(),
            x: Bits::from_str01("1"),
            t_prime: 4,
            satisfiable: true,
        },
        Fixture {
            name: "eq-n3",
            spec: eq_machine(),
            x: Bits::from_str01("101"),
            t_prime: 8,
            satisfiable: true,
        },
        Fixture {
            name: "palindrome",
            spec: palindrome_machine(),
            x: Bits::zeros(0),
            t_prime: 8,
            satisfiable: true,
        },
        Fixture {
            name: "reject",
            spec: reject_machine(),
            x: Bits::from_str01("10"),
            t_prime: 4,
            satisfiable: false,
        },
        Fixture {
            name: "trivial",
            spec: trivial_machine(),
            x: Bits::zeros(0),
            t_prime: 4,
            satisfiable: true,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{run, witness_exists, MachineError};

    #[test]
    fn eq_accepts_only_matching_witness() {
        let m = eq_machine();
        let x = Bits::from_str01("101");
        assert!(run(&m, &x, &Bits::from_str01("101"), 8).unwrap().accept);
        assert!(!run(&m, &x, &Bits::from_str01("100"), 8).unwrap().accept);
        assert!(!run(&m, &x, &Bits::from_str01("1"), 8).unwrap().accept);
    }

    #[test]
    fn eq_witness_search_is_lex_first() {
        let m = eq_machine();
        let (ok, y) = witness_exists(&m, &Bits::from_str01("101"), 8, 1 << 20).unwrap();
        assert!(ok);
        assert_eq!(format!("{}", y.unwrap()), "101");
    }

    #[test]
    fn palindrome_lex_first_is_all_zero() {
        let m = palindrome_machine();
        let (ok, y) = witness_exists(&m, &Bits::zeros(0), 8, 1 << 20).unwrap();
        assert!(ok);
        assert_eq!(format!("{}", y.unwrap()), "0000");
        assert!(run(&m, &Bits::zeros(0), &Bits::from_str01("0110"), 8).unwrap().accept);
        assert!(!run(&m, &Bits::zeros(0), &Bits::from_str01("0100"), 8).unwrap().accept);
    }

    #[test]
    fn reject_has_no_witness() {
        let m = reject_machine();
        let (ok, y) = witness_exists(&m, &Bits::from_str01("10"), 8, 1 << 20).unwrap();
        assert!(!ok);
        assert!(y.is_none());
    }

    #[test]
    fn trivial_machine_pads_with_self_loop() {
        let m = trivial_machine();
        let tr = run(&m, &Bits::zeros(0), &Bits::zeros(0), 4).unwrap();
        assert!(tr.accept);
        assert_eq!(tr.configs.len(), 4);
        for (i, c) in tr.configs.iter().enumerate() {
            assert_eq!(c.time, i as u64 + 1);
            assert_eq!(c.state, 0);
        }
    }

    #[test]
    fn coin_branches_on_guess() {
        use crate::machine::{initial_configuration, step, Tapes};
        let m = coin_machine();
        let tapes = Tapes::new(1);
        let c = initial_configuration(&m, &tapes);
        let (a, _) = step(&m, &c, &tapes, false).unwrap();
        let (b, _) = step(&m, &c, &tapes, true).unwrap();
        assert_ne!(a.state, b.state);
        let (ok, y) = witness_exists(&m, &Bits::zeros(0), 4, 1 << 10).unwrap();
        assert!(ok);
        assert_eq!(format!("{}", y.unwrap()), "1");
    }

    #[test]
    fn scan_convention_verified_abstractly() {
        eq_machine().verify_input_scan(3).unwrap();
        reject_machine().verify_input_scan(8).unwrap();
        // the palindrome machine moves head 1 non-rightward at step 2
        let err = palindrome_machine().verify_input_scan(2);
        assert!(matches!(err, Err(MachineError::ScanViolation { .. })));
        palindrome_machine().verify_input_scan(0).unwrap();
    }

    #[test]
    fn spec_files_round_trip() {
        use crate::machine::{format_spec, parse_spec};
        for m in [eq_machine(), palindrome_machine(), reject_machine(), coin_machine()] {
            let text = format_spec(&m);
            let back = parse_spec(&text).unwrap();
            assert_eq!(back.state_count, m.state_count);
            assert_eq!(format_spec(&back), text);
        }
    }

    #[test]
    fn underflow_is_detected() {
        let mut m = MachineSpec::new(1, 2, 0, 1);
        for guess in [false, true] {
            for r in [Sym::S0, Sym::S1, Sym::Blank] {
                m.add_rule(0, &[r], guess, rule(0, &[r], &[-1])).unwrap();
                m.add_rule(1, &[r], guess, rule(1, &[r], &[0])).unwrap();
            }
        }
        m.validate().unwrap();
        let err = run(&m, &Bits::zeros(0), &Bits::zeros(0), 4);
        assert!(matches!(err, Err(MachineError::IndexUnderflow(_))));
    }
}
