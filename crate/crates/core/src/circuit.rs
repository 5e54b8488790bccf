//! Implicitly represented circuits. A circuit is a label space together with
//! a type map and a child map, both decision-tree forests; no gate list is
//! ever materialized. Evaluation and acyclicity checks walk labels on demand.

use crate::bits::Bits;
use crate::localmap::LocalMap;
use std::collections::HashMap;
use thiserror::Error;

/// Gate types. The numeric codes are fixed: type maps emit them as 3-bit
/// fields at fixed positions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum GateType {
    And,
    Not,
    Copy,
    Input,
    XOracle,
    Const0,
    Const1,
}

impl GateType {
    pub const CODE_BITS: usize = 3;

    pub fn code(self) -> u64 {
        match self {
            GateType::And => 0,
            GateType::Not => 1,
            GateType::Copy => 2,
            GateType::Input => 3,
            GateType::XOracle => 4,
            GateType::Const0 => 5,
            GateType::Const1 => 6,
        }
    }

    /// Total decoding; the unused code 7 reads as Const0.
    pub fn from_code(code: u64) -> Self {
        match code & 7 {
            0 => GateType::And,
            1 => GateType::Not,
            2 => GateType::Copy,
            3 => GateType::Input,
            4 => GateType::XOracle,
            5 => GateType::Const0,
            6 => GateType::Const1,
            _ => GateType::Const0,
        }
    }

    /// Number of children the evaluator follows.
    pub fn arity(self) -> usize {
        match self {
            GateType::And => 2,
            GateType::Not | GateType::Copy | GateType::XOracle => 1,
            GateType::Input | GateType::Const0 | GateType::Const1 => 0,
        }
    }
}

/// A circuit given by decision-tree maps over a label space.
///
/// `type_map` takes a label to a 3-bit type code. `child_map` takes a label
/// plus one selector bit (appended after the label) to a child label;
/// fan-in-1 types ignore the selector.
#[derive(Clone)]
pub struct ImplicitCircuit {
    pub label_width: usize,
    pub type_map: LocalMap,
    pub child_map: LocalMap,
    pub root_label: Bits,
}

#[derive(Error, Debug)]
pub enum CircuitError {
    #[error("cycle detected through label {0}")]
    CycleDetected(String),
    #[error("x-oracle gate {0} hit with no resolver")]
    MissingOracle(String),
    #[error("input gate {0} hit with no assignment resolver")]
    MissingAssignment(String),
    #[error("evaluation budget exceeded after {0} labels")]
    BudgetExceeded(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acyclicity {
    pub acyclic: bool,
    /// True when only a budgeted part of the label space was explored.
    pub partial: bool,
    pub labels_visited: usize,
    pub cycle_witness: Option<Bits>,
}

impl ImplicitCircuit {
    pub fn gate_type(&self, label: &Bits) -> GateType {
        let code = self.type_map.eval(label).read_u64(0..GateType::CODE_BITS);
        GateType::from_code(code)
    }

    pub fn child(&self, label: &Bits, selector: bool) -> Bits {
        let mut input = label.clone();
        input.push(selector);
        self.child_map.eval(&input)
    }

    /// Evaluates the root under standard gate semantics, memoized by label.
    /// `oracle` resolves x-oracle gates, `assignment` resolves input gates;
    /// both receive the gate label.
    pub fn evaluate(
        &self,
        oracle: Option<&dyn Fn(&Bits) -> bool>,
        assignment: Option<&dyn Fn(&Bits) -> bool>,
    ) -> Result<bool, CircuitError> {
        self.evaluate_from(&self.root_label, oracle, assignment, 1 << 22)
    }

    pub fn evaluate_from(
        &self,
        start: &Bits,
        oracle: Option<&dyn Fn(&Bits) -> bool>,
        assignment: Option<&dyn Fn(&Bits) -> bool>,
        budget: usize,
    ) -> Result<bool, CircuitError> {
        let mut memo: HashMap<Bits, bool> = HashMap::new();
        let mut on_path: HashMap<Bits, ()> = HashMap::new();
        self.eval_rec(start, oracle, assignment, &mut memo, &mut on_path, budget)
    }

    fn eval_rec(
        &self,
        label: &Bits,
        oracle: Option<&dyn Fn(&Bits) -> bool>,
        assignment: Option<&dyn Fn(&Bits) -> bool>,
        memo: &mut HashMap<Bits, bool>,
        on_path: &mut HashMap<Bits, ()>,
        budget: usize,
    ) -> Result<bool, CircuitError> {
        if let Some(&v) = memo.get(label) {
            return Ok(v);
        }
        if memo.len() > budget {
            return Err(CircuitError::BudgetExceeded(memo.len()));
        }
        if on_path.contains_key(label) {
            return Err(CircuitError::CycleDetected(label.to_string()));
        }
        on_path.insert(label.clone(), ());
        let ty = self.gate_type(label);
        let v = match ty {
            GateType::Const0 => false,
            GateType::Const1 => true,
            GateType::Input => assignment
                .ok_or_else(|| CircuitError::MissingAssignment(label.to_string()))?(
                label
            ),
            GateType::XOracle => {
                let f = oracle.ok_or_else(|| CircuitError::MissingOracle(label.to_string()))?;
                // an oracle gate reads through to the oracle bit it names
                f(label)
            }
            GateType::Copy => {
                let c = self.child(label, false);
                self.eval_rec(&c, oracle, assignment, memo, on_path, budget)?
            }
            GateType::Not => {
                let c = self.child(label, false);
                !self.eval_rec(&c, oracle, assignment, memo, on_path, budget)?
            }
            GateType::And => {
                let a = self.child(label, false);
                let b = self.child(label, true);
                let va = self.eval_rec(&a, oracle, assignment, memo, on_path, budget)?;
                let vb = self.eval_rec(&b, oracle, assignment, memo, on_path, budget)?;
                va && vb
            }
        };
        on_path.remove(label);
        memo.insert(label.clone(), v);
        Ok(v)
    }

    /// Checks for directed cycles among labels under the child map.
    ///
    /// In exhaustive mode every one of the `2^label_width` labels is used as
    /// a start; this is the mode the small fixtures are verified in. In
    /// budgeted mode only labels reachable from the root are explored, up to
    /// the budget, and the result is marked partial.
    pub fn check_acyclic(&self, exhaustive: bool, budget: usize) -> Acyclicity {
        let mut color: HashMap<Bits, u8> = HashMap::new(); // 1 = on stack, 2 = done
        let starts: Vec<Bits> = if exhaustive {
            assert!(
                self.label_width <= 26,
                "label space too large for exhaustive acyclicity"
            );
            (0..1u64 << self.label_width)
                .map(|v| Bits::from_u64(v, self.label_width))
                .collect()
        } else {
            vec![self.root_label.clone()]
        };
        let mut visited = 0usize;
        for s in starts {
            if color.get(&s) == Some(&2) {
                continue;
            }
            // iterative DFS with explicit enter/exit frames
            let mut stack: Vec<(Bits, bool)> = vec![(s, false)];
            while let Some((label, exiting)) = stack.pop() {
                if exiting {
                    color.insert(label, 2);
                    continue;
                }
                match color.get(&label) {
                    Some(&2) => continue,
                    Some(&1) => {
                        return Acyclicity {
                            acyclic: false,
                            partial: false,
                            labels_visited: visited,
                            cycle_witness: Some(label),
                        };
                    }
                    _ => {}
                }
                if !exhaustive && visited >= budget {
                    return Acyclicity {
                        acyclic: true,
                        partial: true,
                        labels_visited: visited,
                        cycle_witness: None,
                    };
                }
                visited += 1;
                color.insert(label.clone(), 1);
                stack.push((label.clone(), true));
                let ty = self.gate_type(&label);
                for sel in 0..ty.arity() {
                    stack.push((self.child(&label, sel == 1), false));
                }
            }
        }
        Acyclicity {
            acyclic: true,
            partial: !exhaustive,
            labels_visited: visited,
            cycle_witness: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::{increment_map, steps_to_final, CarryCounter};
    use crate::localmap::LocalMap;

    fn const_circuit(value: bool) -> ImplicitCircuit {
        let ty = if value { GateType::Const1 } else { GateType::Const0 };
        ImplicitCircuit {
            label_width: 1,
            type_map: LocalMap::from_fn(1, 3, |_| vec![], move |_, j| ty.code() >> j & 1 == 1),
            child_map: LocalMap::from_fn(2, 1, |_| vec![], |_, _| false),
            root_label: Bits::zeros(1),
        }
    }

    #[test]
    fn const1_root_evaluates_to_1() {
        assert!(const_circuit(true).evaluate(None, None).unwrap());
        assert!(!const_circuit(false).evaluate(None, None).unwrap());
    }

    #[test]
    fn not_over_const0() {
        // labels: 1 bit; label 1 = Not whose child is label 0 = Const0
        let type_map = LocalMap::from_fn(
            1,
            3,
            |_| vec![0],
            |x, j| {
                let ty = if x[0] { GateType::Not } else { GateType::Const0 };
                ty.code() >> j & 1 == 1
            },
        );
        let child_map = LocalMap::from_fn(2, 1, |_| vec![], |_, _| false);
        let c = ImplicitCircuit {
            label_width: 1,
            type_map,
            child_map,
            root_label: Bits::from_u64(1, 1),
        };
        assert!(c.evaluate(None, None).unwrap());
    }

    /// A chain circuit whose labels are carry counters: non-final labels are
    /// Copy gates pointing at the incremented counter, final labels are
    /// Const1. Acyclic because the counter always reaches a final value.
    fn counter_chain(pairs: usize) -> ImplicitCircuit {
        let w = 2 * pairs;
        let inc = increment_map(pairs);
        let type_map = LocalMap::from_fn(
            w,
            3,
            |_| vec![w - 1],
            |x, j| {
                let ty = if x[w - 1] { GateType::Const1 } else { GateType::Copy };
                ty.code() >> j & 1 == 1
            },
        );
        let inc2 = inc.clone();
        let child_map = LocalMap::from_fn(
            w + 1,
            w,
            |j| inc.tree(j).dependencies().into_iter().collect(),
            move |x, j| inc2.tree(j).eval_slice(&x[..w]),
        );
        ImplicitCircuit {
            label_width: w,
            type_map,
            child_map,
            root_label: Bits::zeros(w),
        }
    }

    #[test]
    fn counter_chain_is_acyclic_exhaustively() {
        let c = counter_chain(2);
        let r = c.check_acyclic(true, 0);
        assert!(r.acyclic && !r.partial);
        assert_eq!(r.labels_visited, 16);
        assert!(c.evaluate(None, None).unwrap());
    }

    #[test]
    fn chain_length_matches_counter_schedule() {
        // walking the chain from zero takes steps_to_final hops
        let c = counter_chain(2);
        let mut label = c.root_label.clone();
        let mut hops = 0;
        while c.gate_type(&label) == GateType::Copy {
            label = c.child(&label, false);
            hops += 1;
            assert!(hops < 100);
        }
        assert_eq!(hops, steps_to_final(2));
        assert_eq!(
            CarryCounter::from_bits(label).is_final(),
            true
        );
    }

    #[test]
    fn self_loop_copy_is_a_cycle() {
        let type_map = LocalMap::from_fn(2, 3, |_| vec![], |_, j| GateType::Copy.code() >> j & 1 == 1);
        // identity child map: label -> label
        let child_map = LocalMap::from_fn(3, 2, |j| vec![j], |x, j| x[j]);
        let c = ImplicitCircuit {
            label_width: 2,
            type_map,
            child_map,
            root_label: Bits::zeros(2),
        };
        let r = c.check_acyclic(true, 0);
        assert!(!r.acyclic);
        assert!(matches!(c.evaluate(None, None), Err(CircuitError::CycleDetected(_))));
    }

    #[test]
    fn missing_resolvers_are_errors() {
        let type_map =
            LocalMap::from_fn(1, 3, |_| vec![], |_, j| GateType::Input.code() >> j & 1 == 1);
        let child_map = LocalMap::from_fn(2, 1, |_| vec![], |_, _| false);
        let c = ImplicitCircuit {
            label_width: 1,
            type_map,
            child_map,
            root_label: Bits::zeros(1),
        };
        assert!(matches!(
            c.evaluate(None, None),
            Err(CircuitError::MissingAssignment(_))
        ));
        assert!(c.evaluate(None, Some(&|_: &Bits| true)).unwrap());
    }
}
