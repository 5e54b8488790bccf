//! The global reduction: one label space with four regions, a total child
//! and type computation dispatching into the checker, fetch and network
//! maps, and clause emission producing the final local map
//! `D : {0,1}^(ell+3) -> {0,1}^(3v+3)`.
//!
//! Global label layout (low bits first): 2 region bits, then the region's
//! payload zero-padded to the widest region.
//!   region 0 (checker): i (log T'), j (2), unit (6), rail (nb), path (nb),
//!                       sub (11)
//!   region 1 (fetch):   a fetch-circuit label
//!   region 2 (network): j (2), then a network label
//!   region 3 (config):  i (log T'), m (ceil log2 width)
//!
//! A variable identifier is 1 dummy-flag bit, 2 region bits and the payload
//! (`v = 3 + payload` bits); the dummy is the flag bit alone.

use crate::bits::Bits;
use crate::checkers::{
    build_tape_checker, build_time_checker, log2_ceil, ChildRef, CheckerCircuit,
    ConfigLayout, GateLoc, LocKind, E_UNIT,
};
use crate::circuit::GateType;
use crate::fetch::{self, FetchShape};
use crate::localmap::{LocalMap, TreeExpr};
use crate::machine::{padded_time, MachineSpec};
use crate::routing::{self, NetShape};
use std::collections::HashMap;
use std::rc::Rc;
use thiserror::Error;

pub const REGION_CHECKER: u64 = 0;
pub const REGION_FETCH: u64 = 1;
pub const REGION_NET: u64 = 2;
pub const REGION_CONFIG: u64 = 3;

/// Region selector of a clause-index label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Checker,
    Fetch,
    Net,
    Config,
}

impl Region {
    pub fn code(self) -> u64 {
        match self {
            Region::Checker => REGION_CHECKER,
            Region::Fetch => REGION_FETCH,
            Region::Net => REGION_NET,
            Region::Config => REGION_CONFIG,
        }
    }
    pub fn from_code(c: u64) -> Region {
        match c & 3 {
            REGION_CHECKER => Region::Checker,
            REGION_FETCH => Region::Fetch,
            REGION_NET => Region::Net,
            _ => Region::Config,
        }
    }
}

#[derive(Error, Debug)]
pub enum AssembleError {
    #[error(transparent)]
    Machine(#[from] crate::machine::MachineError),
    #[error(transparent)]
    Fetch(#[from] crate::fetch::FetchError),
    #[error("time bound {0} is too small for the input scan")]
    TimeTooSmall(u64),
}

/// All width and offset bookkeeping for one compiled instance.
#[derive(Clone, Debug)]
pub struct Params {
    pub n: usize,
    pub t_bound: u64,
    pub r: usize,
    pub r_eff: usize,
    pub n_pad: usize,
    pub t_prime: u64,
    pub t_log: usize,
    pub tapes: usize,
    pub families: usize,
    pub cfg: ConfigLayout,
    pub net: NetShape,
    pub fetch: Option<FetchShape>,
    pub nb: usize,
    pub payload: usize,
    pub ell: usize,
    pub v: usize,
}

impl Params {
    pub fn new(spec: &MachineSpec, n: usize, t_bound: u64, r: usize) -> Result<Params, AssembleError> {
        let t_prime = padded_time(t_bound);
        if (n as u64) > t_prime {
            return Err(AssembleError::TimeTooSmall(t_bound));
        }
        let cfg = ConfigLayout::new(t_prime, spec.tape_count);
        let net = NetShape::new(t_prime, cfg.width());
        let (fetch, n_pad, r_eff) = if n == 0 {
            (None, 0, 1)
        } else {
            if r < 1 || r > n {
                return Err(AssembleError::Fetch(crate::fetch::FetchError::BadTradeoff { r, n }));
            }
            // the fetch circuit must resolve every address the slot-low
            // field can spell
            let n_pad = 1usize << log2_ceil(n);
            let mut r_eff = 1usize;
            while r_eff * 2 <= r {
                r_eff *= 2;
            }
            let r_eff = r_eff.min(n_pad);
            (Some(FetchShape::new(n_pad, r_eff)?), n_pad, r_eff)
        };
        let t_log = cfg.t_log;
        let nb = cfg.f.trailing_zeros() as usize;
        let a_width = t_log + 2 + 6 + 2 * nb + 11;
        let b_width = fetch.as_ref().map_or(2, |f| f.label_width());
        let c_width = 2 + net.label_width();
        let d_width = t_log + log2_ceil(cfg.width());
        let payload = a_width.max(b_width).max(c_width).max(d_width);
        let ell = payload + 2;
        assert!(ell <= 61, "label space too wide to pack");
        Ok(Params {
            n,
            t_bound,
            r,
            r_eff,
            n_pad,
            t_prime,
            t_log,
            tapes: spec.tape_count,
            families: spec.tape_count + 1,
            cfg,
            net,
            fetch,
            nb,
            payload,
            ell,
            v: payload + 3,
        })
    }

    // checker payload offsets (within the payload, i.e. label position - 2)
    pub fn a_i(&self) -> usize {
        0
    }
    pub fn a_j(&self) -> usize {
        self.t_log
    }
    pub fn a_unit(&self) -> usize {
        self.t_log + 2
    }
    pub fn a_rail(&self) -> usize {
        self.t_log + 8
    }
    pub fn a_path(&self) -> usize {
        self.t_log + 8 + self.nb
    }
    pub fn a_sub(&self) -> usize {
        self.t_log + 8 + 2 * self.nb
    }
    // network payload offsets
    pub fn c_j(&self) -> usize {
        0
    }
    pub fn c_net(&self) -> usize {
        2
    }
    // config payload offsets
    pub fn d_i(&self) -> usize {
        0
    }
    pub fn d_m(&self) -> usize {
        self.t_log
    }
    pub fn d_m_bits(&self) -> usize {
        log2_ceil(self.cfg.width())
    }

    pub fn clause_bits(&self) -> usize {
        3 * self.v + 3
    }

    /// Number of low timestamp bits tied to slot indices.
    pub fn slotlow_bits(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            log2_ceil(self.n)
        }
    }

    pub fn region_of(&self, label: &Bits) -> Region {
        Region::from_code(label.read_u64(0..2))
    }

    pub fn label(&self, region: Region, payload_bits: &[(usize, u64, usize)]) -> Bits {
        // payload_bits: (offset within payload, value, width)
        let mut b = Bits::zeros(self.ell);
        b.write_u64(0..2, region.code());
        for &(off, val, w) in payload_bits {
            b.write_u64(2 + off..2 + off + w, val);
        }
        b
    }

    pub fn checker_label(&self, i: u64, j: u64, loc: &GateLoc) -> Bits {
        self.label(
            Region::Checker,
            &[
                (self.a_i(), i, self.t_log),
                (self.a_j(), j, 2),
                (self.a_unit(), loc.unit, 6),
                (self.a_rail(), loc.rail, self.nb),
                (self.a_path(), loc.path, self.nb),
                (self.a_sub(), loc.sub, 11),
            ],
        )
    }

    pub fn config_label(&self, i: u64, m: u64) -> Bits {
        self.label(
            Region::Config,
            &[(self.d_i(), i, self.t_log), (self.d_m(), m, self.d_m_bits())],
        )
    }

    pub fn net_label(&self, j: u64, net: &Bits) -> Bits {
        let mut b = Bits::zeros(self.ell);
        b.write_u64(0..2, REGION_NET);
        b.write_u64(2 + self.c_j()..2 + self.c_j() + 2, j);
        for (k, bit) in net.iter().enumerate() {
            b.set(2 + self.c_net() + k, bit);
        }
        b
    }

    pub fn fetch_label(&self, f: &Bits) -> Bits {
        let mut b = Bits::zeros(self.ell);
        b.write_u64(0..2, REGION_FETCH);
        for (k, bit) in f.iter().enumerate() {
            b.set(2 + k, bit);
        }
        b
    }

    pub fn j_eff(&self, j: u64) -> u64 {
        j % self.families as u64
    }
}

impl std::fmt::Display for Params {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "n              {}", self.n)?;
        writeln!(f, "time bound     {}", self.t_bound)?;
        writeln!(f, "padded bound   {} (factor 1 beyond the power of two)", self.t_prime)?;
        writeln!(f, "tradeoff r     {} (effective {})", self.r, self.r_eff)?;
        writeln!(f, "tapes          {}", self.tapes)?;
        writeln!(f, "checker count  {}", self.families)?;
        writeln!(f, "config width   {} (field width {})", self.cfg.width(), self.cfg.f)?;
        writeln!(f, "network        {} rows x {} columns", self.net.rows(), self.net.columns())?;
        if let Some(fs) = &self.fetch {
            writeln!(f, "fetch label    {} bits (segment {}, counter pairs {})", fs.label_width(), fs.seg, fs.counter_pairs)?;
        }
        writeln!(f, "index bits     {}", self.ell)?;
        writeln!(f, "variable bits  {}", self.v)?;
        writeln!(f, "clause bits    {}", self.clause_bits())
    }
}

/// One signed literal over packed variable bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: u64,
    pub positive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub lits: [Lit; 3],
}

impl Clause {
    pub fn canonical(mut self) -> Clause {
        self.lits.sort();
        self
    }
}

pub struct Assembler {
    pub params: Params,
    pub spec: MachineSpec,
    pub x: Bits,
    pub x_pad: Bits,
    pub checkers: Vec<CheckerCircuit>,
}

pub fn assemble(spec: &MachineSpec, x: &Bits, t_bound: u64, r: usize) -> Result<Assembler, AssembleError> {
    let n = x.len();
    spec.validate()?;
    spec.verify_input_scan(n)?;
    let params = Params::new(spec, n, t_bound, r)?;
    let mut x_pad = x.clone();
    while x_pad.len() < params.n_pad {
        x_pad.push(false);
    }
    let mut checkers = vec![build_time_checker(spec, n, &params.cfg)];
    for t in 0..spec.tape_count {
        checkers.push(build_tape_checker(spec, n, &params.cfg, t));
    }
    Ok(Assembler {
        params,
        spec: spec.clone(),
        x: x.clone(),
        x_pad,
        checkers,
    })
}

impl Assembler {
    fn checker_loc(&self, label: &Bits) -> (u64, u64, GateLoc) {
        let p = &self.params;
        let i = label.read_u64(2 + p.a_i()..2 + p.a_i() + p.t_log);
        let j = label.read_u64(2 + p.a_j()..2 + p.a_j() + 2);
        let loc = GateLoc {
            unit: label.read_u64(2 + p.a_unit()..2 + p.a_unit() + 6),
            rail: label.read_u64(2 + p.a_rail()..2 + p.a_rail() + p.nb),
            path: label.read_u64(2 + p.a_path()..2 + p.a_path() + p.nb),
            sub: label.read_u64(2 + p.a_sub()..2 + p.a_sub() + 11),
        };
        (i, j, loc)
    }

    fn net_part(&self, label: &Bits) -> (u64, Bits) {
        let p = &self.params;
        let j = label.read_u64(2 + p.c_j()..2 + p.c_j() + 2);
        let net = label.slice(2 + p.c_net()..2 + p.c_net() + p.net.label_width());
        (j, net)
    }

    fn fetch_part(&self, label: &Bits) -> Option<Bits> {
        self.params
            .fetch
            .as_ref()
            .map(|f| label.slice(2..2 + f.label_width()))
    }

    /// Per-instance constant bit: bit `m` of the slot's pinned low
    /// timestamp value `(i + 1) mod 2^slotlow_bits`.
    fn slotlow_bit(&self, i: u64, m: u8) -> bool {
        let bits = self.params.slotlow_bits();
        let mask = (1u64 << bits) - 1;
        (i + 1) & mask & (1 << m) != 0
    }

    /// Total gate type of any label.
    pub fn gate_type(&self, label: &Bits) -> GateType {
        match self.params.region_of(label) {
            Region::Config => GateType::Input,
            Region::Fetch => match self.fetch_part(label) {
                None => GateType::Const0,
                Some(f) => {
                    let sh = self.params.fetch.as_ref().unwrap();
                    match sh.tag(&f) {
                        fetch::T_CHAIN => GateType::Copy,
                        fetch::T_CONST1 => GateType::Const1,
                        _ => GateType::Const0,
                    }
                }
            },
            Region::Net => {
                let (_, net) = self.net_part(label);
                routing::type_native(&self.params.net, &net)
            }
            Region::Checker => {
                let (i, j, loc) = self.checker_loc(&label.clone());
                let ck = &self.checkers[self.params.j_eff(j) as usize];
                match ck.loc_kind(&loc) {
                    LocKind::Plain(t) => t,
                    LocKind::Oracle => {
                        if self.params.fetch.is_some() {
                            GateType::XOracle
                        } else {
                            GateType::Const0
                        }
                    }
                    LocKind::SlotLowConst(m) => {
                        if self.slotlow_bit(i, m) {
                            GateType::Const1
                        } else {
                            GateType::Const0
                        }
                    }
                }
            }
        }
    }

    fn child_from_ref(&self, i: u64, j_eff: u64, r: &ChildRef) -> Bits {
        let p = &self.params;
        match r {
            ChildRef::Loc(loc) => self.params.checker_label(i, j_eff, loc),
            ChildRef::ZBit(m) => p.config_label(i, *m as u64),
            ChildRef::ZpBit(m) => {
                let out = p.net.output_label(i, *m as u64);
                p.net_label(j_eff, &out)
            }
            ChildRef::OracleOut => match &p.fetch {
                None => Bits::zeros(p.ell),
                Some(sh) => {
                    let a = i & ((1 << p.slotlow_bits()) - 1);
                    p.fetch_label(&fetch::out_label(sh, a as usize + 1))
                }
            },
            ChildRef::None => Bits::zeros(p.ell),
        }
    }

    /// Total child computation; fan-in-1 gates ignore the selector, labels
    /// without children map to the all-zero label (never followed).
    pub fn child(&self, label: &Bits, sel: bool) -> Bits {
        let p = &self.params;
        match p.region_of(label) {
            Region::Config => Bits::zeros(p.ell),
            Region::Fetch => match self.fetch_part(label) {
                None => Bits::zeros(p.ell),
                Some(f) => {
                    let sh = p.fetch.as_ref().unwrap();
                    if sh.tag(&f) == fetch::T_CHAIN {
                        p.fetch_label(&fetch::step_native(sh, &self.x_pad, &f))
                    } else {
                        Bits::zeros(p.ell)
                    }
                }
            },
            Region::Net => {
                let (j, net) = self.net_part(label);
                let sh = &p.net;
                if sh.tag(&net) == routing::TAG_INPUT {
                    // network inputs are configuration bits
                    let (row, s) = sh.input_index(&net);
                    return p.config_label(row, s);
                }
                if sh.tag(&net) != routing::TAG_SWITCH {
                    return Bits::zeros(p.ell);
                }
                p.net_label(p.j_eff(j), &routing::child_native(sh, &net, sel))
            }
            Region::Checker => {
                let (i, j, loc) = self.checker_loc(label);
                let j_eff = p.j_eff(j);
                let ck = &self.checkers[j_eff as usize];
                let (c0, c1) = ck.loc_children(&loc);
                let r = if sel { &c1 } else { &c0 };
                self.child_from_ref(i, j_eff, r)
            }
        }
    }

    /// Checker-instance output variable, the one the s = 1 clauses force.
    pub fn output_var_label(&self, i: u64, j: u64) -> Bits {
        let j_eff = self.params.j_eff(j);
        let ck = &self.checkers[j_eff as usize];
        self.params.checker_label(i, j_eff, &ck.output_loc())
    }

    pub fn var_of(&self, label: &Bits) -> u64 {
        // flag 0, then the label bits (region + payload)
        label.to_u64() << 1
    }

    pub fn dummy_var(&self) -> u64 {
        1
    }

    /// The clause named by `(g, rr, s)`, total on all indices.
    pub fn emit_clause(&self, label: &Bits, rr: u64, s: bool) -> Clause {
        let p = &self.params;
        if s {
            let (i, j, _) = self.checker_loc(label);
            let out = self.output_var_label(i, j);
            let lit = Lit { var: self.var_of(&out), positive: true };
            return Clause { lits: [lit, lit, lit] };
        }
        let g = Lit { var: self.var_of(label), positive: true };
        let ty = self.gate_type(label);
        let has_child = match (p.region_of(label), ty) {
            (_, GateType::And | GateType::Not | GateType::Copy) => true,
            (_, GateType::XOracle) => true,
            (Region::Net, GateType::Input) => {
                let (_, net) = self.net_part(label);
                p.net.tag(&net) == routing::TAG_INPUT
            }
            _ => false,
        };
        let c0 = || Lit { var: self.var_of(&self.child(label, false)), positive: true };
        let c1 = || Lit { var: self.var_of(&self.child(label, true)), positive: true };
        let neg = |l: Lit| Lit { var: l.var, positive: !l.positive };
        match ty {
            GateType::And => {
                let (a, b) = (c0(), c1());
                let lits = match rr & 3 {
                    0 => [a, b, neg(g)],
                    1 => [a, neg(b), neg(g)],
                    2 => [neg(a), b, neg(g)],
                    _ => [neg(a), neg(b), g],
                };
                Clause { lits }
            }
            GateType::Not => {
                let a = c0();
                let lits = if rr & 3 == 0 { [g, a, a] } else { [neg(g), neg(a), neg(a)] };
                Clause { lits }
            }
            GateType::Copy | GateType::XOracle => {
                let a = c0();
                let lits = if rr & 3 == 0 { [neg(g), a, a] } else { [g, neg(a), neg(a)] };
                Clause { lits }
            }
            GateType::Input if has_child => {
                let a = c0();
                let lits = if rr & 3 == 0 { [neg(g), a, a] } else { [g, neg(a), neg(a)] };
                Clause { lits }
            }
            GateType::Input => {
                let d = Lit { var: self.dummy_var(), positive: true };
                Clause { lits: [d, d, d] }
            }
            GateType::Const0 => Clause { lits: [neg(g), neg(g), neg(g)] },
            GateType::Const1 => Clause { lits: [g, g, g] },
        }
    }
}

// ---------------------------------------------------------------------------
// the assembled local map
// ---------------------------------------------------------------------------

use crate::localmap::MappedPos;

type Te = Rc<TreeExpr>;

/// Expression form of one variable identifier: flag, region code, payload.
#[derive(Clone)]
struct VarExpr {
    flag: Te,
    region: [Te; 2],
    payload: Vec<Te>,
}

impl VarExpr {
    fn constant_region(code: u64, payload_width: usize) -> VarExpr {
        VarExpr {
            flag: TreeExpr::leaf(false),
            region: [
                TreeExpr::leaf(code & 1 == 1),
                TreeExpr::leaf(code >> 1 & 1 == 1),
            ],
            payload: vec![TreeExpr::leaf(false); payload_width],
        }
    }

    fn dummy(payload_width: usize) -> VarExpr {
        let mut v = VarExpr::constant_region(0, payload_width);
        v.flag = TreeExpr::leaf(true);
        v
    }

    fn bit(&self, p: usize) -> Te {
        match p {
            0 => self.flag.clone(),
            1 => self.region[0].clone(),
            2 => self.region[1].clone(),
            _ => self.payload[p - 3].clone(),
        }
    }
}

/// One clause as expressions: three variables and three signs.
#[derive(Clone)]
struct ClauseExpr {
    vars: [VarExpr; 3],
    signs: [Te; 3],
}

impl ClauseExpr {
    fn bit(&self, o: usize, v: usize) -> Te {
        let lit = o / (v + 1);
        let p = o % (v + 1);
        if p == v {
            self.signs[lit].clone()
        } else {
            self.vars[lit].bit(p)
        }
    }
}

fn pos_t() -> Rc<TreeExpr> {
    TreeExpr::leaf(true)
}
fn pos_f() -> Rc<TreeExpr> {
    TreeExpr::leaf(false)
}

/// The four textbook gadgets plus constants, as rr-tables of clause
/// expressions. `g`, `a`, `b` are variable expressions.
fn gadget_clauses(
    ty: GateType,
    g: &VarExpr,
    a: Option<&VarExpr>,
    b: Option<&VarExpr>,
    payload_width: usize,
) -> Vec<ClauseExpr> {
    let dummy = VarExpr::dummy(payload_width);
    match ty {
        GateType::And => {
            let (a, b) = (a.unwrap(), b.unwrap());
            vec![
                ClauseExpr { vars: [a.clone(), b.clone(), g.clone()], signs: [pos_t(), pos_t(), pos_f()] },
                ClauseExpr { vars: [a.clone(), b.clone(), g.clone()], signs: [pos_t(), pos_f(), pos_f()] },
                ClauseExpr { vars: [a.clone(), b.clone(), g.clone()], signs: [pos_f(), pos_t(), pos_f()] },
                ClauseExpr { vars: [a.clone(), b.clone(), g.clone()], signs: [pos_f(), pos_f(), pos_t()] },
            ]
        }
        GateType::Not => {
            let a = a.unwrap();
            let c0 = ClauseExpr { vars: [g.clone(), a.clone(), a.clone()], signs: [pos_t(), pos_t(), pos_t()] };
            let c1 = ClauseExpr { vars: [g.clone(), a.clone(), a.clone()], signs: [pos_f(), pos_f(), pos_f()] };
            vec![c0, c1.clone(), c1.clone(), c1]
        }
        GateType::Copy | GateType::XOracle => {
            let a = a.unwrap();
            let c0 = ClauseExpr { vars: [g.clone(), a.clone(), a.clone()], signs: [pos_f(), pos_t(), pos_t()] };
            let c1 = ClauseExpr { vars: [g.clone(), a.clone(), a.clone()], signs: [pos_t(), pos_f(), pos_f()] };
            vec![c0, c1.clone(), c1.clone(), c1]
        }
        GateType::Const0 => {
            let c = ClauseExpr { vars: [g.clone(), g.clone(), g.clone()], signs: [pos_f(), pos_f(), pos_f()] };
            vec![c.clone(), c.clone(), c.clone(), c]
        }
        GateType::Const1 => {
            let c = ClauseExpr { vars: [g.clone(), g.clone(), g.clone()], signs: [pos_t(), pos_t(), pos_t()] };
            vec![c.clone(), c.clone(), c.clone(), c]
        }
        GateType::Input => {
            let c = ClauseExpr { vars: [dummy.clone(), dummy.clone(), dummy.clone()], signs: [pos_t(), pos_t(), pos_t()] };
            vec![c.clone(), c.clone(), c.clone(), c]
        }
    }
}

impl Assembler {
    /// Positions of the input fields of `D`.
    fn g_pos(&self, payload_off: usize) -> usize {
        2 + payload_off
    }
    fn rr_pos(&self) -> [usize; 2] {
        [self.params.ell, self.params.ell + 1]
    }
    fn s_pos(&self) -> usize {
        self.params.ell + 2
    }

    /// The gate's own variable: copies of the label bits.
    fn var_self(&self) -> VarExpr {
        VarExpr {
            flag: pos_f(),
            region: [TreeExpr::pos(0), TreeExpr::pos(1)],
            payload: (0..self.params.payload).map(|q| TreeExpr::pos(2 + q)).collect(),
        }
    }

    /// Copies of the checker instance fields into a new checker label.
    fn checker_var(&self, loc_bits: &[(usize, Te)]) -> VarExpr {
        let p = &self.params;
        let mut payload: Vec<Te> = vec![pos_f(); p.payload];
        for q in 0..p.t_log {
            payload[p.a_i() + q] = TreeExpr::pos(self.g_pos(p.a_i() + q));
        }
        for q in 0..2 {
            payload[p.a_j() + q] = self.j_eff_bit_expr(q);
        }
        for (off, e) in loc_bits {
            payload[*off] = e.clone();
        }
        VarExpr {
            flag: pos_f(),
            region: [pos_f(), pos_f()],
            payload,
        }
    }

    /// Bit `q` of `j mod families`, as an expression over a j field at the
    /// given input positions.
    fn j_eff_bit_expr_at(&self, jpos: [usize; 2], q: usize) -> Te {
        let p = &self.params;
        let entries = (0..4u64)
            .map(|j| TreeExpr::leaf(p.j_eff(j) >> q & 1 == 1))
            .collect();
        TreeExpr::table(vec![jpos[0], jpos[1]], entries)
    }

    /// Same, over the checker label's j field.
    fn j_eff_bit_expr(&self, q: usize) -> Te {
        let p = &self.params;
        self.j_eff_bit_expr_at([self.g_pos(p.a_j()), self.g_pos(p.a_j() + 1)], q)
    }

    /// Variable of this instance's fetch entry gate: the out-gate label
    /// built from the low instance bits.
    fn fetch_out_var_from_checker(&self) -> VarExpr {
        let p = &self.params;
        let mut payload: Vec<Te> = vec![pos_f(); p.payload];
        if let Some(sh) = &p.fetch {
            let map = fetch::out_label_map(sh);
            let lgn = p.slotlow_bits();
            for q in 0..sh.label_width() {
                payload[q] = TreeExpr::from_tree_mapped(map.tree(q), &|a| {
                    if a < lgn {
                        MappedPos::Input(self.g_pos(p.a_i() + a))
                    } else {
                        MappedPos::Fixed(false)
                    }
                });
            }
        }
        VarExpr {
            flag: pos_f(),
            region: [TreeExpr::leaf(true), pos_f()],
            payload,
        }
    }

    /// Bit `m` of `(i + 1) mod 2^slotlow_bits` as an expression over the
    /// low instance bits.
    fn slotlow_expr(&self, m: u8) -> Te {
        let p = &self.params;
        let bits = p.slotlow_bits();
        let positions: Vec<usize> = (0..=m as usize).map(|q| self.g_pos(p.a_i() + q)).collect();
        let entries = (0..1u64 << positions.len())
            .map(|v| TreeExpr::leaf((v + 1) & ((1 << bits) - 1) & (1 << m) != 0))
            .collect();
        TreeExpr::table(positions, entries)
    }

    /// Variable of a configuration bit whose position is given bitwise.
    fn config_var_bits(&self, m_bits: Vec<Te>) -> VarExpr {
        let p = &self.params;
        let mut payload: Vec<Te> = vec![pos_f(); p.payload];
        for q in 0..p.t_log {
            payload[p.d_i() + q] = TreeExpr::pos(self.g_pos(p.a_i() + q));
        }
        for (q, e) in m_bits.into_iter().enumerate() {
            payload[p.d_m() + q] = e;
        }
        VarExpr {
            flag: pos_f(),
            region: [TreeExpr::leaf(true), TreeExpr::leaf(true)],
            payload,
        }
    }

    fn net_out_var_bits(&self, s_bits: Vec<Te>) -> VarExpr {
        let p = &self.params;
        let sh = &p.net;
        let mut payload: Vec<Te> = vec![pos_f(); p.payload];
        for q in 0..2 {
            payload[p.c_j() + q] = self.j_eff_bit_expr(q);
        }
        let base = p.c_net();
        for q in 0..p.t_log {
            payload[base + sh.w_off() + q] = TreeExpr::pos(self.g_pos(p.a_i() + q));
        }
        for (q, e) in s_bits.into_iter().enumerate() {
            payload[base + sh.s_off() + q] = e;
        }
        VarExpr {
            flag: pos_f(),
            region: [pos_f(), TreeExpr::leaf(true)],
            payload,
        }
    }

    fn checker_gate_var(&self, unit: u64, sub: u64, rail_path_copy: bool) -> VarExpr {
        let p = &self.params;
        let mut bits: Vec<(usize, Te)> = vec![];
        for q in 0..6 {
            bits.push((p.a_unit() + q, TreeExpr::leaf(unit >> q & 1 == 1)));
        }
        for q in 0..11 {
            bits.push((p.a_sub() + q, TreeExpr::leaf(sub >> q & 1 == 1)));
        }
        for q in 0..p.nb {
            let (r, pa) = if rail_path_copy {
                (
                    TreeExpr::pos(self.g_pos(p.a_rail() + q)),
                    TreeExpr::pos(self.g_pos(p.a_path() + q)),
                )
            } else {
                (pos_f(), pos_f())
            };
            bits.push((p.a_rail() + q, r));
            bits.push((p.a_path() + q, pa));
        }
        self.checker_var(&bits)
    }

    /// Variable reached through a tree-gate reference.
    fn tree_ref_var(
        &self,
        unit_idx: u64,
        u: &crate::checkers::UnitSpec,
        r: &crate::checkers::TreeRef,
    ) -> VarExpr {
        use crate::checkers::{Side, TreeRef};
        let p = &self.params;
        let nb = p.nb;
        match r {
            TreeRef::Here(s) => self.checker_gate_var(unit_idx, *s as u64, true),
            TreeRef::Left(s) | TreeRef::Right(s) => {
                let c = matches!(r, TreeRef::Right(_));
                let mut bits: Vec<(usize, Te)> = vec![];
                for q in 0..6 {
                    bits.push((p.a_unit() + q, TreeExpr::leaf(unit_idx >> q & 1 == 1)));
                }
                for q in 0..11 {
                    bits.push((p.a_sub() + q, TreeExpr::leaf(*s as u64 >> q & 1 == 1)));
                }
                for q in 0..nb {
                    let e = if q == 0 {
                        TreeExpr::leaf(true)
                    } else {
                        TreeExpr::pos(self.g_pos(p.a_rail() + q - 1))
                    };
                    bits.push((p.a_rail() + q, e));
                }
                // path bit q takes the branch side at the current depth:
                // set iff rail bit (nb-1-q) is clear and its predecessor set
                for q in 0..nb {
                    let w = nb - 1 - q;
                    let here = self.g_pos(p.a_rail() + w);
                    let copy = TreeExpr::pos(self.g_pos(p.a_path() + q));
                    let e = if w == 0 {
                        TreeExpr::query(here, TreeExpr::leaf(c), copy)
                    } else {
                        let prev = self.g_pos(p.a_rail() + w - 1);
                        let when_clear = TreeExpr::query(prev, copy.clone(), TreeExpr::leaf(c));
                        TreeExpr::query(here, when_clear, copy)
                    };
                    bits.push((p.a_path() + q, e));
                }
                self.checker_var(&bits)
            }
            TreeRef::LeafA | TreeRef::LeafB => {
                let fr = if matches!(r, TreeRef::LeafA) { u.a } else { u.b };
                debug_assert_eq!(fr.off % p.cfg.f, 0);
                let mbits = p.d_m_bits().max(p.net.s_bits());
                let mut m: Vec<Te> = Vec::new();
                for q in 0..mbits {
                    if q < nb {
                        m.push(TreeExpr::pos(self.g_pos(p.a_path() + q)));
                    } else {
                        m.push(TreeExpr::leaf(fr.off as u64 >> q & 1 == 1));
                    }
                }
                match fr.side {
                    Side::Z => {
                        m.truncate(p.d_m_bits());
                        self.config_var_bits(m)
                    }
                    Side::Zp => {
                        m.truncate(p.net.s_bits());
                        self.net_out_var_bits(m)
                    }
                }
            }
        }
    }

    /// Clause tables for one explicit-block gate.
    fn e_gate_clauses(&self, gate: &crate::checkers::EGate) -> Vec<ClauseExpr> {
        use crate::checkers::EGate;
        let p = &self.params;
        let g = self.var_self();
        match gate {
            EGate::Const(b) => gadget_clauses(
                if *b { GateType::Const1 } else { GateType::Const0 },
                &g,
                None,
                None,
                p.payload,
            ),
            EGate::ZBit(m) => {
                let mbits = (0..p.d_m_bits())
                    .map(|q| TreeExpr::leaf(*m as u64 >> q & 1 == 1))
                    .collect();
                let a = self.config_var_bits(mbits);
                gadget_clauses(GateType::Copy, &g, Some(&a), None, p.payload)
            }
            EGate::ZpBit(m) => {
                let sbits = (0..p.net.s_bits())
                    .map(|q| TreeExpr::leaf(*m as u64 >> q & 1 == 1))
                    .collect();
                let a = self.net_out_var_bits(sbits);
                gadget_clauses(GateType::Copy, &g, Some(&a), None, p.payload)
            }
            EGate::UnitOut(u, out) => {
                let a = self.checker_gate_var(*u as u64, *out as u64, false);
                gadget_clauses(GateType::Copy, &g, Some(&a), None, p.payload)
            }
            EGate::SlotLow(m) => {
                let sign = self.slotlow_expr(*m);
                let c = ClauseExpr {
                    vars: [g.clone(), g.clone(), g.clone()],
                    signs: [sign.clone(), sign.clone(), sign],
                };
                vec![c.clone(), c.clone(), c.clone(), c]
            }
            EGate::OracleBit => {
                if p.fetch.is_none() {
                    gadget_clauses(GateType::Const0, &g, None, None, p.payload)
                } else {
                    let a = self.fetch_out_var_from_checker();
                    gadget_clauses(GateType::XOracle, &g, Some(&a), None, p.payload)
                }
            }
            EGate::Not(a) => {
                let av = self.checker_gate_var(E_UNIT, *a as u64, false);
                gadget_clauses(GateType::Not, &g, Some(&av), None, p.payload)
            }
            EGate::And(a, b) => {
                let av = self.checker_gate_var(E_UNIT, *a as u64, false);
                let bv = self.checker_gate_var(E_UNIT, *b as u64, false);
                gadget_clauses(GateType::And, &g, Some(&av), Some(&bv), p.payload)
            }
        }
    }
}

impl Assembler {
    /// The assembled clause map `D` as a decision-tree forest. Built once
    /// per call; callers cache it.
    pub fn clause_map(&self) -> LocalMap {
        let p = &self.params;
        let v = p.v;
        let in_w = p.ell + 3;
        let rr = self.rr_pos();

        // --- region a: per (j, unit) tables of per-gate clause tables
        let mut a_entries: Vec<Vec<AGateEntry>> = Vec::new();
        for j in 0..p.families as u64 {
            let ck = &self.checkers[j as usize];
            let mut units: Vec<AGateEntry> = Vec::new();
            for u in &ck.units {
                let internal: Vec<Vec<ClauseExpr>> = crate::checkers::internal_gates(u.kind)
                    .iter()
                    .map(|(ty, c0, c1)| {
                        let a = self.tree_ref_var(units.len() as u64, u, c0);
                        let b = self.tree_ref_var(units.len() as u64, u, c1);
                        gadget_clauses(*ty, &self.var_self(), Some(&a), Some(&b), p.payload)
                    })
                    .collect();
                let leaf: Vec<Vec<ClauseExpr>> = crate::checkers::leaf_gates(u.kind)
                    .iter()
                    .map(|(ty, c0, c1)| {
                        let a = self.tree_ref_var(units.len() as u64, u, c0);
                        let b = self.tree_ref_var(units.len() as u64, u, c1);
                        gadget_clauses(*ty, &self.var_self(), Some(&a), Some(&b), p.payload)
                    })
                    .collect();
                units.push(AGateEntry::Tree { internal, leaf });
            }
            let egates: Vec<Vec<ClauseExpr>> = ck
                .eblock
                .gates
                .iter()
                .map(|g| self.e_gate_clauses(g))
                .collect();
            units.push(AGateEntry::Explicit(egates));
            a_entries.push(units);
        }
        let const0_clauses = gadget_clauses(GateType::Const0, &self.var_self(), None, None, p.payload);

        // --- region b: the chain gadget over the step map
        let fetch_maps = p.fetch.as_ref().map(|sh| {
            (crate::fetch::step_map(sh, &self.x_pad), sh.label_width())
        });
        let b_chain = fetch_maps.as_ref().map(|(m, w)| {
            let mut payload: Vec<Te> = vec![pos_f(); p.payload];
            for q in 0..*w {
                payload[q] = TreeExpr::from_tree(m.tree(q), &|pq| 2 + pq);
            }
            let a = VarExpr {
                flag: pos_f(),
                region: [TreeExpr::leaf(true), pos_f()],
                payload,
            };
            gadget_clauses(GateType::Copy, &self.var_self(), Some(&a), None, p.payload)
        });
        let const1_clauses = gadget_clauses(GateType::Const1, &self.var_self(), None, None, p.payload);

        // --- region c: switch, input, control and constant entries
        let net_children = routing::children_map(&p.net);
        let netw = p.net.label_width();
        let net_base = 2 + p.c_net();
        let net_child_var = |sel: bool| -> VarExpr {
            let mut payload: Vec<Te> = vec![pos_f(); p.payload];
            for q in 0..2 {
                payload[p.c_j() + q] =
                    self.j_eff_bit_expr_at([2 + p.c_j(), 2 + p.c_j() + 1], q);
            }
            for q in 0..netw {
                payload[p.c_net() + q] =
                    TreeExpr::from_tree_mapped(net_children.tree(q), &|pq| {
                        if pq == netw {
                            MappedPos::Fixed(sel)
                        } else {
                            MappedPos::Input(net_base + pq)
                        }
                    });
            }
            VarExpr {
                flag: pos_f(),
                region: [pos_f(), TreeExpr::leaf(true)],
                payload,
            }
        };
        let nc0 = net_child_var(false);
        let nc1 = net_child_var(true);
        // per-d gadget tables for switch gates away from the input column
        let sh = &p.net;
        let d_pos: Vec<usize> = (0..4).map(|q| net_base + sh.d_off() + q).collect();
        let switch_tables: Vec<Vec<ClauseExpr>> = (0..16u64)
            .map(|d| {
                gadget_clauses(
                    crate::routing::gadget::gate_type(d),
                    &self.var_self(),
                    Some(&nc0),
                    Some(&nc1),
                    p.payload,
                )
            })
            .collect();
        // at the input column every switch gate forwards its child
        let input_col_clauses =
            gadget_clauses(GateType::Copy, &self.var_self(), Some(&nc0), None, p.payload);
        // first-input gates equal their configuration bit
        let net_input_clauses = {
            let mut payload: Vec<Te> = vec![pos_f(); p.payload];
            for q in 0..p.t_log {
                payload[p.d_i() + q] = TreeExpr::pos(net_base + sh.w_off() + q);
            }
            for q in 0..p.d_m_bits() {
                payload[p.d_m() + q] = TreeExpr::pos(net_base + sh.s_off() + q);
            }
            let a = VarExpr {
                flag: pos_f(),
                region: [TreeExpr::leaf(true), TreeExpr::leaf(true)],
                payload,
            };
            gadget_clauses(GateType::Copy, &self.var_self(), Some(&a), None, p.payload)
        };
        let dummy_clauses = gadget_clauses(GateType::Input, &self.var_self(), None, None, p.payload);

        // --- the s = 1 literal: the instance's forced output variable
        let s1_clause = {
            let mut payload: Vec<Te> = vec![pos_f(); p.payload];
            for q in 0..p.t_log {
                payload[p.a_i() + q] = TreeExpr::pos(self.g_pos(p.a_i() + q));
            }
            for q in 0..2 {
                payload[p.a_j() + q] = self.j_eff_bit_expr(q);
            }
            for q in 0..6 {
                payload[p.a_unit() + q] = TreeExpr::leaf(E_UNIT >> q & 1 == 1);
            }
            let jpos = [self.g_pos(p.a_j()), self.g_pos(p.a_j() + 1)];
            for q in 0..11 {
                let entries = (0..4u64)
                    .map(|j| {
                        let out = self.checkers[p.j_eff(j) as usize].output.0 as u64;
                        TreeExpr::leaf(out >> q & 1 == 1)
                    })
                    .collect();
                payload[p.a_sub() + q] = TreeExpr::table(vec![jpos[0], jpos[1]], entries);
            }
            let var = VarExpr {
                flag: pos_f(),
                region: [pos_f(), pos_f()],
                payload,
            };
            ClauseExpr {
                vars: [var.clone(), var.clone(), var],
                signs: [pos_t(), pos_t(), pos_t()],
            }
        };

        // --- assemble every output bit
        let rr_table = |cls: &Vec<ClauseExpr>, o: usize| -> Te {
            let entries = (0..4).map(|k| cls[k].bit(o, v)).collect();
            TreeExpr::table(vec![rr[0], rr[1]], entries)
        };
        let mut trees = Vec::with_capacity(3 * v + 3);
        for o in 0..3 * (v + 1) {
            // region a
            let a_expr = {
                // entry index is j + 4 * unit, low positions first
                let mut entries: Vec<Te> = Vec::with_capacity(256);
                for unit in 0..64u64 {
                    for j in 0..4u64 {
                        let ck_units = &a_entries[p.j_eff(j) as usize];
                        let e: Te = if unit == E_UNIT {
                            match ck_units.last().unwrap() {
                                AGateEntry::Explicit(gates) => {
                                    let mut subs: Vec<Te> = gates
                                        .iter()
                                        .map(|cls| rr_table(cls, o))
                                        .collect();
                                    subs.push(rr_table(&const0_clauses, o));
                                    TreeExpr::table(
                                        (0..11).map(|q| self.g_pos(p.a_sub() + q)).collect(),
                                        subs,
                                    )
                                }
                                _ => unreachable!(),
                            }
                        } else if (unit as usize) < ck_units.len() - 1 {
                            match &ck_units[unit as usize] {
                                AGateEntry::Tree { internal, leaf } => {
                                    let mk = |tbl: &Vec<Vec<ClauseExpr>>| -> Te {
                                        let mut subs: Vec<Te> =
                                            tbl.iter().map(|cls| rr_table(cls, o)).collect();
                                        subs.push(rr_table(&const0_clauses, o));
                                        TreeExpr::table(
                                            (0..11).map(|q| self.g_pos(p.a_sub() + q)).collect(),
                                            subs,
                                        )
                                    };
                                    let rail_top = self.g_pos(p.a_rail() + p.nb - 1);
                                    TreeExpr::query(rail_top, mk(internal), mk(leaf))
                                }
                                _ => unreachable!(),
                            }
                        } else {
                            rr_table(&const0_clauses, o)
                        };
                        entries.push(e);
                    }
                }
                let mut positions: Vec<usize> = (0..2).map(|q| self.g_pos(p.a_j() + q)).collect();
                positions.extend((0..6).map(|q| self.g_pos(p.a_unit() + q)));
                TreeExpr::table(positions, entries)
            };
            // region b; with no input there is no fetch circuit and the
            // whole region is constant-0
            let b_expr = match &b_chain {
                Some(c) => TreeExpr::table(
                    vec![2, 3],
                    vec![
                        rr_table(c, o),
                        rr_table(&const0_clauses, o),
                        rr_table(&const1_clauses, o),
                        rr_table(&const0_clauses, o),
                    ],
                ),
                None => rr_table(&const0_clauses, o),
            };
            // region c
            let c_expr = {
                let final_pos = net_base + sh.i_off() + 2 * sh.counter_pairs() - 1;
                let switch = {
                    let away: Vec<Te> = switch_tables.iter().map(|cls| rr_table(cls, o)).collect();
                    let away = TreeExpr::table(d_pos.clone(), away);
                    let at_input = rr_table(&input_col_clauses, o);
                    TreeExpr::query(final_pos, away, at_input)
                };
                TreeExpr::table(
                    vec![net_base, net_base + 1],
                    vec![
                        switch,
                        rr_table(&net_input_clauses, o),
                        rr_table(&dummy_clauses, o),
                        rr_table(&const0_clauses, o),
                    ],
                )
            };
            // region d
            let d_expr = rr_table(&dummy_clauses, o);
            let s0 = TreeExpr::table(vec![0, 1], vec![a_expr, b_expr, c_expr, d_expr]);
            let expr = TreeExpr::query(self.s_pos(), s0, s1_clause.bit(o, v));
            trees.push(expr.compile(in_w));
        }
        LocalMap::new(in_w, trees)
    }

    /// Packs a clause the way the map emits it, for comparisons.
    pub fn clause_bits(&self, c: &Clause) -> Bits {
        let v = self.params.v;
        let mut b = Bits::zeros(3 * (v + 1));
        for (k, lit) in c.lits.iter().enumerate() {
            b.write_u64(k * (v + 1)..k * (v + 1) + v, lit.var);
            b.set(k * (v + 1) + v, lit.positive);
        }
        b
    }
}

enum AGateEntry {
    Tree {
        internal: Vec<Vec<ClauseExpr>>,
        leaf: Vec<Vec<ClauseExpr>>,
    },
    Explicit(Vec<Vec<ClauseExpr>>),
}

// ---------------------------------------------------------------------------
// core enumeration: the clauses reachable from the forced checker outputs
// ---------------------------------------------------------------------------

/// The exported slice of the formula: every clause constraining a gate
/// reachable from the forced checker outputs. Unreached labels only carry
/// functional constraints on variables nothing else mentions, so this slice
/// is satisfiable exactly when the full index space is.
pub struct CoreExport {
    pub clauses: Vec<Clause>,
    pub gate_count: u64,
    pub distinct_nondummy: u64,
}

impl Assembler {
    fn label_key(&self, label: &Bits) -> u64 {
        label.to_u64()
    }

    fn label_from_key(&self, key: u64) -> Bits {
        Bits::from_u64(key, self.params.ell)
    }

    /// Children the evaluator follows, by arity.
    pub fn followed_children(&self, label: &Bits) -> Vec<Bits> {
        let ty = self.gate_type(label);
        match ty {
            GateType::And => vec![self.child(label, false), self.child(label, true)],
            GateType::Not | GateType::Copy | GateType::XOracle => vec![self.child(label, false)],
            GateType::Input => {
                if self.params.region_of(label) == Region::Net {
                    let (_, net) = self.net_part(label);
                    if self.params.net.tag(&net) == routing::TAG_INPUT {
                        return vec![self.child(label, false)];
                    }
                }
                vec![]
            }
            _ => vec![],
        }
    }

    pub fn export_core(&self) -> CoreExport {
        let p = &self.params;
        let mut seen: std::collections::HashSet<u64> = std::collections::HashSet::new();
        let mut clauses: std::collections::HashSet<Clause> = std::collections::HashSet::new();
        let mut order: Vec<Clause> = Vec::new();
        let push = |c: Clause, clauses: &mut std::collections::HashSet<Clause>, order: &mut Vec<Clause>| {
            let canon = c.canonical();
            if clauses.insert(canon) {
                order.push(canon);
            }
        };
        let mut queue: Vec<u64> = Vec::new();
        for i in 0..p.t_prime {
            for j in 0..p.families as u64 {
                let out = self.output_var_label(i, j);
                let lit = Lit { var: self.var_of(&out), positive: true };
                push(Clause { lits: [lit, lit, lit] }, &mut clauses, &mut order);
                let key = self.label_key(&out);
                if seen.insert(key) {
                    queue.push(key);
                }
            }
        }
        let mut gate_count = 0u64;
        while let Some(key) = queue.pop() {
            gate_count += 1;
            let label = self.label_from_key(key);
            for rr in 0..4 {
                push(self.emit_clause(&label, rr, false), &mut clauses, &mut order);
            }
            for ch in self.followed_children(&label) {
                let k = self.label_key(&ch);
                if seen.insert(k) {
                    queue.push(k);
                }
            }
        }
        let dummy = self.dummy_var();
        let distinct_nondummy = order
            .iter()
            .filter(|c| !c.lits.iter().all(|l| l.var == dummy))
            .count() as u64;
        CoreExport {
            clauses: order,
            gate_count,
            distinct_nondummy,
        }
    }

    /// Evaluates every reachable gate under an honest bundle, producing a
    /// satisfying assignment for the exported formula.
    pub fn honest_assignment(
        &self,
        bundle: &crate::checkers::WitnessBundle,
    ) -> HashMap<u64, bool> {
        let p = &self.params;
        // counter value -> layer, for control-bit lookup
        let mut layer_of: HashMap<Bits, u64> = HashMap::new();
        for l in 0..p.net.columns() {
            layer_of.insert(p.net.counter_at_layer(l).bits().clone(), l);
        }
        let mut vals: HashMap<u64, bool> = HashMap::new();
        vals.insert(self.dummy_var(), true);
        let mut stack: Vec<(u64, bool)> = Vec::new();
        for i in 0..p.t_prime {
            for j in 0..p.families as u64 {
                stack.push((self.label_key(&self.output_var_label(i, j)), false));
            }
        }
        while let Some((key, expanded)) = stack.pop() {
            let var = key << 1;
            if vals.contains_key(&var) {
                continue;
            }
            let label = self.label_from_key(key);
            let ty = self.gate_type(&label);
            let children = self.followed_children(&label);
            if !expanded && !children.is_empty() {
                stack.push((key, true));
                for ch in &children {
                    let cv = self.label_key(ch) << 1;
                    if !vals.contains_key(&cv) {
                        stack.push((self.label_key(ch), false));
                    }
                }
                continue;
            }
            let value = match ty {
                GateType::Const0 => false,
                GateType::Const1 => true,
                GateType::And => {
                    children.iter().all(|ch| vals[&(self.label_key(ch) << 1)])
                }
                GateType::Not => !vals[&(self.label_key(&children[0]) << 1)],
                GateType::Copy | GateType::XOracle => {
                    vals[&(self.label_key(&children[0]) << 1)]
                }
                GateType::Input => {
                    if !children.is_empty() {
                        vals[&(self.label_key(&children[0]) << 1)]
                    } else {
                        match p.region_of(&label) {
                            Region::Config => {
                                let i = label.read_u64(2 + p.d_i()..2 + p.d_i() + p.t_log);
                                let m = label.read_u64(2 + p.d_m()..2 + p.d_m() + p.d_m_bits());
                                (m as usize) < p.cfg.width()
                                    && bundle.configs[i as usize].get(m as usize)
                            }
                            Region::Net => {
                                let (j, net) = self.net_part(&label);
                                let sh = &p.net;
                                if sh.tag(&net) == routing::TAG_CONTROL {
                                    let ctr = net.slice(
                                        sh.i_off()..sh.i_off() + 2 * sh.counter_pairs(),
                                    );
                                    match layer_of.get(&ctr) {
                                        Some(&l) if l > 0 => bundle.settings
                                            [p.j_eff(j) as usize]
                                            .get(l, sh.row(&net)),
                                        _ => false,
                                    }
                                } else {
                                    false
                                }
                            }
                            _ => false,
                        }
                    }
                }
            };
            vals.insert(var, value);
        }
        vals
    }

    /// Finds a clause the assignment violates, if any.
    pub fn violated_clause(
        clauses: &[Clause],
        assign: &HashMap<u64, bool>,
    ) -> Option<Clause> {
        clauses
            .iter()
            .find(|c| {
                !c.lits
                    .iter()
                    .any(|l| assign.get(&l.var).copied().unwrap_or(false) == l.positive)
            })
            .copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::prove;
    use crate::fixtures::*;
    use crate::machine::witness_exists;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eq_asm() -> Assembler {
        assemble(&eq_machine(), &Bits::from_str01("1"), 2, 1).unwrap()
    }

    #[test]
    fn params_report_widths() {
        let spec = eq_machine();
        let p8 = Params::new(&spec, 8, 1 << 8, 1).unwrap();
        let p9 = Params::new(&spec, 8, 1 << 9, 1).unwrap();
        // the log T term of the checker region grows by exactly one bit
        let a_width = |p: &Params| p.t_log + 8 + 2 * p.nb + 11;
        assert_eq!(a_width(&p9), a_width(&p8) + 1);
        assert_eq!(p9.t_log, p8.t_log + 1);
        // r = n collapses the marker segment to one bit
        let pn = Params::new(&spec, 8, 1 << 8, 8).unwrap();
        assert_eq!(pn.fetch.as_ref().unwrap().seg, 1);
        // widths are stable across rebuilds
        let again = Params::new(&spec, 8, 1 << 8, 1).unwrap();
        assert_eq!(again.ell, p8.ell);
    }

    #[test]
    fn emitted_gadgets_match_the_textbook_shapes() {
        let asm = eq_asm();
        let p = &asm.params;
        // an And gate inside a checker: find one in the explicit block
        let ck = &asm.checkers[0];
        let and_sub = ck
            .eblock
            .gates
            .iter()
            .position(|g| matches!(g, crate::checkers::EGate::And(..)))
            .unwrap() as u64;
        let label = p.checker_label(1, 0, &crate::checkers::GateLoc::e(and_sub));
        assert_eq!(asm.gate_type(&label), GateType::And);
        let a = asm.child(&label, false);
        let b = asm.child(&label, true);
        let g = asm.var_of(&label);
        let c = asm.emit_clause(&label, 0, false);
        assert_eq!(
            c.lits,
            [
                Lit { var: asm.var_of(&a), positive: true },
                Lit { var: asm.var_of(&b), positive: true },
                Lit { var: g, positive: false },
            ]
        );
        let c3 = asm.emit_clause(&label, 3, false);
        assert_eq!(c3.lits[2], Lit { var: g, positive: true });
        // a constant-1 gate: the fetch circuit's one gate
        let g1 = p.fetch_label(&p.fetch.as_ref().unwrap().g_const(true));
        assert_eq!(asm.gate_type(&g1), GateType::Const1);
        for rr in 0..4 {
            let c = asm.emit_clause(&g1, rr, false);
            assert!(c.lits.iter().all(|l| l.positive && l.var == asm.var_of(&g1)));
        }
        // any label with s = 1 forces the instance's output variable
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut label = Bits::zeros(p.ell);
            for q in 0..p.ell {
                label.set(q, rng.gen());
            }
            let c = asm.emit_clause(&label, rng.gen_range(0..4), true);
            let (i, j, _) = asm.checker_loc(&label);
            let want = asm.var_of(&asm.output_var_label(i, j));
            assert!(c.lits.iter().all(|l| l.positive && l.var == want));
        }
    }

    #[test]
    fn config_labels_are_inputs_without_children() {
        let asm = eq_asm();
        let label = asm.params.config_label(2, 5);
        assert_eq!(asm.gate_type(&label), GateType::Input);
        assert!(asm.followed_children(&label).is_empty());
    }

    #[test]
    fn net_region_agrees_with_the_network_maps() {
        let asm = eq_asm();
        let p = &asm.params;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let mut net = Bits::zeros(p.net.label_width());
            for q in 0..net.len() {
                net.set(q, rng.gen());
            }
            let label = p.net_label(rng.gen_range(0..2), &net);
            let ty = asm.gate_type(&label);
            assert_eq!(ty, crate::routing::type_native(&p.net, &net));
            if p.net.tag(&net) == crate::routing::TAG_SWITCH {
                for sel in [false, true] {
                    let want = crate::routing::child_native(&p.net, &net, sel);
                    let got = asm.child(&label, sel);
                    assert_eq!(p.region_of(&got), Region::Net);
                    let (_, got_net) = asm.net_part(&got);
                    assert_eq!(got_net, want);
                }
            }
        }
        // a first-input gate resolves to its configuration bit
        let inp = p.net_label(1, &p.net.input_label(3, 7));
        assert_eq!(asm.gate_type(&inp), GateType::Input);
        let ch = asm.child(&inp, false);
        assert_eq!(ch, p.config_label(3, 7));
    }

    #[test]
    fn oracle_gates_enter_the_fetch_region() {
        let asm = eq_asm();
        let p = &asm.params;
        let ck = &asm.checkers[0];
        let orc = ck
            .eblock
            .gates
            .iter()
            .position(|g| matches!(g, crate::checkers::EGate::OracleBit))
            .expect("the scan uses an oracle gate") as u64;
        for i in 0..p.t_prime {
            let label = p.checker_label(i, 0, &crate::checkers::GateLoc::e(orc));
            assert_eq!(asm.gate_type(&label), GateType::XOracle);
            let ch = asm.child(&label, false);
            assert_eq!(p.region_of(&ch), Region::Fetch);
            let sh = p.fetch.as_ref().unwrap();
            let a = i & ((1 << p.slotlow_bits()) - 1);
            assert_eq!(
                ch,
                p.fetch_label(&crate::fetch::out_label(sh, a as usize + 1))
            );
        }
    }

    #[test]
    fn clause_map_matches_native_emission() {
        for (spec, x, t, r) in [
            (eq_machine(), Bits::from_str01("101"), 6u64, 1usize),
            (eq_machine(), Bits::from_str01("1"), 2, 1),
            (palindrome_machine(), Bits::zeros(0), 5, 1),
        ] {
            let asm = assemble(&spec, &x, t, r).unwrap();
            let p = &asm.params;
            let map = asm.clause_map();
            assert_eq!(map.input_width(), p.ell + 3);
            assert_eq!(map.output_width(), 3 * p.v + 3);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            // random indices
            for _ in 0..600 {
                let mut input = Bits::zeros(p.ell + 3);
                for q in 0..input.len() {
                    input.set(q, rng.gen());
                }
                let label = input.slice(0..p.ell);
                let rr = input.read_u64(p.ell..p.ell + 2);
                let s = input.get(p.ell + 2);
                let want = asm.clause_bits(&asm.emit_clause(&label, rr, s));
                assert_eq!(map.eval(&input), want, "on {input}");
            }
            // and the structured labels the export walks
            let core = asm.export_core();
            let mut count = 0;
            'outer: for c in core.clauses.iter().step_by(17) {
                for lit in c.lits {
                    if lit.var == asm.dummy_var() {
                        continue;
                    }
                    let label = Bits::from_u64(lit.var >> 1, p.ell);
                    for rr in 0..4 {
                        let mut input = Bits::zeros(p.ell + 3);
                        for q in 0..p.ell {
                            input.set(q, label.get(q));
                        }
                        input.write_u64(p.ell..p.ell + 2, rr);
                        let want = asm.clause_bits(&asm.emit_clause(&label, rr, false));
                        assert_eq!(map.eval(&input), want, "core label {label}");
                    }
                    count += 1;
                    if count > 120 {
                        break 'outer;
                    }
                }
            }
        }
    }

    #[test]
    fn honest_assignment_satisfies_every_exported_clause() {
        for fx in standard_fixtures() {
            if !fx.satisfiable {
                continue;
            }
            let (ok, y) = witness_exists(&fx.spec, &fx.x, fx.t_prime, 1 << 22).unwrap();
            assert!(ok);
            let bundle = prove(&fx.spec, &fx.x, &y.unwrap(), fx.t_prime).unwrap();
            let asm = assemble(&fx.spec, &fx.x, fx.t_prime, 1).unwrap();
            let assignment = asm.honest_assignment(&bundle);
            let core = asm.export_core();
            assert!(
                Assembler::violated_clause(&core.clauses, &assignment).is_none(),
                "{} violates a clause",
                fx.name
            );
        }
    }

    #[test]
    fn locality_depth_invariant_under_time_scaling() {
        let spec = eq_machine();
        let x = Bits::from_str01("10011010");
        let mut depths = Vec::new();
        for t in [1u64 << 4, 1 << 6, 1 << 8] {
            let asm = assemble(&spec, &x, t, 1).unwrap();
            let map = asm.clause_map();
            depths.push(map.measure().max_depth);
        }
        assert!(
            depths.windows(2).all(|w| w[0] == w[1]),
            "depths vary with T: {depths:?}"
        );
    }

    #[test]
    fn assemble_scales_polylogarithmically_in_time() {
        // wall time may only grow mildly when T doubles at fixed n
        let spec = eq_machine();
        let x = Bits::from_str01("1011");
        let time = |t: u64| {
            let start = std::time::Instant::now();
            let asm = assemble(&spec, &x, t, 1).unwrap();
            let _ = asm.clause_map();
            start.elapsed().as_secs_f64().max(0.005)
        };
        let base = time(1 << 6);
        let doubled = time(1 << 7);
        assert!(
            doubled < base * 16.0 + 0.5,
            "doubling T blew up: {base}s -> {doubled}s"
        );
    }

    #[test]
    fn mutation_of_honest_assignment_is_detected() {
        let fx = &standard_fixtures()[0];
        let bundle = prove(&fx.spec, &fx.x, &Bits::from_str01("1"), fx.t_prime).unwrap();
        let asm = assemble(&fx.spec, &fx.x, fx.t_prime, 1).unwrap();
        let assignment = asm.honest_assignment(&bundle);
        let core = asm.export_core();
        let vars: Vec<u64> = assignment.keys().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut caught = 0;
        for _ in 0..50 {
            let v = vars[rng.gen_range(0..vars.len())];
            let mut mutated = assignment.clone();
            mutated.insert(v, !assignment[&v]);
            if Assembler::violated_clause(&core.clauses, &mutated).is_some() {
                caught += 1;
            } else {
                // a free-variable flip: decoding must still replay
                let dec = crate::witness::decode_from(&asm, &|var| {
                    mutated.get(&var).copied().unwrap_or(false)
                });
                assert!(dec.is_ok(), "flip of {v:#x} unsatisfiable nor replayable");
            }
        }
        assert!(caught > 0);
    }

    #[test]
    fn end_to_end_equivalence_via_internal_solver() {
        for fx in standard_fixtures() {
            let asm = assemble(&fx.spec, &fx.x, fx.t_prime, 1).unwrap();
            let core = asm.export_core();
            let (cnf, ren) = crate::dimacs::to_internal(&core.clauses);
            let parsed = crate::dimacs::ParsedCnf {
                vars: cnf.vars as u64,
                clauses: cnf
                    .clauses
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|&l| {
                                let v = crate::cdcl::lit_var(l) as i64 + 1;
                                if crate::cdcl::lit_positive(l) {
                                    v
                                } else {
                                    -v
                                }
                            })
                            .collect()
                    })
                    .collect(),
            };
            let (verdict, model) =
                crate::solver::cdcl_sat(&parsed, 1 << 24).expect("cdcl within budget");
            let want = witness_exists(&fx.spec, &fx.x, fx.t_prime, 1 << 22).unwrap().0;
            assert_eq!(
                verdict == crate::solver::Verdict::Satisfiable,
                want,
                "{}",
                fx.name
            );
            assert_eq!(want, fx.satisfiable);
            if let Some(model) = model {
                let decoded =
                    crate::witness::decode_witness(&asm, &ren, &model, true).unwrap();
                let replay = crate::machine::run(&fx.spec, &fx.x, &decoded.y, fx.t_prime)
                    .unwrap();
                assert!(replay.accept, "{} decode replay", fx.name);
            }
        }
    }
}
