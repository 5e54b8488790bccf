//! Decision-tree forests: one tree per output bit. This is the universal
//! representation of a low-locality function in this crate. Locality is
//! measured structurally (the positions a tree queries), never by sampling.

use crate::bits::Bits;
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Node {
    Leaf(bool),
    /// Queries input position `pos`; `lo` taken when the bit is 0.
    Query {
        pos: usize,
        lo: u32,
        hi: u32,
    },
}

/// A single decision tree over a fixed input width, arena allocated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: u32,
}

impl DecisionTree {
    pub fn leaf(value: bool) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf(value)],
            root: 0,
        }
    }

    pub fn eval(&self, input: &Bits) -> bool {
        self.eval_slice(input.as_slice())
    }

    pub fn eval_slice(&self, input: &[bool]) -> bool {
        let mut at = self.root;
        loop {
            match &self.nodes[at as usize] {
                Node::Leaf(v) => return *v,
                Node::Query { pos, lo, hi } => {
                    at = if input[*pos] { *hi } else { *lo };
                }
            }
        }
    }

    /// Longest root-to-leaf path, counted in queries. A bare leaf has depth 0.
    pub fn depth(&self) -> usize {
        // nodes only reference lower indices, so one sweep suffices even
        // when subtrees are shared
        let mut d = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Query { lo, hi, .. } = n {
                d[i] = 1 + d[*lo as usize].max(d[*hi as usize]);
            }
        }
        d[self.root as usize]
    }

    /// Every position queried anywhere in the tree.
    pub fn dependencies(&self) -> BTreeSet<usize> {
        let mut deps = BTreeSet::new();
        for n in &self.nodes {
            if let Node::Query { pos, .. } = n {
                deps.insert(*pos);
            }
        }
        deps
    }

    /// Rebuilds the tree with every queried position passed through `f`.
    pub fn rewire(&self, f: &dyn Fn(usize) -> usize) -> DecisionTree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Leaf(v) => Node::Leaf(*v),
                Node::Query { pos, lo, hi } => Node::Query {
                    pos: f(*pos),
                    lo: *lo,
                    hi: *hi,
                },
            })
            .collect();
        DecisionTree {
            nodes,
            root: self.root,
        }
    }

    fn dump_at(&self, at: u32, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match &self.nodes[at as usize] {
            Node::Leaf(v) => {
                let _ = writeln!(out, "{pad}-> {}", u8::from(*v));
            }
            Node::Query { pos, lo, hi } => {
                let _ = writeln!(out, "{pad}x[{pos}]?");
                self.dump_at(*lo, indent + 1, out);
                self.dump_at(*hi, indent + 1, out);
            }
        }
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        self.dump_at(self.root, 0, &mut s);
        s
    }
}

/// A total map `{0,1}^in -> {0,1}^out` given as one decision tree per output
/// bit.
#[derive(Clone, Debug)]
pub struct LocalMap {
    input_width: usize,
    trees: Vec<DecisionTree>,
}

#[derive(Clone, Debug)]
pub struct LocalityReport {
    pub input_width: usize,
    pub output_width: usize,
    pub per_output: Vec<(usize, BTreeSet<usize>)>,
    pub max_depth: usize,
    pub max_dependency_set: usize,
}

impl std::fmt::Display for LocalityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "inputs {}, outputs {}, max depth {}, max dependency set {}",
            self.input_width, self.output_width, self.max_depth, self.max_dependency_set
        )
    }
}

impl LocalMap {
    pub fn new(input_width: usize, trees: Vec<DecisionTree>) -> Self {
        for t in &trees {
            debug_assert!(t.dependencies().iter().all(|&p| p < input_width));
        }
        LocalMap { input_width, trees }
    }

    /// The identity map on `width` bits.
    pub fn identity(width: usize) -> Self {
        let trees = (0..width)
            .map(|j| {
                TreeBuilder::new(width).build(&[j], &|x: &[bool]| x[j])
            })
            .collect();
        LocalMap {
            input_width: width,
            trees,
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, j: usize) -> &DecisionTree {
        &self.trees[j]
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn eval(&self, input: &Bits) -> Bits {
        assert_eq!(input.len(), self.input_width, "input width mismatch");
        self.trees.iter().map(|t| t.eval(input)).collect()
    }

    pub fn measure(&self) -> LocalityReport {
        let per_output: Vec<_> = self
            .trees
            .iter()
            .map(|t| (t.depth(), t.dependencies()))
            .collect();
        LocalityReport {
            input_width: self.input_width,
            output_width: self.trees.len(),
            max_depth: per_output.iter().map(|(d, _)| *d).max().unwrap_or(0),
            max_dependency_set: per_output.iter().map(|(_, s)| s.len()).max().unwrap_or(0),
            per_output,
        }
    }

    /// Builds a map from per-output declared dependencies and a reference
    /// function. Each output tree queries its declared positions in order;
    /// subtrees on which the output is constant collapse to leaves.
    pub fn from_fn(
        input_width: usize,
        output_width: usize,
        deps: impl Fn(usize) -> Vec<usize>,
        f: impl Fn(&[bool], usize) -> bool,
    ) -> Self {
        let trees = (0..output_width)
            .map(|j| TreeBuilder::new(input_width).build(&deps(j), &|x: &[bool]| f(x, j)))
            .collect();
        LocalMap { input_width, trees }
    }

    /// Case dispatch on selector positions: output bit `j` first queries the
    /// selectors, then continues as `cases[sel].tree(j)`. `cases` must have
    /// length `2^selectors.len()` and agree on widths.
    pub fn dispatch(input_width: usize, selectors: &[usize], cases: &[LocalMap]) -> Self {
        assert_eq!(cases.len(), 1 << selectors.len());
        let out_w = cases[0].output_width();
        for c in cases {
            assert_eq!(c.output_width(), out_w);
            assert!(c.input_width() <= input_width);
        }
        let trees = (0..out_w)
            .map(|j| {
                let mut nodes = Vec::new();
                let root = graft_dispatch(selectors, 0, 0, cases, j, &mut nodes);
                DecisionTree { nodes, root }
            })
            .collect();
        LocalMap { input_width, trees }
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (j, t) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "output {j}: depth {}", t.depth());
            s.push_str(&t.dump());
        }
        s
    }
}

fn graft_dispatch(
    selectors: &[usize],
    k: usize,
    acc: usize,
    cases: &[LocalMap],
    j: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    if k == selectors.len() {
        return graft_tree(&cases[acc].trees[j], cases[acc].trees[j].root, nodes);
    }
    let lo = graft_dispatch(selectors, k + 1, acc, cases, j, nodes);
    let hi = graft_dispatch(selectors, k + 1, acc | 1 << k, cases, j, nodes);
    // collapse when both branches are the same leaf
    if let (Node::Leaf(a), Node::Leaf(b)) = (&nodes[lo as usize], &nodes[hi as usize]) {
        if a == b {
            return lo;
        }
    }
    nodes.push(Node::Query {
        pos: selectors[k],
        lo,
        hi,
    });
    (nodes.len() - 1) as u32
}

fn graft_tree(tree: &DecisionTree, at: u32, nodes: &mut Vec<Node>) -> u32 {
    match &tree.nodes[at as usize] {
        Node::Leaf(v) => {
            nodes.push(Node::Leaf(*v));
        }
        Node::Query { pos, lo, hi } => {
            let l = graft_tree(tree, *lo, nodes);
            let h = graft_tree(tree, *hi, nodes);
            nodes.push(Node::Query {
                pos: *pos,
                lo: l,
                hi: h,
            });
        }
    }
    (nodes.len() - 1) as u32
}

/// Builds a single decision tree over declared dependency positions.
pub struct TreeBuilder {
    input_width: usize,
}

impl TreeBuilder {
    pub fn new(input_width: usize) -> Self {
        TreeBuilder { input_width }
    }

    /// The tree queries `deps` in the given order; any subtree on which `f`
    /// becomes constant is collapsed to a leaf. `f` sees a full-width
    /// assignment with non-dependency positions fixed to 0, so it must not
    /// consult positions outside `deps`.
    pub fn build(&self, deps: &[usize], f: &dyn Fn(&[bool]) -> bool) -> DecisionTree {
        let mut scratch = vec![false; self.input_width];
        let mut nodes = Vec::new();
        let root = build_rec(deps, 0, &mut scratch, f, &mut nodes);
        DecisionTree { nodes, root }
    }
}

fn build_rec(
    deps: &[usize],
    k: usize,
    scratch: &mut Vec<bool>,
    f: &dyn Fn(&[bool]) -> bool,
    nodes: &mut Vec<Node>,
) -> u32 {
    if k == deps.len() {
        nodes.push(Node::Leaf(f(scratch)));
        return (nodes.len() - 1) as u32;
    }
    scratch[deps[k]] = false;
    let lo = build_rec(deps, k + 1, scratch, f, nodes);
    scratch[deps[k]] = true;
    let hi = build_rec(deps, k + 1, scratch, f, nodes);
    scratch[deps[k]] = false;
    if let (Node::Leaf(a), Node::Leaf(b)) = (&nodes[lo as usize], &nodes[hi as usize]) {
        if a == b {
            // both subtrees are single leaves pushed last; fold them into one
            let v = *a;
            nodes.truncate(lo as usize);
            nodes.push(Node::Leaf(v));
            return lo;
        }
    }
    nodes.push(Node::Query {
        pos: deps[k],
        lo,
        hi,
    });
    (nodes.len() - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let m = LocalMap::identity(4);
        let x = Bits::from_str01("1011");
        assert_eq!(m.eval(&x), x);
        let rep = m.measure();
        assert_eq!(rep.max_depth, 1);
        for (j, (d, deps)) in rep.per_output.iter().enumerate() {
            assert_eq!(*d, 1);
            assert_eq!(deps.iter().copied().collect::<Vec<_>>(), vec![j]);
        }
    }

    #[test]
    fn constant_zero_map() {
        let m = LocalMap::from_fn(5, 1, |_| vec![], |_, _| false);
        assert!(!m.eval(&Bits::from_u64(0b10101, 5)).get(0));
        assert_eq!(m.measure().max_depth, 0);
    }

    #[test]
    fn collapse_prunes_constant_subtrees() {
        // f = x0 AND x1; once x0 = 0 the x1 query collapses away on that side
        let m = LocalMap::from_fn(2, 1, |_| vec![0, 1], |x, _| x[0] && x[1]);
        let t = m.tree(0);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.dependencies().len(), 2);
        // and a genuinely constant function collapses fully
        let c = LocalMap::from_fn(2, 1, |_| vec![0, 1], |_, _| true);
        assert_eq!(c.tree(0).depth(), 0);
    }

    #[test]
    fn structural_measurement_counts_never_taken_branches() {
        // Build f = x0 with a gratuitous query on x1 first. The measurement
        // must report {x0, x1} even though the function ignores x1.
        let t = TreeBuilder::new(2).build(&[1, 0], &|x| x[0]);
        let deps = t.dependencies();
        assert!(deps.contains(&0));
        assert!(deps.contains(&1), "structural scan keeps the x1 query");
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn dispatch_grafts_cases() {
        let zero = LocalMap::from_fn(3, 1, |_| vec![], |_, _| false);
        let one = LocalMap::from_fn(3, 1, |_| vec![], |_, _| true);
        let pass = LocalMap::from_fn(3, 1, |_| vec![0], |x, _| x[0]);
        let neg = LocalMap::from_fn(3, 1, |_| vec![0], |x, _| !x[0]);
        let m = LocalMap::dispatch(3, &[1, 2], &[zero, one, pass, neg]);
        for sel in 0..4u64 {
            for b in 0..2u64 {
                let mut inp = Bits::zeros(3);
                inp.set(0, b == 1);
                inp.set(1, sel & 1 == 1);
                inp.set(2, sel & 2 == 2);
                let want = match sel {
                    0 => false,
                    1 => true,
                    2 => b == 1,
                    _ => b == 0,
                };
                assert_eq!(m.eval(&inp).get(0), want);
            }
        }
        assert!(m.measure().max_depth <= 3);
    }

    #[test]
    fn eval_matches_tree_walk_on_random_maps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let w = rng.gen_range(1..8);
            let table: Vec<u64> = (0..4).map(|_| rng.gen()).collect();
            let f = move |x: &[bool], j: usize| {
                let idx: usize = x
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| if b { 1 << i } else { 0 })
                    .sum();
                table[j] >> (idx % 64) & 1 == 1
            };
            let deps: Vec<usize> = (0..w).collect();
            let m = LocalMap::from_fn(w, 4, |_| deps.clone(), f);
            for v in 0..1u64 << w {
                let inp = Bits::from_u64(v, w);
                let out = m.eval(&inp);
                for j in 0..4 {
                    assert_eq!(out.get(j), m.tree(j).eval(&inp));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// explicit tree expressions
//
// The assembler builds its decision trees directly rather than by
// enumerating dependency assignments: tables over label fields with one
// entry per field value, queries, copies and constants. Compiling an
// expression produces an ordinary `DecisionTree` with constant-leaf
// collapse applied on the way.
// ---------------------------------------------------------------------------

use std::rc::Rc;

#[derive(Clone, Debug)]
pub enum TreeExpr {
    Leaf(bool),
    /// Copy of one input position.
    Pos(usize),
    /// Negated copy.
    NegPos(usize),
    Query(usize, Rc<TreeExpr>, Rc<TreeExpr>),
    /// Queries `positions` (low bit first) and selects the entry indexed by
    /// their value; missing entries fall back to the last one.
    Table(Vec<usize>, Vec<Rc<TreeExpr>>),
}

impl TreeExpr {
    pub fn leaf(v: bool) -> Rc<TreeExpr> {
        Rc::new(TreeExpr::Leaf(v))
    }
    pub fn pos(p: usize) -> Rc<TreeExpr> {
        Rc::new(TreeExpr::Pos(p))
    }
    pub fn neg(p: usize) -> Rc<TreeExpr> {
        Rc::new(TreeExpr::NegPos(p))
    }
    pub fn query(p: usize, lo: Rc<TreeExpr>, hi: Rc<TreeExpr>) -> Rc<TreeExpr> {
        Rc::new(TreeExpr::Query(p, lo, hi))
    }
    pub fn table(positions: Vec<usize>, entries: Vec<Rc<TreeExpr>>) -> Rc<TreeExpr> {
        assert!(!entries.is_empty());
        Rc::new(TreeExpr::Table(positions, entries))
    }

    /// Embeds an already-built decision tree, its positions passed through
    /// `offset`.
    pub fn from_tree(tree: &DecisionTree, offset: &dyn Fn(usize) -> usize) -> Rc<TreeExpr> {
        Self::from_tree_mapped(tree, &|p| MappedPos::Input(offset(p)))
    }

    /// Embeds a decision tree with positions remapped or fixed to constants
    /// (partial evaluation).
    pub fn from_tree_mapped(
        tree: &DecisionTree,
        map: &dyn Fn(usize) -> MappedPos,
    ) -> Rc<TreeExpr> {
        fn rec(
            tree: &DecisionTree,
            at: u32,
            map: &dyn Fn(usize) -> MappedPos,
            memo: &mut std::collections::HashMap<u32, Rc<TreeExpr>>,
        ) -> Rc<TreeExpr> {
            if let Some(e) = memo.get(&at) {
                return e.clone();
            }
            let e = match &tree.nodes[at as usize] {
                Node::Leaf(v) => TreeExpr::leaf(*v),
                Node::Query { pos, lo, hi } => match map(*pos) {
                    MappedPos::Input(p) => Rc::new(TreeExpr::Query(
                        p,
                        rec(tree, *lo, map, memo),
                        rec(tree, *hi, map, memo),
                    )),
                    MappedPos::Fixed(false) => rec(tree, *lo, map, memo),
                    MappedPos::Fixed(true) => rec(tree, *hi, map, memo),
                },
            };
            memo.insert(at, e.clone());
            e
        }
        rec(tree, tree.root, map, &mut std::collections::HashMap::new())
    }

    pub fn compile(&self, input_width: usize) -> DecisionTree {
        let mut c = Consing::new();
        let root = compile_expr(self, input_width, &mut c);
        DecisionTree { nodes: c.nodes, root }
    }
}

struct Consing {
    nodes: Vec<Node>,
    leaf: [u32; 2],
    memo: std::collections::HashMap<(usize, u32, u32), u32>,
}

impl Consing {
    fn new() -> Self {
        Consing {
            nodes: vec![Node::Leaf(false), Node::Leaf(true)],
            leaf: [0, 1],
            memo: std::collections::HashMap::new(),
        }
    }
    fn leaf(&mut self, v: bool) -> u32 {
        self.leaf[usize::from(v)]
    }
    fn query(&mut self, pos: usize, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        *self.memo.entry((pos, lo, hi)).or_insert_with(|| {
            self.nodes.push(Node::Query { pos, lo, hi });
            (self.nodes.len() - 1) as u32
        })
    }
}

fn compile_expr(e: &TreeExpr, w: usize, c: &mut Consing) -> u32 {
    match e {
        TreeExpr::Leaf(v) => c.leaf(*v),
        TreeExpr::Pos(p) => {
            assert!(*p < w, "position {p} out of width {w}");
            let (l, h) = (c.leaf(false), c.leaf(true));
            c.query(*p, l, h)
        }
        TreeExpr::NegPos(p) => {
            assert!(*p < w, "position {p} out of width {w}");
            let (l, h) = (c.leaf(true), c.leaf(false));
            c.query(*p, l, h)
        }
        TreeExpr::Query(p, lo, hi) => {
            assert!(*p < w, "position {p} out of width {w}");
            let l = compile_expr(lo, w, c);
            let h = compile_expr(hi, w, c);
            c.query(*p, l, h)
        }
        TreeExpr::Table(positions, entries) => compile_table(positions, entries, 0, 0, w, c),
    }
}

fn compile_table(
    positions: &[usize],
    entries: &[Rc<TreeExpr>],
    k: usize,
    acc: usize,
    w: usize,
    c: &mut Consing,
) -> u32 {
    if k == positions.len() {
        let e = entries.get(acc).unwrap_or_else(|| entries.last().unwrap());
        return compile_expr(e, w, c);
    }
    // query the highest remaining position first so sparse tables collapse
    let p = positions[positions.len() - 1 - k];
    let bit = 1usize << (positions.len() - 1 - k);
    if acc >= entries.len() {
        // everything below is the fallback entry
        return compile_expr(entries.last().unwrap(), w, c);
    }
    let l = compile_table(positions, entries, k + 1, acc, w, c);
    let h = compile_table(positions, entries, k + 1, acc | bit, w, c);
    c.query(p, l, h)
}

#[cfg(test)]
mod expr_tests {
    use super::*;

    #[test]
    fn table_selects_entries() {
        // f(x) = entry[x0 + 2 x1] over 4 constants
        let e = TreeExpr::Table(
            vec![0, 1],
            vec![
                TreeExpr::leaf(false),
                TreeExpr::leaf(true),
                TreeExpr::leaf(true),
                TreeExpr::leaf(false),
            ],
        );
        let t = e.compile(2);
        for v in 0..4u64 {
            let inp = Bits::from_u64(v, 2);
            assert_eq!(t.eval(&inp), v == 1 || v == 2);
        }
    }

    #[test]
    fn sparse_tables_collapse() {
        // all entries equal: compiles to a single leaf
        let e = TreeExpr::Table(vec![0, 1, 2], vec![TreeExpr::leaf(true); 8]);
        let t = e.compile(3);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn missing_entries_fall_back() {
        let e = TreeExpr::Table(vec![0, 1], vec![TreeExpr::pos(2), TreeExpr::leaf(false)]);
        let t = e.compile(3);
        let mut inp = Bits::from_u64(0, 3);
        inp.set(2, true);
        assert!(t.eval(&inp)); // entry 0 copies x2
        inp.set(0, true);
        assert!(!t.eval(&inp)); // entries 1.. are the fallback leaf
    }

    #[test]
    fn embedded_trees_rewire() {
        let m = LocalMap::identity(3);
        let e = TreeExpr::from_tree(m.tree(1), &|p| p + 4);
        let t = e.compile(8);
        let mut inp = Bits::zeros(8);
        inp.set(5, true);
        assert!(t.eval(&inp));
    }
}

/// A position under `TreeExpr::from_tree_mapped`: either a real input
/// position or a fixed constant.
#[derive(Clone, Copy, Debug)]
pub enum MappedPos {
    Input(usize),
    Fixed(bool),
}
