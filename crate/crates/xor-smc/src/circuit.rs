//! Boolean circuits (DAGs of gates) and the parsimonious Tseitin transform.
//!
//! Circuits are the pre-CNF form of the instance formulas. Construction is
//! append-only: a gate may only reference nodes created before it, so a
//! circuit built through this API is acyclic by construction. The Tseitin
//! transform uses full biconditional definitions for every gate, which makes
//! every auxiliary variable a function of the circuit inputs. That property
//! (one auxiliary completion per input assignment) is what keeps model
//! counts over the inputs intact after CNF conversion; do not replace it
//! with polarity-based encodings.

use crate::error::{Error, Result};
use crate::formula::{CnfFormula, Lit, Var};

/// Reference to a node inside one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    Input(Var),
    Const(bool),
    Not(NodeId),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
    Implies(NodeId, NodeId),
    Xor(NodeId, NodeId),
}

/// A combinational circuit with a single output.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    nodes: Vec<Gate>,
    output: Option<NodeId>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Gate {
        &self.nodes[id.idx()]
    }

    fn push(&mut self, gate: Gate) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(gate);
        id
    }

    fn check(&self, id: NodeId) -> NodeId {
        assert!(id.idx() < self.nodes.len(), "node reference out of range");
        id
    }

    fn const_value(&self, id: NodeId) -> Option<bool> {
        match self.nodes[id.idx()] {
            Gate::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn input(&mut self, var: Var) -> NodeId {
        self.push(Gate::Input(var))
    }

    pub fn constant(&mut self, value: bool) -> NodeId {
        self.push(Gate::Const(value))
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        self.check(a);
        match self.nodes[a.idx()] {
            Gate::Const(v) => self.constant(!v),
            Gate::Not(inner) => inner,
            _ => self.push(Gate::Not(a)),
        }
    }

    pub fn and(&mut self, args: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut kept = Vec::new();
        for a in args {
            self.check(a);
            match self.const_value(a) {
                Some(true) => {}
                Some(false) => return self.constant(false),
                None => kept.push(a),
            }
        }
        match kept.len() {
            0 => self.constant(true),
            1 => kept[0],
            _ => self.push(Gate::And(kept)),
        }
    }

    pub fn or(&mut self, args: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut kept = Vec::new();
        for a in args {
            self.check(a);
            match self.const_value(a) {
                Some(false) => {}
                Some(true) => return self.constant(true),
                None => kept.push(a),
            }
        }
        match kept.len() {
            0 => self.constant(false),
            1 => kept[0],
            _ => self.push(Gate::Or(kept)),
        }
    }

    pub fn implies(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(a);
        self.check(b);
        match (self.const_value(a), self.const_value(b)) {
            (Some(false), _) | (_, Some(true)) => self.constant(true),
            (Some(true), _) => b,
            (_, Some(false)) => self.not(a),
            _ => self.push(Gate::Implies(a, b)),
        }
    }

    pub fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(a);
        self.check(b);
        match (self.const_value(a), self.const_value(b)) {
            (Some(false), _) => b,
            (_, Some(false)) => a,
            (Some(true), _) => self.not(b),
            (_, Some(true)) => self.not(a),
            _ => self.push(Gate::Xor(a, b)),
        }
    }

    /// XOR over any number of nodes, folded left into a chain.
    pub fn xor_all(&mut self, args: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut acc = None;
        for a in args {
            acc = Some(match acc {
                None => a,
                Some(prev) => self.xor(prev, a),
            });
        }
        match acc {
            Some(n) => n,
            None => self.constant(false),
        }
    }

    /// "At least k of these nodes are true", built as a sequential counter.
    pub fn at_least(&mut self, args: &[NodeId], k: u32) -> NodeId {
        let k = k as usize;
        if k == 0 {
            return self.constant(true);
        }
        if k > args.len() {
            return self.constant(false);
        }
        // row[j] = "at least j of the inputs seen so far are true"
        let t = self.constant(true);
        let f = self.constant(false);
        let mut row = vec![f; k + 1];
        row[0] = t;
        for &a in args {
            for j in (1..=k).rev() {
                let carry = self.and([row[j - 1], a]);
                row[j] = self.or([row[j], carry]);
            }
        }
        row[k]
    }

    /// "At most k of these nodes are true".
    pub fn at_most(&mut self, args: &[NodeId], k: u32) -> NodeId {
        let over = self.at_least(args, k + 1);
        self.not(over)
    }

    /// "Exactly one of these nodes is true".
    pub fn exactly_one(&mut self, args: &[NodeId]) -> NodeId {
        let lo = self.at_least(args, 1);
        let hi = self.at_most(args, 1);
        self.and([lo, hi])
    }

    /// Equality of two little-endian bit vectors of the same width.
    pub fn bits_equal(&mut self, a: &[NodeId], b: &[NodeId]) -> NodeId {
        assert_eq!(a.len(), b.len());
        let eqs: Vec<NodeId> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = self.xor(x, y);
                self.not(d)
            })
            .collect();
        self.and(eqs)
    }

    /// Little-endian increment modulo 2^width.
    pub fn increment(&mut self, bits: &[NodeId]) -> Vec<NodeId> {
        let mut carry = self.constant(true);
        let mut out = Vec::with_capacity(bits.len());
        for &b in bits {
            out.push(self.xor(b, carry));
            carry = self.and([b, carry]);
        }
        out
    }

    /// Copy every node of `other` into this circuit, returning the node
    /// holding `other`'s output. Does not touch this circuit's output.
    pub fn append(&mut self, other: &Circuit) -> NodeId {
        let mut map: Vec<NodeId> = Vec::with_capacity(other.nodes.len());
        for gate in &other.nodes {
            let new_id = match gate {
                Gate::Input(v) => self.input(*v),
                Gate::Const(c) => self.constant(*c),
                Gate::Not(a) => {
                    let a = map[a.idx()];
                    self.not(a)
                }
                Gate::And(args) => {
                    let args: Vec<NodeId> = args.iter().map(|a| map[a.idx()]).collect();
                    self.and(args)
                }
                Gate::Or(args) => {
                    let args: Vec<NodeId> = args.iter().map(|a| map[a.idx()]).collect();
                    self.or(args)
                }
                Gate::Implies(a, b) => {
                    let (a, b) = (map[a.idx()], map[b.idx()]);
                    self.implies(a, b)
                }
                Gate::Xor(a, b) => {
                    let (a, b) = (map[a.idx()], map[b.idx()]);
                    self.xor(a, b)
                }
            };
            map.push(new_id);
        }
        map[other.output().idx()]
    }

    pub fn set_output(&mut self, id: NodeId) {
        self.check(id);
        self.output = Some(id);
    }

    pub fn output(&self) -> NodeId {
        self.output.expect("circuit output not set")
    }

    /// Input variables referenced anywhere in the circuit, ascending.
    pub fn input_vars(&self) -> Vec<Var> {
        let mut vars: Vec<Var> = self
            .nodes
            .iter()
            .filter_map(|g| match g {
                Gate::Input(v) => Some(*v),
                _ => None,
            })
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    /// Evaluate the output under a total input assignment.
    pub fn eval(&self, value_of: impl Fn(Var) -> bool) -> bool {
        self.eval_node(self.output(), &value_of)
    }

    pub fn eval_node(&self, target: NodeId, value_of: &impl Fn(Var) -> bool) -> bool {
        let mut values: Vec<bool> = Vec::with_capacity(self.nodes.len());
        for (i, gate) in self.nodes.iter().enumerate() {
            let v = match gate {
                Gate::Input(var) => value_of(*var),
                Gate::Const(c) => *c,
                Gate::Not(a) => !values[a.idx()],
                Gate::And(args) => args.iter().all(|a| values[a.idx()]),
                Gate::Or(args) => args.iter().any(|a| values[a.idx()]),
                Gate::Implies(a, b) => !values[a.idx()] || values[b.idx()],
                Gate::Xor(a, b) => values[a.idx()] != values[b.idx()],
            };
            values.push(v);
            if i == target.idx() {
                return v;
            }
        }
        values[target.idx()]
    }

    /// Copy this circuit, rewriting every input variable through `map`.
    pub fn remap(&self, map: impl Fn(Var) -> Var) -> Circuit {
        let nodes = self
            .nodes
            .iter()
            .map(|g| match g {
                Gate::Input(v) => Gate::Input(map(*v)),
                other => other.clone(),
            })
            .collect();
        Circuit {
            nodes,
            output: self.output,
        }
    }

    /// Copy this circuit, rewriting inputs to either a fresh variable or a
    /// constant. Used to fix the `x` block when counting over `y` alone.
    pub fn substitute(&self, map: impl Fn(Var) -> InputBinding) -> Circuit {
        let nodes = self
            .nodes
            .iter()
            .map(|g| match g {
                Gate::Input(v) => match map(*v) {
                    InputBinding::Variable(nv) => Gate::Input(nv),
                    InputBinding::Fixed(b) => Gate::Const(b),
                },
                other => other.clone(),
            })
            .collect();
        Circuit {
            nodes,
            output: self.output,
        }
    }
}

/// How an input is rebound under [`Circuit::substitute`].
#[derive(Debug, Clone, Copy)]
pub enum InputBinding {
    Variable(Var),
    Fixed(bool),
}

/// Parsimonious Tseitin transform: add defining clauses for every gate of
/// `circuit` to `formula` and return the literal holding the output value.
///
/// All circuit inputs must already be allocated in `formula`. A bare input
/// or negation thereof is returned as-is with zero clauses added.
pub fn tseitin(formula: &mut CnfFormula, circuit: &Circuit) -> Result<Lit> {
    if circuit.nodes.is_empty() {
        return Err(Error::CyclicCircuit);
    }
    // Only gates feeding the output get defining clauses; builder folding
    // can leave disconnected constants behind.
    let mut reachable = vec![false; circuit.nodes.len()];
    let mut stack = vec![circuit.output()];
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut reachable[id.idx()], true) {
            continue;
        }
        match &circuit.nodes[id.idx()] {
            Gate::Input(_) | Gate::Const(_) => {}
            Gate::Not(a) => stack.push(*a),
            Gate::And(args) | Gate::Or(args) => stack.extend(args.iter().copied()),
            Gate::Implies(a, b) | Gate::Xor(a, b) => {
                stack.push(*a);
                stack.push(*b);
            }
        }
    }
    let dummy = Lit::new(Var(u32::MAX), false);
    let mut lits: Vec<Lit> = Vec::with_capacity(circuit.nodes.len());
    for (idx, gate) in circuit.nodes.iter().enumerate() {
        if !reachable[idx] {
            lits.push(dummy);
            continue;
        }
        let lit = match gate {
            Gate::Input(v) => {
                if v.index() == 0 || v.index() > formula.num_vars() {
                    return Err(Error::UnallocatedVar(v.index()));
                }
                v.positive()
            }
            Gate::Const(value) => {
                // A constant gets a forced auxiliary; still one completion
                // per input assignment.
                let aux = formula.alloc_one();
                let lit = aux.positive();
                formula.add_clause(&[if *value { lit } else { !lit }]);
                lit
            }
            Gate::Not(a) => !lits[a.idx()],
            Gate::And(args) => {
                let aux = formula.alloc_one().positive();
                let mut long = vec![aux];
                for a in args {
                    let al = lits[a.idx()];
                    formula.add_clause(&[!aux, al]);
                    long.push(!al);
                }
                formula.add_clause(&long);
                aux
            }
            Gate::Or(args) => {
                let aux = formula.alloc_one().positive();
                let mut long = vec![!aux];
                for a in args {
                    let al = lits[a.idx()];
                    formula.add_clause(&[aux, !al]);
                    long.push(al);
                }
                formula.add_clause(&long);
                aux
            }
            Gate::Implies(a, b) => {
                let (al, bl) = (lits[a.idx()], lits[b.idx()]);
                let aux = formula.alloc_one().positive();
                // aux <-> (!a | b)
                formula.add_clause(&[!aux, !al, bl]);
                formula.add_clause(&[aux, al]);
                formula.add_clause(&[aux, !bl]);
                aux
            }
            Gate::Xor(a, b) => {
                let (al, bl) = (lits[a.idx()], lits[b.idx()]);
                let aux = formula.alloc_one().positive();
                formula.add_clause(&[!aux, al, bl]);
                formula.add_clause(&[!aux, !al, !bl]);
                formula.add_clause(&[aux, !al, bl]);
                formula.add_clause(&[aux, al, !bl]);
                aux
            }
        };
        lits.push(lit);
    }
    Ok(lits[circuit.output().idx()])
}

/// Tseitin-encode and assert the output, i.e. conjoin the circuit onto the
/// formula.
pub fn tseitin_assert(formula: &mut CnfFormula, circuit: &Circuit) -> Result<()> {
    let out = tseitin(formula, circuit)?;
    formula.add_clause(&[out]);
    Ok(())
}

/// Build a circuit computing a CNF (AND of ORs) over the given literals.
/// Variables are taken verbatim from the clause literals.
pub fn circuit_from_clauses(clauses: &[Vec<Lit>]) -> Circuit {
    let mut c = Circuit::new();
    let mut ors = Vec::with_capacity(clauses.len());
    for clause in clauses {
        let mut nodes = Vec::with_capacity(clause.len());
        for l in clause {
            let inp = c.input(l.var);
            nodes.push(if l.negated { c.not(inp) } else { inp });
        }
        ors.push(c.or(nodes));
    }
    let out = c.and(ors);
    c.set_output(out);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_truth_table() {
        let mut f = CnfFormula::new();
        let r = f.new_vars(2, "in").unwrap();
        let mut c = Circuit::new();
        let a = c.input(r.var(0));
        let b = c.input(r.var(1));
        let out = c.and([a, b]);
        c.set_output(out);
        tseitin_assert(&mut f, &c).unwrap();

        // Models restricted to {a, b} must be exactly {(1,1)}.
        let models = crate::oracle::count_exact(&f, &r.vars()).unwrap();
        assert_eq!(models, 1);
    }

    #[test]
    fn single_input_wire_is_identity() {
        let mut f = CnfFormula::new();
        let r = f.new_vars(1, "in").unwrap();
        let mut c = Circuit::new();
        let a = c.input(r.var(0));
        c.set_output(a);
        let out = tseitin(&mut f, &c).unwrap();
        assert_eq!(out, r.var(0).positive());
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.num_vars(), 1);
    }

    #[test]
    fn three_gate_circuit_matches_truth_table_count() {
        // (a XOR b) OR (a AND b)  == a OR b
        let mut f = CnfFormula::new();
        let r = f.new_vars(2, "in").unwrap();
        let mut c = Circuit::new();
        let a = c.input(r.var(0));
        let b = c.input(r.var(1));
        let x = c.xor(a, b);
        let n = c.and([a, b]);
        let out = c.or([x, n]);
        c.set_output(out);

        // Truth-table oracle: count satisfying input rows by evaluation.
        let mut expected = 0u64;
        for bits in 0..4u32 {
            let val = c.eval(|v| bits >> (v.index() - 1) & 1 == 1);
            if val {
                expected += 1;
            }
        }
        assert_eq!(expected, 3);

        tseitin_assert(&mut f, &c).unwrap();
        let got = crate::oracle::count_exact(&f, &r.vars()).unwrap();
        assert_eq!(got, expected);
        // Parsimony: the total count equals the projected count.
        let all: Vec<Var> = (1..=f.num_vars()).map(Var).collect();
        let total = crate::oracle::count_exact(&f, &all).unwrap();
        assert_eq!(total, expected);
    }

    #[test]
    fn constant_folding() {
        let mut c = Circuit::new();
        let t = c.constant(true);
        let a = c.input(Var(1));
        assert_eq!(c.and([t, a]), a);
        let f = c.constant(false);
        assert_eq!(c.or([f, a]), a);
        let na = c.not(a);
        assert_eq!(c.not(na), a);
        assert_eq!(c.xor(f, a), a);
    }

    #[test]
    fn eval_cardinality_counter() {
        let mut c = Circuit::new();
        let inputs: Vec<NodeId> = (1..=5).map(|i| c.input(Var(i))).collect();
        let out = c.at_least(&inputs, 3);
        c.set_output(out);
        for bits in 0..32u32 {
            let expected = bits.count_ones() >= 3;
            let got = c.eval(|v| bits >> (v.index() - 1) & 1 == 1);
            assert_eq!(got, expected, "bits {bits:05b}");
        }
    }
}
