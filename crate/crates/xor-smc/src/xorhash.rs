//! Randomized parity (XOR) constraints: the hashing half of the solver.
//!
//! Each sampled constraint includes every variable of the counting range
//! independently with probability 1/2 and flips its constant term with
//! probability 1/2, so each satisfying assignment survives a constraint
//! with probability exactly 1/2. Streams are counter-based and keyed by
//! `(seed, term, repetition, constraint)`, making sampling order-independent
//! and reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::formula::{CnfFormula, Lit, Var, VarRange};

/// Root of all hash randomness for one solver run.
#[derive(Debug, Clone, Copy)]
pub struct HashRng {
    seed: u64,
}

/// One independent sampling stream, keyed by (term, repetition, constraint).
pub struct StreamRng(ChaCha8Rng);

impl HashRng {
    pub fn new(seed: u64) -> Self {
        HashRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, term: u32, repetition: u32, constraint: u32) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..12].copy_from_slice(&term.to_le_bytes());
        key[12..16].copy_from_slice(&repetition.to_le_bytes());
        key[16..20].copy_from_slice(&constraint.to_le_bytes());
        StreamRng(ChaCha8Rng::from_seed(key))
    }
}

/// A parity constraint over a subset of a counting range: satisfied iff
/// XOR of the member values XOR `negate` equals 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityConstraint {
    pub vars: Vec<Var>,
    pub negate: bool,
}

impl ParityConstraint {
    /// Truth value under an assignment of the member variables.
    pub fn eval(&self, value_of: impl Fn(Var) -> bool) -> bool {
        let parity = self
            .vars
            .iter()
            .fold(false, |acc, &v| acc ^ value_of(v));
        parity ^ self.negate
    }

    /// Debugging dump in the `x`-line extension of DIMACS: the member
    /// variables, the first one negated when the constant term is set.
    pub fn to_xdimacs(&self) -> String {
        let mut out = String::from("x");
        for (i, v) in self.vars.iter().enumerate() {
            let sign = if i == 0 && self.negate { "-" } else { "" };
            out.push_str(&format!(" {sign}{}", v.index()));
        }
        out.push_str(" 0");
        out
    }
}

/// Sample one parity constraint over `range`: each variable in with
/// probability 1/2, constant term with probability 1/2.
pub fn sample_parity(range: VarRange, mut stream: StreamRng) -> Result<ParityConstraint> {
    if range.is_empty() {
        return Err(Error::EmptyParityRange);
    }
    let vars: Vec<Var> = range.iter().filter(|_| stream.0.gen_bool(0.5)).collect();
    let negate = stream.0.gen_bool(0.5);
    Ok(ParityConstraint { vars, negate })
}

/// Assert `pc` onto the formula. Short constraints (<= 4 variables) are
/// expanded directly; longer ones are cut into a chain of 3-ary parities
/// with fresh auxiliaries, keeping the clause count linear. Both forms are
/// parsimonious over the member variables.
pub fn encode_parity(formula: &mut CnfFormula, pc: &ParityConstraint) -> Result<()> {
    // target value the running XOR must reach
    let target = !pc.negate;
    if pc.vars.is_empty() {
        if target {
            formula.add_empty_clause();
        }
        return Ok(());
    }
    let mut pending: Vec<Lit> = pc.vars.iter().map(|v| v.positive()).collect();
    while pending.len() > 4 {
        // fold the first three into an auxiliary: aux <-> l1 ^ l2 ^ l3
        let (a, b, c) = (pending[0], pending[1], pending[2]);
        let aux = formula.alloc_one().positive();
        for mask in 0u8..8 {
            // forbid combinations where a^b^c != aux
            let (av, bv, cv) = (mask & 1 == 1, mask & 2 == 2, mask & 4 == 4);
            let parity = av ^ bv ^ cv;
            let clause = [
                if av { !a } else { a },
                if bv { !b } else { b },
                if cv { !c } else { c },
                if parity { aux } else { !aux },
            ];
            formula.add_clause(&clause);
        }
        pending.drain(..3);
        pending.insert(0, aux);
    }
    // direct expansion of the residue: forbid every wrong-parity assignment
    let m = pending.len();
    for mask in 0u8..1 << m {
        let parity = (mask.count_ones() & 1) == 1;
        if parity == target {
            continue;
        }
        let clause: Vec<Lit> = pending
            .iter()
            .enumerate()
            .map(|(i, &l)| if mask >> i & 1 == 1 { !l } else { l })
            .collect();
        formula.add_clause(&clause);
    }
    Ok(())
}

/// Add XOR-chain nodes computing the truth value of `pc` inside a circuit,
/// for contexts where the parity must be reified rather than asserted.
pub fn parity_node(circuit: &mut Circuit, pc: &ParityConstraint) -> NodeId {
    let inputs: Vec<NodeId> = pc.vars.iter().map(|&v| circuit.input(v)).collect();
    let x = circuit.xor_all(inputs);
    if pc.negate {
        circuit.not(x)
    } else {
        x
    }
}
