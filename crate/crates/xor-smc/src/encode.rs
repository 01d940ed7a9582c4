//! Cardinality and pseudo-Boolean constraints over literals.
//!
//! Both encoders go through the circuit builder and the parsimonious
//! Tseitin transform, so projected model counts over the constrained
//! literals are preserved exactly.

use crate::circuit::{tseitin, Circuit, NodeId};
use crate::error::Result;
use crate::formula::{CnfFormula, Lit};

fn lit_nodes(c: &mut Circuit, lits: &[Lit]) -> Vec<NodeId> {
    lits.iter()
        .map(|l| {
            let inp = c.input(l.var);
            if l.negated {
                c.not(inp)
            } else {
                inp
            }
        })
        .collect()
}

/// Assert that at least `k` of `lits` are true. `k = 0` adds nothing.
pub fn encode_at_least_k(formula: &mut CnfFormula, lits: &[Lit], k: u32) -> Result<()> {
    assert!(k as usize <= lits.len(), "k exceeds literal count");
    if k == 0 {
        return Ok(());
    }
    let mut c = Circuit::new();
    let nodes = lit_nodes(&mut c, lits);
    let out = c.at_least(&nodes, k);
    c.set_output(out);
    let out = tseitin(formula, &c)?;
    formula.add_clause(&[out]);
    Ok(())
}

/// Assert that at most `k` of `lits` are true.
pub fn encode_at_most_k(formula: &mut CnfFormula, lits: &[Lit], k: u32) -> Result<()> {
    if k as usize >= lits.len() {
        return Ok(());
    }
    let mut c = Circuit::new();
    let nodes = lit_nodes(&mut c, lits);
    let out = c.at_most(&nodes, k);
    c.set_output(out);
    let out = tseitin(formula, &c)?;
    formula.add_clause(&[out]);
    Ok(())
}

/// Ripple-carry sum of weighted literals as a little-endian bit vector.
/// Weights are expanded into their binary representation; each set weight
/// bit contributes the literal's node at that position.
fn weighted_sum(c: &mut Circuit, terms: &[(u64, NodeId)], width: usize) -> Vec<NodeId> {
    let f = c.constant(false);
    let mut columns: Vec<Vec<NodeId>> = vec![Vec::new(); width];
    for &(weight, node) in terms {
        for (bit, column) in columns.iter_mut().enumerate() {
            if weight >> bit & 1 == 1 {
                column.push(node);
            }
        }
    }
    // Column-wise carry-save reduction with full adders.
    let mut out = Vec::with_capacity(width);
    for bit in 0..width {
        let mut col = std::mem::take(&mut columns[bit]);
        while col.len() > 1 {
            if col.len() == 2 {
                let (a, b) = (col[0], col[1]);
                let s = c.xor(a, b);
                let carry = c.and([a, b]);
                col = vec![s];
                if bit + 1 < width {
                    columns[bit + 1].push(carry);
                }
            } else {
                let (a, b, d) = (col[0], col[1], col[2]);
                let ab = c.xor(a, b);
                let s = c.xor(ab, d);
                let c1 = c.and([a, b]);
                let c2 = c.and([ab, d]);
                let carry = c.or([c1, c2]);
                let mut rest = col.split_off(3);
                rest.push(s);
                col = rest;
                if bit + 1 < width {
                    columns[bit + 1].push(carry);
                }
            }
        }
        out.push(col.pop().unwrap_or(f));
    }
    out
}

/// Comparator `sum <= bound` for a little-endian sum against a constant.
fn leq_const(c: &mut Circuit, sum: &[NodeId], bound: u64) -> NodeId {
    let mut le = c.constant(true);
    for (bit, &s) in sum.iter().enumerate() {
        if bound >> bit & 1 == 1 {
            // s < b at this bit, or equal and the lower bits decide.
            let ns = c.not(s);
            le = c.or([ns, le]);
        } else {
            let ns = c.not(s);
            le = c.and([ns, le]);
        }
    }
    le
}

/// Circuit node computing `sum(weight_i * [node_i]) <= bound`.
pub fn pb_leq_node(c: &mut Circuit, terms: &[(u64, NodeId)], bound: u64) -> NodeId {
    let total: u128 = terms.iter().map(|&(w, _)| w as u128).sum();
    if total <= bound as u128 {
        return c.constant(true);
    }
    let weighted: Vec<(u64, NodeId)> = terms.iter().copied().filter(|&(w, _)| w != 0).collect();
    let width = 128 - total.leading_zeros() as usize;
    let sum = weighted_sum(c, &weighted, width);
    leq_const(c, &sum, bound)
}

/// Assert the pseudo-Boolean constraint `sum(weight_i * [lit_i]) <= bound`
/// through a binary adder network.
pub fn encode_pb_leq(formula: &mut CnfFormula, terms: &[(u64, Lit)], bound: u64) -> Result<()> {
    let total: u128 = terms.iter().map(|&(w, _)| w as u128).sum();
    if total <= bound as u128 {
        return Ok(());
    }
    let mut c = Circuit::new();
    let weighted: Vec<(u64, NodeId)> = terms
        .iter()
        .filter(|&&(w, _)| w != 0)
        .map(|&(w, l)| {
            let inp = c.input(l.var);
            (w, if l.negated { c.not(inp) } else { inp })
        })
        .collect();
    let width = 128 - total.leading_zeros() as usize;
    let sum = weighted_sum(&mut c, &weighted, width);
    let out = leq_const(&mut c, &sum, bound);
    c.set_output(out);
    let out = tseitin(formula, &c)?;
    formula.add_clause(&[out]);
    Ok(())
}
