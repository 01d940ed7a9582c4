//! CNF substrate: variables, literals, clause database and DIMACS I/O.
//!
//! Every encoder in this crate emits into a [`CnfFormula`]. Variables are
//! dense 1-based indices handed out by the formula-owned allocator; named
//! groups record which index ranges carry problem semantics (decision bits,
//! counting bits, guards) as opposed to encoding auxiliaries.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A propositional variable, 1-based as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> u32 {
        self.0
    }

    pub fn positive(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn negative(self) -> Lit {
        Lit::new(self, true)
    }
}

/// A literal: a variable together with a negation flag.
///
/// The derived order is by (var, negated), which canonicalizes clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: Var,
    pub negated: bool,
}

impl Lit {
    pub fn new(var: Var, negated: bool) -> Self {
        Lit { var, negated }
    }

    /// Build from a DIMACS-style signed integer. Zero is invalid.
    pub fn from_dimacs(code: i64) -> Result<Self> {
        if code == 0 {
            return Err(Error::Parse("literal 0 inside clause".into()));
        }
        Ok(Lit::new(Var(code.unsigned_abs() as u32), code < 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var.0 as i64;
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// Value of this literal under a truth value of its variable.
    pub fn eval(self, var_value: bool) -> bool {
        var_value != self.negated
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit::new(self.var, !self.negated)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A contiguous, possibly empty range of variables `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarRange {
    lo: u32,
    hi: u32,
}

impl VarRange {
    pub fn empty() -> Self {
        VarRange { lo: 1, hi: 0 }
    }

    pub fn new(lo: u32, hi: u32) -> Self {
        VarRange { lo, hi }
    }

    pub fn len(&self) -> u32 {
        if self.hi < self.lo {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    pub fn contains(&self, v: Var) -> bool {
        v.0 >= self.lo && v.0 <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        (self.lo..=self.hi).map(Var).take(self.len() as usize)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.iter().collect()
    }

    /// n-th variable of the range, 0-based.
    pub fn var(&self, offset: u32) -> Var {
        debug_assert!(offset < self.len());
        Var(self.lo + offset)
    }
}

/// Clause database over an append-only variable space.
#[derive(Debug, Clone, Default)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    groups: Vec<(String, VarRange)>,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Allocate `count` fresh variables under a named group.
    pub fn new_vars(&mut self, count: u32, label: &str) -> Result<VarRange> {
        if self.groups.iter().any(|(l, _)| l == label) {
            return Err(Error::DuplicateGroup(label.to_string()));
        }
        let range = self.alloc(count);
        self.groups.push((label.to_string(), range));
        Ok(range)
    }

    /// Allocate `count` unnamed auxiliary variables.
    pub fn alloc(&mut self, count: u32) -> VarRange {
        if count == 0 {
            return VarRange::empty();
        }
        let lo = self.num_vars + 1;
        self.num_vars += count;
        VarRange::new(lo, self.num_vars)
    }

    /// Allocate one unnamed auxiliary variable.
    pub fn alloc_one(&mut self) -> Var {
        self.alloc(1).var(0)
    }

    /// Record a label over an already-allocated range (used to tag the
    /// auxiliary tail after an encoding pass).
    pub fn label_range(&mut self, label: &str, range: VarRange) -> Result<()> {
        if self.groups.iter().any(|(l, _)| l == label) {
            return Err(Error::DuplicateGroup(label.to_string()));
        }
        self.groups.push((label.to_string(), range));
        Ok(())
    }

    pub fn group(&self, label: &str) -> Option<VarRange> {
        self.groups
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, r)| *r)
    }

    pub fn groups(&self) -> &[(String, VarRange)] {
        &self.groups
    }

    /// Add a clause. Panics on a literal over an unallocated variable;
    /// encoders own their variables so this is a programming error.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        for l in lits {
            assert!(
                l.var.0 >= 1 && l.var.0 <= self.num_vars,
                "clause references unallocated variable {}",
                l.var.0
            );
        }
        self.clauses.push(lits.to_vec());
    }

    /// Add the empty clause, making the formula unsatisfiable.
    pub fn add_empty_clause(&mut self) {
        self.clauses.push(Vec::new());
    }

    /// Check a total assignment (indexed by var, slot 0 unused) against
    /// every clause. Returns the index of the first violated clause.
    pub fn violated_clause(&self, assignment: &[bool]) -> Option<usize> {
        self.clauses.iter().position(|clause| {
            !clause
                .iter()
                .any(|l| l.eval(assignment[l.var.0 as usize]))
        })
    }

    /// DIMACS CNF dump. Named groups are recorded as
    /// `c group <label> <lo> <hi>` comment lines before the header.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for (label, range) in &self.groups {
            let _ = writeln!(out, "c group {} {} {}", label, range.lo(), range.hi());
        }
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for l in clause {
                let _ = write!(out, "{} ", l.to_dimacs());
            }
            let _ = writeln!(out, "0");
        }
        out
    }

    /// Parse DIMACS CNF, honoring `c group` comment lines.
    pub fn from_dimacs(text: &str) -> Result<Self> {
        let mut formula = CnfFormula::new();
        let mut declared: Option<(u32, usize)> = None;
        let mut current: Vec<Lit> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("c group ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() == 3 {
                    let lo: u32 = parts[1]
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad group", lineno + 1)))?;
                    let hi: u32 = parts[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad group", lineno + 1)))?;
                    formula.groups.push((parts[0].to_string(), VarRange::new(lo, hi)));
                }
                continue;
            }
            if line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::Parse(format!("line {}: bad header", lineno + 1)));
                }
                let nv = parts[0]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad header", lineno + 1)))?;
                let nc = parts[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad header", lineno + 1)))?;
                declared = Some((nv, nc));
                formula.num_vars = nv;
                continue;
            }
            if declared.is_none() {
                return Err(Error::Parse(format!(
                    "line {}: clause before `p cnf` header",
                    lineno + 1
                )));
            }
            for tok in line.split_whitespace() {
                let code: i64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad literal `{}`", lineno + 1, tok)))?;
                if code == 0 {
                    formula.clauses.push(std::mem::take(&mut current));
                } else {
                    let lit = Lit::from_dimacs(code)?;
                    if lit.var.0 > formula.num_vars {
                        return Err(Error::UnallocatedVar(lit.var.0));
                    }
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            return Err(Error::Parse("unterminated clause at end of file".into()));
        }
        if let Some((_, nc)) = declared {
            if nc != formula.clauses.len() {
                return Err(Error::Parse(format!(
                    "header declares {} clauses, found {}",
                    nc,
                    formula.clauses.len()
                )));
            }
        } else {
            return Err(Error::Parse("missing `p cnf` header".into()));
        }
        Ok(formula)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_allocation_from_empty() {
        let mut f = CnfFormula::new();
        let r = f.new_vars(3, "x").unwrap();
        assert_eq!(r.vars(), vec![Var(1), Var(2), Var(3)]);
        assert_eq!(f.num_vars(), 3);
    }

    #[test]
    fn zero_count_allocation() {
        let mut f = CnfFormula::new();
        f.new_vars(3, "x").unwrap();
        let r = f.new_vars(0, "b").unwrap();
        assert!(r.is_empty());
        assert_eq!(f.num_vars(), 3);
    }

    #[test]
    fn duplicate_label_rejected() {
        let mut f = CnfFormula::new();
        f.new_vars(3, "x").unwrap();
        assert!(matches!(
            f.new_vars(2, "x"),
            Err(Error::DuplicateGroup(_))
        ));
    }

    #[test]
    #[should_panic(expected = "unallocated")]
    fn clause_over_unallocated_var_panics() {
        let mut f = CnfFormula::new();
        f.new_vars(1, "x").unwrap();
        f.add_clause(&[Var(2).positive()]);
    }

    #[test]
    fn dimacs_round_trip() {
        let mut f = CnfFormula::new();
        let x = f.new_vars(2, "x").unwrap();
        f.add_clause(&[x.var(0).positive(), x.var(1).negative()]);
        f.add_clause(&[x.var(1).positive()]);
        let text = f.to_dimacs();
        assert!(text.contains("c group x 1 2"));
        assert!(text.contains("p cnf 2 2"));
        let back = CnfFormula::from_dimacs(&text).unwrap();
        assert_eq!(back.num_vars(), 2);
        assert_eq!(back.clauses(), f.clauses());
        assert_eq!(back.group("x"), Some(VarRange::new(1, 2)));
    }

    #[test]
    fn determinism_identical_sequences() {
        let build = || {
            let mut f = CnfFormula::new();
            let x = f.new_vars(4, "x").unwrap();
            f.add_clause(&[x.var(0).positive(), x.var(3).negative()]);
            f.add_clause(&[x.var(2).positive()]);
            f.to_dimacs()
        };
        assert_eq!(build(), build());
    }
}
