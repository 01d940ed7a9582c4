//! Weighted-to-unweighted embedding: turn a nonnegative weight function
//! into a Boolean indicator whose model count approximates the weight sum
//! with a bounded, `l`-controlled distortion.
//!
//! The indicator accepts `(x, y)` with `y` of width `l` iff for every bit
//! position `i`, `w(x)/M <= 2^(i-1)/2^l` forces `y_i = 0`. Summed over
//! `x`, the count `N'` satisfies
//! `sum w <= (M/2^l) N' <= 2 sum w + M 2^(n_w - l)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::formula::Var;

/// Parse a nonnegative decimal literal ("3", "0.25", "1e-3" not supported)
/// into an exact rational.
pub(crate) fn parse_decimal(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("invalid decimal value {text:?}"));
    if text.is_empty() || text.starts_with('-') || text.starts_with('+') {
        return Err(bad());
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(BigRational::new(numer, denom))
}

/// A complete nonnegative weight table over a block of Boolean variables.
/// Assignment index `a` reads the variables LSB-first: bit `j` of `a` is
/// the value of `x_vars[j]`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub x_vars: Vec<Var>,
    values: Vec<BigRational>,
    max: BigRational,
}

impl WeightTable {
    pub fn new(x_vars: Vec<Var>, values: Vec<BigRational>) -> Result<Self> {
        let n = x_vars.len();
        if n > 20 {
            return Err(Error::InvalidInstance(
                "weight table domain too wide (max 20 bits)".into(),
            ));
        }
        if values.len() != 1 << n {
            return Err(Error::InvalidInstance(format!(
                "weight table over {n} bits needs {} values, got {}",
                1usize << n,
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidInstance("negative weight".into()));
        }
        let max = values.iter().cloned().max().expect("nonempty table");
        if max.is_zero() {
            return Err(Error::AllZeroWeights);
        }
        Ok(WeightTable {
            x_vars,
            values,
            max,
        })
    }

    pub fn domain_bits(&self) -> u32 {
        self.x_vars.len() as u32
    }

    pub fn value(&self, assignment: usize) -> &BigRational {
        &self.values[assignment]
    }

    pub fn max_value(&self) -> &BigRational {
        &self.max
    }

    pub fn weight_sum(&self) -> BigRational {
        self.values.iter().sum()
    }

    /// Is `y_i` (1-based bit position) forced to zero for assignment `a`?
    /// True exactly when `w(a)/M <= 2^(i-1)/2^l`, compared exactly.
    pub fn forces_zero(&self, assignment: usize, i: u32, l: u32) -> bool {
        // w * 2^l <= M * 2^(i-1)
        let lhs = self.value(assignment) * BigRational::from(BigInt::from(1u8) << l);
        let rhs = &self.max * BigRational::from(BigInt::from(1u8) << (i - 1));
        lhs <= rhs
    }

    /// Two-column ingest: each nonempty line holds the assignment bits
    /// (LSB first) and a decimal weight. Variables default to `1..=n_w`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, BigRational)> = Vec::new();
        let mut width: Option<usize> = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let bits = parts.next().ok_or_else(|| Error::Parse(line.into()))?;
            let value = parts.next().ok_or_else(|| Error::Parse(line.into()))?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("trailing tokens in {line:?}")));
            }
            match width {
                None => width = Some(bits.len()),
                Some(w) if w != bits.len() => {
                    return Err(Error::Parse("inconsistent assignment widths".into()))
                }
                _ => {}
            }
            let mut index = 0usize;
            for (j, ch) in bits.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => index |= 1 << j,
                    _ => return Err(Error::Parse(format!("bad assignment bits {bits:?}"))),
                }
            }
            rows.push((index, parse_decimal(value)?));
        }
        let width = width.ok_or_else(|| Error::Parse("empty weight table".into()))?;
        let mut values = vec![None; 1 << width];
        for (index, v) in rows {
            if values[index].replace(v).is_some() {
                return Err(Error::Parse(format!("duplicate assignment {index}")));
            }
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("incomplete weight table".into()))?;
        let x_vars = (1..=width as u32).map(Var).collect();
        WeightTable::new(x_vars, values)
    }
}

/// The embedded indicator: a circuit over the table's `x` variables plus
/// `l`-wide `y` blocks, one per factor.
#[derive(Debug, Clone)]
pub struct DiscretizedIndicator {
    pub l: u32,
    pub circuit: Circuit,
    /// `y` variables per factor, in factor order.
    pub y_blocks: Vec<Vec<Var>>,
}

impl DiscretizedIndicator {
    /// All `y` variables across factors.
    pub fn y_vars(&self) -> Vec<Var> {
        self.y_blocks.iter().flatten().copied().collect()
    }
}

fn minterm(c: &mut Circuit, vars: &[Var], assignment: usize) -> NodeId {
    let nodes: Vec<NodeId> = vars
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let inp = c.input(v);
            if assignment >> j & 1 == 1 {
                inp
            } else {
                c.not(inp)
            }
        })
        .collect();
    c.and(nodes)
}

fn factor_constraints(
    c: &mut Circuit,
    table: &WeightTable,
    y_vars: &[Var],
    l: u32,
    out: &mut Vec<NodeId>,
) {
    for a in 0..1usize << table.domain_bits() {
        let forced: Vec<u32> = (1..=l).filter(|&i| table.forces_zero(a, i, l)).collect();
        if forced.is_empty() {
            continue;
        }
        let mt = minterm(c, &table.x_vars, a);
        let zeros: Vec<NodeId> = forced
            .iter()
            .map(|&i| {
                let y = c.input(y_vars[(i - 1) as usize]);
                c.not(y)
            })
            .collect();
        let all_zero = c.and(zeros);
        out.push(c.implies(mt, all_zero));
    }
}

/// Embed one weight table. The `y` block is allocated directly after the
/// table's highest variable.
pub fn embed_weight(table: &WeightTable, l: u32) -> Result<DiscretizedIndicator> {
    assert!(l >= 1, "need at least one discretization bit");
    embed_product(std::slice::from_ref(table), l)
}

/// Embed a product of weight tables over disjoint variable blocks: each
/// factor gets its own independent `y` block and the indicators conjoin.
pub fn embed_product(factors: &[WeightTable], l: u32) -> Result<DiscretizedIndicator> {
    assert!(l >= 1, "need at least one discretization bit");
    if factors.is_empty() {
        return Err(Error::InvalidInstance("no factors to embed".into()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut top = 0u32;
    for f in factors {
        for &v in &f.x_vars {
            if !seen.insert(v) {
                return Err(Error::OverlappingDomains);
            }
            top = top.max(v.index());
        }
    }
    let mut y_blocks = Vec::with_capacity(factors.len());
    let mut next = top + 1;
    for _ in factors {
        y_blocks.push((next..next + l).map(Var).collect::<Vec<_>>());
        next += l;
    }
    let mut c = Circuit::new();
    let mut constraints = Vec::new();
    for (f, y) in factors.iter().zip(&y_blocks) {
        factor_constraints(&mut c, f, y, l, &mut constraints);
    }
    let out = c.and(constraints);
    c.set_output(out);
    Ok(DiscretizedIndicator {
        l,
        circuit: c,
        y_blocks,
    })
}
