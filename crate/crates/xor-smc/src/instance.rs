//! JSON instance files: the generic on-disk form of an SMC problem.
//!
//! Schema:
//! ```json
//! {
//!   "n": 2,
//!   "phi": { "cnf": [[1, -3]] },
//!   "terms": [
//!     { "y_size": 3, "q": 1, "f": { "cnf": [[3, 4]] } },
//!     { "y_size": 2, "threshold": 3, "f": { "dimacs": "p cnf 4 1\n3 4 0\n" } }
//!   ],
//!   "params": { "eta": 0.2, "c": 2, "T": 2, "seed": 7 }
//! }
//! ```
//! Formula bodies are clause lists over the instance's variable numbering
//! (`phi`: x then b; term `f`: x then its own y), inline DIMACS text, or a
//! DIMACS file path resolved against the instance file's directory.
//! `threshold` takes a non-power-of-two count and rounds down to
//! `q = floor(log2(threshold))`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_from_clauses, Circuit};
use crate::error::{Error, Result};
use crate::formula::{CnfFormula, Lit};
use crate::smc::{CountingTerm, SmcInstance, SolveParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: u32,
    pub phi: CircuitSpec,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub params: Option<ParamsSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub y_size: u32,
    #[serde(default)]
    pub q: Option<u32>,
    /// Raw count threshold; rounded down to a power-of-two exponent.
    #[serde(default)]
    pub threshold: Option<u64>,
    pub f: CircuitSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitSpec {
    Cnf { cnf: Vec<Vec<i64>> },
    Dimacs { dimacs: String },
    DimacsFile { dimacs_file: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub c: Option<u32>,
    #[serde(rename = "T", default)]
    pub t: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ParamsSpec {
    pub fn into_params(self) -> SolveParams {
        let defaults = SolveParams::default();
        SolveParams {
            eta: self.eta.unwrap_or(defaults.eta),
            c: self.c.unwrap_or(defaults.c),
            t_override: self.t,
            seed: self.seed.unwrap_or(defaults.seed),
        }
    }
}

fn clauses_to_circuit(clauses: &[Vec<i64>]) -> Result<Circuit> {
    let lits: Vec<Vec<Lit>> = clauses
        .iter()
        .map(|cl| cl.iter().map(|&code| Lit::from_dimacs(code)).collect())
        .collect::<Result<_>>()?;
    Ok(circuit_from_clauses(&lits))
}

impl CircuitSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Circuit> {
        match self {
            CircuitSpec::Cnf { cnf } => clauses_to_circuit(cnf),
            CircuitSpec::Dimacs { dimacs } => {
                let f = CnfFormula::from_dimacs(dimacs)?;
                Ok(circuit_from_clauses(f.clauses()))
            }
            CircuitSpec::DimacsFile { dimacs_file } => {
                let path = base_dir.join(dimacs_file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Parse(format!("reading {}: {e}", path.display())))?;
                let f = CnfFormula::from_dimacs(&text)?;
                Ok(circuit_from_clauses(f.clauses()))
            }
        }
    }
}

impl TermSpec {
    fn exponent(&self) -> Result<u32> {
        match (self.q, self.threshold) {
            (Some(q), None) => Ok(q),
            (None, Some(0)) => Err(Error::Parse("threshold must be >= 1".into())),
            (None, Some(t)) => Ok(63 - t.leading_zeros()),
            (Some(_), Some(_)) => Err(Error::Parse(
                "give either q or threshold, not both".into(),
            )),
            (None, None) => Err(Error::Parse("term needs q or threshold".into())),
        }
    }
}

/// Parse instance JSON; `base_dir` anchors relative DIMACS file paths.
pub fn parse_instance(text: &str, base_dir: &Path) -> Result<(SmcInstance, SolveParams)> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance JSON: {e}")))?;
    let phi = file.phi.build(base_dir)?;
    let mut terms = Vec::with_capacity(file.terms.len());
    for t in &file.terms {
        terms.push(CountingTerm::new(t.f.build(base_dir)?, t.y_size, t.exponent()?));
    }
    let instance = SmcInstance::new(file.n, phi, terms)?;
    let params = file.params.unwrap_or_default().into_params();
    Ok((instance, params))
}

/// Read and parse an instance file.
pub fn load_instance(path: &Path) -> Result<(SmcInstance, SolveParams)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("reading {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_instance(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_instance_parses() {
        let text = r#"{
            "n": 1,
            "phi": { "cnf": [[1], [2]] },
            "terms": [ { "y_size": 2, "q": 1, "f": { "cnf": [[2, 3]] } } ],
            "params": { "T": 2, "seed": 9 }
        }"#;
        let (inst, params) = parse_instance(text, Path::new(".")).unwrap();
        assert_eq!(inst.n, 1);
        assert_eq!(inst.k(), 1);
        assert_eq!(inst.terms[0].q, 1);
        assert_eq!(params.t_override, Some(2));
        assert_eq!(params.seed, 9);
        assert!(inst.eval_phi(&[true], &[true]));
        assert!(!inst.eval_phi(&[false], &[true]));
    }

    #[test]
    fn threshold_rounds_down() {
        let text = r#"{
            "n": 0,
            "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 3, "threshold": 5, "f": { "cnf": [[1, 2]] } } ]
        }"#;
        let (inst, _) = parse_instance(text, Path::new(".")).unwrap();
        assert_eq!(inst.terms[0].q, 2); // floor(log2 5)
    }

    #[test]
    fn inline_dimacs_body() {
        let text = r#"{
            "n": 0,
            "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 2, "q": 0,
                         "f": { "dimacs": "p cnf 2 1\n1 -2 0\n" } } ]
        }"#;
        let (inst, _) = parse_instance(text, Path::new(".")).unwrap();
        let count = crate::oracle::count_term_models(&inst, 0, &[]).unwrap();
        assert_eq!(count, 3); // models of (y1 | !y2)
    }

    #[test]
    fn dimacs_file_reference() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("body.cnf"), "p cnf 2 1\n1 2 0\n").unwrap();
        let text = r#"{
            "n": 0,
            "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 2, "q": 0, "f": { "dimacs_file": "body.cnf" } } ]
        }"#;
        let (inst, _) = parse_instance(text, dir.path()).unwrap();
        assert_eq!(crate::oracle::count_term_models(&inst, 0, &[]).unwrap(), 3);
    }

    #[test]
    fn rejects_bad_specs() {
        let both = r#"{
            "n": 0, "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 2, "q": 1, "threshold": 4, "f": { "cnf": [[1]] } } ]
        }"#;
        assert!(parse_instance(both, Path::new(".")).is_err());
        let neither = r#"{
            "n": 0, "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 2, "f": { "cnf": [[1]] } } ]
        }"#;
        assert!(parse_instance(neither, Path::new(".")).is_err());
        let over = r#"{
            "n": 0, "phi": { "cnf": [[1]] },
            "terms": [ { "y_size": 2, "q": 5, "f": { "cnf": [[1]] } } ]
        }"#;
        assert!(parse_instance(over, Path::new(".")).is_err());
        assert!(parse_instance("{", Path::new(".")).is_err());
    }
}
