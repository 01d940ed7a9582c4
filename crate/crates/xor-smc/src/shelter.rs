//! Emergency shelter placement: choose at most `m` shelter nodes so that
//! every residential node has many evacuation routes.
//!
//! Each residential node gets one counting term whose models are exactly
//! the simple directed paths from it to any selected shelter. A path is a
//! unit flow (per-node in/out degree at most one) plus binary position
//! labels that increase by one along flow edges; the labels rule out the
//! disjoint cycles a bare flow encoding would admit, and off-path nodes
//! carry a canonical all-zero label, so models and paths are in bijection.

use rand::Rng;

use crate::circuit::{Circuit, NodeId};
use crate::error::{Error, Result};
use crate::formula::Var;
use crate::oracle::{count_exact_capped, term_formula_with_x_fixed, OracleConfig};
use crate::smc::{maximize_threshold, CountingTerm, Decision, SmcInstance, SolveParams, ThresholdSearch};

/// A directed road network with residential nodes and a shelter budget.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    pub num_nodes: u32,
    pub edges: Vec<(u32, u32)>,
    pub residential: Vec<u32>,
    pub shelter_budget: u32,
}

impl RoadGraph {
    pub fn new(
        num_nodes: u32,
        edges: Vec<(u32, u32)>,
        residential: Vec<u32>,
        shelter_budget: u32,
    ) -> Result<Self> {
        if residential.is_empty() {
            return Err(Error::InvalidInstance("no residential nodes".into()));
        }
        if shelter_budget == 0 {
            return Err(Error::InvalidInstance("shelter budget must be >= 1".into()));
        }
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::InvalidInstance(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidInstance(format!(
                    "edge ({u}, {v}) references a node >= {num_nodes}"
                )));
            }
        }
        let mut res = residential.clone();
        res.sort_unstable();
        res.dedup();
        if res.len() != residential.len() {
            return Err(Error::InvalidInstance("duplicate residential node".into()));
        }
        if let Some(&r) = res.iter().find(|&&r| r >= num_nodes) {
            return Err(Error::InvalidInstance(format!(
                "residential node {r} out of range"
            )));
        }
        Ok(RoadGraph {
            num_nodes,
            edges,
            residential: res,
            shelter_budget,
        })
    }

    pub fn is_residential(&self, v: u32) -> bool {
        self.residential.binary_search(&v).is_ok()
    }

    fn successors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.edges
            .iter()
            .filter(move |&&(u, _)| u == v)
            .map(|&(_, w)| w)
    }

    /// Ingest from a header + edge-list text:
    /// `nodes N`, `m M`, `residential a b c`, then one `u v` line per edge.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut num_nodes = None;
        let mut m = None;
        let mut residential = Vec::new();
        let mut edges = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            let parse =
                |t: &str| -> Result<u32> { t.parse().map_err(|_| Error::Parse(line.into())) };
            match head {
                "nodes" => num_nodes = Some(parse(parts.next().ok_or_else(|| Error::Parse(line.into()))?)?),
                "m" => m = Some(parse(parts.next().ok_or_else(|| Error::Parse(line.into()))?)?),
                "residential" => {
                    for t in parts {
                        residential.push(parse(t)?);
                    }
                    continue;
                }
                u => {
                    let v = parts.next().ok_or_else(|| Error::Parse(line.into()))?;
                    edges.push((parse(u)?, parse(v)?));
                }
            }
            if parts.next().is_some() {
                return Err(Error::Parse(format!("trailing tokens in {line:?}")));
            }
        }
        let num_nodes = num_nodes.ok_or_else(|| Error::Parse("missing 'nodes' header".into()))?;
        let m = m.ok_or_else(|| Error::Parse("missing 'm' header".into()))?;
        RoadGraph::new(num_nodes, edges, residential, m)
    }

    /// Ingest from a node CSV (`id,residential` with a header row) and an
    /// edge CSV (`from,to` with a header row).
    pub fn from_csv(nodes_csv: &str, edges_csv: &str, shelter_budget: u32) -> Result<Self> {
        let mut num_nodes = 0u32;
        let mut residential = Vec::new();
        for (i, line) in nodes_csv.lines().enumerate() {
            let line = line.trim();
            if i == 0 || line.is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let id: u32 = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("node row {line:?}")))?;
            let flag = cells
                .next()
                .map(|c| c.trim())
                .ok_or_else(|| Error::Parse(format!("node row {line:?}")))?;
            num_nodes = num_nodes.max(id + 1);
            if flag == "1" || flag.eq_ignore_ascii_case("true") {
                residential.push(id);
            }
        }
        let mut edges = Vec::new();
        for (i, line) in edges_csv.lines().enumerate() {
            let line = line.trim();
            if i == 0 || line.is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let mut cell = || -> Result<u32> {
                cells
                    .next()
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("edge row {line:?}")))
            };
            edges.push((cell()?, cell()?));
        }
        RoadGraph::new(num_nodes, edges, residential, shelter_budget)
    }
}

/// Number of simple directed paths `u -> v` with at least one edge.
pub fn count_paths_exact(graph: &RoadGraph, u: u32, v: u32) -> u64 {
    if u == v {
        return 0;
    }
    let mut visited = vec![false; graph.num_nodes as usize];
    visited[u as usize] = true;
    dfs_paths(graph, u, v, &mut visited)
}

fn dfs_paths(graph: &RoadGraph, at: u32, target: u32, visited: &mut Vec<bool>) -> u64 {
    let mut total = 0;
    for next in graph.successors(at).collect::<Vec<_>>() {
        if next == target {
            total += 1;
            continue;
        }
        if !visited[next as usize] {
            visited[next as usize] = true;
            total += dfs_paths(graph, next, target, visited);
            visited[next as usize] = false;
        }
    }
    total
}

/// The paper's evaluation metric: total path count from every residential
/// node to every shelter.
pub fn evaluate_assignment(graph: &RoadGraph, shelters: &[u32]) -> u64 {
    graph
        .residential
        .iter()
        .map(|&r| {
            shelters
                .iter()
                .map(|&s| count_paths_exact(graph, r, s))
                .sum::<u64>()
        })
        .sum()
}

/// The shelter problem compiled to an SMC instance: `x` is one shelter bit
/// per node, and term `i` counts evacuation paths for `residential[i]`.
#[derive(Debug, Clone)]
pub struct ShelterEncoding {
    pub instance: SmcInstance,
    /// Bits per position label.
    pub pos_width: u32,
}

impl ShelterEncoding {
    /// Exact model count of one term's `y` group with the shelter set
    /// fixed, via the projected enumerator.
    pub fn term_count(&self, term_idx: usize, shelters: &[u32]) -> Result<u64> {
        let x: Vec<bool> = (0..self.instance.n)
            .map(|v| shelters.contains(&v))
            .collect();
        let (cnf, y) = term_formula_with_x_fixed(&self.instance, term_idx, &x)?;
        count_exact_capped(&cnf, &y, 128)
    }
}

/// Build the per-residential path-counting term for node `r`.
fn path_term(graph: &RoadGraph, r: u32, pos_width: u32, q: u32) -> CountingTerm {
    let n = graph.num_nodes;
    let m_edges = graph.edges.len() as u32;
    let w = pos_width;
    // y layout: flow bit per edge, then w position bits per node
    let flow_var = |e: u32| Var(n + 1 + e);
    let pos_var = |v: u32, bit: u32| Var(n + 1 + m_edges + v * w + bit);

    let mut c = Circuit::new();
    let flows: Vec<NodeId> = (0..m_edges).map(|e| c.input(flow_var(e))).collect();
    let pos: Vec<Vec<NodeId>> = (0..n)
        .map(|v| (0..w).map(|j| c.input(pos_var(v, j))).collect())
        .collect();

    let in_edges = |v: u32| -> Vec<usize> {
        graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(_, t))| t == v)
            .map(|(e, _)| e)
            .collect()
    };
    let out_edges = |v: u32| -> Vec<usize> {
        graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(s, _))| s == v)
            .map(|(e, _)| e)
            .collect()
    };

    let mut constraints = Vec::new();
    let mut in_node = Vec::with_capacity(n as usize);
    let mut out_node = Vec::with_capacity(n as usize);
    for v in 0..n {
        let ins: Vec<NodeId> = in_edges(v).iter().map(|&e| flows[e]).collect();
        let outs: Vec<NodeId> = out_edges(v).iter().map(|&e| flows[e]).collect();
        constraints.push(c.at_most(&ins, 1));
        constraints.push(c.at_most(&outs, 1));
        in_node.push(c.or(ins));
        out_node.push(c.or(outs));
    }

    // source: exactly one edge out, none in
    constraints.push(c.at_least(
        &out_edges(r).iter().map(|&e| flows[e]).collect::<Vec<_>>(),
        1,
    ));
    let no_in = c.not(in_node[r as usize]);
    constraints.push(no_in);

    for v in 0..n {
        if v == r {
            continue;
        }
        // conservation: leaving a node requires entering it
        constraints.push(c.implies(out_node[v as usize], in_node[v as usize]));
        // the sink (entered, not left) must be a shelter
        let not_out = c.not(out_node[v as usize]);
        let sink = c.and([in_node[v as usize], not_out]);
        let x_v = c.input(Var(v + 1));
        constraints.push(c.implies(sink, x_v));
    }

    // position labels: source at zero, off-path nodes at zero, +1 per edge
    for j in 0..w {
        let z = c.not(pos[r as usize][j as usize]);
        constraints.push(z);
    }
    for v in 0..n {
        if v == r {
            continue;
        }
        let zeros: Vec<NodeId> = (0..w)
            .map(|j| c.not(pos[v as usize][j as usize]))
            .collect();
        let all_zero = c.and(zeros);
        let off_path = c.not(in_node[v as usize]);
        constraints.push(c.implies(off_path, all_zero));
    }
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        let inc = c.increment(&pos[u as usize].clone());
        let eq = c.bits_equal(&pos[v as usize].clone(), &inc);
        constraints.push(c.implies(flows[e], eq));
    }

    let out = c.and(constraints);
    c.set_output(out);
    let y_size = m_edges + n * w;
    CountingTerm::new(c, y_size, q)
}

/// Compile a road graph with per-residential threshold exponents.
pub fn encode_shelter(graph: &RoadGraph, q: &[u32]) -> Result<ShelterEncoding> {
    if q.len() != graph.residential.len() {
        return Err(Error::InvalidInstance(format!(
            "{} thresholds for {} residential nodes",
            q.len(),
            graph.residential.len()
        )));
    }
    let n = graph.num_nodes;
    let k = graph.residential.len() as u32;
    // 2^w must exceed any cycle length, so labels can never close a loop
    let pos_width = 32 - n.leading_zeros();

    let mut phi = Circuit::new();
    let x_nodes: Vec<NodeId> = (1..=n).map(|v| phi.input(Var(v))).collect();
    let mut conj = vec![phi.at_most(&x_nodes, graph.shelter_budget)];
    for &r in &graph.residential {
        let node = x_nodes[r as usize];
        conj.push(phi.not(node));
    }
    for i in 0..k {
        conj.push(phi.input(Var(n + 1 + i)));
    }
    let out = phi.and(conj);
    phi.set_output(out);

    let terms = graph
        .residential
        .iter()
        .zip(q)
        .map(|(&r, &qr)| path_term(graph, r, pos_width, qr))
        .collect();
    let instance = SmcInstance::new(n, phi, terms)?;
    Ok(ShelterEncoding {
        instance,
        pos_width,
    })
}

/// Per-start hill climb on the exact path-count heuristic, repeated `m`
/// times. At desk scale the heuristic is exact rather than sampled.
pub fn local_search_baseline(graph: &RoadGraph, m: u32, rng: &mut impl Rng) -> Vec<u32> {
    let h = |v: u32| -> u64 {
        graph
            .residential
            .iter()
            .map(|&r| count_paths_exact(graph, r, v))
            .sum()
    };
    let candidates: Vec<u32> = (0..graph.num_nodes)
        .filter(|&v| !graph.is_residential(v))
        .collect();
    let mut chosen: Vec<u32> = Vec::new();
    for _ in 0..m {
        let open: Vec<u32> = candidates
            .iter()
            .copied()
            .filter(|v| !chosen.contains(v))
            .collect();
        if open.is_empty() {
            break;
        }
        let mut at = open[rng.gen_range(0..open.len())];
        loop {
            // undirected neighborhood, restricted to unchosen candidates
            let neighbors: Vec<u32> = graph
                .edges
                .iter()
                .filter_map(|&(u, v)| {
                    if u == at {
                        Some(v)
                    } else if v == at {
                        Some(u)
                    } else {
                        None
                    }
                })
                .filter(|v| open.contains(v))
                .collect();
            let best = neighbors.into_iter().max_by_key(|&v| h(v));
            match best {
                Some(v) if h(v) > h(at) => at = v,
                _ => break,
            }
        }
        chosen.push(at);
    }
    chosen.sort_unstable();
    chosen
}

/// Greedy set-level polish: swap or add shelters while the exact metric
/// strictly improves. Used on the solver's witness, which certifies the
/// threshold but need not be the metric-best placement at that threshold.
pub fn improve_placement(graph: &RoadGraph, start: Vec<u32>) -> Vec<u32> {
    let candidates: Vec<u32> = (0..graph.num_nodes)
        .filter(|&v| !graph.is_residential(v))
        .collect();
    let m = graph.shelter_budget as usize;
    let mut chosen = start;
    let mut score = evaluate_assignment(graph, &chosen);
    loop {
        let mut best: Option<(Vec<u32>, u64)> = None;
        let consider = |set: Vec<u32>, best: &mut Option<(Vec<u32>, u64)>| {
            let s = evaluate_assignment(graph, &set);
            if s > best.as_ref().map_or(score, |(_, b)| *b) {
                *best = Some((set, s));
            }
        };
        if chosen.len() < m {
            for &v in &candidates {
                if !chosen.contains(&v) {
                    let mut set = chosen.clone();
                    set.push(v);
                    consider(set, &mut best);
                }
            }
        }
        for i in 0..chosen.len() {
            for &v in &candidates {
                if !chosen.contains(&v) {
                    let mut set = chosen.clone();
                    set[i] = v;
                    consider(set, &mut best);
                }
            }
        }
        match best {
            Some((set, s)) => {
                chosen = set;
                score = s;
            }
            None => break,
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Outcome of the full shelter pipeline.
#[derive(Debug, Clone)]
pub enum ShelterOutcome {
    Solved(ShelterSolution),
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct ShelterSolution {
    pub shelters: Vec<u32>,
    pub achieved_q: u32,
    pub num_paths: u64,
    pub decision: Decision,
}

/// Search the largest uniform threshold exponent for which the placement
/// problem is decided true, and report the witness placement.
pub fn solve_shelter(
    graph: &RoadGraph,
    params: &SolveParams,
    oracle: &OracleConfig,
    jobs: usize,
) -> Result<ShelterOutcome> {
    let q_hi = graph.edges.len() as u32;
    let build = |q: u32| {
        let qs = vec![q; graph.residential.len()];
        Ok(encode_shelter(graph, &qs)?.instance)
    };
    match maximize_threshold(build, 0, q_hi, params, oracle, jobs)? {
        ThresholdSearch::Infeasible { .. } => Ok(ShelterOutcome::Infeasible),
        ThresholdSearch::Found { q, decision } => {
            let (x, _) = decision.witness.clone().expect("true decision has witness");
            let witness: Vec<u32> = (0..graph.num_nodes)
                .filter(|&v| x[v as usize])
                .collect();
            let shelters = improve_placement(graph, witness);
            let num_paths = evaluate_assignment(graph, &shelters);
            Ok(ShelterOutcome::Solved(ShelterSolution {
                shelters,
                achieved_q: q,
                num_paths,
                decision,
            }))
        }
    }
}
