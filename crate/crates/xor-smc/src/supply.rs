//! Robust supply-chain design: pick trades under per-buyer budgets so the
//! expected surviving capacity clears a threshold despite stochastic
//! disruption events.
//!
//! Each demanded (buyer, material) pair becomes one counting term: the `y`
//! block holds a one-hot supplier selector, the event scenario bits, and
//! the discretization bits for the event probabilities and the capacity
//! table. A model exists per (scenario, supplier) pair whose trade
//! survives, replicated by the free discretization bits, so the model
//! count is a scaled stand-in for the expectation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::circuit::{Circuit, NodeId};
use crate::discretize::{embed_product, WeightTable};
use crate::encode::pb_leq_node;
use crate::error::{Error, Result};
use crate::formula::Var;
use crate::oracle::OracleConfig;
use crate::smc::{
    maximize_threshold, CountingTerm, Decision, SmcInstance, SolveParams, ThresholdSearch,
};

/// One potential trade from a supplier to a buyer.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TradeEdge {
    pub supplier: u32,
    pub buyer: u32,
    pub cost: u64,
    pub capacity: u64,
}

/// One demanded (buyer, material) pair with its expectation threshold
/// exponent: the buyer wants expected surviving capacity >= 2^q.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Demand {
    pub buyer: u32,
    pub material: u32,
    pub q: u32,
}

/// A tiered trade network.
#[derive(Debug, Clone)]
pub struct SupplyNetwork {
    pub num_nodes: u32,
    /// Tier label per node (0 = rawest suppliers upward).
    pub tiers: Vec<u32>,
    pub edges: Vec<TradeEdge>,
    /// Budget per node; nodes that buy nothing may carry 0.
    pub budgets: Vec<u64>,
    /// Producer node sets per material id.
    pub producers: Vec<Vec<u32>>,
    pub demands: Vec<Demand>,
}

impl SupplyNetwork {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.len() != self.num_nodes as usize
            || self.budgets.len() != self.num_nodes as usize
        {
            return Err(Error::InvalidInstance(
                "tier/budget vectors must cover every node".into(),
            ));
        }
        for e in &self.edges {
            if e.supplier >= self.num_nodes || e.buyer >= self.num_nodes {
                return Err(Error::InvalidInstance(format!(
                    "edge {}->{} references a node >= {}",
                    e.supplier, e.buyer, self.num_nodes
                )));
            }
        }
        for d in &self.demands {
            let producers = self
                .producers
                .get(d.material as usize)
                .ok_or_else(|| Error::InvalidInstance(format!("unknown material {}", d.material)))?;
            if self.candidate_edges(d).is_empty() {
                return Err(Error::InvalidInstance(format!(
                    "no producer of material {} trades with buyer {}",
                    d.material, d.buyer
                )));
            }
            let _ = producers;
        }
        Ok(())
    }

    /// Edge indexes that could serve a demand: producer-side suppliers
    /// with a trade edge into the demanding buyer.
    pub fn candidate_edges(&self, demand: &Demand) -> Vec<usize> {
        let producers = match self.producers.get(demand.material as usize) {
            Some(p) => p,
            None => return Vec::new(),
        };
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.buyer == demand.buyer && producers.contains(&e.supplier))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Independent Bernoulli disruption events; each occurring event destroys
/// a fixed set of trade edges.
#[derive(Debug, Clone)]
pub struct EventModel {
    pub events: Vec<DisruptionEvent>,
}

#[derive(Debug, Clone)]
pub struct DisruptionEvent {
    pub probability: BigRational,
    pub destroys: Vec<usize>,
}

impl EventModel {
    pub fn validate(&self, num_edges: usize) -> Result<()> {
        for ev in &self.events {
            if ev.probability.is_negative() || ev.probability > BigRational::one() {
                return Err(Error::InvalidInstance(
                    "event probability outside [0, 1]".into(),
                ));
            }
            if ev.destroys.iter().any(|&e| e >= num_edges) {
                return Err(Error::InvalidInstance(
                    "event destroys an unknown edge".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Probability of one full scenario (bit l = event l occurs).
    pub fn scenario_probability(&self, theta: u32) -> BigRational {
        self.events
            .iter()
            .enumerate()
            .map(|(l, ev)| {
                if theta >> l & 1 == 1 {
                    ev.probability.clone()
                } else {
                    BigRational::one() - &ev.probability
                }
            })
            .product()
    }
}

/// A chosen set of trades, one bit per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingPlan {
    pub selected: Vec<bool>,
}

impl TradingPlan {
    pub fn empty(num_edges: usize) -> Self {
        TradingPlan {
            selected: vec![false; num_edges],
        }
    }

    pub fn respects_budgets(&self, network: &SupplyNetwork) -> bool {
        let mut spent = vec![0u64; network.num_nodes as usize];
        for (i, e) in network.edges.iter().enumerate() {
            if self.selected[i] {
                spent[e.buyer as usize] += e.cost;
            }
        }
        spent
            .iter()
            .zip(&network.budgets)
            .all(|(s, b)| s <= b)
    }
}

/// Does the trade on `edge` go through under scenario `theta`?
pub fn trade_survives(
    plan: &TradingPlan,
    edge: usize,
    theta: &[bool],
    events: &EventModel,
) -> bool {
    plan.selected[edge]
        && !events
            .events
            .iter()
            .zip(theta)
            .any(|(ev, &occurs)| occurs && ev.destroys.contains(&edge))
}

/// Exact expected total surviving capacity of a plan, by enumerating all
/// 2^L scenarios.
pub fn evaluate_plan(
    network: &SupplyNetwork,
    events: &EventModel,
    plan: &TradingPlan,
) -> Result<BigRational> {
    let l = events.len();
    if l > 20 {
        return Err(Error::EnumerationCap {
            requested: l as u32,
            cap: 20,
        });
    }
    let mut total = BigRational::zero();
    for theta_bits in 0u32..1 << l {
        let theta: Vec<bool> = (0..l).map(|j| theta_bits >> j & 1 == 1).collect();
        let p = events.scenario_probability(theta_bits);
        if p.is_zero() {
            continue;
        }
        let surviving: u64 = network
            .edges
            .iter()
            .enumerate()
            .filter(|&(e, _)| trade_survives(plan, e, &theta, events))
            .map(|(_, e)| e.capacity)
            .sum();
        total += p * BigRational::from(BigInt::from(surviving));
    }
    Ok(total)
}

/// Scaling record for one encoded term: the count-to-expectation factor
/// and the threshold conversion it induced.
#[derive(Debug, Clone)]
pub struct TermScale {
    pub demand: Demand,
    /// Multiply the term's model count by this to approximate the
    /// expectation contribution.
    pub scale: BigRational,
    pub q_requested: u32,
    pub q_effective: u32,
}

/// The compiled instance plus the per-term scaling ledger.
#[derive(Debug, Clone)]
pub struct SupplyEncoding {
    pub instance: SmcInstance,
    pub ledger: Vec<TermScale>,
    pub l: u32,
}

fn big_pow2(e: u32) -> BigRational {
    BigRational::from(BigInt::from(1u8) << e)
}

/// Build one demand's counting term. Returns the circuit, the `y` width,
/// and the count scale factor.
fn demand_term(
    network: &SupplyNetwork,
    events: &EventModel,
    demand: &Demand,
    l: u32,
) -> Result<(Circuit, u32, BigRational)> {
    let n_x = network.edges.len() as u32;
    let candidates = network.candidate_edges(demand);
    let s = candidates.len() as u32;
    let n_events = events.len() as u32;

    // y layout: selector one-hot, event bits, then one l-wide block per
    // event table and one for the capacity table (allocated by the
    // product embedder right after the last event bit).
    let sel_var = |j: u32| Var(n_x + 1 + j);
    let theta_var = |j: u32| Var(n_x + 1 + s + j);
    let y_size = s + n_events + (n_events + 1) * l;

    let mut factors: Vec<WeightTable> = Vec::with_capacity(n_events as usize + 1);
    for (j, ev) in events.events.iter().enumerate() {
        let p = ev.probability.clone();
        factors.push(WeightTable::new(
            vec![theta_var(j as u32)],
            vec![BigRational::one() - &p, p],
        )?);
    }
    // capacity over the selector bits; non-one-hot rows carry weight 0
    let mut cap_values = vec![BigRational::zero(); 1 << s];
    for (j, &e) in candidates.iter().enumerate() {
        cap_values[1 << j] = BigRational::from(BigInt::from(network.edges[e].capacity));
    }
    factors.push(WeightTable::new(
        (0..s).map(sel_var).collect(),
        cap_values,
    )?);

    let indicator = embed_product(&factors, l)?;
    let scale = factors
        .iter()
        .map(|f| f.max_value() / big_pow2(l))
        .product::<BigRational>();

    let mut c = Circuit::new();
    let sel: Vec<NodeId> = (0..s).map(|j| c.input(sel_var(j))).collect();
    let mut conj = vec![c.exactly_one(&sel)];
    for (j, &e) in candidates.iter().enumerate() {
        // choosing supplier j requires the trade selected and unbroken
        let x_e = c.input(Var(e as u32 + 1));
        let mut survive = vec![x_e];
        for (ev_idx, ev) in events.events.iter().enumerate() {
            if ev.destroys.contains(&e) {
                let th = c.input(theta_var(ev_idx as u32));
                survive.push(c.not(th));
            }
        }
        let ok = c.and(survive);
        conj.push(c.implies(sel[j], ok));
    }
    conj.push(c.append(&indicator.circuit));
    let out = c.and(conj);
    c.set_output(out);
    Ok((c, y_size, scale))
}

/// Compile a network + event model into an SMC instance. Thresholds are
/// given in expectation space (>= 2^q) and converted to count space
/// through each term's scale factor.
pub fn encode_supply(
    network: &SupplyNetwork,
    events: &EventModel,
    l: u32,
) -> Result<SupplyEncoding> {
    assert!(l >= 1, "need at least one discretization bit");
    network.validate()?;
    events.validate(network.edges.len())?;
    let n_x = network.edges.len() as u32;
    let k = network.demands.len() as u32;
    if k == 0 {
        return Err(Error::InvalidInstance("no demands".into()));
    }

    let mut phi = Circuit::new();
    let x_nodes: Vec<NodeId> = (1..=n_x).map(|e| phi.input(Var(e))).collect();
    let mut conj = Vec::new();
    for v in 0..network.num_nodes {
        let terms: Vec<(u64, NodeId)> = network
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.buyer == v)
            .map(|(i, e)| (e.cost, x_nodes[i]))
            .collect();
        if !terms.is_empty() {
            conj.push(pb_leq_node(&mut phi, &terms, network.budgets[v as usize]));
        }
    }
    for i in 0..k {
        conj.push(phi.input(Var(n_x + 1 + i)));
    }
    let out = phi.and(conj);
    phi.set_output(out);

    let mut terms = Vec::with_capacity(k as usize);
    let mut ledger = Vec::with_capacity(k as usize);
    for d in &network.demands {
        let (circuit, y_size, scale) = demand_term(network, events, d, l)?;
        // count >= 2^q / scale, i.e. q_eff = q - log2(scale), floored and
        // clamped at zero
        let shift = scale.to_f64().unwrap_or(f64::MIN_POSITIVE).log2();
        let q_eff_f = (d.q as f64 - shift).floor();
        let q_eff = if q_eff_f < 0.0 { 0 } else { q_eff_f as u32 };
        if q_eff > y_size {
            return Err(Error::ThresholdTooLarge {
                q: q_eff,
                width: y_size,
            });
        }
        ledger.push(TermScale {
            demand: d.clone(),
            scale,
            q_requested: d.q,
            q_effective: q_eff,
        });
        terms.push(CountingTerm::new(circuit, y_size, q_eff));
    }
    let instance = SmcInstance::new(n_x, phi, terms)?;
    Ok(SupplyEncoding {
        instance,
        ledger,
        l,
    })
}

/// Exact two-sided check data for one term: the true expectation
/// contribution and the Lemma's upper bound, both by enumeration over
/// (scenario, candidate) pairs.
pub fn term_bracket(
    network: &SupplyNetwork,
    events: &EventModel,
    demand: &Demand,
    plan: &TradingPlan,
    l: u32,
) -> (BigRational, BigRational) {
    let candidates = network.candidate_edges(demand);
    let n_events = events.len();
    let mut exact = BigRational::zero();
    let mut upper = BigRational::zero();
    for theta_bits in 0u32..1 << n_events {
        let theta: Vec<bool> = (0..n_events).map(|j| theta_bits >> j & 1 == 1).collect();
        for &e in &candidates {
            if !trade_survives(plan, e, &theta, events) {
                continue;
            }
            // exact contribution: P(theta) * capacity
            let mut w_exact = BigRational::from(BigInt::from(network.edges[e].capacity));
            let mut w_upper = BigRational::from(BigInt::from(2u64 * network.edges[e].capacity))
                + big_pow2(0) * max_capacity(network, &candidates) / big_pow2(l);
            for (j, ev) in events.events.iter().enumerate() {
                let p = if theta[j] {
                    ev.probability.clone()
                } else {
                    BigRational::one() - &ev.probability
                };
                w_exact *= &p;
                // per-factor pointwise bound: 2 w + M / 2^l with M = max(p, 1-p)
                let m = std::cmp::max(
                    ev.probability.clone(),
                    BigRational::one() - &ev.probability,
                );
                w_upper *= BigRational::from(BigInt::from(2u8)) * p + m / big_pow2(l);
            }
            exact += w_exact;
            upper += w_upper;
        }
    }
    (exact, upper)
}

fn max_capacity(network: &SupplyNetwork, candidates: &[usize]) -> BigRational {
    let m = candidates
        .iter()
        .map(|&e| network.edges[e].capacity)
        .max()
        .unwrap_or(0);
    BigRational::from(BigInt::from(m))
}

/// Outcome of the full supply pipeline.
#[derive(Debug, Clone)]
pub enum SupplyOutcome {
    Solved(SupplySolution),
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SupplySolution {
    pub plan: TradingPlan,
    /// Count-space exponent reached by the threshold search.
    pub achieved_q: u32,
    pub expectation: BigRational,
    pub decision: Decision,
}

/// Maximize a uniform count-space threshold over all demand terms,
/// extract the plan, verify budgets, and report the exact expectation.
pub fn solve_supply(
    network: &SupplyNetwork,
    events: &EventModel,
    params: &SolveParams,
    oracle: &OracleConfig,
    l: u32,
    jobs: usize,
) -> Result<SupplyOutcome> {
    let base = encode_supply(network, events, l)?;
    let q_hi = base
        .instance
        .terms
        .iter()
        .map(|t| t.y_size)
        .min()
        .unwrap_or(0);
    let build = |q: u32| base.instance.with_uniform_q(q);
    match maximize_threshold(build, 0, q_hi, params, oracle, jobs)? {
        ThresholdSearch::Infeasible { .. } => Ok(SupplyOutcome::Infeasible),
        ThresholdSearch::Found { q, decision } => {
            let (x, _) = decision.witness.clone().expect("true decision has witness");
            let mut plan = TradingPlan { selected: x };
            if !plan.respects_budgets(network) {
                return Err(Error::WitnessInconsistent);
            }
            saturate_budgets(network, &mut plan);
            let expectation = evaluate_plan(network, events, &plan)?;
            Ok(SupplyOutcome::Solved(SupplySolution {
                plan,
                achieved_q: q,
                expectation,
                decision,
            }))
        }
    }
}

/// Add unselected trades into leftover budget, largest capacity first.
/// The expectation is monotone in the selected set, so this never hurts;
/// the witness only certifies the threshold and may leave budget unused.
fn saturate_budgets(network: &SupplyNetwork, plan: &mut TradingPlan) {
    let mut spent = vec![0u64; network.num_nodes as usize];
    for (e, edge) in network.edges.iter().enumerate() {
        if plan.selected[e] {
            spent[edge.buyer as usize] += edge.cost;
        }
    }
    let mut order: Vec<usize> = (0..network.edges.len())
        .filter(|&e| !plan.selected[e])
        .collect();
    order.sort_by_key(|&e| (std::cmp::Reverse(network.edges[e].capacity), network.edges[e].cost));
    for e in order {
        let edge = &network.edges[e];
        if spent[edge.buyer as usize] + edge.cost <= network.budgets[edge.buyer as usize] {
            spent[edge.buyer as usize] += edge.cost;
            plan.selected[e] = true;
        }
    }
}

/// Budget-respecting plan built by a random greedy pass; the comparison
/// baseline for solve_supply.
pub fn random_feasible_plan(network: &SupplyNetwork, rng: &mut impl Rng) -> TradingPlan {
    let mut order: Vec<usize> = (0..network.edges.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut plan = TradingPlan::empty(network.edges.len());
    let mut spent = vec![0u64; network.num_nodes as usize];
    for e in order {
        let edge = &network.edges[e];
        if spent[edge.buyer as usize] + edge.cost <= network.budgets[edge.buyer as usize] {
            spent[edge.buyer as usize] += edge.cost;
            plan.selected[e] = true;
        }
    }
    plan
}

/// Seeded synthetic tiered network: `s` tier-0 suppliers fully wired to
/// `b` tier-1 buyers, Gaussian-derived integer costs and capacities, and
/// random disruption events.
pub fn generate_network(
    rng: &mut impl Rng,
    suppliers: u32,
    buyers: u32,
    num_events: u32,
) -> (SupplyNetwork, EventModel) {
    use rand_distr::{Distribution, Normal};
    let cost_dist = Normal::<f64>::new(5.0, 2.0).unwrap();
    let cap_dist = Normal::<f64>::new(4.0, 2.0).unwrap();
    let n = suppliers + buyers;
    let mut edges = Vec::new();
    for s in 0..suppliers {
        for b in 0..buyers {
            let cost = cost_dist.sample(rng).round().max(1.0) as u64;
            let capacity = cap_dist.sample(rng).round().max(1.0) as u64;
            edges.push(TradeEdge {
                supplier: s,
                buyer: suppliers + b,
                cost,
                capacity,
            });
        }
    }
    let mut budgets = vec![0u64; n as usize];
    for b in 0..buyers {
        // enough for roughly two median trades
        budgets[(suppliers + b) as usize] = 12;
    }
    let demands = (0..buyers)
        .map(|b| Demand {
            buyer: suppliers + b,
            material: 0,
            q: 2,
        })
        .collect();
    let network = SupplyNetwork {
        num_nodes: n,
        tiers: (0..n).map(|v| u32::from(v >= suppliers)).collect(),
        edges: edges.clone(),
        budgets,
        producers: vec![(0..suppliers).collect()],
        demands,
    };
    let events = (0..num_events)
        .map(|_| {
            let tenths = rng.gen_range(1..=5i64);
            let destroys = (0..edges.len()).filter(|_| rng.gen_bool(0.3)).collect();
            DisruptionEvent {
                probability: BigRational::new(BigInt::from(tenths), BigInt::from(10)),
                destroys,
            }
        })
        .collect();
    (network, EventModel { events })
}

/// Structured-text ingest. Line forms:
/// `nodes N`, `tier v t`, `edge s v cost capacity`, `budget v B`,
/// `produces s d`, `demand v d q`, `event p e1 e2 ...`.
pub fn parse_supply(text: &str) -> Result<(SupplyNetwork, EventModel)> {
    let mut num_nodes: Option<u32> = None;
    let mut tiers: Vec<(u32, u32)> = Vec::new();
    let mut edges = Vec::new();
    let mut budgets: Vec<(u32, u64)> = Vec::new();
    let mut produces: Vec<(u32, u32)> = Vec::new();
    let mut demands = Vec::new();
    let mut events = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        let err = || Error::Parse(line.into());
        let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| err()) };
        match (head, rest.as_slice()) {
            ("nodes", [n]) => num_nodes = Some(int(n)? as u32),
            ("tier", [v, t]) => tiers.push((int(v)? as u32, int(t)? as u32)),
            ("edge", [s, v, cost, cap]) => edges.push(TradeEdge {
                supplier: int(s)? as u32,
                buyer: int(v)? as u32,
                cost: int(cost)?,
                capacity: int(cap)?,
            }),
            ("budget", [v, b]) => budgets.push((int(v)? as u32, int(b)?)),
            ("produces", [s, d]) => produces.push((int(s)? as u32, int(d)? as u32)),
            ("demand", [v, d, q]) => demands.push(Demand {
                buyer: int(v)? as u32,
                material: int(d)? as u32,
                q: int(q)? as u32,
            }),
            ("event", [p, destroyed @ ..]) => events.push(DisruptionEvent {
                probability: crate::discretize::parse_decimal(p)?,
                destroys: destroyed
                    .iter()
                    .map(|e| int(e).map(|v| v as usize))
                    .collect::<Result<_>>()?,
            }),
            _ => return Err(err()),
        }
    }
    let n = num_nodes.ok_or_else(|| Error::Parse("missing 'nodes' header".into()))?;
    let mut tier_vec = vec![0u32; n as usize];
    for (v, t) in tiers {
        *tier_vec
            .get_mut(v as usize)
            .ok_or_else(|| Error::Parse(format!("tier for unknown node {v}")))? = t;
    }
    let mut budget_vec = vec![0u64; n as usize];
    for (v, b) in budgets {
        *budget_vec
            .get_mut(v as usize)
            .ok_or_else(|| Error::Parse(format!("budget for unknown node {v}")))? = b;
    }
    let num_materials = produces.iter().map(|&(_, d)| d + 1).max().unwrap_or(0);
    let mut producer_vec = vec![Vec::new(); num_materials as usize];
    for (s, d) in produces {
        producer_vec[d as usize].push(s);
    }
    let network = SupplyNetwork {
        num_nodes: n,
        tiers: tier_vec,
        edges,
        budgets: budget_vec,
        producers: producer_vec,
        demands,
    };
    let model = EventModel { events };
    network.validate()?;
    model.validate(network.edges.len())?;
    Ok((network, model))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::oracle::count_exact_capped;
    use crate::oracle::term_formula_with_x_fixed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Two suppliers, one buyer, two events.
    pub(crate) fn toy() -> (SupplyNetwork, EventModel) {
        let network = SupplyNetwork {
            num_nodes: 3,
            tiers: vec![0, 0, 1],
            edges: vec![
                TradeEdge { supplier: 0, buyer: 2, cost: 3, capacity: 4 },
                TradeEdge { supplier: 1, buyer: 2, cost: 2, capacity: 2 },
            ],
            budgets: vec![0, 0, 5],
            producers: vec![vec![0, 1]],
            demands: vec![Demand { buyer: 2, material: 0, q: 1 }],
        };
        let events = EventModel {
            events: vec![
                DisruptionEvent { probability: rat(1, 2), destroys: vec![0] },
                DisruptionEvent { probability: rat(1, 4), destroys: vec![1] },
            ],
        };
        (network, events)
    }

    #[test]
    fn survival_indicator() {
        let (network, events) = toy();
        let mut plan = TradingPlan::empty(network.edges.len());
        assert!(!trade_survives(&plan, 0, &[false, false], &events));
        plan.selected[0] = true;
        assert!(trade_survives(&plan, 0, &[false, false], &events));
        assert!(trade_survives(&plan, 0, &[false, true], &events));
        assert!(!trade_survives(&plan, 0, &[true, false], &events));
    }

    #[test]
    fn evaluate_plan_hand_expansion() {
        let (network, events) = toy();
        let plan = TradingPlan { selected: vec![true, true] };
        // four scenarios: 4*(1-1/2) + 2*(1-1/4) = 2 + 3/2 = 7/2
        let got = evaluate_plan(&network, &events, &plan).unwrap();
        let expected = rat(4, 1) * rat(1, 2) + rat(2, 1) * rat(3, 4);
        assert_eq!(got, expected);
        assert_eq!(got, rat(7, 2));
        // empty plan is worthless
        let empty = TradingPlan::empty(2);
        assert_eq!(evaluate_plan(&network, &events, &empty).unwrap(), rat(0, 1));
    }

    #[test]
    fn evaluate_plan_deterministic_events() {
        let (network, _) = toy();
        let events = EventModel {
            events: vec![
                DisruptionEvent { probability: rat(1, 1), destroys: vec![0] },
                DisruptionEvent { probability: rat(0, 1), destroys: vec![1] },
            ],
        };
        let plan = TradingPlan { selected: vec![true, true] };
        // edge 0 always destroyed, edge 1 always survives
        assert_eq!(evaluate_plan(&network, &events, &plan).unwrap(), rat(2, 1));
    }

    #[test]
    fn closed_form_on_disjoint_destruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (network, events) = toy();
        for _ in 0..10 {
            let plan = TradingPlan {
                selected: vec![rng.gen_bool(0.5), rng.gen_bool(0.5)],
            };
            let direct = evaluate_plan(&network, &events, &plan).unwrap();
            let mut closed = BigRational::zero();
            for (e, edge) in network.edges.iter().enumerate() {
                if !plan.selected[e] {
                    continue;
                }
                let mut keep = BigRational::from(BigInt::from(edge.capacity));
                for ev in &events.events {
                    if ev.destroys.contains(&e) {
                        keep *= BigRational::one() - &ev.probability;
                    }
                }
                closed += keep;
            }
            assert_eq!(direct, closed);
        }
    }

    #[test]
    fn single_trade_no_events_count() {
        // one supplier, capacity 1, l = 1: the term reduces to
        // selected-or-not with a fixed number of free bits
        let network = SupplyNetwork {
            num_nodes: 2,
            tiers: vec![0, 1],
            edges: vec![TradeEdge { supplier: 0, buyer: 1, cost: 1, capacity: 1 }],
            budgets: vec![0, 1],
            producers: vec![vec![0]],
            demands: vec![Demand { buyer: 1, material: 0, q: 0 }],
        };
        let events = EventModel { events: vec![] };
        let enc = encode_supply(&network, &events, 1).unwrap();
        let term = &enc.instance.terms[0];
        // y: 1 selector + 1 capacity block bit
        assert_eq!(term.y_size, 2);
        for (x_bit, expected) in [(false, 0u64), (true, 2u64)] {
            let (cnf, y) =
                term_formula_with_x_fixed(&enc.instance, 0, &[x_bit]).unwrap();
            let got = count_exact_capped(&cnf, &y, 64).unwrap();
            // capacity 1 = M: bit never forced, count = 2 when selected
            assert_eq!(got, expected, "x={x_bit}");
        }
        // scaled count == expectation == 1 exactly here
        let scale = &enc.ledger[0].scale;
        assert_eq!(scale * rat(2, 1), rat(1, 1));
    }

    #[test]
    fn budget_violation_unsatisfiable() {
        let (network, events) = toy();
        let enc = encode_supply(&network, &events, 2).unwrap();
        // plan picking both edges costs 5 <= 5: fine; raise costs via a
        // tighter budget variant instead
        let mut tight = network.clone();
        tight.budgets[2] = 4;
        let enc_tight = encode_supply(&tight, &events, 2).unwrap();
        let both = [true, true];
        let phi_ok = |enc: &SupplyEncoding, x: &[bool]| {
            enc.instance.eval_phi(x, &vec![true; enc.instance.k() as usize])
        };
        assert!(phi_ok(&enc, &both));
        assert!(!phi_ok(&enc_tight, &both));
        assert!(phi_ok(&enc_tight, &[true, false]));
    }

    #[test]
    fn scaled_count_brackets_expectation() {
        let (network, events) = toy();
        let l = 3;
        let enc = encode_supply(&network, &events, l).unwrap();
        let demand = &network.demands[0];
        for selected in [[true, false], [false, true], [true, true]] {
            let plan = TradingPlan { selected: selected.to_vec() };
            let (cnf, y) =
                term_formula_with_x_fixed(&enc.instance, 0, &plan.selected).unwrap();
            let count = count_exact_capped(&cnf, &y, 64).unwrap();
            let scaled = &enc.ledger[0].scale * rat(count as i64, 1);
            let (exact, upper) = term_bracket(&network, &events, demand, &plan, l);
            assert!(
                exact <= scaled && scaled <= upper,
                "plan {selected:?}: {scaled} outside [{exact}, {upper}]"
            );
        }
    }

    #[test]
    fn zero_capacity_material_rejected() {
        let (mut network, events) = toy();
        network.edges[0].capacity = 0;
        network.edges[1].capacity = 0;
        assert!(matches!(
            encode_supply(&network, &events, 2),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn solve_supply_dominant_plan() {
        let (network, events) = toy();
        let params = SolveParams {
            t_override: Some(2),
            seed: 11,
            ..Default::default()
        };
        match solve_supply(&network, &events, &params, &OracleConfig::embedded(), 2, 1).unwrap() {
            SupplyOutcome::Solved(sol) => {
                assert!(sol.plan.respects_budgets(&network));
                assert!(sol.expectation >= BigRational::zero());
            }
            SupplyOutcome::Infeasible => panic!("toy network is feasible"),
        }
    }

    #[test]
    fn zero_budget_infeasible_or_empty() {
        let (mut network, events) = toy();
        network.budgets = vec![0, 0, 0];
        // demand q = 1 needs expectation >= 2, impossible with no trades
        let params = SolveParams {
            t_override: Some(2),
            seed: 1,
            ..Default::default()
        };
        match solve_supply(&network, &events, &params, &OracleConfig::embedded(), 2, 1).unwrap() {
            SupplyOutcome::Infeasible => {}
            SupplyOutcome::Solved(sol) => {
                assert!(sol.plan.selected.iter().all(|&v| !v));
                assert!(sol.expectation.is_zero());
            }
        }
    }

    #[test]
    fn random_plan_respects_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (network, _) = generate_network(&mut rng, 3, 2, 2);
            for _ in 0..5 {
                let plan = random_feasible_plan(&network, &mut rng);
                assert!(plan.respects_budgets(&network));
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        let text = "\
# toy network
nodes 3
tier 2 1
edge 0 2 3 4
edge 1 2 2 2
budget 2 5
produces 0 0
produces 1 0
demand 2 0 1
event 0.5 0
event 0.25 1
";
        let (network, events) = parse_supply(text).unwrap();
        let (reference, ref_events) = toy();
        assert_eq!(network.edges, reference.edges);
        assert_eq!(network.budgets, reference.budgets);
        assert_eq!(network.demands, reference.demands);
        assert_eq!(events.events[0].probability, ref_events.events[0].probability);
        assert_eq!(events.events[1].destroys, vec![1]);
        assert!(parse_supply("nodes 1\nedge 0 5 1 1\n").is_err());
    }
}
