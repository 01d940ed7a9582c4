//! Command-line front end: decide SMC instances, run threshold-counting
//! checks on plain CNF, and solve the shelter/supply applications.
//!
//! Exit codes follow SAT-solver conventions: 10 = TRUE/solved,
//! 20 = FALSE, 30 = infeasible threshold search, 1 = error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;

use xor_smc::circuit::circuit_from_clauses;
use xor_smc::formula::{CnfFormula, Var};
use xor_smc::oracle::{self, OracleConfig, SatStatus};
use xor_smc::shelter::{self, RoadGraph, ShelterOutcome};
use xor_smc::smc::{self, SolveParams};
use xor_smc::supply::{self, SupplyOutcome};

const EXIT_TRUE: u8 = 10;
const EXIT_FALSE: u8 = 20;
const EXIT_INFEASIBLE: u8 = 30;

#[derive(Parser)]
#[command(name = "xorsmc", about = "XOR-hashing solver for satisfiability modulo counting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// Failure probability bound (0, 1)
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Hash slack constant; raised automatically to the admissible floor
    #[arg(long, default_value_t = 2)]
    c: u32,
    /// Override the repetition count instead of deriving it from eta
    #[arg(long = "T")]
    t: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// External SAT solver command, e.g. "minisat" or "xorsmc solve";
    /// default is the embedded solver (also settable via XOR_SMC_ORACLE)
    #[arg(long)]
    oracle: Option<String>,
    /// Dump the compiled CNF to this path
    #[arg(long)]
    emit_cnf: Option<PathBuf>,
    /// Machine-readable JSON report on stdout
    #[arg(long)]
    json: bool,
    /// Parallel threshold probes
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl SolveFlags {
    fn params(&self, file_params: Option<SolveParams>) -> SolveParams {
        // explicit flags win over instance-file parameters
        let base = file_params.unwrap_or_default();
        SolveParams {
            eta: if self.eta != 0.2 { self.eta } else { base.eta },
            c: if self.c != 2 { self.c } else { base.c },
            t_override: self.t.or(base.t_override),
            seed: if self.seed != 0 { self.seed } else { base.seed },
        }
    }

    fn oracle(&self) -> OracleConfig {
        let spec = self
            .oracle
            .clone()
            .or_else(|| std::env::var("XOR_SMC_ORACLE").ok());
        oracle_from_spec(spec.as_deref())
    }
}

/// Whitespace-split solver command line: first token is the program,
/// the rest are leading arguments placed before the DIMACS path.
fn oracle_from_spec(spec: Option<&str>) -> OracleConfig {
    match spec {
        Some(s) if !s.trim().is_empty() => {
            let mut parts = s.split_whitespace();
            let program = PathBuf::from(parts.next().unwrap());
            let args = parts.map(str::to_owned).collect();
            OracleConfig::external(program, args)
        }
        _ => OracleConfig::embedded(),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide an SMC instance file
    Check {
        instance: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Exact desk-scale re-check of each active term's count
        #[arg(long)]
        verify: bool,
    },
    /// Majority-vote threshold test "count >= 2^q" on a DIMACS CNF
    Count {
        dimacs: PathBuf,
        #[arg(long)]
        q: u32,
        /// Number of independent hashed runs
        #[arg(long, default_value_t = 9)]
        reps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Place shelters on a road graph
    Shelter {
        graph: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Also run the hill-climbing baseline and compare
        #[arg(long)]
        baseline: bool,
    },
    /// Choose a trading plan on a supply network
    Supply {
        network: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Discretization bits per weight factor
        #[arg(long, default_value_t = 4)]
        l: u32,
        #[arg(long)]
        baseline: bool,
    },
    /// Plain SAT check of a DIMACS file (s/v output, exit 10/20)
    Solve {
        dimacs: PathBuf,
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Emit a seeded synthetic supply network
    GenSupply {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        suppliers: u32,
        #[arg(long, default_value_t = 2)]
        buyers: u32,
        #[arg(long, default_value_t = 2)]
        events: u32,
    },
}

#[derive(serde::Serialize)]
struct RunReport {
    answer: String,
    witness: Option<WitnessSummary>,
    eta: f64,
    c_used: u32,
    t_used: u32,
    alpha: f64,
    seed: u64,
    num_vars: u32,
    num_clauses: usize,
    wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audits: Option<Vec<smc::TermAudit>>,
}

#[derive(serde::Serialize)]
struct WitnessSummary {
    x: Vec<bool>,
    b: Vec<bool>,
}

fn print_report(report: &RunReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).unwrap());
        return;
    }
    println!("answer       {}", report.answer);
    println!(
        "params       eta={} c={} T={} alpha={:.4} seed={}",
        report.eta, report.c_used, report.t_used, report.alpha, report.seed
    );
    println!(
        "formula      {} vars, {} clauses",
        report.num_vars, report.num_clauses
    );
    println!("wall time    {} ms", report.wall_ms);
    if let Some(w) = &report.witness {
        let x: String = w.x.iter().map(|&v| if v { '1' } else { '0' }).collect();
        let b: String = w.b.iter().map(|&v| if v { '1' } else { '0' }).collect();
        println!("witness      x={x} b={b}");
    }
    if let Some(m) = &report.metric {
        println!("metric       {m}");
    }
    if let Some(audits) = &report.audits {
        for a in audits {
            match a.exact_count {
                Some(count) => println!(
                    "term {}      active, exact count {} (guaranteed floor {})",
                    a.term, count, a.guaranteed_floor
                ),
                None => println!("term {}      inactive", a.term),
            }
        }
    }
}

fn run() -> Result<u8, xor_smc::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Check {
            instance,
            flags,
            verify,
        } => cmd_check(&instance, &flags, verify),
        Command::Count {
            dimacs,
            q,
            reps,
            seed,
            oracle,
        } => cmd_count(&dimacs, q, reps, seed, oracle),
        Command::Shelter {
            graph,
            flags,
            baseline,
        } => cmd_shelter(&graph, &flags, baseline),
        Command::Supply {
            network,
            flags,
            l,
            baseline,
        } => cmd_supply(&network, &flags, l, baseline),
        Command::Solve { dimacs, oracle } => cmd_solve(&dimacs, oracle),
        Command::GenSupply {
            seed,
            suppliers,
            buyers,
            events,
        } => cmd_gen_supply(seed, suppliers, buyers, events),
    }
}

fn cmd_check(path: &PathBuf, flags: &SolveFlags, verify: bool) -> Result<u8, xor_smc::Error> {
    let (inst, file_params) = xor_smc::instance::load_instance(path)?;
    let params = flags.params(Some(file_params));
    let oracle = flags.oracle();
    let start = Instant::now();
    if let Some(out) = &flags.emit_cnf {
        let built = smc::build_xor_smc_formula(&inst, &params)?;
        std::fs::write(out, built.cnf.to_dimacs())
            .map_err(|e| xor_smc::Error::Parse(format!("writing {}: {e}", out.display())))?;
    }
    let decision = smc::xor_smc(&inst, &params, &oracle)?;
    warn_large_t(decision.diagnostics.t_used);
    let audits = match (&decision.witness, verify) {
        (Some((x, b)), true) => Some(smc::audit_witness(
            &inst,
            x,
            b,
            decision.diagnostics.c_used,
        )?),
        _ => None,
    };
    let report = RunReport {
        answer: if decision.answer { "TRUE" } else { "FALSE" }.into(),
        witness: decision
            .witness
            .as_ref()
            .map(|(x, b)| WitnessSummary { x: x.clone(), b: b.clone() }),
        eta: params.eta,
        c_used: decision.diagnostics.c_used,
        t_used: decision.diagnostics.t_used,
        alpha: decision.diagnostics.alpha,
        seed: params.seed,
        num_vars: decision.diagnostics.num_vars,
        num_clauses: decision.diagnostics.num_clauses,
        wall_ms: start.elapsed().as_millis(),
        metric: None,
        audits,
    };
    print_report(&report, flags.json);
    Ok(if decision.answer { EXIT_TRUE } else { EXIT_FALSE })
}

fn cmd_count(
    path: &PathBuf,
    q: u32,
    reps: u32,
    seed: u64,
    oracle_spec: Option<String>,
) -> Result<u8, xor_smc::Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| xor_smc::Error::Parse(format!("reading {}: {e}", path.display())))?;
    let cnf = CnfFormula::from_dimacs(&text)?;
    if q > cnf.num_vars() {
        return Err(xor_smc::Error::ThresholdTooLarge {
            q,
            width: cnf.num_vars(),
        });
    }
    let f = circuit_from_clauses(cnf.clauses());
    let oracle = oracle_from_spec(oracle_spec.as_deref());
    let hash = xor_smc::HashRng::new(seed);
    let mut votes = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let v = smc::xor_binary(&f, 0, &[], cnf.num_vars(), q, &hash, rep, &oracle)?;
        println!("vote {rep}: {}", if v { "true" } else { "false" });
        votes.push(v);
    }
    let yes = votes.iter().filter(|&&v| v).count();
    let majority = 2 * yes > votes.len();
    println!(
        "verdict: count >= 2^{q} is {} ({yes}/{} votes)",
        if majority { "TRUE" } else { "FALSE" },
        votes.len()
    );
    Ok(if majority { EXIT_TRUE } else { EXIT_FALSE })
}

fn cmd_shelter(path: &PathBuf, flags: &SolveFlags, baseline: bool) -> Result<u8, xor_smc::Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| xor_smc::Error::Parse(format!("reading {}: {e}", path.display())))?;
    let graph = RoadGraph::from_text(&text)?;
    let params = flags.params(None);
    let oracle = flags.oracle();
    let start = Instant::now();
    let outcome = shelter::solve_shelter(&graph, &params, &oracle, flags.jobs)?;
    let sol = match outcome {
        ShelterOutcome::Infeasible => {
            println!("infeasible: no placement satisfies the constraints");
            return Ok(EXIT_INFEASIBLE);
        }
        ShelterOutcome::Solved(sol) => sol,
    };
    warn_large_t(sol.decision.diagnostics.t_used);
    if let Some(out) = &flags.emit_cnf {
        let qs = vec![sol.achieved_q; graph.residential.len()];
        let enc = shelter::encode_shelter(&graph, &qs)?;
        let built = smc::build_xor_smc_formula(&enc.instance, &params)?;
        std::fs::write(out, built.cnf.to_dimacs())
            .map_err(|e| xor_smc::Error::Parse(format!("writing {}: {e}", out.display())))?;
    }
    let mut metric = serde_json::json!({
        "shelters": sol.shelters,
        "achieved_q": sol.achieved_q,
        "num_paths": sol.num_paths,
    });
    if baseline {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
        let base = shelter::local_search_baseline(&graph, graph.shelter_budget, &mut rng);
        let base_paths = shelter::evaluate_assignment(&graph, &base);
        metric["baseline_shelters"] = serde_json::json!(base);
        metric["baseline_num_paths"] = serde_json::json!(base_paths);
    }
    let report = RunReport {
        answer: "TRUE".into(),
        witness: None,
        eta: params.eta,
        c_used: sol.decision.diagnostics.c_used,
        t_used: sol.decision.diagnostics.t_used,
        alpha: sol.decision.diagnostics.alpha,
        seed: params.seed,
        num_vars: sol.decision.diagnostics.num_vars,
        num_clauses: sol.decision.diagnostics.num_clauses,
        wall_ms: start.elapsed().as_millis(),
        metric: Some(metric),
        audits: None,
    };
    print_report(&report, flags.json);
    Ok(EXIT_TRUE)
}

fn cmd_supply(
    path: &PathBuf,
    flags: &SolveFlags,
    l: u32,
    baseline: bool,
) -> Result<u8, xor_smc::Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| xor_smc::Error::Parse(format!("reading {}: {e}", path.display())))?;
    let (network, events) = supply::parse_supply(&text)?;
    let params = flags.params(None);
    let oracle = flags.oracle();
    let start = Instant::now();
    let outcome = supply::solve_supply(&network, &events, &params, &oracle, l, flags.jobs)?;
    let sol = match outcome {
        SupplyOutcome::Infeasible => {
            println!("infeasible: no plan satisfies the budgets and thresholds");
            return Ok(EXIT_INFEASIBLE);
        }
        SupplyOutcome::Solved(sol) => sol,
    };
    warn_large_t(sol.decision.diagnostics.t_used);
    if let Some(out) = &flags.emit_cnf {
        let enc = supply::encode_supply(&network, &events, l)?;
        let inst = enc.instance.with_uniform_q(sol.achieved_q)?;
        let built = smc::build_xor_smc_formula(&inst, &params)?;
        std::fs::write(out, built.cnf.to_dimacs())
            .map_err(|e| xor_smc::Error::Parse(format!("writing {}: {e}", out.display())))?;
    }
    let mut metric = serde_json::json!({
        "plan": sol.plan.selected,
        "achieved_q": sol.achieved_q,
        "expectation": sol.expectation.to_f64(),
    });
    if baseline {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
        let base = supply::random_feasible_plan(&network, &mut rng);
        let base_value = supply::evaluate_plan(&network, &events, &base)?;
        metric["baseline_plan"] = serde_json::json!(base.selected);
        metric["baseline_expectation"] = serde_json::json!(base_value.to_f64());
    }
    let report = RunReport {
        answer: "TRUE".into(),
        witness: None,
        eta: params.eta,
        c_used: sol.decision.diagnostics.c_used,
        t_used: sol.decision.diagnostics.t_used,
        alpha: sol.decision.diagnostics.alpha,
        seed: params.seed,
        num_vars: sol.decision.diagnostics.num_vars,
        num_clauses: sol.decision.diagnostics.num_clauses,
        wall_ms: start.elapsed().as_millis(),
        metric: Some(metric),
        audits: None,
    };
    print_report(&report, flags.json);
    Ok(EXIT_TRUE)
}

fn cmd_solve(path: &PathBuf, oracle_spec: Option<String>) -> Result<u8, xor_smc::Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| xor_smc::Error::Parse(format!("reading {}: {e}", path.display())))?;
    let cnf = CnfFormula::from_dimacs(&text)?;
    let oracle = oracle_from_spec(oracle_spec.as_deref());
    let result = oracle::solve(&cnf, &oracle)?;
    match result.status {
        SatStatus::Satisfiable => {
            println!("s SATISFIABLE");
            let model = result.model.expect("sat result carries a model");
            let mut line = String::from("v");
            for v in 1..=cnf.num_vars() {
                let lit = if model[v as usize] {
                    Var(v).positive()
                } else {
                    Var(v).negative()
                };
                line.push_str(&format!(" {}", lit.to_dimacs()));
            }
            line.push_str(" 0");
            println!("{line}");
            Ok(EXIT_TRUE)
        }
        SatStatus::Unsatisfiable => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_FALSE)
        }
    }
}

fn cmd_gen_supply(seed: u64, suppliers: u32, buyers: u32, events: u32) -> Result<u8, xor_smc::Error> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (network, model) = supply::generate_network(&mut rng, suppliers, buyers, events);
    println!("# generated with seed {seed}");
    println!("nodes {}", network.num_nodes);
    for (v, t) in network.tiers.iter().enumerate() {
        if *t != 0 {
            println!("tier {v} {t}");
        }
    }
    for e in &network.edges {
        println!("edge {} {} {} {}", e.supplier, e.buyer, e.cost, e.capacity);
    }
    for (v, b) in network.budgets.iter().enumerate() {
        if *b != 0 {
            println!("budget {v} {b}");
        }
    }
    for (d, producers) in network.producers.iter().enumerate() {
        for s in producers {
            println!("produces {s} {d}");
        }
    }
    for d in &network.demands {
        println!("demand {} {} {}", d.buyer, d.material, d.q);
    }
    for ev in &model.events {
        let edges: Vec<String> = ev.destroys.iter().map(|e| e.to_string()).collect();
        // probabilities are exact tenths, so the f64 round-trip is clean
        println!(
            "event {} {}",
            ev.probability.to_f64().expect("probability fits f64"),
            edges.join(" ")
        );
    }
    Ok(0)
}

fn warn_large_t(t: u32) {
    if t > 64 {
        eprintln!("warning: T = {t} repetitions; consider raising --c to shrink the formula");
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
