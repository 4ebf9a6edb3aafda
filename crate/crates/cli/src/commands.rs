use std::path::Path;
use std::time::Instant;

use cascade_core::bounds::{
    search_equivocation, search_inner, Caps, EquivocationOutcome, EquivocationProblem,
    InnerCandidate, InnerSearchProblem, RateBudget, SearchOptions, SearchOutcome, SideInfoSpec,
};
use cascade_core::example;
use cascade_core::payoff::{Action, LogLossPayoff, Payoff};
use cascade_core::prob::Pmf;
use cascade_core::sim::{
    empirical_equivocation, mc_estimate, mc_trace, run_system_exact, simulate_payoff, IndexBits,
    SchemeSpec, DEFAULT_SLACK,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load, Overrides};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_num, Sink};

const DEFAULT_RESTARTS: usize = 64;
const BOUNDARY_NOTE: &str = "rates and payoff are boundary values of the achievable region; \
    the achievable tuples satisfy them with strict inequality";

fn options(
    seed: u64,
    restarts: Option<usize>,
    tol: Option<f64>,
    iterations: Option<usize>,
) -> SearchOptions {
    let mut o = SearchOptions {
        seed,
        restarts: restarts.unwrap_or(DEFAULT_RESTARTS),
        ..SearchOptions::default()
    };
    if let Some(t) = tol {
        o.rate_tol = t;
    }
    if let Some(i) = iterations {
        o.iterations = i;
    }
    o
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsProblem {
    pub p_x: Pmf,
    pub side: SideInfoSpec,
    pub payoff: Payoff,
    pub budget: RateBudget,
    #[serde(default)]
    pub caps: Option<Caps>,
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Extra key-rate budgets for the frontier CSV.
    #[serde(default)]
    pub frontier: Vec<f64>,
}

pub fn bounds(config: Option<&std::path::PathBuf>, ov: &Overrides, out: &Path) -> CliResult<()> {
    let cfg = load::<BoundsProblem>("bounds", config, ov)?;
    let seed = cfg.require_seed("bounds")?;
    let p = &cfg.problem;
    let problem = InnerSearchProblem {
        p_x: p.p_x.clone(),
        caps: p
            .caps
            .unwrap_or_else(|| Caps::default_for(p.side.input_dims())),
        side: p.side.clone(),
        payoff: p.payoff.clone(),
        budget: p.budget,
    };
    let opts = options(seed, cfg.restarts, cfg.tol, p.iterations);
    let sink = Sink::new(out, cfg.hash.clone(), Some(seed))?;
    let start = Instant::now();
    let outcome = search_inner(&problem, &opts)?;
    let mut rows = Vec::new();
    let witness = match &outcome {
        SearchOutcome::Found(w) => {
            rows.push(tuple_row(p.budget.r0, &w.tuple));
            w
        }
        SearchOutcome::Infeasible { reason } => {
            sink.json(
                "bounds.json",
                &json!({ "status": "infeasible", "reason": reason, "restarts": opts.restarts }),
            )?;
            return Err(CliError::Infeasible(reason.clone()));
        }
    };
    for &r0 in &p.frontier {
        let q = InnerSearchProblem {
            budget: RateBudget {
                r0,
                ..problem.budget
            },
            ..problem.clone()
        };
        if let SearchOutcome::Found(w) = search_inner(&q, &opts)? {
            rows.push(tuple_row(r0, &w.tuple));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    sink.csv(
        "frontier.csv",
        &["R0", "R1", "R2", "Pi", "R0_budget"],
        &rows.into_iter().map(|r| r.1).collect::<Vec<_>>(),
    )?;
    sink.json(
        "bounds.json",
        &json!({
            "status": "found",
            "restarts": opts.restarts,
            "iterations": opts.iterations,
            "tuple": witness.tuple,
            "boundary": BOUNDARY_NOTE,
            "candidate": witness.candidate,
            "candidate_sha256": witness.hash,
            "origin": witness.origin,
        }),
    )?;
    eprintln!(
        "bounds: Pi = {} at (R0, R1, R2) = ({}, {}, {}); wall_time {:.3} s",
        fmt_num(witness.tuple.pi),
        fmt_num(witness.tuple.r0),
        fmt_num(witness.tuple.r1),
        fmt_num(witness.tuple.r2),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn tuple_row(budget: f64, t: &cascade_core::bounds::RatePayoffTuple) -> (f64, Vec<String>) {
    (
        budget,
        vec![
            fmt_num(t.r0),
            fmt_num(t.r1),
            fmt_num(t.r2),
            fmt_num(t.pi),
            fmt_num(budget),
        ],
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateProblem {
    pub n: usize,
    /// Inline candidate; exactly one of `candidate` and `preset` is given.
    #[serde(default)]
    pub candidate: Option<InnerCandidate>,
    /// One of `ternary-corner-1`, `ternary-corner-2`, `ternary-disclosure`.
    #[serde(default)]
    pub preset: Option<String>,
    pub p_x: Pmf,
    pub side: SideInfoSpec,
    pub payoff: Payoff,
    /// Index bits; sized from the candidate's rates when absent.
    #[serde(default)]
    pub bits: Option<IndexBits>,
    #[serde(default)]
    pub slack: Option<f64>,
    /// Overrides only the key bits of the automatic sizing.
    #[serde(default)]
    pub key_bits: Option<u32>,
    /// Secret set for the equivocation report.
    #[serde(default)]
    pub secret: Option<LogLossPayoff>,
}

fn preset(name: &str) -> CliResult<InnerCandidate> {
    Ok(match name {
        "ternary-corner-1" => example::corner_candidate(1)?,
        "ternary-corner-2" => example::corner_candidate(2)?,
        "ternary-disclosure" => example::disclosure_candidate()?,
        other => {
            return Err(CliError::schema(
                "problem.preset",
                format!("unknown preset `{other}`"),
            ))
        }
    })
}

#[derive(Serialize)]
struct SimReport<'a> {
    n: usize,
    bits: IndexBits,
    slack: f64,
    redraws: u32,
    rates: cascade_core::sim::SchemeRates,
    audit: cascade_core::sim::SystemAudit,
    payoff: cascade_core::sim::SimPayoff,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivocation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<cascade_core::sim::McEstimate>,
    note: &'a str,
}

pub fn simulate(config: Option<&std::path::PathBuf>, ov: &Overrides, out: &Path) -> CliResult<()> {
    let cfg = load::<SimulateProblem>("simulate", config, ov)?;
    let seed = cfg.require_seed("simulate")?;
    let p = cfg.problem;
    let candidate = match (&p.candidate, &p.preset) {
        (Some(c), None) => c.clone(),
        (None, Some(name)) => preset(name)?,
        _ => {
            return Err(CliError::schema(
                "problem.candidate",
                "give exactly one of `candidate` and `preset`",
            ))
        }
    };
    let slack = p.slack.unwrap_or(DEFAULT_SLACK);
    let mut spec = SchemeSpec::auto(p.n, candidate, p.p_x.clone(), p.side.clone(), slack, seed)
        .map_err(|e| CliError::schema("problem", e.to_string()))?;
    if let Some(b) = p.bits {
        spec.bits = b;
    }
    if let Some(k) = p.key_bits {
        spec.bits.key = k;
    }
    spec.validate()
        .map_err(|e| CliError::schema("problem", e.to_string()))?;
    let sink = Sink::new(out, cfg.hash.clone(), Some(seed))?;
    let table = run_system_exact(&spec)?;
    let audit = table.audit(cfg.tol.unwrap_or(1e-9));
    let payoff = simulate_payoff(&table, &p.payoff)?;
    let equivocation = p
        .secret
        .as_ref()
        .map(|s| empirical_equivocation(&table, s))
        .transpose()?;
    let samples = cfg.samples.unwrap_or(0);
    let monte_carlo = if samples > 0 {
        let est = mc_estimate(&table, &p.payoff, samples, seed)?;
        let trace = mc_trace(&table, &p.payoff, samples, seed)?;
        let rows: Vec<Vec<String>> = trace
            .iter()
            .map(|r| {
                vec![
                    r.sample.to_string(),
                    r.t.to_string(),
                    r.history
                        .iter()
                        .map(|w| w.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                    fmt_num(r.posterior_entropy),
                    match &r.action {
                        Action::Symbol(z) => z.to_string(),
                        Action::Distribution(d) => {
                            d.iter().map(|p| fmt_num(*p)).collect::<Vec<_>>().join(" ")
                        }
                    },
                    fmt_num(r.payoff),
                ]
            })
            .collect();
        sink.csv(
            "trace.csv",
            &[
                "sample",
                "t",
                "history",
                "posterior_entropy",
                "action",
                "payoff",
            ],
            &rows,
        )?;
        Some(est)
    } else {
        None
    };

    let mut rows: Vec<Vec<String>> = payoff
        .per_letter
        .iter()
        .enumerate()
        .map(|(t, v)| vec!["payoff_letter".into(), (t + 1).to_string(), fmt_num(*v)])
        .collect();
    rows.push(vec!["pi_bar".into(), String::new(), fmt_num(payoff.value)]);
    if let Some(e) = equivocation {
        rows.push(vec!["equivocation".into(), String::new(), fmt_num(e)]);
    }
    if let Some(m) = &monte_carlo {
        rows.push(vec!["mc_mean".into(), String::new(), fmt_num(m.mean)]);
        rows.push(vec![
            "mc_std_error".into(),
            String::new(),
            fmt_num(m.std_error),
        ]);
    }
    sink.csv("payoff.csv", &["quantity", "t", "value"], &rows)?;

    let report = SimReport {
        n: spec.n,
        bits: spec.bits,
        slack,
        redraws: table.scheme.codebooks.redraws,
        rates: spec.rates()?,
        audit: audit.clone(),
        payoff,
        equivocation,
        monte_carlo,
        note: "finite-blocklength values; the adversary knows the codebooks",
    };
    sink.json("audit.json", &report)?;
    if !audit.passed {
        return Err(CliError::CheckFailed(
            "system constraint audit failed; see audit.json".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleProblem {
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
}

pub fn example(config: Option<&std::path::PathBuf>, ov: &Overrides, out: &Path) -> CliResult<()> {
    let cfg = load::<ExampleProblem>("example", config, ov)?;
    let grid = cfg
        .problem
        .grid
        .clone()
        .unwrap_or_else(example::default_grid);
    if let Some(i) = grid.iter().position(|r| !(0.0..=2.0).contains(r)) {
        return Err(CliError::schema(
            format!("problem.grid[{i}]"),
            "grid values must lie in [0, 2]",
        ));
    }
    let tol = cfg.tol.unwrap_or(example::DEFAULT_TOL);
    let report = example::verify_example(&grid, tol)?;
    let sink = Sink::new(out, cfg.hash.clone(), cfg.seed)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.r0),
                fmt_num(r.analytic),
                fmt_num(r.evaluated.pi),
                fmt_num(r.evaluated.r0),
                fmt_num(r.evaluated.r1),
                fmt_num(r.evaluated.r2),
                r.passed.to_string(),
            ]
        })
        .collect();
    sink.csv(
        "curve.csv",
        &[
            "R0",
            "Pi_analytic",
            "Pi_evaluated",
            "R0_used",
            "R1",
            "R2",
            "passed",
        ],
        &rows,
    )?;
    let l = example::log2_3();
    sink.json(
        "example.json",
        &json!({
            "tol": tol,
            "passed": report.passed,
            "rows": report.rows,
            "failures": report.failures(),
            "thresholds": {
                "R1": { "bound": l, "condition": "R1 > log2(3), open; equality is left undecided" },
                "R2": { "bound": l - 1.0, "condition": "R2 > log2(3) - 1, open; equality is left undecided" },
            },
        }),
    )?;
    if !report.passed {
        return Err(CliError::CheckFailed(report.failures().join("; ")));
    }
    Ok(())
}

pub fn equivocation(
    config: Option<&std::path::PathBuf>,
    ov: &Overrides,
    out: &Path,
) -> CliResult<()> {
    let cfg = load::<EquivocationProblem>("equivocation", config, ov)?;
    let seed = cfg.require_seed("equivocation")?;
    let opts = options(seed, cfg.restarts, cfg.tol, None);
    let sink = Sink::new(out, cfg.hash.clone(), Some(seed))?;
    match search_equivocation(&cfg.problem, &opts)? {
        EquivocationOutcome::Found(w) => {
            sink.json(
                "equivocation.json",
                &json!({
                    "status": "found",
                    "restarts": opts.restarts,
                    "value": w.value,
                    "witness": w,
                }),
            )?;
            eprintln!("equivocation: {} bits", fmt_num(w.value));
            Ok(())
        }
        EquivocationOutcome::Infeasible { reason } => {
            sink.json(
                "equivocation.json",
                &json!({ "status": "infeasible", "reason": reason, "restarts": opts.restarts }),
            )?;
            Err(CliError::Infeasible(reason))
        }
    }
}
