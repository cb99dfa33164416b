use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tigm::chain::{
    irreducible, power_iteration, stationary_closed_form, total_variation, transition_matrix,
    verify_stationary, StationarityReport,
};
use tigm::model::ActivitySpec;
use tigm::oracle::multistart_count;
use tigm::regime::CRITICAL_LOOP_ACTIVITY;
use tigm::sampler::{empirical_marginal, level_marginals, TreeSampler};
use tigm::solve::{solve_spec, GraphKind};
use tigm::three_loop::{self, delta_curve, h_curve, thresholds as three_loop_thresholds, ThreeLoopProblem};
use tigm::two_loop::{self, f_curve, g_curve, TwoLoopProblem};
use tigm::{Error, Kernel, Solution, Spec, Stationary, State};

use crate::output::{csv_writer, print_json, sci, write_matrix, write_vector};
use crate::parse_number;

fn read_spec(path: &Path) -> Result<Spec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn positive(name: &str, v: f64) -> Result<(), Error> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

#[derive(Serialize)]
struct ThresholdReport {
    lambda: f64,
    #[serde(rename = "Lambda1")]
    lambda1: f64,
    #[serde(rename = "Lambda2")]
    lambda2: f64,
    critical_lambda: f64,
}

pub fn thresholds(lambda: f64) -> Result<()> {
    positive("λ", lambda)?;
    let t = three_loop_thresholds(lambda);
    print_json(&ThresholdReport {
        lambda,
        lambda1: t.lambda1,
        lambda2: t.lambda2,
        critical_lambda: CRITICAL_LOOP_ACTIVITY,
    })
}

pub fn solve(path: &Path, graph: Option<GraphKind>) -> Result<()> {
    let spec = read_spec(path)?;
    print_json(&solve_spec(&spec, graph)?)
}

pub fn classify(lambda: f64, total: f64, graph: GraphKind) -> Result<()> {
    match graph {
        GraphKind::ThreeLoop => print_json(&three_loop::classify(&ThreeLoopProblem::new(lambda, total)?)),
        GraphKind::TwoLoop => print_json(&two_loop::classify(&TwoLoopProblem::new(lambda, total)?)?),
    }
}

fn pick(solutions: Vec<Solution>, which: Option<usize>) -> Result<Vec<(usize, Solution)>> {
    let n = solutions.len();
    let all = solutions.into_iter().enumerate();
    match which {
        None => Ok(all.collect()),
        Some(i) if i < n => Ok(all.filter(|(j, _)| *j == i).collect()),
        Some(i) => Err(Error::InvalidInput(format!("solution {i} requested, only {n} found")).into()),
    }
}

#[derive(Serialize)]
struct ChainReport {
    solution: usize,
    states: Vec<State>,
    row_sum_error: f64,
    stationarity: StationarityReport<f64>,
    irreducible: bool,
    /// Total variation between power iteration and the closed form.
    power_tv: f64,
    power_steps: usize,
}

#[derive(Serialize)]
struct ChainOutput {
    solution: Solution,
    #[serde(rename = "P")]
    p: Kernel,
    #[serde(rename = "X")]
    x: Stationary,
    report: ChainReport,
}

pub fn chain(path: &Path, window: u32, which: Option<usize>, csv: bool, out_dir: &Path) -> Result<()> {
    let spec = read_spec(path)?;
    let graph = spec.graph()?;
    let mut outputs = Vec::new();
    for (i, s) in pick(solve_spec(&spec, None)?, which)? {
        let p = transition_matrix(&s, &spec, &graph, window)?;
        let x = stationary_closed_form(&s, &spec, &graph)?;
        let stationarity = verify_stationary(&x, &p, 1e-10)?;
        let (power, power_steps) = power_iteration(&p, 1_000_000, 1e-15);
        let report = ChainReport {
            solution: i,
            states: p.states.clone(),
            row_sum_error: p.max_row_sum_error(),
            stationarity,
            irreducible: irreducible(&p),
            power_tv: total_variation(&power, &x.probabilities),
            power_steps,
        };
        outputs.push(ChainOutput { solution: s, p, x, report });
    }
    if csv {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        for o in &outputs {
            let i = o.report.solution;
            write_matrix(&out_dir.join(format!("P{i}.csv")), &o.p.states, &o.p.rows)?;
            write_vector(&out_dir.join(format!("X{i}.csv")), &o.x.states, &o.x.probabilities)?;
        }
        print_json(&outputs.iter().map(|o| &o.report).collect::<Vec<_>>())
    } else {
        print_json(&outputs)
    }
}

#[derive(Serialize)]
struct SampleReport {
    depth: u32,
    trees: usize,
    seed: u64,
    states: Vec<State>,
    stationary: Vec<f64>,
    /// Total variation to the stationary law, root level first.
    level_tv: Vec<f64>,
    overall_tv: f64,
    edges: usize,
    inadmissible_edges: usize,
    admissible_fraction: f64,
}

pub fn sample(
    path: &Path,
    depth: u32,
    trees: usize,
    seed: u64,
    which: usize,
    samples_out: Option<&Path>,
) -> Result<()> {
    if trees == 0 {
        return Err(Error::InvalidInput("at least one tree is required".into()).into());
    }
    let spec = read_spec(path)?;
    let graph = spec.graph()?;
    let (_, s) = pick(solve_spec(&spec, None)?, Some(which))?.remove(0);
    let sampler = TreeSampler::from_solution(&s, &spec, &graph)?;
    let x = stationary_closed_form(&s, &spec, &graph)?;
    if x.states != sampler.states() {
        bail!("stationary law and kernel disagree on states");
    }
    let samples = sampler.sample_many(depth, trees, seed);
    let level_tv = level_marginals(&samples, sampler.states())?
        .iter()
        .map(|m| total_variation(m, &x.probabilities))
        .collect();
    let overall_tv = total_variation(&empirical_marginal(&samples, sampler.states())?, &x.probabilities);
    let edges: usize = samples.iter().map(|t| t.edge_count()).sum();
    let inadmissible_edges: usize = samples.iter().map(|t| t.inadmissible_edges(&graph)).sum();
    if let Some(out) = samples_out {
        fs::write(out, serde_json::to_string(&samples)?).with_context(|| format!("writing {}", out.display()))?;
    }
    print_json(&SampleReport {
        depth,
        trees,
        seed,
        states: x.states,
        stationary: x.probabilities,
        level_tv,
        overall_tv,
        edges,
        inadmissible_edges,
        admissible_fraction: if edges == 0 { 1.0 } else { 1.0 - inadmissible_edges as f64 / edges as f64 },
    })
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t).map_err(|e| Error::InvalidInput(e).into()))
        .collect()
}

/// Six totals straddling both thresholds, raised to the loop mass `2λ`.
fn threshold_totals(lambda: f64) -> Vec<f64> {
    let t = three_loop_thresholds(lambda);
    let (l1, l2) = (t.lambda1, t.lambda2);
    let mut out: Vec<f64> = [0.5 * l1, 0.99 * l1, l1, (l1 + l2) / 2.0, l2, 1.5 * l2]
        .into_iter()
        .map(|v| v.max(2.0 * lambda))
        .collect();
    out.dedup();
    out
}

struct Cell {
    lambda: f64,
    total: f64,
    closed_form: usize,
    oracle: usize,
}

fn sweep_cell(lambda: f64, total: f64, starts: usize, seed: u64) -> Result<Cell> {
    let closed_form = three_loop::enumerate_solutions(&ThreeLoopProblem::new(lambda, total)?)?.len();
    let spec = ActivitySpec::new([(1, lambda), (2, lambda)], [], total - 2.0 * lambda)?;
    let oracle = multistart_count(&spec, &spec.graph()?, starts, seed, 1e-6)?.count;
    Ok(Cell { lambda, total, closed_form, oracle })
}

/// Three-loop phase diagram: one row per `(λ, Λ)`, cells with `Λ < 2λ`
/// dropped.
pub fn sweep(lambda_grid: &str, total_grid: &str, out: &str, starts: usize, seed: u64) -> Result<()> {
    let lambdas = parse_grid(lambda_grid)?;
    for &l in &lambdas {
        positive("λ", l)?;
    }
    let fixed = if total_grid.trim() == "thresholds" { None } else { Some(parse_grid(total_grid)?) };
    let cells: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| {
            let totals = fixed.clone().unwrap_or_else(|| threshold_totals(l));
            totals.into_iter().filter(move |&t| t >= 2.0 * l).map(move |t| (l, t))
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(l, t)| sweep_cell(l, t, starts, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv_writer(out)?;
    w.write_record(["lambda", "Lambda", "count_closed_form", "count_oracle", "agree"])?;
    for c in rows {
        w.write_record([
            sci(c.lambda),
            sci(c.total),
            c.closed_form.to_string(),
            c.oracle.to_string(),
            (c.closed_form == c.oracle).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

type Curve = fn(f64, f64, f64) -> Result<f64, Error>;

/// Two curves of the same family over `λ ∈ (0, bound]` at fixed `x`, `Λ`.
pub fn curves(pair: &str, x: Option<f64>, total: Option<f64>, points: usize, out: &str) -> Result<()> {
    let (Some(x), Some(total)) = (x, total) else {
        return Err(Error::InvalidInput("--emit-curves needs --x and --Lambda".into()).into());
    };
    positive("x", x)?;
    if !total.is_finite() {
        return Err(Error::InvalidInput(format!("Λ must be finite, got {total}")).into());
    }
    if points == 0 {
        return Err(Error::InvalidInput("at least one point is required".into()).into());
    }
    let (names, bound, first, second): ([&str; 2], f64, Curve, Curve) = match pair.replace(' ', "").as_str() {
        "f,g" => (["f", "g"], x * x / 4.0, f_curve, g_curve),
        "h,delta" => (["h", "delta"], (1.0 + x) * (1.0 + x) / 4.0, h_curve, delta_curve),
        other => {
            return Err(Error::InvalidInput(format!("unknown curve pair `{other}`, expected f,g or h,delta")).into())
        }
    };
    let mut w = csv_writer(out)?;
    w.write_record(["lambda", names[0], names[1]])?;
    for i in 1..=points {
        let l = bound * i as f64 / points as f64;
        w.write_record([sci(l), sci(first(l, x, total)?), sci(second(l, x, total)?)])?;
    }
    w.flush()?;
    Ok(())
}
