//! Spec-level entry points: pick the solver from the loop count, relabel
//! canonical loops `1, 2` to the spec's own labels, and recompute residuals
//! against the full system including the listed tail.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::boundary_law::solution_residual;
use crate::error::{Error, Result};
use crate::model::{ActivitySpec, BoundaryLawSolution};
use crate::regime::RegimeReport;
use crate::scalar::Scalar;
use crate::three_loop::{self, ThreeLoopProblem};
use crate::two_loop::{self, TwoLoopProblem};

/// Loops at `{0, i}` or at `{0, i, j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    TwoLoop,
    ThreeLoop,
}

impl GraphKind {
    pub fn of<T: Scalar>(spec: &ActivitySpec<T>) -> Result<Self> {
        match spec.loops.len() {
            1 => Ok(GraphKind::TwoLoop),
            2 => Ok(GraphKind::ThreeLoop),
            n => Err(Error::InvalidInput(format!(
                "expected one or two nonzero loops, got {n}"
            ))),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::TwoLoop => "two-loop",
            GraphKind::ThreeLoop => "three-loop",
        })
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-loop" => Ok(GraphKind::TwoLoop),
            "three-loop" => Ok(GraphKind::ThreeLoop),
            other => Err(Error::InvalidInput(format!(
                "unknown graph `{other}`, expected two-loop or three-loop"
            ))),
        }
    }
}

fn relabel<T: Scalar>(
    mut solutions: Vec<BoundaryLawSolution<T>>,
    spec: &ActivitySpec<T>,
) -> Result<Vec<BoundaryLawSolution<T>>> {
    let graph = spec.graph()?;
    let labels: Vec<i64> = spec.loops.keys().copied().collect();
    for s in &mut solutions {
        let canonical = std::mem::take(&mut s.loop_z);
        s.loop_z = canonical
            .into_values()
            .zip(&labels)
            .map(|(z, &l)| (l, z))
            .collect::<BTreeMap<_, _>>();
        s.residual = solution_residual(spec, &graph, s)?;
    }
    Ok(solutions)
}

/// Every positive solution for the spec. `expected`, when given, must match
/// the graph implied by the loop count.
pub fn solve_spec<T: Scalar>(
    spec: &ActivitySpec<T>,
    expected: Option<GraphKind>,
) -> Result<Vec<BoundaryLawSolution<T>>> {
    let kind = GraphKind::of(spec)?;
    if let Some(want) = expected.filter(|&w| w != kind) {
        return Err(Error::InvalidInput(format!(
            "spec has {} loop(s), which is the {kind} graph, not {want}",
            spec.loops.len()
        )));
    }
    if spec.divergent {
        return Err(Error::DivergentActivities);
    }
    let raw = match kind {
        GraphKind::TwoLoop => two_loop::solve_all(&TwoLoopProblem::from_spec(spec)?)?,
        GraphKind::ThreeLoop => three_loop::enumerate_solutions(&ThreeLoopProblem::from_spec(spec)?)?,
    };
    relabel(raw, spec)
}

/// Regime report for the spec; divergent specs report zero measures.
pub fn classify_spec<T: Scalar>(spec: &ActivitySpec<T>) -> Result<RegimeReport<T>> {
    match GraphKind::of(spec)? {
        GraphKind::TwoLoop => two_loop::classify(&TwoLoopProblem::from_spec(spec)?),
        GraphKind::ThreeLoop => Ok(three_loop::classify(&ThreeLoopProblem::from_spec(spec)?)),
    }
}
