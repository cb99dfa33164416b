//! Activities, the admissibility graph and boundary-law solutions.
//!
//! Spin 0 is the hub of the admissibility graph: it is adjacent to every
//! spin, itself included. Its activity and its boundary-law coordinate are
//! both normalised to 1, so neither ever appears in the maps below.
//!
//! Non-loop activities come in two buckets. A finite `tail` lists the
//! spins that the chain and sampler treat as concrete states; `tail_mass`
//! carries the analytic sum of every remaining activity. The solvers only
//! ever see the total `Λ`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawActivitySpec<T>", bound = "T: Scalar")]
pub struct ActivitySpec<T> {
    pub k: u32,
    pub loops: BTreeMap<i64, T>,
    pub tail: BTreeMap<i64, T>,
    pub tail_mass: T,
    /// Sum of squared activities over the unlisted tail. Only the transition
    /// kernel needs it; `None` reads the whole tail as a single spin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_sq_mass: Option<T>,
    pub divergent: bool,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawActivitySpec<T> {
    #[serde(default = "default_k")]
    k: u32,
    #[serde(default)]
    loops: BTreeMap<i64, T>,
    #[serde(default)]
    tail: BTreeMap<i64, T>,
    #[serde(default)]
    tail_mass: Option<T>,
    #[serde(default)]
    tail_sq_mass: Option<T>,
    #[serde(default)]
    divergent: bool,
}

fn default_k() -> u32 {
    2
}

impl<T: Scalar> TryFrom<RawActivitySpec<T>> for ActivitySpec<T> {
    type Error = Error;

    fn try_from(raw: RawActivitySpec<T>) -> Result<Self> {
        let spec = ActivitySpec {
            k: raw.k,
            loops: raw.loops,
            tail: raw.tail,
            tail_mass: raw.tail_mass.unwrap_or_else(T::zero),
            tail_sq_mass: raw.tail_sq_mass,
            divergent: raw.divergent,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl<T: Scalar> ActivitySpec<T> {
    /// Finite spec with branching order 2.
    pub fn new(
        loops: impl IntoIterator<Item = (i64, T)>,
        tail: impl IntoIterator<Item = (i64, T)>,
        tail_mass: T,
    ) -> Result<Self> {
        let spec = ActivitySpec {
            k: 2,
            loops: loops.into_iter().collect(),
            tail: tail.into_iter().collect(),
            tail_mass,
            tail_sq_mass: None,
            divergent: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec whose non-loop activities form a divergent series.
    pub fn divergent(loops: impl IntoIterator<Item = (i64, T)>) -> Result<Self> {
        let spec = ActivitySpec {
            k: 2,
            loops: loops.into_iter().collect(),
            tail: BTreeMap::new(),
            tail_mass: T::zero(),
            tail_sq_mass: None,
            divergent: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_k(mut self, k: u32) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tail_sq_mass(mut self, sq: T) -> Result<Self> {
        self.tail_sq_mass = Some(sq);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidInput("branching order k must be at least 1".into()));
        }
        for (bucket, map) in [("loops", &self.loops), ("tail", &self.tail)] {
            for (&i, &v) in map {
                if i == 0 {
                    return Err(Error::InvalidInput(format!(
                        "spin 0 may not appear in `{bucket}`; its activity is fixed to 1"
                    )));
                }
                if !(v.is_finite() && v > T::zero()) {
                    return Err(Error::InvalidInput(format!(
                        "activity of spin {i} in `{bucket}` must be finite and positive, got {v}"
                    )));
                }
            }
        }
        if let Some(i) = self.loops.keys().find(|i| self.tail.contains_key(i)) {
            return Err(Error::InvalidInput(format!(
                "spin {i} is listed both as a loop and in the tail"
            )));
        }
        if !(self.tail_mass.is_finite() && self.tail_mass >= T::zero()) {
            return Err(Error::InvalidInput(format!(
                "tail_mass must be finite and nonnegative, got {}",
                self.tail_mass
            )));
        }
        if let Some(sq) = self.tail_sq_mass {
            let max = self.tail_mass * self.tail_mass;
            if !(sq.is_finite() && sq >= T::zero()) || sq > max * (T::one() + T::epsilon()) {
                return Err(Error::InvalidInput(format!(
                    "tail_sq_mass must lie in [0, tail_mass^2 = {max}], got {sq}"
                )));
            }
            if sq == T::zero() && self.tail_mass > T::zero() {
                return Err(Error::InvalidInput(
                    "tail_sq_mass must be positive when tail_mass is".into(),
                ));
            }
        }
        Ok(())
    }

    /// `Λ`, the sum of every nonzero-spin activity; `+∞` when divergent.
    pub fn total_activity(&self) -> T {
        if self.divergent {
            return T::infinity();
        }
        self.loop_mass() + self.tail.values().copied().sum::<T>() + self.tail_mass
    }

    /// Sum of the loop activities.
    pub fn loop_mass(&self) -> T {
        self.loops.values().copied().sum()
    }

    /// `Σ λ_j²` over the unlisted tail.
    pub fn tail_square_mass(&self) -> T {
        self.tail_sq_mass.unwrap_or(self.tail_mass * self.tail_mass)
    }

    /// Activity of a listed spin; `λ_0 = 1`.
    pub fn activity(&self, i: i64) -> Option<T> {
        if i == 0 {
            return Some(T::one());
        }
        self.loops.get(&i).or_else(|| self.tail.get(&i)).copied()
    }

    /// Largest absolute label among listed spins.
    pub fn max_index(&self) -> u64 {
        self.loops
            .keys()
            .chain(self.tail.keys())
            .map(|i| i.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn graph(&self) -> Result<AdmissibilityGraph> {
        AdmissibilityGraph::new(self.loops.keys().copied())
    }
}

/// Sum of all nonzero-spin activities (`+∞` when divergent).
pub fn total_activity<T: Scalar>(spec: &ActivitySpec<T>) -> T {
    spec.total_activity()
}

/// Hub-plus-loops admissibility graph on `ℤ`: `a_{i0} = a_{0i} = 1`,
/// `a_{ii} = 1` exactly for loop spins, everything else 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct AdmissibilityGraph {
    loops: BTreeSet<i64>,
}

impl AdmissibilityGraph {
    pub fn new(loops: impl IntoIterator<Item = i64>) -> Result<Self> {
        let loops: BTreeSet<i64> = loops.into_iter().collect();
        if loops.contains(&0) {
            return Err(Error::InvalidInput(
                "spin 0 always carries a loop and may not be listed".into(),
            ));
        }
        if loops.is_empty() || loops.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "graphs need one or two nonzero loop spins, got {}",
                loops.len()
            )));
        }
        Ok(AdmissibilityGraph { loops })
    }

    pub fn two_loop(i: i64) -> Result<Self> {
        Self::new([i])
    }

    pub fn three_loop(i: i64, j: i64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidInput("the two loop spins must differ".into()));
        }
        Self::new([i, j])
    }

    pub fn loops(&self) -> &BTreeSet<i64> {
        &self.loops
    }

    pub fn is_loop(&self, i: i64) -> bool {
        self.loops.contains(&i)
    }

    pub fn adjacency(&self, i: i64, j: i64) -> u8 {
        u8::from(i == 0 || j == 0 || (i == j && self.loops.contains(&i)))
    }

    /// Adjacency on chain states; every unlisted spin is a non-loop spin.
    pub fn state_adjacency(&self, a: State, b: State) -> u8 {
        match (a, b) {
            (State::Spin(i), State::Spin(j)) => self.adjacency(i, j),
            (State::Spin(0), State::Tail) | (State::Tail, State::Spin(0)) => 1,
            _ => 0,
        }
    }
}

impl TryFrom<Vec<i64>> for AdmissibilityGraph {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AdmissibilityGraph> for Vec<i64> {
    fn from(g: AdmissibilityGraph) -> Self {
        g.loops.into_iter().collect()
    }
}

pub fn adjacency(graph: &AdmissibilityGraph, i: i64, j: i64) -> u8 {
    graph.adjacency(i, j)
}

/// Which closed-form branch produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "symmetric")]
    Symmetric,
    #[serde(rename = "asymmetric-A1")]
    AsymmetricA1,
    #[serde(rename = "asymmetric-A1-swapped")]
    AsymmetricA1Swapped,
    #[serde(rename = "asymmetric-A2")]
    AsymmetricA2,
    #[serde(rename = "asymmetric-A2-swapped")]
    AsymmetricA2Swapped,
    /// Larger root `z⁽¹⁾` of the loop quadratic.
    #[serde(rename = "two-loop-f")]
    TwoLoopF,
    /// Smaller root `z⁽²⁾ = 1/z⁽¹⁾`.
    #[serde(rename = "two-loop-g")]
    TwoLoopG,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("branch serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// Translation-invariant boundary law reduced to the aggregate
/// `A = Σ_{j≠0} z_j` and the loop coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundaryLawSolution<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "z")]
    pub loop_z: BTreeMap<i64, T>,
    pub branch: Branch,
    pub residual: T,
}

/// A chain state: a concrete spin, or the super-state standing for every
/// unlisted non-loop spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Spin(i64),
    Tail,
}

impl State {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Spin(i) => write!(f, "{i}"),
            State::Tail => f.write_str("TAIL"),
        }
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            State::Spin(i) => s.serialize_i64(*i),
            State::Tail => s.serialize_str("TAIL"),
        }
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(State::Spin(i)),
            Repr::Str(s) if s == "TAIL" => Ok(State::Tail),
            Repr::Str(s) => s
                .parse()
                .map(State::Spin)
                .map_err(|_| serde::de::Error::custom(format!("unknown state `{s}`"))),
        }
    }
}
