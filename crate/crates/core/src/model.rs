//! Stochastic models, quantities of interest, input laws and input groups.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InputDistribution {
    StandardNormal,
    Uniform { low: f64, high: f64 },
}

impl InputDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            InputDistribution::StandardNormal => Ok(()),
            InputDistribution::Uniform { low, high } => {
                if low.is_finite() && high.is_finite() && low < high {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "uniform bounds must satisfy a < b, got ({low}, {high})"
                    )))
                }
            }
        }
    }

    pub fn sample(&self, stream: &mut NoiseStream) -> f64 {
        match *self {
            InputDistribution::StandardNormal => stream.standard_normal(),
            InputDistribution::Uniform { low, high } => stream.uniform(low, high),
        }
    }
}

impl fmt::Display for InputDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputDistribution::StandardNormal => f.write_str("normal"),
            InputDistribution::Uniform { low, high } => write!(f, "uniform({low},{high})"),
        }
    }
}

impl std::str::FromStr for InputDistribution {
    type Err = Error;

    /// Parses `normal` or `uniform(a,b)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "normal" || s == "standard-normal" {
            return Ok(InputDistribution::StandardNormal);
        }
        let inner = s
            .strip_prefix("uniform(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::invalid(format!("unknown input law {s:?}")))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("uniform law needs two bounds: {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad uniform bound {v:?}")))
        };
        let d = InputDistribution::Uniform {
            low: parse(a)?,
            high: parse(b)?,
        };
        d.validate()?;
        Ok(d)
    }
}

/// Per-coordinate laws of the independent inputs `X = (X_1, ..., X_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<InputDistribution>", into = "Vec<InputDistribution>")]
pub struct InputSpec {
    laws: Vec<InputDistribution>,
}

impl InputSpec {
    pub fn new(laws: Vec<InputDistribution>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        for law in &laws {
            law.validate()?;
        }
        Ok(InputSpec { laws })
    }

    pub fn standard_normal(p: usize) -> Result<Self> {
        Self::new(vec![InputDistribution::StandardNormal; p])
    }

    pub fn uniform(p: usize, low: f64, high: f64) -> Result<Self> {
        Self::new(vec![InputDistribution::Uniform { low, high }; p])
    }

    pub fn dimension(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[InputDistribution] {
        &self.laws
    }

    /// Draws one input vector, coordinate `j` from law `j`, in coordinate order.
    pub fn sample(&self, stream: &mut NoiseStream) -> Vec<f64> {
        self.laws.iter().map(|law| law.sample(stream)).collect()
    }
}

impl TryFrom<Vec<InputDistribution>> for InputSpec {
    type Error = Error;

    fn try_from(laws: Vec<InputDistribution>) -> Result<Self> {
        InputSpec::new(laws)
    }
}

impl From<InputSpec> for Vec<InputDistribution> {
    fn from(spec: InputSpec) -> Self {
        spec.laws
    }
}

/// A simulator `Y = f(X, Z)`. The model owns its noise `Z` and must draw it
/// only from the stream it is given.
pub trait StochasticModel: Send + Sync {
    fn name(&self) -> String;

    fn inputs(&self) -> &InputSpec;

    fn evaluate(&self, x: &[f64], noise: &mut NoiseStream) -> Result<f64>;

    fn dimension(&self) -> usize {
        self.inputs().dimension()
    }
}

pub type QoiFn =
    dyn Fn(&dyn StochasticModel, &[f64], &mut NoiseStream) -> Result<f64> + Send + Sync;

/// The function `φ(x, Z)` whose conditional mean is analysed.
///
/// A custom transform is a black box costing one budget unit per call.
/// Conditional-variance targets that need an inner mean must be
/// pre-composed by the caller.
#[derive(Clone, Default)]
pub enum Qoi {
    #[default]
    Identity,
    Custom {
        name: String,
        map: Arc<QoiFn>,
    },
}

impl Qoi {
    pub fn custom<F>(name: impl Into<String>, map: F) -> Self
    where
        F: Fn(&dyn StochasticModel, &[f64], &mut NoiseStream) -> Result<f64>
            + Send
            + Sync
            + 'static,
    {
        Qoi::Custom {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Qoi::Identity => "identity",
            Qoi::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Qoi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Qoi({})", self.name())
    }
}

/// One realization `φ(x, Z)`.
pub fn evaluate_phi(
    model: &dyn StochasticModel,
    qoi: &Qoi,
    x: &[f64],
    stream: &mut NoiseStream,
) -> Result<f64> {
    let p = model.dimension();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    match qoi {
        Qoi::Identity => model.evaluate(x, stream),
        Qoi::Custom { map, .. } => map(model, x, stream),
    }
}

/// `φ` bound to a model, counting every evaluation.
pub struct Phi<'a> {
    model: &'a dyn StochasticModel,
    qoi: &'a Qoi,
    calls: AtomicU64,
}

impl<'a> Phi<'a> {
    pub fn new(model: &'a dyn StochasticModel, qoi: &'a Qoi) -> Self {
        Phi {
            model,
            qoi,
            calls: AtomicU64::new(0),
        }
    }

    pub fn model(&self) -> &'a dyn StochasticModel {
        self.model
    }

    pub fn evaluate(&self, x: &[f64], stream: &mut NoiseStream) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        evaluate_phi(self.model, self.qoi, x, stream)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// A set of input coordinates, 1-based as in `u ⊂ {1, ..., p}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Group {
    members: Vec<usize>,
}

impl Group {
    /// Builds a group from 1-based coordinates in any order.
    pub fn new(coords: &[usize]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a group needs at least one coordinate"));
        }
        let mut members = coords.to_vec();
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "repeated coordinate in group {coords:?}"
            )));
        }
        if members[0] == 0 {
            return Err(Error::invalid("group coordinates are 1-based"));
        }
        Ok(Group { members })
    }

    /// Sorted 1-based coordinates.
    pub fn coords(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, coord: usize) -> bool {
        self.members.binary_search(&coord).is_ok()
    }

    /// `{1..p} \ u`, or `None` when `u` is the full set.
    pub fn complement(&self, p: usize) -> Option<Group> {
        let rest: Vec<usize> = (1..=p).filter(|c| !self.contains(*c)).collect();
        if rest.is_empty() {
            None
        } else {
            Some(Group { members: rest })
        }
    }

    /// Label such as `1` or `1+3`.
    pub fn label(&self) -> String {
        self.members
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    /// Parses `2`, `1+3` or `1,3`.
    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .split(['+', ','])
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad group {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Group::new(&coords)
    }
}

impl Serialize for Group {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Group {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<usize>::deserialize(d)?;
        Group::new(&coords).map_err(serde::de::Error::custom)
    }
}

/// The `l` groups `u_1, ..., u_l` whose indices are estimated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSpec {
    groups: Vec<Group>,
}

impl GroupSpec {
    pub fn new(p: usize, groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("at least one group is required"));
        }
        for g in &groups {
            if let Some(&c) = g.coords().iter().find(|&&c| c > p) {
                return Err(Error::invalid(format!(
                    "coordinate {c} out of range 1..={p} in group {g}"
                )));
            }
        }
        Ok(GroupSpec { groups })
    }

    /// One singleton group per coordinate.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new(p, (1..=p).map(|c| Group { members: vec![c] }).collect())
    }

    /// Appends `∼u` for every group whose complement is not already listed,
    /// so that total indices can be reported.
    pub fn with_complements(&self, p: usize) -> Self {
        let mut groups = self.groups.clone();
        for g in &self.groups {
            if let Some(c) = g.complement(p) {
                if !groups.contains(&c) {
                    groups.push(c);
                }
            }
        }
        GroupSpec { groups }
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}
