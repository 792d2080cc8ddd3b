//! Splitting a per-branch budget `T = n m` between explorations and
//! repetitions, and completing the pilot evaluations under the global cap
//! `T (l + 1)`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// How the pilot mean squared difference is turned into `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMode {
    /// `ρ̂ = mean (φ1 - φ2)²`, plugged directly into `m_opt`.
    #[default]
    PaperLiteral,
    /// Half of the above, an unbiased estimate of `E Var(φ | X)`.
    Corrected,
}

impl FromStr for RhoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" | "literal" => Ok(RhoMode::PaperLiteral),
            "corrected" => Ok(RhoMode::Corrected),
            _ => Err(Error::invalid(format!("unknown rho mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub value: f64,
    pub mode: RhoMode,
    pub r0: u64,
    #[serde(skip)]
    pub pilot: Vec<(f64, f64)>,
}

/// Intrinsic-noise magnitude from `r0` pairs of evaluations sharing an input.
pub fn estimate_rho(pilot: &[(f64, f64)], mode: RhoMode) -> Result<RhoEstimate> {
    if pilot.is_empty() {
        return Err(Error::invalid("empty pilot"));
    }
    let msd = pilot
        .iter()
        .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
        / pilot.len() as f64;
    let value = match mode {
        RhoMode::PaperLiteral => msd,
        RhoMode::Corrected => msd / 2.0,
    };
    Ok(RhoEstimate {
        value,
        mode,
        r0: pilot.len() as u64,
        pilot: pilot.to_vec(),
    })
}

/// `κ_opt = (2 ρ²)^{1/3}`.
pub fn kappa_opt(rho: f64) -> f64 {
    (2.0 * rho * rho).cbrt()
}

/// Real-valued `m_opt(T) = (2 ρ²)^{1/3} T^{1/3}`.
pub fn m_opt_real(rho: f64, budget: u64) -> f64 {
    kappa_opt(rho) * (budget as f64).cbrt()
}

/// `m_opt` rounded to nearest (ties up) and clamped to `[1, T]`.
pub fn m_opt(rho: f64, budget: u64) -> u64 {
    round_clamped(m_opt_real(rho, budget), budget)
}

fn round_clamped(x: f64, budget: u64) -> u64 {
    let r = (x + 0.5).floor();
    if r.is_nan() || r < 1.0 {
        1
    } else if r >= budget as f64 {
        budget.max(1)
    } else {
        r as u64
    }
}

/// Bias-variance surrogate `1/n + (ρ/m)²` with `m = κ T^{1/3}`, `n = T/m`.
pub fn bvt(kappa: f64, rho: f64, budget: u64) -> f64 {
    let t23 = (budget as f64).powf(-2.0 / 3.0);
    kappa * t23 + rho * rho / (kappa * kappa) * t23
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Constant number of repetitions.
    Fixed(u64),
    /// `m = round(√T)`.
    Sqrt,
    /// `m = m_opt(ρ̂, T)`.
    Opt,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Fixed(c) => write!(f, "fixed({c})"),
            Strategy::Sqrt => f.write_str("sqrt"),
            Strategy::Opt => f.write_str("opt"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Accepts `opt`, `sqrt`, `fixed(5)`, `fixed:5` and `fixed5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "opt" => return Ok(Strategy::Opt),
            "sqrt" => return Ok(Strategy::Sqrt),
            _ => {}
        }
        let c = s
            .strip_prefix("fixed")
            .map(|r| r.trim_start_matches(['(', ':']).trim_end_matches(')'))
            .and_then(|r| r.parse::<u64>().ok())
            .filter(|&c| c >= 1)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))?;
        Ok(Strategy::Fixed(c))
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub budget: u64,
    pub m: u64,
    pub n: u64,
    pub strategy: Strategy,
    pub rho: Option<f64>,
}

pub fn plan(budget: u64, strategy: Strategy, rho: Option<f64>) -> Result<AllocationPlan> {
    if budget == 0 {
        return Err(Error::invalid("budget must be positive"));
    }
    let (m, rho) = match strategy {
        Strategy::Fixed(c) => (c, None),
        Strategy::Sqrt => (round_clamped((budget as f64).sqrt(), budget), None),
        Strategy::Opt => {
            let rho = rho.ok_or_else(|| Error::invalid("the opt strategy needs a rho estimate"))?;
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(Error::invalid(format!(
                    "rho must be finite and non-negative, got {rho}"
                )));
            }
            (m_opt(rho, budget), Some(rho))
        }
    };
    if m == 0 || m > budget {
        return Err(Error::invalid(format!(
            "m={m} leaves no exploration in a budget of {budget}"
        )));
    }
    Ok(AllocationPlan {
        budget,
        m,
        n: budget / m,
        strategy,
        rho,
    })
}

/// Rectangle of zero-based cells `rows × reps` of the base branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBlock {
    pub rows: Range<u64>,
    pub reps: Range<u64>,
}

impl CellBlock {
    pub fn len(&self) -> u64 {
        (self.rows.end.saturating_sub(self.rows.start))
            * (self.reps.end.saturating_sub(self.reps.start))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// New base-branch cells on top of the pilot, and the `(n', m')` actually
/// used for estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionPlan {
    pub blocks: Vec<CellBlock>,
    pub n: u64,
    pub m: u64,
}

impl CompletionPlan {
    pub fn count(&self) -> u64 {
        self.blocks.iter().map(CellBlock::len).sum()
    }

    /// Zero-based `(exploration, repetition)` cells, block by block.
    pub fn cells(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.blocks.iter().flat_map(|b| {
            b.rows
                .clone()
                .flat_map(move |i| b.reps.clone().map(move |k| (i, k)))
        })
    }
}

/// Which cells to evaluate once the `r0 × 2` pilot exists, for `l` groups.
///
/// Cells are zero-based; pilot cells are `(i, k)` with `i < r0`, `k < 2`.
pub fn completion_plan(n: u64, m: u64, r0: u64, l: u64) -> Result<CompletionPlan> {
    if n == 0 || m == 0 || r0 == 0 || l == 0 {
        return Err(Error::invalid(format!(
            "completion needs positive n, m, r0, l (got {n}, {m}, {r0}, {l})"
        )));
    }
    let groups = l + 1;
    if n >= r0 {
        if m >= 2 {
            return Ok(CompletionPlan {
                blocks: vec![
                    CellBlock {
                        rows: 0..r0,
                        reps: 2..m,
                    },
                    CellBlock {
                        rows: r0..n,
                        reps: 0..m,
                    },
                ],
                n,
                m,
            });
        }
        let trimmed = n.checked_sub(r0 + r0.div_ceil(groups)).filter(|&v| v >= 1);
        return match trimmed {
            Some(n_used) => Ok(CompletionPlan {
                blocks: vec![CellBlock {
                    rows: r0..n_used.max(r0),
                    reps: 0..1,
                }],
                n: n_used,
                m: 1,
            }),
            None => Err(Error::BudgetAlreadyConsumed { n, m, r0, l }),
        };
    }
    // 2 ⌈(r0/n - 1) / (l + 1)⌉ in integer arithmetic
    let reduction = 2 * (r0 - n).div_ceil(n * groups);
    if m > 2 + reduction {
        let m_used = m - reduction;
        Ok(CompletionPlan {
            blocks: vec![CellBlock {
                rows: 0..n,
                reps: 2..m_used,
            }],
            n,
            m: m_used,
        })
    } else {
        Err(Error::BudgetAlreadyConsumed { n, m, r0, l })
    }
}

/// Hard cap on model evaluations; charging is atomic.
#[derive(Debug)]
pub struct BudgetLedger {
    capacity: u64,
    spent: AtomicU64,
}

impl BudgetLedger {
    pub fn new(capacity: u64) -> Self {
        BudgetLedger {
            capacity,
            spent: AtomicU64::new(0),
        }
    }

    /// Ledger for `l` groups at per-branch budget `T`: capacity `T (l + 1)`.
    pub fn for_run(budget: u64, groups: u64) -> Self {
        Self::new(budget * (groups + 1))
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn spent(&self) -> u64 {
        self.spent.load(Ordering::SeqCst)
    }

    /// Reserves `count` evaluations, failing without side effects when the
    /// capacity would be exceeded.
    pub fn charge(&self, count: u64) -> Result<u64> {
        let capacity = self.capacity;
        self.spent
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |spent| {
                spent.checked_add(count).filter(|&s| s <= capacity)
            })
            .map(|prev| prev + count)
            .map_err(|spent| Error::BudgetExceeded {
                capacity,
                spent,
                requested: count,
            })
    }
}
