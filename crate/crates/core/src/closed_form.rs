//! Closed-form optimal placement.
//!
//! The reduced problem maximizes `Σ t/(t+1) y_t` subject to
//! `Σ q_t y_t ≤ 1` (placement rate below delivery rate), `Σ y_t ≤ 1` and
//! `y ≥ 0`. Which constraint binds depends on where ρ sits relative to the
//! γ thresholds, and which type wins depends on where α sits relative to
//! the σ thresholds:
//!
//! * `ρ = 0`: only the partition constraint binds and `y_K = 1`.
//! * `q_1 > 1`: only the rate constraint binds; a single type `t` with
//!   `y_t = 1/q_t`, chosen by `σ_t ≤ α < σ_{t−1}`.
//! * `q_a ≤ 1 < q_{a+1}`: either both constraints are tight on the pair
//!   `(a, a+1)` (when `α ≥ σ_a`) or a single type `j > a` with `y_j = 1/q_j`.
//!
//! Threshold ties (α within tolerance of some σ_t) resolve toward the larger
//! coded type. The objective is identical on both sides of a tie.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{objective, SystemConfig, Thresholds, TypeAllocation};
use crate::scalar::Scalar;

/// Which constraints of the reduced problem bind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum Regime {
    /// `q_1 > 1`: placement cost dominates every type.
    CostLimited,
    /// `ρ = 0`.
    FreePlacement,
    /// `q_a ≤ 1 < q_b` with `b = a + 1`.
    ArchitectureLimited { a: usize, b: usize },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::CostLimited => "cost-limited",
            Regime::FreePlacement => "free-placement",
            Regime::ArchitectureLimited { .. } => "architecture-limited",
        }
    }

    /// Boundary type `a`, if any.
    pub fn boundary(&self) -> Option<usize> {
        match self {
            Regime::ArchitectureLimited { a, .. } => Some(*a),
            _ => None,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::ArchitectureLimited { a, b } => write!(f, "{}(a={a}, b={b})", self.label()),
            _ => f.write_str(self.label()),
        }
    }
}

/// An allocation together with its regime and rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution<T> {
    pub allocation: TypeAllocation<T>,
    pub regime: Regime,
    /// Types (including 0) with a strictly positive share.
    pub support: Vec<usize>,
    pub r_placement: T,
    pub r_delivery: T,
    pub objective: T,
}

impl<T: Scalar> OptimalSolution<T> {
    pub fn from_allocation(
        config: &SystemConfig<T>,
        regime: Regime,
        allocation: TypeAllocation<T>,
    ) -> Self {
        let obj = objective(&allocation);
        Self {
            support: allocation.support(),
            r_placement: config.rate_placement(&allocation),
            r_delivery: T::of_usize(config.users()) - T::of_usize(config.users() + 1) * obj,
            objective: obj,
            allocation,
            regime,
        }
    }

    /// Support restricted to coded types `1..=K`.
    pub fn coded_support(&self) -> Vec<usize> {
        self.support.iter().copied().filter(|&t| t > 0).collect()
    }

    /// Coded type holding the largest share; ties go to the larger type.
    /// Returns 0 when nothing is cached.
    pub fn dominant_type(&self) -> usize {
        let y = self.allocation.shares();
        let mut best = 0;
        for t in self.coded_support() {
            if best == 0 || y[t] >= y[best] - T::TOL {
                best = t;
            }
        }
        best
    }

    /// Checks support size, both constraints, non-negativity and `R_o ≤ R_p`.
    pub fn check_invariants(&self, config: &SystemConfig<T>) -> Result<()> {
        let th = config.thresholds();
        let y = self.allocation.shares();
        let coded = self.coded_support();
        if coded.len() > 2 {
            return Err(Error::Invariant(format!(
                "support {:?} has more than two coded types",
                coded
            )));
        }
        if let Some(v) = y.iter().find(|v| **v < -T::TOL) {
            return Err(Error::Invariant(format!("negative share {v}")));
        }
        let rate_lhs = (1..=config.users()).fold(T::zero(), |acc, t| acc + th.q(t) * y[t]);
        if rate_lhs > T::one() + T::TOL {
            return Err(Error::Invariant(format!("Σ q_t y_t = {rate_lhs} exceeds 1")));
        }
        let cached = y.iter().skip(1).fold(T::zero(), |a, &b| a + b);
        if cached > T::one() + T::TOL {
            return Err(Error::Invariant(format!("Σ y_t = {cached} exceeds 1")));
        }
        if self.r_placement > self.r_delivery + T::TOL {
            return Err(Error::Invariant(format!(
                "placement rate {} exceeds delivery rate {}",
                self.r_placement, self.r_delivery
            )));
        }
        Ok(())
    }
}

/// Classifies which constraints bind for `config`.
pub fn classify_regime<T: Scalar>(config: &SystemConfig<T>) -> Regime {
    classify_with(config, &config.thresholds())
}

fn classify_with<T: Scalar>(config: &SystemConfig<T>, th: &Thresholds<T>) -> Regime {
    let k = config.users();
    if config.rho() == T::zero() {
        return Regime::FreePlacement;
    }
    if th.q(1) > T::one() + T::TOL {
        return Regime::CostLimited;
    }
    // q is increasing in t, and q_K > 1 whenever ρ > 0, so a < K unless
    // q_K sits within tolerance of 1.
    let a = (1..k)
        .take_while(|&t| th.q(t) <= T::one() + T::TOL)
        .last()
        .unwrap_or(1);
    if k == 1 {
        return Regime::CostLimited;
    }
    Regime::ArchitectureLimited { a, b: a + 1 }
}

/// Best single coded type within `lo..=hi` when only the rate constraint binds.
///
/// Type `t` beats `t + 1` exactly when `α ≥ σ_t`, and σ is decreasing, so
/// the winner is the first `t` in the range with α above σ_t. Ranges not
/// reaching down to 1 or up to K clamp to their ends.
pub fn optimal_type_single<T: Scalar>(
    config: &SystemConfig<T>,
    candidates: std::ops::RangeInclusive<usize>,
) -> usize {
    single_with(config, &config.thresholds(), candidates)
}

fn single_with<T: Scalar>(
    config: &SystemConfig<T>,
    th: &Thresholds<T>,
    candidates: std::ops::RangeInclusive<usize>,
) -> usize {
    let (lo, hi) = (*candidates.start(), *candidates.end());
    assert!(
        1 <= lo && lo <= hi && hi <= config.users(),
        "candidate range {lo}..={hi} outside 1..={}",
        config.users()
    );
    (lo..hi)
        .find(|&t| config.alpha() > th.sigma(t) + T::TOL)
        .unwrap_or(hi)
}

/// Optimal allocation for `config`.
pub fn solve<T: Scalar>(config: &SystemConfig<T>) -> OptimalSolution<T> {
    let k = config.users();
    let th = config.thresholds();
    let regime = classify_with(config, &th);
    let single = |t: usize| (t, T::one() / th.q(t));

    let coded: Vec<(usize, T)> = match regime {
        Regime::FreePlacement => vec![(k, T::one())],
        Regime::CostLimited => vec![single(single_with(config, &th, 1..=k))],
        Regime::ArchitectureLimited { a, b } => {
            if config.alpha() > th.sigma(a) + T::TOL {
                let (qa, qb) = (th.q(a), th.q(b));
                if qa >= T::one() {
                    // q_a within tolerance above 1: the intersection collapses onto y_a
                    vec![single(a)]
                } else {
                    vec![(a, (qb - T::one()) / (qb - qa)), (b, (T::one() - qa) / (qb - qa))]
                }
            } else {
                vec![single(single_with(config, &th, b..=k))]
            }
        }
    };

    let allocation = TypeAllocation::from_coded(k, &coded)
        .expect("closed-form shares are non-negative and sum to at most 1");
    OptimalSolution::from_allocation(config, regime, allocation)
}

/// True when uncoded delivery (`y` supported on `{0, K}`) is optimal for every ρ:
/// `α ≤ σ_{K−1}`.
pub fn uncoded_is_optimal<T: Scalar>(config: &SystemConfig<T>) -> bool {
    let th = config.thresholds();
    config.alpha() <= th.sigma(config.users() - 1) + T::TOL
}

/// Best allocation supported on `{0, K}`: `y_K = min(1, 1/q_K)`.
pub fn uncoded_baseline<T: Scalar>(config: &SystemConfig<T>) -> OptimalSolution<T> {
    let k = config.users();
    let th = config.thresholds();
    let yk = T::one().min(T::one() / th.q(k));
    let allocation = TypeAllocation::from_coded(k, &[(k, yk)]).expect("0 <= y_K <= 1");
    OptimalSolution::from_allocation(config, classify_with(config, &th), allocation)
}
