//! Grid comparison of the closed-form solver against the vertex oracle.

use serde::Serialize;

use crate::closed_form::{solve, Regime};
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::oracle::{check_claims, oracle_solve};

/// Objective discrepancy tolerated between closed form and oracle.
pub const AGREEMENT_TOL: f64 = 1e-9;

/// Evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![min],
        _ => (0..steps)
            .map(|i| {
                if i + 1 == steps {
                    max
                } else {
                    min + (max - min) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

/// The set of configurations to cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyGrid {
    points: Vec<SystemConfig<f64>>,
}

impl VerifyGrid {
    /// Every `K` in `users`, `N = m·K` for every `m` in `file_multipliers`,
    /// and the `rho × alpha` product.
    pub fn product(
        users: &[usize],
        file_multipliers: &[usize],
        rho: &[f64],
        alpha: &[f64],
        allow_rho_gt_1: bool,
    ) -> Result<Self> {
        if users.is_empty() || file_multipliers.is_empty() || rho.is_empty() || alpha.is_empty() {
            return Err(Error::InvalidSweep("verification grid is empty".into()));
        }
        let mut points = Vec::with_capacity(users.len() * file_multipliers.len() * rho.len() * alpha.len());
        for &k in users {
            for &m in file_multipliers {
                for &r in rho {
                    for &a in alpha {
                        let cfg = if allow_rho_gt_1 {
                            SystemConfig::with_unbounded_rho(k, m * k, r, a)?
                        } else {
                            SystemConfig::new(k, m * k, r, a)?
                        };
                        points.push(cfg);
                    }
                }
            }
        }
        Ok(Self { points })
    }

    pub fn single(config: SystemConfig<f64>) -> Self {
        Self { points: vec![config] }
    }

    pub fn points(&self) -> &[SystemConfig<f64>] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub points: usize,
    pub max_discrepancy: f64,
    pub worst_config: Option<SystemConfig<f64>>,
    /// Points where the allocations differ but objectives tie.
    pub tied_allocation_differences: usize,
    /// Points where the objectives differ beyond tolerance.
    pub allocation_mismatches: usize,
    /// Closed-form solutions failing support, feasibility or rate-order checks.
    pub invariant_violations: usize,
    pub claims_checked: usize,
    pub claims_passed: usize,
    /// Offending configurations with a reason, capped at 20.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.max_discrepancy <= AGREEMENT_TOL
            && self.allocation_mismatches == 0
            && self.invariant_violations == 0
            && self.claims_passed == self.claims_checked
    }
}

/// Solves every grid point both ways and checks the claims where they apply.
pub fn run_verify(grid: &VerifyGrid) -> VerifyReport {
    let mut report = VerifyReport {
        points: grid.points.len(),
        max_discrepancy: 0.0,
        worst_config: None,
        tied_allocation_differences: 0,
        allocation_mismatches: 0,
        invariant_violations: 0,
        claims_checked: 0,
        claims_passed: 0,
        failures: Vec::new(),
    };
    let fail = |report: &mut VerifyReport, cfg: &SystemConfig<f64>, why: String| {
        if report.failures.len() < 20 {
            report.failures.push(format!(
                "K={} N={} rho={} alpha={}: {why}",
                cfg.users(),
                cfg.files(),
                cfg.rho(),
                cfg.alpha()
            ));
        }
    };

    for cfg in &grid.points {
        let closed = solve(cfg);
        let oracle = oracle_solve(cfg);
        let gap = (closed.objective - oracle.objective).abs();
        if gap > report.max_discrepancy || report.worst_config.is_none() {
            report.max_discrepancy = report.max_discrepancy.max(gap);
            report.worst_config = Some(*cfg);
        }
        let differ = closed
            .allocation
            .shares()
            .iter()
            .zip(oracle.allocation.shares())
            .any(|(a, b)| (a - b).abs() > AGREEMENT_TOL);
        if gap > AGREEMENT_TOL {
            report.allocation_mismatches += 1;
            fail(&mut report, cfg, format!("objective gap {gap:e}"));
        } else if differ {
            report.tied_allocation_differences += 1;
        }
        if let Err(e) = closed.check_invariants(cfg) {
            report.invariant_violations += 1;
            fail(&mut report, cfg, e.to_string());
        }
        if matches!(closed.regime, Regime::ArchitectureLimited { .. }) {
            report.claims_checked += 1;
            match check_claims(cfg) {
                Ok(c) if c.all_hold() => report.claims_passed += 1,
                Ok(c) => fail(&mut report, cfg, format!("claims failed: {c:?}")),
                Err(e) => fail(&mut report, cfg, e.to_string()),
            }
        }
    }
    report
}
