//! Vertex enumeration of the reduced placement LP.
//!
//! With only two non-trivial constraints every basic feasible solution has
//! at most two positive coordinates, so the vertex set is the origin, one
//! point per type, and one intersection per pair of types. Enumerating those
//! `1 + K + C(K,2)` candidates and taking the best feasible one solves the
//! LP exactly, independently of the regime analysis in
//! [`closed_form`](crate::closed_form).

use serde::Serialize;

use crate::closed_form::{classify_regime, OptimalSolution, Regime};
use crate::error::{Error, Result};
use crate::model::{SystemConfig, Thresholds, TypeAllocation};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VertexKind {
    Origin,
    SingleType,
    PairIntersection,
}

/// A candidate corner point with its positive coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex<T> {
    pub kind: VertexKind,
    /// Type indices, ascending.
    pub types: Vec<usize>,
    /// `y` value for each entry of `types`.
    pub values: Vec<T>,
    pub objective: T,
    pub feasible: bool,
}

impl<T: Scalar> Vertex<T> {
    fn weight(t: usize) -> T {
        T::of_usize(t) / T::of_usize(t + 1)
    }

    fn new(kind: VertexKind, types: Vec<usize>, values: Vec<T>, feasible: bool) -> Self {
        let objective = types
            .iter()
            .zip(&values)
            .fold(T::zero(), |acc, (&t, &y)| acc + Self::weight(t) * y);
        Self { kind, types, values, objective, feasible }
    }

    /// Share assigned to type `t` by this vertex.
    pub fn value_of(&self, t: usize) -> T {
        self.types
            .iter()
            .position(|&u| u == t)
            .map_or(T::zero(), |i| self.values[i])
    }

    /// Key for tie-breaking between equal objectives: larger smallest
    /// coded type first, then larger largest coded type.
    fn preference(&self) -> (usize, usize) {
        (
            self.types.first().copied().unwrap_or(0),
            self.types.last().copied().unwrap_or(0),
        )
    }

    fn to_allocation(&self, users: usize) -> TypeAllocation<T> {
        let coded: Vec<(usize, T)> = self.types.iter().copied().zip(self.values.iter().copied()).collect();
        TypeAllocation::from_coded(users, &coded).expect("feasible vertex is a valid allocation")
    }
}

/// Whether `y` satisfies both constraints and non-negativity within tolerance.
pub fn is_feasible<T: Scalar>(th: &Thresholds<T>, types: &[usize], values: &[T]) -> bool {
    let mut rate = T::zero();
    let mut cached = T::zero();
    for (&t, &y) in types.iter().zip(values) {
        if y < -T::TOL {
            return false;
        }
        rate = rate + th.q(t) * y;
        cached = cached + y;
    }
    rate <= T::one() + T::TOL && cached <= T::one() + T::TOL
}

/// Origin, every single-type vertex and every pair intersection, in that order.
pub fn enumerate_vertices<T: Scalar>(config: &SystemConfig<T>) -> Vec<Vertex<T>> {
    let k = config.users();
    let th = config.thresholds();
    let mut out = Vec::with_capacity(1 + k + k * k.saturating_sub(1) / 2);

    out.push(Vertex::new(VertexKind::Origin, vec![], vec![], true));

    for t in 1..=k {
        // whichever of the two constraints binds first along the y_t axis
        let y = T::one().min(T::one() / th.q(t));
        out.push(Vertex::new(VertexKind::SingleType, vec![t], vec![y], true));
    }

    for i in 1..=k {
        for j in (i + 1)..=k {
            let (qi, qj) = (th.q(i), th.q(j));
            let diff = qj - qi;
            if diff.abs() <= T::DEGENERATE_TOL {
                out.push(Vertex::new(
                    VertexKind::PairIntersection,
                    vec![i, j],
                    vec![T::nan(), T::nan()],
                    false,
                ));
                continue;
            }
            // q_i y_i + q_j y_j = 1 and y_i + y_j = 1
            let yi = (qj - T::one()) / diff;
            let yj = (T::one() - qi) / diff;
            let feasible = yi > T::zero() && yj > T::zero() && is_feasible(&th, &[i, j], &[yi, yj]);
            let mut v = Vertex::new(VertexKind::PairIntersection, vec![i, j], vec![yi, yj], feasible);
            if !feasible {
                v.objective = T::neg_infinity();
            }
            out.push(v);
        }
    }
    out
}

/// Index of the best feasible vertex in `vertices`; ties within tolerance
/// go to the vertex with larger coded types.
pub fn best_vertex<T: Scalar>(vertices: &[Vertex<T>]) -> usize {
    let best = vertices
        .iter()
        .filter(|v| v.feasible)
        .map(|v| v.objective)
        .fold(T::neg_infinity(), T::max);
    let mut pick: Option<usize> = None;
    for (idx, v) in vertices.iter().enumerate() {
        if !v.feasible || v.objective < best - T::TOL {
            continue;
        }
        pick = match pick {
            Some(p) if vertices[p].preference() >= v.preference() => Some(p),
            _ => Some(idx),
        };
    }
    pick.expect("the origin is always feasible")
}

/// Optimal allocation by exhaustive vertex search.
pub fn oracle_solve<T: Scalar>(config: &SystemConfig<T>) -> OptimalSolution<T> {
    let vertices = enumerate_vertices(config);
    let v = &vertices[best_vertex(&vertices)];
    OptimalSolution::from_allocation(config, classify_regime(config), v.to_allocation(config.users()))
}

/// Outcome of checking the three corner-point claims at one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClaimsReport {
    /// For each fixed `i ≤ a`, the best feasible intersection `(i, j)` has `j = b`.
    pub fixed_i_best_at_b: bool,
    /// For each fixed `j ≥ b`, the best feasible intersection `(i, j)` has `i = a`.
    pub fixed_j_best_at_a: bool,
    /// The intersection `(a, b)` beats the single-type point `y_a = 1`.
    pub pair_beats_single_a: bool,
}

impl ClaimsReport {
    pub fn all_hold(&self) -> bool {
        self.fixed_i_best_at_b && self.fixed_j_best_at_a && self.pair_beats_single_a
    }
}

/// Checks the corner-point claims by direct enumeration. Requires an
/// architecture-limited configuration.
pub fn check_claims<T: Scalar>(config: &SystemConfig<T>) -> Result<ClaimsReport> {
    let (a, b) = match classify_regime(config) {
        Regime::ArchitectureLimited { a, b } => (a, b),
        other => {
            return Err(Error::Precondition(format!(
                "claims apply to the architecture-limited regime, config is {other}"
            )))
        }
    };
    let k = config.users();
    let vertices = enumerate_vertices(config);
    let pair = |i: usize, j: usize| {
        vertices
            .iter()
            .find(|v| v.kind == VertexKind::PairIntersection && v.types == [i, j])
            .expect("every pair is enumerated")
    };

    let th = config.thresholds();
    let degenerate = |i: usize| (th.q(i) - T::one()).abs() <= T::TOL;
    // objective of the intersection (i, j); when q_i = 1 it collapses onto y_i = 1
    let pair_value = |i: usize, j: usize| {
        let v = pair(i, j);
        if v.feasible {
            Some(v.objective)
        } else if degenerate(i) {
            Some(Vertex::<T>::weight(i))
        } else {
            None
        }
    };
    // no feasible competitor beats the designated winner
    let best_is = |winner: Option<T>, competitors: &mut dyn Iterator<Item = (usize, usize)>| {
        let rivals: Vec<T> = competitors.map(|(i, j)| pair(i, j)).filter(|v| v.feasible).map(|v| v.objective).collect();
        match winner {
            Some(w) => rivals.iter().all(|&r| r <= w + T::TOL),
            None => rivals.is_empty(),
        }
    };

    let fixed_i_best_at_b =
        (1..=a).all(|i| best_is(pair_value(i, b), &mut (b..=k).map(|j| (i, j))));
    let fixed_j_best_at_a =
        (b..=k).all(|j| best_is(pair_value(a, j), &mut (1..=a).map(|i| (i, j))));

    let ab = pair(a, b);
    let pair_beats_single_a = if ab.feasible {
        ab.objective > Vertex::<T>::weight(a)
    } else {
        // the intersection and y_a = 1 coincide
        degenerate(a)
    };

    Ok(ClaimsReport { fixed_i_best_at_b, fixed_j_best_at_a, pair_beats_single_a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(k: usize, n: usize, rho: f64, alpha: f64) -> SystemConfig<f64> {
        SystemConfig::new(k, n, rho, alpha).unwrap()
    }

    #[test]
    fn free_placement_vertices() {
        let v = enumerate_vertices(&cfg(2, 2, 0.0, 0.5));
        assert_eq!(v.len(), 4);
        assert_eq!(v[0].kind, VertexKind::Origin);
        assert_eq!(v[0].objective, 0.0);
        assert_eq!(v[1].values, vec![1.0]);
        assert_eq!(v[2].values, vec![1.0]);
        assert_eq!(v[3].kind, VertexKind::PairIntersection);
        assert!(!v[3].feasible);
    }

    #[test]
    fn pair_intersection_example() {
        let v = enumerate_vertices(&cfg(5, 10, 0.1, 1.0));
        assert_eq!(v.len(), 1 + 5 + 10);
        let p = v.iter().find(|v| v.types == [1, 2]).unwrap();
        assert!(p.feasible);
        assert_abs_diff_eq!(p.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.values[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_type_bound_by_rate_constraint() {
        let v = enumerate_vertices(&cfg(5, 10, 0.3, 0.9));
        let s = v.iter().find(|v| v.kind == VertexKind::SingleType && v.types == [1]).unwrap();
        assert_abs_diff_eq!(s.values[0], 5.0 / 6.0, epsilon = 1e-12);
        // every pair is infeasible when all q_t > 1
        assert!(v.iter().filter(|v| v.kind == VertexKind::PairIntersection).all(|v| !v.feasible));
    }

    #[test]
    fn degenerate_pair_is_infeasible() {
        // alpha = 0, K = 1 has no pairs; use rho = 0 where q_K = 1 and check no NaN leaks
        let v = enumerate_vertices(&cfg(3, 3, 0.0, 0.0));
        for p in v.iter().filter(|v| !v.feasible) {
            assert!(p.kind == VertexKind::PairIntersection);
        }
        let s = oracle_solve(&cfg(3, 3, 0.0, 0.0));
        assert!(s.objective.is_finite());
    }

    #[test]
    fn oracle_examples() {
        let s = oracle_solve(&cfg(5, 10, 0.0, 0.7));
        assert_eq!(s.coded_support(), vec![5]);
        assert_abs_diff_eq!(s.objective, 5.0 / 6.0, epsilon = 1e-12);

        let s = oracle_solve(&cfg(5, 10, 0.1, 1.0));
        assert_abs_diff_eq!(s.objective, 7.0 / 12.0, epsilon = 1e-12);

        let s = oracle_solve(&cfg(1, 1, 0.5, 0.0));
        assert_abs_diff_eq!(s.allocation.share(1), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn claims_examples() {
        assert!(check_claims(&cfg(5, 10, 0.1, 1.0)).unwrap().all_hold());
        assert!(check_claims(&cfg(8, 20, 0.05, 0.8)).unwrap().all_hold());
        assert!(matches!(check_claims(&cfg(5, 10, 0.3, 0.5)), Err(Error::Precondition(_))));
        assert!(matches!(check_claims(&cfg(5, 10, 0.0, 0.5)), Err(Error::Precondition(_))));
    }

    #[test]
    fn feasible_vertices_satisfy_constraints() {
        let c = cfg(6, 12, 0.02, 0.6);
        let th = c.thresholds();
        for v in enumerate_vertices(&c).iter().filter(|v| v.feasible) {
            assert!(is_feasible(&th, &v.types, &v.values));
        }
    }
}
