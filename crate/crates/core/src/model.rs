//! Problem instance, cost model, rate formulas and the γ/σ/q thresholds.
//!
//! Allocations are expressed per caching type: `y[t]` is the fraction of
//! every file held by all type-`t` subfiles together (a subfile of type `t`
//! is stored by exactly `t` users). The per-subfile fraction is
//! `x[t] = y[t] / C(K, t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest number of users for which binomials are computed.
pub const MAX_USERS: usize = 64;

/// Exact binomial coefficient `C(n, k)`.
///
/// Every `n ≤ 64` fits in a `u64`; larger `n` are computed until the
/// result overflows, which is reported rather than wrapped.
pub fn binom(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Err(Error::Domain(format!("C({n}, {k}) requires k <= n")));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc
            .checked_mul(u128::from(n - i))
            .ok_or_else(|| Error::Overflow(format!("C({n}, {k})")))?
            / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return Err(Error::Overflow(format!("C({n}, {k})")));
        }
    }
    Ok(acc as u64)
}

/// A problem instance: `users` (K) users, `files` (N) files, cost multiplier ρ
/// and architecture exponent α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig<T> {
    users: usize,
    files: usize,
    rho: T,
    alpha: T,
}

impl<T: Scalar> SystemConfig<T> {
    /// Validates `1 ≤ K ≤ N`, `K ≤ 64`, `α ∈ [0, 1]` and `ρ ∈ [0, 1]`.
    pub fn new(users: usize, files: usize, rho: T, alpha: T) -> Result<Self> {
        let cfg = Self::with_unbounded_rho(users, files, rho, alpha)?;
        if rho > T::one() {
            return Err(Error::InvalidConfig(format!(
                "rho = {rho} exceeds 1 (use the unbounded constructor to explore rho > 1)"
            )));
        }
        Ok(cfg)
    }

    /// Same as [`SystemConfig::new`] but only requires `ρ ≥ 0`.
    pub fn with_unbounded_rho(users: usize, files: usize, rho: T, alpha: T) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if users > files {
            return Err(Error::InvalidConfig(format!(
                "users ({users}) must not exceed files ({files})"
            )));
        }
        if users > MAX_USERS {
            return Err(Error::InvalidConfig(format!(
                "at most {MAX_USERS} users are supported, got {users}"
            )));
        }
        if !(rho >= T::zero()) || !rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho = {rho} must be finite and >= 0")));
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidConfig(format!("alpha = {alpha} must lie in [0, 1]")));
        }
        Ok(Self { users, files, rho, alpha })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Multiplicity `a_t = C(K, t)` of type-`t` subfiles per file.
    pub fn multiplicity(&self, t: usize) -> u64 {
        binom(self.users as u64, t as u64).expect("K <= 64 and t <= K")
    }

    /// `a_t` for every `t = 0..=K`.
    pub fn multiplicities(&self) -> Vec<u64> {
        (0..=self.users).map(|t| self.multiplicity(t)).collect()
    }

    /// Cost `c_r = ρ r^α` of one unit multicast to `r` users during placement.
    pub fn placement_cost(&self, r: usize) -> Result<T> {
        if r == 0 || r > self.users {
            return Err(Error::Domain(format!(
                "recipient count {r} outside 1..={}",
                self.users
            )));
        }
        Ok(self.cost_unchecked(r))
    }

    fn cost_unchecked(&self, r: usize) -> T {
        if self.rho == T::zero() {
            return T::zero();
        }
        self.rho * T::int_pow(r, self.alpha)
    }

    /// Placement rate `R_o = N Σ_{t≥1} c_t y_t`, in file lengths.
    pub fn rate_placement(&self, alloc: &TypeAllocation<T>) -> T {
        self.check_len(alloc);
        let sum = (1..=self.users).fold(T::zero(), |acc, t| {
            acc + self.cost_unchecked(t) * alloc.share(t)
        });
        T::of_usize(self.files) * sum
    }

    /// Worst-case delivery rate `R_p = Σ_{t<K} (K−t)/(t+1) · y_t`.
    pub fn rate_delivery(&self, alloc: &TypeAllocation<T>) -> T {
        self.check_len(alloc);
        let k = self.users;
        (0..k).fold(T::zero(), |acc, t| {
            acc + T::of_usize(k - t) / T::of_usize(t + 1) * alloc.share(t)
        })
    }

    /// Delivery rate through the reduced objective: `K − (K+1) Σ t/(t+1) y_t`.
    pub fn rate_delivery_from_objective(&self, alloc: &TypeAllocation<T>) -> T {
        self.check_len(alloc);
        T::of_usize(self.users) - T::of_usize(self.users + 1) * objective(alloc)
    }

    /// γ, σ and q for this instance.
    pub fn thresholds(&self) -> Thresholds<T> {
        let k = self.users;
        let n = T::of_usize(self.files);
        let kk = T::of_usize(k);

        let mut gamma = Vec::with_capacity(k + 1);
        gamma.push(T::one());
        for t in 1..=k {
            let tt = T::of_usize(t);
            gamma.push(T::of_usize(k - t) / (T::int_pow(t, self.alpha) * (tt + T::one()) * n));
        }

        let mut sigma = Vec::with_capacity(k + 1);
        sigma.push(T::one());
        for t in 1..k {
            sigma.push(sigma_formula::<T>(t));
        }
        if k >= 1 {
            sigma.push(T::zero());
        }

        let mut q = Vec::with_capacity(k);
        for t in 1..=k {
            let tt = T::of_usize(t);
            let c = self.cost_unchecked(t);
            q.push((c * n * (tt + T::one()) + tt * (kk + T::one())) / (kk * (tt + T::one())));
        }

        Thresholds { gamma, sigma, q }
    }

    fn check_len(&self, alloc: &TypeAllocation<T>) {
        assert_eq!(
            alloc.len(),
            self.users + 1,
            "allocation has {} types but the instance has K = {}",
            alloc.len(),
            self.users
        );
    }
}

/// `σ_t = 1 + ln((t+1)/(t+2)) / ln((t+1)/t)` for `1 ≤ t < K`.
fn sigma_formula<T: Scalar>(t: usize) -> T {
    let t1 = T::of_usize(t + 1);
    let num = (t1 / T::of_usize(t + 2)).ln();
    let den = (t1 / T::of_usize(t)).ln();
    T::one() + num / den
}

/// The reduced objective `Σ_{t≥1} t/(t+1) · y_t`.
pub fn objective<T: Scalar>(alloc: &TypeAllocation<T>) -> T {
    alloc
        .shares()
        .iter()
        .enumerate()
        .skip(1)
        .fold(T::zero(), |acc, (t, &y)| {
            acc + T::of_usize(t) / T::of_usize(t + 1) * y
        })
}

/// Fraction of each file assigned to each caching type `t = 0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAllocation<T> {
    y: Vec<T>,
}

impl<T: Scalar> TypeAllocation<T> {
    /// Accepts a full vector `y_0..y_K`; entries must be non-negative and sum to 1.
    pub fn new(y: Vec<T>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidAllocation(
                "need at least types 0 and 1".into(),
            ));
        }
        if let Some((t, v)) = y.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
            return Err(Error::InvalidAllocation(format!("y[{t}] = {v} is negative")));
        }
        let sum = y.iter().fold(T::zero(), |a, &b| a + b);
        if (sum - T::one()).abs() > T::SUM_TOL {
            return Err(Error::InvalidAllocation(format!("shares sum to {sum}, not 1")));
        }
        Ok(Self { y })
    }

    /// Builds an allocation for `users` users from the coded shares
    /// `(t, y_t)`, `t ≥ 1`; the remainder goes to the reactive type 0.
    pub fn from_coded(users: usize, coded: &[(usize, T)]) -> Result<Self> {
        let mut y = vec![T::zero(); users + 1];
        for &(t, v) in coded {
            if t == 0 || t > users {
                return Err(Error::InvalidAllocation(format!(
                    "coded type {t} outside 1..={users}"
                )));
            }
            y[t] = y[t] + v;
        }
        let cached = y.iter().fold(T::zero(), |a, &b| a + b);
        let reactive = T::one() - cached;
        // round-off on tight solutions can leave a tiny negative remainder
        y[0] = if reactive < T::zero() && reactive > -T::SUM_TOL {
            T::zero()
        } else {
            reactive
        };
        Self::new(y)
    }

    /// All content reactive: `y_0 = 1`.
    pub fn reactive(users: usize) -> Self {
        let mut y = vec![T::zero(); users + 1];
        y[0] = T::one();
        Self { y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn users(&self) -> usize {
        self.y.len() - 1
    }

    pub fn share(&self, t: usize) -> T {
        self.y[t]
    }

    pub fn shares(&self) -> &[T] {
        &self.y
    }

    /// Per-subfile size `x_t = y_t / C(K, t)`.
    pub fn subfile_fraction(&self, t: usize) -> T {
        let a = binom(self.users() as u64, t as u64).expect("t <= K <= 64");
        self.y[t] / T::from_u64(a).expect("binomial fits in float")
    }

    pub fn subfile_fractions(&self) -> Vec<T> {
        (0..self.len()).map(|t| self.subfile_fraction(t)).collect()
    }

    /// Types with a strictly positive share.
    pub fn support(&self) -> Vec<usize> {
        self.y
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > T::TOL)
            .map(|(t, _)| t)
            .collect()
    }
}

/// ρ-boundaries γ, α-boundaries σ and constraint coefficients q of one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds<T> {
    /// `γ_t`, `t = 0..=K`
    pub gamma: Vec<T>,
    /// `σ_t`, `t = 0..=K`
    pub sigma: Vec<T>,
    /// `q_t` stored at index `t − 1`, `t = 1..=K`
    pub q: Vec<T>,
}

impl<T: Scalar> Thresholds<T> {
    pub fn gamma(&self, t: usize) -> T {
        self.gamma[t]
    }

    pub fn sigma(&self, t: usize) -> T {
        self.sigma[t]
    }

    /// `q_t` for `1 ≤ t ≤ K`.
    pub fn q(&self, t: usize) -> T {
        self.q[t - 1]
    }

    pub fn users(&self) -> usize {
        self.q.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn factorial(n: u64) -> u128 {
        (1..=u128::from(n)).product()
    }

    #[test]
    fn binom_small_values() {
        assert_eq!(binom(5, 2).unwrap(), 10);
        assert_eq!(binom(5, 0).unwrap(), 1);
        let direct = factorial(8) / (factorial(4) * factorial(4));
        assert_eq!(direct, 70);
        assert_eq!(binom(8, 4).unwrap() as u128, direct);
    }

    #[test]
    fn binom_pascal_rule_to_64() {
        for n in 1..=64u64 {
            for k in 1..n {
                let lhs = binom(n, k).unwrap();
                let rhs = binom(n - 1, k - 1).unwrap() + binom(n - 1, k).unwrap();
                assert_eq!(lhs, rhs, "C({n},{k})");
            }
        }
        assert_eq!(binom(64, 32).unwrap(), 1_832_624_140_942_590_534);
    }

    #[test]
    fn binom_errors() {
        assert!(matches!(binom(3, 4), Err(Error::Domain(_))));
        assert!(matches!(binom(70, 35), Err(Error::Overflow(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(0, 3, 0.1, 0.5).is_err());
        assert!(SystemConfig::new(4, 3, 0.1, 0.5).is_err());
        assert!(SystemConfig::new(3, 3, -0.1, 0.5).is_err());
        assert!(SystemConfig::new(3, 3, 0.1, 1.5).is_err());
        assert!(SystemConfig::new(3, 3, f64::NAN, 0.5).is_err());
        assert!(SystemConfig::new(3, 3, 1.5, 0.5).is_err());
        assert!(SystemConfig::with_unbounded_rho(3, 3, 1.5, 0.5).is_ok());
        assert!(SystemConfig::new(65, 70, 0.1, 0.5).is_err());
    }

    #[test]
    fn placement_cost_examples() {
        let c = SystemConfig::new(3, 3, 0.0, 0.5).unwrap();
        assert_eq!(c.placement_cost(3).unwrap(), 0.0);
        let c = SystemConfig::new(2, 2, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(c.placement_cost(2).unwrap(), 0.2, epsilon = 1e-15);
        let c = SystemConfig::new(7, 7, 0.3, 0.0).unwrap();
        assert_eq!(c.placement_cost(7).unwrap(), 0.3);
        assert!(matches!(c.placement_cost(0), Err(Error::Domain(_))));
        assert!(matches!(c.placement_cost(8), Err(Error::Domain(_))));
    }

    #[test]
    fn rate_examples() {
        let c = SystemConfig::new(5, 10, 0.1, 1.0).unwrap();
        let y = TypeAllocation::from_coded(5, &[(1, 0.5), (2, 0.5)]).unwrap();
        assert_abs_diff_eq!(c.rate_placement(&y), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rate_delivery(&y), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rate_delivery_from_objective(&y), 1.5, epsilon = 1e-12);

        let c = SystemConfig::new(5, 10, 0.3, 0.9).unwrap();
        let y = TypeAllocation::from_coded(5, &[(1, 5.0 / 6.0)]).unwrap();
        assert_abs_diff_eq!(c.rate_placement(&y), 2.5, epsilon = 1e-12);

        let free = SystemConfig::new(5, 10, 0.0, 0.4).unwrap();
        assert_eq!(free.rate_placement(&y), 0.0);

        let full = TypeAllocation::from_coded(5, &[(5, 1.0)]).unwrap();
        assert_eq!(c.rate_delivery(&full), 0.0);
        let none = TypeAllocation::<f64>::reactive(5);
        assert_eq!(c.rate_delivery(&none), 5.0);
    }

    #[test]
    fn allocation_validation() {
        assert!(TypeAllocation::new(vec![0.5, 0.6]).is_err());
        assert!(TypeAllocation::new(vec![-0.1, 1.1]).is_err());
        assert!(TypeAllocation::new(vec![1.0]).is_err());
        assert!(TypeAllocation::from_coded(2, &[(3, 0.1)]).is_err());
        assert!(TypeAllocation::from_coded(2, &[(1, 0.7), (2, 0.7)]).is_err());
        let y = TypeAllocation::from_coded(5, &[(1, 0.5), (2, 0.5)]).unwrap();
        assert_abs_diff_eq!(y.subfile_fraction(1), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(y.subfile_fraction(2), 0.05, epsilon = 1e-15);
        assert_eq!(y.support(), vec![1, 2]);
    }

    #[test]
    fn gamma_examples() {
        let th = SystemConfig::new(5, 10, 0.1, 1.0).unwrap().thresholds();
        // (K - t) / (t (t+1) N) at alpha = 1
        let expected = [1.0, 4.0 / 20.0, 3.0 / 60.0, 2.0 / 120.0, 1.0 / 200.0, 0.0];
        for (t, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(th.gamma(t), *e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(th.gamma(3), 0.016667, epsilon = 1e-6);
    }

    #[test]
    fn sigma_examples() {
        let th = SystemConfig::new(5, 10, 0.1, 0.5).unwrap().thresholds();
        // log base (t+1)/t of (t+1)/(t+2), plus one, through log2
        for t in 1..5usize {
            let (t, t1, t2) = (t as f64, t as f64 + 1.0, t as f64 + 2.0);
            let oracle = (t1 / t2).log2() / (t1 / t).log2() + 1.0;
            assert_abs_diff_eq!(th.sigma(t as usize), oracle, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(th.sigma(1), 0.41504, epsilon = 1e-5);
        assert_abs_diff_eq!(th.sigma(2), 0.29049, epsilon = 1e-5);
        assert_abs_diff_eq!(th.sigma(3), 0.22434, epsilon = 1e-5);
        assert_abs_diff_eq!(th.sigma(4), 0.18294, epsilon = 1e-5);
        assert_eq!(th.sigma(0), 1.0);
        assert_eq!(th.sigma(5), 0.0);
        assert_eq!(th.gamma(0), 1.0);
    }

    #[test]
    fn q_examples() {
        let th = SystemConfig::new(5, 10, 0.1, 1.0).unwrap().thresholds();
        assert_abs_diff_eq!(th.q(1), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(th.q(2), 1.2, epsilon = 1e-12);
        let th = SystemConfig::new(5, 10, 0.3, 0.9).unwrap().thresholds();
        assert_abs_diff_eq!(th.q(1), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn single_user_thresholds() {
        let th = SystemConfig::new(1, 1, 0.5, 0.0).unwrap().thresholds();
        assert_eq!(th.gamma, vec![1.0, 0.0]);
        assert_eq!(th.sigma, vec![1.0, 0.0]);
        assert_abs_diff_eq!(th.q(1), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn f32_instance() {
        let c = SystemConfig::<f32>::new(5, 10, 0.1, 1.0).unwrap();
        let th = c.thresholds();
        assert!((th.q(1) - 0.8).abs() < 1e-6);
        assert!((th.q(2) - 1.2).abs() < 1e-6);
    }
}
