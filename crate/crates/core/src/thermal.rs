//! Thermal states e^{−s·a†a}/Tr e^{−s·a†a}.
//!
//! The number operator is diagonal in the ψ_n basis with eigenvalues n_q, so
//! the thermal state is the probability sequence p_n = e^{−s·n_q}/Z with
//! Z(s, q) = Σ e^{−s·n_q}. That sum is a general Dirichlet series with
//! exponents n_q; its abscissa of convergence is 0, so it converges for all
//! s > 0, but for q < 1 the levels grow slowly and the term count can be
//! very large.

use serde::Serialize;

use crate::error::{check_order, Error, Result};
use crate::specfun::{level_spectrum, ln_upper_incomplete_gamma, EvalControl, LevelFunction};
use crate::summation::CompensatedSum;

/// exp(−x) is zero in double precision once x exceeds this.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

/// Minimum number of retained terms before the stopping rule may fire.
pub const MIN_TERMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSpec {
    pub q: f64,
    pub s: f64,
    pub ctl: EvalControl,
}

impl ThermalSpec {
    pub fn new(q: f64, s: f64, ctl: EvalControl) -> Result<Self> {
        check_order(q)?;
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "s",
                value: s,
                reason: "inverse temperature must be finite and positive",
            });
        }
        Ok(Self { q, s, ctl })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionResult {
    #[serde(rename = "Z")]
    pub z: f64,
    pub terms_used: usize,
    pub last_term: f64,
    /// Estimate of the discarded mass Σ_{n ≥ terms_used} e^{−s·n_q}.
    pub tail_estimate: f64,
    pub converged: bool,
}

/// Upper estimate of Σ_{k>n} t_k given t_n and t_{n−1}.
///
/// For q ≥ 1 the level differences do not shrink, so the term ratios are
/// non-increasing and the geometric series with ratio t_n/t_{n−1} dominates
/// the remainder. For q < 1 the ratios creep toward one and the geometric
/// value under-covers. There the elasticity e(x) = x·f'(x)/f(x) rises toward
/// q, so f(x) ≥ f(n)·(x/n)^{e(n)} for x ≥ n and the remainder is bounded by
/// the integral of exp(−s·f(n)·(x/n)^{e(n)}) over [n, ∞).
fn remainder_bound(levels: &LevelFunction, s: f64, n: u64, term: f64, previous: f64) -> f64 {
    let ratio = term / previous;
    let geometric = if ratio < 1.0 {
        term * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    let q = levels.q();
    if q >= 1.0 || n == 0 {
        return geometric;
    }
    let x0 = n as f64;
    let a = s * levels.value(x0);
    let e = x0 * levels.ln_derivative(x0);
    let ln_integral = (x0 / e).ln() - a.ln() / e + ln_upper_incomplete_gamma(1.0 / e, a);
    geometric.max(ln_integral.exp())
}

/// Z(s, q) = Σ_{n≥0} e^{−s·n_q}, summed in ascending n.
///
/// The sum stops once at least [`MIN_TERMS`] terms are in and both the
/// current term and the estimated remainder are negligible under
/// `spec.ctl`. Terms with s·n_q > 745 underflow to zero and end the sum
/// exactly. Running out of `max_terms` yields `converged = false` with the
/// partial data intact.
pub fn partition(spec: &ThermalSpec) -> Result<PartitionResult> {
    let levels = LevelFunction::new(spec.q)?;
    let s = spec.s;
    let ctl = &spec.ctl;
    let mut acc = CompensatedSum::new();
    let mut previous = f64::INFINITY;
    let mut next_remainder_check = MIN_TERMS;

    for n in 0..ctl.max_terms {
        let exponent = s * levels.level(n as u64);
        if exponent > UNDERFLOW_EXPONENT {
            return Ok(PartitionResult {
                z: acc.value(),
                terms_used: n,
                last_term: previous,
                tail_estimate: 0.0,
                converged: true,
            });
        }
        let term = (-exponent).exp();
        if !(term < previous) {
            return Err(Error::InternalConsistency(format!(
                "partition terms for q = {}, s = {s} stop decreasing at n = {n}",
                spec.q
            )));
        }
        acc.add(term);
        let before_previous = previous;
        previous = term;
        let used = n + 1;
        if used >= next_remainder_check && ctl.negligible(term, acc.value()) {
            let remainder = remainder_bound(&levels, s, n as u64, term, before_previous);
            if ctl.negligible(remainder, acc.value()) {
                return Ok(finish(&levels, s, acc.value(), used, term, true));
            }
            // The remainder bound shrinks slowly for q < 1; re-test sparsely.
            next_remainder_check = used + used / 64 + 1;
        }
    }
    let used = ctl.max_terms;
    Ok(finish(&levels, s, acc.value(), used, previous, false))
}

/// 1 + a bound on the relative rounding error of a computed term t.
///
/// t = exp(−s·n_q) inherits the relative error of its exponent, about
/// ε·|ln t|; the factor of two covers a second, independent evaluation.
fn rounding_margin(term: f64) -> f64 {
    let exponent = if term > 0.0 {
        -term.ln()
    } else {
        UNDERFLOW_EXPONENT
    };
    1.0 + f64::EPSILON * (8.0 + 2.0 * exponent.max(0.0))
}

fn finish(
    levels: &LevelFunction,
    s: f64,
    z: f64,
    terms_used: usize,
    last_term: f64,
    converged: bool,
) -> PartitionResult {
    let next = (-s * levels.level(terms_used as u64)).exp();
    let ratio = next / last_term;
    let mut tail = if ratio < 1.0 {
        next / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    if levels.q() < 1.0 && terms_used >= 2 {
        // Σ_{n≥M} t_n = t_M + Σ_{n>M} t_n, the latter bounded from M.
        let from_next = remainder_bound(levels, s, terms_used as u64, next, last_term);
        tail = tail.max(next + from_next);
    }
    PartitionResult {
        z,
        terms_used,
        last_term,
        tail_estimate: tail * rounding_margin(next),
        converged,
    }
}

/// Σ_{n < terms} e^{−s·n_q} with no stopping rule.
pub fn truncated_partition(q: f64, s: f64, terms: usize) -> Result<f64> {
    let levels = LevelFunction::new(q)?;
    let mut acc = CompensatedSum::new();
    for n in 0..terms {
        let exponent = s * levels.level(n as u64);
        if exponent > UNDERFLOW_EXPONENT {
            break;
        }
        acc.add((-exponent).exp());
    }
    Ok(acc.value())
}

/// The thermal state as a diagonal probability sequence p_0..p_{M−1}.
///
/// Probabilities are produced on demand from the level function so that
/// states with very many retained levels need no storage.
#[derive(Debug, Clone)]
pub struct DiagonalState {
    q: f64,
    s: f64,
    partition: PartitionResult,
    levels: LevelFunction,
}

impl DiagonalState {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Normalizing constant Z.
    pub fn z(&self) -> f64 {
        self.partition.z
    }

    /// The converged partition sum the state was normalized with.
    pub fn partition(&self) -> &PartitionResult {
        &self.partition
    }

    /// Number of retained probabilities.
    pub fn len(&self) -> usize {
        self.partition.terms_used
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper estimate of 1 − Σ p_n: the tail mass beyond the retained levels
    /// plus the rounding of the retained probabilities themselves.
    pub fn tail_mass_bound(&self) -> f64 {
        let p = &self.partition;
        p.tail_estimate / p.z + (rounding_margin(p.last_term) - 1.0)
    }

    fn ln_weight(&self, n: u64) -> f64 {
        -self.s * self.levels.level(n)
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.ln_weight(n as u64).exp() / self.z()
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |n| self.prob(n))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.probs().collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.probs().collect::<CompensatedSum>().value()
    }

    /// Σ n·p_n.
    pub fn mean_occupation(&self) -> f64 {
        self.probs()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Σ n_q·p_n.
    pub fn mean_level(&self) -> f64 {
        (0..self.len() as u64)
            .map(|n| {
                let level = self.levels.level(n);
                level * (-self.s * level).exp() / self.z()
            })
            .collect::<CompensatedSum>()
            .value()
    }

    /// −Σ p_n ln p_n, with ln p_n = −s·n_q − ln Z taken exactly.
    pub fn entropy(&self) -> f64 {
        let ln_z = self.z().ln();
        (0..self.len() as u64)
            .filter_map(|n| {
                let ln_p = self.ln_weight(n) - ln_z;
                let p = ln_p.exp();
                (p > 0.0).then(|| -p * ln_p)
            })
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Error carrying the partial partition data when the sum did not converge.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("partition sum for q = {q}, s = {s} did not converge within {} terms", .partial.terms_used)]
pub struct NotConverged {
    pub q: f64,
    pub s: f64,
    pub partial: PartitionResult,
}

/// Outcome of building a thermal state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermalError {
    #[error(transparent)]
    NotConverged(#[from] NotConverged),
    #[error(transparent)]
    Numeric(#[from] Error),
}

pub fn thermal_state(spec: &ThermalSpec) -> std::result::Result<DiagonalState, ThermalError> {
    let partition = partition(spec)?;
    if !partition.converged {
        return Err(NotConverged {
            q: spec.q,
            s: spec.s,
            partial: partition,
        }
        .into());
    }
    Ok(DiagonalState {
        q: spec.q,
        s: spec.s,
        levels: LevelFunction::new(spec.q)?,
        partition,
    })
}

pub fn mean_occupation(spec: &ThermalSpec) -> std::result::Result<f64, ThermalError> {
    Ok(thermal_state(spec)?.mean_occupation())
}

pub fn mean_level(spec: &ThermalSpec) -> std::result::Result<f64, ThermalError> {
    Ok(thermal_state(spec)?.mean_level())
}

pub fn entropy(spec: &ThermalSpec) -> std::result::Result<f64, ThermalError> {
    Ok(thermal_state(spec)?.entropy())
}

/// σ_n = ln(n)/n_q for n = 2..=N; entry `k` holds σ_{k+2}.
pub fn abscissa_profile(q: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n as f64,
            reason: "abscissa profile needs N >= 2",
        });
    }
    let levels = LevelFunction::new(q)?;
    Ok((2..=n as u64)
        .map(|k| (k as f64).ln() / levels.level(k))
        .collect())
}

/// Largest σ_n over n ∈ [N/2, N].
pub fn abscissa_tail_max(q: f64, n: usize) -> Result<f64> {
    let profile = abscissa_profile(q, n)?;
    let start = (n / 2).max(2) - 2;
    Ok(profile[start..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Convergence diagnostics for one (q, s) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub q: f64,
    pub s: f64,
    pub n_probe: usize,
    pub spectrum_valid: bool,
    pub abscissa_tail_max: f64,
    pub partition: PartitionResult,
    /// Z summed over four times as many terms as the partition retained.
    pub z_quadruple: f64,
    /// |Z(4M) − Z(M)| / Z(4M).
    pub doubling_defect: f64,
}

pub fn convergence_report(spec: &ThermalSpec, n_probe: usize) -> Result<ConvergenceReport> {
    let n_probe = n_probe.max(2);
    let spectrum_valid = level_spectrum(spec.q, n_probe).is_ok_and(|s| s.is_valid());
    let abscissa_tail_max = abscissa_tail_max(spec.q, n_probe)?;
    let partition = partition(spec)?;
    let z_quadruple = truncated_partition(spec.q, spec.s, 4 * partition.terms_used)?;
    Ok(ConvergenceReport {
        q: spec.q,
        s: spec.s,
        n_probe,
        spectrum_valid,
        abscissa_tail_max,
        partition,
        z_quadruple,
        doubling_defect: (z_quadruple - partition.z).abs() / z_quadruple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(q: f64, s: f64) -> ThermalSpec {
        let ctl = EvalControl::new(1e-12, 0.0, 1 << 24).unwrap();
        ThermalSpec::new(q, s, ctl).unwrap()
    }

    /// Z for q = 2 by direct summation with n_2 = 2n(2n−1).
    fn quadratic_levels_partition(s: f64) -> f64 {
        (0..200)
            .map(|n| {
                let m = n as f64;
                (-s * 2.0 * m * (2.0 * m - 1.0)).exp()
            })
            .sum()
    }

    #[test]
    fn geometric_case() {
        let r = partition(&spec(1.0, 1.0)).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.z, 1.0 / (1.0 - (-1f64).exp()), max_relative = 1e-12);
        assert_relative_eq!(r.z, 1.5819767, epsilon = 1e-7);
        assert!(r.terms_used >= MIN_TERMS);
    }

    #[test]
    fn quadratic_levels() {
        let oracle = quadratic_levels_partition(0.1);
        let seven: f64 = (0..7)
            .map(|n| {
                let m = n as f64;
                (-0.1 * 2.0 * m * (2.0 * m - 1.0)).exp()
            })
            .sum();
        assert!((seven - oracle).abs() < 1e-5);
        let r = partition(&spec(2.0, 0.1)).unwrap();
        assert_relative_eq!(r.z, oracle, max_relative = 1e-12);
        assert_relative_eq!(r.z, 2.173534, epsilon = 2e-6);
    }

    #[test]
    fn large_s_leaves_ground_state() {
        let r = partition(&spec(1.5, 1e4)).unwrap();
        assert_eq!(r.z, 1.0);
        assert!(r.converged);
        assert_eq!(r.tail_estimate, 0.0);
        let st = thermal_state(&spec(1.5, 1e4)).unwrap();
        assert_eq!(st.mean_level(), 0.0);
        assert_eq!(st.entropy(), 0.0);
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let ctl = EvalControl::new(1e-12, 0.0, 64).unwrap();
        let s = ThermalSpec::new(0.1, 0.001, ctl).unwrap();
        let r = partition(&s).unwrap();
        assert!(!r.converged);
        assert_eq!(r.terms_used, 64);
        assert!(r.z > 1.0);
        match thermal_state(&s) {
            Err(ThermalError::NotConverged(e)) => assert_eq!(e.partial, r),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn classical_thermal_state() {
        let st = thermal_state(&spec(1.0, 1.0)).unwrap();
        let e = (-1f64).exp();
        assert_relative_eq!(st.prob(0), 1.0 - e, max_relative = 1e-12);
        assert_relative_eq!(st.prob(0), 0.6321206, epsilon = 1e-7);
        assert_relative_eq!(st.prob(3), (1.0 - e) * e.powi(3), max_relative = 1e-12);
        assert_relative_eq!(
            st.mean_occupation(),
            1.0 / (1f64.exp() - 1.0),
            epsilon = 1e-10
        );
        assert_relative_eq!(st.mean_level(), st.mean_occupation(), max_relative = 1e-10);
        let closed = -(1.0 - e).ln() + e / (1.0 - e);
        assert_relative_eq!(st.entropy(), closed, max_relative = 1e-11);
        let two = mean_occupation(&spec(1.0, 2.0)).unwrap();
        assert_relative_eq!(two, 0.1565177, epsilon = 1e-7);
    }

    #[test]
    fn quadratic_thermal_state() {
        let z = quadratic_levels_partition(0.1);
        let st = thermal_state(&spec(2.0, 0.1)).unwrap();
        assert_relative_eq!(st.prob(0), 1.0 / z, max_relative = 1e-12);
        assert_relative_eq!(st.prob(0), 0.460080, epsilon = 1e-6);
        let occ: f64 = (0..200)
            .map(|n| {
                let m = n as f64;
                m * (-0.1 * 2.0 * m * (2.0 * m - 1.0)).exp() / z
            })
            .sum();
        assert_relative_eq!(st.mean_occupation(), occ, max_relative = 1e-12);
        let lvl: f64 = (0..200)
            .map(|n| {
                let m = n as f64;
                let l = 2.0 * m * (2.0 * m - 1.0);
                l * (-0.1 * l).exp() / z
            })
            .sum();
        assert_relative_eq!(st.mean_level(), lvl, max_relative = 1e-12);
    }

    #[test]
    fn entropy_decreases_with_s() {
        for q in [0.5, 1.0, 2.0] {
            let mut last = f64::INFINITY;
            for k in 1..=12 {
                let s = 0.25 * k as f64;
                let h = entropy(&spec(q, s)).unwrap();
                assert!(h < last && h >= 0.0, "q = {q}, s = {s}");
                last = h;
            }
        }
    }

    #[test]
    fn remainder_bound_covers_sub_linear_levels() {
        for q in [0.3, 0.5, 0.8] {
            for s in [0.5, 1.0, 2.0] {
                let r = partition(&spec(q, s)).unwrap();
                assert!(r.converged);
                let levels = LevelFunction::new(q).unwrap();
                let remainder = (r.terms_used..4 * r.terms_used)
                    .map(|n| (-s * levels.level(n as u64)).exp())
                    .collect::<CompensatedSum>()
                    .value();
                assert!(
                    r.tail_estimate >= remainder,
                    "q = {q}, s = {s}: {r:?} {remainder}"
                );
            }
        }
    }

    #[test]
    fn abscissa_examples() {
        let p = abscissa_profile(1.0, 1000).unwrap();
        assert_eq!(p.len(), 999);
        assert_relative_eq!(p[998], 1000f64.ln() / 1000.0, max_relative = 1e-13);
        assert_relative_eq!(p[998], 0.006908, epsilon = 1e-6);
        let p2 = abscissa_profile(2.0, 100).unwrap();
        assert_relative_eq!(p2[98], 100f64.ln() / 39800.0, max_relative = 1e-13);
        assert!(abscissa_profile(1.0, 1).is_err());
    }

    #[test]
    fn report_examples() {
        let r = convergence_report(&spec(1.0, 1.0), 200).unwrap();
        assert!(r.partition.converged && r.spectrum_valid);
        assert!(r.doubling_defect <= 1e-12);
        let r5 = convergence_report(&spec(5.0, 0.01), 200).unwrap();
        assert!(r5.partition.converged);
        let ctl = EvalControl::new(1e-12, 0.0, 64).unwrap();
        let small = ThermalSpec::new(0.1, 0.001, ctl).unwrap();
        assert!(!convergence_report(&small, 200).unwrap().partition.converged);
    }

    #[test]
    fn spec_validation() {
        assert!(ThermalSpec::new(1.0, 0.0, EvalControl::default()).is_err());
        assert!(ThermalSpec::new(-1.0, 1.0, EvalControl::default()).is_err());
    }
}
