//! Coefficient-space model of ML²(ℂ∖ℝ₋; q).
//!
//! A state is a finite sequence a_0..a_N standing for f(z) = Σ a_n z^{qn}
//! with principal-branch powers. The scalar product is
//! ⟨f, g⟩ = Σ conj(a_n)·b_n·Γ(qn+1), anti-linear in the first slot, and the
//! functions ψ_n = z^{qn}/√Γ(qn+1) form an orthonormal basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_order, Error, Result};
use crate::specfun::{mittag_leffler, EvalControl};
use crate::summation::{CompensatedSum, ComplexCompensatedSum};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// exp() overflows double precision above this.
const MAX_EXP: f64 = 709.0;

#[inline]
fn ln_gamma_weight(q: f64, n: usize) -> f64 {
    libm::lgamma(q * n as f64 + 1.0)
}

/// A truncated element of the Mittag-Leffler space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRecord", into = "StateRecord")]
pub struct MLState {
    q: f64,
    coeffs: Vec<Complex64>,
}

/// On-disk form: `{"q": 1.0, "coeffs": [[re, im], ...]}`.
#[derive(Serialize, Deserialize)]
struct StateRecord {
    q: f64,
    coeffs: Vec<[f64; 2]>,
}

impl TryFrom<StateRecord> for MLState {
    type Error = Error;

    fn try_from(record: StateRecord) -> Result<Self> {
        MLState::new(
            record.q,
            record
                .coeffs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }
}

impl From<MLState> for StateRecord {
    fn from(state: MLState) -> Self {
        StateRecord {
            q: state.q,
            coeffs: state.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl MLState {
    /// A state from its monomial coefficients; an empty list means the zero state.
    pub fn new(q: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        check_order(q)?;
        if let Some(bad) = coeffs
            .iter()
            .find(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                value: bad.norm(),
                reason: "coefficients must be finite",
            });
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Ok(Self { q, coeffs })
    }

    /// The zero state truncated at N.
    pub fn zero(q: f64, truncation: usize) -> Result<Self> {
        Self::new(q, vec![ZERO; truncation + 1])
    }

    /// Builds a state from its components c_n = ⟨ψ_n, f⟩ in the orthonormal basis.
    pub fn from_components(q: f64, components: &[Complex64]) -> Result<Self> {
        check_order(q)?;
        let coeffs = components
            .iter()
            .enumerate()
            .map(|(n, c)| c * (-0.5 * ln_gamma_weight(q, n)).exp())
            .collect();
        Self::new(q, coeffs)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Truncation index N (the state has N + 1 coefficients).
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Components c_n = a_n·√Γ(qn+1) in the ψ_n basis.
    pub fn components(&self) -> Vec<Complex64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, a)| {
                if *a == ZERO {
                    ZERO
                } else {
                    a * (0.5 * ln_gamma_weight(self.q, n)).exp()
                }
            })
            .collect()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            q: self.q,
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
        }
    }

    /// α·self + β·other, padding the shorter state with zeros.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        same_space(self, other)?;
        let len = self.coeffs.len().max(other.coeffs.len());
        let at = |v: &[Complex64], i: usize| v.get(i).copied().unwrap_or(ZERO);
        let coeffs = (0..len)
            .map(|i| alpha * at(&self.coeffs, i) + beta * at(&other.coeffs, i))
            .collect();
        Self::new(self.q, coeffs)
    }
}

fn same_space(f: &MLState, g: &MLState) -> Result<()> {
    if f.q == g.q {
        Ok(())
    } else {
        Err(Error::IncompatibleSpace {
            left: f.q,
            right: g.q,
        })
    }
}

/// A point of the slitted plane ℂ∖(−∞, 0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitPoint(Complex64);

impl SlitPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain {
                function: "SlitPoint::new",
                value: z.norm(),
                reason: "point must be finite",
            });
        }
        if z.im == 0.0 && z.re <= 0.0 {
            return Err(Error::OnSlit { re: z.re, im: z.im });
        }
        Ok(Self(z))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Principal logarithm, argument in (−π, π).
    pub fn ln(&self) -> Complex64 {
        self.0.ln()
    }

    /// Principal power z^p = exp(p·Log z).
    pub fn powf(&self, p: f64) -> Complex64 {
        (self.ln() * p).exp()
    }
}

impl TryFrom<Complex64> for SlitPoint {
    type Error = Error;

    fn try_from(z: Complex64) -> Result<Self> {
        Self::new(z)
    }
}

/// ψ_n = z^{qn}/√Γ(qn+1).
pub fn basis_state(q: f64, n: usize) -> Result<MLState> {
    check_order(q)?;
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = Complex64::new((-0.5 * ln_gamma_weight(q, n)).exp(), 0.0);
    MLState::new(q, coeffs)
}

/// conj(a)·b·Γ(qn+1), falling back to log-magnitude arithmetic when the
/// weight alone would overflow.
fn weighted_product(a: Complex64, b: Complex64, q: f64, n: usize) -> Result<Complex64> {
    if a == ZERO || b == ZERO {
        return Ok(ZERO);
    }
    let ln_weight = ln_gamma_weight(q, n);
    let term = if ln_weight < MAX_EXP {
        a.conj() * b * ln_weight.exp()
    } else {
        let phase = (a / a.norm()).conj() * (b / b.norm());
        phase * (a.norm().ln() + b.norm().ln() + ln_weight).exp()
    };
    if term.re.is_finite() && term.im.is_finite() {
        Ok(term)
    } else {
        Err(Error::Overflow { index: n })
    }
}

/// ⟨f, g⟩ = Σ conj(a_n)·b_n·Γ(qn+1).
pub fn inner(f: &MLState, g: &MLState) -> Result<Complex64> {
    same_space(f, g)?;
    let mut acc = ComplexCompensatedSum::new();
    for (n, (a, b)) in f.coeffs.iter().zip(&g.coeffs).enumerate() {
        acc.add(weighted_product(*a, *b, f.q, n)?);
    }
    Ok(acc.value())
}

pub fn norm(f: &MLState) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (n, a) in f.coeffs.iter().enumerate() {
        acc.add(weighted_product(*a, *a, f.q, n)?.re);
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// f(z) = Σ a_n·exp(qn·Log z) on the principal branch.
pub fn evaluate(f: &MLState, p: &SlitPoint) -> Complex64 {
    let log_z = p.ln();
    let mut acc = ComplexCompensatedSum::new();
    for (n, a) in f.coeffs.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let exponent = log_z * (f.q * n as f64);
        let term = if exponent.re < MAX_EXP {
            a * exponent.exp()
        } else {
            (a.ln() + exponent).exp()
        };
        acc.add(term);
    }
    acc.value()
}

/// K(z, w) = E_q(conj(z)^q · w^q), the reproducing kernel on the slitted plane.
pub fn kernel(q: f64, z: &SlitPoint, w: &SlitPoint, ctl: &EvalControl) -> Result<Complex64> {
    check_order(q)?;
    let argument = (z.ln().conj() * q).exp() * (w.ln() * q).exp();
    mittag_leffler(q, argument, ctl)
}

/// The kernel section w ↦ K(z, w) truncated at index M, as a state.
///
/// Its coefficients are conj(z^{qn})/Γ(qn+1), so ⟨section, f⟩ = f(z) for any
/// state f truncated at or below M.
pub fn kernel_section(q: f64, z: &SlitPoint, truncation: usize) -> Result<MLState> {
    check_order(q)?;
    let log_conj = z.ln().conj();
    let coeffs = (0..=truncation)
        .map(|n| (log_conj * (q * n as f64) - ln_gamma_weight(q, n)).exp())
        .collect();
    MLState::new(q, coeffs)
}

/// Partial sums S_N = Σ_{n≤N} |a_n|²·Γ(qn+1) of the membership series.
///
/// Entries become +∞ once a weight overflows; callers read that as divergence.
pub fn coeff_growth_report(f: &MLState) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    f.coeffs
        .iter()
        .enumerate()
        .map(|(n, a)| {
            match weighted_product(*a, *a, f.q, n) {
                Ok(t) => acc.add(t.re),
                Err(_) => acc.add(f64::INFINITY),
            }
            acc.value()
        })
        .collect()
}
