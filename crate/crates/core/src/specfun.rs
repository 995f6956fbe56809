//! Scalar special functions: log-Gamma, digamma, the Gamma-ratio level
//! function `n_q = Γ(qn+1)/Γ(q(n-1)+1)` and the Mittag-Leffler function.

use num_complex::Complex64;

use crate::error::{check_order, Error, Result};
use crate::summation::{CompensatedSum, ComplexCompensatedSum};

/// Stopping controls shared by every truncated series in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalControl {
    /// A term is negligible once it falls below `rel_tol * |partial sum|`.
    pub rel_tol: f64,
    /// Absolute floor: a term below `abs_tol` is also negligible. `0` disables it.
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for EvalControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_terms: 4096,
        }
    }
}

impl EvalControl {
    pub const MIN_TERMS: usize = 16;

    pub fn new(rel_tol: f64, abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol.is_finite() && rel_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: rel_tol,
                reason: "must be finite and positive",
            });
        }
        if !(abs_tol >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "abs_tol",
                value: abs_tol,
                reason: "must be non-negative",
            });
        }
        if max_terms < Self::MIN_TERMS {
            return Err(Error::InvalidParameter {
                name: "max_terms",
                value: max_terms as f64,
                reason: "must be at least 16",
            });
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_terms,
        })
    }

    /// Whether `term` is negligible against the running sum `partial`.
    #[inline]
    pub fn negligible(&self, term: f64, partial: f64) -> bool {
        term < self.rel_tol * partial.abs() || term < self.abs_tol
    }
}

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            function: "log_gamma",
            value: x,
            reason: "requires a finite positive argument",
        });
    }
    Ok(libm::lgamma(x))
}

// B_{2k} / (2k) for k = 1..5.
const DIGAMMA_ASYMPTOTIC: [f64; 5] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
];

const DIGAMMA_SHIFT: f64 = 8.0;

/// Digamma function ψ(x) = d/dx ln Γ(x) for `x > 0`.
///
/// The argument is shifted above 8 with ψ(x+1) = ψ(x) + 1/x, after which
/// ψ(x) ≈ ln x − 1/(2x) − Σ B_{2k}/(2k x^{2k}) is accurate to a few 1e-13.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            function: "digamma",
            value: x,
            reason: "requires a finite positive argument",
        });
    }
    let mut shift = CompensatedSum::new();
    let mut y = x;
    while y < DIGAMMA_SHIFT {
        shift.add(1.0 / y);
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    let mut series = 0.0;
    for c in DIGAMMA_ASYMPTOTIC.iter().rev() {
        series = series * inv2 + c;
    }
    series *= inv2;
    Ok(y.ln() - 0.5 / y - series - shift.value())
}

/// Natural log of the upper incomplete Gamma function Γ(a, x), `a, x > 0`.
pub(crate) fn ln_upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let prefactor = a * x.ln() - x;
    if x < a + 1.0 {
        // Γ(a, x) = Γ(a) − γ(a, x), lower part by its power series.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let lower = (prefactor + sum.ln()).exp();
        (libm::tgamma(a) - lower).ln()
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        prefactor + h.ln()
    }
}

/// Number of odd-order Bernoulli corrections kept in the large-argument
/// expansion of the level function.
const RATIO_TERMS: usize = 5;

// Even-index Bernoulli numbers B_0, B_2, ..., B_10.
const BERNOULLI_EVEN: [f64; 6] = [
    1.0,
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
];

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Bernoulli polynomial B_k(1/2 + h) for odd k, expanded around 1/2 where
/// the odd-index contributions vanish.
fn bernoulli_centered(k: u32, h: f64) -> f64 {
    (0..=k / 2)
        .map(|j| {
            let even = 2 * j;
            let centered = (2f64.powi(1 - even as i32) - 1.0) * BERNOULLI_EVEN[j as usize];
            binomial(k, even) * centered * h.powi((k - even) as i32)
        })
        .sum()
}

/// Largest integer order evaluated as an exact product.
const MAX_EXACT_ORDER: f64 = 16.0;

/// The level function f_q(x) = Γ(qx+1)/Γ(q(x−1)+1), evaluated in log space.
///
/// With w = qx + (1−q)/2 the ratio equals Γ(w + ½ + q/2)/Γ(w + ½ − q/2), whose
/// logarithm has an expansion in even powers of 1/w. That route avoids the
/// cancellation of two huge log-Gamma values and is used once w is large;
/// below the switch point the Gamma ratio is formed directly.
#[derive(Debug, Clone, Copy)]
pub struct LevelFunction {
    q: f64,
    switch: f64,
    coeffs: [f64; RATIO_TERMS],
    /// Set for small integer orders, where n_q is the falling factorial
    /// (qn)(qn−1)···(qn−q+1).
    integer_order: Option<u32>,
}

impl LevelFunction {
    pub fn new(q: f64) -> Result<Self> {
        check_order(q)?;
        let h = 0.5 * q;
        let mut coeffs = [0.0; RATIO_TERMS];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let k = 2 * i as u32 + 3;
            *c = -2.0 * bernoulli_centered(k, h) / f64::from(k * (k - 1));
        }
        Ok(Self {
            q,
            switch: 40.0 + 10.0 * q,
            coeffs,
            integer_order: (q.fract() == 0.0 && q <= MAX_EXACT_ORDER).then_some(q as u32),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// ln f_q(x) for real x ≥ 1.
    #[inline]
    pub fn ln_value(&self, x: f64) -> f64 {
        let q = self.q;
        let w = q * x + 0.5 * (1.0 - q);
        if w >= self.switch {
            let inv2 = 1.0 / (w * w);
            let mut series = 0.0;
            for c in self.coeffs.iter().rev() {
                series = series * inv2 + c;
            }
            q * w.ln() + series * inv2
        } else if q * x + 1.0 < 170.0 {
            (libm::tgamma(q * x + 1.0) / libm::tgamma(q * x + 1.0 - q)).ln()
        } else {
            libm::lgamma(q * x + 1.0) - libm::lgamma(q * x + 1.0 - q)
        }
    }

    /// Logarithmic derivative d ln f_q / dx for real x ≥ 1.
    pub fn ln_derivative(&self, x: f64) -> f64 {
        let q = self.q;
        let w = q * x + 0.5 * (1.0 - q);
        if w >= self.switch {
            let inv2 = 1.0 / (w * w);
            let mut series = 0.0;
            for (j, c) in self.coeffs.iter().enumerate().rev() {
                series = series * inv2 + 2.0 * (j + 1) as f64 * c;
            }
            q * (q - series * inv2) / w
        } else {
            // Both arguments are at least 1 here.
            q * (digamma(q * x + 1.0).unwrap_or(f64::NAN)
                - digamma(q * x + 1.0 - q).unwrap_or(f64::NAN))
        }
    }

    /// f_q(x) for real x ≥ 1.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.ln_value(x).exp()
    }

    /// The level n_q; zero for the ground state n = 0.
    #[inline]
    pub fn level(&self, n: u64) -> f64 {
        match (n, self.integer_order) {
            (0, _) => 0.0,
            (_, Some(k)) => {
                let top = u64::from(k) as f64 * n as f64;
                (0..k).fold(1.0, |acc, j| acc * (top - f64::from(j)))
            }
            _ => self.value(n as f64),
        }
    }
}

/// The number-operator eigenvalue n_q = Γ(qn+1)/Γ(q(n−1)+1), with 0 at n = 0.
pub fn level(q: f64, n: u64) -> Result<f64> {
    Ok(LevelFunction::new(q)?.level(n))
}

/// The levels n_q for n = 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpectrum {
    q: f64,
    levels: Vec<f64>,
}

impl LevelSpectrum {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Truncation index N.
    pub fn truncation(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Re-checks `levels[0] = 0` and strict positive increase for n ≥ 1.
    pub fn is_valid(&self) -> bool {
        self.levels.first() == Some(&0.0)
            && self.levels[1..].iter().all(|l| l.is_finite() && *l > 0.0)
            && self.levels[1..].windows(2).all(|w| w[1] > w[0])
    }
}

pub fn level_spectrum(q: f64, n: usize) -> Result<LevelSpectrum> {
    if n < 1 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n as f64,
            reason: "truncation must be at least 1",
        });
    }
    let f = LevelFunction::new(q)?;
    let spectrum = LevelSpectrum {
        q,
        levels: (0..=n as u64).map(|k| f.level(k)).collect(),
    };
    if let Some(k) = spectrum.levels[1..].windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InternalConsistency(format!(
            "level sequence for q = {q} fails to increase between n = {} and n = {}",
            k + 1,
            k + 2
        )));
    }
    if !spectrum.is_valid() {
        return Err(Error::InternalConsistency(format!(
            "level sequence for q = {q} contains non-finite or non-positive entries"
        )));
    }
    Ok(spectrum)
}

/// d f_q / dx = q · f_q(x) · (ψ(qx+1) − ψ(q(x−1)+1)) for x ≥ 1.
pub fn level_derivative(q: f64, x: f64) -> Result<f64> {
    let f = LevelFunction::new(q)?;
    if !(x.is_finite() && x >= 1.0) {
        return Err(Error::Domain {
            function: "level_derivative",
            value: x,
            reason: "requires x >= 1",
        });
    }
    let upper = digamma(q * x + 1.0)?;
    let lower = digamma(q * (x - 1.0) + 1.0)?;
    Ok(q * f.value(x) * (upper - lower))
}

/// Mittag-Leffler function E_q(z) = Σ zⁿ/Γ(qn+1) by its power series.
///
/// Terms are formed as exp(n·Log z − ln Γ(qn+1)) and accumulated with
/// compensated summation; the series stops once three consecutive terms are
/// negligible against the partial sum.
pub fn mittag_leffler(q: f64, z: Complex64, ctl: &EvalControl) -> Result<Complex64> {
    check_order(q)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain {
            function: "mittag_leffler",
            value: z.norm(),
            reason: "requires a finite argument",
        });
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let log_z = z.ln();
    let mut acc = ComplexCompensatedSum::new();
    let mut quiet = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        let term = (log_z * nf - libm::lgamma(q * nf + 1.0)).exp();
        acc.add(term);
        if ctl.negligible(term.norm(), acc.value().norm()) {
            quiet += 1;
            if quiet == 3 {
                return Ok(acc.value());
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Convergence {
        partial: acc.value(),
        terms: ctl.max_terms,
    })
}
