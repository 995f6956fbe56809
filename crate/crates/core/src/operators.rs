//! Ladder operators on ML²(ℂ∖ℝ₋; q).
//!
//! The annihilation operator a is the Caputo derivative D*^q, which maps
//! a_n z^{qn} to a_n·n_q·z^{q(n−1)}; the creation operator a† multiplies by
//! z^q. In the ψ_n basis a ψ_n = √n_q·ψ_{n−1}, a† ψ_n = √(n+1)_q·ψ_{n+1} and
//! a†a ψ_n = n_q·ψ_n.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_order, Error, Result};
use crate::space::{inner, norm, MLState};
use crate::specfun::LevelFunction;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// D*^q f: b_{n−1} = a_n·n_q. The truncation drops by one (never below 0).
pub fn annihilate(f: &MLState) -> MLState {
    let levels = LevelFunction::new(f.q()).expect("state order is validated");
    let coeffs: Vec<_> = f
        .coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, a)| a * levels.level(n as u64))
        .collect();
    MLState::new(f.q(), coeffs).expect("finite coefficients")
}

/// z^q·f: b_{n+1} = a_n. The truncation grows by one.
pub fn create(f: &MLState) -> MLState {
    let coeffs = std::iter::once(ZERO)
        .chain(f.coeffs().iter().copied())
        .collect();
    MLState::new(f.q(), coeffs).expect("finite coefficients")
}

/// a†a f: b_n = a_n·n_q, so b_0 = 0.
pub fn number_apply(f: &MLState) -> MLState {
    let levels = LevelFunction::new(f.q()).expect("state order is validated");
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(n, a)| a * levels.level(n as u64))
        .collect();
    MLState::new(f.q(), coeffs).expect("finite coefficients")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Annihilation,
    Creation,
    Number,
}

impl OperatorKind {
    pub fn apply(self, f: &MLState) -> MLState {
        match self {
            Self::Annihilation => annihilate(f),
            Self::Creation => create(f),
            Self::Number => number_apply(f),
        }
    }
}

/// Truncated matrix of a, a† or a†a in the ψ_0..ψ_N basis, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorMatrix {
    pub q: f64,
    pub kind: OperatorKind,
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl OperatorMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Row-major product self·other.
    pub fn product(&self, other: &OperatorMatrix) -> Vec<f64> {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product on ψ_n components.
    pub fn apply(&self, components: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(components.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| {
                components
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.get(i, j))
                    .sum()
            })
            .collect()
    }
}

pub fn matrix(q: f64, kind: OperatorKind, truncation: usize) -> Result<OperatorMatrix> {
    check_order(q)?;
    if truncation < 1 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: truncation as f64,
            reason: "truncation must be at least 1",
        });
    }
    let levels = LevelFunction::new(q)?;
    let dim = truncation + 1;
    let mut entries = vec![0.0; dim * dim];
    for n in 1..dim {
        let level = levels.level(n as u64);
        match kind {
            OperatorKind::Annihilation => entries[(n - 1) * dim + n] = level.sqrt(),
            OperatorKind::Creation => entries[n * dim + n - 1] = level.sqrt(),
            OperatorKind::Number => entries[n * dim + n] = level,
        }
    }
    Ok(OperatorMatrix {
        q,
        kind,
        dim,
        entries,
    })
}

fn random_state<R: Rng + ?Sized>(q: f64, truncation: usize, rng: &mut R) -> Result<MLState> {
    let components: Vec<_> = (0..=truncation)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    MLState::from_components(q, &components)
}

/// max |⟨a†f, g⟩ − ⟨f, a g⟩| / (‖f‖·‖g‖) over random pairs with f truncated
/// at N−1 and g at N, where the finite-dimensional identity is exact.
pub fn adjoint_defect<R: Rng + ?Sized>(
    q: f64,
    truncation: usize,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    check_order(q)?;
    if truncation < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: truncation as f64,
            reason: "adjointness check needs N >= 2",
        });
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = random_state(q, truncation - 1, rng)?;
        let g = random_state(q, truncation, rng)?;
        let lhs = inner(&create(&f), &g)?;
        let rhs = inner(&f, &annihilate(&g))?;
        let scale = norm(&f)? * norm(&g)?;
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    Ok(worst)
}

/// Diagonal of [a, a†] on span{ψ_0..ψ_{N−1}}: c_n = (n+1)_q − n_q.
pub fn commutator_diagonal(q: f64, truncation: usize) -> Result<Vec<f64>> {
    if truncation < 1 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: truncation as f64,
            reason: "truncation must be at least 1",
        });
    }
    let levels = LevelFunction::new(q)?;
    Ok((0..truncation as u64)
        .map(|n| levels.level(n + 1) - levels.level(n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::basis_state;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn component(f: &MLState, n: usize) -> Complex64 {
        f.components()[n]
    }

    #[test]
    fn annihilate_examples() {
        let zero = annihilate(&basis_state(1.3, 0).unwrap());
        assert_eq!(zero.coeffs(), &[ZERO]);

        let out = annihilate(&basis_state(1.0, 4).unwrap());
        assert_eq!(out.truncation(), 3);
        assert_relative_eq!(component(&out, 3).re, 2.0, max_relative = 1e-14);

        let out = annihilate(&basis_state(2.0, 2).unwrap());
        // a_2 = 1/√24, times level 12 gives 12/√24 on z², i.e. √12 on ψ_1 = z²/√2.
        assert_relative_eq!(
            out.coeffs()[1].re,
            12.0 / 24f64.sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(component(&out, 1).re, 12f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn create_examples() {
        let out = create(&basis_state(1.0, 0).unwrap());
        assert_eq!(out.truncation(), 1);
        assert_relative_eq!(component(&out, 1).re, 1.0, max_relative = 1e-15);

        let out = create(&basis_state(2.0, 1).unwrap());
        assert_relative_eq!(component(&out, 2).re, 12f64.sqrt(), max_relative = 1e-14);

        for q in [1.0, 2.0] {
            let levels = LevelFunction::new(q).unwrap();
            for n in 0..=16 {
                let lhs = inner(
                    &create(&basis_state(q, n).unwrap()),
                    &basis_state(q, n + 1).unwrap(),
                )
                .unwrap();
                assert_relative_eq!(
                    lhs.re,
                    levels.level(n as u64 + 1).sqrt(),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn number_examples() {
        let out = number_apply(&basis_state(0.5, 0).unwrap());
        assert_eq!(out.coeffs(), &[ZERO]);
        let out = number_apply(&basis_state(2.0, 3).unwrap());
        assert_relative_eq!(component(&out, 3).re, 30.0, max_relative = 1e-14);
    }

    #[test]
    fn matrix_examples() {
        let n = matrix(1.0, OperatorKind::Number, 3).unwrap();
        for (got, want) in n.diagonal().iter().zip([0.0, 1.0, 2.0, 3.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        let a = matrix(2.0, OperatorKind::Annihilation, 2).unwrap();
        let nonzero: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| a.get(i, j) != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(0, 1), (1, 2)]);
        assert_relative_eq!(a.get(0, 1), 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(a.get(1, 2), 12f64.sqrt(), max_relative = 1e-14);
        assert!(matrix(1.0, OperatorKind::Number, 0).is_err());
    }

    #[test]
    fn creation_is_transpose_of_annihilation() {
        for q in [0.5, 1.0, 2.0, 3.0] {
            let a = matrix(q, OperatorKind::Annihilation, 12).unwrap();
            let c = matrix(q, OperatorKind::Creation, 12).unwrap();
            for i in 0..a.dim {
                for j in 0..a.dim {
                    assert_eq!(a.get(i, j), c.get(j, i));
                }
            }
        }
    }

    #[test]
    fn creation_times_annihilation_is_number() {
        for q in [0.5, 1.0, 2.0] {
            let a = matrix(q, OperatorKind::Annihilation, 10).unwrap();
            let c = matrix(q, OperatorKind::Creation, 10).unwrap();
            let number = matrix(q, OperatorKind::Number, 10).unwrap();
            let product = c.product(&a);
            for (got, want) in product.iter().zip(&number.entries) {
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn matrices_act_like_operators() {
        let q = 1.7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_state(q, 8, &mut rng).unwrap();
        let mut padded = f.components();
        padded.push(ZERO);
        let a = matrix(q, OperatorKind::Annihilation, 9).unwrap();
        let via_matrix = a.apply(&padded);
        let via_operator = annihilate(&f).components();
        for (m, o) in via_matrix.iter().zip(&via_operator) {
            assert!((m - o).norm() < 1e-12 * o.norm().max(1.0));
        }
    }

    #[test]
    fn adjoint_defect_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in [1.0, 2.0, 0.5] {
            let d = adjoint_defect(q, 16, 50, &mut rng).unwrap();
            assert!(d <= 1e-11, "q = {q}: {d}");
        }
        assert!(adjoint_defect(1.0, 1, 5, &mut rng).is_err());
    }

    #[test]
    fn commutator_examples() {
        let ones = commutator_diagonal(1.0, 20).unwrap();
        assert!(ones.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let two = commutator_diagonal(2.0, 3).unwrap();
        for (got, want) in two.iter().zip([2.0, 10.0, 18.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-13);
        }
        for q in [0.5, 1.0, 2.0, 5.0] {
            assert!(commutator_diagonal(q, 100)
                .unwrap()
                .iter()
                .all(|&c| c > 0.0));
        }
    }

    #[test]
    fn commutator_grows_for_superlinear_orders() {
        // Non-decreasing level gaps keep the geometric partition tail an upper bound.
        for q in [1.0, 1.25, 1.5, 2.0, 3.0, 5.0] {
            let c = commutator_diagonal(q, 2000).unwrap();
            assert!(c.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "q = {q}");
        }
    }
}
