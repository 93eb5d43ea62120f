//! Model n-isometries `V_{U_j,P_j}` and their defining conditions.
//!
//! A tuple of unitaries `U_j` and projections `P_j` on a finite-dimensional
//! space is a model n-isometry when
//!
//! * (a) the `U_j` commute,
//! * (b) `U_1⋯U_n = I`,
//! * (c) `P_j + U_jᴴP_iU_j = P_i + U_iᴴP_jU_i` is a projection for `i ≠ j`,
//! * (d) `P_1 + U_1ᴴP_2U_1 + ⋯ + U_1ᴴ⋯U_{n−1}ᴴP_nU_{n−1}⋯U_1 = I`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numcore::{
    direct_sum, ensure_square, fro, identity, nullspace, polar_unitary, projection_residual, span,
    unitarity_residual, CMatrix, NumError, Tolerances,
};
use crate::sample;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("a model tuple needs at least one pair")]
    Empty,
    #[error("pair {index}: expected {dim}x{dim} matrices, found U {u:?} and P {p:?}")]
    Dimension {
        index: usize,
        dim: usize,
        u: (usize, usize),
        p: (usize, usize),
    },
    #[error("U_{index} is not unitary (residual {residual:.3e})")]
    NotUnitary { index: usize, residual: f64 },
    #[error("P_{index} is not an orthogonal projection (residual {residual:.3e})")]
    NotProjection { index: usize, residual: f64 },
    #[error("composition needs P_1 U_2 P_2 = 0, found norm {norm:.3e}")]
    Composition { norm: f64 },
    #[error("completion hypothesis {condition} fails (residual {residual:.3e})")]
    Hypothesis { condition: String, residual: f64 },
    #[error("ranks of P_j sum to {sum} but the space has dimension {dim}")]
    RankAccounting { sum: usize, dim: usize },
    #[error("completed tuple failed validation (worst residual {residual:.3e})")]
    CompletionInvalid { residual: f64 },
}

/// One factor `V_{U,P}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub u: CMatrix,
    pub p: CMatrix,
}

impl Pair {
    pub fn new(u: CMatrix, p: CMatrix) -> Self {
        Self { u, p }
    }

    pub fn conjugate(&self, w: &CMatrix) -> Pair {
        let wh = w.adjoint();
        Pair::new(w * &self.u * &wh, w * &self.p * &wh)
    }
}

fn check_pair(index: usize, dim: usize, pair: &Pair, tol: &Tolerances) -> Result<(), ModelError> {
    if pair.u.shape() != (dim, dim) || pair.p.shape() != (dim, dim) {
        return Err(ModelError::Dimension {
            index,
            dim,
            u: pair.u.shape(),
            p: pair.p.shape(),
        });
    }
    crate::numcore::ensure_finite(&pair.u)?;
    crate::numcore::ensure_finite(&pair.p)?;
    let residual = unitarity_residual(&pair.u)?;
    if residual > tol.orth {
        return Err(ModelError::NotUnitary { index, residual });
    }
    let residual = projection_residual(&pair.p)?;
    if residual > tol.orth {
        return Err(ModelError::NotProjection { index, residual });
    }
    Ok(())
}

fn check_pairs(pairs: &[Pair], tol: &Tolerances) -> Result<usize, ModelError> {
    let first = pairs.first().ok_or(ModelError::Empty)?;
    let dim = ensure_square(&first.u)?;
    for (k, pair) in pairs.iter().enumerate() {
        check_pair(k + 1, dim, pair, tol)?;
    }
    Ok(dim)
}

/// A tuple of (U_j, P_j) with unitary U_j and projection P_j of a common size.
///
/// Construction checks only these entry-wise invariants; the model
/// conditions are reported by [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTuple {
    dim: usize,
    pairs: Vec<Pair>,
}

impl ModelTuple {
    pub fn new(pairs: Vec<Pair>, tol: &Tolerances) -> Result<Self, ModelError> {
        let dim = check_pairs(&pairs, tol)?;
        Ok(Self { dim, pairs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// `U_j` with the one-based index used in the model conditions.
    pub fn u(&self, j: usize) -> &CMatrix {
        &self.pairs[j - 1].u
    }

    /// `P_j`, one based.
    pub fn p(&self, j: usize) -> &CMatrix {
        &self.pairs[j - 1].p
    }

    /// The tuple `(W U_j Wᴴ, W P_j Wᴴ)`.
    pub fn conjugate(&self, w: &CMatrix) -> ModelTuple {
        ModelTuple {
            dim: self.dim,
            pairs: self.pairs.iter().map(|p| p.conjugate(w)).collect(),
        }
    }

    /// Factors reordered by `order` (a permutation of `0..n`).
    pub fn permuted(&self, order: &[usize]) -> ModelTuple {
        ModelTuple {
            dim: self.dim,
            pairs: order.iter().map(|&k| self.pairs[k].clone()).collect(),
        }
    }

    /// Direct sum of two tuples with the same number of factors.
    pub fn direct_sum(&self, other: &ModelTuple) -> Option<ModelTuple> {
        if self.n() != other.n() {
            return None;
        }
        let pairs = self
            .pairs
            .iter()
            .zip(&other.pairs)
            .map(|(a, b)| Pair::new(direct_sum(&a.u, &b.u), direct_sum(&a.p, &b.p)))
            .collect();
        Some(ModelTuple {
            dim: self.dim + other.dim,
            pairs,
        })
    }
}

/// Residuals of the four model conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// (a): largest `‖U_iU_j − U_jU_i‖`.
    pub commutation: f64,
    /// (b): `‖U_1⋯U_n − I‖`.
    pub product: f64,
    /// (c): largest balance residual over ordered pairs.
    pub balance: f64,
    /// (c): per ordered pair (one based) balance residual.
    pub balance_pairs: Vec<((usize, usize), f64)>,
    /// (c): largest projection residual of the common values.
    pub balance_projection: f64,
    /// (d): `‖Σ L_jᴴ P_j L_j − I‖`.
    pub resolution: f64,
    pub commutation_ok: bool,
    pub product_ok: bool,
    pub balance_ok: bool,
    pub resolution_ok: bool,
    pub ok: bool,
}

impl ValidationReport {
    pub fn worst(&self) -> f64 {
        self.commutation
            .max(self.product)
            .max(self.balance)
            .max(self.balance_projection)
            .max(self.resolution)
    }
}

/// `P_j + U_jᴴ P_i U_j` (zero-based indices).
fn balance_value(pairs: &[Pair], i: usize, j: usize) -> CMatrix {
    &pairs[j].p + pairs[j].u.adjoint() * &pairs[i].p * &pairs[j].u
}

/// `P_1 + U_1ᴴP_2U_1 + ⋯` over all given pairs.
pub fn resolution_sum(pairs: &[Pair]) -> CMatrix {
    let dim = pairs[0].u.nrows();
    let mut total = CMatrix::zeros(dim, dim);
    let mut l = identity(dim);
    for pair in pairs {
        total += l.adjoint() * &pair.p * &l;
        l = &pair.u * l;
    }
    total
}

pub fn product_of_unitaries(pairs: &[Pair]) -> CMatrix {
    let dim = pairs[0].u.nrows();
    pairs.iter().fold(identity(dim), |acc, p| acc * &p.u)
}

fn max_commutation(pairs: &[Pair]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (a, b) = (&pairs[i].u, &pairs[j].u);
            worst = worst.max(fro(&(a * b - b * a)));
        }
    }
    worst
}

fn balance_residuals(pairs: &[Pair]) -> (Vec<((usize, usize), f64)>, f64) {
    let mut per_pair = Vec::new();
    let mut proj: f64 = 0.0;
    for i in 0..pairs.len() {
        for j in 0..pairs.len() {
            if i == j {
                continue;
            }
            let left = balance_value(pairs, i, j);
            let right = balance_value(pairs, j, i);
            per_pair.push(((i + 1, j + 1), fro(&(&left - &right))));
            proj = proj.max(projection_residual(&left).unwrap_or(f64::INFINITY));
        }
    }
    (per_pair, proj)
}

pub fn validate_model(t: &ModelTuple, tol: &Tolerances) -> ValidationReport {
    let pairs = t.pairs();
    let commutation = max_commutation(pairs);
    let product = fro(&(product_of_unitaries(pairs) - identity(t.dim())));
    let (balance_pairs, balance_projection) = balance_residuals(pairs);
    let balance = balance_pairs.iter().map(|x| x.1).fold(0.0, f64::max);
    let resolution = fro(&(resolution_sum(pairs) - identity(t.dim())));
    let commutation_ok = commutation <= tol.eq;
    let product_ok = product <= tol.eq;
    let balance_ok = balance <= tol.eq && balance_projection <= tol.eq;
    let resolution_ok = resolution <= tol.eq;
    ValidationReport {
        commutation,
        product,
        balance,
        balance_pairs,
        balance_projection,
        resolution,
        commutation_ok,
        product_ok,
        balance_ok,
        resolution_ok,
        ok: commutation_ok && product_ok && balance_ok && resolution_ok,
    }
}

/// Product rule `V_{U_1,P_1} V_{U_2,P_2} = V_{U_1U_2, P_2 + U_2ᴴP_1U_2}`.
pub fn compose(a: &Pair, b: &Pair, tol: &Tolerances) -> Result<Pair, ModelError> {
    check_pairs(&[a.clone(), b.clone()], tol)?;
    let norm = fro(&(&a.p * &b.u * &b.p));
    if norm > tol.eq {
        return Err(ModelError::Composition { norm });
    }
    let u = &a.u * &b.u;
    let p = &b.p + b.u.adjoint() * &a.p * &b.u;
    let residual = projection_residual(&p)?;
    if residual > tol.eq {
        return Err(ModelError::NotProjection {
            index: 0,
            residual,
        });
    }
    Ok(Pair::new(u, p))
}

/// Complete `n − 1` pairs to the unique model n-isometry.
pub fn complete_tuple(prefix: &[Pair], tol: &Tolerances) -> Result<ModelTuple, ModelError> {
    let dim = check_pairs(prefix, tol)?;
    let commutation = max_commutation(prefix);
    if commutation > tol.eq {
        return Err(ModelError::Hypothesis {
            condition: "(1) commutation".into(),
            residual: commutation,
        });
    }
    let (balance, proj) = balance_residuals(prefix);
    let worst = balance.iter().map(|x| x.1).fold(0.0, f64::max);
    if worst > tol.eq {
        return Err(ModelError::Hypothesis {
            condition: "(2) balance".into(),
            residual: worst,
        });
    }
    if proj > tol.eq {
        return Err(ModelError::Hypothesis {
            condition: "(2) balance value is a projection".into(),
            residual: proj,
        });
    }
    let partial = resolution_sum(prefix);
    let residual = projection_residual(&partial)?;
    if residual > tol.eq {
        return Err(ModelError::Hypothesis {
            condition: "(3) partial sum is at most I".into(),
            residual,
        });
    }
    let u = product_of_unitaries(prefix);
    let mut p_last = identity(dim) - &u * &partial * u.adjoint();
    p_last = (&p_last + p_last.adjoint()) * Complex64::new(0.5, 0.0);
    let mut pairs = prefix.to_vec();
    pairs.push(Pair::new(u.adjoint(), p_last));
    let t = ModelTuple::new(pairs, tol)?;
    let report = validate_model(&t, tol);
    if !report.ok {
        return Err(ModelError::CompletionInvalid {
            residual: report.worst(),
        });
    }
    Ok(t)
}

/// `[rank P_1, …, rank P_n]`, checked to sum to the dimension.
pub fn rank_accounting(t: &ModelTuple, tol: &Tolerances) -> Result<Vec<usize>, ModelError> {
    let ranks: Vec<usize> = t.pairs().iter().map(|p| span(&p.p, tol).dim()).collect();
    let sum: usize = ranks.iter().sum();
    if sum != t.dim() {
        return Err(ModelError::RankAccounting { sum, dim: t.dim() });
    }
    Ok(ranks)
}

/// `‖P U (I − P)‖`: zero exactly when `Uᴴ` leaves the range of `P` invariant.
pub fn double_commutation_residual(u: &CMatrix, p: &CMatrix) -> f64 {
    let n = p.nrows();
    fro(&(p * u * (identity(n) - p)))
}

pub fn doubly_commuting(u: &CMatrix, p: &CMatrix, tol: &Tolerances) -> bool {
    double_commutation_residual(u, p) <= tol.eq
}

/// Column-major vectorization helpers: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
fn intertwining_system(a: &ModelTuple, b: &ModelTuple) -> CMatrix {
    let m = a.dim();
    let i = identity(m);
    let mut blocks = Vec::with_capacity(2 * a.n());
    for (pa, pb) in a.pairs().iter().zip(b.pairs()) {
        // X A − A' X = 0 with X: E → E'
        for (x, y) in [(&pa.u, &pb.u), (&pa.p, &pb.p)] {
            blocks.push(i.kronecker(y) - x.transpose().kronecker(&i));
        }
    }
    crate::numcore::vstack(&blocks)
}

fn unvec(v: &CMatrix, m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| v[(j * m + i, 0)])
}

/// Dimension of the joint commutant of all `U_j` and `P_j`.
pub fn commutant_dimension(t: &ModelTuple, tol: &Tolerances) -> usize {
    nullspace(&intertwining_system(t, t), tol).dim()
}

/// Outcome of the equivalence search.
#[derive(Debug, Clone, PartialEq)]
pub enum Equivalence {
    /// A certified unitary `W` with `W U_j = U'_j W` and `W P_j = P'_j W`.
    Equivalent(CMatrix),
    NotEquivalent(String),
    /// Reducible tuples where no sampled intertwiner certified.
    Undecided(String),
}

impl Equivalence {
    pub fn intertwiner(&self) -> Option<&CMatrix> {
        match self {
            Equivalence::Equivalent(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent(_))
    }
}

/// Largest residual of `W` as a unitary intertwiner from `a` to `b`.
pub fn intertwining_residual(a: &ModelTuple, b: &ModelTuple, w: &CMatrix) -> f64 {
    let mut worst = unitarity_residual(w).unwrap_or(f64::INFINITY);
    for (pa, pb) in a.pairs().iter().zip(b.pairs()) {
        worst = worst.max(fro(&(w * &pa.u - &pb.u * w)));
        worst = worst.max(fro(&(w * &pa.p - &pb.p * w)));
    }
    worst
}

pub const EQUIVALENCE_ATTEMPTS: usize = 8;

pub fn equivalent(a: &ModelTuple, b: &ModelTuple, tol: &Tolerances) -> Equivalence {
    equivalent_seeded(a, b, tol, 0)
}

/// Decide unitary equivalence of two model tuples.
///
/// The intertwiner space is the kernel of the stacked Sylvester system. For
/// irreducible tuples it is at most one dimensional and a nonzero element is
/// a multiple of a unitary. Otherwise a generic element `X = W·C`, with `C`
/// in the commutant, has polar factor `W·V` for a commutant unitary `V`, so
/// the polar factors of random elements are certified in turn.
pub fn equivalent_seeded(
    a: &ModelTuple,
    b: &ModelTuple,
    tol: &Tolerances,
    seed: u64,
) -> Equivalence {
    if a.dim() != b.dim() {
        return Equivalence::NotEquivalent(format!(
            "dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        ));
    }
    if a.n() != b.n() {
        return Equivalence::NotEquivalent(format!(
            "tuple lengths differ ({} vs {})",
            a.n(),
            b.n()
        ));
    }
    let m = a.dim();
    if intertwining_residual(a, b, &identity(m)) <= tol.eq {
        return Equivalence::Equivalent(identity(m));
    }
    let ca = commutant_dimension(a, tol);
    let cb = commutant_dimension(b, tol);
    if ca != cb {
        return Equivalence::NotEquivalent(format!(
            "commutant dimensions differ ({ca} vs {cb})"
        ));
    }
    let sols = nullspace(&intertwining_system(a, b), tol);
    if sols.dim() != ca {
        return Equivalence::NotEquivalent(format!(
            "intertwiner space has dimension {} but the commutant has {}",
            sols.dim(),
            ca
        ));
    }
    if ca == 1 {
        let x = unvec(&sols.basis().columns(0, 1).into_owned(), m);
        let w = &x * Complex64::new((m as f64).sqrt() / fro(&x), 0.0);
        let residual = intertwining_residual(a, b, &w);
        return if residual <= tol.eq {
            Equivalence::Equivalent(w)
        } else {
            Equivalence::NotEquivalent(format!(
                "the unique intertwiner is not unitary (residual {residual:.3e})"
            ))
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..EQUIVALENCE_ATTEMPTS {
        let coeffs = sample::ginibre(&mut rng, sols.dim(), 1);
        let x = unvec(&(sols.basis() * coeffs), m);
        let Ok(w) = polar_unitary(&x) else { continue };
        let residual = intertwining_residual(a, b, &w);
        if residual <= tol.eq {
            return Equivalence::Equivalent(w);
        }
        best = best.min(residual);
    }
    Equivalence::Undecided(format!(
        "reducible tuples; best sampled intertwiner residual {best:.3e}"
    ))
}
