//! Operator-valued polynomial symbols and their truncations to `H²(𝔈)`.
//!
//! A window of `N` degrees stores `f = Σ_{k<N} f_k z^k` as the stacked vector
//! `(f_0, …, f_{N−1})`. Multiplication by an analytic symbol becomes a block
//! lower-triangular Toeplitz matrix. It is exact on inputs whose image stays in
//! the window. Adjoints of analytic multipliers never raise degree, so the
//! conjugate transpose of a truncation is the exact adjoint on the whole window.

use crate::numcore::{
    fro, identity, nullspace, nullspace_abs, projection_residual, unitarity_residual, zeros,
    CMatrix, NumError, Subspace, Tolerances,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HardyError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("a symbol needs at least one coefficient")]
    EmptySymbol,
    #[error("coefficient sizes differ: {expected} vs {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("not a model symbol: {0}")]
    NotModel(String),
    #[error("truncation window must have at least {min} degrees, got {found}")]
    Window { min: usize, found: usize },
}

/// `Θ(z) = Σ_k C_k z^k` with square coefficients of a common size.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self, HardyError> {
        let first = coeffs.first().ok_or(HardyError::EmptySymbol)?;
        let m = crate::numcore::ensure_square(first)?;
        for c in &coeffs {
            if c.shape() != (m, m) {
                return Err(HardyError::SizeMismatch {
                    expected: m,
                    found: c.nrows().max(c.ncols()),
                });
            }
        }
        Ok(Self { coeffs })
    }

    /// Scalar polynomial from its coefficient list.
    pub fn scalar(coeffs: &[num_complex::Complex64]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| identity(1) * c).collect(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// Coefficient of `z^k`, zero past the stored degree.
    pub fn coeff(&self, k: usize) -> CMatrix {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| zeros(self.block_size(), self.block_size()))
    }

    /// Exact coefficient convolution.
    pub fn mul(&self, other: &MatrixPolynomial) -> Result<MatrixPolynomial, HardyError> {
        let m = self.block_size();
        if other.block_size() != m {
            return Err(HardyError::SizeMismatch {
                expected: m,
                found: other.block_size(),
            });
        }
        let len = self.len() + other.len() - 1;
        let mut out = vec![zeros(m, m); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(MatrixPolynomial { coeffs: out })
    }

    /// Distance from the shift symbol `zI`.
    pub fn shift_residual(&self) -> f64 {
        let m = self.block_size();
        let mut worst: f64 = 0.0;
        for k in 0..self.len().max(2) {
            let target = if k == 1 { identity(m) } else { zeros(m, m) };
            worst = worst.max(fro(&(self.coeff(k) - target)));
        }
        worst
    }
}

pub fn is_shift(poly: &MatrixPolynomial, tol: &Tolerances) -> bool {
    poly.shift_residual() <= tol.eq
}

/// Degree-one symbol `Θ(z) = A + zB`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSymbol {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl LinearSymbol {
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self, HardyError> {
        MatrixPolynomial::new(vec![a.clone(), b.clone()])?;
        Ok(Self { a, b })
    }

    pub fn to_polynomial(&self) -> MatrixPolynomial {
        MatrixPolynomial {
            coeffs: vec![self.a.clone(), self.b.clone()],
        }
    }

    /// `(‖AᴴA + BᴴB − I‖, ‖AᴴB‖)`: both vanish iff `Θ` is an isometry on the circle.
    pub fn isometry_residuals(&self) -> (f64, f64) {
        let m = self.a.nrows();
        let gram = self.a.adjoint() * &self.a + self.b.adjoint() * &self.b - identity(m);
        (fro(&gram), fro(&(self.a.adjoint() * &self.b)))
    }
}

fn check_model_pair(u: &CMatrix, p: &CMatrix, tol: &Tolerances) -> Result<(), HardyError> {
    let ru = unitarity_residual(u)?;
    if ru > tol.orth {
        return Err(HardyError::NotModel(format!("U not unitary (residual {ru:.3e})")));
    }
    let rp = projection_residual(p)?;
    if rp > tol.orth {
        return Err(HardyError::NotModel(format!(
            "P not a projection (residual {rp:.3e})"
        )));
    }
    if u.shape() != p.shape() {
        return Err(HardyError::SizeMismatch {
            expected: u.nrows(),
            found: p.nrows(),
        });
    }
    Ok(())
}

/// Symbol `U(zP + P⊥)`: `A = U(I − P)`, `B = UP`.
pub fn symbol_of_model(u: &CMatrix, p: &CMatrix, tol: &Tolerances) -> Result<LinearSymbol, HardyError> {
    check_model_pair(u, p, tol)?;
    let m = u.nrows();
    let sym = LinearSymbol {
        a: u * (identity(m) - p),
        b: u * p,
    };
    let (g, x) = sym.isometry_residuals();
    if g.max(x) > tol.eq {
        return Err(HardyError::NotModel(format!(
            "coefficient identities fail ({g:.3e}, {x:.3e})"
        )));
    }
    Ok(sym)
}

pub fn symbol_product(
    theta: &LinearSymbol,
    omega: &LinearSymbol,
) -> Result<MatrixPolynomial, HardyError> {
    theta.to_polynomial().mul(&omega.to_polynomial())
}

/// `V = U(zP + P⊥)` and its cofactor `W = (P + zP⊥)Uᴴ`, with `VW = WV = zI`.
pub fn divisor_pair(
    u: &CMatrix,
    p: &CMatrix,
    tol: &Tolerances,
) -> Result<(LinearSymbol, LinearSymbol), HardyError> {
    let v = symbol_of_model(u, p, tol)?;
    let m = u.nrows();
    let uh = u.adjoint();
    let w = LinearSymbol {
        a: p * &uh,
        b: (identity(m) - p) * &uh,
    };
    Ok((v, w))
}

/// Dense `mN × mN` truncation of a multiplier to the degree window `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    block: usize,
    degrees: usize,
    matrix: CMatrix,
}

impl TruncatedOperator {
    pub fn from_matrix(block: usize, degrees: usize, matrix: CMatrix) -> Self {
        assert_eq!(matrix.shape(), (block * degrees, block * degrees));
        Self {
            block,
            degrees,
            matrix,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn degrees(&self) -> usize {
        self.degrees
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Block `(i, j)`: the part mapping degree `j` into degree `i`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let m = self.block;
        self.matrix.view((i * m, j * m), (m, m)).into_owned()
    }

    pub fn adjoint(&self) -> TruncatedOperator {
        TruncatedOperator {
            block: self.block,
            degrees: self.degrees,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, other: &TruncatedOperator) -> TruncatedOperator {
        assert_eq!((self.block, self.degrees), (other.block, other.degrees));
        TruncatedOperator {
            block: self.block,
            degrees: self.degrees,
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Columns for input degrees `0..k`.
    pub fn input_columns(&self, k: usize) -> CMatrix {
        self.matrix.columns(0, k * self.block).into_owned()
    }

    /// Largest deviation from block-Toeplitz, lower-triangular, bandwidth `band` structure.
    pub fn toeplitz_defect(&self, band: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.degrees {
            for j in 0..self.degrees {
                let blk = self.block(i, j);
                if i < j || i - j > band {
                    worst = worst.max(fro(&blk));
                } else {
                    worst = worst.max(fro(&(blk - self.block(i - j, 0))));
                }
            }
        }
        worst
    }
}

pub fn truncate(poly: &MatrixPolynomial, n: usize) -> TruncatedOperator {
    let m = poly.block_size();
    let mut matrix = zeros(m * n, m * n);
    for i in 0..n {
        for j in 0..=i {
            let k = i - j;
            if k < poly.len() {
                matrix
                    .view_mut((i * m, j * m), (m, m))
                    .copy_from(&poly.coeffs()[k]);
            }
        }
    }
    TruncatedOperator {
        block: m,
        degrees: n,
        matrix,
    }
}

pub fn truncate_linear(sym: &LinearSymbol, n: usize) -> TruncatedOperator {
    truncate(&sym.to_polynomial(), n)
}

pub fn adjoint(t: &TruncatedOperator) -> TruncatedOperator {
    t.adjoint()
}

/// Embed vectors of `𝔈` (columns of `v`) as constants of degree `k` in the window.
pub fn embed_at_degree(v: &CMatrix, degree: usize, n: usize) -> CMatrix {
    let m = v.nrows();
    let mut out = zeros(m * n, v.ncols());
    out.view_mut((degree * m, 0), (m, v.ncols())).copy_from(v);
    out
}

/// `I_N ⊗ v`: the columns of `v` placed at every degree of the window.
pub fn embed_all_degrees(v: &CMatrix, n: usize) -> CMatrix {
    let m = v.nrows();
    let k = v.ncols();
    let mut out = zeros(m * n, k * n);
    for d in 0..n {
        out.view_mut((d * m, d * k), (m, k)).copy_from(v);
    }
    out
}

/// The displayed adjoint action `U_1P_1⊥ (f − f(0))/z + U_1P_1 f` of the
/// second factor of a model pair, applied to a window vector.
pub fn second_factor_adjoint_formula(u1: &CMatrix, p1: &CMatrix, f: &CMatrix, n: usize) -> CMatrix {
    let m = u1.nrows();
    let a = u1 * (identity(m) - p1);
    let b = u1 * p1;
    let mut out = zeros(m * n, f.ncols());
    for d in 0..n {
        let fd = f.rows(d * m, m).into_owned();
        let mut blk = &b * &fd;
        if d + 1 < n {
            blk += &a * f.rows((d + 1) * m, m);
        }
        out.rows_mut(d * m, m).copy_from(&blk);
    }
    out
}

/// Kernel of the truncated adjoint: `ker V*` inside the window.
pub fn kernel_of_adjoint(
    poly: &MatrixPolynomial,
    n: usize,
    tol: &Tolerances,
) -> Result<Subspace, HardyError> {
    if n == 0 {
        return Err(HardyError::Window { min: 1, found: 0 });
    }
    let t = truncate(poly, n);
    Ok(nullspace(&t.matrix.adjoint(), tol))
}

/// Window image of the unitary part `⋂_k ran V^k` of the product of `symbols`.
///
/// A window vector `x` lies in `ran V^k` iff `T^k (T^k)ᴴ x = x` with `T` the
/// truncation, because the adjoint never raises degree. The resulting chain
/// of kernels is decreasing and constant once it stalls.
pub fn unitary_part_truncated(
    symbols: &[MatrixPolynomial],
    n: usize,
    tol: &Tolerances,
) -> Result<Subspace, HardyError> {
    let first = symbols.first().ok_or(HardyError::EmptySymbol)?;
    let mut prod = first.clone();
    for s in &symbols[1..] {
        prod = prod.mul(s)?;
    }
    let t = truncate(&prod, n);
    let size = t.matrix.nrows();
    let mut power = t.matrix.clone();
    let mut cur = Subspace::full(size);
    for _ in 0..=size {
        let defect = identity(size) - &power * power.adjoint();
        let local = nullspace_abs(&(defect * cur.basis()), tol.eq);
        let next = Subspace::from_orthonormal(&(cur.basis() * local.basis()));
        let stalled = next.dim() == cur.dim();
        cur = next;
        if stalled || cur.is_zero() {
            break;
        }
        power = &power * &t.matrix;
    }
    Ok(cur)
}

/// `U_1P_1U_1(I − P_1)`: the commutator `V_2*V_1 − V_1V_2*` on constants.
pub fn commutator_defect(u1: &CMatrix, p1: &CMatrix) -> CMatrix {
    let m = u1.nrows();
    u1 * p1 * u1 * (identity(m) - p1)
}

/// Dense `V_2ᴴV_1 − V_1V_2ᴴ` for the model pair of `(U_1, P_1)`, restricted to
/// input degrees `0..N−1` where both products are exact.
pub fn truncated_commutator(
    u1: &CMatrix,
    p1: &CMatrix,
    n: usize,
    tol: &Tolerances,
) -> Result<CMatrix, HardyError> {
    if n < 2 {
        return Err(HardyError::Window { min: 2, found: n });
    }
    let m = u1.nrows();
    let (v1, _) = divisor_pair(u1, p1, tol)?;
    let p2 = identity(m) - u1 * p1 * u1.adjoint();
    let v2 = symbol_of_model(&u1.adjoint(), &p2, tol)?;
    let t1 = truncate_linear(&v1, n);
    let t2h = truncate_linear(&v2, n).adjoint();
    let comm = t2h.matrix() * t1.matrix() - t1.matrix() * t2h.matrix();
    Ok(comm.columns(0, m * (n - 1)).into_owned())
}
