//! Dense complex linear algebra and the subspace lattice.
//!
//! Every subspace carries a canonical orthonormal basis: pivoted Gram-Schmidt
//! on the columns of its orthogonal projector. The basis then depends only on
//! the subspace (up to rounding), so coordinate subspaces come out as unit
//! vectors and repeated computations of the same space agree.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Absolute singular-value floor used when the largest singular value is tiny.
pub const ABS_RANK_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid tolerance {name} = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue})")]
    NotPositive { eigenvalue: f64 },
    #[error("matrix is singular")]
    Singular,
}

/// Numerical thresholds shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Unitarity, projection and orthonormality residuals.
    pub orth: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank: f64,
    /// Matrix equality residuals.
    pub eq: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            orth: 1e-9,
            rank: 1e-10,
            eq: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn new(orth: f64, rank: f64, eq: f64) -> Result<Self, NumError> {
        let t = Self { orth, rank, eq };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), NumError> {
        for (name, value) in [("tol_orth", self.orth), ("tol_eq", self.eq)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(NumError::InvalidTolerance { name, value });
            }
        }
        if !(self.rank >= f64::EPSILON && self.rank.is_finite()) {
            return Err(NumError::InvalidTolerance {
                name: "tol_rank",
                value: self.rank,
            });
        }
        Ok(())
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Build a matrix from real row-major rows.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    CMatrix::from_fn(n, m, |i, j| r(rows[i][j]))
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { r(0.0) })
}

pub fn diag_real(entries: &[f64]) -> CMatrix {
    let v: Vec<Complex64> = entries.iter().map(|&x| r(x)).collect();
    diag(&v)
}

/// Unit coordinate vector `e_i` (zero based) as an n x 1 matrix.
pub fn unit(n: usize, i: usize) -> CMatrix {
    CMatrix::from_fn(n, 1, |k, _| if k == i { r(1.0) } else { r(0.0) })
}

pub fn ensure_square(m: &CMatrix) -> Result<usize, NumError> {
    if m.nrows() != m.ncols() {
        return Err(NumError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &CMatrix) -> Result<(), NumError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(NumError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Frobenius norm; zero for empty matrices.
pub fn fro(m: &CMatrix) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.norm()
    }
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn op_norm(m: &CMatrix) -> f64 {
    svd(m).singular_values.first().copied().unwrap_or(0.0)
}

pub fn unitarity_residual(m: &CMatrix) -> Result<f64, NumError> {
    let n = ensure_square(m)?;
    let i = identity(n);
    let a = fro(&(m.adjoint() * m - &i));
    let b = fro(&(m * m.adjoint() - &i));
    Ok(a.max(b))
}

pub fn projection_residual(m: &CMatrix) -> Result<f64, NumError> {
    ensure_square(m)?;
    let idem = fro(&(m * m - m));
    let herm = fro(&(m.adjoint() - m));
    Ok(idem.max(herm))
}

pub fn is_unitary(m: &CMatrix, tol: &Tolerances) -> Result<bool, NumError> {
    Ok(unitarity_residual(m)? <= tol.orth)
}

pub fn is_projection(m: &CMatrix, tol: &Tolerances) -> Result<bool, NumError> {
    Ok(projection_residual(m)? <= tol.orth)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
///
/// Entries negligible against the largest one are flushed first: the
/// underlying solver can return non-finite values when they are near underflow.
/// If it still breaks down, the matrix is rotated by a fixed dense unitary
/// and the eigenvectors are rotated back.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let scale = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let sym = (h + h.adjoint()) * r(0.5);
    let q = mixing_unitary(n);
    let attempts = [(1e-30, false), (f64::EPSILON, false), (1e-30, true)];
    for (rel, rotate) in attempts {
        let mut a = if rotate { q.adjoint() * &sym * &q } else { sym.clone() };
        a.iter_mut()
            .filter(|x| x.norm() <= rel * scale)
            .for_each(|x| *x = r(0.0));
        let eig = a.symmetric_eigen();
        let finite = eig.eigenvalues.iter().all(|x| x.is_finite())
            && eig.eigenvectors.iter().all(|x| x.re.is_finite() && x.im.is_finite());
        if finite {
            let vecs = if rotate { &q * &eig.eigenvectors } else { eig.eigenvectors };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let vectors = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
            return (values, vectors);
        }
    }
    panic!("Hermitian eigensolver produced non-finite output");
}

/// Discrete Fourier matrix with quadratic phases: dense and exactly unitary
/// up to rounding.
fn mixing_unitary(n: usize) -> CMatrix {
    let w = std::f64::consts::TAU / n as f64;
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |j, k| {
        let phase = w * (j * k) as f64 + 0.7 * (j * j) as f64;
        Complex64::from_polar(s, phase)
    })
}

/// `B(BᴴB)^{-1/2}`: the nearest matrix with orthonormal columns.
fn lowdin(b: &CMatrix) -> CMatrix {
    if b.ncols() == 0 {
        return b.clone();
    }
    let (vals, vecs) = hermitian_eigen(&(b.adjoint() * b));
    let inv_root: Vec<Complex64> = vals.iter().map(|&l| r(1.0 / l.max(f64::MIN_POSITIVE).sqrt())).collect();
    b * &vecs * diag(&inv_root) * vecs.adjoint()
}

/// Thin singular value decomposition `M = U diag(σ) Vᴴ`, `σ` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

/// Thin SVD read off the Hermitian eigenproblem of `[[0, M], [Mᴴ, 0]]`,
/// whose eigenpairs are `±σ` with vectors `(u, ±v)/√2`.
///
/// Singular triples at the noise level do not split cleanly into `(u, v)`;
/// they are completed from the orthogonal complements of the clean ones.
pub fn svd(m: &CMatrix) -> Svd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Svd {
            u: zeros(rows, 0),
            singular_values: Vec::new(),
            v: zeros(cols, 0),
        };
    }
    let mut h = zeros(rows + cols, rows + cols);
    h.view_mut((0, rows), (rows, cols)).copy_from(m);
    h.view_mut((rows, 0), (cols, rows)).copy_from(&m.adjoint());
    let (vals, vecs) = hermitian_eigen(&h);
    let smax = vals[0].max(0.0);
    let floor = 64.0 * f64::EPSILON * smax * (rows + cols) as f64;
    let mut clean = 0;
    while clean < k && vals[clean] > floor {
        let top = vecs.view((0, clean), (rows, 1)).norm_squared();
        if !(0.3..=0.7).contains(&top) {
            break;
        }
        clean += 1;
    }
    let u_clean = lowdin(&vecs.view((0, 0), (rows, clean)).into_owned());
    let v_clean = lowdin(&vecs.view((rows, 0), (cols, clean)).into_owned());
    let u_rest = orth_complement_of_basis(&u_clean, rows);
    let v_rest = orth_complement_of_basis(&v_clean, cols);
    let mut u = zeros(rows, k);
    let mut v = zeros(cols, k);
    u.columns_mut(0, clean).copy_from(&u_clean);
    v.columns_mut(0, clean).copy_from(&v_clean);
    u.columns_mut(clean, k - clean).copy_from(&u_rest.basis().columns(0, k - clean));
    v.columns_mut(clean, k - clean).copy_from(&v_rest.basis().columns(0, k - clean));
    let singular_values = vals[..k].iter().map(|&s| s.max(0.0)).collect();
    Svd {
        u,
        singular_values,
        v,
    }
}

/// Left singular vectors whose singular value exceeds `cutoff(σ_max)`.
fn range_basis(m: &CMatrix, cutoff: impl Fn(f64) -> f64) -> CMatrix {
    let d = svd(m);
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let cut = cutoff(smax);
    let keep = d.singular_values.iter().take_while(|&&s| s > cut).count();
    d.u.columns(0, keep).into_owned()
}

fn relative_cutoff(tol_rank: f64) -> impl Fn(f64) -> f64 {
    move |smax| {
        if smax < ABS_RANK_FLOOR {
            ABS_RANK_FLOOR
        } else {
            tol_rank * smax
        }
    }
}

/// Pivoted Gram-Schmidt on the projector columns of an orthonormal basis.
fn canonical_basis(b: &CMatrix) -> CMatrix {
    let n = b.nrows();
    let k = b.ncols();
    if k == 0 {
        return zeros(n, 0);
    }
    if k == n {
        return identity(n);
    }
    let mut resid = b * b.adjoint();
    let mut out = zeros(n, k);
    for step in 0..k {
        let best = (0..n).map(|i| resid[(i, i)].re).fold(f64::MIN, f64::max);
        let pivot = (0..n)
            .find(|&i| resid[(i, i)].re >= best - 1e-12)
            .expect("nonempty");
        let mut v = resid.column(pivot).into_owned();
        // Reorthogonalize against earlier vectors before normalizing.
        for prev in 0..step {
            let q = out.column(prev);
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        let nv = v.norm();
        v /= r(nv);
        out.set_column(step, &v);
        resid -= &v * v.adjoint();
    }
    out
}

/// A linear subspace of `C^ambient` with canonical orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: CMatrix,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            basis: zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            basis: identity(ambient),
        }
    }

    /// Span of the given coordinate vectors `e_i`.
    pub fn coordinate(ambient: usize, indices: &[usize]) -> Self {
        let b = CMatrix::from_fn(ambient, indices.len(), |i, j| {
            if i == indices[j] {
                r(1.0)
            } else {
                r(0.0)
            }
        });
        Self::from_orthonormal(&b)
    }

    /// Wrap a basis already known to be orthonormal.
    pub fn from_orthonormal(b: &CMatrix) -> Self {
        Self {
            basis: canonical_basis(b),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Orthonormality residual of the stored basis.
    pub fn orth_residual(&self) -> f64 {
        let k = self.dim();
        fro(&(self.basis.adjoint() * &self.basis - identity(k)))
    }

    /// Distance of a single vector from the subspace.
    pub fn distance(&self, v: &CMatrix) -> f64 {
        fro(&(v - self.projector() * v))
    }

    /// Image under a linear map with orthonormal columns (an isometric embedding).
    pub fn embed(&self, frame: &CMatrix) -> Subspace {
        Subspace::from_orthonormal(&(frame * &self.basis))
    }
}

fn same_ambient(a: &Subspace, b: &Subspace) -> Result<usize, NumError> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(NumError::AmbientMismatch {
            left: a.ambient_dim(),
            right: b.ambient_dim(),
        });
    }
    Ok(a.ambient_dim())
}

/// Column span with relative singular-value cutoff `tol.rank * sigma_max`.
pub fn span(m: &CMatrix, tol: &Tolerances) -> Subspace {
    Subspace::from_orthonormal(&range_basis(m, relative_cutoff(tol.rank)))
}

/// Column span keeping singular values above a fixed absolute cutoff.
pub fn span_abs(m: &CMatrix, cutoff: f64) -> Subspace {
    Subspace::from_orthonormal(&range_basis(m, |_| cutoff))
}

/// Kernel of `m` (as a subspace of the column space) with relative cutoff.
pub fn nullspace(m: &CMatrix, tol: &Tolerances) -> Subspace {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Subspace::full(n);
    }
    let row = range_basis(&m.adjoint(), relative_cutoff(tol.rank));
    orth_complement_of_basis(&row, n)
}

/// Kernel of `m` keeping directions with singular value at most `cutoff`.
pub fn nullspace_abs(m: &CMatrix, cutoff: f64) -> Subspace {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Subspace::full(n);
    }
    let row = range_basis(&m.adjoint(), |_| cutoff);
    orth_complement_of_basis(&row, n)
}

fn orth_complement_of_basis(b: &CMatrix, n: usize) -> Subspace {
    if b.ncols() == 0 {
        return Subspace::full(n);
    }
    if b.ncols() >= n {
        return Subspace::zero(n);
    }
    // The complement projector has eigenvalues 1 and 0 only.
    let (vals, vecs) = hermitian_eigen(&(identity(n) - b * b.adjoint()));
    let k = vals.iter().take_while(|&&l| l > 0.5).count();
    Subspace::from_orthonormal(&vecs.columns(0, k).into_owned())
}

pub fn subspace_complement(a: &Subspace) -> Subspace {
    orth_complement_of_basis(a.basis(), a.ambient_dim())
}

pub fn subspace_sum(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace, NumError> {
    let n = same_ambient(a, b)?;
    let mut m = zeros(n, a.dim() + b.dim());
    m.columns_mut(0, a.dim()).copy_from(a.basis());
    m.columns_mut(a.dim(), b.dim()).copy_from(b.basis());
    Ok(span(&m, tol))
}

/// `A ∩ B = (A⊥ + B⊥)⊥`.
pub fn subspace_intersect(
    a: &Subspace,
    b: &Subspace,
    tol: &Tolerances,
) -> Result<Subspace, NumError> {
    same_ambient(a, b)?;
    let s = subspace_sum(&subspace_complement(a), &subspace_complement(b), tol)?;
    Ok(subspace_complement(&s))
}

/// Orthocomplement of `a` inside `sup`, i.e. `sup ⊖ a`.
pub fn subspace_complement_in(
    a: &Subspace,
    sup: &Subspace,
    tol: &Tolerances,
) -> Result<Subspace, NumError> {
    subspace_intersect(sup, &subspace_complement(a), tol)
}

/// True iff `a ⊆ b`: every basis vector of `a` lies in `b` within `tol.orth`.
pub fn subspace_contains(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<bool, NumError> {
    Ok(containment_gap(a, b)? <= tol.orth)
}

/// Largest distance from `b` of a basis vector of `a`.
pub fn containment_gap(a: &Subspace, b: &Subspace) -> Result<f64, NumError> {
    let n = same_ambient(a, b)?;
    if a.is_zero() {
        return Ok(0.0);
    }
    let out = (identity(n) - b.projector()) * a.basis();
    Ok((0..out.ncols())
        .map(|j| out.column(j).norm())
        .fold(0.0, f64::max))
}

/// Equality of subspaces: equal dimension and mutual containment.
pub fn subspace_eq(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<bool, NumError> {
    Ok(a.dim() == b.dim() && subspace_contains(a, b, tol)? && subspace_contains(b, a, tol)?)
}

fn check_operator(t: &CMatrix, s: &Subspace) -> Result<usize, NumError> {
    let n = ensure_square(t)?;
    if n != s.ambient_dim() {
        return Err(NumError::AmbientMismatch {
            left: n,
            right: s.ambient_dim(),
        });
    }
    Ok(n)
}

/// Smallest `T`-invariant subspace containing `seed`.
pub fn invariant_closure(
    t: &CMatrix,
    seed: &Subspace,
    tol: &Tolerances,
) -> Result<Subspace, NumError> {
    let n = check_operator(t, seed)?;
    let mut cur = seed.clone();
    for _ in 0..=n {
        let k = cur.dim();
        if k == 0 || k == n {
            break;
        }
        let mut m = zeros(n, 2 * k);
        m.columns_mut(0, k).copy_from(cur.basis());
        m.columns_mut(k, k).copy_from(&(t * cur.basis()));
        let next = span(&m, tol);
        if next.dim() == k {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

/// Largest `T`-invariant subspace inside `container`.
///
/// Descending fixpoint `S ← {x ∈ S : Tx ∈ S}` started at the container. Each
/// step is a kernel computation with an absolute cutoff scaled by `‖T‖`.
pub fn largest_invariant_inside(
    t: &CMatrix,
    container: &Subspace,
    tol: &Tolerances,
) -> Result<Subspace, NumError> {
    let n = check_operator(t, container)?;
    let scale = op_norm(t).max(1.0);
    let cutoff = tol.rank * scale;
    let mut cur = container.clone();
    for _ in 0..=n {
        let k = cur.dim();
        if k == 0 {
            break;
        }
        let escape = (identity(n) - cur.projector()) * t * cur.basis();
        let ker = nullspace_abs(&escape, cutoff);
        if ker.dim() == k {
            break;
        }
        cur = Subspace::from_orthonormal(&(cur.basis() * ker.basis()));
    }
    Ok(cur)
}

/// Residual of the invariance `T·S ⊆ S`.
pub fn invariance_residual(t: &CMatrix, s: &Subspace) -> Result<f64, NumError> {
    let n = check_operator(t, s)?;
    Ok(fro(&((identity(n) - s.projector()) * t * s.basis())))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-tol.eq, 0)` are clamped to zero.
pub fn psd_sqrt(h: &CMatrix, tol: &Tolerances) -> Result<CMatrix, NumError> {
    let n = ensure_square(h)?;
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let (vals, v) = hermitian_eigen(h);
    let mut roots = Vec::with_capacity(n);
    for &lam in &vals {
        if lam < -tol.eq {
            return Err(NumError::NotPositive { eigenvalue: lam });
        }
        roots.push(r(lam.max(0.0).sqrt()));
    }
    Ok(&v * diag(&roots) * v.adjoint())
}

/// Eigenvalues from the diagonal of the complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>, NumError> {
    let n = ensure_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = nalgebra::Schur::new(a.clone()).unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(a: &CMatrix) -> Result<f64, NumError> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Unit eigenvector for a (numerically simple) eigenvalue: the right singular
/// vector of `A − λI` with the smallest singular value.
pub fn eigenvector(a: &CMatrix, lambda: Complex64) -> Result<CMatrix, NumError> {
    let n = ensure_square(a)?;
    if n == 0 {
        return Err(NumError::Singular);
    }
    let d = svd(&(a - identity(n) * lambda));
    Ok(d.v.columns(n - 1, 1).into_owned())
}

/// Unitary factor of the polar decomposition `M = W·|M|` of an invertible `M`.
pub fn polar_unitary(m: &CMatrix) -> Result<CMatrix, NumError> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let d = svd(m);
    if d.singular_values[n - 1] <= ABS_RANK_FLOOR * d.singular_values[0].max(1.0) {
        return Err(NumError::Singular);
    }
    Ok(&d.u * d.v.adjoint())
}

/// Horizontal concatenation `[a | b]`.
pub fn hcat(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows(), "hcat row mismatch");
    let mut m = zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Vertical concatenation of a list of blocks with equal column counts.
pub fn vstack(blocks: &[CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        m.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    m
}

/// Block-diagonal direct sum.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut m = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    m
}

/// Test helper: subspace equality at the default tolerances.
#[cfg(test)]
pub(crate) fn assert_same(a: &Subspace, b: &Subspace) {
    assert!(
        subspace_eq(a, b, &Tolerances::default()).unwrap(),
        "{a:?} differs from {b:?}"
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn jordan_down(n: usize) -> CMatrix {
        // T e_k = e_{k+1}
        CMatrix::from_fn(n, n, |i, j| if i == j + 1 { r(1.0) } else { r(0.0) })
    }

    #[test]
    fn unitary_predicate() {
        let t = tol();
        assert!(is_unitary(&identity(3), &t).unwrap());
        assert!(is_unitary(&from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]), &t).unwrap());
        let m = from_real_rows(&[&[1.0, 0.0], &[0.0, 0.5]]);
        // residual of MᴴM − I is |0.25 − 1|
        assert!((unitarity_residual(&m).unwrap() - 0.75).abs() < 1e-15);
        assert!(!is_unitary(&m, &t).unwrap());
        assert!(matches!(
            is_unitary(&zeros(2, 3), &t),
            Err(NumError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn projection_predicate() {
        let t = tol();
        assert!(is_projection(&zeros(3, 3), &t).unwrap());
        assert!(is_projection(&diag_real(&[0.0, 1.0]), &t).unwrap());
        let m = from_real_rows(&[&[0.0, 1.0], &[0.0, 1.0]]);
        // idempotent but not self-adjoint: Mᴴ − M has Frobenius norm √2
        assert!(fro(&(&m * &m - &m)) < 1e-15);
        assert!((projection_residual(&m).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(!is_projection(&m, &t).unwrap());
        assert!(is_projection(&zeros(1, 2), &t).is_err());
    }

    #[test]
    fn span_examples() {
        let t = tol();
        let m = from_real_rows(&[&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]]);
        let s = span(&m, &t);
        assert_eq!(s.dim(), 1);
        assert!(fro(&(s.basis() - unit(3, 0))) < 1e-15);
        assert_eq!(span(&identity(4), &t).basis(), &identity(4));
        assert_eq!(span(&zeros(3, 2), &t).dim(), 0);
        assert_eq!(span(&zeros(3, 0), &t).dim(), 0);
    }

    #[test]
    fn span_random_full_rank_matches_gram_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = sample::ginibre(&mut rng, 4, 2);
            // Independent rank oracle: a nonzero Gram determinant means rank 2.
            let g = m.adjoint() * &m;
            let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).norm();
            assert!(det > 1e-6);
            let s = span(&m, &tol());
            assert_eq!(s.dim(), 2);
            assert!(s.orth_residual() < 1e-12);
            // Columns of m lie in the span.
            assert!(fro(&(&m - s.projector() * &m)) < 1e-12);
        }
    }

    #[test]
    fn canonical_basis_is_basis_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = sample::ginibre(&mut rng, 5, 3);
        let s1 = span(&m, &tol());
        let mix = sample::unitary(&mut rng, 3);
        let s2 = span(&(&m * &mix), &tol());
        assert!(fro(&(s1.basis() - s2.basis())) < 1e-12);
    }

    #[test]
    fn lattice_operations() {
        let t = tol();
        let e1 = Subspace::coordinate(3, &[0]);
        let e2 = Subspace::coordinate(3, &[1]);
        let sum = subspace_sum(&e1, &e2, &t).unwrap();
        assert_same(&sum, &Subspace::coordinate(3, &[0, 1]));

        let a = Subspace::coordinate(3, &[0, 1]);
        let b = Subspace::coordinate(3, &[1, 2]);
        let i = subspace_intersect(&a, &b, &t).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(fro(&(i.basis() - unit(3, 1))) < 1e-14);

        assert!(subspace_contains(&e1, &Subspace::full(3), &t).unwrap());
        assert!(!subspace_contains(&Subspace::full(3), &e1, &t).unwrap());
        assert!(subspace_contains(&Subspace::zero(3), &e1, &t).unwrap());
        assert!(subspace_sum(&e1, &Subspace::zero(2), &t).is_err());

        let comp = subspace_complement(&a);
        assert_same(&comp, &Subspace::coordinate(3, &[2]));
        assert_eq!(subspace_complement(&Subspace::zero(3)).dim(), 3);
        assert_eq!(subspace_complement(&Subspace::full(3)).dim(), 0);

        let within = subspace_complement_in(&e2, &a, &t).unwrap();
        assert_same(&within, &e1);
    }

    /// Alternating projections converge to the projector onto the intersection.
    fn intersection_projector_oracle(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let mut p = a * b;
        for _ in 0..4000 {
            p = &p * a * b;
        }
        p
    }

    #[test]
    fn random_intersection_matches_alternating_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = tol();
        for _ in 0..10 {
            // Two 3-dim subspaces of C^5 sharing a known random line.
            let common = sample::ginibre(&mut rng, 5, 1);
            let a = span(&hcat(&common, &sample::ginibre(&mut rng, 5, 2)), &t);
            let b = span(&hcat(&common, &sample::ginibre(&mut rng, 5, 2)), &t);
            let i = subspace_intersect(&a, &b, &t).unwrap();
            let oracle = intersection_projector_oracle(&a.projector(), &b.projector());
            assert!(fro(&(i.projector() - oracle)) < 1e-8);
            assert_eq!(i.dim(), 1);
        }
    }

    #[test]
    fn closure_examples() {
        let t = tol();
        let e1 = Subspace::coordinate(3, &[0]);
        assert_same(&invariant_closure(&identity(3), &e1, &t).unwrap(), &e1);
        let j = jordan_down(3);
        assert_eq!(invariant_closure(&j, &e1, &t).unwrap().dim(), 3);
        let full = Subspace::full(3);
        assert_same(&invariant_closure(&j, &full, &t).unwrap(), &full);
        assert_eq!(invariant_closure(&j, &Subspace::zero(3), &t).unwrap().dim(), 0);
    }

    #[test]
    fn closure_matches_explicit_power_iteration() {
        // Oracle: orthonormalize x, Jx, J²x, ... by hand.
        let j = jordan_down(4);
        let x = unit(4, 1);
        let mut vecs = vec![x.clone()];
        let mut cur = x;
        for _ in 0..4 {
            cur = &j * &cur;
            if cur.norm() > 0.0 {
                vecs.push(cur.clone());
            }
        }
        // e2, e3, e4 are produced; e1 never appears.
        assert_eq!(vecs.len(), 3);
        let s = invariant_closure(&j, &Subspace::coordinate(4, &[1]), &tol()).unwrap();
        assert_same(&s, &Subspace::coordinate(4, &[1, 2, 3]));
    }

    /// All invariant subspaces of a single nilpotent Jordan block: the chain of
    /// tails span{e_k, ..., e_n}.
    fn jordan_invariant_lattice(n: usize) -> Vec<Subspace> {
        (0..=n)
            .map(|k| Subspace::coordinate(n, &(k..n).collect::<Vec<_>>()))
            .collect()
    }

    fn largest_inside_oracle(n: usize, container: &Subspace) -> Subspace {
        let t = tol();
        jordan_invariant_lattice(n)
            .into_iter()
            .filter(|s| subspace_contains(s, container, &t).unwrap())
            .max_by_key(|s| s.dim())
            .unwrap()
    }

    #[test]
    fn largest_inside_examples() {
        let t = tol();
        let j = jordan_down(3);
        let full = Subspace::full(3);
        assert_same(&largest_invariant_inside(&j, &full, &t).unwrap(), &full);
        let zero = Subspace::zero(3);
        assert_eq!(largest_invariant_inside(&j, &zero, &t).unwrap(), zero);
        for idx in [vec![1, 2], vec![0, 2], vec![0, 1], vec![2], vec![0]] {
            let container = Subspace::coordinate(3, &idx);
            let got = largest_invariant_inside(&j, &container, &t).unwrap();
            assert_eq!(got, largest_inside_oracle(3, &container), "container {idx:?}");
        }
        // span{e1, e3}: only the tail span{e3} fits.
        let got = largest_invariant_inside(&j, &Subspace::coordinate(3, &[0, 2]), &t).unwrap();
        assert_same(&got, &Subspace::coordinate(3, &[2]));
    }

    /// Minimal eigenvector-subset span containing the seed, by enumeration.
    fn eigen_subset_closure(vecs: &CMatrix, seed: &Subspace) -> Subspace {
        let t = tol();
        let n = vecs.ncols();
        let mut best: Option<Subspace> = None;
        for mask in 0u32..(1 << n) {
            let cols: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            let m = CMatrix::from_fn(vecs.nrows(), cols.len(), |i, j| vecs[(i, cols[j])]);
            let s = span(&m, &t);
            if subspace_contains(seed, &s, &t).unwrap()
                && best.as_ref().is_none_or(|b| s.dim() < b.dim())
            {
                best = Some(s);
            }
        }
        best.unwrap()
    }

    #[test]
    fn closure_matches_eigenvector_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = tol();
        for n in 2..=5 {
            for _ in 0..5 {
                let v = sample::ginibre(&mut rng, n, n);
                let vinv = v.clone().try_inverse().unwrap();
                let lams: Vec<Complex64> = (0..n).map(|k| c(k as f64 + 1.0, 0.3 * k as f64)).collect();
                let a = &v * diag(&lams) * &vinv;
                // seed inside the span of two eigenvectors
                let seed_vec = v.columns(0, 1) * c(0.7, 0.1) + v.columns(n - 1, 1) * c(-0.2, 0.5);
                let seed = span(&seed_vec, &t);
                let got = invariant_closure(&a, &seed, &t).unwrap();
                let oracle = eigen_subset_closure(&v, &seed);
                assert!(subspace_eq(&got, &oracle, &Tolerances { orth: 1e-7, ..t }).unwrap());
                assert_eq!(got.dim(), if n == 1 { 1 } else { 2 });
            }
        }
    }

    #[test]
    fn duality_of_closure_and_largest_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = tol();
        for _ in 0..30 {
            let n = 5;
            // Block upper-triangular T so nontrivial invariant subspaces exist.
            let mut a = sample::ginibre(&mut rng, n, n);
            for i in 3..n {
                for j in 0..3 {
                    a[(i, j)] = r(0.0);
                }
            }
            let w = sample::unitary(&mut rng, n);
            let tm = &w * a * w.adjoint();
            let container = span(&sample::ginibre(&mut rng, n, 4), &t);
            let direct = largest_invariant_inside(&tm, &container, &t).unwrap();
            let dual = subspace_complement(
                &invariant_closure(&tm.adjoint(), &subspace_complement(&container), &t).unwrap(),
            );
            assert!(subspace_eq(&direct, &dual, &Tolerances { orth: 1e-7, ..t }).unwrap());
            assert!(invariance_residual(&tm, &direct).unwrap() < 1e-8);
        }
    }

    #[test]
    fn psd_sqrt_and_spectrum() {
        let t = tol();
        let h = diag_real(&[4.0, 0.25, 0.0]);
        let s = psd_sqrt(&h, &t).unwrap();
        assert!(fro(&(s - diag_real(&[2.0, 0.5, 0.0]))) < 1e-14);
        assert!(psd_sqrt(&diag_real(&[1.0, -0.1]), &t).is_err());
        let ev = eigenvalues(&from_real_rows(&[&[2.0, 1.0], &[0.0, 3.0]])).unwrap();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 2.0).abs() < 1e-12 && (re[1] - 3.0).abs() < 1e-12);
        assert_eq!(spectral_radius(&zeros(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerances::new(1e-9, 1e-10, 1e-9).is_ok());
        assert!(Tolerances::new(0.0, 1e-10, 1e-9).is_err());
        assert!(Tolerances::new(1e-9, 1e-20, 1e-9).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn closure_is_idempotent_and_invariant(seed in any::<u64>(), n in 2usize..6, k in 0usize..3) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = tol();
                let a = sample::ginibre(&mut rng, n, n);
                let s0 = span(&sample::ginibre(&mut rng, n, k.min(n)), &t);
                let s1 = invariant_closure(&a, &s0, &t).unwrap();
                let s2 = invariant_closure(&a, &s1, &t).unwrap();
                prop_assert_eq!(s1.dim(), s2.dim());
                prop_assert!(subspace_contains(&s0, &s1, &t).unwrap());
                prop_assert!(invariance_residual(&a, &s1).unwrap() < 1e-8);
                prop_assert!(s1.orth_residual() < 1e-9);
            }

            #[test]
            fn svd_recomposes_rank_deficient(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, k in 0usize..8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = k.min(rows).min(cols);
                let a = sample::ginibre(&mut rng, rows, k) * sample::ginibre(&mut rng, k, cols);
                for m in [a, sample::projection(&mut rng, rows, k)] {
                    let d = svd(&m);
                    let n = d.singular_values.len();
                    prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
                    prop_assert!(fro(&(&d.u * diag_real(&d.singular_values) * d.v.adjoint() - &m)) < 1e-12);
                    prop_assert!(fro(&(d.u.adjoint() * &d.u - identity(n))) < 1e-12);
                    prop_assert!(fro(&(d.v.adjoint() * &d.v - identity(n))) < 1e-12);
                    prop_assert_eq!(span(&m, &tol()).dim(), k);
                }
            }

            #[test]
            fn complement_and_sum_partition(seed in any::<u64>(), n in 1usize..7, k in 0usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = tol();
                let s = span(&sample::ginibre(&mut rng, n, k.min(n)), &t);
                let comp = subspace_complement(&s);
                prop_assert_eq!(s.dim() + comp.dim(), n);
                prop_assert!(fro(&(s.basis().adjoint() * comp.basis())) < 1e-12);
                prop_assert_eq!(subspace_sum(&s, &comp, &t).unwrap().dim(), n);
            }
        }
    }
}
