//! Irreducible tuples: canonical forms for two and three factors, tuples
//! built from finite Blaschke products, multiplicity accounting, and a pair
//! of commuting isometries outside the commutant of any single shift.

use num_complex::Complex64;

use crate::hardy::{
    kernel_of_adjoint, symbol_of_model, truncate, unitary_part_truncated, HardyError,
    MatrixPolynomial, TruncatedOperator,
};
use crate::model::{
    commutant_dimension, complete_tuple, validate_model, ModelError, ModelTuple, Pair,
};
use crate::numcore::{
    diag_real, fro, identity, op_norm, r, span, subspace_complement, svd, unit, zeros, CMatrix,
    NumError, Tolerances,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hardy(#[from] HardyError),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("not classifiable: {0}")]
    Shape(String),
    #[error("tuple is reducible: {0}")]
    Reducible(String),
    #[error("construction failed certification: {0}")]
    Construction(String),
    #[error("window too small: numerical kernel has dimension {found}, expected {expected}")]
    Window { found: usize, expected: usize },
}

fn modulus_check(name: &str, z: Complex64, below_one: bool, tol: &Tolerances) -> Result<(), ClassifyError> {
    let ok = if below_one {
        z.norm() < 1.0 - tol.eq
    } else {
        (z.norm() - 1.0).abs() <= tol.orth
    };
    if ok {
        Ok(())
    } else {
        let want = if below_one { "< 1" } else { "= 1" };
        Err(ClassifyError::Parameters(format!(
            "|{name}| = {} but must be {want}",
            z.norm()
        )))
    }
}

/// Complement modulus `(1 − |z|²)^{1/2}`.
fn co(z: Complex64) -> f64 {
    (1.0 - z.norm_sqr()).max(0.0).sqrt()
}

fn phase(z: Complex64) -> Complex64 {
    z / z.norm()
}

/// Unit vector spanning a rank-one range.
fn rank_one_vector(p: &CMatrix, name: &str, tol: &Tolerances) -> Result<CMatrix, ClassifyError> {
    let s = span(p, tol);
    if s.dim() != 1 {
        return Err(ClassifyError::Shape(format!(
            "{name} must have rank one, found rank {}",
            s.dim()
        )));
    }
    Ok(s.basis().clone())
}

/// Parameters `(c, θ)` of an irreducible two-factor tuple on `C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical2 {
    pub c: Complex64,
    pub theta: Complex64,
}

impl Canonical2 {
    pub fn new(c: Complex64, theta: Complex64, tol: &Tolerances) -> Result<Self, ClassifyError> {
        modulus_check("c", c, true, tol)?;
        modulus_check("theta", theta, false, tol)?;
        Ok(Self { c, theta })
    }

    pub fn d(&self) -> f64 {
        co(self.c)
    }

    /// `U(c, θ) = [[c, −dθ], [d, c̄θ]]`, with determinant `θ`.
    pub fn unitary(&self) -> CMatrix {
        let d = r(self.d());
        CMatrix::from_row_slice(2, 2, &[self.c, -d * self.theta, d, self.c.conj() * self.theta])
    }
}

pub fn canonical2_build(p: &Canonical2, tol: &Tolerances) -> Result<ModelTuple, ClassifyError> {
    Canonical2::new(p.c, p.theta, tol)?;
    let first = Pair::new(p.unitary(), diag_real(&[0.0, 1.0]));
    Ok(complete_tuple(&[first], tol)?)
}

/// Read `(c, θ)` from any unitarily conjugated canonical pair.
///
/// `c = ⟨U_1f, f⟩` for a unit `f` spanning the `P_1⊥`-range and `θ = det U_1`;
/// both are independent of the remaining diagonal phase freedom. The gauged
/// matrix is compared against the canonical one as a round-trip check.
pub fn canonical2_extract(t: &ModelTuple, tol: &Tolerances) -> Result<Canonical2, ClassifyError> {
    if t.dim() != 2 || t.n() != 2 {
        return Err(ClassifyError::Shape(format!(
            "expected a two-factor tuple on C^2, got n = {} and dim = {}",
            t.n(),
            t.dim()
        )));
    }
    let report = validate_model(t, tol);
    if !report.ok {
        return Err(ClassifyError::Shape(format!(
            "not a model tuple (worst residual {:.3e})",
            report.worst()
        )));
    }
    let pv = rank_one_vector(t.p(1), "P_1", tol)?;
    let fv = rank_one_vector(&(identity(2) - t.p(1)), "I - P_1", tol)?;
    let mut w = zeros(2, 2);
    w.set_column(0, &fv.column(0));
    w.set_column(1, &pv.column(0));
    let u = w.adjoint() * t.u(1) * &w;
    if u[(1, 0)].norm() <= tol.eq.sqrt() {
        return Err(ClassifyError::Reducible(
            "U_1 leaves the P_1-range invariant".into(),
        ));
    }
    // Conjugating by diag(1, ω) multiplies the (2,1) entry by ω̄.
    let g = crate::numcore::diag(&[r(1.0), phase(u[(1, 0)])]);
    let u = g.adjoint() * u * &g;
    let params = Canonical2::new(u[(0, 0)], u.determinant(), tol)?;
    let mismatch = fro(&(u - params.unitary()));
    if mismatch > tol.eq.sqrt() {
        return Err(ClassifyError::Construction(format!(
            "round trip differs by {mismatch:.3e}"
        )));
    }
    Ok(params)
}

/// Parameters `(α, α_1, θ, θ_1)` of an irreducible three-factor tuple on `C³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical3 {
    pub alpha: Complex64,
    pub alpha1: Complex64,
    pub theta: Complex64,
    pub theta1: Complex64,
}

impl Canonical3 {
    pub fn check(&self, tol: &Tolerances) -> Result<(), ClassifyError> {
        modulus_check("alpha", self.alpha, true, tol)?;
        modulus_check("alpha1", self.alpha1, true, tol)?;
        modulus_check("theta", self.theta, false, tol)?;
        modulus_check("theta1", self.theta1, false, tol)
    }

    pub fn d(&self) -> f64 {
        co(self.alpha)
    }

    pub fn d1(&self) -> f64 {
        co(self.alpha1)
    }

    /// The printed normal form, used as `U_2`.
    pub fn u2(&self) -> CMatrix {
        let (a, a1, t1) = (self.alpha, self.alpha1, self.theta1);
        let (d, d1) = (r(self.d()), r(self.d1()));
        CMatrix::from_row_slice(
            3,
            3,
            &[
                a1,
                t1 * a.conj() * d1,
                -t1 * d * d1,
                d1,
                -t1 * (a * a1).conj(),
                t1 * a1.conj() * d,
                r(0.0),
                d,
                a,
            ],
        )
    }

    /// `U_1 = θ(U_2 − α)(I − ᾱU_2)⁻¹`.
    pub fn u1(&self) -> Result<CMatrix, ClassifyError> {
        let u2 = self.u2();
        let i = identity(3);
        let den = (&i - &u2 * self.alpha.conj())
            .try_inverse()
            .ok_or(NumError::Singular)?;
        Ok((&u2 - &i * self.alpha) * den * self.theta)
    }
}

/// Scalars from the defining relations and the obstruction `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
    pub epsilon: Complex64,
    pub eta: Complex64,
    /// Largest residual of the three defining relations.
    pub relation_residual: f64,
    pub n: CMatrix,
    pub n_norm: f64,
    pub n_e2: f64,
    pub n_e3: f64,
    /// `‖NNᴴ − NᴴN‖`.
    pub normal_residual: f64,
    /// `|α| < 1`, `|η| < 1` and `βε ≠ 0`.
    pub moduli_ok: bool,
    /// `N = 0` and the moduli conditions: what irreducibility forces.
    pub irreducible_consistent: bool,
}

/// `N = (U_1 − η)(U_2ᴴ − ᾱ) − βε` for a tuple in normal position
/// (`P_1 = e_3e_3ᴴ`, `U_1ᴴP_2U_1 = e_2e_2ᴴ`).
pub fn normality_obstruction(
    u1: &CMatrix,
    u2: &CMatrix,
    p1: &CMatrix,
    p2: &CMatrix,
    tol: &Tolerances,
) -> Result<NormalityReport, ClassifyError> {
    for m in [u1, u2, p1, p2] {
        if m.shape() != (3, 3) {
            return Err(ClassifyError::Shape("normal position needs 3x3 matrices".into()));
        }
    }
    let q1 = u1.adjoint() * p2 * u1;
    let off = fro(&(p1 - diag_real(&[0.0, 0.0, 1.0]))).max(fro(&(&q1 - diag_real(&[0.0, 1.0, 0.0]))));
    if off > tol.orth {
        return Err(ClassifyError::Shape(format!(
            "not in normal position (offset {off:.3e}); conjugate so that P_1 = e3 e3* and U_1* P_2 U_1 = e2 e2* first"
        )));
    }
    let e2 = unit(3, 1);
    let e3 = unit(3, 2);
    let a = u2.adjoint() * &e3;
    let b = u1.adjoint() * u2.adjoint() * &e3;
    let g = u1 * &e2;
    let alpha = a[(2, 0)].conj();
    let beta = a[(1, 0)];
    let gamma = b[(2, 0)];
    let delta = b[(0, 0)];
    let epsilon = g[(2, 0)];
    let eta = g[(1, 0)];
    let relation_residual = a[(0, 0)]
        .norm()
        .max(b[(1, 0)].norm())
        .max(g[(0, 0)].norm());
    let i = identity(3);
    let n = (u1 - &i * eta) * (u2.adjoint() - &i * alpha.conj()) - &i * (beta * epsilon);
    let n_norm = op_norm(&n);
    let n_e2 = (&n * &e2).norm();
    let n_e3 = (&n * &e3).norm();
    let normal_residual = fro(&(&n * n.adjoint() - n.adjoint() * &n));
    let moduli_ok = alpha.norm() < 1.0 - tol.eq
        && eta.norm() < 1.0 - tol.eq
        && (beta * epsilon).norm() > tol.eq;
    Ok(NormalityReport {
        alpha,
        beta,
        gamma,
        delta,
        epsilon,
        eta,
        relation_residual,
        n,
        n_norm,
        n_e2,
        n_e3,
        normal_residual,
        moduli_ok,
        irreducible_consistent: moduli_ok && n_norm <= tol.eq,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Canonical3Build {
    pub tuple: ModelTuple,
    pub report: NormalityReport,
    pub commutant_dim: usize,
}

/// Closed-form three-factor tuple: `U_2` is the printed normal form, `U_1` the
/// Möbius image of `U_2`, `P_1 = e_3e_3ᴴ`, `P_2 = U_1e_2e_2ᴴU_1ᴴ`, and the third
/// factor is the unique completion. Certified by validation, a scalar
/// commutant and the vanishing of `N`.
pub fn canonical3_build(p: &Canonical3, tol: &Tolerances) -> Result<Canonical3Build, ClassifyError> {
    p.check(tol)?;
    let u1 = p.u1()?;
    let u2 = p.u2();
    let p1 = diag_real(&[0.0, 0.0, 1.0]);
    let g = &u1 * unit(3, 1);
    let p2 = &g * g.adjoint();
    let tuple = complete_tuple(&[Pair::new(u1, p1), Pair::new(u2, p2)], tol)?;
    let report = normality_obstruction(tuple.u(1), tuple.u(2), tuple.p(1), tuple.p(2), tol)?;
    if !report.irreducible_consistent {
        return Err(ClassifyError::Construction(format!(
            "N has norm {:.3e}, moduli conditions {}",
            report.n_norm, report.moduli_ok
        )));
    }
    let commutant_dim = commutant_dimension(&tuple, tol);
    if commutant_dim != 1 {
        return Err(ClassifyError::Construction(format!(
            "commutant has dimension {commutant_dim}"
        )));
    }
    Ok(Canonical3Build {
        tuple,
        report,
        commutant_dim,
    })
}

/// Recover `(α, α_1, θ, θ_1)` from a conjugated canonical three-tuple.
///
/// The frame `(f_1, f_2, f_3)` with `f_3` spanning `P_1`, `f_2` spanning
/// `U_1ᴴP_2U_1` is fixed up to phases; the phases are fixed by making the
/// `(2,1)` and `(3,2)` entries of `U_2` positive.
pub fn canonical3_extract(t: &ModelTuple, tol: &Tolerances) -> Result<Canonical3, ClassifyError> {
    if t.dim() != 3 || t.n() != 3 {
        return Err(ClassifyError::Shape(format!(
            "expected a three-factor tuple on C^3, got n = {} and dim = {}",
            t.n(),
            t.dim()
        )));
    }
    let report = validate_model(t, tol);
    if !report.ok {
        return Err(ClassifyError::Shape(format!(
            "not a model tuple (worst residual {:.3e})",
            report.worst()
        )));
    }
    let f3 = rank_one_vector(t.p(1), "P_1", tol)?;
    let q1 = t.u(1).adjoint() * t.p(2) * t.u(1);
    let f2 = rank_one_vector(&q1, "U_1* P_2 U_1", tol)?;
    let rest = subspace_complement(&span(&crate::numcore::hcat(&f2, &f3), tol));
    if rest.dim() != 1 {
        return Err(ClassifyError::Shape("P_1 and U_1* P_2 U_1 overlap".into()));
    }
    let mut w = zeros(3, 3);
    w.set_column(0, &rest.basis().column(0));
    w.set_column(1, &f2.column(0));
    w.set_column(2, &f3.column(0));
    let u2 = w.adjoint() * t.u(2) * &w;
    let (x21, x32) = (u2[(1, 0)], u2[(2, 1)]);
    if x21.norm() <= tol.eq.sqrt() || x32.norm() <= tol.eq.sqrt() {
        return Err(ClassifyError::Reducible(
            "a coordinate plane reduces U_2".into(),
        ));
    }
    let w2 = phase(x21);
    let w3 = phase(x32) * w2;
    let g = crate::numcore::diag(&[r(1.0), w2, w3]);
    let frame = &w * &g;
    let gauged = t.conjugate(&frame.adjoint());
    let u2 = gauged.u(2);
    let (alpha, alpha1) = (u2[(2, 2)], u2[(0, 0)]);
    let dd1 = co(alpha) * co(alpha1);
    if dd1 <= tol.eq {
        return Err(ClassifyError::Reducible("|alpha| or |alpha1| is one".into()));
    }
    let theta1 = -u2[(0, 2)] / dd1;
    let rep = normality_obstruction(gauged.u(1), gauged.u(2), gauged.p(1), gauged.p(2), tol)?;
    if !rep.irreducible_consistent {
        return Err(ClassifyError::Reducible(format!(
            "N has norm {:.3e}",
            rep.n_norm
        )));
    }
    let theta = rep.epsilon / rep.beta.conj();
    let params = Canonical3 {
        alpha,
        alpha1,
        theta: phase(theta),
        theta1: phase(theta1),
    };
    params.check(tol)?;
    let rebuilt = canonical3_build(&params, tol)?;
    let mismatch = gauged
        .pairs()
        .iter()
        .zip(rebuilt.tuple.pairs())
        .map(|(a, b)| fro(&(&a.u - &b.u)).max(fro(&(&a.p - &b.p))))
        .fold(0.0, f64::max);
    if mismatch > tol.eq.sqrt() {
        return Err(ClassifyError::Construction(format!(
            "round trip differs by {mismatch:.3e}"
        )));
    }
    Ok(params)
}

/// `constant · ∏ (z − a_k)/(1 − ā_k z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlaschkeProduct {
    pub zeros: Vec<Complex64>,
    pub constant: Complex64,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<Complex64>, constant: Complex64, tol: &Tolerances) -> Result<Self, ClassifyError> {
        if zeros.is_empty() {
            return Err(ClassifyError::Parameters(
                "a Blaschke product needs at least one zero".into(),
            ));
        }
        for &a in &zeros {
            modulus_check("zero", a, true, tol)?;
        }
        modulus_check("constant", constant, false, tol)?;
        Ok(Self { zeros, constant })
    }

    pub fn identity_map() -> Self {
        Self {
            zeros: vec![r(0.0)],
            constant: r(1.0),
        }
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    /// Largest zero modulus: the geometric rate of the Taylor tail.
    pub fn rho(&self) -> f64 {
        self.zeros.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.zeros
            .iter()
            .fold(self.constant, |acc, &a| acc * (z - a) / (r(1.0) - a.conj() * z))
    }

    /// `max | |b(z)| − 1 |` over `samples` equally spaced points of the circle.
    pub fn unimodular_residual(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / samples as f64;
                (self.eval(Complex64::from_polar(1.0, t)).norm() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// First `k` Taylor coefficients.
pub fn blaschke_taylor(b: &BlaschkeProduct, k: usize) -> Vec<Complex64> {
    let mut acc = vec![r(0.0); k];
    if k == 0 {
        return acc;
    }
    acc[0] = b.constant;
    for &a in &b.zeros {
        // (z − a)/(1 − āz) = −a + Σ_{j≥1} ā^{j−1}(1 − |a|²) z^j
        let mut factor = vec![r(0.0); k];
        factor[0] = -a;
        let mut pow = r(1.0);
        for f in factor.iter_mut().skip(1) {
            *f = pow * (1.0 - a.norm_sqr());
            pow *= a.conj();
        }
        let mut next = vec![r(0.0); k];
        for (i, x) in acc.iter().enumerate() {
            for (j, y) in factor.iter().take(k - i).enumerate() {
                next[i + j] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Product of Blaschke products (zeros concatenated, constants multiplied).
pub fn blaschke_mul(a: &BlaschkeProduct, b: &BlaschkeProduct) -> BlaschkeProduct {
    BlaschkeProduct {
        zeros: a.zeros.iter().chain(&b.zeros).copied().collect(),
        constant: a.constant * b.constant,
    }
}

/// Truncation of `φ(S)` to `N` degrees.
pub fn phi_of_shift(b: &BlaschkeProduct, n: usize) -> TruncatedOperator {
    truncate(&MatrixPolynomial::scalar(&blaschke_taylor(b, n)), n)
}

/// `max | ‖column_j‖ − 1 |` over the first `cols` columns.
pub fn column_norm_defect(t: &TruncatedOperator, cols: usize) -> f64 {
    (0..cols.min(t.matrix().ncols()))
        .map(|j| (t.matrix().column(j).norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Default window for [`model_from_blaschke`]: at least `4m` degrees and
/// enough for the geometric tail to fall below `1e-16`.
pub fn blaschke_window(phis: &[BlaschkeProduct]) -> usize {
    let m = 1 + phis.iter().map(BlaschkeProduct::degree).sum::<usize>();
    let rho = phis.iter().map(BlaschkeProduct::rho).fold(0.0, f64::max);
    let tail = if rho > 0.0 {
        (16.0 * std::f64::consts::LN_10 / -rho.ln()).ceil() as usize
    } else {
        0
    };
    (4 * m).max(m + tail)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlaschkeModel {
    pub tuple: ModelTuple,
    pub window: usize,
    /// Worst validation residual of the recovered tuple.
    pub model_residual: f64,
    /// Largest singular value discarded into the kernel and smallest kept outside it.
    pub kernel_gap: (f64, f64),
}

/// Model tuple of `(S, φ_2(S), …, φ_n(S))`.
///
/// `𝔈` is the kernel of the adjoint of the product `B(S)`, `B = z∏φ_j`. For
/// each factor `V`, the symbol `A + zB` comes from `A = Π_𝔈 V|𝔈` and `B e =
/// B(S)*(Ve − Ae)`; then `U = A + B` and `P = UᴴB`.
pub fn model_from_blaschke(
    phis: &[BlaschkeProduct],
    n: usize,
    tol: &Tolerances,
) -> Result<BlaschkeModel, ClassifyError> {
    let m = 1 + phis.iter().map(BlaschkeProduct::degree).sum::<usize>();
    if n < m + 1 {
        return Err(ClassifyError::Window { found: 0, expected: m });
    }
    let mut factors = vec![BlaschkeProduct::identity_map()];
    factors.extend(phis.iter().cloned());
    let product = factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| blaschke_mul(&acc, f));
    let tb = phi_of_shift(&product, n);
    let d = svd(&tb.matrix().adjoint());
    let sv = &d.singular_values;
    let inside = sv[n - m];
    let outside = sv[n - m - 1];
    // The kernel directions decay like ρ^N; everything else stays of order one.
    if inside > tol.eq.sqrt() || outside < 1e-3 {
        let found = sv.iter().filter(|&&s| s <= tol.eq.sqrt()).count();
        return Err(ClassifyError::Window { found, expected: m });
    }
    let k = d.v.columns(n - m, m).into_owned();
    let tbh = tb.matrix().adjoint();
    let mut pairs = Vec::with_capacity(factors.len());
    for f in &factors {
        let tf = phi_of_shift(f, n);
        let image = tf.matrix() * &k;
        let m0 = k.adjoint() * &image;
        let g = &tbh * (&image - &k * &m0);
        let m1 = k.adjoint() * g;
        let u = &m0 + &m1;
        let p = u.adjoint() * &m1;
        let p = (&p + p.adjoint()) * r(0.5);
        pairs.push(Pair::new(u, p));
    }
    let tuple = ModelTuple::new(pairs, tol)?;
    let report = validate_model(&tuple, tol);
    if !report.ok {
        return Err(ClassifyError::Construction(format!(
            "recovered tuple fails validation (worst residual {:.3e})",
            report.worst()
        )));
    }
    Ok(BlaschkeModel {
        tuple,
        window: n,
        model_residual: report.worst(),
        kernel_gap: (inside, outside),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurityReport {
    /// `rank P_j`, the multiplicity of each factor.
    pub multiplicities: Vec<usize>,
    /// `dim 𝔈`, the multiplicity of the product.
    pub product_multiplicity: usize,
    pub commutant_dim: usize,
    pub irreducible: bool,
    /// No factor is a scalar multiple of the identity.
    pub proper: bool,
    /// Each factor has trivial unitary part in the truncation window.
    pub pure: Vec<bool>,
    /// Irreducible and proper implies product multiplicity at least `n`.
    pub dimension_lower_bound: bool,
    /// Product multiplicity at most `2n − 1`.
    pub small_product: bool,
    /// For irreducible proper tuples with small product: some multiplicity is one.
    pub multiplicity_one_holds: bool,
}

pub fn purity_and_multiplicity(t: &ModelTuple, n: usize, tol: &Tolerances) -> Result<PurityReport, ClassifyError> {
    let multiplicities: Vec<usize> = t.pairs().iter().map(|p| span(&p.p, tol).dim()).collect();
    let dim = t.dim();
    let commutant_dim = commutant_dimension(t, tol);
    let irreducible = commutant_dim == 1;
    let proper = t.pairs().iter().all(|p| {
        let lambda = p.u[(0, 0)];
        !(fro(&p.p) <= tol.eq && fro(&(&p.u - identity(dim) * lambda)) <= tol.eq)
    });
    let mut pure = Vec::with_capacity(t.n());
    for p in t.pairs() {
        let sym = symbol_of_model(&p.u, &p.p, tol)?;
        pure.push(unitary_part_truncated(&[sym.to_polynomial()], n, tol)?.is_zero());
    }
    let k = t.n();
    let relevant = irreducible && proper;
    let small_product = dim < 2 * k;
    Ok(PurityReport {
        product_multiplicity: dim,
        dimension_lower_bound: !relevant || dim >= k,
        multiplicity_one_holds: !(relevant && small_product) || multiplicities.contains(&1),
        multiplicities,
        commutant_dim,
        irreducible,
        proper,
        pure,
        small_product,
    })
}

/// Checks of `V_1 = S ⊕ S`, `V_2 = [[0, S²], [I, 0]]` on the exactness window.
#[derive(Debug, Clone, PartialEq)]
pub struct NonBlaschkeReport {
    pub commutator: f64,
    pub isometry: f64,
    pub squares: f64,
    pub zero_divisor: f64,
    /// `‖(V_1 − V_2)x‖` and `‖(V_1 + V_2)x‖` for `x = (1, 0)`.
    pub difference_norm: f64,
    pub sum_norm: f64,
    pub product_multiplicity: usize,
}

impl NonBlaschkeReport {
    pub fn worst_identity(&self) -> f64 {
        self.commutator
            .max(self.isometry)
            .max(self.squares)
            .max(self.zero_divisor)
    }
}

pub fn nonblaschke_symbols() -> (MatrixPolynomial, MatrixPolynomial) {
    let z = zeros(2, 2);
    let v1 = MatrixPolynomial::new(vec![z.clone(), identity(2)]).expect("square");
    let low = CMatrix::from_row_slice(2, 2, &[r(0.0), r(0.0), r(1.0), r(0.0)]);
    let high = CMatrix::from_row_slice(2, 2, &[r(0.0), r(1.0), r(0.0), r(0.0)]);
    let v2 = MatrixPolynomial::new(vec![low, z, high]).expect("square");
    (v1, v2)
}

pub fn nonblaschke_example(n: usize, tol: &Tolerances) -> Result<NonBlaschkeReport, ClassifyError> {
    if n < 4 {
        return Err(ClassifyError::Window { found: n, expected: 4 });
    }
    let (s1, s2) = nonblaschke_symbols();
    let t1 = truncate(&s1, n).matrix().clone();
    let t2 = truncate(&s2, n).matrix().clone();
    // Degree-two products are exact on inputs of degree at most N − 3.
    let exact = 2 * (n - 2);
    let cols = |m: CMatrix| fro(&m.columns(0, exact).into_owned());
    let commutator = cols(&t1 * &t2 - &t2 * &t1);
    let squares = cols(&t1 * &t1 - &t2 * &t2);
    let zero_divisor = cols((&t1 - &t2) * (&t1 + &t2));
    let isometry = cols(t1.adjoint() * &t1 - identity(2 * n)).max(cols(t2.adjoint() * &t2 - identity(2 * n)));
    let x = crate::hardy::embed_at_degree(&unit(2, 0), 0, n);
    let difference_norm = ((&t1 - &t2) * &x).norm();
    let sum_norm = ((&t1 + &t2) * &x).norm();
    let product = s1.mul(&s2)?;
    let product_multiplicity = kernel_of_adjoint(&product, n, tol)?.dim();
    Ok(NonBlaschkeReport {
        commutator,
        isometry,
        squares,
        zero_divisor,
        difference_norm,
        sum_norm,
        product_multiplicity,
    })
}

/// Summary used by the command line `classify` report.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub purity: PurityReport,
    pub canonical2: Option<Result<Canonical2, ClassifyError>>,
    pub canonical3: Option<Result<Canonical3, ClassifyError>>,
}

pub fn classify(t: &ModelTuple, n: usize, tol: &Tolerances) -> Result<Classification, ClassifyError> {
    let purity = purity_and_multiplicity(t, n, tol)?;
    let canonical2 = (t.n() == 2 && t.dim() == 2).then(|| canonical2_extract(t, tol));
    let canonical3 = (t.n() == 3 && t.dim() == 3).then(|| canonical3_extract(t, tol));
    Ok(Classification {
        purity,
        canonical2,
        canonical3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{equivalent, Equivalence};
    use crate::numcore::{c, from_real_rows};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn p2(c_: Complex64, theta: Complex64) -> Canonical2 {
        Canonical2::new(c_, theta, &tol()).unwrap()
    }

    #[test]
    fn canonical2_examples() {
        let t = tol();
        let d = 0.75f64.sqrt();
        let built = canonical2_build(&p2(r(0.5), r(1.0)), &t).unwrap();
        assert!(fro(&(built.u(1) - from_real_rows(&[&[0.5, -d], &[d, 0.5]]))) < 1e-15);
        let built0 = canonical2_build(&p2(r(0.0), r(1.0)), &t).unwrap();
        assert!(fro(&(built0.u(1) - from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]))) < 1e-15);
        assert_eq!(commutant_dimension(&built, &t), 1);
        let other = canonical2_build(&p2(r(0.5), c(0.0, 1.0)), &t).unwrap();
        assert!(!equivalent(&built, &other, &t).is_equivalent());
        assert!(Canonical2::new(r(1.0), r(1.0), &t).is_err());
        assert!(Canonical2::new(r(0.5), r(0.9), &t).is_err());
    }

    #[test]
    fn canonical2_roundtrip() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = p2(r(0.5), r(1.0));
        let back = canonical2_extract(&canonical2_build(&p, &t).unwrap(), &t).unwrap();
        assert!((back.c - p.c).norm() < 1e-10 && (back.theta - p.theta).norm() < 1e-10);
        for _ in 0..30 {
            let p = p2(sample::disk_point(&mut rng, 0.95), sample::unit_complex(&mut rng));
            let tu = canonical2_build(&p, &t).unwrap().conjugate(&sample::unitary(&mut rng, 2));
            let back = canonical2_extract(&tu, &t).unwrap();
            assert!((back.c - p.c).norm() < 1e-9 && (back.theta - p.theta).norm() < 1e-9);
        }
    }

    #[test]
    fn canonical2_rejections() {
        let t = tol();
        let tu = complete_tuple(&[Pair::new(identity(2), zeros(2, 2))], &t).unwrap();
        assert!(matches!(canonical2_extract(&tu, &t), Err(ClassifyError::Shape(_))));
        let u = crate::numcore::diag(&[c(0.0, 1.0), r(1.0)]);
        let tu = complete_tuple(&[Pair::new(u, diag_real(&[0.0, 1.0]))], &t).unwrap();
        assert!(matches!(canonical2_extract(&tu, &t), Err(ClassifyError::Reducible(_))));
    }

    #[test]
    fn canonical3_builds_are_certified() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = Canonical3 {
            alpha: r(0.0),
            alpha1: r(0.0),
            theta: r(1.0),
            theta1: r(1.0),
        };
        let b = canonical3_build(&zero, &t).unwrap();
        assert!(fro(&(b.tuple.u(2) - from_real_rows(&[&[0.0, 0.0, -1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]))) < 1e-15);
        for _ in 0..30 {
            let p = sample::canonical3_params(&mut rng);
            let b = canonical3_build(&p, &t).unwrap();
            assert!(validate_model(&b.tuple, &t).worst() < 1e-9);
            assert!(b.report.n_norm < 1e-9 && b.report.n_e2 < 1e-9 && b.report.n_e3 < 1e-9);
            assert!(b.report.normal_residual < 1e-9);
            assert!((b.report.alpha - p.alpha).norm() < 1e-12);
            assert!((b.report.epsilon / b.report.beta.conj() - p.theta).norm() < 1e-12);
            assert!(b.report.relation_residual < 1e-12);
        }
    }

    #[test]
    fn canonical3_roundtrip_and_injectivity() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut prev: Option<ModelTuple> = None;
        for _ in 0..20 {
            let p = sample::canonical3_params(&mut rng);
            let tu = canonical3_build(&p, &t).unwrap().tuple;
            let conj = tu.conjugate(&sample::unitary(&mut rng, 3));
            let back = canonical3_extract(&conj, &t).unwrap();
            for (x, y) in [(back.alpha, p.alpha), (back.alpha1, p.alpha1), (back.theta, p.theta), (back.theta1, p.theta1)] {
                assert!((x - y).norm() < 1e-9, "{back:?} vs {p:?}");
            }
            assert!(equivalent(&tu, &conj, &t).is_equivalent());
            if let Some(q) = &prev {
                assert!(matches!(equivalent(q, &tu, &t), Equivalence::NotEquivalent(_)));
            }
            prev = Some(tu);
        }
    }

    /// `span{e1}` carries `(u_1, 0), (u_2, 0), (u_3, 1)`; `span{e2, e3}` carries
    /// a scalar extension of a two-dimensional canonical pair.
    fn reducible_fixture(cc: Complex64) -> ModelTuple {
        let t = tol();
        let scalar = ModelTuple::new(
            vec![
                Pair::new(identity(1) * c(0.0, 1.0), zeros(1, 1)),
                Pair::new(identity(1) * c(-1.0, 0.0), zeros(1, 1)),
                Pair::new(identity(1) * c(0.0, 1.0), identity(1)),
            ],
            &t,
        )
        .unwrap();
        let lambda = c(0.6, 0.8);
        let uc = if cc.norm() < 1.0 {
            p2(cc, r(1.0)).unitary()
        } else {
            crate::numcore::diag(&[cc, r(1.0)])
        };
        let p = diag_real(&[0.0, 1.0]);
        let block = ModelTuple::new(
            vec![
                Pair::new(&uc * lambda, p.clone()),
                Pair::new(uc.adjoint(), identity(2) - &uc * &p * uc.adjoint()),
                Pair::new(identity(2) * lambda.conj(), zeros(2, 2)),
            ],
            &t,
        )
        .unwrap();
        scalar.direct_sum(&block).unwrap()
    }

    #[test]
    fn normality_fixtures() {
        let t = tol();
        let red = reducible_fixture(r(0.3));
        assert!(validate_model(&red, &t).ok);
        let rep = normality_obstruction(red.u(1), red.u(2), red.p(1), red.p(2), &t).unwrap();
        assert!(rep.n_norm > 0.1 && !rep.irreducible_consistent);
        assert!(rep.n_e2 < 1e-12 && rep.n_e3 < 1e-12);
        assert!(commutant_dimension(&red, &t) > 1);

        let diag_fixture = reducible_fixture(c(0.0, 1.0));
        assert!(validate_model(&diag_fixture, &t).ok);
        let rep = normality_obstruction(
            diag_fixture.u(1),
            diag_fixture.u(2),
            diag_fixture.p(1),
            diag_fixture.p(2),
            &t,
        )
        .unwrap();
        assert!((rep.beta * rep.epsilon).norm() < 1e-12);
        assert!(!rep.moduli_ok && !rep.irreducible_consistent);

        let moved = red.conjugate(&sample::unitary(&mut ChaCha8Rng::seed_from_u64(4), 3));
        assert!(matches!(
            normality_obstruction(moved.u(1), moved.u(2), moved.p(1), moved.p(2), &t),
            Err(ClassifyError::Shape(_))
        ));
        assert!(canonical3_extract(&red, &t).is_err());
    }

    #[test]
    fn taylor_examples() {
        let t = tol();
        let z = BlaschkeProduct::identity_map();
        assert_eq!(blaschke_taylor(&z, 4), vec![r(0.0), r(1.0), r(0.0), r(0.0)]);
        let b = BlaschkeProduct::new(vec![r(0.5)], r(1.0), &t).unwrap();
        let coeffs = blaschke_taylor(&b, 4);
        for (x, y) in coeffs.iter().zip([-0.5, 0.75, 0.375, 0.1875]) {
            assert!((x - r(y)).norm() < 1e-15);
        }
        assert_eq!(b.degree(), 1);
        assert!(b.unimodular_residual(64) < 1e-14);
        assert!(BlaschkeProduct::new(vec![], r(1.0), &t).is_err());
        assert!(BlaschkeProduct::new(vec![r(1.0)], r(1.0), &t).is_err());
    }

    #[test]
    fn taylor_matches_evaluation_inside_disk() {
        let t = tol();
        let b = BlaschkeProduct::new(vec![c(0.3, 0.2), c(-0.5, 0.1)], c(0.0, 1.0), &t).unwrap();
        let coeffs = blaschke_taylor(&b, 80);
        for z in [c(0.2, 0.1), c(-0.3, 0.4), r(0.0)] {
            let series = coeffs.iter().rev().fold(r(0.0), |acc, &a| acc * z + a);
            assert!((series - b.eval(z)).norm() < 1e-14);
        }
    }

    #[test]
    fn phi_of_shift_examples() {
        let t = tol();
        let z = BlaschkeProduct::identity_map();
        let shift = crate::hardy::truncate(&MatrixPolynomial::new(vec![zeros(1, 1), identity(1)]).unwrap(), 6);
        assert_eq!(phi_of_shift(&z, 6), shift);
        let z2 = BlaschkeProduct::new(vec![r(0.0), r(0.0)], r(1.0), &t).unwrap();
        let op = phi_of_shift(&z2, 6);
        assert_eq!(crate::numcore::nullspace(&op.matrix().adjoint(), &t).dim(), 2);
        let b = BlaschkeProduct::new(vec![r(0.5)], r(1.0), &t).unwrap();
        assert!(column_norm_defect(&phi_of_shift(&b, 32), 16) < 1e-8);
    }

    #[test]
    fn blaschke_models() {
        let t = tol();
        let z = BlaschkeProduct::identity_map();
        let m = model_from_blaschke(std::slice::from_ref(&z), 12, &t).unwrap();
        assert_eq!(m.tuple.dim(), 2);
        assert!(m.model_residual < 1e-12);
        // (S, S) is not doubly commuting, and neither is its model.
        assert!(!crate::model::doubly_commuting(m.tuple.u(1), m.tuple.p(1), &t));

        let half = BlaschkeProduct::new(vec![r(0.5)], r(1.0), &t).unwrap();
        let mh = model_from_blaschke(std::slice::from_ref(&half), blaschke_window(std::slice::from_ref(&half)), &t).unwrap();
        assert_eq!(mh.tuple.dim(), 2);
        assert!(mh.model_residual < 1e-9);
        assert!(!equivalent(&m.tuple, &mh.tuple, &t).is_equivalent());

        let m3 = model_from_blaschke(&[z.clone(), z.clone()], 12, &t).unwrap();
        assert_eq!(m3.tuple.dim(), 3);
        assert_eq!(crate::model::rank_accounting(&m3.tuple, &t).unwrap(), vec![1, 1, 1]);

        assert!(matches!(
            model_from_blaschke(&[z], 2, &t),
            Err(ClassifyError::Window { .. })
        ));
    }

    #[test]
    fn purity_examples() {
        let t = tol();
        let c2 = canonical2_build(&p2(r(0.5), r(1.0)), &t).unwrap();
        let rep = purity_and_multiplicity(&c2, 8, &t).unwrap();
        assert_eq!(rep.multiplicities, vec![1, 1]);
        assert_eq!(rep.product_multiplicity, 2);
        assert!(rep.irreducible && rep.proper && rep.pure.iter().all(|&x| x));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c3 = canonical3_build(&sample::canonical3_params(&mut rng), &t).unwrap().tuple;
        let rep = purity_and_multiplicity(&c3, 8, &t).unwrap();
        assert_eq!(rep.multiplicities, vec![1, 1, 1]);
        assert_eq!(rep.product_multiplicity, 3);

        let z2 = BlaschkeProduct::new(vec![r(0.0), r(0.0)], r(1.0), &t).unwrap();
        let bm = model_from_blaschke(&[z2], 16, &t).unwrap();
        let rep = purity_and_multiplicity(&bm.tuple, 8, &t).unwrap();
        assert_eq!(rep.product_multiplicity, 3);
        assert!(rep.small_product && rep.multiplicity_one_holds);
        assert!(rep.multiplicities.contains(&1));

        let red = reducible_fixture(r(0.3));
        let rep = purity_and_multiplicity(&red, 8, &t).unwrap();
        assert!(!rep.irreducible && rep.proper);

        let ext = sample::scalar_extension(&mut rng, 2, c(0.6, 0.8));
        let rep = purity_and_multiplicity(&ext, 8, &t).unwrap();
        assert!(!rep.proper && !rep.pure[2]);
    }

    #[test]
    fn nonblaschke_identities() {
        let t = tol();
        for n in [4, 8, 12] {
            let rep = nonblaschke_example(n, &t).unwrap();
            assert!(rep.worst_identity() < 1e-14, "{rep:?}");
            assert!(rep.difference_norm > 0.9 && rep.sum_norm > 0.9);
            assert_eq!(rep.product_multiplicity, 4);
        }
        assert!(nonblaschke_example(3, &t).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(50))]

            #[test]
            fn canonical2_extract_inverts_build(seed in any::<u64>()) {
                let t = tol();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = p2(sample::disk_point(&mut rng, 0.95), sample::unit_complex(&mut rng));
                let tu = canonical2_build(&p, &t).unwrap().conjugate(&sample::unitary(&mut rng, 2));
                let back = canonical2_extract(&tu, &t).unwrap();
                prop_assert!((back.c - p.c).norm() < 1e-9);
                prop_assert!((back.theta - p.theta).norm() < 1e-9);
            }

            #[test]
            fn blaschke_rank_accounting(degs in proptest::collection::vec(1usize..=2, 1..=2)) {
                let t = tol();
                let phis: Vec<BlaschkeProduct> = degs
                    .iter()
                    .map(|&d| BlaschkeProduct::new(vec![r(0.0); d], r(1.0), &t).unwrap())
                    .collect();
                let m = 1 + degs.iter().sum::<usize>();
                let bm = model_from_blaschke(&phis, 4 * m, &t).unwrap();
                prop_assert_eq!(bm.tuple.dim(), m);
                prop_assert!(bm.model_residual < 1e-12);
                let ranks = crate::model::rank_accounting(&bm.tuple, &t).unwrap();
                prop_assert_eq!(ranks.iter().sum::<usize>(), m);
                prop_assert_eq!(ranks[0], 1);
            }
        }
    }
}
