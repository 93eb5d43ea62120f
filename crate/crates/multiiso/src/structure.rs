//! Bi-isometry structure: defect operators, the Julia–Halmos completion,
//! model triples from a contraction `T` and a unitary `Z`, the finer nonet
//! parametrization of `Z`, and the unitary/cnu splitting of `T` with the
//! matching reduction of the model operators.
//!
//! Defect spaces `𝔇_T ⊆ 𝔉` are carried in coordinates of their canonical
//! orthonormal basis, so `𝔈 = 𝔉 ⊕ 𝔇_T ⊕ 𝔉′` is `C^{f + d_T + f′}`.

use crate::hardy::{
    embed_all_degrees, embed_at_degree, symbol_of_model, truncate_linear, unitary_part_truncated,
    HardyError,
};
use crate::model::{complete_tuple, ModelError, ModelTuple, Pair};
use crate::numcore::{
    ensure_square, fro, hcat, hermitian_eigen, identity, nullspace, nullspace_abs, op_norm, projection_residual,
    r, span, spectral_radius, subspace_complement, subspace_complement_in, subspace_eq,
    subspace_intersect, unitarity_residual, zeros, CMatrix, NumError, Subspace, Tolerances,
};

/// Spectral-radius margin for the `C_{·0}` test.
pub const TOL_SPEC: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hardy(#[from] HardyError),
    #[error("not a contraction: norm {0}")]
    NotContraction(f64),
    #[error("{0} is not unitary (residual {1:.3e})")]
    NotUnitary(&'static str, f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("identification failed: {0}")]
    Identification(String),
    #[error("invalid nonet: {0}")]
    Nonet(String),
}

/// `(U, P)` of a cnu bi-isometry: `V_1 = V_{U,P}`, `V_2 = V_{Uᴴ, UP⊥Uᴴ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTriple {
    pub u: CMatrix,
    pub p: CMatrix,
}

impl ModelTriple {
    pub fn new(u: CMatrix, p: CMatrix, tol: &Tolerances) -> Result<Self, StructureError> {
        let n = ensure_square(&u)?;
        if p.shape() != (n, n) {
            return Err(StructureError::Shape(format!(
                "U is {n}x{n} but P is {:?}",
                p.shape()
            )));
        }
        let ru = unitarity_residual(&u)?;
        if ru > tol.orth {
            return Err(StructureError::NotUnitary("U", ru));
        }
        let rp = projection_residual(&p)?;
        if rp > tol.orth {
            return Err(StructureError::Shape(format!(
                "P is not a projection (residual {rp:.3e})"
            )));
        }
        Ok(Self { u, p })
    }

    pub fn from_tuple(t: &ModelTuple, tol: &Tolerances) -> Result<Self, StructureError> {
        if t.n() != 2 {
            return Err(StructureError::Shape(format!(
                "a triple comes from a two-factor tuple, got {}",
                t.n()
            )));
        }
        Self::new(t.u(1).clone(), t.p(1).clone(), tol)
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn to_tuple(&self, tol: &Tolerances) -> Result<ModelTuple, StructureError> {
        Ok(complete_tuple(&[Pair::new(self.u.clone(), self.p.clone())], tol)?)
    }
}

/// A contraction with its defect operators and canonical defect-space bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionData {
    pub t: CMatrix,
    pub d_t: CMatrix,
    pub d_t_star: CMatrix,
    pub defect_space: Subspace,
    pub defect_space_star: Subspace,
}

impl ContractionData {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// `dim 𝔇_T`.
    pub fn d(&self) -> usize {
        self.defect_space.dim()
    }

    /// `dim 𝔇_{T*}`.
    pub fn d_star(&self) -> usize {
        self.defect_space_star.dim()
    }

    /// `Gᴴ D_T`: the defect map in defect coordinates.
    fn coords(&self) -> CMatrix {
        self.defect_space.basis().adjoint() * &self.d_t
    }

    fn coords_star(&self) -> CMatrix {
        self.defect_space_star.basis().adjoint() * &self.d_t_star
    }
}

/// Square root of `I − AᴴA`-type operands. Eigenvalues at most `tol.rank`
/// count as zero, so the defect space is the span of the kept eigenvectors.
fn defect_root(h: &CMatrix, tol: &Tolerances) -> Result<(CMatrix, Subspace), StructureError> {
    let n = h.nrows();
    if n == 0 {
        return Ok((zeros(0, 0), Subspace::zero(0)));
    }
    let (vals, v) = hermitian_eigen(h);
    let mut root = zeros(n, n);
    let mut kept = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam < -tol.eq {
            return Err(StructureError::NotContraction(1.0 + (-lam).sqrt()));
        }
        if lam > tol.rank {
            let col = v.column(k);
            root += col * col.adjoint() * r(lam.sqrt());
            kept.push(k);
        }
    }
    let mut basis = zeros(n, kept.len());
    for (j, &k) in kept.iter().enumerate() {
        basis.set_column(j, &v.column(k));
    }
    Ok((root, Subspace::from_orthonormal(&basis)))
}

pub fn defect(t: &CMatrix, tol: &Tolerances) -> Result<ContractionData, StructureError> {
    let n = ensure_square(t)?;
    let norm = op_norm(t);
    if norm > 1.0 + tol.eq {
        return Err(StructureError::NotContraction(norm));
    }
    let (d_t, defect_space) = defect_root(&(identity(n) - t.adjoint() * t), tol)?;
    let (d_t_star, defect_space_star) = defect_root(&(identity(n) - t * t.adjoint()), tol)?;
    Ok(ContractionData {
        t: t.clone(),
        d_t,
        d_t_star,
        defect_space,
        defect_space_star,
    })
}

/// Block matrix from row and column sizes; missing blocks are zero.
fn assemble(rows: &[usize], cols: &[usize], blocks: &[(usize, usize, &CMatrix)]) -> CMatrix {
    let mut out = zeros(rows.iter().sum(), cols.iter().sum());
    for &(i, j, b) in blocks {
        let r0: usize = rows[..i].iter().sum();
        let c0: usize = cols[..j].iter().sum();
        assert_eq!(b.shape(), (rows[i], cols[j]), "block ({i},{j})");
        out.view_mut((r0, c0), b.shape()).copy_from(b);
    }
    out
}

fn jh_blocks(cd: &ContractionData) -> [CMatrix; 4] {
    let g = cd.defect_space.basis();
    let gs = cd.defect_space_star.basis();
    [
        cd.t.clone(),
        &cd.d_t_star * gs,
        g.adjoint() * &cd.d_t,
        -(g.adjoint() * cd.t.adjoint() * gs),
    ]
}

/// `[[T, D_{T*}], [D_T, −Tᴴ]]` from `𝔉 ⊕ 𝔇_{T*}` onto `𝔉 ⊕ 𝔇_T`.
pub fn julia_halmos(t: &CMatrix, tol: &Tolerances) -> Result<CMatrix, StructureError> {
    let cd = defect(t, tol)?;
    let [a, b, c, d] = jh_blocks(&cd);
    let (f, dt, ds) = (cd.dim(), cd.d(), cd.d_star());
    let j = assemble(&[f, dt], &[f, ds], &[(0, 0, &a), (0, 1, &b), (1, 0, &c), (1, 1, &d)]);
    let res = unitarity_residual(&j)?;
    if res > tol.orth {
        return Err(StructureError::NotUnitary("Julia-Halmos matrix", res));
    }
    Ok(j)
}

/// Data `(𝔉, 𝔉′, T, Z)` with `Z: 𝔇_T ⊕ 𝔉′ → 𝔇_{T*} ⊕ 𝔉′`.
#[derive(Debug, Clone, PartialEq)]
pub struct TZData {
    pub f_dim: usize,
    pub fp_dim: usize,
    pub t: CMatrix,
    pub z: CMatrix,
}

/// `U = W_1W_2`, `W_1 = diag(JH(T), I_{𝔉′})`, `W_2 = diag(I_𝔉, Z)`, `P⊥`-range `𝔉`.
pub fn triple_from_tz(
    f_dim: usize,
    fp_dim: usize,
    t: &CMatrix,
    z: &CMatrix,
    tol: &Tolerances,
) -> Result<ModelTriple, StructureError> {
    if t.shape() != (f_dim, f_dim) {
        return Err(StructureError::Shape(format!(
            "T must be {f_dim}x{f_dim}, got {:?}",
            t.shape()
        )));
    }
    let cd = defect(t, tol)?;
    let (dt, ds) = (cd.d(), cd.d_star());
    if z.shape() != (ds + fp_dim, dt + fp_dim) {
        return Err(StructureError::Shape(format!(
            "Z must be {}x{}, got {:?}",
            ds + fp_dim,
            dt + fp_dim,
            z.shape()
        )));
    }
    let rz = unitarity_residual(z)?;
    if rz > tol.orth {
        return Err(StructureError::NotUnitary("Z", rz));
    }
    let [a, b, c, d] = jh_blocks(&cd);
    let id_fp = identity(fp_dim);
    let w1 = assemble(
        &[f_dim, dt, fp_dim],
        &[f_dim, ds, fp_dim],
        &[(0, 0, &a), (0, 1, &b), (1, 0, &c), (1, 1, &d), (2, 2, &id_fp)],
    );
    let id_f = identity(f_dim);
    let w2 = assemble(&[f_dim, ds + fp_dim], &[f_dim, dt + fp_dim], &[(0, 0, &id_f), (1, 1, z)]);
    let m = f_dim + dt + fp_dim;
    let mut p = zeros(m, m);
    for k in f_dim..m {
        p[(k, k)] = r(1.0);
    }
    ModelTriple::new(w1 * w2, p, tol)
}

/// `(T, Z)` read off a triple, with the identifications that realize it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedTZ {
    pub tz: TZData,
    /// `Ω: 𝔉 ⊕ 𝔇_T ⊕ 𝔉′ → 𝔈`, unitary.
    pub omega: CMatrix,
    /// `Ω′: 𝔉 ⊕ 𝔇_{T*} ⊕ 𝔉′ → 𝔈`, unitary.
    pub omega_star: CMatrix,
    /// Largest residual of the `W`, `W_*` and `Ω′ᴴΩ` identifications.
    pub identification_residual: f64,
}

fn right_inverse(m: &CMatrix) -> Result<CMatrix, StructureError> {
    if m.nrows() == 0 {
        return Ok(zeros(m.ncols(), 0));
    }
    let gram = m * m.adjoint();
    let inv = gram.try_inverse().ok_or(NumError::Singular)?;
    Ok(m.adjoint() * inv)
}

pub fn extract_tz(triple: &ModelTriple, tol: &Tolerances) -> Result<ExtractedTZ, StructureError> {
    let m = triple.dim();
    let u = &triple.u;
    let bf = span(&(identity(m) - &triple.p), tol).basis().clone();
    let f = bf.ncols();
    let f_space = Subspace::from_orthonormal(&bf);
    let t = bf.adjoint() * u * &bf;
    let cd = defect(&t, tol)?;
    let fu = span(&hcat(&bf, &(u * &bf)), tol);
    let fus = span(&hcat(&bf, &(u.adjoint() * &bf)), tol);
    let dspace = subspace_complement_in(&f_space, &fu, tol)?;
    let dspace_star = subspace_complement_in(&f_space, &fus, tol)?;
    let fp = subspace_complement(&fu);
    if dspace.dim() != cd.d() || dspace_star.dim() != cd.d_star() {
        return Err(StructureError::Identification(format!(
            "defect dimensions ({}, {}) differ from ({}, {})",
            dspace.dim(),
            dspace_star.dim(),
            cd.d(),
            cd.d_star()
        )));
    }
    let target = dspace.projector() * u * &bf;
    let coords = cd.coords();
    let w = &target * right_inverse(&coords)?;
    let target_star = dspace_star.projector() * u.adjoint() * &bf;
    let coords_star = cd.coords_star();
    let ws = &target_star * right_inverse(&coords_star)?;
    let mut worst = fro(&(&w * &coords - &target)).max(fro(&(&ws * &coords_star - &target_star)));
    worst = worst
        .max(unitarity_residual(&(w.adjoint() * &w)).map(|_| fro(&(w.adjoint() * &w - identity(w.ncols()))))?)
        .max(fro(&(ws.adjoint() * &ws - identity(ws.ncols()))));
    let bfp = fp.basis().clone();
    let omega = hcat(&hcat(&bf, &w), &bfp);
    let omega_star = hcat(&hcat(&bf, &ws), &(u.adjoint() * &bfp));
    let cross = omega_star.adjoint() * &omega;
    let n_rest = m - f;
    let z = cross.view((f, f), (n_rest, n_rest)).into_owned();
    let off = fro(&cross.view((0, f), (f, n_rest)).into_owned())
        .max(fro(&cross.view((f, 0), (n_rest, f)).into_owned()))
        .max(fro(&(cross.view((0, 0), (f, f)).into_owned() - identity(f))));
    worst = worst.max(off);
    if worst > tol.orth.sqrt() {
        return Err(StructureError::Identification(format!(
            "residual {worst:.3e}"
        )));
    }
    Ok(ExtractedTZ {
        tz: TZData {
            f_dim: f,
            fp_dim: fp.dim(),
            t,
            z,
        },
        omega,
        omega_star,
        identification_residual: worst,
    })
}

/// Compression of `V_1` to `ker V_2*` in a truncation window.
#[derive(Debug, Clone, PartialEq)]
pub struct BiIsometryPivot {
    pub t: CMatrix,
    /// Orthonormal basis of `ker V_2*` in the window.
    pub kernel: CMatrix,
    /// `‖KᴴV_1K − RᴴTR‖` against the extracted `T`, with `R` the change of basis.
    pub agreement: f64,
}

pub fn pivotal_from_bi_isometry(
    triple: &ModelTriple,
    n: usize,
    tol: &Tolerances,
) -> Result<BiIsometryPivot, StructureError> {
    if n < 3 {
        return Err(HardyError::Window { min: 3, found: n }.into());
    }
    let m = triple.dim();
    let v1 = symbol_of_model(&triple.u, &triple.p, tol)?;
    let p2 = identity(m) - &triple.u * &triple.p * triple.u.adjoint();
    let v2 = symbol_of_model(&triple.u.adjoint(), &p2, tol)?;
    let t1 = truncate_linear(&v1, n);
    let t2 = truncate_linear(&v2, n);
    let kernel = nullspace(&t2.matrix().adjoint(), tol).basis().clone();
    let t = kernel.adjoint() * t1.matrix() * &kernel;
    let ext = extract_tz(triple, tol)?;
    let bf = span(&(identity(m) - &triple.p), tol).basis().clone();
    let rot = embed_at_degree(&bf, 0, n).adjoint() * &kernel;
    if rot.nrows() != rot.ncols() {
        return Err(StructureError::Identification(format!(
            "kernel has dimension {} but the P-orthogonal range has {}",
            rot.ncols(),
            rot.nrows()
        )));
    }
    let agreement = fro(&(&t - rot.adjoint() * &ext.tz.t * &rot));
    Ok(BiIsometryPivot {
        t,
        kernel,
        agreement,
    })
}

/// Unitary and completely nonunitary parts of a contraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionParts {
    /// `𝔉_u` and its complement, as subspaces of `𝔉`.
    pub unitary_space: Subspace,
    pub cnu_space: Subspace,
    pub t_u: CMatrix,
    pub t_cnu: CMatrix,
    /// `‖(I − Π_u)TΠ_u‖ + ‖Π_uT(I − Π_u)‖`.
    pub reducing_residual: f64,
    pub t_u_unitarity: f64,
}

/// `𝔉_u = ⋂_{k ≤ dim} ker(I − T*ᵏTᵏ) ∩ ker(I − TᵏT*ᵏ)`.
pub fn contraction_parts(t: &CMatrix, tol: &Tolerances) -> Result<ContractionParts, StructureError> {
    let cd = defect(t, tol)?;
    let n = cd.dim();
    let mut fu = Subspace::full(n);
    let mut power = identity(n);
    for _ in 0..n {
        power = t * power;
        let a = identity(n) - power.adjoint() * &power;
        let b = identity(n) - &power * power.adjoint();
        fu = subspace_intersect(&fu, &nullspace_abs(&a, tol.eq), tol)?;
        fu = subspace_intersect(&fu, &nullspace_abs(&b, tol.eq), tol)?;
        if fu.is_zero() {
            break;
        }
    }
    let cnu = subspace_complement(&fu);
    let pu = fu.projector();
    let i = identity(n);
    let reducing_residual = fro(&((&i - &pu) * t * &pu)) + fro(&(&pu * t * (&i - &pu)));
    let t_u = fu.basis().adjoint() * t * fu.basis();
    let t_cnu = cnu.basis().adjoint() * t * cnu.basis();
    let t_u_unitarity = unitarity_residual(&t_u)?;
    Ok(ContractionParts {
        unitary_space: fu,
        cnu_space: cnu,
        t_u,
        t_cnu,
        reducing_residual,
        t_u_unitarity,
    })
}

/// Finite-dimensional `C_{·0}`: spectral radius below `1 − tol_spec`.
pub fn is_c_dot_zero(t: &CMatrix, tol_spec: f64) -> Result<bool, StructureError> {
    ensure_square(t)?;
    Ok(spectral_radius(t)? < 1.0 - tol_spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WoldReport {
    pub unitary_dim: usize,
    /// Escape of `V_1H`, `V_2H` from `H = H²(𝔉_u)` on inputs of degree `≤ N − 2`.
    pub v1_invariance: f64,
    pub v2_invariance: f64,
    /// Escape of `V_1*H`, `V_2*H` on the whole window.
    pub v1_adjoint_invariance: f64,
    pub v2_adjoint_invariance: f64,
    /// `‖V_1H − H(I ⊗ T_u)‖`.
    pub constant_multiplier: f64,
    /// Truncated unitary part of `V_1` equals the window of `H²(𝔉_u)`.
    pub unitary_part_matches: bool,
    /// `‖(cnu constants)ᴴ · (unitary part of V_1)‖`.
    pub orthogonality: f64,
    pub notes: Vec<String>,
}

impl WoldReport {
    pub fn worst(&self) -> f64 {
        [
            self.v1_invariance,
            self.v2_invariance,
            self.v1_adjoint_invariance,
            self.v2_adjoint_invariance,
            self.constant_multiplier,
            self.orthogonality,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, limit: f64) -> bool {
        self.unitary_part_matches && self.worst() <= limit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WoldOutcome {
    Checked(WoldReport),
    /// The cnu part of `T` is not `C_{·0}`; carries its spectral radius.
    HypothesisNotMet { spectral_radius: f64 },
}

pub const C10_NOTE: &str = "the reduction criterion is stated for C_10 but its argument needs only C_.0; C_.0 is checked";

pub fn wold_reduction_check(triple: &ModelTriple, n: usize, tol: &Tolerances) -> Result<WoldOutcome, StructureError> {
    if n < 2 {
        return Err(HardyError::Window { min: 2, found: n }.into());
    }
    let m = triple.dim();
    let bf = span(&(identity(m) - &triple.p), tol).basis().clone();
    let t = bf.adjoint() * &triple.u * &bf;
    let parts = contraction_parts(&t, tol)?;
    if !is_c_dot_zero(&parts.t_cnu, TOL_SPEC)? {
        return Ok(WoldOutcome::HypothesisNotMet {
            spectral_radius: spectral_radius(&parts.t_cnu)?,
        });
    }
    let v1 = symbol_of_model(&triple.u, &triple.p, tol)?;
    let p2 = identity(m) - &triple.u * &triple.p * triple.u.adjoint();
    let v2 = symbol_of_model(&triple.u.adjoint(), &p2, tol)?;
    let t1 = truncate_linear(&v1, n).matrix().clone();
    let t2 = truncate_linear(&v2, n).matrix().clone();
    let fu = &bf * parts.unitary_space.basis();
    let k = fu.ncols();
    let h = embed_all_degrees(&fu, n);
    let proj_out = identity(m * n) - &h * h.adjoint();
    let fwd = k * (n - 1);
    let esc = |x: CMatrix| fro(&(&proj_out * x));
    let h_fwd = h.columns(0, fwd).into_owned();
    let v1h = &t1 * &h;
    let expected = &h * embed_all_degrees(&parts.t_u, n).view((0, 0), (k * n, k * n)).into_owned();
    let unitary_part = unitary_part_truncated(&[v1.to_polynomial()], n, tol)?;
    let h_space = Subspace::from_orthonormal(&h);
    // The truncated estimate resolves slowly decaying cnu directions only to
    // rounding over their spectral gap.
    let loose = Tolerances { orth: tol.orth.sqrt(), ..*tol };
    let fcnu = &bf * parts.cnu_space.basis();
    let orthogonality = fro(&(embed_at_degree(&fcnu, 0, n).adjoint() * unitary_part.basis()));
    Ok(WoldOutcome::Checked(WoldReport {
        unitary_dim: k,
        v1_invariance: esc(&t1 * &h_fwd),
        v2_invariance: esc(&t2 * &h_fwd),
        v1_adjoint_invariance: esc(t1.adjoint() * &h),
        v2_adjoint_invariance: esc(t2.adjoint() * &h),
        constant_multiplier: fro(&(v1h - expected)),
        unitary_part_matches: subspace_eq(&unitary_part, &h_space, &loose)?,
        orthogonality,
        notes: vec![C10_NOTE.to_string()],
    }))
}

/// `(𝔉, 𝔉′, ℜ, ℜ_*, T, T′, X, X_*, Y)` in defect coordinates:
/// `ℜ ⊆ C^{d_T}`, `ℜ_* ⊆ C^{d_{T*}}`, `X: C^{d_{T′}} → C^{d_{T*}}`,
/// `X_*: C^{d_{T′*}} → C^{d_T}`, `Y: C^{d_T} → C^{d_{T*}}` vanishing off `ℜ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonet {
    pub t: CMatrix,
    pub tp: CMatrix,
    pub r: Subspace,
    pub r_star: Subspace,
    pub x: CMatrix,
    pub x_star: CMatrix,
    pub y: CMatrix,
}

impl Nonet {
    pub fn f_dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn fp_dim(&self) -> usize {
        self.tp.nrows()
    }

    /// Largest residual of the stated isometry and range conditions.
    pub fn invariant_residual(&self, tol: &Tolerances) -> Result<f64, StructureError> {
        let cd = defect(&self.t, tol)?;
        let cdp = defect(&self.tp, tol)?;
        let shapes = [
            ("X", &self.x, (cd.d_star(), cdp.d())),
            ("X_*", &self.x_star, (cd.d(), cdp.d_star())),
            ("Y", &self.y, (cd.d_star(), cd.d())),
        ];
        for (name, m, shape) in shapes {
            if m.shape() != shape {
                return Err(StructureError::Nonet(format!(
                    "{name} must be {shape:?}, got {:?}",
                    m.shape()
                )));
            }
        }
        if self.r.ambient_dim() != cd.d() || self.r_star.ambient_dim() != cd.d_star() {
            return Err(StructureError::Nonet("R or R_* has the wrong ambient dimension".into()));
        }
        let (pr, prs) = (self.r.projector(), self.r_star.projector());
        let res = [
            fro(&(self.x.adjoint() * &self.x - identity(cdp.d()))),
            fro(&(&self.x * self.x.adjoint() + &prs - identity(cd.d_star()))),
            fro(&(self.x_star.adjoint() * &self.x_star - identity(cdp.d_star()))),
            fro(&(&self.x_star * self.x_star.adjoint() + &pr - identity(cd.d()))),
            fro(&(self.y.adjoint() * &self.y - &pr)),
            fro(&(&self.y * self.y.adjoint() - &prs)),
        ];
        Ok(res.into_iter().fold(0.0, f64::max))
    }
}

/// `Z = [[Y − XT′ᴴX_*ᴴ, XD_{T′}], [D_{T′*}X_*ᴴ, T′]]` and the triple it defines.
pub fn nonet_build(nonet: &Nonet, tol: &Tolerances) -> Result<(CMatrix, ModelTriple), StructureError> {
    let res = nonet.invariant_residual(tol)?;
    if res > tol.orth {
        return Err(StructureError::Nonet(format!(
            "isometry conditions fail (residual {res:.3e})"
        )));
    }
    let cdp = defect(&nonet.tp, tol)?;
    let g = cdp.defect_space.basis();
    let gs = cdp.defect_space_star.basis();
    let top_left = &nonet.y - &nonet.x * g.adjoint() * nonet.tp.adjoint() * gs * nonet.x_star.adjoint();
    let top_right = &nonet.x * g.adjoint() * &cdp.d_t;
    let bottom_left = &cdp.d_t_star * gs * nonet.x_star.adjoint();
    let rows = [nonet.y.nrows(), nonet.fp_dim()];
    let cols = [nonet.y.ncols(), nonet.fp_dim()];
    let z = assemble(
        &rows,
        &cols,
        &[(0, 0, &top_left), (0, 1, &top_right), (1, 0, &bottom_left), (1, 1, &nonet.tp)],
    );
    let rz = unitarity_residual(&z)?;
    if rz > tol.orth {
        return Err(StructureError::NotUnitary("Z", rz));
    }
    let triple = triple_from_tz(nonet.f_dim(), nonet.fp_dim(), &nonet.t, &z, tol)?;
    Ok((z, triple))
}

/// Nonet of `Z` given `T` and `dim 𝔉′`.
pub fn nonet_extract(t: &CMatrix, z: &CMatrix, fp_dim: usize, tol: &Tolerances) -> Result<Nonet, StructureError> {
    let cd = defect(t, tol)?;
    let (dt, ds) = (cd.d(), cd.d_star());
    if z.shape() != (ds + fp_dim, dt + fp_dim) {
        return Err(StructureError::Shape(format!(
            "Z must be {}x{}, got {:?}",
            ds + fp_dim,
            dt + fp_dim,
            z.shape()
        )));
    }
    let tp = z.view((ds, dt), (fp_dim, fp_dim)).into_owned();
    let cdp = defect(&tp, tol)?;
    let e_dom = embed_at_degree(&identity(fp_dim), 0, 1);
    let lift_dom = |x: &CMatrix| {
        let mut out = zeros(dt + fp_dim, x.ncols());
        out.view_mut((dt, 0), x.shape()).copy_from(x);
        out
    };
    let lift_cod = |x: &CMatrix| {
        let mut out = zeros(ds + fp_dim, x.ncols());
        out.view_mut((ds, 0), x.shape()).copy_from(x);
        out
    };
    let fp_dom = lift_dom(&e_dom);
    let fp_cod = lift_cod(&e_dom);
    let dom_span = span(&hcat(&fp_dom, &(z.adjoint() * &fp_cod)), tol);
    let cod_span = span(&hcat(&fp_cod, &(z * &fp_dom)), tol);
    let r_full = subspace_complement(&dom_span);
    let rs_full = subspace_complement(&cod_span);
    let leak = fro(&r_full.basis().rows(dt, fp_dim).into_owned())
        .max(fro(&rs_full.basis().rows(ds, fp_dim).into_owned()));
    if leak > tol.orth.sqrt() {
        return Err(StructureError::Identification(format!(
            "R leaves the defect block by {leak:.3e}"
        )));
    }
    let r_sub = Subspace::from_orthonormal(&r_full.basis().rows(0, dt).into_owned());
    let rs_sub = Subspace::from_orthonormal(&rs_full.basis().rows(0, ds).into_owned());
    let z11 = z.view((0, 0), (ds, dt)).into_owned();
    let z12 = z.view((0, dt), (ds, fp_dim)).into_owned();
    let z21 = z.view((ds, 0), (fp_dim, dt)).into_owned();
    let x = &z12 * right_inverse(&cdp.coords())?;
    let x_star = z21.adjoint() * right_inverse(&cdp.coords_star())?;
    let y = &z11 * r_sub.projector();
    let nonet = Nonet {
        t: t.clone(),
        tp,
        r: r_sub,
        r_star: rs_sub,
        x,
        x_star,
        y,
    };
    let (rebuilt, _) = nonet_build(&nonet, tol)?;
    let mismatch = fro(&(rebuilt - z));
    if mismatch > tol.orth.sqrt() {
        return Err(StructureError::Identification(format!(
            "rebuilt Z differs by {mismatch:.3e}"
        )));
    }
    Ok(nonet)
}

/// Defect dimensions `(d_T, d_{T*}, d_{T′}, d_{T′*})`.
pub fn nonet_dims(t: &CMatrix, tp: &CMatrix, tol: &Tolerances) -> Result<[usize; 4], StructureError> {
    let a = defect(t, tol)?;
    let b = defect(tp, tol)?;
    Ok([a.d(), a.d_star(), b.d(), b.d_star()])
}

pub fn nonet_feasible_dims(dims: [usize; 4]) -> bool {
    let [dt, ds, dtp, dtps] = dims;
    dtp <= ds && dtps <= dt && dt + dtp == ds + dtps
}

/// Whether `T` and `T′` fit in one nonet.
pub fn nonet_feasible(t: &CMatrix, tp: &CMatrix, tol: &Tolerances) -> Result<bool, StructureError> {
    Ok(nonet_feasible_dims(nonet_dims(t, tp, tol)?))
}
