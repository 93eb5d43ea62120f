//! Pivotal operator `T_1 = P_1⊥U_1|P_1⊥𝔈` and the three-isometry existence theory.
//!
//! All subspaces of the `P_1⊥`-range are stored in coordinates of one fixed
//! orthonormal frame `F` of that range; [`PivotalData::lift`] maps them back to `𝔈`.

use num_complex::Complex64;

use crate::model::{complete_tuple, ModelError, ModelTuple, Pair};
use crate::numcore::{
    containment_gap, ensure_square, fro, hcat, identity, invariance_residual, invariant_closure,
    largest_invariant_inside, op_norm, projection_residual, span, subspace_complement,
    subspace_complement_in, subspace_contains, subspace_eq, subspace_intersect, subspace_sum,
    svd, unitarity_residual, CMatrix, NumError, Subspace, Tolerances,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PivotalError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} is not unitary (residual {1:.3e})")]
    NotUnitary(&'static str, f64),
    #[error("{0} is not a projection (residual {1:.3e})")]
    NotProjection(&'static str, f64),
    #[error("U_1 and U_2 do not commute (residual {0:.3e})")]
    Commutation(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

/// Seed space for `Q_min`. The defining display uses `P_1⊥U_2ᴴP_1𝔈`; the
/// sentence after it names `P_2` instead, which needs a candidate `P_2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SeedConvention {
    #[default]
    Display,
    WithP2(CMatrix),
}

fn check_unitary(name: &'static str, u: &CMatrix, tol: &Tolerances) -> Result<(), PivotalError> {
    let r = unitarity_residual(u)?;
    if r > tol.orth {
        return Err(PivotalError::NotUnitary(name, r));
    }
    Ok(())
}

fn check_projection(name: &'static str, p: &CMatrix, tol: &Tolerances) -> Result<(), PivotalError> {
    let r = projection_residual(p)?;
    if r > tol.orth {
        return Err(PivotalError::NotProjection(name, r));
    }
    Ok(())
}

fn same_size(mats: &[&CMatrix]) -> Result<usize, PivotalError> {
    let n = ensure_square(mats[0])?;
    for m in mats {
        if m.shape() != (n, n) {
            return Err(NumError::ShapeMismatch {
                expected: (n, n),
                found: m.shape(),
            }
            .into());
        }
    }
    Ok(n)
}

/// Orthonormal frame of the range of `I − P`.
fn complement_frame(p: &CMatrix, tol: &Tolerances) -> CMatrix {
    let n = p.nrows();
    span(&(identity(n) - p), tol).basis().clone()
}

/// Matrix of `T_1` in the canonical frame of the `P_1⊥`-range.
pub fn pivotal_operator(u1: &CMatrix, p1: &CMatrix, tol: &Tolerances) -> Result<CMatrix, PivotalError> {
    same_size(&[u1, p1])?;
    check_unitary("U_1", u1, tol)?;
    check_projection("P_1", p1, tol)?;
    let f = complement_frame(p1, tol);
    Ok(f.adjoint() * u1 * &f)
}

/// `U_1, U_2, P_1` with `T_1`, `Q_min` and `Q_max` computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotalData {
    pub u1: CMatrix,
    pub u2: CMatrix,
    pub p1: CMatrix,
    /// Orthonormal frame `F` of the `P_1⊥`-range (`dim 𝔈 × k`).
    pub frame: CMatrix,
    pub t1: CMatrix,
    pub q_min: Subspace,
    pub q_max: Subspace,
}

impl PivotalData {
    pub fn new(u1: &CMatrix, u2: &CMatrix, p1: &CMatrix, tol: &Tolerances) -> Result<Self, PivotalError> {
        Self::with_seed(u1, u2, p1, &SeedConvention::Display, tol)
    }

    pub fn with_seed(
        u1: &CMatrix,
        u2: &CMatrix,
        p1: &CMatrix,
        seed: &SeedConvention,
        tol: &Tolerances,
    ) -> Result<Self, PivotalError> {
        same_size(&[u1, u2, p1])?;
        check_unitary("U_1", u1, tol)?;
        check_unitary("U_2", u2, tol)?;
        check_projection("P_1", p1, tol)?;
        let comm = fro(&(u1 * u2 - u2 * u1));
        if comm > tol.eq {
            return Err(PivotalError::Commutation(comm));
        }
        let frame = complement_frame(p1, tol);
        let t1 = frame.adjoint() * u1 * &frame;
        let seed_range = match seed {
            SeedConvention::Display => p1.clone(),
            SeedConvention::WithP2(p2) => {
                same_size(&[u1, p2])?;
                check_projection("P_2", p2, tol)?;
                p2.clone()
            }
        };
        let seed = span(&(frame.adjoint() * u2.adjoint() * seed_range), tol);
        let q_min = invariant_closure(&t1, &seed, tol)?;

        let u = u1 * u2;
        let forbidden = span(&(frame.adjoint() * u.adjoint() * p1), tol);
        let q_max = largest_invariant_inside(&t1, &subspace_complement(&forbidden), tol)?;
        let dual_seed = span(&(frame.adjoint() * u1.adjoint() * u2.adjoint() * p1), tol);
        let dual = subspace_complement(&invariant_closure(&t1.adjoint(), &dual_seed, tol)?);
        if !subspace_eq(&q_max, &dual, tol)? {
            return Err(PivotalError::Internal(format!(
                "Q_max formulas disagree: dims {} and {}",
                q_max.dim(),
                dual.dim()
            )));
        }
        Ok(Self {
            u1: u1.clone(),
            u2: u2.clone(),
            p1: p1.clone(),
            frame,
            t1,
            q_min,
            q_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.u1.nrows()
    }

    /// Dimension of the `P_1⊥`-range.
    pub fn pivot_dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Frame coordinates to a subspace of `𝔈`.
    pub fn lift(&self, s: &Subspace) -> Subspace {
        Subspace::from_orthonormal(&(&self.frame * s.basis()))
    }

    /// Subspace of `𝔈` to frame coordinates; fails if it leaves the `P_1⊥`-range.
    pub fn coordinates(&self, s: &Subspace, tol: &Tolerances) -> Result<Subspace, PivotalError> {
        let gap = fro(&(&self.p1 * s.basis()));
        if gap > tol.orth {
            return Err(PivotalError::Precondition(format!(
                "subspace leaves the P_1-orthogonal range by {gap:.3e}"
            )));
        }
        Ok(Subspace::from_orthonormal(&(self.frame.adjoint() * s.basis())))
    }

    /// Is `q` (frame coordinates) an admissible `Q_1`: sandwiched and `T_1`-invariant.
    pub fn admissible(&self, q: &Subspace, tol: &Tolerances) -> Result<bool, PivotalError> {
        Ok(subspace_contains(&self.q_min, q, tol)?
            && subspace_contains(q, &self.q_max, tol)?
            && invariance_residual(&self.t1, q)? <= tol.orth)
    }

    /// `P_1𝔈 ⊕ F·q` as a subspace of `𝔈`.
    fn p1_plus(&self, q: &Subspace, tol: &Tolerances) -> CMatrix {
        let p1_basis = span(&self.p1, tol).basis().clone();
        hcat(&p1_basis, &(&self.frame * q.basis()))
    }

    /// Whether `W` maps `P_1𝔈 + Q_1` into itself, and the escape norm.
    pub fn w_invariance(&self, q: &Subspace, tol: &Tolerances) -> (bool, f64) {
        let g = self.p1_plus(q, tol);
        let r = g.ncols() - q.dim();
        let image = hcat(
            &(self.u2.adjoint() * g.columns(0, r)),
            &(&self.u1 * g.columns(r, q.dim())),
        );
        let escape = fro(&(&image - &g * (g.adjoint() * &image)));
        (escape <= tol.orth, escape)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum P2Decision {
    Yes { q_min: Subspace, q_max: Subspace },
    /// Unit vector of `Q_min` (in `𝔈`) farthest from `Q_max`, with that distance.
    No { witness: CMatrix, distance: f64 },
}

impl P2Decision {
    pub fn is_yes(&self) -> bool {
        matches!(self, P2Decision::Yes { .. })
    }
}

pub fn q_min(u1: &CMatrix, u2: &CMatrix, p1: &CMatrix, tol: &Tolerances) -> Result<Subspace, PivotalError> {
    Ok(PivotalData::new(u1, u2, p1, tol)?.q_min)
}

pub fn q_max(u1: &CMatrix, u2: &CMatrix, p1: &CMatrix, tol: &Tolerances) -> Result<Subspace, PivotalError> {
    Ok(PivotalData::new(u1, u2, p1, tol)?.q_max)
}

/// Decide whether some `P_2` satisfies the two-sided inequality.
pub fn exists_p2(data: &PivotalData, tol: &Tolerances) -> Result<P2Decision, PivotalError> {
    if subspace_contains(&data.q_min, &data.q_max, tol)? {
        return Ok(P2Decision::Yes {
            q_min: data.q_min.clone(),
            q_max: data.q_max.clone(),
        });
    }
    let k = data.pivot_dim();
    let out = (identity(k) - data.q_max.projector()) * data.q_min.basis();
    let d = svd(&out);
    let witness = &data.frame * data.q_min.basis() * d.v.columns(0, 1);
    Ok(P2Decision::No {
        witness,
        distance: d.singular_values[0],
    })
}

/// Both sides of each equivalence (1)–(3) plus the vanishing products.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Conditions {
    pub q1_projection_residual: f64,
    pub p1_q1_overlap: f64,
    /// `(P_2 ≤ P_1 + Q_1, T_1-invariance of the Q_1-range)`.
    pub cond1: (bool, bool),
    /// `(Q_2 ≤ P_1 + Q_1, Q_1-range contains P_1⊥U_2ᴴP_1𝔈)`.
    pub cond2: (bool, bool),
    /// `(P_2Q_2 = 0, Q_1-range inside UᴴP_1⊥𝔈)`.
    pub cond3: (bool, bool),
    /// `‖P_1U(P_1⊥U_1)^n P_1⊥U_2ᴴP_1‖` for `n = 0..=dim`.
    pub vanishing: Vec<f64>,
}

impl P2Conditions {
    /// Every equivalence has matching sides.
    pub fn consistent(&self) -> bool {
        self.cond1.0 == self.cond1.1 && self.cond2.0 == self.cond2.1 && self.cond3.0 == self.cond3.1
    }

    pub fn all_hold(&self) -> bool {
        self.consistent() && self.cond1.0 && self.cond2.0 && self.cond3.0
    }

    pub fn worst_vanishing(&self) -> f64 {
        self.vanishing.iter().copied().fold(0.0, f64::max)
    }
}

fn range_le(a: &CMatrix, b: &CMatrix, tol: &Tolerances) -> Result<bool, NumError> {
    subspace_contains(&span(a, tol), &span(b, tol), tol)
}

pub fn check_p2_conditions(
    u1: &CMatrix,
    u2: &CMatrix,
    p1: &CMatrix,
    p2: &CMatrix,
    tol: &Tolerances,
) -> Result<P2Conditions, PivotalError> {
    let n = same_size(&[u1, u2, p1, p2])?;
    let q1 = u1.adjoint() * p2 * u1;
    let q1_projection_residual = projection_residual(&q1)?;
    if q1_projection_residual > tol.orth {
        return Err(PivotalError::NotProjection("Q_1", q1_projection_residual));
    }
    let p1_q1_overlap = fro(&(p1 * &q1));
    let q2 = u2.adjoint() * p1 * u2;
    let u = u1 * u2;
    let p1_perp = identity(n) - p1;
    let sum = p1 + &q1;
    let q_range = span(&q1, tol);
    let t_full = &p1_perp * u1 * &p1_perp;

    let cond1 = (
        range_le(p2, &sum, tol)?,
        invariance_residual(&t_full, &q_range)? <= tol.orth,
    );
    let cond2 = (
        range_le(&q2, &sum, tol)?,
        range_le(&(&p1_perp * u2.adjoint() * p1), &q1, tol)?,
    );
    let cond3 = (
        fro(&(p2 * &q2)) <= tol.eq,
        range_le(&q1, &(u.adjoint() * &p1_perp), tol)?,
    );
    let tail = &p1_perp * u2.adjoint() * p1;
    let step = &p1_perp * u1;
    let mut power = identity(n);
    let mut vanishing = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        vanishing.push(op_norm(&(p1 * &u * &power * &tail)));
        power = &step * power;
    }
    Ok(P2Conditions {
        q1_projection_residual,
        p1_q1_overlap,
        cond1,
        cond2,
        cond3,
        vanishing,
    })
}

/// A three-tuple built from a sandwiched invariant `Q_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Built3 {
    pub tuple: ModelTuple,
    pub p2: CMatrix,
    /// `‖(P_2 + U_2ᴴP_1U_2) − (P_1 + U_1ᴴP_2U_1)‖`.
    pub balance_residual: f64,
    /// `rank P_1 + rank P_2` and the rank of `P_2 + U_2ᴴP_1U_2`.
    pub ranks: (usize, usize),
}

/// `P_2 = U_1·proj(Q_1)·U_1ᴴ`, then the unique completion to three factors.
/// `q1` is given in frame coordinates of `data`.
pub fn build_3isometry(data: &PivotalData, q1: &Subspace, tol: &Tolerances) -> Result<Built3, PivotalError> {
    if q1.ambient_dim() != data.pivot_dim() {
        return Err(NumError::AmbientMismatch {
            left: data.pivot_dim(),
            right: q1.ambient_dim(),
        }
        .into());
    }
    if !subspace_contains(&data.q_min, q1, tol)? {
        return Err(PivotalError::Precondition(format!(
            "Q_1 does not contain Q_min (gap {:.3e})",
            containment_gap(&data.q_min, q1)?
        )));
    }
    if !subspace_contains(q1, &data.q_max, tol)? {
        return Err(PivotalError::Precondition(format!(
            "Q_1 is not inside Q_max (gap {:.3e})",
            containment_gap(q1, &data.q_max)?
        )));
    }
    let inv = invariance_residual(&data.t1, q1)?;
    if inv > tol.orth {
        return Err(PivotalError::Precondition(format!(
            "Q_1 is not T_1-invariant (residual {inv:.3e})"
        )));
    }
    let lifted = data.lift(q1).projector();
    let mut p2 = &data.u1 * lifted * data.u1.adjoint();
    p2 = (&p2 + p2.adjoint()) * Complex64::new(0.5, 0.0);
    let left = &p2 + data.u2.adjoint() * &data.p1 * &data.u2;
    let right = &data.p1 + data.u1.adjoint() * &p2 * &data.u1;
    let balance_residual = fro(&(&left - &right));
    let ranks = (
        span(&data.p1, tol).dim() + span(&p2, tol).dim(),
        span(&left, tol).dim(),
    );
    let tuple = complete_tuple(
        &[
            Pair::new(data.u1.clone(), data.p1.clone()),
            Pair::new(data.u2.clone(), p2.clone()),
        ],
        tol,
    )?;
    Ok(Built3 {
        tuple,
        p2,
        balance_residual,
        ranks,
    })
}

/// `W(x_1 + x_2) = U_2ᴴx_1 + U_1x_2` on `P_1𝔈 ⊕ Q_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WIsometry {
    /// Orthonormal basis of `P_1𝔈 ⊕ Q_max` in `𝔈`; the first `p1_rank` columns span `P_1𝔈`.
    pub basis: CMatrix,
    pub p1_rank: usize,
    /// Matrix of `W` in that basis.
    pub matrix: CMatrix,
    pub unitarity_residual: f64,
}

pub fn w_isometry(data: &PivotalData, tol: &Tolerances) -> Result<WIsometry, PivotalError> {
    if let P2Decision::No { distance, .. } = exists_p2(data, tol)? {
        return Err(PivotalError::Precondition(format!(
            "Q_min is not inside Q_max (distance {distance:.3e})"
        )));
    }
    let basis = data.p1_plus(&data.q_max, tol);
    let r = basis.ncols() - data.q_max.dim();
    let image = hcat(
        &(data.u2.adjoint() * basis.columns(0, r)),
        &(&data.u1 * basis.columns(r, data.q_max.dim())),
    );
    let matrix = basis.adjoint() * &image;
    let escape = fro(&(&image - &basis * &matrix));
    if escape > tol.orth {
        return Err(PivotalError::Internal(format!(
            "W leaves P_1E + Q_max (escape {escape:.3e})"
        )));
    }
    let unitarity_residual = unitarity_residual(&matrix)?;
    Ok(WIsometry {
        basis,
        p1_rank: r,
        matrix,
        unitarity_residual,
    })
}

/// Largest gap dimension for which all invariant sandwiches are enumerated.
pub const LATTICE_MAX_GAP: usize = 10;
/// Largest member count for which meet/join closure is checked pairwise.
pub const LATTICE_MAX_CLOSURE_CHECK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// Admissible `Q_1` subspaces in frame coordinates, `Q_min` first.
    pub members: Vec<Subspace>,
    /// Every member passes the `W`-invariance and restricted-unitarity checks.
    pub w_checks_hold: bool,
    /// `None` when the lattice is too large for the pairwise check.
    pub closed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeOutcome {
    Enumerated(Lattice),
    NotEnumerable(String),
    NoP2,
}

fn min_separation(eigs: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            best = best.min((eigs[i] - eigs[j]).norm());
        }
    }
    best
}

/// Enumerate admissible `Q_1` when the compression of `T_1` to
/// `Q_max ⊖ Q_min` has distinct eigenvalues.
pub fn p2_lattice(data: &PivotalData, tol: &Tolerances) -> Result<LatticeOutcome, PivotalError> {
    if !exists_p2(data, tol)?.is_yes() {
        return Ok(LatticeOutcome::NoP2);
    }
    let gap = subspace_complement_in(&data.q_min, &data.q_max, tol)?;
    let g = gap.dim();
    if g > LATTICE_MAX_GAP {
        return Ok(LatticeOutcome::NotEnumerable(format!(
            "gap dimension {g} exceeds {LATTICE_MAX_GAP}"
        )));
    }
    let comp = gap.basis().adjoint() * &data.t1 * gap.basis();
    let eigs = crate::numcore::eigenvalues(&comp)?;
    let sep = min_separation(&eigs);
    if sep < tol.eq.sqrt() {
        return Ok(LatticeOutcome::NotEnumerable(format!(
            "compression has (nearly) repeated eigenvalues, separation {sep:.3e}"
        )));
    }
    let vecs: Vec<CMatrix> = eigs
        .iter()
        .map(|&l| crate::numcore::eigenvector(&comp, l).map(|v| gap.basis() * v))
        .collect::<Result<_, _>>()?;
    let mut members = Vec::with_capacity(1 << g);
    for mask in 0usize..(1 << g) {
        let mut cols = data.q_min.basis().clone();
        for (i, v) in vecs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cols = hcat(&cols, v);
            }
        }
        members.push(span(&cols, tol));
    }
    members.sort_by_key(Subspace::dim);
    let mut w_checks_hold = true;
    for q in &members {
        if !data.admissible(q, tol)? {
            return Err(PivotalError::Internal(
                "enumerated sandwich is not T_1-invariant".into(),
            ));
        }
        let (w_inv, _) = data.w_invariance(q, tol);
        let restricted = restricted_w_unitarity(data, q, tol)?;
        w_checks_hold &= w_inv && restricted <= tol.orth;
    }
    let closed = if members.len() <= LATTICE_MAX_CLOSURE_CHECK {
        Some(meet_join_closed(&members, tol)?)
    } else {
        None
    };
    Ok(LatticeOutcome::Enumerated(Lattice {
        members,
        w_checks_hold,
        closed,
    }))
}

/// Unitarity residual of `W` compressed to `P_1𝔈 + Q_1`.
pub fn restricted_w_unitarity(data: &PivotalData, q: &Subspace, tol: &Tolerances) -> Result<f64, PivotalError> {
    let g = data.p1_plus(q, tol);
    let r = g.ncols() - q.dim();
    let image = hcat(
        &(data.u2.adjoint() * g.columns(0, r)),
        &(&data.u1 * g.columns(r, q.dim())),
    );
    Ok(unitarity_residual(&(g.adjoint() * image))?)
}

fn meet_join_closed(members: &[Subspace], tol: &Tolerances) -> Result<bool, NumError> {
    let find = |s: &Subspace| -> Result<bool, NumError> {
        for m in members.iter().filter(|m| m.dim() == s.dim()) {
            if subspace_eq(m, s, tol)? {
                return Ok(true);
            }
        }
        Ok(false)
    };
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if !find(&subspace_intersect(a, b, tol)?)? || !find(&subspace_sum(a, b, tol)?)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
