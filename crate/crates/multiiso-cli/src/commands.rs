//! One function per subcommand. Each returns a report, an instance, or both.

use multiiso::classify::{
    blaschke_window, canonical2_build, canonical3_build, classify, model_from_blaschke, BlaschkeProduct,
    Canonical2, Canonical3, ClassifyError,
};
use multiiso::hardy::{symbol_of_model, symbol_product};
use multiiso::model::{
    complete_tuple, compose, equivalent_seeded, intertwining_residual, validate_model, Equivalence, ModelError,
    ModelTuple, Pair, ValidationReport,
};
use multiiso::numcore::{fro, projection_residual, unitarity_residual, CMatrix, Tolerances};
use multiiso::pivotal::{
    build_3isometry, exists_p2, p2_lattice, w_isometry, LatticeOutcome, P2Decision, PivotalData, PivotalError,
};
use multiiso::structure::{
    contraction_parts, extract_tz, is_c_dot_zero, nonet_build, nonet_extract, triple_from_tz,
    wold_reduction_check, ModelTriple, StructureError, WoldOutcome, TOL_SPEC,
};
use num_complex::Complex64;

use crate::error::{CliError, Status};
use crate::instance::{InstanceFile, Q1Json, Q1Name};
use crate::report::Report;

/// Flags shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Defaults, after the environment override.
    pub base: Tolerances,
    pub tol_eq: Option<f64>,
    pub tol_rank: Option<f64>,
    pub trunc: usize,
    pub seed: u64,
    pub pretty: bool,
}

impl Settings {
    /// Defaults, then the instance file, then command-line flags.
    pub fn tolerances(&self, file: Option<&InstanceFile>) -> Result<Tolerances, CliError> {
        let mut t = self.base;
        if let Some(ft) = file.and_then(|f| f.tolerances.as_ref()) {
            t.orth = ft.orth.unwrap_or(t.orth);
            t.rank = ft.rank.unwrap_or(t.rank);
            t.eq = ft.eq.unwrap_or(t.eq);
        }
        t.eq = self.tol_eq.unwrap_or(t.eq);
        t.rank = self.tol_rank.unwrap_or(t.rank);
        Tolerances::new(t.orth, t.rank, t.eq).map_err(|e| CliError::Input(format!("tolerances: {e}")))
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub status: Status,
    pub report: Option<Report>,
    pub instance: Option<InstanceFile>,
}

impl Output {
    fn report(report: Report) -> Self {
        Output {
            status: Status::from_pass(report.pass),
            report: Some(report),
            instance: None,
        }
    }

    fn instance(instance: InstanceFile) -> Self {
        Output {
            status: Status::Pass,
            report: None,
            instance: Some(instance),
        }
    }

    fn failure(command: &str, message: String) -> Self {
        let mut r = Report::new(command);
        r.require(false, message);
        Output::report(r)
    }
}

/// Errors that say the mathematics rules the request out, as opposed to bad input.
fn model_refusal(e: &ModelError) -> bool {
    matches!(
        e,
        ModelError::Composition { .. }
            | ModelError::Hypothesis { .. }
            | ModelError::RankAccounting { .. }
            | ModelError::CompletionInvalid { .. }
    )
}

fn pivotal_refusal(e: &PivotalError) -> bool {
    matches!(e, PivotalError::Precondition(_) | PivotalError::Internal(_))
}

fn classify_refusal(e: &ClassifyError) -> bool {
    matches!(
        e,
        ClassifyError::Construction(_) | ClassifyError::Reducible(_) | ClassifyError::Window { .. }
    )
}

fn structure_refusal(e: &StructureError) -> bool {
    matches!(e, StructureError::Identification(_) | StructureError::Nonet(_))
}

fn add_validation(r: &mut Report, v: &ValidationReport, tol: &Tolerances) {
    r.check("commutation", v.commutation, tol.eq);
    r.check("product", v.product, tol.eq);
    r.check("balance", v.balance, tol.eq);
    r.check("balance_projection", v.balance_projection, tol.eq);
    r.check("resolution", v.resolution, tol.eq);
    for ((i, j), value) in &v.balance_pairs {
        r.residual(&format!("balance_{i}_{j}"), *value);
    }
}

pub fn validate(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let pairs = file.pairs()?;
    if pairs.len() != file.n {
        return Err(CliError::Input(format!("tuple: n is {} but {} pairs are given", file.n, pairs.len())));
    }
    let mut r = Report::new("validate");
    for (k, p) in pairs.iter().enumerate() {
        r.check(&format!("U{}_unitarity", k + 1), unitarity_residual(&p.u).unwrap_or(f64::INFINITY), tol.orth);
        r.check(&format!("P{}_projection", k + 1), projection_residual(&p.p).unwrap_or(f64::INFINITY), tol.orth);
    }
    if !r.pass {
        r.note("entries are not unitaries and projections; model conditions not evaluated");
        return Ok(Output::report(r));
    }
    let t = ModelTuple::new(pairs, &tol).map_err(|e| CliError::Input(e.to_string()))?;
    add_validation(&mut r, &validate_model(&t, &tol), &tol);
    Ok(Output::report(r))
}

/// Replace factors `i` and `j` (one based) by their product.
pub fn compose_cmd(file: &InstanceFile, factors: (usize, usize), s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let t = file.tuple(&tol)?;
    let (i, j) = factors;
    if i == j || i == 0 || j == 0 || i.max(j) > t.n() {
        return Err(CliError::Input(format!(
            "factors: need two distinct indices in 1..={}, found {i} and {j}",
            t.n()
        )));
    }
    let (a, b) = (t.pairs()[i - 1].clone(), t.pairs()[j - 1].clone());
    let ab = match compose(&a, &b, &tol) {
        Ok(p) => p,
        Err(e) if model_refusal(&e) => return Ok(Output::failure("compose", e.to_string())),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let mut r = Report::new("compose");
    let sym = |p: &Pair| symbol_of_model(&p.u, &p.p, &tol).map_err(|e| CliError::Input(e.to_string()));
    let product = symbol_product(&sym(&a)?, &sym(&b)?).map_err(|e| CliError::Input(e.to_string()))?;
    let direct = sym(&ab)?.to_polynomial();
    let mut gap: f64 = 0.0;
    for k in 0..3 {
        gap = gap.max(fro(&(product.coeff(k) - direct.coeff(k))));
    }
    r.check("product_symbol", gap, tol.eq);
    r.matrix("U", &ab.u);
    r.matrix("P", &ab.p);
    let keep = i.min(j) - 1;
    let drop = i.max(j) - 1;
    let mut pairs: Vec<Pair> = t.pairs().to_vec();
    pairs[keep] = ab;
    pairs.remove(drop);
    let reduced = ModelTuple::new(pairs, &tol).map_err(|e| CliError::Input(e.to_string()))?;
    add_validation(&mut r, &validate_model(&reduced, &tol), &tol);
    r.note(format!("factors {i} and {j} replaced by their product; {} factors remain", reduced.n()));
    Ok(Output {
        status: Status::from_pass(r.pass),
        report: Some(r),
        instance: Some(InstanceFile::from_tuple(&reduced)),
    })
}

/// The instance lists the first `n − 1` pairs.
pub fn complete(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    if file.tuple.len() + 1 != file.n {
        return Err(CliError::Input(format!(
            "tuple: completion expects n - 1 = {} pairs, found {}",
            file.n.saturating_sub(1),
            file.tuple.len()
        )));
    }
    let prefix = file.pairs()?;
    let t = match complete_tuple(&prefix, &tol) {
        Ok(t) => t,
        Err(e) if model_refusal(&e) => return Ok(Output::failure("complete", e.to_string())),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let mut r = Report::new("complete");
    add_validation(&mut r, &validate_model(&t, &tol), &tol);
    let last = &t.pairs()[t.n() - 1];
    r.matrix(&format!("U{}", t.n()), &last.u);
    r.matrix(&format!("P{}", t.n()), &last.p);
    Ok(Output {
        status: Status::from_pass(r.pass),
        report: Some(r),
        instance: Some(InstanceFile::from_tuple(&t)),
    })
}

/// `(U_1, U_2, P_1)` read from the first two pairs.
fn pivotal_data(file: &InstanceFile, tol: &Tolerances) -> Result<PivotalData, CliError> {
    let pairs = file.pairs()?;
    if pairs.len() < 2 {
        return Err(CliError::Input("tuple: needs (U_1, P_1) and U_2 in its first two pairs".into()));
    }
    PivotalData::new(&pairs[0].u, &pairs[1].u, &pairs[0].p, tol).map_err(|e| CliError::Input(e.to_string()))
}

pub fn pivotal(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let data = pivotal_data(file, &tol)?;
    let mut r = Report::new("pivotal");
    r.matrix("T1", &data.t1);
    r.matrix("frame", &data.frame);
    r.subspace("q_min", &data.lift(&data.q_min));
    r.subspace("q_max", &data.lift(&data.q_max));
    let map = |e: PivotalError| CliError::Input(e.to_string());
    match exists_p2(&data, &tol).map_err(map)? {
        P2Decision::Yes { .. } => r.note("a P_2 exists: Q_min lies inside Q_max"),
        P2Decision::No { witness, distance } => {
            r.residual("q_min_outside_q_max", distance);
            r.matrix("witness", &witness);
            r.require(false, "no P_2 exists: Q_min is not inside Q_max");
            return Ok(Output::report(r));
        }
    }
    match w_isometry(&data, &tol) {
        Ok(w) => {
            r.check("w_unitarity", w.unitarity_residual, tol.eq);
            r.matrix("W", &w.matrix);
        }
        Err(e) if pivotal_refusal(&e) => r.require(false, e.to_string()),
        Err(e) => return Err(map(e)),
    }
    match p2_lattice(&data, &tol).map_err(map)? {
        LatticeOutcome::Enumerated(lat) => {
            r.note(format!(
                "lattice: {} admissible subspaces, closed under meet and join: {}, W checks hold: {}",
                lat.members.len(),
                lat.closed.map_or("not checked".to_string(), |c| c.to_string()),
                lat.w_checks_hold
            ));
            r.require(lat.closed != Some(false), "lattice is not closed under meet and join");
            r.require(lat.w_checks_hold, "a lattice member fails the W checks");
            for (k, q) in lat.members.iter().enumerate() {
                r.subspace(&format!("lattice_{k}"), &data.lift(q));
            }
        }
        LatticeOutcome::NotEnumerable(why) => r.note(format!("lattice not enumerated: {why}")),
        LatticeOutcome::NoP2 => {}
    }
    Ok(Output::report(r))
}

pub fn build3(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let data = pivotal_data(file, &tol)?;
    let q1 = match file.params().q1 {
        None | Some(Q1Json::Named(Q1Name::Min)) => data.q_min.clone(),
        Some(Q1Json::Named(Q1Name::Max)) => data.q_max.clone(),
        Some(Q1Json::Basis(_)) => {
            let q = file.q1_basis(&tol)?.expect("basis given");
            match data.coordinates(&q, &tol) {
                Ok(c) => c,
                Err(e) => return Ok(Output::failure("build3", e.to_string())),
            }
        }
    };
    match build_3isometry(&data, &q1, &tol) {
        Ok(b) => {
            let v = validate_model(&b.tuple, &tol);
            if !v.ok {
                let mut r = Report::new("build3");
                add_validation(&mut r, &v, &tol);
                return Ok(Output::report(r));
            }
            Ok(Output::instance(InstanceFile::from_tuple(&b.tuple)))
        }
        Err(e) if pivotal_refusal(&e) => Ok(Output::failure("build3", e.to_string())),
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}

pub fn structure(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let pairs = file.pairs()?;
    let triple =
        ModelTriple::new(pairs[0].u.clone(), pairs[0].p.clone(), &tol).map_err(|e| CliError::Input(e.to_string()))?;
    let mut r = Report::new("structure");
    let map = |e: StructureError| CliError::Input(e.to_string());
    let ext = match extract_tz(&triple, &tol) {
        Ok(x) => x,
        Err(e) if structure_refusal(&e) => return Ok(Output::failure("structure", e.to_string())),
        Err(e) => return Err(map(e)),
    };
    r.check("identification", ext.identification_residual, tol.orth.sqrt());
    r.matrix("T", &ext.tz.t);
    r.matrix("Z", &ext.tz.z);
    r.matrix("Omega", &ext.omega);
    r.note(format!(
        "dim F = {}, dim F' = {}, dim D_T = {}",
        ext.tz.f_dim,
        ext.tz.fp_dim,
        ext.tz.z.ncols() - ext.tz.fp_dim
    ));
    let back = triple_from_tz(ext.tz.f_dim, ext.tz.fp_dim, &ext.tz.t, &ext.tz.z, &tol).map_err(map)?;
    let om = &ext.omega;
    let rebuilt = fro(&(&back.u - om.adjoint() * &triple.u * om)).max(fro(&(&back.p - om.adjoint() * &triple.p * om)));
    r.check("rebuild", rebuilt, tol.eq);
    match nonet_extract(&ext.tz.t, &ext.tz.z, ext.tz.fp_dim, &tol).and_then(|nn| {
        let (z, _) = nonet_build(&nn, &tol)?;
        Ok((nn, z))
    }) {
        Ok((nn, z)) => {
            r.check("nonet_roundtrip", fro(&(z - &ext.tz.z)), tol.eq);
            r.subspace("nonet_R", &nn.r);
            r.subspace("nonet_R_star", &nn.r_star);
            r.matrix("nonet_X", &nn.x);
            r.matrix("nonet_X_star", &nn.x_star);
            r.matrix("nonet_Y", &nn.y);
        }
        Err(e) if structure_refusal(&e) => r.require(false, e.to_string()),
        Err(e) => return Err(map(e)),
    }
    let parts = contraction_parts(&ext.tz.t, &tol).map_err(map)?;
    r.check("reducing", parts.reducing_residual, tol.eq);
    r.check("t_u_unitarity", parts.t_u_unitarity, tol.eq);
    r.matrix("T_u", &parts.t_u);
    r.matrix("T_cnu", &parts.t_cnu);
    let c0 = is_c_dot_zero(&parts.t_cnu, TOL_SPEC).map_err(map)?;
    r.note(format!("T_cnu is of class C_.0: {c0}"));
    match wold_reduction_check(&triple, s.trunc, &tol).map_err(map)? {
        WoldOutcome::Checked(w) => {
            let limit = 10.0 * tol.eq;
            r.check("wold_v1_invariance", w.v1_invariance, limit);
            r.check("wold_v2_invariance", w.v2_invariance, limit);
            r.check("wold_v1_adjoint_invariance", w.v1_adjoint_invariance, limit);
            r.check("wold_v2_adjoint_invariance", w.v2_adjoint_invariance, limit);
            r.check("wold_constant_multiplier", w.constant_multiplier, limit);
            r.check("wold_orthogonality", w.orthogonality, limit);
            r.require(w.unitary_part_matches, "truncated unitary part of V_1 differs from H^2(F_u)");
            r.note(format!("unitary part dimension {}", w.unitary_dim));
            r.notes.extend(w.notes);
        }
        WoldOutcome::HypothesisNotMet { spectral_radius } => r.note(format!(
            "Wold reduction not checked: T_cnu has spectral radius {spectral_radius:.6} and is not of class C_.0"
        )),
    }
    Ok(Output::report(r))
}

fn complex_text(z: Complex64) -> String {
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{}{sign}{}i", crate::json::format_float(z.re), crate::json::format_float(z.im.abs()))
}

pub fn classify_cmd(file: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(file))?;
    let t = file.tuple(&tol)?;
    let mut r = Report::new("classify");
    add_validation(&mut r, &validate_model(&t, &tol), &tol);
    if !r.pass {
        r.note("not a model tuple; classification skipped");
        return Ok(Output::report(r));
    }
    let c = classify(&t, s.trunc, &tol).map_err(|e| CliError::Input(e.to_string()))?;
    let p = &c.purity;
    r.note(format!("multiplicities {:?}, product multiplicity {}", p.multiplicities, p.product_multiplicity));
    r.note(format!(
        "commutant dimension {}, irreducible: {}, proper: {}, pure factors: {:?}",
        p.commutant_dim, p.irreducible, p.proper, p.pure
    ));
    r.require(p.dimension_lower_bound, "irreducible proper tuple with product multiplicity below n");
    r.require(p.multiplicity_one_holds, "small irreducible proper tuple without a multiplicity-one factor");
    match c.canonical2 {
        Some(Ok(k)) => {
            r.matrix("canonical2", &CMatrix::from_row_slice(1, 2, &[k.c, k.theta]));
            r.note(format!("canonical form (c, theta) = ({}, {})", complex_text(k.c), complex_text(k.theta)));
        }
        Some(Err(e)) => r.note(format!("no two-factor canonical form: {e}")),
        None => {}
    }
    match c.canonical3 {
        Some(Ok(k)) => {
            r.matrix("canonical3", &CMatrix::from_row_slice(1, 4, &[k.alpha, k.alpha1, k.theta, k.theta1]));
            r.note("canonical3 columns: alpha, alpha1, theta, theta1");
        }
        Some(Err(e)) => r.note(format!("no three-factor canonical form: {e}")),
        None => {}
    }
    Ok(Output::report(r))
}

pub fn equiv(a: &InstanceFile, b: &InstanceFile, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(Some(a))?;
    let ta = a.tuple(&tol)?;
    let tb = b.tuple(&tol)?;
    let mut r = Report::new("equiv");
    match equivalent_seeded(&ta, &tb, &tol, s.seed) {
        Equivalence::Equivalent(w) => {
            r.check("intertwining", intertwining_residual(&ta, &tb, &w), tol.eq);
            r.matrix("W", &w);
        }
        Equivalence::NotEquivalent(why) => r.require(false, format!("not unitarily equivalent: {why}")),
        Equivalence::Undecided(why) => r.require(false, format!("undecided: {why}")),
    }
    Ok(Output::report(r))
}

/// Parameters of a canonical form: `(c, θ)` or `(α, α_1, θ, θ_1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalParams {
    Two(Canonical2Raw),
    Three(Canonical3),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical2Raw {
    pub c: Complex64,
    pub theta: Complex64,
}

pub fn canonical(params: CanonicalParams, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(None)?;
    let built = match params {
        CanonicalParams::Two(p) => {
            let k = Canonical2::new(p.c, p.theta, &tol).map_err(|e| CliError::Input(e.to_string()))?;
            canonical2_build(&k, &tol)
        }
        CanonicalParams::Three(p) => {
            p.check(&tol).map_err(|e| CliError::Input(e.to_string()))?;
            canonical3_build(&p, &tol).map(|b| b.tuple)
        }
    };
    match built {
        Ok(t) => Ok(Output::instance(InstanceFile::from_tuple(&t))),
        Err(e) if classify_refusal(&e) => Ok(Output::failure("canonical", e.to_string())),
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}

/// Each factor is a list of zeros in the open disk.
pub fn blaschke(factors: &[Vec<Complex64>], window: Option<usize>, s: &Settings) -> Result<Output, CliError> {
    let tol = s.tolerances(None)?;
    let phis = factors
        .iter()
        .map(|z| BlaschkeProduct::new(z.clone(), Complex64::new(1.0, 0.0), &tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let n = window.unwrap_or_else(|| blaschke_window(&phis));
    match model_from_blaschke(&phis, n, &tol) {
        Ok(m) => Ok(Output::instance(InstanceFile::from_tuple(&m.tuple))),
        Err(e) if classify_refusal(&e) => Ok(Output::failure("blaschke", e.to_string())),
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}
