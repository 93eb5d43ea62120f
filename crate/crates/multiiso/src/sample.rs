//! Seeded random generators for matrices, subspaces and valid model tuples.
//!
//! Used by the test suites and by the randomized equivalence search. Every
//! generator takes the RNG explicitly so results are reproducible.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::classify::{canonical3_build, Canonical3};
use crate::model::{complete_tuple, ModelTuple, Pair};
use crate::numcore::{
    c, diag, direct_sum, identity, subspace_complement, zeros, CMatrix, Subspace, Tolerances,
};
use crate::structure::{defect, nonet_dims, nonet_feasible_dims, Nonet};

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// Haar-distributed unitary via QR with the phase correction.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    if n == 0 {
        return zeros(0, 0);
    }
    let qr = ginibre(rng, n, n).qr();
    let (q, r) = qr.unpack();
    let phases: Vec<Complex64> = (0..n)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0, 0.0)
            }
        })
        .collect();
    q * diag(&phases)
}

/// Orthogonal projection of the given rank onto a random subspace.
pub fn projection<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let w = unitary(rng, n);
    let cols = w.columns(0, rank.min(n));
    &cols * cols.adjoint()
}

pub fn unit_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(1.0, t)
}

/// Point of the open disk with modulus below `radius`.
pub fn disk_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let rho: f64 = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(rho, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Contraction with singular values drawn from `[0, max_norm]`.
pub fn contraction<R: Rng + ?Sized>(rng: &mut R, n: usize, max_norm: f64) -> CMatrix {
    let sv: Vec<Complex64> = (0..n)
        .map(|_| c(max_norm * rng.random::<f64>(), 0.0))
        .collect();
    unitary(rng, n) * diag(&sv) * unitary(rng, n)
}

/// Commuting unitaries: simultaneously diagonal in a random basis.
pub fn commuting_unitaries<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (CMatrix, CMatrix) {
    let w = unitary(rng, n);
    let a: Vec<Complex64> = (0..n).map(|_| unit_complex(rng)).collect();
    let b: Vec<Complex64> = (0..n).map(|_| unit_complex(rng)).collect();
    let wh = w.adjoint();
    (&w * diag(&a) * &wh, &w * diag(&b) * &wh)
}

/// Random (U, P) with P of random rank.
pub fn pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Pair {
    let rank = rng.random_range(0..=n);
    Pair::new(unitary(rng, n), projection(rng, n, rank))
}

/// Two-factor model tuple completed from a random pair.
pub fn two_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ModelTuple {
    complete_tuple(&[pair(rng, n)], &Tolerances::default()).expect("n = 2 completion is vacuous")
}

/// Three-factor tuple `((λU, P), (Uᴴ, I − UPUᴴ), (λ̄I, 0))` from a random pair.
pub fn scalar_extension<R: Rng + ?Sized>(rng: &mut R, n: usize, lambda: Complex64) -> ModelTuple {
    let base = pair(rng, n);
    let u = &base.u;
    let p2 = identity(n) - u * &base.p * u.adjoint();
    let pairs = vec![
        Pair::new(u * lambda, base.p.clone()),
        Pair::new(u.adjoint(), p2),
        Pair::new(identity(n) * lambda.conj(), zeros(n, n)),
    ];
    ModelTuple::new(pairs, &Tolerances::default()).expect("unitary and projection entries")
}

/// One-dimensional three-factor tuple: scalars with product one, one projection.
pub fn scalar_block<R: Rng + ?Sized>(rng: &mut R) -> ModelTuple {
    let a = unit_complex(rng);
    let b = unit_complex(rng);
    let units = [a, b, (a * b).conj()];
    let hot = rng.random_range(0..3);
    let pairs = (0..3)
        .map(|k| {
            let p = if k == hot { 1.0 } else { 0.0 };
            Pair::new(identity(1) * units[k], identity(1) * c(p, 0.0))
        })
        .collect();
    ModelTuple::new(pairs, &Tolerances::default()).expect("scalar entries")
}

pub fn canonical3_params<R: Rng + ?Sized>(rng: &mut R) -> Canonical3 {
    Canonical3 {
        alpha: disk_point(rng, 0.9),
        alpha1: disk_point(rng, 0.9),
        theta: unit_complex(rng),
        theta1: unit_complex(rng),
    }
}

/// Valid model three-tuple of the given dimension: a direct sum of scalar
/// extensions, canonical three-dimensional blocks and one-dimensional blocks,
/// each with its factors shuffled, conjugated by a random unitary.
pub fn three_tuple<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ModelTuple {
    let tol = Tolerances::default();
    let mut left = dim;
    let mut acc: Option<ModelTuple> = None;
    while left > 0 {
        let size = rng.random_range(1..=left.min(4));
        let block = if size == 3 && rng.random_bool(0.5) {
            canonical3_build(&canonical3_params(rng), &tol)
                .expect("canonical parameters inside the disk")
                .tuple
        } else if size == 1 && rng.random_bool(0.5) {
            scalar_block(rng)
        } else {
            let lambda = unit_complex(rng);
            scalar_extension(rng, size, lambda)
        };
        let mut order = [0usize, 1, 2];
        order.shuffle(rng);
        let block = block.permuted(&order);
        acc = Some(match acc {
            None => block,
            Some(prev) => prev.direct_sum(&block).expect("same length"),
        });
        left -= size;
    }
    let t = acc.expect("dim at least one");
    t.conjugate(&unitary(rng, dim))
}

/// Valid model tuple with `n ∈ {2, 3}` factors.
pub fn valid_tuple<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> ModelTuple {
    match n {
        2 => two_tuple(rng, dim),
        3 => three_tuple(rng, dim),
        _ => panic!("valid_tuple supports n = 2 or 3"),
    }
}

/// First `n − 1` pairs of a valid model n-tuple.
pub fn valid_prefix<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> Vec<Pair> {
    let t = valid_tuple(rng, n, dim);
    t.pairs()[..n - 1].to_vec()
}

/// Contraction with `ones` singular values equal to one and the rest below `0.95`.
pub fn contraction_with_ones<R: Rng + ?Sized>(rng: &mut R, n: usize, ones: usize) -> CMatrix {
    let sv: Vec<Complex64> = (0..n)
        .map(|k| c(if k < ones { 1.0 } else { 0.95 * rng.random::<f64>() }, 0.0))
        .collect();
    unitary(rng, n) * diag(&sv) * unitary(rng, n)
}

/// Contraction `T` on `C^f` (sometimes partially isometric) and a unitary
/// `Z` of the matching size for `dim 𝔉′ = fp`.
pub fn tz_pair<R: Rng + ?Sized>(rng: &mut R, f: usize, fp: usize, tol: &Tolerances) -> (CMatrix, CMatrix) {
    let ones = if rng.random_bool(0.3) { rng.random_range(0..=f) } else { 0 };
    let t = contraction_with_ones(rng, f, ones);
    let d = defect(&t, tol).expect("contraction").d();
    (t, unitary(rng, d + fp))
}

/// Random nonet on `C^f`, `C^fp`, or `None` when the drawn defect
/// dimensions are infeasible.
pub fn nonet<R: Rng + ?Sized>(rng: &mut R, f: usize, fp: usize, tol: &Tolerances) -> Option<Nonet> {
    let ones = rng.random_range(0..=f);
    let t = contraction_with_ones(rng, f, ones);
    let ones_p = rng.random_range(0..=fp);
    let tp = contraction_with_ones(rng, fp, ones_p);
    let dims = nonet_dims(&t, &tp, tol).expect("contractions");
    if !nonet_feasible_dims(dims) {
        return None;
    }
    let [dt, ds, dtp, dtps] = dims;
    let r = dt - dtps;
    let random_sub = |rng: &mut R, n: usize, k: usize| {
        Subspace::from_orthonormal(&unitary(rng, n).columns(0, k).into_owned())
    };
    let r_sub = random_sub(rng, dt, r);
    let rs_sub = random_sub(rng, ds, r);
    let x_star = subspace_complement(&r_sub).basis() * unitary(rng, dtps);
    let x = subspace_complement(&rs_sub).basis() * unitary(rng, dtp);
    let y = rs_sub.basis() * unitary(rng, r) * r_sub.basis().adjoint();
    Some(Nonet {
        t,
        tp,
        r: r_sub,
        r_star: rs_sub,
        x,
        x_star,
        y,
    })
}

/// Doubly commuting (U, P): U block diagonal with respect to P.
pub fn doubly_commuting_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Pair {
    let rank = rng.random_range(0..=n);
    let block = direct_sum(&unitary(rng, n - rank), &unitary(rng, rank));
    let p = direct_sum(&zeros(n - rank, n - rank), &identity(rank));
    Pair::new(block, p).conjugate(&unitary(rng, n))
}
