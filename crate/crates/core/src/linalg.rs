//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works on small Hermitian matrices (at most a few thousand
//! rows), so plain dense eigendecompositions are used throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const LN2: f64 = std::f64::consts::LN_2;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

pub fn diag_real(v: &[f64]) -> CMat {
    let mut m = zeros(v.len());
    for (i, x) in v.iter().enumerate() {
        m[(i, i)] = cr(*x);
    }
    m
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// `(m + m†)/2`, used to wash out rounding asymmetry before eigensolves.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn trace(m: &CMat) -> C64 {
    m.trace()
}

pub fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Hilbert–Schmidt inner product `Re Tr[a† b]`; real for Hermitian arguments.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
/// Returns `(eigenvalues, U)` with `m = U diag(λ) U†`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let se = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn min_eig(m: &CMat) -> f64 {
    eigvalsh(m)[0]
}

pub fn max_eig(m: &CMat) -> f64 {
    *eigvalsh(m).last().unwrap()
}

/// Reassemble `U diag(vals) U†`.
pub fn from_eig(vals: &[f64], u: &CMat) -> CMat {
    let n = vals.len();
    let mut scaled = u.clone();
    for j in 0..n {
        let s = vals[j];
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * u.adjoint()
}

/// Apply a real scalar function to a Hermitian matrix through its spectrum.
pub fn apply_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, u) = eigh(m);
    let fv: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    from_eig(&fv, &u)
}

/// Eigenvalues below this are treated as exact zeros when taking powers.
pub const EIG_CLAMP: f64 = 1e-14;

/// `m^a` for a positive semidefinite matrix; eigenvalues under [`EIG_CLAMP`] map to 0.
pub fn pow_psd(m: &CMat, a: f64) -> CMat {
    apply_fn(m, |x| if x <= EIG_CLAMP { 0.0 } else { x.powf(a) })
}

/// Base-2 logarithm on the support; zero eigenvalues are mapped to 0.
pub fn log2_support(m: &CMat, cutoff: f64) -> CMat {
    apply_fn(m, |x| if x <= cutoff { 0.0 } else { x.log2() })
}

/// Orthogonal projector onto eigenvectors with eigenvalue above `cutoff`.
pub fn support_projector(m: &CMat, cutoff: f64) -> CMat {
    apply_fn(m, |x| if x > cutoff { 1.0 } else { 0.0 })
}

/// Inverse on the support (Moore–Penrose for Hermitian input).
pub fn pinv_herm(m: &CMat, cutoff: f64) -> CMat {
    apply_fn(m, |x| if x.abs() > cutoff { 1.0 / x } else { 0.0 })
}

/// Von Neumann entropy in bits of a PSD matrix (need not be normalised).
pub fn entropy_bits(m: &CMat) -> f64 {
    eigvalsh(m)
        .into_iter()
        .filter(|&x| x > EIG_CLAMP)
        .map(|x| -x * x.log2())
        .sum()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all(ms: &[CMat]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for m in ms {
        out = out.kronecker(m);
    }
    out
}

pub fn ket(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = cr(1.0);
    v
}

pub fn proj(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Partial trace over the subsystems *not* listed in `keep`.
/// `dims` lists local dimensions in tensor order.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let n: usize = dims.iter().product();
    assert_eq!(m.nrows(), n, "partial_trace: dimension mismatch");
    let k = dims.len();
    let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
    let mut out = CMat::zeros(keep_dim, keep_dim);
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; k];
        for s in (0..k).rev() {
            d[s] = idx % dims[s];
            idx /= dims[s];
        }
        d
    };
    let kept_index = |dg: &[usize]| -> usize { keep.iter().fold(0, |acc, &s| acc * dims[s] + dg[s]) };
    for r in 0..n {
        let dr = digits(r);
        for col in 0..n {
            let dc = digits(col);
            let traced_equal = (0..k).filter(|s| !keep.contains(s)).all(|s| dr[s] == dc[s]);
            if traced_equal {
                out[(kept_index(&dr), kept_index(&dc))] += m[(r, col)];
            }
        }
    }
    out
}

/// Random density matrix of the given rank from a Ginibre ensemble.
pub fn random_density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> CMat {
    let g = random_ginibre(d, rank, rng);
    let m = &g * g.adjoint();
    let t = trace_re(&m);
    m / cr(t)
}

pub fn random_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// Random Hermitian matrix with standard-normal entries.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    hermitize(&random_ginibre(d, d, rng))
}

/// Haar-ish random unitary via QR of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = random_ginibre(d, d, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q.clone();
    for j in 0..d {
        let rd = r[(j, j)];
        let phase = if rd.norm() > 0.0 { rd / rd.norm() } else { cr(1.0) };
        for i in 0..d {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// `‖U†U − I‖_max`; small for unitary input.
pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// Real coordinates of a Hermitian matrix in an orthonormal Hermitian basis
/// (diagonal units, then `(E_ij+E_ji)/√2`, `i(E_ij−E_ji)/√2` for i<j).
pub fn herm_to_vec(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            v.push(m[(i, j)].re * s);
            v.push(m[(i, j)].im * -s);
        }
    }
    v
}

pub fn vec_to_herm(v: &[f64], d: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = zeros(d);
    for i in 0..d {
        m[(i, i)] = cr(v[i]);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let re = v[k] * s;
            let im = -v[k + 1] * s;
            m[(i, j)] = c(re, im);
            m[(j, i)] = c(re, -im);
            k += 2;
        }
    }
    m
}

/// The `k`-th element of the orthonormal Hermitian basis used by [`herm_to_vec`].
pub fn herm_basis(k: usize, d: usize) -> CMat {
    let mut v = vec![0.0; d * d];
    v[k] = 1.0;
    vec_to_herm(&v, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn herm_vec_roundtrip_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let va = herm_to_vec(&a);
        let vb = herm_to_vec(&b);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - inner(&a, &b)).abs() < 1e-12);
        assert!(max_abs_diff(&vec_to_herm(&va, 4), &a) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_density(2, 2, &mut rng);
        let b = random_density(3, 3, &mut rng);
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 3], &[0]), &a) < 1e-14);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 3], &[1]), &b) < 1e-14);
    }

    #[test]
    fn eigh_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(5, &mut rng);
        let (v, u) = eigh(&a);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_abs_diff(&from_eig(&v, &u), &a) < 1e-12);
        assert!(unitarity_defect(&random_unitary(5, &mut rng)) < 1e-12);
    }
}
