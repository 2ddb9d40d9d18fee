//! Scalar information-theoretic kernels. All entropies and divergences are in
//! bits unless a function name says otherwise.

use crate::error::{domain, usage, Result};
use crate::linalg::{
    cr, eigh, entropy_bits, from_eig, hermitize, inner, is_hermitian, kron, log2_support, max_eig, min_eig,
    partial_trace, pow_psd, support_projector, trace_re, CMat, LN2,
};
use crate::optimizer::{divided_difference_matrix, frechet};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Eigenvalue cutoff used to decide supports.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

/// Hermitian PSD matrix together with its tensor structure and trace.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub matrix: CMat,
    pub dims: Vec<usize>,
    pub trace: f64,
}

impl DensityOperator {
    pub fn new(matrix: CMat, dims: Vec<usize>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || dims.iter().product::<usize>() != n {
            return usage("matrix shape does not match the tensor dimensions");
        }
        if !is_hermitian(&matrix, 1e-12) {
            return domain("matrix is not Hermitian");
        }
        if min_eig(&matrix) < -SUPPORT_CUTOFF {
            return domain("matrix is not positive semidefinite");
        }
        let trace = trace_re(&matrix);
        Ok(Self { matrix: hermitize(&matrix), dims, trace })
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace - 1.0).abs() <= 1e-10
    }
}

/// Classical source `p(x)` with conditional states `ρ_B^x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CqSource {
    pub probs: Vec<f64>,
    #[serde(with = "cmat_serde")]
    pub states: Vec<CMat>,
}

pub(crate) mod cmat_serde {
    use crate::linalg::{c, CMat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    /// Each matrix as `[[ [re, im], ... ], ...]` row-major.
    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Vec<Vec<[f64; 2]>>> = ms
            .iter()
            .map(|m| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let v: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        Ok(v.into_iter()
            .map(|rows| {
                let n = rows.len();
                let m = rows.first().map_or(0, |r| r.len());
                CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1]))
            })
            .collect())
    }
}

impl CqSource {
    pub fn new(probs: Vec<f64>, states: Vec<CMat>) -> Result<Self> {
        let s = Self { probs, states };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.is_empty() || self.probs.len() != self.states.len() {
            return usage("need one conditional state per symbol");
        }
        if self.probs.iter().any(|&p| p < 0.0) || (self.probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return domain("probabilities must be non-negative and sum to one");
        }
        let d = self.states[0].nrows();
        for s in &self.states {
            if s.nrows() != d {
                return usage("conditional states must share one dimension");
            }
            if !DensityOperator::new(s.clone(), vec![d])?.is_normalized() {
                return domain("conditional states must have unit trace");
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> usize {
        self.probs.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].nrows()
    }

    /// Block-diagonal `Σ_x p(x)|x⟩⟨x| ⊗ ρ_B^x`.
    pub fn joint(&self) -> CMat {
        let k = self.alphabet();
        let d = self.dim();
        let mut m = CMat::zeros(k * d, k * d);
        for (x, (p, s)) in self.probs.iter().zip(&self.states).enumerate() {
            m.view_mut((x * d, x * d), (d, d)).copy_from(&(s * cr(*p)));
        }
        m
    }

    /// Random source with full-rank conditional states.
    pub fn random<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Self {
        let mut probs: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        let states = (0..k).map(|_| crate::linalg::random_density(d, d, rng)).collect();
        Self { probs, states }
    }
}

/// Splits a block-diagonal cq matrix into `(p(x)ρ_x)` blocks.
pub fn cq_blocks(joint: &CMat, k: usize) -> Result<Vec<CMat>> {
    let n = joint.nrows();
    if k == 0 || n % k != 0 {
        return usage("cq dimension is not a multiple of the alphabet size");
    }
    let d = n / k;
    for x in 0..k {
        for y in 0..k {
            if x != y && joint.view((x * d, y * d), (d, d)).iter().any(|v| v.norm() > 1e-12) {
                return usage("state is not classical on the first register");
            }
        }
    }
    Ok((0..k).map(|x| joint.view((x * d, x * d), (d, d)).into_owned()).collect())
}

/// Petz Rényi divergence `(α−1)^{-1} log Tr[ρ^α σ^{1−α}]`.
pub fn renyi_divergence(rho: &CMat, sigma: &CMat, alpha: f64) -> Result<f64> {
    if rho.nrows() != sigma.nrows() {
        return usage("dimension mismatch");
    }
    if !(alpha >= 0.0) || (alpha - 1.0).abs() < 1e-15 || !alpha.is_finite() {
        return usage(format!("Rényi order {alpha} not allowed"));
    }
    let (sv, su) = eigh(sigma);
    if alpha > 1.0 {
        // supp ρ ⊆ supp σ: ρ must vanish on the kernel of σ
        let kernel: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= SUPPORT_CUTOFF).collect();
        for &i in &kernel {
            let v = su.column(i);
            let w = (v.adjoint() * rho * v)[(0, 0)].re;
            if w > SUPPORT_CUTOFF {
                return Ok(f64::INFINITY);
            }
        }
    }
    let rp = pow_psd(rho, alpha);
    let sp_vals: Vec<f64> =
        sv.iter().map(|&l| if l > SUPPORT_CUTOFF { l.powf(1.0 - alpha) } else { 0.0 }).collect();
    let sp = from_eig(&sp_vals, &su);
    let t = inner(&rp, &sp);
    if t <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t.log2() / (alpha - 1.0))
}

/// Umegaki relative entropy in bits; `+∞` on support violation.
pub fn relative_entropy(rho: &CMat, sigma: &CMat) -> f64 {
    let (sv, su) = eigh(sigma);
    for i in 0..sv.len() {
        if sv[i] <= SUPPORT_CUTOFF {
            let v = su.column(i);
            if (v.adjoint() * rho * v)[(0, 0)].re > SUPPORT_CUTOFF {
                return f64::INFINITY;
            }
        }
    }
    let lr = log2_support(rho, SUPPORT_CUTOFF);
    let ls = log2_support(sigma, SUPPORT_CUTOFF);
    inner(rho, &(lr - ls))
}

/// Sibson closed form from the blocks `A_x = p(x)ρ_x` (possibly subnormalised).
/// At `α = 0` the limit `log λ_max(Σ_x Π_x)` over the support projectors is used.
pub fn sibson_from_blocks(blocks: &[CMat], alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return usage("Sibson form needs α in [0,1)");
    }
    let d = blocks[0].nrows();
    if alpha == 0.0 {
        let mut acc = CMat::zeros(d, d);
        for b in blocks {
            acc += support_projector(b, SUPPORT_CUTOFF);
        }
        return Ok(max_eig(&hermitize(&acc)).log2());
    }
    let mut acc = CMat::zeros(d, d);
    for b in blocks {
        acc += pow_psd(b, alpha);
    }
    let t = trace_re(&pow_psd(&acc, 1.0 / alpha));
    Ok(-(alpha / (alpha - 1.0)) * t.log2())
}

/// `H↑_α(X|B)` via the closed form.
pub fn conditional_renyi_sibson(source: &CqSource, alpha: f64) -> Result<f64> {
    let blocks: Vec<CMat> = source.probs.iter().zip(&source.states).map(|(p, s)| s * cr(*p)).collect();
    sibson_from_blocks(&blocks, alpha)
}

/// Same as [`conditional_renyi_sibson`] for a block-diagonal joint matrix.
pub fn conditional_renyi_sibson_joint(joint: &CMat, k: usize, alpha: f64) -> Result<f64> {
    sibson_from_blocks(&cq_blocks(joint, k)?, alpha)
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn project_density(m: &CMat) -> CMat {
    let (vals, u) = eigh(m);
    from_eig(&project_simplex(&vals), &u)
}

/// `max_σ −D_α(ρ_XB ‖ I ⊗ σ_B)` by projected gradient ascent with random restarts.
///
/// Only used to cross-check the closed form, so it favours robustness over speed.
pub fn conditional_renyi_direct<R: Rng + ?Sized>(joint: &CMat, k: usize, alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return usage("direct optimisation implemented for α in (0,1)");
    }
    let blocks = cq_blocks(joint, k)?;
    let d = blocks[0].nrows();
    if d > 8 {
        return usage("direct optimisation limited to dim σ_B ≤ 8");
    }
    // −D_α(ρ‖I⊗σ) = (1/(1−α)) log Tr[Q σ^{1−α}] with Q = Σ_x (p_x ρ_x)^α
    let mut q = CMat::zeros(d, d);
    for b in &blocks {
        q += pow_psd(b, alpha);
    }
    let beta = 1.0 - alpha;
    let value = |s: &CMat| -> f64 {
        let t = inner(&q, &pow_psd(s, beta));
        if t <= 0.0 {
            f64::NEG_INFINITY
        } else {
            t.log2() / beta
        }
    };
    let grad = |s: &CMat| -> CMat {
        let (vals, u) = eigh(s);
        let vals: Vec<f64> = vals.iter().map(|&v| v.max(1e-13)).collect();
        let dd = divided_difference_matrix(|t| t.powf(beta), |t| beta * t.powf(beta - 1.0), &vals);
        let g = frechet(&u, &dd, &q);
        let t = inner(&q, &pow_psd(s, beta));
        g / cr(beta * LN2 * t)
    };
    let mut best = f64::NEG_INFINITY;
    for restart in 0..20 {
        let mut s = if restart == 0 {
            CMat::identity(d, d) / cr(d as f64)
        } else {
            crate::linalg::random_density(d, d, rng)
        };
        let mut f = value(&s);
        let mut step = 1.0;
        for _ in 0..5000 {
            let g = grad(&s);
            let mut accepted = false;
            while step > 1e-16 {
                let cand = project_density(&(&s + &g * cr(step)));
                let fc = value(&cand);
                let diff = &cand - &s;
                // Armijo condition on the projected step
                if fc >= f + 1e-4 * inner(&g, &diff) && fc.is_finite() {
                    let gain = fc - f;
                    s = cand;
                    f = fc;
                    accepted = true;
                    step *= 2.0;
                    if gain < 1e-15 && crate::linalg::max_abs(&diff) < 1e-12 {
                        accepted = false;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.max(f);
    }
    Ok(best)
}

/// Von Neumann conditional entropy `H(A|B) = S(AB) − S(B)` with `dims = [dA, dB]`.
pub fn von_neumann_conditional(rho_ab: &CMat, dims: [usize; 2]) -> f64 {
    let rho_b = partial_trace(rho_ab, &dims, &[1]);
    entropy_bits(rho_ab) - entropy_bits(&rho_b)
}

/// Relative entropy variance in bits².
pub fn relative_entropy_variance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if !relative_entropy(rho, sigma).is_finite() {
        return domain("support of ρ is not contained in the support of σ");
    }
    let l = log2_support(rho, SUPPORT_CUTOFF) - log2_support(sigma, SUPPORT_CUTOFF);
    let (rv, ru) = eigh(rho);
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..rv.len() {
        if rv[i] <= SUPPORT_CUTOFF {
            continue;
        }
        let v = ru.column(i).into_owned();
        let lv = &l * &v;
        m1 += rv[i] * (v.adjoint() * &lv)[(0, 0)].re;
        m2 += rv[i] * lv.norm_squared();
    }
    Ok((m2 - m1 * m1).max(0.0))
}

/// Relative entropy variance of a cq state against `I_X ⊗ ρ_B`.
pub fn cq_variance(joint: &CMat, k: usize) -> Result<f64> {
    let d = joint.nrows() / k;
    let rho_b = partial_trace(joint, &[k, d], &[1]);
    relative_entropy_variance(joint, &kron(&CMat::identity(k, k), &rho_b))
}

// ---------------------------------------------------------------------------
// Binary divergences and concentration root-finders.

/// `x ln x − x + 1` evaluated at `x = 1 + u`, accurate for small `u`.
fn g1p(u: f64) -> f64 {
    if u <= -1.0 {
        return 1.0;
    }
    if u.abs() < 1e-2 {
        let mut acc = 0.0;
        let mut pw = u * u;
        for k in 2..14 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * pw / (k * (k - 1)) as f64;
            pw *= u;
        }
        acc
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// Binary relative entropy `D(a ‖ b)` in bits, expressed through the
/// shifts `a/b − 1` and `(1−a)/(1−b) − 1` so that nearby arguments do not cancel.
fn binary_d_shift(b: f64, u0: f64, u1: f64) -> f64 {
    let mut nats = 0.0;
    if b > 0.0 {
        nats += b * g1p(u0);
    } else if u0 != -1.0 {
        return f64::INFINITY;
    }
    if b < 1.0 {
        nats += (1.0 - b) * g1p(u1);
    } else if u1 != -1.0 {
        return f64::INFINITY;
    }
    nats / LN2
}

/// `D(p ‖ q) = p log(p/q) + (1−p) log((1−p)/(1−q))`, bits.
pub fn binary_relative_entropy(p: f64, q: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return f64::NAN;
    }
    let u0 = if q > 0.0 { (p - q) / q } else { if p > 0.0 { f64::INFINITY } else { -1.0 } };
    let u1 = if q < 1.0 { (q - p) / (1.0 - q) } else { if p < 1.0 { f64::INFINITY } else { -1.0 } };
    if u0.is_infinite() || u1.is_infinite() {
        return f64::INFINITY;
    }
    binary_d_shift(q, u0, u1)
}

/// `D(p ‖ p + δ)` evaluated without forming `p + δ` in the ratios.
pub fn binary_d_upper(p: f64, delta: f64) -> f64 {
    let q = p + delta;
    if q >= 1.0 {
        return if p < 1.0 { f64::INFINITY } else { 0.0 };
    }
    binary_d_shift(q, -delta / q, delta / (1.0 - q))
}

/// `D(p + δ ‖ p)`.
pub fn binary_d_lower(p: f64, delta: f64) -> f64 {
    let u0 = if p > 0.0 { delta / p } else { f64::INFINITY };
    let u1 = if p < 1.0 { -delta / (1.0 - p) } else { f64::INFINITY };
    if u0.is_infinite() || u1.is_infinite() {
        return if delta == 0.0 { 0.0 } else { f64::INFINITY };
    }
    binary_d_shift(p, u0, u1)
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalarSolverConfig {
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for ScalarSolverConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_iter: 200 }
    }
}

/// Bisection for the root of an increasing function on `[lo, hi]`, run until
/// the bracket stops shrinking in floating point.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (fl, fh) = (f(lo).abs(), f(hi).abs());
    if fl <= fh {
        lo
    } else {
        hi
    }
}

fn check_eps_n(n: f64, eps: f64) -> Result<()> {
    if !(n >= 1.0) {
        return usage("sample size must be at least 1");
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return usage("failure probability must lie in (0,1]");
    }
    Ok(())
}

/// `δ₁`: `n D(p+δ ‖ p) = −log ε` when `ε ≥ p^n`, otherwise `1 − p`.
/// `log2_eps` is `log₂ ε`, which keeps tiny budgets representable.
pub fn solve_delta1(p: f64, n: f64, log2_eps: f64) -> Result<f64> {
    check_eps_n(n, 2f64.powf(log2_eps).max(f64::MIN_POSITIVE))?;
    if !(0.0..1.0).contains(&p) {
        return domain("δ₁ needs p in [0,1)");
    }
    let target = -log2_eps / n;
    if p == 0.0 || log2_eps < n * p.log2() {
        return Ok(1.0 - p);
    }
    Ok(bisect_increasing(|d| binary_d_lower(p, d) - target, 0.0, 1.0 - p))
}

/// `δ₂`: `n D(p ‖ p+δ) = −log ε`.
pub fn solve_delta2(p: f64, n: f64, log2_eps: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return usage("sample size must be at least 1");
    }
    if log2_eps > 0.0 {
        return usage("failure probability must not exceed 1");
    }
    if !(0.0..1.0).contains(&p) {
        return domain("δ₂ has no root for p outside [0,1)");
    }
    let target = -log2_eps / n;
    if target == 0.0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        // D(0‖δ) = −log(1−δ): closed form 1 − ε^{1/n}
        return Ok(-(-target * LN2).exp_m1());
    }
    Ok(bisect_increasing(|d| binary_d_upper(p, d) - target, 0.0, 1.0 - p))
}

/// Residual of the δ₂ defining equation, `n D(p‖p+δ) + log ε`.
pub fn delta2_residual(p: f64, n: f64, log2_eps: f64, delta: f64) -> f64 {
    n * binary_d_upper(p, delta) + log2_eps
}

pub fn delta1_residual(p: f64, n: f64, log2_eps: f64, delta: f64) -> f64 {
    n * binary_d_lower(p, delta) + log2_eps
}

/// Upper confidence bound on the sifted-key bit error rate.
pub fn solve_r_err(n_sift: f64, n_suc: f64, n_err: f64, log2_eps_cor: f64) -> Result<f64> {
    if n_sift <= 0.0 || n_suc <= 0.0 {
        return domain("r_err needs positive sifted and successful counts");
    }
    if n_err > n_suc || n_err < 0.0 {
        return usage("n_err must lie in [0, n_suc]");
    }
    let total = n_sift + n_suc;
    let pe = n_err / n_suc;
    if pe >= 1.0 {
        return Ok(1.0);
    }
    // the second argument of D is pe + δ with δ = (n_sift/total)(r − pe)
    let delta = solve_delta2(pe, total, log2_eps_cor)?;
    Ok(pe + delta * total / n_sift)
}

/// Residual of the r_err defining equation.
pub fn r_err_residual(n_sift: f64, n_suc: f64, n_err: f64, log2_eps_cor: f64, r: f64) -> f64 {
    let total = n_sift + n_suc;
    let pe = n_err / n_suc;
    let delta = (r - pe) * n_sift / total;
    total * binary_d_upper(pe, delta) + log2_eps_cor
}

/// `log₂ f_q(n, d)` with `f_q(n,d) = (n+d−1)^{(d²−1)/2} / (√(2π (d/e²)^d) Π_{i<d} i!)`.
pub fn log2_fq(n: f64, d: usize) -> f64 {
    let df = d as f64;
    let num = ((df * df - 1.0) / 2.0) * (n + df - 1.0).log2();
    let e2 = std::f64::consts::E.powi(2);
    let den_inner = 2.0 * std::f64::consts::PI * (df / e2).powf(df);
    let mut fact_prod = 0.0;
    let mut fact = 0.0f64;
    for i in 0..d {
        if i > 0 {
            fact += (i as f64).log2();
        }
        fact_prod += fact;
    }
    num - 0.5 * den_inner.log2() - fact_prod
}

/// Seed for the Rényi parameter, `α = (2 ln(1/ε_p) / (n V))^{1/2}` with `V` in nats².
pub fn alpha_heuristic(n_sift: f64, log2_eps_p: f64, v_nats: f64) -> f64 {
    let ln_inv = -log2_eps_p * LN2;
    let a = (2.0 * ln_inv / (n_sift * v_nats)).sqrt();
    if a.is_finite() {
        a.clamp(1e-9, 1.0 - 1e-9)
    } else {
        1.0 - 1e-9
    }
}

/// Shannon entropy of a probability vector, bits.
pub fn shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Convenience for tests: H(X|B) of a source through the joint state.
pub fn source_conditional_entropy(source: &CqSource) -> f64 {
    von_neumann_conditional(&source.joint(), [source.alphabet(), source.dim()])
}
