//! Brute-force simulation of classical source compression with quantum side
//! information, using linear hashing for the encoder and likelihood-type
//! decoders built from universal symmetric states.

use crate::entropy::{conditional_renyi_sibson, CqSource, SUPPORT_CUTOFF};
use crate::error::{capacity, domain, usage, Error, Result};
use crate::field::{FqMatrix, Gf};
use crate::hashing::{enumerate_family, sample_with, HashFamilyKind, HashFamilySpec};
use crate::linalg::{cr, dagger, eigh, hermitize, identity, kron_all, max_abs_diff, CMat};
use crate::schur_weyl::{empirical_entropy, sigma_for_string, MAX_N};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Upper limit on `d^n · |𝒳|^n` for exhaustive simulation.
pub const BRUTE_FORCE_CAP: f64 = 65536.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    FullyUniversal,
    PartiallyUniversal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyChoice {
    /// Average over every surjective member of the given kind.
    Exhaustive { kind: HashFamilyKind },
    /// Monte Carlo over `trials` members drawn with the spec's seed.
    Sampled(HashFamilySpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CompressionExperiment {
    pub source: CqSource,
    pub n: usize,
    pub bins_log: f64,
    pub decoder_kind: DecoderKind,
    pub family: FamilyChoice,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
}

fn default_trials() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExponentPoint {
    pub alpha: f64,
    pub exponent: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    pub exact_perr: f64,
    /// Standard error of `exact_perr` when the family was sampled.
    pub std_err: Option<f64>,
    pub bound_perr: f64,
    pub exponent_curve: Vec<ExponentPoint>,
    pub random_coding_exponent: f64,
    pub sphere_packing_exponent: f64,
    pub family_size: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentOutput {
    pub report: ErrorReport,
    pub config: CompressionExperiment,
    pub seed: Option<u64>,
}

/// `A ÷ B` restricted to the support of `B`, extended by zero elsewhere.
pub fn operator_division_on_support(a: &CMat, b: &CMat) -> Result<CMat> {
    let (vals, u) = eigh(b);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= SUPPORT_CUTOFF {
        return domain("denominator has no support");
    }
    Ok(divide_in_basis(a, &vals, &u))
}

/// `A ÷ B = ∫₀^∞ (B+λ)^{-1} A (B+λ)^{-1} dλ` for invertible `B`.
pub fn operator_division(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return usage("operator division needs equal dimensions");
    }
    let (vals, u) = eigh(b);
    if vals[0] <= 1e-12 {
        return domain(format!("denominator is singular (min eigenvalue {:e})", vals[0]));
    }
    Ok(divide_in_basis(a, &vals, &u))
}

fn log_kernel(x: f64, y: f64) -> f64 {
    if (x - y).abs() <= 1e-9 * x.max(y) {
        2.0 / (x + y)
    } else {
        (x.ln() - y.ln()) / (x - y)
    }
}

fn divide_in_basis(a: &CMat, vals: &[f64], u: &CMat) -> CMat {
    let cut = SUPPORT_CUTOFF * vals.last().copied().unwrap_or(1.0).max(1.0);
    let mut t = dagger(u) * a * u;
    let n = vals.len();
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] *= if vals[i] > cut && vals[j] > cut { log_kernel(vals[i], vals[j]) } else { 0.0 };
        }
    }
    hermitize(&(u * t * dagger(u)))
}

/// All strings of length `n` over `k` symbols, first symbol varying fastest.
fn strings(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let s = code % k;
                    code /= k;
                    s
                })
                .collect()
        })
        .collect()
}

fn weight(kind: DecoderKind, x: &[usize], source: &CqSource) -> f64 {
    match kind {
        DecoderKind::FullyUniversal => (-(x.len() as f64) * empirical_entropy(x, source.alphabet())).exp2(),
        DecoderKind::PartiallyUniversal => x.iter().map(|&s| source.probs[s]).product(),
    }
}

fn hash_value(f: &Gf, h: &FqMatrix, x: &[usize]) -> Vec<u32> {
    let xs: Vec<u32> = x.iter().map(|&s| s as u32).collect();
    h.left_mul_vec(f, &xs)
}

/// The defining integral of `A ÷ B` by adaptive Simpson on `λ = t/(1−t)`, entrywise.
/// Slow; meant for cross-checking [`operator_division`].
pub fn division_by_quadrature(a: &CMat, b: &CMat) -> CMat {
    let d = a.nrows();
    let integrand = |t: f64| -> CMat {
        if t >= 1.0 {
            return CMat::zeros(d, d);
        }
        let lam = t / (1.0 - t);
        let inv = (b + identity(d) * cr(lam)).try_inverse().expect("B + λI is invertible for λ > 0 and B ⪰ 0");
        &inv * a * &inv / cr((1.0 - t) * (1.0 - t))
    };
    fn simpson(f: &dyn Fn(f64) -> CMat, a: f64, b: f64, fa: CMat, fm: CMat, fb: CMat, whole: CMat, depth: u32) -> CMat {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (&fa + &flm * cr(4.0) + &fm) * cr((m - a) / 6.0);
        let right = (&fm + &frm * cr(4.0) + &fb) * cr((b - m) / 6.0);
        let total = &left + &right;
        if depth == 0 || max_abs_diff(&total, &whole) < 1e-12 {
            return total;
        }
        simpson(f, a, m, fa, flm, fm.clone(), left, depth - 1) + simpson(f, m, b, fm, frm, fb, right, depth - 1)
    }
    let (fa, fm, fb) = (integrand(0.0), integrand(0.5), integrand(1.0));
    let whole = (&fa + &fm * cr(4.0) + &fb) * cr(1.0 / 6.0);
    simpson(&integrand, 0.0, 1.0, fa, fm, fb, whole, 40)
}

/// Decoder elements `Y(x)` for every `x` in the preimage of `bin`.
pub fn build_decoder_povm(
    kind: DecoderKind,
    f: &Gf,
    h: &FqMatrix,
    bin: &[u32],
    source: &CqSource,
    n: usize,
) -> Result<Vec<(Vec<usize>, CMat)>> {
    let d = source.dim();
    let pre: Vec<Vec<usize>> = strings(n, source.alphabet()).into_iter().filter(|x| hash_value(f, h, x) == bin).collect();
    if pre.is_empty() {
        return domain("bin has an empty preimage");
    }
    let weighted: Vec<CMat> =
        pre.iter().map(|x| Ok(sigma_for_string(x, d)? * cr(weight(kind, x, source)))).collect::<Result<_>>()?;
    let mut den = CMat::zeros(weighted[0].nrows(), weighted[0].nrows());
    for w in &weighted {
        den += w;
    }
    let den = hermitize(&den);
    let (vals, u) = eigh(&den);
    Ok(pre.into_iter().zip(weighted.iter()).map(|(x, w)| (x, divide_in_basis(w, &vals, &u))).collect())
}

struct Prepared {
    f: Gf,
    m: usize,
    strings: Vec<Vec<usize>>,
    probs: Vec<f64>,
    weighted_sigma: Vec<CMat>,
    rho: Vec<CMat>,
}

fn bins_to_m(exp: &CompressionExperiment, q: usize) -> Result<usize> {
    let m = exp.bins_log / (q as f64).log2();
    let mr = m.round();
    if (m - mr).abs() > 1e-9 || mr < 0.0 {
        return usage(format!("binsLog {} is not a multiple of log|𝒳| for linear hashing", exp.bins_log));
    }
    let mr = mr as usize;
    if mr > exp.n {
        return usage("binsLog exceeds n·log|𝒳|");
    }
    Ok(mr)
}

fn check_caps(exp: &CompressionExperiment) -> Result<()> {
    exp.source.validate()?;
    if exp.n == 0 {
        return usage("n must be positive");
    }
    let k = exp.source.alphabet() as f64;
    let d = exp.source.dim() as f64;
    if exp.n > MAX_N || (d * k).powi(exp.n as i32) > BRUTE_FORCE_CAP {
        return capacity(format!("d^n·|𝒳|^n = {} exceeds the brute-force cap", (d * k).powi(exp.n as i32)));
    }
    Ok(())
}

fn prepare(exp: &CompressionExperiment) -> Result<Prepared> {
    check_caps(exp)?;
    let k = exp.source.alphabet();
    let f = Gf::of_order(k as u32).map_err(|_| Error::Usage(format!("alphabet size {k} is not a prime power")))?;
    let m = bins_to_m(exp, k)?;
    let d = exp.source.dim();
    let strings = strings(exp.n, k);
    let probs: Vec<f64> = strings.iter().map(|x| x.iter().map(|&s| exp.source.probs[s]).product()).collect();
    let weighted_sigma = strings
        .iter()
        .map(|x| Ok(sigma_for_string(x, d)? * cr(weight(exp.decoder_kind, x, &exp.source))))
        .collect::<Result<Vec<_>>>()?;
    let rho = strings.iter().map(|x| kron_all(&x.iter().map(|&s| exp.source.states[s].clone()).collect::<Vec<_>>())).collect();
    Ok(Prepared { f, m, strings, probs, weighted_sigma, rho })
}

/// Error probability of one hash member: `Σ_x p^n(x) Tr[ρ^x (I − Y_{h(x)}(x))]`.
fn member_error(prep: &Prepared, h: &FqMatrix) -> f64 {
    let mut bins: std::collections::BTreeMap<Vec<u32>, Vec<usize>> = Default::default();
    for (i, x) in prep.strings.iter().enumerate() {
        bins.entry(hash_value(&prep.f, h, x)).or_default().push(i);
    }
    let mut terms = Vec::with_capacity(prep.strings.len());
    for members in bins.values() {
        let dim = prep.weighted_sigma[members[0]].nrows();
        let mut den = CMat::zeros(dim, dim);
        for &i in members {
            den += &prep.weighted_sigma[i];
        }
        let (vals, u) = eigh(&hermitize(&den));
        for &i in members {
            if prep.probs[i] == 0.0 {
                continue;
            }
            let y = divide_in_basis(&prep.weighted_sigma[i], &vals, &u);
            let success = crate::linalg::inner(&prep.rho[i], &y);
            terms.push(prep.probs[i] * (1.0 - success));
        }
    }
    pairwise_sum(&terms)
}

/// Pairwise summation for reproducible, accurate totals.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2..=8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn members_for(exp: &CompressionExperiment, prep: &Prepared) -> Result<(Vec<FqMatrix>, bool, Option<u64>)> {
    match &exp.family {
        FamilyChoice::Exhaustive { kind } => Ok((enumerate_family(&prep.f, *kind, exp.n, prep.m)?, true, None)),
        FamilyChoice::Sampled(spec) => {
            if spec.n != exp.n || spec.m != prep.m {
                return usage("hash family shape does not match n and binsLog");
            }
            if spec.field.order() as usize != exp.source.alphabet() {
                return usage("hash family field does not match the source alphabet");
            }
            if exp.trials == 0 {
                return usage("trials must be positive");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let members = (0..exp.trials)
                .map(|_| sample_with(&prep.f, spec.kind, exp.n, prep.m, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            Ok((members, false, Some(spec.seed)))
        }
    }
}

/// Average error over the family, with a standard error when sampled.
pub fn exact_error_probability(exp: &CompressionExperiment) -> Result<(f64, Option<f64>, usize)> {
    let prep = prepare(exp)?;
    let (members, exhaustive, _) = members_for(exp, &prep)?;
    let errs: Vec<f64> = members.par_iter().map(|h| member_error(&prep, h)).collect();
    let mean = pairwise_sum(&errs) / errs.len() as f64;
    let se = if exhaustive || errs.len() < 2 {
        None
    } else {
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64;
        Some((var / errs.len() as f64).sqrt())
    };
    Ok((mean.clamp(0.0, 1.0), se, errs.len()))
}

fn default_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// `H↑_{1−α}` with the `α = 1` endpoint given by the order-zero limit.
fn sibson_complement(source: &CqSource, alpha: f64) -> Result<f64> {
    conditional_renyi_sibson(source, (1.0 - alpha).max(0.0))
}

/// Per-symbol exponent of the theorem bound at `α` (may be negative).
pub fn theorem_exponent(source: &CqSource, n: usize, bins_log: f64, kind: DecoderKind, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Ok(0.0);
    }
    let k = source.alphabet() as f64;
    let d = source.dim() as f64;
    let nf = n as f64;
    let mut dims = k * (d + 2.0) * (d - 1.0);
    if kind == DecoderKind::FullyUniversal {
        dims += 2.0 * (d - 1.0);
    }
    let overhead = (nf + 1.0).log2() / (2.0 * nf) * dims;
    Ok(alpha * (bins_log / nf - sibson_complement(source, alpha)? - overhead))
}

/// Theorem bound, the α-curve, and the two comparison exponents at rate `binsLog/n`.
pub fn theorem_bound(exp: &CompressionExperiment) -> Result<(f64, Vec<ExponentPoint>, f64, f64)> {
    let grid = exp.alpha_grid.clone().unwrap_or_else(default_grid);
    if grid.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
        return usage("α-grid must lie in [0,1]");
    }
    let n = exp.n as f64;
    let mut best = 0.0f64;
    let mut curve = Vec::with_capacity(grid.len());
    for &a in &grid {
        let e = theorem_exponent(&exp.source, exp.n, exp.bins_log, exp.decoder_kind, a)?;
        curve.push(ExponentPoint { alpha: a, exponent: e, bound: (-n * e).exp2().min(1.0) });
        best = best.max(e);
    }
    let rate = exp.bins_log / n;
    Ok(((-n * best).exp2().min(1.0), curve, random_coding_exponent(&exp.source, rate)?, sphere_packing_exponent(&exp.source, rate)?))
}

/// `max_{α∈[0,1]} α (R − H↑_{1/(1+α)})`.
pub fn random_coding_exponent(source: &CqSource, rate: f64) -> Result<f64> {
    grid_max(source, rate, 1.0, 400)
}

/// `sup_{α≥0} α (R − H↑_{1/(1+α)})`, searched on `[0, 64]`.
///
/// The random-coding grid on `[0,1]` is finer than this one, so its maximum
/// is folded in to keep the two exponents ordered.
pub fn sphere_packing_exponent(source: &CqSource, rate: f64) -> Result<f64> {
    Ok(grid_max(source, rate, 64.0, 6400)?.max(random_coding_exponent(source, rate)?))
}

fn grid_max(source: &CqSource, rate: f64, top: f64, steps: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for i in 1..=steps {
        let a = top * i as f64 / steps as f64;
        let h = conditional_renyi_sibson(source, 1.0 / (1.0 + a))?;
        best = best.max(a * (rate - h));
    }
    Ok(best)
}

/// Exact error, theorem bound and comparison exponents in one report.
pub fn run_experiment(exp: &CompressionExperiment) -> Result<ExperimentOutput> {
    let prep_seed = match &exp.family {
        FamilyChoice::Sampled(s) => Some(s.seed),
        FamilyChoice::Exhaustive { .. } => None,
    };
    let (exact, se, size) = exact_error_probability(exp)?;
    let (bound, curve, rc, sp) = theorem_bound(exp)?;
    let margin = 3.0 * se.unwrap_or(0.0) + 1e-10;
    if exact > bound + margin {
        return Err(Error::Invariant(format!("simulated error {exact} exceeds the theorem bound {bound}")));
    }
    let notes = vec![
        "bins enter the exponent as log|B_n|/n".to_string(),
        "alpha ranges over (0,1]".to_string(),
    ];
    Ok(ExperimentOutput {
        report: ErrorReport {
            exact_perr: exact,
            std_err: se,
            bound_perr: bound,
            exponent_curve: curve,
            random_coding_exponent: rc,
            sphere_packing_exponent: sp,
            family_size: size,
            notes,
        },
        config: exp.clone(),
        seed: prep_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, identity, ket, max_abs_diff, min_eig, proj, random_density};

    fn orth_source() -> CqSource {
        CqSource::new(vec![0.5, 0.5], vec![proj(&ket(2, 0)), proj(&ket(2, 1))]).unwrap()
    }

    fn exp(source: CqSource, n: usize, bins_log: f64, kind: DecoderKind) -> CompressionExperiment {
        CompressionExperiment {
            source,
            n,
            bins_log,
            decoder_kind: kind,
            family: FamilyChoice::Exhaustive { kind: HashFamilyKind::AllSurjective },
            trials: 1,
            alpha_grid: None,
        }
    }

    #[test]
    fn division_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density(3, 3, &mut rng);
        assert!(max_abs_diff(&operator_division(&a, &identity(3)).unwrap(), &a) < 1e-12);
        let da = diag_real(&[0.2, 0.5, 0.3]);
        let db = diag_real(&[0.5, 2.0, 4.0]);
        let expect = diag_real(&[0.4, 0.25, 0.075]);
        assert!(max_abs_diff(&operator_division(&da, &db).unwrap(), &expect) < 1e-12);
        assert!(matches!(operator_division(&a, &diag_real(&[1.0, 0.0, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn division_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let a = random_density(2, 2, &mut rng);
            let b = random_density(2, 2, &mut rng) + identity(2) * cr(0.1);
            let exact = operator_division(&a, &b).unwrap();
            let quad = division_by_quadrature(&a, &b);
            assert!(max_abs_diff(&exact, &quad) < 1e-8, "{}", max_abs_diff(&exact, &quad));
            assert!(min_eig(&exact) > -1e-12);
        }
    }

    #[test]
    fn decoder_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Gf::of_order(2).unwrap();
        for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
            let src = CqSource::random(2, 2, &mut rng);
            let h = sample_with(&f, HashFamilyKind::AllSurjective, 3, 1, &mut rng).unwrap();
            for bin in [[0u32], [1u32]] {
                let povm = build_decoder_povm(kind, &f, &h, &bin, &src, 3).unwrap();
                let mut total = CMat::zeros(8, 8);
                for (_, y) in &povm {
                    assert!(min_eig(y) >= -1e-10);
                    total += y;
                }
                // denominators here are full rank, so completeness is the identity
                assert!(max_abs_diff(&total, &identity(8)) < 1e-10);
            }
        }
    }

    #[test]
    fn decoder_singletons_and_uniform() {
        let f = Gf::of_order(2).unwrap();
        let src = orth_source();
        let povm = build_decoder_povm(DecoderKind::FullyUniversal, &f, &FqMatrix::identity(1), &[1], &src, 1).unwrap();
        assert_eq!(povm.len(), 1);
        assert!(max_abs_diff(&povm[0].1, &identity(2)) < 1e-12);
        let same = CqSource::new(vec![0.5, 0.5], vec![identity(2) * cr(0.5), identity(2) * cr(0.5)]).unwrap();
        let povm = build_decoder_povm(DecoderKind::PartiallyUniversal, &f, &FqMatrix::zeros(1, 0), &[], &same, 1).unwrap();
        for (_, y) in povm {
            assert!(max_abs_diff(&y, &(identity(2) * cr(0.5))) < 1e-12);
        }
    }

    #[test]
    fn empty_preimage_is_domain_error() {
        let f = Gf::of_order(2).unwrap();
        let h = FqMatrix::from_rows(&[vec![0]]);
        let r = build_decoder_povm(DecoderKind::FullyUniversal, &f, &h, &[1], &orth_source(), 1);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn exact_error_examples() {
        // injective
        let e = exp(orth_source(), 2, 2.0, DecoderKind::FullyUniversal);
        assert!(exact_error_probability(&e).unwrap().0.abs() < 1e-10);
        // one bin, orthogonal states, partial decoder
        let e = exp(orth_source(), 1, 0.0, DecoderKind::PartiallyUniversal);
        assert!((exact_error_probability(&e).unwrap().0 - 0.5).abs() < 1e-12);
        // deterministic source
        let det = CqSource::new(vec![1.0, 0.0], vec![proj(&ket(2, 0)), proj(&ket(2, 1))]).unwrap();
        let e = exp(det, 2, 1.0, DecoderKind::PartiallyUniversal);
        assert!(exact_error_probability(&e).unwrap().0.abs() < 1e-12);
    }

    #[test]
    fn capacity_and_usage_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let src = CqSource::random(2, 4, &mut rng);
        let e = exp(src, 6, 1.0, DecoderKind::FullyUniversal);
        assert!(matches!(exact_error_probability(&e), Err(Error::Capacity(_))));
        let e = exp(orth_source(), 2, 0.5, DecoderKind::FullyUniversal);
        assert!(matches!(exact_error_probability(&e), Err(Error::Usage(_))));
    }

    #[test]
    fn bound_examples() {
        let src = orth_source();
        let e = CompressionExperiment { alpha_grid: Some(vec![0.0]), ..exp(src.clone(), 2, 1.0, DecoderKind::FullyUniversal) };
        assert_eq!(theorem_bound(&e).unwrap().0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = CqSource::random(2, 2, &mut rng);
        for &a in &[0.1, 0.5, 0.9, 1.0] {
            let full = theorem_exponent(&r, 4, 2.0, DecoderKind::FullyUniversal, a).unwrap();
            let part = theorem_exponent(&r, 4, 2.0, DecoderKind::PartiallyUniversal, a).unwrap();
            assert!(part >= full);
        }
    }

    #[test]
    fn comparison_exponent_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = CqSource::random(2, 2, &mut rng);
        let rate = 0.95;
        let rc = random_coding_exponent(&src, rate).unwrap();
        let sp = sphere_packing_exponent(&src, rate).unwrap();
        assert!(rc <= sp + 1e-12);
        for i in 1..=20 {
            let a = i as f64 / 20.0;
            let part = theorem_exponent(&src, 1000, 1000.0 * rate, DecoderKind::PartiallyUniversal, a).unwrap();
            assert!(part <= rc + 1e-12);
        }
    }

    #[test]
    fn simulated_error_below_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for m in 0..=n {
                let src = CqSource::random(2, 2, &mut rng);
                for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
                    let out = run_experiment(&exp(src.clone(), n, m as f64, kind)).unwrap();
                    assert!(out.report.exact_perr <= out.report.bound_perr + 1e-10);
                }
            }
        }
    }

    #[test]
    fn sampled_family_reports_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let src = CqSource::random(2, 2, &mut rng);
        let spec = HashFamilySpec {
            kind: HashFamilyKind::ToeplitzBased,
            n: 3,
            m: 2,
            field: crate::field::FiniteFieldSpec::new(2, 1).unwrap(),
            seed: 5,
        };
        let e = CompressionExperiment { family: FamilyChoice::Sampled(spec), trials: 10, ..exp(src, 3, 2.0, DecoderKind::FullyUniversal) };
        let (p, se, size) = exact_error_probability(&e).unwrap();
        assert_eq!(size, 10);
        assert!(se.is_some());
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn report_round_trip() {
        let out = run_experiment(&exp(orth_source(), 2, 1.0, DecoderKind::PartiallyUniversal)).unwrap();
        let s = serde_json::to_string(&out).unwrap();
        let back: ExperimentOutput = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
