//! B92 protocol model and finite-size key lengths.
//!
//! Alice prepares `ψ_a = β|0̃⟩ + (−1)^a α|1̃⟩` with `|0̃⟩, |1̃⟩` the X-basis
//! vectors. In the entanglement-based picture Bob applies the coherent filter
//! `K = Σ_i |i⟩⟨ψ⊥_{i⊕1}| / √2`, after which bit and phase errors are read off
//! five two-qubit measurement operators. Two analyses turn observed counts into
//! a key length: a conventional one that bounds the phase-error pattern through
//! a Sanov-type argument, and a universal one that bounds a conditional Rényi
//! entropy of the filtered, phase-twirled state.

use crate::entropy::{
    alpha_heuristic, h2, log2_fq, relative_entropy_variance, solve_delta1, solve_delta2, solve_r_err,
};
use crate::error::{domain, usage, Error, Result};
use crate::linalg::{
    cr, diag_real, entropy_bits, from_eig, eigh, hermitize, identity, inner, kron, log2_support, proj, trace_re, CMat,
    CVec, LN2,
};
use crate::optimizer::{
    divided_difference_matrix, frechet, i_projection, joint_divergence_minimizer, maximize_concave, sequential_linearization, AffineConstraint, ChannelData, Composed,
    ConcaveObjective, KrausMap, OuterConfig, ProbabilitySet, Relation, RenyiObjective, SigmaObjective, SolverConfig,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

pub const DEFAULT_AMP: f64 = 0.38;

fn xt(c: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![cr(s), cr(if c == 0 { s } else { -s })])
}

fn zk(c: usize) -> CVec {
    crate::linalg::ket(2, c)
}

#[derive(Clone, Debug)]
pub struct B92States {
    pub psi: [CVec; 2],
    pub perp: [CVec; 2],
    /// Coherent filter `K`; the filter map is `ρ ↦ KρK†`.
    pub filter: CMat,
}

pub fn build_states_and_filter(amp: f64) -> Result<B92States> {
    if !(amp > 0.0 && amp < std::f64::consts::FRAC_1_SQRT_2) {
        return usage(format!("state amplitude {amp} outside (0, 1/√2)"));
    }
    let b = (1.0 - amp * amp).sqrt();
    let psi = [xt(0) * cr(b) + xt(1) * cr(amp), xt(0) * cr(b) - xt(1) * cr(amp)];
    let perp = [xt(0) * cr(amp) - xt(1) * cr(b), xt(0) * cr(amp) + xt(1) * cr(b)];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let filter = (zk(0) * perp[1].adjoint() + zk(1) * perp[0].adjoint()) * cr(s);
    Ok(B92States { psi, perp, filter })
}

#[derive(Clone, Debug)]
pub struct PovmSet {
    pub fil: CMat,
    pub bit: CMat,
    pub ph: CMat,
    pub bitph: CMat,
    pub minus: CMat,
}

impl PovmSet {
    /// Operators for the four filtered outcomes (no error, phase only, bit only, both).
    pub fn patterns(&self) -> [CMat; 4] {
        [
            &self.fil - &self.bit - &self.ph + &self.bitph,
            &self.ph - &self.bitph,
            &self.bit - &self.bitph,
            self.bitph.clone(),
        ]
    }

    /// The four pattern operators followed by the rejected-filter outcome.
    pub fn outcome_operators(&self) -> Vec<CMat> {
        let mut v = self.patterns().to_vec();
        v.push(identity(4) - &self.fil);
        v
    }
}

pub fn build_povms(amp: f64) -> Result<PovmSet> {
    let st = build_states_and_filter(amp)?;
    let b2 = 1.0 - amp * amp;
    let i2 = identity(2);
    let k = &st.filter;
    let fil = kron(&i2, &(k.adjoint() * k));
    let bit = (kron(&proj(&zk(0)), &proj(&st.perp[0])) + kron(&proj(&zk(1)), &proj(&st.perp[1]))) * cr(0.5);
    let ph = kron(&proj(&xt(0)), &proj(&xt(1))) * cr(b2) + kron(&proj(&xt(1)), &proj(&xt(0))) * cr(amp * amp);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = (kron_vec(&zk(0), &zk(1)) - kron_vec(&zk(1), &zk(0))) * cr(s);
    let kk = kron(&i2, k);
    let bitph = kk.adjoint() * proj(&singlet) * &kk;
    let minus = kron(&proj(&xt(1)), &i2);
    Ok(PovmSet {
        fil: hermitize(&fil),
        bit: hermitize(&bit),
        ph: hermitize(&ph),
        bitph: hermitize(&bitph),
        minus,
    })
}

fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

/// `ρ_p = (1−p)|Φ⟩⟨Φ| + p ρ_A ⊗ I/2` with `|Φ⟩ = Σ_a |a⟩|ψ_a⟩/√2`.
pub fn depolarized_state(amp: f64, p: f64) -> Result<CMat> {
    if !(0.0..=1.0).contains(&p) {
        return usage(format!("depolarizing parameter {p} outside [0,1]"));
    }
    let st = build_states_and_filter(amp)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = (kron_vec(&zk(0), &st.psi[0]) + kron_vec(&zk(1), &st.psi[1])) * cr(s);
    let pure = proj(&phi);
    let rho_a = crate::linalg::partial_trace(&pure, &[2, 2], &[0]);
    Ok(pure * cr(1.0 - p) + kron(&rho_a, &(identity(2) * cr(0.5))) * cr(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStats {
    pub q_fil: f64,
    pub q_bit: f64,
    pub q_ph: f64,
    pub q_bitph: f64,
    pub q_minus: f64,
}

pub fn expected_statistics(amp: f64, p: f64) -> Result<ExpectedStats> {
    let rho = depolarized_state(amp, p)?;
    let m = build_povms(amp)?;
    Ok(ExpectedStats {
        q_fil: inner(&m.fil, &rho),
        q_bit: inner(&m.bit, &rho).max(0.0),
        q_ph: inner(&m.ph, &rho),
        q_bitph: inner(&m.bitph, &rho).max(0.0),
        q_minus: inner(&m.minus, &rho),
    })
}

/// Round counts. Real-valued so that expected statistics can be used directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub n_extr: f64,
    pub n_test: f64,
    pub n_trash: f64,
}

impl Splits {
    pub fn thirds(n_tot: f64) -> Self {
        Self { n_extr: n_tot / 3.0, n_test: n_tot / 3.0, n_trash: n_tot / 3.0 }
    }

    pub fn total(&self) -> f64 {
        self.n_extr + self.n_test + self.n_trash
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedStats {
    /// Filter successes among the extraction rounds.
    pub n_sift: f64,
    /// Filter successes among the test rounds.
    pub n_suc: f64,
    /// Bit errors among the test-round successes.
    pub n_err: f64,
    /// Ceiling on the trash-round count of the `|1̃⟩` outcome.
    pub nbar3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMode {
    Sampled,
    Expected,
}

/// Expected or binomially sampled counts for the given splits.
pub fn observed_statistics(
    amp: f64,
    p: f64,
    splits: &Splits,
    log2_eps1: f64,
    mode: StatsMode,
    seed: u64,
) -> Result<ObservedStats> {
    let e = expected_statistics(amp, p)?;
    let a2 = amp * amp;
    let nbar3 = splits.n_trash * (a2 + solve_delta1(a2, splits.n_trash, log2_eps1)?);
    let err_given_suc = if e.q_fil > 0.0 { (e.q_bit / e.q_fil).clamp(0.0, 1.0) } else { 0.0 };
    match mode {
        StatsMode::Expected => Ok(ObservedStats {
            n_sift: splits.n_extr * e.q_fil,
            n_suc: splits.n_test * e.q_fil,
            n_err: splits.n_test * e.q_bit,
            nbar3,
        }),
        StatsMode::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |n: f64, q: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
                let b = Binomial::new(n.round() as u64, q.clamp(0.0, 1.0)).map_err(|e| Error::Domain(e.to_string()))?;
                Ok(b.sample(rng) as f64)
            };
            let n_sift = draw(splits.n_extr, e.q_fil, &mut rng)?;
            let n_suc = draw(splits.n_test, e.q_fil, &mut rng)?;
            let n_err = draw(n_suc, err_given_suc, &mut rng)?;
            Ok(ObservedStats { n_sift, n_suc, n_err, nbar3 })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    FiniteSize,
    Asymptotic,
}

/// Affine constraints on the two-qubit state implied by the observed counts.
pub fn constraint_set_b(
    stats: &ObservedStats,
    splits: &Splits,
    log2_eps2: f64,
    povms: &PovmSet,
    amp: f64,
    mode: ConstraintMode,
) -> Result<Vec<AffineConstraint>> {
    let r_fil = stats.n_sift / splits.n_extr;
    let r_bit = stats.n_err / splits.n_test;
    if !(0.0..=1.0).contains(&r_fil) || !(0.0..=1.0).contains(&r_bit) || stats.n_err > stats.n_suc {
        return domain("observed counts are inconsistent with the splits");
    }
    match mode {
        ConstraintMode::Asymptotic => Ok(vec![
            AffineConstraint::new(povms.fil.clone(), Relation::Eq, r_fil),
            AffineConstraint::new(povms.bit.clone(), Relation::Le, r_bit),
            AffineConstraint::new(povms.minus.clone(), Relation::Le, amp * amp),
        ]),
        ConstraintMode::FiniteSize => {
            let lo = r_fil - delta2_or_full(1.0 - r_fil, splits.n_extr, log2_eps2 - 1.0)?;
            let hi = r_fil + delta2_or_full(r_fil, splits.n_extr, log2_eps2 - 1.0)?;
            let bit = r_bit + delta2_or_full(r_bit, splits.n_test, log2_eps2)?;
            let r3 = (stats.nbar3 / splits.n_trash).min(1.0);
            let minus = r3 + delta2_or_full(r3, splits.n_trash, log2_eps2)?;
            Ok(vec![
                AffineConstraint::new(povms.fil.clone(), Relation::Ge, lo),
                AffineConstraint::new(povms.fil.clone(), Relation::Le, hi),
                AffineConstraint::new(povms.bit.clone(), Relation::Le, bit),
                AffineConstraint::new(povms.minus.clone(), Relation::Le, minus),
            ])
        }
    }
}

fn delta2_or_full(p: f64, n: f64, log2_eps: f64) -> Result<f64> {
    if p >= 1.0 {
        Ok(0.0)
    } else {
        solve_delta2(p, n, log2_eps)
    }
}

// ---------------------------------------------------------------------------
// Secrecy budget

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Conventional,
    Universal,
}

/// Budget components in log₂ form. `s` is present for the conventional analysis only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecyBudget {
    pub log2_eps1: f64,
    pub log2_eps2: f64,
    pub s: Option<f64>,
    pub log2_fq: f64,
}

fn log2_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp2()).sum::<f64>().log2()
}

impl SecrecyBudget {
    /// `log₂ ε_sec` with `ε_sec = √(2(ε₁ + 4ε₂ f_q [+ 2^{−s}]))`.
    pub fn log2_eps_sec(&self) -> f64 {
        let mut terms = vec![self.log2_eps1, 2.0 + self.log2_eps2 + self.log2_fq];
        if let Some(s) = self.s {
            terms.push(-s);
        }
        0.5 * (1.0 + log2_sum(&terms))
    }
}

/// Linear-domain form of the secrecy assembly, for direct use with small numbers.
pub fn secrecy_from_components(eps1: f64, eps2: f64, two_pow_minus_s: Option<f64>, n_tot: f64) -> f64 {
    let fq = log2_fq(n_tot, 4).exp2();
    (2.0 * (eps1 + 4.0 * eps2 * fq + two_pow_minus_s.unwrap_or(0.0))).sqrt()
}

/// Equal split of the inner budget `ε_sec²/2` across the analysis's components.
pub fn secrecy_budget(analysis: Analysis, log2_eps_sec: f64, n_tot: f64) -> Result<SecrecyBudget> {
    if !(log2_eps_sec < 0.0) {
        return domain("target secrecy must be below one");
    }
    let inner_log = 2.0 * log2_eps_sec - 1.0;
    let parts = match analysis {
        Analysis::Conventional => 3.0f64,
        Analysis::Universal => 2.0,
    };
    let each = inner_log - parts.log2();
    let fq = log2_fq(n_tot, 4);
    Ok(SecrecyBudget {
        log2_eps1: each,
        log2_eps2: each - 2.0 - fq,
        s: (analysis == Analysis::Conventional).then_some(-each),
        log2_fq: fq,
    })
}

// ---------------------------------------------------------------------------
// Objectives

/// Sifting map and phase twirl of the filtered B92 state.
pub fn channel_data(amp: f64) -> Result<ChannelData> {
    let st = build_states_and_filter(amp)?;
    let za = kron(&diag_real(&[1.0, -1.0]), &identity(2));
    Ok(ChannelData { sift: KrausMap { ops: vec![kron(&identity(2), &st.filter)] }, twirl: vec![identity(4), za] })
}

/// `H(X|A'B') = log|𝒳| + S(σ̂) − S(𝒫(σ̂))` of the normalised filtered state.
struct PhaseEntropy {
    data: ChannelData,
}

impl SigmaObjective for PhaseEntropy {
    fn value_grad(&self, sigma: &CMat) -> Result<(f64, CMat)> {
        let t = trace_re(sigma);
        if t <= 0.0 {
            return domain("filtered state vanishes");
        }
        let s = sigma / cr(t);
        let ps = hermitize(&self.data.twirl(&s));
        let value = self.data.log_alphabet() + entropy_bits(&s) - entropy_bits(&ps);
        let (vals, u) = eigh(&s);
        let log_s = from_eig(&vals.iter().map(|v| v.max(f64::MIN_POSITIVE).log2()).collect::<Vec<_>>(), &u);
        let g = self.data.twirl(&log2_support(&ps, 0.0)) - log_s;
        let g = (&g - identity(4) * cr(inner(&g, &s))) / cr(t);
        Ok((value, hermitize(&g)))
    }

    fn hessian_apply(&self, sigma: &CMat, dsigma: &CMat) -> Option<Result<CMat>> {
        let t = trace_re(sigma);
        if t <= 0.0 {
            return Some(domain("filtered state vanishes"));
        }
        let s = sigma / cr(t);
        let dt = trace_re(dsigma);
        let ds = (dsigma - &s * cr(dt)) / cr(t);
        let ps = hermitize(&self.data.twirl(&s));
        let log2c = |v: f64| v.max(f64::MIN_POSITIVE).log2();
        let dlog2c = |v: f64| 1.0 / (v.max(f64::MIN_POSITIVE) * LN2);
        let (vs, us) = eigh(&s);
        let (vp, up) = eigh(&ps);
        let log_s = from_eig(&vs.iter().map(|&v| log2c(v)).collect::<Vec<_>>(), &us);
        let g_full = self.data.twirl(&log2_support(&ps, 0.0)) - log_s;
        let dd_s = divided_difference_matrix(log2c, dlog2c, &vs);
        let dd_p = divided_difference_matrix(log2c, dlog2c, &vp);
        let dg = self.data.twirl(&frechet(&up, &dd_p, &self.data.twirl(&ds))) - frechet(&us, &dd_s, &ds);
        let g = (&g_full - identity(4) * cr(inner(&g_full, &s))) / cr(t);
        let out = (dg - identity(4) * cr(inner(&g_full, &ds))) / cr(t) - g * cr(dt / t);
        Some(Ok(hermitize(&out)))
    }
}

/// `f(P) = Σ_b (P_b0 + P_b1) h(P_b1 / (P_b0 + P_b1))` for the four pattern weights.
pub fn pattern_entropy_unnormalized(p: &[f64; 4]) -> f64 {
    let part = |a: f64, b: f64| if a + b > 0.0 { (a + b) * h2((b / (a + b)).clamp(0.0, 1.0)) } else { 0.0 };
    part(p[0], p[1]) + part(p[2], p[3])
}

/// `H(ph|bit)` of a normalised pattern vector.
pub fn phase_given_bit_entropy(p: &[f64; 4]) -> f64 {
    let s: f64 = p.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    pattern_entropy_unnormalized(p) / s
}

fn pattern_gradient(p: &[f64; 4]) -> [f64; 4] {
    let floor = 1e-300;
    let g = |a: f64, b: f64| ((a + b).max(floor) / a.max(floor)).log2();
    [g(p[0], p[1]), g(p[1], p[0]), g(p[2], p[3]), g(p[3], p[2])]
}

/// `f(P(ρ)) − λ Tr[ρ M_fil]`, concave in `ρ`.
struct PatternObjective<'a> {
    ops: &'a [CMat; 4],
    fil: &'a CMat,
    lambda: f64,
}

impl<'a> PatternObjective<'a> {
    fn weights(&self, rho: &CMat) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| inner(&self.ops[i], rho).max(0.0))
    }
}

impl<'a> ConcaveObjective for PatternObjective<'a> {
    fn value(&self, rho: &CMat) -> Result<f64> {
        Ok(pattern_entropy_unnormalized(&self.weights(rho)) - self.lambda * inner(self.fil, rho))
    }

    fn gradient(&self, rho: &CMat) -> Result<CMat> {
        let g = pattern_gradient(&self.weights(rho));
        let mut out = self.fil * cr(-self.lambda);
        for i in 0..4 {
            out += &self.ops[i] * cr(g[i]);
        }
        Ok(out)
    }

    fn functional_hessian(&self, rho: &CMat) -> Option<Result<(Vec<CMat>, DMatrix<f64>)>> {
        Some(Ok((self.ops.to_vec(), pattern_hessian(&self.weights(rho)))))
    }
}

/// Hessian of [`pattern_entropy_unnormalized`]: per bit value, the 2×2 block of
/// `s log s − a log a − b log b`.
fn pattern_hessian(p: &[f64; 4]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(4, 4);
    for blk in [0usize, 2] {
        let (a, b) = (p[blk].max(1e-300), p[blk + 1].max(1e-300));
        let s = a + b;
        h[(blk, blk)] = (1.0 / s - 1.0 / a) / LN2;
        h[(blk + 1, blk + 1)] = (1.0 / s - 1.0 / b) / LN2;
        h[(blk, blk + 1)] = 1.0 / (s * LN2);
        h[(blk + 1, blk)] = 1.0 / (s * LN2);
    }
    h
}

#[derive(Clone, Debug)]
pub struct WorstCase {
    pub value: f64,
    pub upper_bound: f64,
    pub rho: CMat,
}

/// `max_{ρ∈ℬ} H(ph|bit)` by Dinkelbach iterations on the ratio `f(P(ρ)) / Tr[ρ M_fil]`.
pub fn worst_phase_given_bit(povms: &PovmSet, constraints: &[AffineConstraint], cfg: &SolverConfig) -> Result<WorstCase> {
    let ops = povms.patterns();
    let fil_min = min_filter(constraints);
    let mut lambda = 0.0;
    let mut last = None;
    for _ in 0..30 {
        let obj = PatternObjective { ops: &ops, fil: &povms.fil, lambda };
        let rep = maximize_concave(&obj, 4, constraints, cfg)?;
        let f = inner(&povms.fil, &rep.rho);
        let ratio = pattern_entropy_unnormalized(&obj.weights(&rep.rho)) / f;
        let ub = lambda + rep.upper_bound.max(0.0) / fil_min;
        let done = rep.value <= 1e-12 * lambda.max(1e-3) || ratio <= lambda + 1e-13;
        last = Some(WorstCase { value: ratio.max(lambda), upper_bound: ub.max(ratio), rho: rep.rho });
        if done {
            break;
        }
        lambda = ratio;
    }
    last.ok_or_else(|| Error::Invariant("no Dinkelbach iterate".into()))
}

fn min_filter(constraints: &[AffineConstraint]) -> f64 {
    // the first constraint is always on M_fil
    constraints[0].bound.max(1e-300)
}

// ---------------------------------------------------------------------------
// Key lengths

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl AlphaChoice {
    pub const AUTO: AlphaChoice = AlphaChoice::Auto(AutoTag::Auto);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyLengthResult {
    pub analysis: Analysis,
    pub alpha_renyi: Option<f64>,
    pub n_fin: f64,
    pub syndrome_bits: f64,
    pub ec_cost: f64,
    pub net_key: f64,
    pub log2_eps_sec: f64,
    /// Worst-case entropy rate that entered the key length.
    pub worst_entropy: f64,
    pub clamped: bool,
}

/// Everything the key-length computations need besides the counts.
#[derive(Clone, Debug)]
pub struct KeyContext {
    pub amp: f64,
    pub splits: Splits,
    pub povms: PovmSet,
    pub mode: ConstraintMode,
    pub log2_eps_cor: f64,
    pub solver: SolverConfig,
}

impl KeyContext {
    pub fn new(amp: f64, splits: Splits, mode: ConstraintMode, log2_eps_cor: f64) -> Result<Self> {
        Ok(Self { amp, splits, povms: build_povms(amp)?, mode, log2_eps_cor, solver: SolverConfig::default() })
    }

    fn ec_cost(&self, stats: &ObservedStats) -> Result<f64> {
        if stats.n_sift <= 0.0 {
            return Ok(0.0);
        }
        let r = match self.mode {
            ConstraintMode::Asymptotic => {
                if stats.n_suc > 0.0 {
                    stats.n_err / stats.n_suc
                } else {
                    0.0
                }
            }
            ConstraintMode::FiniteSize => solve_r_err(stats.n_sift, stats.n_suc, stats.n_err, self.log2_eps_cor)?,
        };
        Ok(stats.n_sift * h2(r.clamp(0.0, 0.5)))
    }

    fn finish(&self, analysis: Analysis, alpha: Option<f64>, n_fin: f64, syndrome: f64, budget: &SecrecyBudget, worst: f64, stats: &ObservedStats) -> Result<KeyLengthResult> {
        let ec = self.ec_cost(stats)?;
        let raw = n_fin - ec;
        Ok(KeyLengthResult {
            analysis,
            alpha_renyi: alpha,
            n_fin,
            syndrome_bits: syndrome,
            ec_cost: ec,
            net_key: raw.max(0.0),
            log2_eps_sec: budget.log2_eps_sec(),
            worst_entropy: worst,
            clamped: raw < 0.0,
        })
    }
}

/// Conventional key length: Sanov-type exclusion of phase-error patterns.
pub fn conventional_key_length(ctx: &KeyContext, stats: &ObservedStats, budget: &SecrecyBudget) -> Result<KeyLengthResult> {
    let s = budget.s.ok_or_else(|| Error::Usage("conventional analysis needs the s component".into()))?;
    let constraints = constraint_set_b(stats, &ctx.splits, budget.log2_eps2, &ctx.povms, ctx.amp, ctx.mode)?;
    let worst = worst_phase_given_bit(&ctx.povms, &constraints, &ctx.solver)?;
    let h_max = match ctx.mode {
        ConstraintMode::Asymptotic => worst.upper_bound,
        ConstraintMode::FiniteSize => {
            let target = -budget.log2_eps2 / ctx.splits.n_extr;
            sanov_entropy_bound(ctx, stats, &constraints, &worst, target)?
        }
    };
    let h_max = h_max.clamp(0.0, 1.0);
    let n_fin = stats.n_sift * (1.0 - h_max) - s;
    ctx.finish(Analysis::Conventional, None, n_fin, stats.n_sift * h_max + s, budget, h_max, stats)
}

fn normalized_patterns(ops: &[CMat; 4], rho: &CMat) -> [f64; 4] {
    let w = [0, 1, 2, 3].map(|i| inner(&ops[i], rho).max(0.0));
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Largest `H(ph|bit)` over the patterns not excluded by the Sanov condition.
fn sanov_entropy_bound(
    ctx: &KeyContext,
    stats: &ObservedStats,
    constraints: &[AffineConstraint],
    worst: &WorstCase,
    target: f64,
) -> Result<f64> {
    let ops = ctx.povms.patterns();
    let pstar = normalized_patterns(&ops, &worst.rho);
    let g = pattern_gradient(&pstar.map(|v| v.max(1e-15)));
    let g0: f64 = g.iter().zip(&pstar).map(|(a, b)| a * b).sum();
    let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let last = 1.0 - stats.n_sift / ctx.splits.n_extr;
    let povm = ctx.povms.outcome_operators();
    let q_ref: Vec<f64> = povm.iter().map(|m| inner(m, &worst.rho)).collect();
    let div_at = |tau: f64| -> Result<f64> {
        let set = ProbabilitySet::Halfspace { gamma: g.iter().map(|v| v - tau).collect(), last };
        // the worst-case state is feasible, so its divergence already bounds the minimum from above
        let at_ref = i_projection(&set, &q_ref).0;
        if at_ref < target {
            return Ok(at_ref);
        }
        Ok(joint_divergence_minimizer(&set, &povm, 4, constraints, target, &ctx.solver)?.lower_bound)
    };
    let (mut lo, mut hi) = (g0, gmax);
    if div_at(hi)? < target {
        return Ok(1.0);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if div_at(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        // τ enters the entropy bound additively; finer steps are below solver accuracy
        if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = hi;
    let tangent = phase_given_bit_entropy(&pstar) + tau - g0;
    let exact = max_entropy_below(&g, tau, &ctx.solver)?;
    Ok(tangent.min(exact + 1e-9))
}

/// `max H(ph|bit)(p)` over normalised pattern vectors with `g·p ≤ τ`, as a
/// certified bound from the concave solver acting on diagonal entries.
fn max_entropy_below(g: &[f64; 4], tau: f64, cfg: &SolverConfig) -> Result<f64> {
    struct DiagEntropy;
    impl ConcaveObjective for DiagEntropy {
        fn value(&self, rho: &CMat) -> Result<f64> {
            Ok(pattern_entropy_unnormalized(&[0, 1, 2, 3].map(|i| rho[(i, i)].re.max(0.0))))
        }
        fn gradient(&self, rho: &CMat) -> Result<CMat> {
            Ok(diag_real(&pattern_gradient(&[0, 1, 2, 3].map(|i| rho[(i, i)].re.max(0.0)))))
        }
        fn functional_hessian(&self, rho: &CMat) -> Option<Result<(Vec<CMat>, DMatrix<f64>)>> {
            let ops = (0..4).map(|i| proj(&crate::linalg::ket(4, i))).collect();
            Some(Ok((ops, pattern_hessian(&[0, 1, 2, 3].map(|i| rho[(i, i)].re.max(0.0))))))
        }
    }
    let cons = [AffineConstraint::new(diag_real(g), Relation::Le, tau)];
    match maximize_concave(&DiagEntropy, 4, &cons, cfg) {
        Ok(r) => Ok(r.upper_bound),
        Err(Error::Infeasible { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Universal key length for a fixed Rényi parameter.
pub fn universal_key_length_at(
    ctx: &KeyContext,
    stats: &ObservedStats,
    budget: &SecrecyBudget,
    alpha: f64,
) -> Result<KeyLengthResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return usage(format!("Rényi parameter {alpha} outside (0,1)"));
    }
    let constraints = constraint_set_b(stats, &ctx.splits, budget.log2_eps2, &ctx.povms, ctx.amp, ctx.mode)?;
    let data = channel_data(ctx.amp)?;
    let r_fil = stats.n_sift / ctx.splits.n_extr;
    let r_down = r_fil - delta2_or_full(1.0 - r_fil, ctx.splits.n_extr, budget.log2_eps2)?;
    if r_down <= 0.0 {
        return domain("lower filter rate is not positive");
    }
    let c0 = ((1.0 - alpha) / alpha) * (1.0 / r_down).log2();
    let obj = RenyiObjective { alpha, data: data.clone(), offset: c0 };
    let bound = renyi_worst_case(&obj, &data.sift, &constraints, &ctx.solver)?;
    let n = stats.n_sift;
    let syndrome = n * bound + 18.0 * (n + 1.0).log2() - budget.log2_eps2 / alpha;
    ctx.finish(Analysis::Universal, Some(alpha), n - syndrome, syndrome, budget, bound, stats)
}

fn renyi_worst_case(obj: &RenyiObjective, sift: &KrausMap, constraints: &[AffineConstraint], cfg: &SolverConfig) -> Result<f64> {
    let composed = Composed { phi: obj, sift };
    let start = maximize_concave(&composed, 4, constraints, cfg)?;
    let sigma0 = sift.apply(&start.rho) + identity(4) * cr(1e-9);
    let outer = OuterConfig { inner: *cfg, ..OuterConfig::default() };
    let lin = sequential_linearization(&sigma0, obj, sift, constraints, &outer)?;
    Ok(lin.bound.min(start.upper_bound))
}

/// Asymptotic universal key length: von Neumann worst case, no overhead terms.
fn universal_asymptotic(ctx: &KeyContext, stats: &ObservedStats, budget: &SecrecyBudget) -> Result<KeyLengthResult> {
    let constraints = constraint_set_b(stats, &ctx.splits, budget.log2_eps2, &ctx.povms, ctx.amp, ConstraintMode::Asymptotic)?;
    let (bound, _) = phase_entropy_worst_case(ctx.amp, &constraints, &ctx.solver)?;
    let bound = bound.clamp(0.0, 1.0);
    let n = stats.n_sift;
    ctx.finish(Analysis::Universal, None, n * (1.0 - bound), n * bound, budget, bound, stats)
}

/// `max_{ρ∈ℬ} H(X|A'B')` (von Neumann) and the maximiser.
pub fn phase_entropy_worst_case(amp: f64, constraints: &[AffineConstraint], cfg: &SolverConfig) -> Result<(f64, CMat)> {
    let data = channel_data(amp)?;
    let phi = PhaseEntropy { data: data.clone() };
    let composed = Composed { phi: &phi, sift: &data.sift };
    let rep = maximize_concave(&composed, 4, constraints, cfg)?;
    Ok((rep.upper_bound, rep.rho))
}

/// Variance seed for the Rényi parameter from the expected filtered state, in nats².
fn variance_nats(amp: f64, p: f64) -> Result<f64> {
    let data = channel_data(amp)?;
    let sig = data.sift.apply(&depolarized_state(amp, p)?);
    let s = &sig / cr(trace_re(&sig));
    let ps = hermitize(&data.twirl(&s));
    Ok(relative_entropy_variance(&s, &ps)? * LN2 * LN2)
}

/// Universal key length with a fixed or automatically tuned Rényi parameter.
pub fn universal_key_length(
    ctx: &KeyContext,
    stats: &ObservedStats,
    budget: &SecrecyBudget,
    alpha: AlphaChoice,
    p_hint: f64,
) -> Result<KeyLengthResult> {
    if ctx.mode == ConstraintMode::Asymptotic {
        return universal_asymptotic(ctx, stats, budget);
    }
    match alpha {
        AlphaChoice::Fixed(a) => universal_key_length_at(ctx, stats, budget, a),
        AlphaChoice::Auto(_) => {
            let v = variance_nats(ctx.amp, p_hint)?.max(1e-6);
            // The heuristic balances log(1/ε)/α against αV/2. The filter-rate window adds a
            // second 1/α term, n·log(r↑/r↓), which dominates at large n; fold it into the seed.
            let r_fil = stats.n_sift / ctx.splits.n_extr;
            let r_up = r_fil + delta2_or_full(r_fil, ctx.splits.n_extr, budget.log2_eps2 - 1.0)?;
            let r_down = r_fil - delta2_or_full(1.0 - r_fil, ctx.splits.n_extr, budget.log2_eps2)?;
            let window = if r_down > 0.0 { (r_up / r_down).log2() } else { 0.0 };
            let n = stats.n_sift.max(1.0);
            let seed = alpha_heuristic(n, budget.log2_eps2 - n * window, v);
            let eval = |la: f64| -> f64 {
                universal_key_length_at(ctx, stats, budget, la.exp()).map(|r| r.n_fin).unwrap_or(f64::NEG_INFINITY)
            };
            let lo = (seed / 30.0).max(1e-6).ln();
            let hi = (seed * 30.0).min(0.995).ln();
            let best = golden_max(eval, lo.min(hi - 0.1), hi, 40);
            universal_key_length_at(ctx, stats, budget, best.exp())
        }
    }
}

/// One grid point of a finite-size key-rate sweep with equal-thirds splits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyRatePoint {
    pub amp: f64,
    pub p: f64,
    pub n_tot: f64,
    pub analysis: Analysis,
    pub log2_eps_sec: f64,
    pub log2_eps_cor: f64,
    pub alpha: AlphaChoice,
    pub stats: StatsMode,
    pub seed: u64,
}

/// Simulates the observed counts for `pt` and runs the requested analysis.
pub fn key_length_at_point(pt: &KeyRatePoint) -> Result<KeyLengthResult> {
    if !(pt.n_tot >= 3.0) {
        return usage(format!("n_tot = {} is too small to split three ways", pt.n_tot));
    }
    let splits = Splits::thirds(pt.n_tot);
    let ctx = KeyContext::new(pt.amp, splits, ConstraintMode::FiniteSize, pt.log2_eps_cor)?;
    let budget = secrecy_budget(pt.analysis, pt.log2_eps_sec, pt.n_tot)?;
    let stats = observed_statistics(pt.amp, pt.p, &splits, budget.log2_eps1, pt.stats, pt.seed)?;
    match pt.analysis {
        Analysis::Conventional => conventional_key_length(&ctx, &stats, &budget),
        Analysis::Universal => universal_key_length(&ctx, &stats, &budget, pt.alpha, pt.p),
    }
}

/// Golden-section search for the maximum of a unimodal function.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-4 {
            break;
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

// ---------------------------------------------------------------------------
// Asymptotic rates

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AsymptoticRates {
    pub p: f64,
    pub conventional: f64,
    pub universal: f64,
    pub devetak_winter: f64,
    /// Fraction of rounds used for key extraction; rates are per total pulse.
    pub extraction_fraction: f64,
}

/// Asymptotic key rates per total pulse, with the Devetak–Winter value from
/// a purification of the worst-case filtered state.
pub fn asymptotic_rates(amp: f64, p: f64, extraction_fraction: f64) -> Result<AsymptoticRates> {
    let e = expected_statistics(amp, p)?;
    let povms = build_povms(amp)?;
    let cfg = SolverConfig::default();
    let splits = Splits { n_extr: 1.0, n_test: 1.0, n_trash: 1.0 };
    let stats = ObservedStats { n_sift: e.q_fil, n_suc: e.q_fil, n_err: e.q_bit, nbar3: amp * amp };
    let cons = constraint_set_b(&stats, &splits, 0.0, &povms, amp, ConstraintMode::Asymptotic)?;
    let eb = if e.q_fil > 0.0 { e.q_bit / e.q_fil } else { 0.0 };
    let hb = h2(eb.clamp(0.0, 0.5));
    let conv = worst_phase_given_bit(&povms, &cons, &cfg)?;
    let (hx, rho) = phase_entropy_worst_case(amp, &cons, &cfg)?;
    let data = channel_data(amp)?;
    let sig = data.sift.apply(&rho);
    let dw = devetak_winter(&(&sig / cr(trace_re(&sig))));
    let scale = e.q_fil * extraction_fraction;
    Ok(AsymptoticRates {
        p,
        conventional: (scale * (1.0 - conv.upper_bound.min(1.0) - hb)).max(0.0),
        universal: (scale * (1.0 - hx.min(1.0) - hb)).max(0.0),
        devetak_winter: (scale * dw).max(0.0),
        extraction_fraction,
    })
}

/// `H(Z|E) − H(Z|Z_B)` for a two-qubit state `σ` on `A'B'` purified by `E`,
/// with `Z` the computational basis of `A'`.
pub fn devetak_winter(sigma: &CMat) -> f64 {
    let (vals, u) = eigh(sigma);
    let r = vals.len();
    // ρ_E^z = Σ_ij √(λ_i λ_j) ⟨v_j|Π_z ⊗ I|v_i⟩ |i⟩⟨j|
    let mut s_ze = 0.0;
    for z in 0..2 {
        let pz = kron(&proj(&zk(z)), &identity(2));
        let mut rho_e = CMat::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                let vi = u.column(i);
                let vj = u.column(j);
                let amp = (vj.adjoint() * &pz * vi)[(0, 0)];
                rho_e[(i, j)] = amp * cr((vals[i].max(0.0) * vals[j].max(0.0)).sqrt());
            }
        }
        s_ze += entropy_bits(&hermitize(&rho_e));
    }
    let h_z_given_e = s_ze - entropy_bits(sigma);
    let joint: Vec<f64> = (0..4).map(|k| sigma[(k, k)].re.max(0.0)).collect();
    let pb = [joint[0] + joint[2], joint[1] + joint[3]];
    let h_joint = crate::entropy::shannon(&joint);
    let h_z_given_zb = h_joint - crate::entropy::shannon(&pb);
    h_z_given_e - h_z_given_zb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, max_eig, min_eig};

    const A: f64 = DEFAULT_AMP;

    #[test]
    fn states_are_orthogonal_to_their_complements() {
        let st = build_states_and_filter(A).unwrap();
        for a in 0..2 {
            assert!(st.psi[a].dotc(&st.perp[a]).norm() < 1e-15);
        }
        assert!(build_states_and_filter(std::f64::consts::FRAC_1_SQRT_2).is_err());
    }

    #[test]
    fn filtered_ideal_state() {
        let st = build_states_and_filter(A).unwrap();
        let rho = depolarized_state(A, 0.0).unwrap();
        let kk = kron(&identity(2), &st.filter);
        let out = &kk * &rho * kk.adjoint();
        let b2 = 1.0 - A * A;
        assert!((trace_re(&out) - 2.0 * A * A * b2).abs() < 1e-14);
        // rank one and maximally entangled
        let n = &out / cr(trace_re(&out));
        assert!((max_eig(&n) - 1.0).abs() < 1e-12);
        let red = crate::linalg::partial_trace(&n, &[2, 2], &[0]);
        assert!(max_abs_diff(&red, &(identity(2) * cr(0.5))) < 1e-12);
    }

    #[test]
    fn povm_examples_and_invariants() {
        let m = build_povms(A).unwrap();
        let rho = depolarized_state(A, 0.0).unwrap();
        assert!(inner(&m.bit, &rho).abs() < 1e-12);
        assert!((inner(&m.fil, &rho) - 2.0 * A * A * (1.0 - A * A)).abs() < 1e-12);
        let mut ev = crate::linalg::eigvalsh(&m.ph);
        ev.reverse();
        let b2 = 1.0 - A * A;
        for (x, y) in ev.iter().zip([b2, A * A, 0.0, 0.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        let i4 = identity(4);
        for op in [&m.fil, &m.bit, &m.ph, &m.bitph, &m.minus] {
            assert!(min_eig(op) > -1e-12);
            assert!(min_eig(&(&i4 - op)) > -1e-12);
        }
        assert!(min_eig(&(&m.fil - &m.bit)) > -1e-10);
        assert!(min_eig(&(&m.fil - &m.bitph)) > -1e-10);
        assert!(min_eig(&(&m.bit - &m.bitph)) > -1e-10);
        assert!(min_eig(&(&m.ph - &m.bitph)) > -1e-10);
        for p in m.patterns() {
            assert!(min_eig(&p) > -1e-10);
        }
    }

    #[test]
    fn expected_statistics_examples() {
        let e0 = expected_statistics(A, 0.0).unwrap();
        assert!(e0.q_bit.abs() < 1e-12);
        assert!((e0.q_fil - 2.0 * A * A * (1.0 - A * A)).abs() < 1e-12);
        assert!((e0.q_minus - A * A).abs() < 1e-12);
        let e1 = expected_statistics(A, 1.0).unwrap();
        assert!((e1.q_fil - 0.5).abs() < 1e-12);
        let e2 = expected_statistics(A, 0.045).unwrap();
        assert!((e2.q_minus - e0.q_minus).abs() < 1e-14);
        assert!((e2.q_fil - 0.2585).abs() < 1e-3);
        assert!((e2.q_bit - 0.01125).abs() < 1e-5);
    }

    #[test]
    fn sampled_stats_are_deterministic() {
        let sp = Splits::thirds(1e8);
        let a = observed_statistics(A, 0.01, &sp, -34.0, StatsMode::Sampled, 7).unwrap();
        let b = observed_statistics(A, 0.01, &sp, -34.0, StatsMode::Sampled, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.n_err <= a.n_suc && a.n_sift <= sp.n_extr);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(secrecy_from_components(0.0, 0.0, Some(0.0), 1e9), 0.0);
        let b = secrecy_budget(Analysis::Conventional, -50.0, 1e9).unwrap();
        assert!((b.log2_eps1 - (-101.0 - 3f64.log2())).abs() < 1e-12);
        assert!((b.s.unwrap() - (101.0 + 3f64.log2())).abs() < 1e-12);
        assert!((b.log2_eps_sec() + 50.0).abs() < 1e-10);
        let u = secrecy_budget(Analysis::Universal, -50.0, 1e9).unwrap();
        assert!((u.log2_eps_sec() + 50.0).abs() < 1e-10);
        assert!(u.s.is_none());
        assert!(b.log2_fq.is_finite() && b.log2_fq > 0.0);
        assert!(matches!(secrecy_budget(Analysis::Universal, 0.5, 1e9), Err(Error::Domain(_))));
    }

    #[test]
    fn constraints_feasible_at_channel_state() {
        let sp = Splits::thirds(1e9);
        let m = build_povms(A).unwrap();
        let rho = depolarized_state(A, 0.045).unwrap();
        let stats = observed_statistics(A, 0.045, &sp, -102.0, StatsMode::Sampled, 3).unwrap();
        let cons = constraint_set_b(&stats, &sp, -400.0, &m, A, ConstraintMode::FiniteSize).unwrap();
        for c in &cons {
            assert!(c.violation(&rho) < 1e-12);
        }
        // ε₂ → 1 shrinks the widths
        let r_bit = stats.n_err / sp.n_test;
        let wide = constraint_set_b(&stats, &sp, -400.0, &m, A, ConstraintMode::FiniteSize).unwrap();
        let narrow = constraint_set_b(&stats, &sp, -1e-9, &m, A, ConstraintMode::FiniteSize).unwrap();
        assert!(narrow[2].bound - r_bit < 1e-4 * (wide[2].bound - r_bit));
    }

    #[test]
    fn pattern_entropy_examples() {
        assert_eq!(phase_given_bit_entropy(&[0.6, 0.0, 0.4, 0.0]), 0.0);
        assert!((phase_given_bit_entropy(&[0.5, 0.5, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_cross_checks() {
        for &p in &[0.0, 0.01, 0.045] {
            let r = asymptotic_rates(A, p, 1.0).unwrap();
            assert!((r.universal - r.devetak_winter).abs() < 1e-6, "{p}: {r:?}");
            assert!(r.conventional <= r.universal + 1e-9);
            if p == 0.0 {
                assert!((r.conventional - r.universal).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_error_key_lengths() {
        let sp = Splits::thirds(1e9);
        let ctx = KeyContext::new(A, sp, ConstraintMode::Asymptotic, -50.0).unwrap();
        let stats = observed_statistics(A, 0.0, &sp, -102.0, StatsMode::Expected, 0).unwrap();
        let b = secrecy_budget(Analysis::Conventional, -50.0, 1e9).unwrap();
        let r = conventional_key_length(&ctx, &stats, &b).unwrap();
        assert!((r.n_fin - (stats.n_sift - b.s.unwrap())).abs() < 1e-6 * stats.n_sift);
        let bu = secrecy_budget(Analysis::Universal, -50.0, 1e9).unwrap();
        let u = universal_key_length(&ctx, &stats, &bu, AlphaChoice::AUTO, 0.0).unwrap();
        assert!(u.worst_entropy < 1e-6);
        assert!((u.n_fin / stats.n_sift - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phase_entropy_hessian_matches_differences() {
        let obj = PhaseEntropy { data: channel_data(A).unwrap() };
        let sigma = depolarized_state(A, 0.03).unwrap() + identity(4) * cr(0.01);
        let dir = hermitize(&(kron(&proj(&crate::linalg::ket(2, 1)), &identity(2)) - identity(4) * cr(0.3)
            + diag_real(&[0.0, 0.1, -0.2, 0.05])));
        let h = 1e-5;
        let gp = obj.value_grad(&(&sigma + &dir * cr(h))).unwrap().1;
        let gm = obj.value_grad(&(&sigma - &dir * cr(h))).unwrap().1;
        let fd = (gp - gm) / cr(2.0 * h);
        let an = obj.hessian_apply(&sigma, &dir).unwrap().unwrap();
        assert!(crate::linalg::max_abs(&(fd - an)) < 1e-6);
    }

    #[test]
    fn alpha_choice_serde() {
        let a: AlphaChoice = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(a, AlphaChoice::AUTO);
        let b: AlphaChoice = serde_json::from_str("0.25").unwrap();
        assert_eq!(b, AlphaChoice::Fixed(0.25));
    }
}
