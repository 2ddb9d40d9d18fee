//! Property suites behind `ucpec selftest`.
//!
//! Each suite exercises one module at moderate sizes and records every
//! assertion it makes, so a run can report both failures and coverage.

use crate::b92::{
    asymptotic_rates, build_povms, build_states_and_filter, channel_data, expected_statistics, key_length_at_point,
    secrecy_budget, AlphaChoice, Analysis, KeyRatePoint, StatsMode, DEFAULT_AMP,
};
use crate::compression::{
    build_decoder_povm, division_by_quadrature, operator_division, random_coding_exponent, run_experiment,
    sphere_packing_exponent, theorem_bound, theorem_exponent, CompressionExperiment, DecoderKind, FamilyChoice,
};
use crate::entropy::{
    conditional_renyi_direct, conditional_renyi_sibson, conditional_renyi_sibson_joint, delta1_residual,
    delta2_residual, r_err_residual, solve_delta1, solve_delta2, solve_r_err, source_conditional_entropy, CqSource,
};
use crate::error::{usage, Error, Result};
use crate::field::{FiniteFieldSpec, Gf, WeylKind};
use crate::hashing::{build_dual_quadruple, hashing_unitary, sample_with, verify_two_universal, HashFamilyKind, HashFamilySpec};
use crate::linalg::{
    cr, dagger, identity, inner, kron_all, max_abs_diff, min_eig, random_density, random_hermitian, unitarity_defect,
    CMat, C64,
};
use crate::optimizer::{
    i_projection, kl, linearized_upper_bound, renyi_objective_and_gradient, sequential_linearization,
    solve_linear_sdp, AffineConstraint, LinearSdpProblem, OuterConfig, ProbabilitySet, Relation, RenyiObjective,
    SigmaObjective, SolverConfig,
};
use crate::schur_weyl::{
    build_isotypic_blocks, class_size, empirical_entropy, enumerate_types, sigma_for_string, sigma_for_type, type_of,
    universal_symmetric_state, domination_factor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::{Duration, Instant};

/// Suites provided by the library, in run order.
pub const SUITES: [&str; 7] = [
    "field-weyl",
    "linear-hashing",
    "schur-weyl-types",
    "entropy-kernels",
    "compression-simulator",
    "convex-optimizer",
    "b92-analysis",
];

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    /// Skip the four-copy Schur–Weyl cases.
    pub quick: bool,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { quick: false, seed: 20240917 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub assertions: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Assertion recorder shared by all suites.
pub struct Checker {
    name: String,
    assertions: usize,
    failures: Vec<String>,
    started: Instant,
}

impl Checker {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), assertions: 0, failures: Vec::new(), started: Instant::now() }
    }

    pub fn check(&mut self, ok: bool, label: impl FnOnce() -> String) {
        self.assertions += 1;
        if !ok {
            self.failures.push(label());
        }
    }

    /// `|got − want| ≤ tol`.
    pub fn close(&mut self, got: f64, want: f64, tol: f64, label: &str) {
        self.check((got - want).abs() <= tol, || format!("{label}: got {got:e}, expected {want:e} (tol {tol:e})"));
    }

    pub fn at_most(&mut self, got: f64, limit: f64, label: &str) {
        self.check(got <= limit, || format!("{label}: {got:e} exceeds {limit:e}"));
    }

    /// Counts an error as a failed assertion and hands back the value otherwise.
    pub fn ok<T>(&mut self, r: Result<T>, label: &str) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, || format!("{label}: {e}"));
                None
            }
        }
    }

    pub fn finish(self) -> SuiteOutcome {
        SuiteOutcome { name: self.name, assertions: self.assertions, failures: self.failures, elapsed: self.started.elapsed() }
    }
}

/// Runs one suite by name. Unknown names are usage errors.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteOutcome> {
    let mut c = Checker::new(name);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = match name {
        "field-weyl" => field_weyl(&mut c, &mut rng),
        "linear-hashing" => linear_hashing(&mut c, &mut rng),
        "schur-weyl-types" => schur_weyl_types(&mut c, &mut rng, opts.quick),
        "entropy-kernels" => entropy_kernels(&mut c, &mut rng),
        "compression-simulator" => compression_simulator(&mut c, &mut rng),
        "convex-optimizer" => convex_optimizer(&mut c, &mut rng),
        "b92-analysis" => b92_analysis(&mut c),
        other => return usage(format!("unknown suite '{other}'")),
    };
    // a suite aborts only on errors it did not expect; record them as a failure
    if let Err(e) = r {
        c.check(false, || format!("suite aborted: {e}"));
    }
    Ok(c.finish())
}

fn field_weyl(c: &mut Checker, rng: &mut ChaCha8Rng) -> Result<()> {
    for q in [2u32, 3, 4, 5] {
        let f = Gf::of_order(q)?;
        let p = f.p() as usize;
        for a in 0..q {
            // Σ_b χ(ab) is q·δ_{a0} exactly iff Tr(ab) is equidistributed over F_p for a ≠ 0
            let mut counts = vec![0usize; p];
            for b in 0..q {
                counts[f.trace(f.mul(a, b)) as usize] += 1;
            }
            let exact = if a == 0 { counts[0] == q as usize } else { counts.iter().all(|&k| k == q as usize / p) };
            c.check(exact, || format!("GF({q}): trace values of {a}·b are not balanced: {counts:?}"));
            let s: C64 = (0..q).map(|b| f.chi(f.mul(a, b))).sum();
            let want = if a == 0 { q as f64 } else { 0.0 };
            c.close((s - cr(want)).norm(), 0.0, 1e-12, &format!("GF({q}) character sum at a={a}"));
        }
        let xs: Vec<CMat> = (0..q).map(|a| f.weyl_x(a)).collect();
        let zs: Vec<CMat> = (0..q).map(|b| f.weyl_z(b)).collect();
        for a in 0..q as usize {
            c.at_most(unitarity_defect(&xs[a]), 1e-12, &format!("GF({q}) X({a}) unitary"));
            c.at_most(unitarity_defect(&zs[a]), 1e-12, &format!("GF({q}) Z({a}) unitary"));
            for b in 0..q as usize {
                let lhs = &xs[a] * &zs[b];
                let rhs = &zs[b] * &xs[a] * f.chi(f.neg(f.mul(a as u32, b as u32)));
                c.at_most(max_abs_diff(&lhs, &rhs), 1e-12, &format!("GF({q}) commutation X({a})Z({b})"));
                let sum = f.add(a as u32, b as u32) as usize;
                c.at_most(max_abs_diff(&(&xs[a] * &xs[b]), &xs[sum]), 1e-12, &format!("GF({q}) X group law {a}+{b}"));
                c.at_most(max_abs_diff(&(&zs[a] * &zs[b]), &zs[sum]), 1e-12, &format!("GF({q}) Z group law {a}+{b}"));
                let v = f.mub_vector(b as u32);
                let shifted = &xs[a] * &v;
                let phase = f.chi(f.mul(a as u32, b as u32));
                c.at_most((shifted - v * phase).norm(), 1e-12, &format!("GF({q}) X({a}) eigenvector |{b}~>"));
            }
        }
    }
    for q in [2u32, 3, 4, 5, 7, 8, 9] {
        let f = Gf::of_order(q)?;
        let p = f.p();
        let mut additive = true;
        let mut homogeneous = true;
        for a in 0..q {
            for b in 0..q {
                additive &= f.trace(f.add(a, b)) == (f.trace(a) + f.trace(b)) % p;
            }
            // labels below p are the prime subfield
            for s in 0..p {
                homogeneous &= f.trace(f.mul(s, a)) == (s * f.trace(a)) % p;
            }
        }
        c.check(additive, || format!("GF({q}) trace is not additive"));
        c.check(homogeneous, || format!("GF({q}) trace is not F_p-linear"));
    }
    for q in [2u32, 3] {
        let f = Gf::of_order(q)?;
        for _ in 0..3 {
            let cm = sample_with(&f, HashFamilyKind::AllSurjective, 2, 2, rng)?;
            let u = f.relabeling_unitary(&cm)?;
            c.at_most(unitarity_defect(&u), 1e-12, &format!("GF({q}) relabeling unitary"));
            let ct = cm.transpose();
            let cinv = cm.inverse(&f)?;
            for idx in 0..(q * q) as usize {
                let a = f.basis_label(idx, 2);
                let lhs = dagger(&u) * f.nqudit_weyl(WeylKind::X, &a) * &u;
                let rhs = f.nqudit_weyl(WeylKind::X, &ct.left_mul_vec(&f, &a));
                c.at_most(max_abs_diff(&lhs, &rhs), 1e-12, &format!("GF({q}) relabeled X({a:?})"));
                let lhs = dagger(&u) * f.nqudit_weyl(WeylKind::Z, &a) * &u;
                let rhs = f.nqudit_weyl(WeylKind::Z, &cinv.left_mul_vec(&f, &a));
                c.at_most(max_abs_diff(&lhs, &rhs), 1e-12, &format!("GF({q}) relabeled Z({a:?})"));
            }
        }
    }
    Ok(())
}

fn linear_hashing(c: &mut Checker, rng: &mut ChaCha8Rng) -> Result<()> {
    for q in [2u32, 3] {
        for n in 1..=4 {
            for m in 1..=n.min(2) {
                let spec = HashFamilySpec {
                    kind: HashFamilyKind::AllSurjective,
                    n,
                    m,
                    field: FiniteFieldSpec::of_order(q)?,
                    seed: 0,
                };
                if let Some(r) = c.ok(verify_two_universal(&spec), "collision report") {
                    c.check(r.passes, || {
                        format!("GF({q}) n={n} m={m}: {} collisions above the bound {}", r.max_collisions, r.bound)
                    });
                }
            }
        }
    }
    for q in [2u32, 3, 4, 5] {
        let f = Gf::of_order(q)?;
        for n in 1..=4 {
            for m in 1..=n {
                let h = sample_with(&f, HashFamilyKind::ToeplitzBased, n, m, rng)?;
                let quad = build_dual_quadruple(&f, &h)?;
                let ok = quad.check(&f)?;
                c.check(ok, || format!("GF({q}) dual quadruple identities for n={n} m={m}"));
            }
        }
    }
    let f = Gf::of_order(2)?;
    for n in 1..=3 {
        for m in 1..=n {
            let h = sample_with(&f, HashFamilyKind::AllSurjective, n, m, rng)?;
            let quad = build_dual_quadruple(&f, &h)?;
            let u = hashing_unitary(&f, &quad)?;
            let fwd = quad.forward();
            let dual = quad.dual();
            let dual_t = dual.transpose();
            // U(H) is the relabeling by (Ḡ G), whose inverse transpose is (H H̄)
            for idx in 0..1usize << n {
                let z = f.basis_label(idx, n);
                let img = f.basis_index(&fwd.left_mul_vec(&f, &z));
                let col_ok = (0..1usize << n).all(|r| u[(r, idx)] == cr(if r == img { 1.0 } else { 0.0 }));
                c.check(col_ok, || format!("U(H)|{z:?}> is not |z(H H̄)> for n={n} m={m}"));
                let x_img = dual.left_mul_vec(&f, &z);
                let d = (&u * f.nqudit_mub(&z) - f.nqudit_mub(&x_img)).norm();
                c.at_most(d, 1e-12, &format!("U(H) X-basis action on {z:?}, n={n} m={m}"));
                let lhs = dagger(&u) * f.nqudit_weyl(WeylKind::X, &z) * &u;
                let rhs = f.nqudit_weyl(WeylKind::X, &dual_t.left_mul_vec(&f, &z));
                c.at_most(max_abs_diff(&lhs, &rhs), 1e-12, &format!("U(H)† X({z:?}) U(H), n={n} m={m}"));
                let lhs = dagger(&u) * f.nqudit_weyl(WeylKind::Z, &z) * &u;
                let rhs = f.nqudit_weyl(WeylKind::Z, &fwd.transpose().left_mul_vec(&f, &z));
                c.at_most(max_abs_diff(&lhs, &rhs), 1e-12, &format!("U(H)† Z({z:?}) U(H), n={n} m={m}"));
            }
        }
    }
    Ok(())
}

fn schur_weyl_types(c: &mut Checker, rng: &mut ChaCha8Rng, quick: bool) -> Result<()> {
    let cases: &[(usize, usize)] = &[(1, 2), (2, 2), (3, 2), (4, 2), (1, 3), (2, 3), (3, 3)];
    for &(n, d) in cases {
        if quick && n == 4 {
            continue;
        }
        let blocks = build_isotypic_blocks(n, d)?;
        let dim = d.pow(n as u32);
        let mut total = CMat::zeros(dim, dim);
        for (i, bi) in blocks.iter().enumerate() {
            total += &bi.projector;
            for (j, bj) in blocks.iter().enumerate() {
                let prod = &bi.projector * &bj.projector;
                let want = if i == j { bi.projector.clone() } else { CMat::zeros(dim, dim) };
                c.at_most(max_abs_diff(&prod, &want), 1e-10, &format!("n={n} d={d}: Π_{i}Π_{j}"));
            }
            let tr = crate::linalg::trace_re(&bi.projector);
            c.close(tr, (bi.dim_u * bi.dim_v) as f64, 1e-9, &format!("n={n} d={d}: Tr Π_{i}"));
            let cap = ((n + 1) as f64).powf((d * (d - 1)) as f64 / 2.0);
            c.at_most(bi.dim_u as f64, cap, &format!("n={n} d={d}: dim U_{i}"));
        }
        c.at_most(max_abs_diff(&total, &identity(dim)), 1e-10, &format!("n={n} d={d}: Σ Π = I"));
        c.at_most(blocks.len() as f64, ((n + 1) as f64).powi(d as i32 - 1), &format!("n={n} d={d}: |Y|"));

        let sigma = universal_symmetric_state(n, d)?;
        let factor = domination_factor(n, d);
        let samples = if d == 2 { 5 } else { 2 };
        for _ in 0..samples {
            let rho = random_density(d, d, rng);
            let tensor = kron_all(&vec![rho; n]);
            let gap = min_eig(&(&sigma * cr(factor) - tensor));
            c.check(gap >= -1e-10, || format!("n={n} d={d}: ρ^⊗n not dominated, min eig {gap:e}"));
        }
    }
    for n in 1..=3 {
        for counts in enumerate_types(n, 2) {
            let sp = sigma_for_type(&counts, 2)?;
            for code in 0..1usize << n {
                let x: Vec<usize> = (0..n).map(|k| (code >> k) & 1).collect();
                if type_of(&x, 2) != counts {
                    continue;
                }
                let sx = sigma_for_string(&x, 2)?;
                let comm = max_abs_diff(&(&sp * &sx), &(&sx * &sp));
                c.at_most(comm, 1e-12, &format!("[σ_P, σ_x] for x={x:?}"));
            }
        }
    }
    for (n, k) in [(4usize, 2usize), (5, 3), (6, 3)] {
        let total: f64 = enumerate_types(n, k).iter().map(|t| class_size(t)).sum();
        c.close(total, (k as f64).powi(n as i32), 0.0, &format!("type classes partition [{k}]^{n}"));
    }
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..=4);
        let mut p: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let n = rng.random_range(1..=30);
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let log_p: f64 = x.iter().map(|&s| p[s].log2()).sum();
        worst = worst.max(log_p + n as f64 * empirical_entropy(&x, k));
    }
    c.at_most(worst, 1e-9, "log p^n(x) + n H(x) over 1000 random pairs");
    Ok(())
}

fn entropy_kernels(c: &mut Checker, rng: &mut ChaCha8Rng) -> Result<()> {
    for i in 0..20 {
        let k = 2 + i % 2;
        let src = CqSource::random(k, 2, rng);
        let joint = src.joint();
        for alpha in [0.3, 0.7] {
            let closed = conditional_renyi_sibson(&src, alpha)?;
            let direct = conditional_renyi_direct(&joint, k, alpha, rng)?;
            c.close(direct, closed, 1e-6, &format!("Sibson vs direct, source {i}, α={alpha}"));
        }
        let grid: Vec<f64> = (1..=9).map(|j| j as f64 / 10.0).collect();
        let vals = grid.iter().map(|&a| conditional_renyi_sibson(&src, a)).collect::<Result<Vec<_>>>()?;
        let monotone = vals.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        c.check(monotone, || format!("H↑_α not non-increasing in α for source {i}: {vals:?}"));
        let near_one = conditional_renyi_sibson(&src, 1.0 - 1e-7)?;
        c.close(near_one, source_conditional_entropy(&src), 1e-4, &format!("α→1 limit, source {i}"));
    }
    for i in 0..100 {
        let a = CqSource::random(2, 2, rng).joint();
        let b = CqSource::random(2, 2, rng).joint();
        let t: f64 = rng.random();
        let mix = &a * cr(t) + &b * cr(1.0 - t);
        for alpha in [0.3, 0.7] {
            let lhs = conditional_renyi_sibson_joint(&mix, 2, alpha)?;
            let rhs = t * conditional_renyi_sibson_joint(&a, 2, alpha)? + (1.0 - t) * conditional_renyi_sibson_joint(&b, 2, alpha)?;
            c.check(lhs >= rhs - 1e-12, || format!("concavity triple {i}, α={alpha}: {lhs} < {rhs}"));
        }
    }
    for (n, log2_eps) in [(1e3, -20.0), (1e6, -60.0), (1e10, -140.0)] {
        let qs = (0..50)
            .map(|i| {
                let p = i as f64 / 51.0;
                solve_delta2(p, n, log2_eps).map(|d| p + d)
            })
            .collect::<Result<Vec<_>>>()?;
        c.check(qs.windows(2).all(|w| w[1] > w[0]), || format!("p + δ₂ not increasing at n={n:e}"));
        c.close(solve_delta2(0.0, n, log2_eps)?, -(log2_eps / n * crate::linalg::LN2).exp_m1(), 0.0, "δ₂ at p = 0");
        for p in [1e-4, 0.01, 0.2, 0.5, 0.9] {
            let d = solve_delta2(p, n, log2_eps)?;
            c.at_most(delta2_residual(p, n, log2_eps, d).abs(), 1e-10, &format!("δ₂ residual p={p} n={n:e}"));
            let d = solve_delta1(p, n, log2_eps)?;
            if d < 1.0 - p {
                c.at_most(delta1_residual(p, n, log2_eps, d).abs(), 1e-10, &format!("δ₁ residual p={p} n={n:e}"));
            }
        }
    }
    for (ns, nsuc, nerr) in [(1e6, 1e6, 1e4), (3e8, 3e8, 1.2e7), (1e11, 1e11, 0.0)] {
        let r = solve_r_err(ns, nsuc, nerr, -50.0)?;
        c.at_most(r_err_residual(ns, nsuc, nerr, -50.0, r).abs(), 1e-10, &format!("r_err residual n_sift={ns:e}"));
    }
    Ok(())
}

fn exhaustive(source: CqSource, n: usize, bins_log: f64, kind: DecoderKind) -> CompressionExperiment {
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

fn compression_simulator(c: &mut Checker, rng: &mut ChaCha8Rng) -> Result<()> {
    for n in 1..=3 {
        for _ in 0..2 {
            let src = CqSource::random(2, 2, rng);
            for m in 0..=n {
                for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
                    match run_experiment(&exhaustive(src.clone(), n, m as f64, kind)) {
                        Ok(out) => c.at_most(out.report.exact_perr, out.report.bound_perr + 1e-10, &format!("n={n} m={m} {kind:?}")),
                        Err(Error::Invariant(msg)) => c.check(false, || msg),
                        Err(e) => return Err(e),
                    }
                }
            }
            let bounds = (0..=2 * n)
                .map(|b| theorem_bound(&exhaustive(src.clone(), n, b as f64, DecoderKind::FullyUniversal)).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?;
            c.check(bounds.windows(2).all(|w| w[1] <= w[0] + 1e-15), || format!("bound not monotone in binsLog: {bounds:?}"));
        }
    }
    let src = CqSource::random(2, 2, rng);
    let rate = (source_conditional_entropy(&src) + 0.5).min(1.0);
    let bounds = [16usize, 64, 256, 1024, 4096]
        .iter()
        .map(|&n| theorem_bound(&exhaustive(src.clone(), n, rate * n as f64, DecoderKind::PartiallyUniversal)).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    c.check(bounds.windows(2).all(|w| w[1] <= w[0] + 1e-15), || format!("bound not monotone in n: {bounds:?}"));

    let f = Gf::of_order(2)?;
    for (n, m) in [(2, 1), (3, 1), (3, 2)] {
        let src = CqSource::random(2, 2, rng);
        let h = sample_with(&f, HashFamilyKind::AllSurjective, n, m, rng)?;
        for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
            for bin_idx in 0..1usize << m {
                let bin = f.basis_label(bin_idx, m);
                let povm = build_decoder_povm(kind, &f, &h, &bin, &src, n)?;
                let dim = 1usize << n;
                let mut total = CMat::zeros(dim, dim);
                for (_, y) in &povm {
                    c.check(min_eig(y) >= -1e-10, || format!("decoder element not PSD, n={n} bin={bin:?}"));
                    total += y;
                }
                // ΣY is the support projector: idempotent and the identity on every σ_x
                c.at_most(max_abs_diff(&(&total * &total), &total), 1e-10, &format!("ΣY idempotent, n={n} bin={bin:?}"));
                let mut fixes = 0.0f64;
                for (x, _) in &povm {
                    let s = sigma_for_string(x, 2)?;
                    fixes = fixes.max(max_abs_diff(&(&total * &s), &s));
                }
                c.at_most(fixes, 1e-10, &format!("ΣY acts as identity on supports, n={n} bin={bin:?}"));
            }
        }
    }
    for d in [2, 3] {
        for _ in 0..5 {
            let a = random_density(d, d, rng);
            let b = random_density(d, d, rng) + identity(d) * cr(0.05);
            let exact = operator_division(&a, &b)?;
            c.at_most(max_abs_diff(&exact, &division_by_quadrature(&a, &b)), 1e-8, &format!("A ÷ B quadrature, d={d}"));
        }
    }
    for _ in 0..4 {
        let src = CqSource::random(2, 2, rng);
        let rate = (source_conditional_entropy(&src) + 0.2).min(0.99);
        let rc = random_coding_exponent(&src, rate)?;
        let sp = sphere_packing_exponent(&src, rate)?;
        let mut part = f64::NEG_INFINITY;
        for i in 1..=20 {
            let e = theorem_exponent(&src, 100_000, 100_000.0 * rate, DecoderKind::PartiallyUniversal, i as f64 / 20.0)?;
            part = part.max(e);
        }
        c.at_most(part, rc + 1e-12, "theorem exponent ≤ random-coding exponent");
        c.at_most(rc, sp + 1e-12, "random-coding ≤ sphere-packing exponent");
    }
    Ok(())
}

fn positive_point(rng: &mut ChaCha8Rng) -> CMat {
    random_density(4, 4, rng) * cr(0.9) + identity(4) * cr(0.025)
}

fn convex_optimizer(c: &mut Checker, rng: &mut ChaCha8Rng) -> Result<()> {
    let data = channel_data(DEFAULT_AMP)?;
    for alpha in [0.2, 0.38, 0.6] {
        for _ in 0..10 {
            let s = positive_point(rng);
            let (_, g) = renyi_objective_and_gradient(&s, alpha, &data)?;
            let dir = random_hermitian(4, rng);
            let h = 1e-4;
            let fp = renyi_objective_and_gradient(&(&s + &dir * cr(h)), alpha, &data)?.0;
            let fm = renyi_objective_and_gradient(&(&s - &dir * cr(h)), alpha, &data)?.0;
            let fd = (fp - fm) / (2.0 * h);
            let an = inner(&g, &dir);
            c.at_most((fd - an).abs(), 1e-5 * an.abs().max(1e-3), &format!("gradient vs differences, α={alpha}"));
        }
    }
    let obj = RenyiObjective { alpha: 0.4, data: data.clone(), offset: 0.0 };
    for _ in 0..50 {
        let rho = positive_point(rng);
        let sigma = positive_point(rng);
        let bound = linearized_upper_bound(&rho, &sigma, &obj, &data.sift)?;
        let truth = obj.value_grad(&data.sift.apply(&rho))?.0;
        c.check(bound >= truth - 1e-12, || format!("linearisation {bound} below the value {truth}"));
        let s = data.sift.apply(&rho);
        let tangent = linearized_upper_bound(&rho, &s, &obj, &data.sift)?;
        c.close(tangent, truth, 1e-8, "tangency at σ = S(ρ)");
    }
    for trial in 0..3 {
        let m = random_density(4, 2, rng);
        let bound = inner(&m, &(identity(4) * cr(0.25))) + 0.02;
        let cons = vec![AffineConstraint::new(m, Relation::Le, bound)];
        let sigma0 = data.sift.apply(&(identity(4) * cr(0.25)));
        let res = sequential_linearization(&sigma0, &obj, &data.sift, &cons, &OuterConfig::default())?;
        let at_rho = obj.value_grad(&(data.sift.apply(&res.rho) + identity(4) * cr(1e-12)))?.0;
        for (k, step) in res.trace.iter().enumerate() {
            c.check(step.bound >= at_rho - 1e-9 && step.bound >= res.attained - 1e-9, || {
                format!("problem {trial}, iterate {k}: bound {} below attained {}", step.bound, at_rho)
            });
        }
    }
    for trial in 0..6 {
        let d = 3 + trial % 2;
        let objective = random_hermitian(d, rng);
        let mut constraints = Vec::new();
        for _ in 0..2 {
            let m = random_density(d, d, rng);
            let b = inner(&m, &(identity(d) / cr(d as f64))) + 0.01;
            constraints.push(AffineConstraint::new(m, Relation::Le, b));
        }
        let rep = solve_linear_sdp(&LinearSdpProblem { objective, offset: 0.0, constraints, dim: d }, &SolverConfig::default())?;
        c.at_most(rep.complementarity, 1e-6, &format!("SDP {trial} complementary slackness"));
        c.check(rep.upper_bound >= rep.value - 1e-12, || format!("SDP {trial} certificate below value"));
        c.at_most(rep.duality_gap_bound, 1e-6, &format!("SDP {trial} duality gap"));
    }
    for _ in 0..5 {
        let q: Vec<f64> = {
            let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        };
        let gamma: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.5).collect();
        let last = q[4];
        let set = ProbabilitySet::Halfspace { gamma: gamma.clone(), last };
        let (dmin, p) = i_projection(&set, &q);
        if dmin.is_infinite() {
            // empty set: no coordinate can carry positive weight
            c.check(gamma.iter().all(|g| *g < 0.0), || "I-projection reported an empty halfspace that is not empty".to_string());
            continue;
        }
        let feasible = gamma.iter().zip(&p).map(|(g, v)| g * v).sum::<f64>() >= -1e-10;
        c.check(feasible, || "I-projection left the halfspace".to_string());
        let mut beaten = false;
        for _ in 0..200 {
            let mut cand: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let s: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v *= (1.0 - last) / s);
            if gamma.iter().zip(&cand).map(|(g, v)| g * v).sum::<f64>() >= 0.0 {
                cand.push(last);
                beaten |= kl(&cand, &q) < dmin - 1e-9;
            }
        }
        c.check(!beaten, || "a feasible point has smaller divergence than the I-projection".to_string());
    }
    Ok(())
}

fn b92_analysis(c: &mut Checker) -> Result<()> {
    let amp = DEFAULT_AMP;
    let a2 = amp * amp;
    let b2 = 1.0 - a2;
    let e0 = expected_statistics(amp, 0.0)?;
    c.at_most(e0.q_bit.abs(), 1e-12, "bit error at p = 0");
    c.close(e0.q_fil, 2.0 * a2 * b2, 1e-12, "filter rate at p = 0");
    c.close(e0.q_minus, a2, 1e-12, "trash-round rate at p = 0");
    let e1 = expected_statistics(amp, 1.0)?;
    c.close(e1.q_fil, 0.5, 1e-12, "filter rate at p = 1");
    c.close(e1.q_minus, a2, 1e-12, "trash-round rate at p = 1");
    for a in [0.2, DEFAULT_AMP, 0.6] {
        let st = build_states_and_filter(a)?;
        for i in 0..2 {
            let ov = (st.psi[i].adjoint() * &st.perp[i])[(0, 0)].norm();
            c.at_most(ov, 1e-15, &format!("⟨ψ_{i}|ψ⊥_{i}⟩ at amp {a}"));
        }
        let m = build_povms(a)?;
        let pairs = [
            (&m.bit, &m.bitph, "M_bitph ⪯ M_bit"),
            (&m.ph, &m.bitph, "M_bitph ⪯ M_ph"),
            (&m.fil, &m.bit, "M_bit ⪯ M_fil"),
            (&m.fil, &m.bitph, "M_bitph ⪯ M_fil"),
        ];
        for (big, small, label) in pairs {
            c.check(min_eig(&(big - small)) >= -1e-10, || format!("{label} at amp {a}"));
        }
        for (op, label) in [(&m.fil, "fil"), (&m.bit, "bit"), (&m.ph, "ph"), (&m.bitph, "bitph"), (&m.minus, "minus")] {
            let lo = min_eig(op);
            let hi = min_eig(&(identity(4) - op));
            c.check(lo >= -1e-10 && hi >= -1e-10, || format!("0 ⪯ M_{label} ⪯ I at amp {a}"));
        }
    }
    for analysis in [Analysis::Conventional, Analysis::Universal] {
        let b = secrecy_budget(analysis, -50.0, 1e10)?;
        c.close(b.log2_eps_sec(), -50.0, 1e-9, &format!("{analysis:?} budget reassembles ε_sec"));
    }

    for p in [0.0, 0.01, 0.045] {
        let r = asymptotic_rates(amp, p, 1.0 / 3.0)?;
        c.close(r.universal, r.devetak_winter, 1e-6, &format!("universal vs Devetak–Winter at p={p}"));
        c.check(r.conventional <= r.universal + 1e-9, || format!("conventional above universal at p={p}"));
        if p == 0.0 {
            c.close(r.conventional, r.universal, 1e-6, "conventional = universal at p = 0");
        }
    }

    let point = |p: f64, n_tot: f64, analysis: Analysis| KeyRatePoint {
        amp,
        p,
        n_tot,
        analysis,
        log2_eps_sec: -50.0,
        log2_eps_cor: -50.0,
        alpha: AlphaChoice::AUTO,
        stats: StatsMode::Expected,
        seed: 0,
    };
    let rate = |pt: KeyRatePoint| key_length_at_point(&pt).map(|r| r.net_key / pt.n_tot);

    let p = 0.045;
    let asym = asymptotic_rates(amp, p, 1.0 / 3.0)?;
    let mut at_top = [0.0; 2];
    for (slot, analysis) in [Analysis::Conventional, Analysis::Universal].into_iter().enumerate() {
        let grid = [2.5e11, 5e11, 1e12];
        let rates = grid.iter().map(|&n| rate(point(p, n, analysis))).collect::<Result<Vec<_>>>()?;
        c.check(rates.windows(2).all(|w| w[1] >= w[0]), || format!("{analysis:?} rate not increasing on a doubling grid: {rates:?}"));
        let limit = match analysis {
            Analysis::Conventional => asym.conventional,
            Analysis::Universal => asym.universal,
        };
        let gap = (limit - rates[2]) / limit;
        c.at_most(gap, 0.02, &format!("{analysis:?} relative gap to the asymptote at n_tot = 1e12, p = {p}"));
        at_top[slot] = rates[2];
    }
    c.check(at_top[1] > at_top[0], || format!("universal {} not above conventional {} at p = 4.5%", at_top[1], at_top[0]));
    let conv = rate(point(0.01, 1e9, Analysis::Conventional))?;
    let univ = rate(point(0.01, 1e9, Analysis::Universal))?;
    c.check(conv > univ, || format!("conventional {conv} not above universal {univ} at p = 1%, n_tot = 1e9"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_usage_error() {
        assert!(matches!(run_suite("nope", &SuiteOptions::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn checker_counts_and_collects() {
        let mut c = Checker::new("t");
        c.close(1.0, 1.0, 0.0, "equal");
        c.at_most(2.0, 1.0, "too big");
        assert_eq!(c.ok::<()>(usage("bad"), "err"), None);
        let out = c.finish();
        assert_eq!(out.assertions, 3);
        assert_eq!(out.failures.len(), 2);
        assert!(!out.passed());
    }

    #[test]
    fn field_suite_passes() {
        let out = run_suite("field-weyl", &SuiteOptions::default()).unwrap();
        assert!(out.passed(), "{:?}", out.failures);
        assert!(out.assertions > 100);
    }
}
