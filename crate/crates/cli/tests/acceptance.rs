//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Criterion 8 drives the release-mode key-rate sweep through the `ucpec`
//! binary and takes several minutes on a single core.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::Instant;
use ucpec::b92::{asymptotic_rates, DEFAULT_AMP};
use ucpec::compression::{
    build_decoder_povm, division_by_quadrature, exact_error_probability, operator_division, theorem_bound,
    CompressionExperiment, DecoderKind, FamilyChoice,
};
use ucpec::entropy::{
    conditional_renyi_direct, conditional_renyi_sibson, delta1_residual, delta2_residual, r_err_residual,
    solve_delta1, solve_delta2, solve_r_err, source_conditional_entropy, CqSource,
};
use ucpec::field::{Gf, WeylKind};
use ucpec::hashing::{build_dual_quadruple, enumerate_family, hashing_unitary, sample_with, HashFamilyKind};
use ucpec::linalg::{
    cr, identity, inner, kron_all, max_abs_diff, min_eig, random_density, random_hermitian, support_projector, trace_re,
    CMat, C64, LN2,
};
use ucpec::optimizer::{linearized_upper_bound, renyi_objective_and_gradient, RenyiObjective, SigmaObjective};
use ucpec::schur_weyl::{build_isotypic_blocks, domination_factor, sigma_for_string, universal_symmetric_state};

const BIN: &str = env!("CARGO_BIN_EXE_ucpec");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = fn(&mut ChaCha8Rng) -> ucpec::Result<Outcome>;

fn soundness(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let started = Instant::now();
    let (mut runs, mut violations, mut worst) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..50 {
        let source = CqSource::random(2, 2, rng);
        for n in 1..=3 {
            for m in 0..=n {
                for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
                    let exp = CompressionExperiment {
                        source: source.clone(),
                        n,
                        bins_log: m as f64,
                        decoder_kind: kind,
                        family: FamilyChoice::Exhaustive { kind: HashFamilyKind::AllSurjective },
                        trials: 1,
                        alpha_grid: None,
                    };
                    let (exact, _, _) = exact_error_probability(&exp)?;
                    let bound = theorem_bound(&exp)?.0;
                    runs += 1;
                    worst = worst.max(exact - bound);
                    if exact > bound {
                        violations += 1;
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Ok(outcome(
        violations == 0 && secs < 60.0,
        format!("{runs} experiments, {violations} violations, max(exact - bound) = {worst:.3e}, {secs:.1}s"),
    ))
}

fn division(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = 2 + i % 3;
        let a = random_density(d, d, rng);
        let b = random_density(d, d, rng) + identity(d) * cr(0.02);
        worst = worst.max(max_abs_diff(&operator_division(&a, &b)?, &division_by_quadrature(&a, &b)));
    }
    let f = Gf::of_order(2)?;
    let mut completeness = 0.0f64;
    for (n, m) in [(2, 1), (3, 1), (3, 2)] {
        for _ in 0..3 {
            let source = CqSource::random(2, 2, rng);
            let h = sample_with(&f, HashFamilyKind::AllSurjective, n, m, rng)?;
            for kind in [DecoderKind::FullyUniversal, DecoderKind::PartiallyUniversal] {
                for bin_idx in 0..1usize << m {
                    let povm = build_decoder_povm(kind, &f, &h, &f.basis_label(bin_idx, m), &source, n)?;
                    let dim = 1usize << n;
                    let (mut total, mut mix) = (CMat::zeros(dim, dim), CMat::zeros(dim, dim));
                    for (x, y) in &povm {
                        total += y;
                        mix += sigma_for_string(x, 2)?;
                    }
                    completeness = completeness.max(max_abs_diff(&total, &support_projector(&mix, 1e-12)));
                }
            }
        }
    }
    Ok(outcome(
        worst <= 1e-8 && completeness <= 1e-10,
        format!("quadrature deviation {worst:.2e} (≤ 1e-8), |ΣY − Π_supp| {completeness:.2e} (≤ 1e-10)"),
    ))
}

fn sibson(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let (mut dev, mut limit, mut monotone) = (0.0f64, 0.0f64, true);
    for i in 0..200 {
        let k = 2 + i % 2;
        let source = CqSource::random(k, 2, rng);
        let joint = source.joint();
        let alpha = [0.3, 0.5, 0.7][i % 3];
        dev = dev.max((conditional_renyi_direct(&joint, k, alpha, rng)? - conditional_renyi_sibson(&source, alpha)?).abs());
        let vals = (1..=9).map(|j| conditional_renyi_sibson(&source, j as f64 / 10.0)).collect::<ucpec::Result<Vec<_>>>()?;
        monotone &= vals.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        limit = limit.max((conditional_renyi_sibson(&source, 1.0 - 1e-7)? - source_conditional_entropy(&source)).abs());
    }
    Ok(outcome(
        dev <= 1e-6 && monotone && limit <= 1e-4,
        format!("closed vs direct {dev:.2e} (≤ 1e-6), monotone on 9-point grid: {monotone}, α→1 gap {limit:.2e} (≤ 1e-4)"),
    ))
}

fn positive_point(rng: &mut ChaCha8Rng) -> CMat {
    random_density(4, 4, rng) * cr(0.9) + identity(4) * cr(0.025)
}

fn gradient(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let data = ucpec::b92::channel_data(DEFAULT_AMP)?;
    let mut rel = 0.0f64;
    for alpha in [0.2, 0.38, 0.6] {
        for _ in 0..50 {
            let s = positive_point(rng);
            let (_, g) = renyi_objective_and_gradient(&s, alpha, &data)?;
            let dir = random_hermitian(4, rng);
            // fourth-order central stencil, so truncation stays far below the tolerance
            let h = 1e-4;
            let at = |t: f64| renyi_objective_and_gradient(&(&s + &dir * cr(t)), alpha, &data).map(|r| r.0);
            let fd = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            let an = inner(&g, &dir);
            rel = rel.max((fd - an).abs() / an.abs());
        }
    }
    let (mut below, mut tangency) = (0usize, 0.0f64);
    for i in 0..500 {
        let obj = RenyiObjective { alpha: [0.2, 0.38, 0.6][i % 3], data: data.clone(), offset: 0.0 };
        let rho = positive_point(rng);
        let sigma = positive_point(rng);
        let truth = obj.value_grad(&data.sift.apply(&rho))?.0;
        if linearized_upper_bound(&rho, &sigma, &obj, &data.sift)? < truth - 1e-12 {
            below += 1;
        }
        let at = linearized_upper_bound(&rho, &data.sift.apply(&rho), &obj, &data.sift)?;
        tangency = tangency.max((at - truth).abs());
    }
    Ok(outcome(
        rel <= 1e-5 && below == 0 && tangency <= 1e-8,
        format!("max relative FD error {rel:.2e} (≤ 1e-5), {below}/500 bounds below value, tangency {tangency:.2e} (≤ 1e-8)"),
    ))
}

fn algebra(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let mut failures = Vec::new();
    for q in [2u32, 3, 4, 5] {
        let f = Gf::of_order(q)?;
        for a in 0..q {
            let s: C64 = (0..q).map(|b| f.chi(f.mul(a, b))).sum();
            let want = if a == 0 { q as f64 } else { 0.0 };
            if (s - cr(want)).norm() > 1e-12 {
                failures.push(format!("character sum q={q} a={a}"));
            }
            for b in 0..q {
                let lhs = f.weyl_x(a) * f.weyl_z(b);
                let rhs = f.weyl_z(b) * f.weyl_x(a) * f.chi(f.neg(f.mul(a, b)));
                if max_abs_diff(&lhs, &rhs) > 1e-12 {
                    failures.push(format!("commutation q={q} a={a} b={b}"));
                }
            }
        }
        for n in 1..=3 {
            for m in 1..=n {
                for h in enumerate_family(&f, HashFamilyKind::ToeplitzBased, n, m)?.iter().take(20) {
                    if !build_dual_quadruple(&f, h)?.check(&f)? {
                        failures.push(format!("dual quadruple q={q} n={n} m={m}"));
                    }
                }
            }
        }
    }
    let f = Gf::of_order(2)?;
    let mut vectors = 0;
    for n in 1..=3 {
        for m in 1..=n {
            let h = sample_with(&f, HashFamilyKind::AllSurjective, n, m, rng)?;
            let quad = build_dual_quadruple(&f, &h)?;
            let u = hashing_unitary(&f, &quad)?;
            let (fwd, dual) = (quad.forward(), quad.dual());
            for idx in 0..1usize << n {
                let z = f.basis_label(idx, n);
                let img = f.basis_index(&fwd.left_mul_vec(&f, &z));
                if (0..1usize << n).any(|r| u[(r, idx)] != cr(if r == img { 1.0 } else { 0.0 })) {
                    failures.push(format!("Z-basis action n={n} m={m} z={z:?}"));
                }
                if (&u * f.nqudit_mub(&z) - f.nqudit_mub(&dual.left_mul_vec(&f, &z))).norm() > 1e-12 {
                    failures.push(format!("X-basis action n={n} m={m} z={z:?}"));
                }
                let lhs = u.adjoint() * f.nqudit_weyl(WeylKind::Z, &z) * &u;
                if max_abs_diff(&lhs, &f.nqudit_weyl(WeylKind::Z, &fwd.transpose().left_mul_vec(&f, &z))) > 1e-12 {
                    failures.push(format!("Z conjugation n={n} m={m} z={z:?}"));
                }
                vectors += 1;
            }
        }
    }
    Ok(outcome(failures.is_empty(), format!("{vectors} basis vectors checked, failures: {failures:?}")))
}

fn schur_weyl(rng: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let (mut proj, mut gap) = (0.0f64, f64::INFINITY);
    for n in 1..=4 {
        let blocks = build_isotypic_blocks(n, 2)?;
        let dim = 1usize << n;
        let mut total = CMat::zeros(dim, dim);
        for (i, bi) in blocks.iter().enumerate() {
            total += &bi.projector;
            for (j, bj) in blocks.iter().enumerate() {
                let want = if i == j { bi.projector.clone() } else { CMat::zeros(dim, dim) };
                proj = proj.max(max_abs_diff(&(&bi.projector * &bj.projector), &want));
            }
            proj = proj.max((trace_re(&bi.projector) - (bi.dim_u * bi.dim_v) as f64).abs());
        }
        proj = proj.max(max_abs_diff(&total, &identity(dim)));
        let sigma = universal_symmetric_state(n, 2)? * cr(domination_factor(n, 2));
        for _ in 0..20 {
            let rho = random_density(2, 2, rng);
            gap = gap.min(min_eig(&(&sigma - kron_all(&vec![rho; n]))));
        }
    }
    Ok(outcome(
        proj <= 1e-10 && gap >= -1e-10,
        format!("projector identities {proj:.2e}, min eigenvalue of poly·σ − ρ^⊗n {gap:.2e} (≥ −1e-10)"),
    ))
}

fn asymptotic(_: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let mut dw = 0.0f64;
    for p in [0.0, 0.01, 0.045] {
        let r = asymptotic_rates(DEFAULT_AMP, p, 1.0 / 3.0)?;
        dw = dw.max((r.universal - r.devetak_winter).abs());
    }
    let zero = asymptotic_rates(DEFAULT_AMP, 0.0, 1.0 / 3.0)?;
    let same = (zero.conventional - zero.universal).abs();
    let mut ordered = true;
    for i in 0..13 {
        let r = asymptotic_rates(DEFAULT_AMP, 0.005 * i as f64, 1.0 / 3.0)?;
        ordered &= r.conventional <= r.universal;
    }
    Ok(outcome(
        dw <= 1e-6 && same <= 1e-6 && ordered,
        format!("|universal − DW| {dw:.2e}, |conv − univ| at p=0 {same:.2e}, conv ≤ univ on 13 points: {ordered}"),
    ))
}

struct CsvRow {
    n_tot: f64,
    p: f64,
    analysis: String,
    rate: f64,
}

fn run_keyrate(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(BIN).arg("keyrate").args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("keyrate exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn parse_rows(bytes: &[u8]) -> Vec<CsvRow> {
    let mut rd = csv::Reader::from_reader(bytes);
    rd.records()
        .map(|r| {
            let r = r.expect("well-formed CSV");
            CsvRow { n_tot: r[0].parse().unwrap(), p: r[1].parse().unwrap(), analysis: r[2].to_string(), rate: r[7].parse().unwrap() }
        })
        .collect()
}

fn figure(_: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let started = Instant::now();
    let bytes = match run_keyrate(&[
        "--analysis",
        "both",
        "--depol",
        "0.01,0.045",
        "--ntot",
        "1e9,1e10,1e11,1e12,1e13",
        "--eps-sec",
        "2^-50",
        "--eps-cor",
        "2^-50",
        "--seed",
        "1",
        "--log-level",
        "info",
    ]) {
        Ok(b) => b,
        Err(e) => return Ok(outcome(false, e)),
    };
    let rows = parse_rows(&bytes);
    let rate = |p: f64, n: f64, a: &str| {
        rows.iter().find(|r| r.p == p && r.n_tot == n && r.analysis == a).map(|r| r.rate).unwrap_or(f64::NAN)
    };
    let mut notes = Vec::new();
    let mut pass = true;
    let mut require = |ok: bool, what: String| {
        if !ok {
            pass = false;
        }
        notes.push(format!("{}{what}", if ok { "" } else { "FAILED " }));
    };
    for n in [1e10, 1e11, 1e12, 1e13] {
        let (u, c) = (rate(0.045, n, "universal"), rate(0.045, n, "conventional"));
        require(u > c, format!("p=4.5% n={n:e}: univ {u:.5} > conv {c:.5}"));
    }
    let a045 = asymptotic_rates(DEFAULT_AMP, 0.045, 1.0 / 3.0)?;
    let a01 = asymptotic_rates(DEFAULT_AMP, 0.01, 1.0 / 3.0)?;
    require(a045.universal > a045.conventional, format!("p=4.5% asymptotic gap {:.5}", a045.universal - a045.conventional));
    let (c9, u9) = (rate(0.01, 1e9, "conventional"), rate(0.01, 1e9, "universal"));
    require(c9 > u9, format!("p=1% n=1e9: conv {c9:.5} > univ {u9:.5}"));
    let (c13, u13) = (rate(0.01, 1e13, "conventional"), rate(0.01, 1e13, "universal"));
    let rel = (c13 - u13).abs() / c13.max(u13);
    require(rel <= 0.05, format!("p=1% n=1e13: conv/univ differ by {:.2}%", 100.0 * rel));
    for (p, asym) in [(0.01, a01), (0.045, a045)] {
        for (name, target) in [("conventional", asym.conventional), ("universal", asym.universal)] {
            let got = rate(p, 1e13, name);
            let gap = (target - got).abs() / target;
            require(gap <= 0.02, format!("p={p} {name} at 1e13 within {:.2}% of asymptote", 100.0 * gap));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    require(secs < 1800.0, format!("sweep {secs:.0}s"));
    Ok(outcome(pass, notes.join("; ")))
}

fn root_finders(_: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let (mut residual, mut monotone, mut exact_zero) = (0.0f64, true, true);
    let mut worst = String::new();
    let mut track = |r: f64, label: String| {
        if r.abs() > residual {
            residual = r.abs();
            worst = label;
        }
    };
    for (n, log2_eps) in [(1e3, -20.0), (1e6, -60.0), (1e9, -101.0), (1e12, -140.0)] {
        let qs = (0..50)
            .map(|i| {
                let p = i as f64 / 50.0;
                solve_delta2(p, n, log2_eps).map(|d| p + d)
            })
            .collect::<ucpec::Result<Vec<_>>>()?;
        monotone &= qs.windows(2).all(|w| w[1] > w[0]);
        exact_zero &= solve_delta2(0.0, n, log2_eps)? == -(log2_eps / n * LN2).exp_m1();
        for i in 1..50 {
            let p = i as f64 / 50.0;
            let d2 = solve_delta2(p, n, log2_eps)?;
            track(delta2_residual(p, n, log2_eps, d2), format!("δ₂ p={p} n={n:e}"));
            let d1 = solve_delta1(p, n, log2_eps)?;
            if d1 < 1.0 - p {
                track(delta1_residual(p, n, log2_eps, d1), format!("δ₁ p={p} n={n:e}"));
            }
        }
    }
    for (ns, nsuc, nerr) in [(1e6, 1e6, 1e4), (3e8, 3e8, 1.2e7), (1e11, 1e11, 0.0), (4e12, 3.9e12, 1.7e11)] {
        let r = solve_r_err(ns, nsuc, nerr, -50.0)?;
        track(r_err_residual(ns, nsuc, nerr, -50.0, r), format!("r_err n_sift={ns:e}"));
    }
    Ok(outcome(
        residual <= 1e-10 && monotone && exact_zero,
        format!("max residual {residual:.2e} at {worst} (≤ 1e-10), δ₂(0) exact: {exact_zero}, q(p) increasing on 50 points: {monotone}"),
    ))
}

fn determinism(_: &mut ChaCha8Rng) -> ucpec::Result<Outcome> {
    let args = ["--analysis", "both", "--depol", "0.02,0.045", "--ntot", "1e8,1e10", "--alpha", "0.08", "--seed", "42"];
    let runs = [run_keyrate(&args), run_keyrate(&[&args[..], &["--threads", "1"]].concat())];
    let identical = match (&runs[0], &runs[1]) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let selftest = Command::new(BIN).arg("selftest").output().map_err(|e| ucpec::Error::Usage(e.to_string()))?;
    let summary = String::from_utf8_lossy(&selftest.stdout);
    let failing: Vec<&str> = summary.lines().filter(|l| l.starts_with("FAIL")).map(|l| l.split_whitespace().nth(1).unwrap_or("")).collect();
    Ok(outcome(
        identical && selftest.status.success(),
        format!("byte-identical CSV: {identical}; selftest exit {}, failing suites {failing:?}", selftest.status),
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("compression bound soundness", soundness),
        ("operator division and decoder completeness", division),
        ("Sibson identity", sibson),
        ("Fréchet gradient and linearisation", gradient),
        ("Weyl and hash algebra", algebra),
        ("Schur–Weyl projectors and domination", schur_weyl),
        ("asymptotic optimality", asymptotic),
        ("finite-size key-rate orderings", figure),
        ("root finders", root_finders),
        ("determinism and selftest", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let started = Instant::now();
        let (pass, detail) = match run(&mut rng) {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} ({:.1}s): {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
