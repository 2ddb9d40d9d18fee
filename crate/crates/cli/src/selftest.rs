//! `selftest`: library suites plus checks on the runner's own I/O.

use crate::args::Log2Eps;
use crate::compress::{self, CompressArgs};
use crate::keyrate::{self, KeyrateArgs};
use clap::Args;
use std::time::Instant;
use ucpec::b92::{key_length_at_point, AlphaChoice, Analysis, KeyLengthResult, KeyRatePoint, StatsMode};
use ucpec::selftest::{run_suite, Checker, SuiteOptions, SuiteOutcome, SUITES};
use ucpec::{Error, Result};

pub const CLI_SUITE: &str = "cli-runner";

#[derive(Args, Clone, Debug)]
pub struct SelftestArgs {
    /// Run a single suite.
    #[arg(long)]
    pub only: Option<String>,
    /// Skip the slowest Schur–Weyl cases.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn cli_runner() -> SuiteOutcome {
    let mut c = Checker::new(CLI_SUITE);

    // CSV schema
    let args = KeyrateArgs {
        analysis: Some(keyrate::AnalysisSel::Conventional),
        depol: Some(vec![0.02]),
        ntot: Some(vec![1e10]),
        stats: Some(keyrate::StatsSel::Expected),
        ..Default::default()
    };
    if let Some(sweep) = c.ok(keyrate::build_sweep(&args), "build sweep") {
        c.check(sweep.points.len() == 1, || format!("sweep has {} points", sweep.points.len()));
        if let Some(rows) = c.ok(keyrate::run_points(&sweep), "run sweep") {
            if let Some(bytes) = c.ok(keyrate::render_csv(&rows), "render csv") {
                let text = String::from_utf8_lossy(&bytes).to_string();
                let mut lines = text.lines();
                c.check(lines.next() == Some(keyrate::CSV_HEADER.join(",").as_str()), || "csv header".into());
                let fields: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
                c.check(fields.len() == keyrate::CSV_HEADER.len(), || format!("row has {} fields", fields.len()));
                c.check(rows[0].key_rate() > 0.0, || "positive key rate at p=0.02".into());
            }
        }
    }
    let bad = KeyrateArgs { depol: Some(vec![1.5]), ntot: Some(vec![1e9]), ..Default::default() };
    c.check(matches!(keyrate::build_sweep(&bad), Err(Error::Usage(_))), || "p > 1 accepted".into());

    // epsilon literals
    for (txt, want) in [("2^-50", -50.0), ("2^(-140)", -140.0), ("0.125", -3.0)] {
        let got = txt.parse::<Log2Eps>().map(|e| e.0);
        c.check(got == Ok(want), || format!("{txt} parsed as {got:?}"));
    }
    c.check("2^4".parse::<Log2Eps>().is_err(), || "2^4 accepted".into());

    // JSON round trip of a key-length result
    let pt = KeyRatePoint {
        amp: ucpec::b92::DEFAULT_AMP,
        p: 0.03,
        n_tot: 1e10,
        analysis: Analysis::Universal,
        log2_eps_sec: -50.0,
        log2_eps_cor: -50.0,
        alpha: AlphaChoice::Fixed(0.05),
        stats: StatsMode::Expected,
        seed: 0,
    };
    if let Some(r) = c.ok(key_length_at_point(&pt), "universal key length") {
        let back = serde_json::to_string(&r).ok().and_then(|s| serde_json::from_str::<KeyLengthResult>(&s).ok());
        c.check(back.as_ref() == Some(&r), || "key-length JSON round trip".into());
    }
    let pt_json = serde_json::to_string(&pt).ok().and_then(|s| serde_json::from_str::<KeyRatePoint>(&s).ok());
    c.check(pt_json == Some(pt), || "key-rate point JSON round trip".into());

    // compress-sim determinism and report round trip
    let cargs = CompressArgs { n: Some(2), alphabet: Some(2), d: Some(2), bins_log: Some(1.0), seed: Some(7), ..Default::default() };
    let a = compress::run(&cargs).and_then(|r| serde_json::to_string(&r).map_err(|e| Error::Usage(e.to_string())));
    let b = compress::run(&cargs).and_then(|r| serde_json::to_string(&r).map_err(|e| Error::Usage(e.to_string())));
    match (a, b) {
        (Ok(a), Ok(b)) => {
            c.check(a == b, || "compress-sim output differs between identical runs".into());
            let parsed = serde_json::from_str::<compress::CompressReport>(&a).map(|r| r.seed);
            c.check(parsed.ok() == Some(7), || "report JSON round trip".into());
        }
        (a, b) => c.check(false, || format!("compress-sim failed: {:?} {:?}", a.err(), b.err())),
    }
    c.finish()
}

pub fn cmd_selftest(args: SelftestArgs) -> Result<bool> {
    let mut opts = SuiteOptions { quick: args.quick, ..Default::default() };
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    let names: Vec<&str> = match &args.only {
        Some(one) if one == CLI_SUITE || SUITES.contains(&one.as_str()) => vec![one.as_str()],
        Some(one) => return Err(Error::Usage(format!("unknown suite '{one}'; known: {}, {CLI_SUITE}", SUITES.join(", ")))),
        None => SUITES.iter().copied().chain([CLI_SUITE]).collect(),
    };
    let started = Instant::now();
    let (mut total, mut failed_suites) = (0usize, 0usize);
    for name in names {
        let out = if name == CLI_SUITE { cli_runner() } else { run_suite(name, &opts)? };
        total += out.assertions;
        let status = if out.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<22} {:>6} assertions {:>9.2}s", out.name, out.assertions, out.elapsed.as_secs_f64());
        for f in &out.failures {
            println!("    {f}");
        }
        if !out.passed() {
            failed_suites += 1;
        }
    }
    println!("total: {total} assertions, {failed_suites} failing suite(s), {:.2}s", started.elapsed().as_secs_f64());
    Ok(failed_suites == 0)
}
