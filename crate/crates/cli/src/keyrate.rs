//! `keyrate` and `keyrate-asymptotic`: grid sweeps over the B92 analyses.

use crate::args::{output_path, overlay, parse_grid, read_config, Log2Eps, LogLevel};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;
use ucpec::b92::{asymptotic_rates, key_length_at_point, AlphaChoice, Analysis, KeyRatePoint, StatsMode, DEFAULT_AMP};
use ucpec::{Error, Result};

pub const CSV_HEADER: [&str; 12] = [
    "n_tot",
    "p",
    "analysis",
    "alpha_renyi",
    "n_fin",
    "ec_cost",
    "net_key",
    "key_rate",
    "eps_sec",
    "eps_cor",
    "seed",
    "flag",
];

pub const ASYMPTOTIC_HEADER: [&str; 5] = ["p", "conventional", "universal", "devetak_winter", "extraction_fraction"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisSel {
    Conventional,
    Universal,
    Both,
}

impl AnalysisSel {
    fn list(self) -> Vec<Analysis> {
        match self {
            AnalysisSel::Conventional => vec![Analysis::Conventional],
            AnalysisSel::Universal => vec![Analysis::Universal],
            AnalysisSel::Both => vec![Analysis::Conventional, Analysis::Universal],
        }
    }
}

fn parse_alpha(s: &str) -> std::result::Result<AlphaChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(AlphaChoice::AUTO);
    }
    let a: f64 = s.parse().map_err(|_| format!("alpha must be 'auto' or a number, got '{s}'"))?;
    if a > 0.0 && a < 1.0 {
        Ok(AlphaChoice::Fixed(a))
    } else {
        Err(format!("alpha {a} outside (0,1)"))
    }
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct KeyrateArgs {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub analysis: Option<AnalysisSel>,
    /// Depolarizing parameters, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub depol: Option<Vec<f64>>,
    /// Total pulse counts, comma separated (e.g. 1e8,1e10).
    #[arg(long, value_delimiter = ',')]
    pub ntot: Option<Vec<f64>>,
    #[arg(long)]
    pub eps_sec: Option<Log2Eps>,
    #[arg(long)]
    pub eps_cor: Option<Log2Eps>,
    /// State amplitude α of the B92 states.
    #[arg(long)]
    pub amp: Option<f64>,
    /// Rényi parameter for the universal analysis: a number in (0,1) or `auto`.
    #[arg(long, value_parser = parse_alpha)]
    #[serde(default, deserialize_with = "de_alpha")]
    pub alpha: Option<AlphaChoice>,
    #[arg(long, value_enum)]
    pub stats: Option<StatsSel>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; stdout when absent or `-`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional log-x chart of the key rates.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub log_level: Option<LogLevel>,
}

fn de_alpha<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<AlphaChoice>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    let raw = Option::<Raw>::deserialize(d)?;
    raw.map(|r| match r {
        Raw::Num(a) => parse_alpha(&a.to_string()),
        Raw::Text(s) => parse_alpha(&s),
    })
    .transpose()
    .map_err(serde::de::Error::custom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StatsSel {
    Sampled,
    Expected,
}

impl KeyrateArgs {
    pub fn resolve(self) -> Result<Self> {
        let file: KeyrateArgs = read_config(self.config.as_deref())?;
        Ok(overlay!(KeyrateArgs: self, file; analysis, depol, ntot, eps_sec, eps_cor, amp, alpha, stats, seed, out, svg, threads, log_level))
    }
}

/// Fully resolved sweep.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub points: Vec<KeyRatePoint>,
    pub threads: Option<usize>,
}

pub fn build_sweep(a: &KeyrateArgs) -> Result<Sweep> {
    let analyses = a.analysis.unwrap_or(AnalysisSel::Both).list();
    let depol = a.depol.clone().ok_or_else(|| Error::Usage("--depol is required".into()))?;
    let ntot = a.ntot.clone().ok_or_else(|| Error::Usage("--ntot is required".into()))?;
    let amp = a.amp.unwrap_or(DEFAULT_AMP);
    let eps_sec = a.eps_sec.unwrap_or(Log2Eps(-50.0));
    let eps_cor = a.eps_cor.unwrap_or(Log2Eps(-50.0));
    if depol.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Usage("depolarizing parameters must lie in [0,1]".into()));
    }
    if ntot.iter().any(|n| !(*n >= 3.0) || !n.is_finite()) {
        return Err(Error::Usage("n_tot values must be finite and at least 3".into()));
    }
    if !(amp > 0.0 && amp < std::f64::consts::FRAC_1_SQRT_2) {
        return Err(Error::Usage(format!("amplitude {amp} outside (0, 1/√2)")));
    }
    if a.threads == Some(0) {
        return Err(Error::Usage("--threads must be positive".into()));
    }
    let stats = match a.stats.unwrap_or(StatsSel::Sampled) {
        StatsSel::Sampled => StatsMode::Sampled,
        StatsSel::Expected => StatsMode::Expected,
    };
    let mut points = Vec::new();
    for &p in &depol {
        for &n_tot in &ntot {
            for &analysis in &analyses {
                points.push(KeyRatePoint {
                    amp,
                    p,
                    n_tot,
                    analysis,
                    log2_eps_sec: eps_sec.0,
                    log2_eps_cor: eps_cor.0,
                    alpha: a.alpha.unwrap_or(AlphaChoice::AUTO),
                    stats,
                    seed: a.seed.unwrap_or(0),
                });
            }
        }
    }
    Ok(Sweep { points, threads: a.threads })
}

/// One CSV row; numeric fields are `None` when the point produced no key length.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub point: KeyRatePoint,
    pub alpha_renyi: Option<f64>,
    pub n_fin: Option<f64>,
    pub ec_cost: Option<f64>,
    pub net_key: f64,
    pub eps_sec: f64,
    pub flag: String,
}

impl Row {
    pub fn key_rate(&self) -> f64 {
        self.net_key / self.point.n_tot
    }
}

fn analysis_name(a: Analysis) -> &'static str {
    match a {
        Analysis::Conventional => "conventional",
        Analysis::Universal => "universal",
    }
}

/// Evaluates one point. Infeasible or degenerate problems become flagged zero rows;
/// usage and capacity errors abort the sweep.
pub fn evaluate(pt: &KeyRatePoint) -> Result<Row> {
    let started = Instant::now();
    let out = key_length_at_point(pt);
    log::debug!("p={} n_tot={:e} {:?}: {:.2?}", pt.p, pt.n_tot, pt.analysis, started.elapsed());
    match out {
        Ok(r) => Ok(Row {
            point: *pt,
            alpha_renyi: r.alpha_renyi,
            n_fin: Some(r.n_fin),
            ec_cost: Some(r.ec_cost),
            net_key: r.net_key,
            eps_sec: r.log2_eps_sec.exp2(),
            flag: if r.clamped { "clamped".into() } else { String::new() },
        }),
        Err(e @ (Error::Infeasible { .. } | Error::Domain(_))) => Ok(Row {
            point: *pt,
            alpha_renyi: None,
            n_fin: None,
            ec_cost: None,
            net_key: 0.0,
            eps_sec: pt.log2_eps_sec.exp2(),
            flag: match e {
                Error::Infeasible { .. } => format!("infeasible: {e}"),
                _ => format!("degenerate: {e}"),
            },
        }),
        Err(e) => Err(e),
    }
}

pub fn run_points(sweep: &Sweep) -> Result<Vec<Row>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = sweep.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    // indexed parallel collect keeps grid order
    pool.install(|| sweep.points.par_iter().map(evaluate).collect())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Usage(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.point.n_tot.to_string(),
            r.point.p.to_string(),
            analysis_name(r.point.analysis).to_string(),
            num(r.alpha_renyi),
            num(r.n_fin),
            num(r.ec_cost),
            r.net_key.to_string(),
            r.key_rate().to_string(),
            r.eps_sec.to_string(),
            r.point.log2_eps_cor.exp2().to_string(),
            r.point.seed.to_string(),
            r.flag.clone(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Usage(format!("csv: {e}")))
}

/// Minimal log-x line chart, one series per (p, analysis).
pub fn render_svg(rows: &[Row]) -> String {
    let (w, h, m) = (640.0, 400.0, 56.0);
    let mut series: Vec<((u64, Analysis), Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let key = (r.point.p.to_bits(), r.point.analysis);
        let pt = (r.point.n_tot.log10(), r.key_rate());
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(pt),
            None => series.push((key, vec![pt])),
        }
    }
    let xs = rows.iter().map(|r| r.point.n_tot.log10());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let y1 = rows.iter().map(|r| r.key_rate()).fold(0.0f64, f64::max).max(1e-12);
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| m + (x - x0) / span * (w - 2.0 * m);
    let py = |y: f64| h - m - y / y1 * (h - 2.0 * m);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    s += &format!(
        "<path d=\"M{m} {m} V{} H{}\" stroke=\"black\" fill=\"none\"/>\n",
        h - m,
        w - m
    );
    for dec in x0.ceil() as i64..=x1.floor() as i64 {
        let x = px(dec as f64);
        s += &format!("<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{dec}</text>\n", h - m + 18.0);
    }
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">n_tot</text>\n", w / 2.0, h - 12.0);
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y1:.3e}</text>\n", m - 4.0, m + 4.0);
    s += &format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">0</text>\n", m - 4.0, h - m + 4.0);
    for (i, ((pbits, analysis), pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        s += &format!("<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>\n", path.join(" "));
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">p={} {}</text>\n",
            w - m - 150.0,
            m + 16.0 * (i as f64 + 1.0),
            f64::from_bits(*pbits),
            analysis_name(*analysis)
        );
    }
    s += "</svg>\n";
    s
}

pub fn write_output(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Usage(format!("cannot write output: {e}"));
    match output_path(out) {
        Some(p) => std::fs::write(p, bytes).map_err(io),
        None => {
            let mut lock = std::io::stdout().lock();
            lock.write_all(bytes).map_err(io)?;
            lock.flush().map_err(io)
        }
    }
}

pub fn cmd_keyrate(args: KeyrateArgs) -> Result<()> {
    let args = args.resolve()?;
    crate::args::init_logging(args.log_level.unwrap_or_default());
    let sweep = build_sweep(&args)?;
    log::info!("{} grid points", sweep.points.len());
    let rows = run_points(&sweep)?;
    write_output(&args.out, &render_csv(&rows)?)?;
    if let Some(svg) = &args.svg {
        std::fs::write(svg, render_svg(&rows)).map_err(|e| Error::Usage(format!("cannot write {}: {e}", svg.display())))?;
    }
    Ok(())
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AsymptoticArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// `start:stop:step` grid of depolarizing parameters.
    #[arg(long)]
    pub depol_grid: Option<String>,
    #[arg(long)]
    pub amp: Option<f64>,
    /// Fraction of pulses used for key extraction.
    #[arg(long)]
    pub extraction_fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub log_level: Option<LogLevel>,
}

pub fn cmd_keyrate_asymptotic(args: AsymptoticArgs) -> Result<()> {
    let file: AsymptoticArgs = read_config(args.config.as_deref())?;
    let args = overlay!(AsymptoticArgs: args, file; depol_grid, amp, extraction_fraction, out, threads, log_level);
    crate::args::init_logging(args.log_level.unwrap_or_default());
    let grid = parse_grid(args.depol_grid.as_deref().unwrap_or("0:0.06:0.005")).map_err(Error::Usage)?;
    if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Usage("depolarizing parameters must lie in [0,1]".into()));
    }
    let amp = args.amp.unwrap_or(DEFAULT_AMP);
    let frac = args.extraction_fraction.unwrap_or(1.0 / 3.0);
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Usage("extraction fraction must lie in (0,1]".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let rates: Vec<_> = pool.install(|| grid.par_iter().map(|&p| asymptotic_rates(amp, p, frac)).collect::<Result<_>>())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Usage(format!("csv: {e}"));
    w.write_record(ASYMPTOTIC_HEADER).map_err(io)?;
    for r in &rates {
        w.write_record([
            r.p.to_string(),
            r.conventional.to_string(),
            r.universal.to_string(),
            r.devetak_winter.to_string(),
            r.extraction_fraction.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(format!("csv: {e}")))?;
    write_output(&args.out, &bytes)
}
