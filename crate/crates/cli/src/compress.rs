//! `compress-sim`: one exhaustive or sampled compression experiment.

use crate::args::{overlay, read_config, LogLevel};
use crate::keyrate::write_output;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use ucpec::compression::{run_experiment, CompressionExperiment, DecoderKind, ErrorReport, FamilyChoice};
use ucpec::entropy::CqSource;
use ucpec::field::FiniteFieldSpec;
use ucpec::hashing::{HashFamilyKind, HashFamilySpec};
use ucpec::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DecoderSel {
    Full,
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilySel {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum HashSel {
    AllSurjective,
    Toeplitz,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CompressArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Block length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Source alphabet size |X| (a prime power).
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Side-information dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// log₂ of the number of bins.
    #[arg(long)]
    pub bins_log: Option<f64>,
    #[arg(long, value_enum)]
    pub decoder: Option<DecoderSel>,
    #[arg(long, value_enum)]
    pub family: Option<FamilySel>,
    #[arg(long, value_enum)]
    pub hash: Option<HashSel>,
    /// Members drawn when the family is sampled.
    #[arg(long)]
    pub trials: Option<usize>,
    /// JSON file with a `{probs, states}` source; random from the seed otherwise.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub log_level: Option<LogLevel>,
}

/// The report file: error figures, the echoed experiment and the seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompressReport {
    #[serde(flatten)]
    pub report: ErrorReport,
    pub config: CompressionExperiment,
    pub seed: u64,
}

pub fn build_experiment(a: &CompressArgs) -> Result<(CompressionExperiment, u64)> {
    let seed = a.seed.unwrap_or(0);
    let n = a.n.ok_or_else(|| Error::Usage("--n is required".into()))?;
    let bins_log = a.bins_log.ok_or_else(|| Error::Usage("--bins-log is required".into()))?;
    let source = match &a.source {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
            let s: CqSource = serde_json::from_str(&text).map_err(|e| Error::Usage(format!("source {}: {e}", path.display())))?;
            s.validate()?;
            s
        }
        None => {
            let k = a.alphabet.unwrap_or(2);
            let d = a.d.unwrap_or(2);
            if k < 2 || d < 1 {
                return Err(Error::Usage("need --alphabet ≥ 2 and --d ≥ 1".into()));
            }
            CqSource::random(k, d, &mut ChaCha8Rng::seed_from_u64(seed))
        }
    };
    let k = source.alphabet();
    let kind = match a.hash.unwrap_or(HashSel::AllSurjective) {
        HashSel::AllSurjective => HashFamilyKind::AllSurjective,
        HashSel::Toeplitz => HashFamilyKind::ToeplitzBased,
    };
    let family = match a.family.unwrap_or(FamilySel::Exhaustive) {
        FamilySel::Exhaustive => FamilyChoice::Exhaustive { kind },
        FamilySel::Sampled => {
            let m = bins_log / (k as f64).log2();
            let field = FiniteFieldSpec::of_order(k as u32).map_err(|_| Error::Usage(format!("alphabet {k} is not a prime power")))?;
            FamilyChoice::Sampled(HashFamilySpec { kind, n, m: m.round().max(0.0) as usize, field, seed })
        }
    };
    let decoder_kind = match a.decoder.unwrap_or(DecoderSel::Partial) {
        DecoderSel::Full => DecoderKind::FullyUniversal,
        DecoderSel::Partial => DecoderKind::PartiallyUniversal,
    };
    let exp = CompressionExperiment {
        source,
        n,
        bins_log,
        decoder_kind,
        family,
        trials: a.trials.unwrap_or(64),
        alpha_grid: a.alpha_grid.clone(),
    };
    Ok((exp, seed))
}

pub fn run(a: &CompressArgs) -> Result<CompressReport> {
    let (exp, seed) = build_experiment(a)?;
    let out = run_experiment(&exp)?;
    Ok(CompressReport { report: out.report, config: out.config, seed })
}

pub fn cmd_compress_sim(args: CompressArgs) -> Result<()> {
    let file: CompressArgs = read_config(args.config.as_deref())?;
    let args = overlay!(CompressArgs: args, file; n, alphabet, d, bins_log, decoder, family, hash, trials, source, alpha_grid, seed, out, log_level);
    crate::args::init_logging(args.log_level.unwrap_or_default());
    let report = run(&args)?;
    log::info!("exact {:e}, bound {:e}", report.report.exact_perr, report.report.bound_perr);
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Usage(format!("json: {e}")))?;
    text.push('\n');
    write_output(&args.out, text.as_bytes())
}
