//! Flag and config-file types shared by the subcommands.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use ucpec::Error;

/// A probability held as its base-2 logarithm.
///
/// Accepts `2^-k` (also `2^(-k)`) literally, so budgets such as `2^-140`
/// never pass through a denormal float, as well as plain decimals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EpsRepr", into = "String")]
pub struct Log2Eps(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum EpsRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<EpsRepr> for Log2Eps {
    type Error = String;
    fn try_from(r: EpsRepr) -> Result<Self, String> {
        match r {
            EpsRepr::Num(v) => Log2Eps::from_prob(v),
            EpsRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Log2Eps> for String {
    fn from(e: Log2Eps) -> String {
        e.to_string()
    }
}

impl Log2Eps {
    fn from_prob(v: f64) -> Result<Self, String> {
        if v > 0.0 && v < 1.0 {
            Ok(Log2Eps(v.log2()))
        } else {
            Err(format!("probability {v} must lie strictly between 0 and 1"))
        }
    }

    pub fn value(self) -> f64 {
        self.0.exp2()
    }
}

impl FromStr for Log2Eps {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if let Some(exp) = t.strip_prefix("2^") {
            let exp = exp.trim_start_matches('(').trim_end_matches(')');
            let k: f64 = exp.parse().map_err(|_| format!("cannot parse exponent in '{s}'"))?;
            if !(k < 0.0) || !k.is_finite() {
                return Err(format!("'{s}' is not below one"));
            }
            return Ok(Log2Eps(k));
        }
        let v: f64 = t.parse().map_err(|_| format!("expected a probability or 2^-k, got '{s}'"))?;
        Log2Eps::from_prob(v)
    }
}

impl std::fmt::Display for Log2Eps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "2^{}", self.0)
    }
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{s}' is not start:stop:step"));
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number '{p}' in grid '{s}'")))
        .collect::<Result<Vec<_>, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || b < a {
        return Err(format!("grid '{s}' needs start ≤ stop and a positive step"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(format!("grid '{s}' has too many points"));
    }
    // index times step avoids accumulating rounding
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

/// Reads a JSON config; unknown keys are rejected by the target type.
pub fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, Error> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
}

/// Field-wise `flags.or(file)` for structs whose fields are all `Option`.
macro_rules! overlay {
    ($ty:ident: $flags:expr, $file:expr; $($field:ident),+ $(,)?) => {{
        let (flags, file) = ($flags, $file);
        $ty { $($field: flags.$field.or(file.$field),)+ ..flags }
    }};
}
pub(crate) use overlay;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    #[default]
    Info,
    Debug,
}

pub fn init_logging(level: LogLevel) {
    let filter = match level {
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    // a second initialisation (tests) is harmless
    let _ = env_logger::Builder::new().filter_level(filter).format_timestamp(None).try_init();
}

pub fn output_path(out: &Option<PathBuf>) -> Option<&Path> {
    out.as_deref().filter(|p| p.as_os_str() != "-")
}
