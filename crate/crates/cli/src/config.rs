//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Deserialize;

use singheat::biortho::MAX_FAMILY;
use singheat::{Error, Result};

/// Numbers may be given as JSON numbers or decimal strings; either way they
/// are re-parsed at the working precision.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Number {
    Text(String),
    Float(f64),
}

impl Number {
    pub fn text(&self) -> String {
        match self {
            Number::Text(s) => s.trim().to_string(),
            Number::Float(x) => x.to_string(),
        }
    }
}

/// Keys accepted in a `--config` file; every key mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mu: Option<Number>,
    pub mu_list: Option<Vec<Number>>,
    #[serde(rename = "T")]
    pub horizon: Option<Number>,
    #[serde(rename = "T_list")]
    pub horizon_list: Option<Vec<Number>>,
    #[serde(rename = "K")]
    pub count: Option<usize>,
    pub precision_bits: Option<u32>,
    #[serde(rename = "P")]
    pub p: Option<f64>,
    pub u0: Option<String>,
    #[serde(rename = "uT")]
    pub u_t: Option<String>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub samples: Option<usize>,
    pub xgrid: Option<usize>,
    pub tgrid: Option<usize>,
    pub steps: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Eigen table for the first K modes
    Spectrum,
    /// Biorthogonal family with residual report and norm fit
    Biortho,
    /// Control synthesis; `--samples` adds a (t, f, g) CSV
    Synthesize,
    /// Terminal state and field samples on an x/t grid
    Simulate,
    /// Null-control cost over a list of mu
    CostSweep,
    /// Null-control cost over a list of horizons
    TimeSweep,
    /// Solution mapped to the degenerate variables (xi, phi)
    Transform,
    /// Full invariant suite; exit 0 iff every check passes
    Verify,
}

impl Command {
    fn needs_moments(self) -> bool {
        !matches!(self, Command::Spectrum | Command::Verify)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with any of the keys below; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// Comma-separated list of mu
    #[arg(long = "mu-list", global = true, allow_hyphen_values = true)]
    pub mu_list: Option<String>,
    /// Control horizon
    #[arg(long = "T", global = true)]
    pub horizon: Option<String>,
    /// Comma-separated list of horizons
    #[arg(long = "T-list", global = true)]
    pub horizon_list: Option<String>,
    /// Number of modes
    #[arg(long = "K", global = true)]
    pub count: Option<usize>,
    #[arg(long = "precision-bits", global = true)]
    pub precision_bits: Option<u32>,
    /// Admissibility exponent; fitted from the family when omitted
    #[arg(long = "P", global = true)]
    pub p: Option<f64>,
    /// Initial datum: phi:<k>, poly_bubble, or modal:<c1,c2,...>
    #[arg(long, global = true)]
    pub u0: Option<String>,
    /// Target: zero (default), phi:<k>, poly_bubble, or modal:<...>
    #[arg(long = "uT", global = true)]
    pub u_t: Option<String>,
    /// JSON output path (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// CSV output path
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Time samples for the control CSV
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Interior x points (uniform in (0, 1])
    #[arg(long, global = true)]
    pub xgrid: Option<usize>,
    /// Time intervals on [0, T]
    #[arg(long, global = true)]
    pub tgrid: Option<usize>,
    /// Steps of the exponential-integrator crosscheck (simulate)
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long = "cache-dir", global = true, env = "SINGHEAT_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
}

/// Initial or target datum from the built-in set.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Zero,
    Mode(usize),
    PolyBubble,
    Modal(Vec<String>),
}

impl Datum {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::Config(format!("unknown datum '{text}': use zero, phi:<k>, poly_bubble or modal:<c1,c2,...>"));
        match text.split_once(':') {
            None if text == "zero" => Ok(Datum::Zero),
            None if text == "poly_bubble" => Ok(Datum::PolyBubble),
            Some(("phi", k)) => match k.trim().parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Datum::Mode(k)),
                _ => Err(bad()),
            },
            Some(("modal", list)) => {
                let v = split_list(list);
                if v.is_empty() {
                    Err(bad())
                } else {
                    Ok(Datum::Modal(v))
                }
            }
            _ => Err(bad()),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

/// Fully merged and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub mu: Option<String>,
    pub mu_list: Vec<String>,
    pub horizon: Option<String>,
    pub horizon_list: Vec<String>,
    pub count: usize,
    pub precision_bits: u32,
    pub p: Option<f64>,
    pub u0: Datum,
    pub u_t: Datum,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub samples: Option<usize>,
    pub xgrid: usize,
    pub tgrid: usize,
    pub steps: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

pub const DEFAULT_BITS: u32 = 256;
pub const DEFAULT_COUNT: usize = 6;
pub const DEFAULT_GRID: usize = 20;

impl RunConfig {
    pub fn resolve(command: Command, flags: Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let num = |n: Option<Number>| n.map(|n| n.text());
        let list = |flag: Option<String>, file: Option<Vec<Number>>| {
            flag.map(|s| split_list(&s))
                .or_else(|| file.map(|v| v.iter().map(Number::text).collect()))
                .unwrap_or_default()
        };
        let datum = |flag: Option<String>, file: Option<String>, default: Datum| match flag.or(file) {
            Some(s) => Datum::parse(&s),
            None => Ok(default),
        };
        let cfg = RunConfig {
            command,
            mu: flags.mu.or(num(file.mu)),
            mu_list: list(flags.mu_list, file.mu_list),
            horizon: flags.horizon.or(num(file.horizon)),
            horizon_list: list(flags.horizon_list, file.horizon_list),
            count: flags.count.or(file.count).unwrap_or(DEFAULT_COUNT),
            precision_bits: flags.precision_bits.or(file.precision_bits).unwrap_or(DEFAULT_BITS),
            p: flags.p.or(file.p),
            u0: datum(flags.u0, file.u0, Datum::Mode(1))?,
            u_t: datum(flags.u_t, file.u_t, Datum::Zero)?,
            out: flags.out.or(file.out),
            csv: flags.csv.or(file.csv),
            samples: flags.samples.or(file.samples),
            xgrid: flags.xgrid.or(file.xgrid).unwrap_or(DEFAULT_GRID),
            tgrid: flags.tgrid.or(file.tgrid).unwrap_or(DEFAULT_GRID),
            steps: flags.steps.or(file.steps),
            cache_dir: flags.cache_dir.or(file.cache_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the working precision; the
    /// μ < 1/4 requirement is enforced when μ is parsed.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.precision_bits < 53 {
            return cfg(format!("precision_bits must be >= 53, got {}", self.precision_bits));
        }
        if self.count == 0 {
            return cfg("K must be at least 1".into());
        }
        if self.command.needs_moments() && self.count > MAX_FAMILY {
            return cfg(format!("K must be <= {MAX_FAMILY} for moment subcommands, got {}", self.count));
        }
        if let Some(p) = self.p {
            if !(p.is_finite() && p > 0.0) {
                return cfg("P must be positive".into());
            }
        }
        if self.xgrid == 0 || self.tgrid == 0 {
            return cfg("xgrid and tgrid must be positive".into());
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { cfg(format!("{what} is required for this subcommand")) };
        match self.command {
            Command::Spectrum => need(self.mu.is_some(), "--mu"),
            Command::Biortho | Command::Synthesize | Command::Simulate | Command::Transform => {
                need(self.mu.is_some(), "--mu")?;
                need(self.horizon.is_some(), "--T")
            }
            Command::CostSweep => {
                need(!self.mu_list.is_empty(), "--mu-list")?;
                need(self.horizon.is_some(), "--T")
            }
            Command::TimeSweep => {
                need(self.mu.is_some(), "--mu")?;
                need(!self.horizon_list.is_empty(), "--T-list")
            }
            Command::Verify => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datum_specs() {
        assert_eq!(Datum::parse("phi:3").unwrap(), Datum::Mode(3));
        assert_eq!(Datum::parse("poly_bubble").unwrap(), Datum::PolyBubble);
        assert_eq!(Datum::parse("modal:1, 0,0.5").unwrap(), Datum::Modal(vec!["1".into(), "0".into(), "0.5".into()]));
        assert!(Datum::parse("phi:0").is_err());
        assert!(Datum::parse("sin").is_err());
    }

    #[test]
    fn file_numbers_accept_strings_and_floats() {
        let f: FileConfig = serde_json::from_str(r#"{"mu": "-0.5", "T": 1, "K": 4}"#).unwrap();
        assert_eq!(f.mu.unwrap().text(), "-0.5");
        assert_eq!(f.horizon.unwrap().text(), "1");
        assert!(serde_json::from_str::<FileConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file_and_validate() {
        let flags = Flags {
            mu: Some("0.1".into()),
            horizon: Some("1".into()),
            count: Some(31),
            ..Flags::default()
        };
        let err = RunConfig::resolve(Command::Synthesize, flags).unwrap_err();
        assert!(err.is_validation());
    }
}
