//! Run configuration: command-line flags over an optional TOML file over the
//! pinned defaults (p = 3, tower F_p, F_{p^2}, F_{p^3}, 64 samples, seed 0).

use std::path::{Path, PathBuf};

use pisupport::{Field, FieldKind};
use serde::{Deserialize, Serialize};

use crate::report::CliError;

pub const DEFAULT_P: u32 = 3;
pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Verify {
    /// One recipe, one decider.
    Fast,
    /// Both π-operator recipes, the rank criterion, and both complex deciders;
    /// any disagreement is an assertion failure.
    CrossOracle,
}

/// Values as they arrive from flags or the config file; `None` means unset.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub p: Option<u32>,
    pub field: Option<FieldList>,
    pub r: Option<RSpec>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub format: Option<Format>,
    pub verify: Option<Verify>,
    pub corpus: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum FieldList {
    One(String),
    Many(Vec<String>),
}

impl FieldList {
    fn entries(&self) -> Vec<String> {
        match self {
            FieldList::One(s) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
            FieldList::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RSpec {
    Single(usize),
    Text(String),
}

impl RSpec {
    /// `3`, `"3"`, `"1..3"` or `"1-3"`; ranges are inclusive.
    fn range(&self) -> Result<(usize, usize), CliError> {
        let (lo, hi) = match self {
            RSpec::Single(r) => (*r, *r),
            RSpec::Text(s) => {
                let s = s.trim();
                let parse = |x: &str| {
                    x.trim().parse::<usize>().map_err(|_| CliError::invalid("config", format!("bad r range {s:?}")))
                };
                match s.split_once("..").or_else(|| s.split_once('-')) {
                    Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
                    None => {
                        let r = parse(s)?;
                        (r, r)
                    }
                }
            }
        };
        if lo == 0 || hi < lo {
            return Err(CliError::invalid("config", format!("r range {lo}..{hi} must satisfy 1 <= lo <= hi")));
        }
        Ok((lo, hi))
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub p: u32,
    /// Whether `p` came from a flag or the config file rather than the default.
    pub p_explicit: bool,
    pub tower: Vec<Field>,
    pub r_range: (usize, usize),
    pub seed: u64,
    pub samples: usize,
    pub format: Format,
    pub verify: Verify,
    pub corpus: PathBuf,
}

/// The part of the configuration echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub p: u32,
    pub tower: Vec<String>,
    pub r: [usize; 2],
    pub seed: u64,
    pub samples: usize,
    pub verify: Verify,
}

impl RunConfig {
    pub fn resolve(flags: Overrides, config_path: Option<&Path>) -> Result<RunConfig, CliError> {
        let file = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::invalid("io", format!("{}: {e}", path.display())))?;
                toml::from_str::<Overrides>(&text)
                    .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?
            }
            None => Overrides::default(),
        };
        let p_explicit = flags.p.is_some() || file.p.is_some();
        let p = flags.p.or(file.p).unwrap_or(DEFAULT_P);
        let tower = match flags.field.or(file.field) {
            Some(list) => parse_field_list(p, &list.entries())?,
            None => default_cli_tower(p)?,
        };
        let r_range = match flags.r.or(file.r) {
            Some(arg) => arg.range()?,
            None => (1, 1),
        };
        let samples = flags.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(CliError::invalid("config", "samples must be positive"));
        }
        let corpus = flags
            .corpus
            .or(file.corpus)
            .or_else(|| std::env::var_os("PISUPPORT_CORPUS").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus"));
        Ok(RunConfig {
            p,
            p_explicit,
            tower,
            r_range,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            samples,
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            verify: flags.verify.or(file.verify).unwrap_or(Verify::Fast),
            corpus,
        })
    }

    pub fn rs(&self) -> impl Iterator<Item = usize> {
        self.r_range.0..=self.r_range.1
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            p: self.p,
            tower: self.tower.iter().map(Field::name).collect(),
            r: [self.r_range.0, self.r_range.1],
            seed: self.seed,
            samples: self.samples,
            verify: self.verify,
        }
    }

    /// Adopts the characteristic an input dictates, unless the user pinned a
    /// different one.
    pub fn fit_p(&self, required: Option<u32>) -> Result<RunConfig, CliError> {
        match required {
            Some(q) if q != self.p && self.p_explicit => Err(CliError::invalid(
                "characteristic",
                format!("input has characteristic {q} but p = {} was requested", self.p),
            )),
            Some(q) => self.with_p(q),
            None => Ok(self.clone()),
        }
    }

    /// The same configuration in another characteristic, keeping the shape
    /// of the tower (prime, ext d, ratfun).
    pub fn with_p(&self, p: u32) -> Result<RunConfig, CliError> {
        if p == self.p {
            return Ok(self.clone());
        }
        let tower = self
            .tower
            .iter()
            .map(|f| match f.kind() {
                FieldKind::Prime => Field::prime(p),
                FieldKind::Extension(d) => Field::extension(p, *d),
                FieldKind::RatFun => Field::ratfun(p),
            })
            .collect::<pisupport::Result<Vec<_>>>()
            .map_err(CliError::from)?;
        Ok(RunConfig { p, tower, ..self.clone() })
    }
}

pub fn default_cli_tower(p: u32) -> Result<Vec<Field>, CliError> {
    Ok(vec![Field::prime(p)?, Field::extension(p, 2)?, Field::extension(p, 3)?])
}

/// Tower entries: `prime`, `ext<d>`, `ratfun`, or field names such as
/// `F_9` and `F_3(s)`.
pub fn parse_field_list(p: u32, entries: &[String]) -> Result<Vec<Field>, CliError> {
    if entries.is_empty() {
        return Err(CliError::invalid("config", "empty field tower"));
    }
    entries
        .iter()
        .map(|e| {
            let e = e.trim();
            if let Some(rest) = e.strip_prefix("F_") {
                if let Some(q) = rest.strip_suffix("(s)") {
                    return match q.parse::<u32>() {
                        Ok(q) if q == p => Ok(Field::ratfun(p)?),
                        _ => Err(CliError::invalid("config", format!("{e} is not F_{p}(s)"))),
                    };
                }
                let q: u64 = rest.parse().map_err(|_| CliError::invalid("config", format!("bad field name {e:?}")))?;
                let mut d = 0u32;
                let mut pow = 1u64;
                while pow < q {
                    pow *= p as u64;
                    d += 1;
                }
                return match (pow == q, d) {
                    (true, 1) => Ok(Field::prime(p)?),
                    (true, d) if d >= 2 => Ok(Field::extension(p, d)?),
                    _ => Err(CliError::invalid("config", format!("{e} is not a field of characteristic {p}"))),
                };
            }
            Ok(pisupport::support::parse_tower(p, &[e.to_string()])?.remove(0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(fs: &[Field]) -> Vec<String> {
        fs.iter().map(Field::name).collect()
    }

    #[test]
    fn defaults_are_pinned() {
        let c = RunConfig::resolve(Overrides::default(), None).unwrap();
        assert_eq!((c.p, c.samples, c.seed, c.r_range), (3, 64, 0, (1, 1)));
        assert_eq!(names(&c.tower), ["F_3", "F_9", "F_27"]);
    }

    #[test]
    fn field_names_and_tower_keywords() {
        let list = ["F_5", "ext3", "F_25", "F_5(s)", "ratfun"].map(String::from);
        assert_eq!(names(&parse_field_list(5, &list).unwrap()), ["F_5", "F_125", "F_25", "F_5(s)", "F_5(s)"]);
        assert!(parse_field_list(3, &["F_8".into()]).is_err());
        assert!(parse_field_list(3, &["F_2(s)".into()]).is_err());
    }

    #[test]
    fn r_ranges() {
        assert_eq!(RSpec::Text("1..3".into()).range().unwrap(), (1, 3));
        assert_eq!(RSpec::Text("2-2".into()).range().unwrap(), (2, 2));
        assert_eq!(RSpec::Text("1..=2".into()).range().unwrap(), (1, 2));
        assert_eq!(RSpec::Single(2).range().unwrap(), (2, 2));
        assert!(RSpec::Text("3..1".into()).range().is_err());
        assert!(RSpec::Single(0).range().is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = std::env::temp_dir().join(format!("pisupport-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "p = 5\nseed = 9\nsamples = 10\nfield = [\"prime\"]\n").unwrap();
        let flags = Overrides { seed: Some(4), ..Default::default() };
        let c = RunConfig::resolve(flags, Some(&path)).unwrap();
        assert_eq!((c.p, c.seed, c.samples), (5, 4, 10));
        assert_eq!(names(&c.tower), ["F_5"]);
        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(RunConfig::resolve(Overrides::default(), Some(&path)).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
