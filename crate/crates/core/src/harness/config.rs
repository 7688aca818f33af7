//! Line-oriented `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::coupling::default_eta;
use crate::error::{Error, Result};
use crate::model::ConstraintSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentKind {
    Gen,
    Enumerate,
    Fragility,
    Pipeline,
    Stability,
    Success,
    PartitionTest,
    PittTest,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Gen,
        ExperimentKind::Enumerate,
        ExperimentKind::Fragility,
        ExperimentKind::Pipeline,
        ExperimentKind::Stability,
        ExperimentKind::Success,
        ExperimentKind::PartitionTest,
        ExperimentKind::PittTest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Gen => "gen",
            ExperimentKind::Enumerate => "enumerate",
            ExperimentKind::Fragility => "fragility",
            ExperimentKind::Pipeline => "pipeline",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Success => "success",
            ExperimentKind::PartitionTest => "partition-test",
            ExperimentKind::PittTest => "pitt-test",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                key: "kind".into(),
                message: format!("unknown experiment `{s}`"),
            })
    }
}

/// Every key accepted in a config file or as a flag.
pub const KNOWN_KEYS: &[&str] = &[
    "n", "m", "alpha", "kappa", "symmetric", "intervals", "eta", "k", "iota", "link", "samples", "trials", "cases",
    "instances", "seed", "omega", "algorithm", "rho", "threshold", "input", "out", "dir", "threads",
];

/// Raw key/value settings for one experiment; later assignments override
/// earlier ones, so flags applied after the file take precedence.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            values: BTreeMap::new(),
        }
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn from_text(kind: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::new(kind);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {} is not of the form `key = value`", lineno + 1),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config {
                key: key.into(),
                message: "unknown key".into(),
            });
        }
        if value.is_empty() {
            return Err(Error::Config {
                key: key.into(),
                message: "empty value".into(),
            });
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Config {
                key: key.into(),
                message: format!("cannot parse `{v}` as {}", std::any::type_name::<T>()),
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config {
            key: key.into(),
            message: "required".into(),
        })
    }

    pub fn n(&self) -> Result<usize> {
        self.require("n")
    }

    /// M from exactly one of `m` or `alpha` (M = round(α·N)).
    pub fn m(&self, n: usize) -> Result<usize> {
        match (self.get::<usize>("m")?, self.get::<f64>("alpha")?) {
            (Some(m), None) => Ok(m),
            (None, Some(alpha)) if alpha.is_finite() && alpha >= 0.0 => Ok((alpha * n as f64).round() as usize),
            (None, Some(alpha)) => Err(Error::Config {
                key: "alpha".into(),
                message: format!("{alpha} is not a nonnegative number"),
            }),
            (Some(_), Some(_)) => Err(Error::Config {
                key: "alpha".into(),
                message: "give exactly one of m and alpha".into(),
            }),
            (None, None) => Err(Error::Config {
                key: "m".into(),
                message: "give exactly one of m and alpha".into(),
            }),
        }
    }

    /// One of `kappa` (half-space), `symmetric` (|field| ≤ κ) or `intervals`
    /// (`a:b,c:d,...`); half-space with κ = 0 when none is given.
    pub fn spec(&self) -> Result<ConstraintSpec> {
        let given: Vec<&str> = ["kappa", "symmetric", "intervals"]
            .into_iter()
            .filter(|k| self.has(k))
            .collect();
        if given.len() > 1 {
            return Err(Error::Config {
                key: given[1].into(),
                message: format!("conflicts with `{}`", given[0]),
            });
        }
        let wrap = |key: &str, e: Error| Error::Config {
            key: key.into(),
            message: e.to_string(),
        };
        match given.first().copied() {
            None => Ok(ConstraintSpec::half_space(0.0)?),
            Some("kappa") => ConstraintSpec::half_space(self.require("kappa")?).map_err(|e| wrap("kappa", e)),
            Some("symmetric") => ConstraintSpec::symmetric(self.require("symmetric")?).map_err(|e| wrap("symmetric", e)),
            Some(_) => {
                let text = self.raw("intervals").expect("present");
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| Error::Config {
                        key: "intervals".into(),
                        message: format!("cannot parse endpoint `{s}`"),
                    })
                };
                let mut ivs = Vec::new();
                for part in text.split(',') {
                    let (a, b) = part.split_once(':').ok_or_else(|| Error::Config {
                        key: "intervals".into(),
                        message: format!("`{part}` is not of the form a:b"),
                    })?;
                    ivs.push((parse(a)?, parse(b)?));
                }
                ConstraintSpec::intervals(ivs).map_err(|e| wrap("intervals", e))
            }
        }
    }

    pub fn eta(&self, n: usize) -> Result<f64> {
        self.get_or("eta", default_eta(n))
    }

    /// k, defaulting to max(1, ⌊N/10⌋).
    pub fn k(&self, n: usize) -> Result<usize> {
        self.get_or("k", (n / 10).max(1))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_or("seed", 0)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }
}

/// Canonical text of a constraint spec for reports.
pub fn describe_spec(spec: &ConstraintSpec) -> String {
    match spec {
        ConstraintSpec::HalfSpace { kappa } => format!("half-space kappa={kappa}"),
        ConstraintSpec::IntervalUnion(u) => {
            let parts: Vec<String> = u.intervals().iter().map(|(a, b)| format!("[{a},{b}]")).collect();
            format!("intervals {}", parts.join(" "))
        }
    }
}
