//! Experiments and the suites that bundle them.

pub mod bb;
pub mod example41;
pub mod flows;
pub mod properties;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::OutDir;
use crate::report::RunReport;

pub use bb::BbConfig;
pub use example41::Example41Config;
pub use flows::{DissipationConfig, EdeConfig, JkoConfig, MkvConfig};
pub use properties::{HopfLaxConfig, RegularizeConfig};

/// One experiment of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Entry {
    #[serde(rename = "example-4-1")]
    Example41(Example41Config),
    #[serde(rename = "bb-vs-static")]
    BbVsStatic(BbConfig),
    #[serde(rename = "regularize")]
    Regularize(RegularizeConfig),
    #[serde(rename = "hopf-lax")]
    HopfLax(HopfLaxConfig),
    #[serde(rename = "mkv")]
    Mkv(MkvConfig),
    #[serde(rename = "ede")]
    Ede(EdeConfig),
    #[serde(rename = "jko")]
    Jko(JkoConfig),
    #[serde(rename = "dissipation")]
    Dissipation(DissipationConfig),
}

impl Entry {
    pub fn kind(&self) -> &'static str {
        match self {
            Entry::Example41(_) => "example-4-1",
            Entry::BbVsStatic(_) => "bb-vs-static",
            Entry::Regularize(_) => "regularize",
            Entry::HopfLax(_) => "hopf-lax",
            Entry::Mkv(_) => "mkv",
            Entry::Ede(_) => "ede",
            Entry::Jko(_) => "jko",
            Entry::Dissipation(_) => "dissipation",
        }
    }

    pub fn run(&self, seed: u64, out: &OutDir) -> Result<RunReport> {
        match self {
            Entry::Example41(c) => example41::run_example_4_1(c, out),
            Entry::BbVsStatic(c) => bb::run_bb_vs_static(c, seed, out),
            Entry::Regularize(c) => properties::run_regularize(c, seed, out),
            Entry::HopfLax(c) => properties::run_hopf_lax(c, seed, out),
            Entry::Mkv(c) => flows::run_mkv(c, out),
            Entry::Ede(c) => flows::run_ede(c, out),
            Entry::Jko(c) => flows::run_jko(c, out),
            Entry::Dissipation(c) => flows::run_dissipation(c, out),
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub entries: Vec<Entry>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Positive discretisation parameters; `2ε` below the shortest edge.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CliError::ConfigInvalid(format!("{name} = {x} must be positive")))
            }
        };
        for e in &self.entries {
            match e {
                Entry::Example41(c) => {
                    positive("h", c.h)?;
                    if !(c.eps > 0.0 && 2.0 * c.eps < 1.0) {
                        return Err(CliError::ConfigInvalid(format!("eps = {} needs 0 < 2 eps < 1", c.eps)));
                    }
                }
                Entry::BbVsStatic(c) => {
                    positive("h", c.h)?;
                    if c.steps == 0 {
                        return Err(CliError::ConfigInvalid("steps must be positive".into()));
                    }
                }
                Entry::Regularize(c) => positive("h", c.h)?,
                Entry::HopfLax(c) => {
                    positive("h", c.h)?;
                    positive("dt", c.dt)?;
                }
                Entry::Mkv(c) => {
                    positive("h", c.h)?;
                    positive("dt", c.dt)?;
                }
                Entry::Ede(c) => {
                    positive("h", c.h)?;
                    positive("dt", c.dt)?;
                }
                Entry::Jko(c) => {
                    positive("h", c.h)?;
                    positive("tau", c.tau)?;
                }
                Entry::Dissipation(c) => positive("h", c.h)?,
            }
        }
        Ok(())
    }

    /// Built-in suites.
    pub fn preset(name: &str) -> Result<Self> {
        let single = |e: Entry| vec![e];
        let examples = || {
            [0.05, 0.1, 0.25].into_iter().map(|eps| Entry::Example41(Example41Config { eps, ..Default::default() })).collect::<Vec<_>>()
        };
        let entries = match name {
            "empty" => vec![],
            "example-4-1" => examples(),
            "paper-repro" => {
                let mut v = examples();
                v.extend([
                    Entry::BbVsStatic(BbConfig::default()),
                    Entry::Regularize(RegularizeConfig::default()),
                    Entry::HopfLax(HopfLaxConfig::default()),
                    Entry::Mkv(MkvConfig::default()),
                    Entry::Ede(EdeConfig::default()),
                    Entry::Jko(JkoConfig::default()),
                    Entry::Dissipation(DissipationConfig::default()),
                ]);
                v
            }
            "bb-vs-static" => single(Entry::BbVsStatic(BbConfig::default())),
            "regularize" => single(Entry::Regularize(RegularizeConfig::default())),
            "hopf-lax" => single(Entry::HopfLax(HopfLaxConfig::default())),
            "mkv" => single(Entry::Mkv(MkvConfig::default())),
            "ede" => single(Entry::Ede(EdeConfig::default())),
            "jko" => single(Entry::Jko(JkoConfig::default())),
            "dissipation" => single(Entry::Dissipation(DissipationConfig::default())),
            other => return Err(CliError::SubcommandUnknown(other.to_string())),
        };
        Ok(Self { name: name.to_string(), seed: DEFAULT_SEED, entries })
    }

    pub const PRESETS: [&'static str; 10] =
        ["paper-repro", "example-4-1", "bb-vs-static", "regularize", "hopf-lax", "mkv", "ede", "jko", "dissipation", "empty"];
}

/// `GRAPHOT_SEED`, when set, replaces the configured seed.
pub fn effective_seed(configured: u64) -> Result<u64> {
    match std::env::var("GRAPHOT_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| CliError::ConfigInvalid(format!("GRAPHOT_SEED = `{s}` is not an integer"))),
        Err(_) => Ok(configured),
    }
}

/// Runs every entry, at most `jobs` at a time. Entry `k` uses seed
/// `seed + k` and writes into `<out>/<k>-<kind>`.
pub fn run_suite(cfg: &SuiteConfig, seed: u64, jobs: usize, out: &OutDir) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(&format!("suite {}", cfg.name), &(cfg, seed));
    report.seed = Some(seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    let entries: Vec<Result<RunReport>> = pool.install(|| {
        cfg.entries
            .par_iter()
            .enumerate()
            .map(|(k, e)| {
                let dir = out.join(&format!("{k:02}-{}", e.kind()));
                let r = e.run(seed.wrapping_add(k as u64), &dir)?;
                let mut r = r;
                r.output(dir.write("report.json", &r.to_json())?);
                Ok(r)
            })
            .collect()
    });
    for r in entries {
        report.entries.push(r?);
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in SuiteConfig::PRESETS {
            let s = SuiteConfig::preset(name).unwrap();
            s.validate().unwrap();
        }
        assert_eq!(SuiteConfig::preset("paper-repro").unwrap().entries.len(), 10);
        assert!(matches!(SuiteConfig::preset("nope"), Err(CliError::SubcommandUnknown(_))));
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            name = "mine"
            seed = 5

            [[entries]]
            kind = "example-4-1"
            eps = 0.25
            h = 0.01

            [[entries]]
            kind = "hopf-lax"
            functions = 2
        "#;
        let s = SuiteConfig::from_toml(text).unwrap();
        assert_eq!(s.seed, 5);
        match &s.entries[0] {
            Entry::Example41(c) => {
                assert_eq!(c.eps, 0.25);
                assert_eq!(c.kink_tol, 1e-3);
            }
            e => panic!("{e:?}"),
        }
        let back = SuiteConfig::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SuiteConfig::from_toml("name = 'x'\n[[entries]]\nkind = 'example-4-1'\neps = 0.6\n").is_err());
        assert!(SuiteConfig::from_toml("name = 'x'\n[[entries]]\nkind = 'mkv'\ndt = -1.0\n").is_err());
        assert!(SuiteConfig::from_toml("name = 'x'\n[[entries]]\nkind = 'mkv'\nbogus = 1\n").is_err());
        assert!(SuiteConfig::from_toml("name = 'x'\n[[entries]]\nkind = 'warp'\n").is_err());
    }

    #[test]
    fn empty_suite_passes() {
        let r = run_suite(&SuiteConfig::preset("empty").unwrap(), 1, 2, &OutDir::none()).unwrap();
        assert!(r.passed() && r.entries.is_empty());
    }
}
