//! Experiment configuration files.
//!
//! A config is a TOML document with up to seven sections. Every key is
//! optional; omitted keys take the defaults listed in the README.
//!
//! ```toml
//! [data]            # synthetic benchmark used when --data is not given
//! seed = 0
//! n_train = 3000
//!
//! [train]           # one TrainConfig; keys as in TrainConfig::FIELDS
//! algorithm = "jtt"
//! T = 2
//! K = "inf"
//! hidden = "16x8"
//!
//! [grid]            # sweep axes: field = [values]
//! learning_rate = [0.02, 0.05]
//!
//! [sweep]
//! criterion = "worst-group"
//!
//! [study]
//! fractions = [1.0, 0.2, 0.1, 0.05]
//! seeds = [0, 1, 2, 3, 4]
//!
//! [analyze]
//! reference_report = "erm-run/report.json"
//!
//! [ablate]
//! modes = ["swap-same-group", "drop-y-eq-a"]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use grouprobust::analysis::{Criterion, ErrorSetEdit};
use grouprobust::datagen::{reference_spec, SyntheticSpec};
use grouprobust::trainers::TrainConfig;
use grouprobust::Error as CoreError;
use serde::Serialize;
use toml::de::{DeTable, DeValue};

/// A configuration problem, located by key and (when known) line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSection {
    pub seed: u64,
    pub spec: SyntheticSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySection {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeSection {
    /// Report of a tuned ERM run whose lowest-test-accuracy group is the
    /// diagnostic target. Without it an ERM reference is trained in-process.
    pub reference_report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblateSection {
    #[serde(serialize_with = "ser_modes")]
    pub modes: Vec<ErrorSetEdit>,
    pub seed: u64,
}

fn ser_modes<S: serde::Serializer>(modes: &[ErrorSetEdit], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(modes.iter().map(|m| m.to_string()))
}

/// The fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub train: TrainConfig,
    pub grid: BTreeMap<String, Vec<String>>,
    pub criterion: Criterion,
    pub study: StudySection,
    pub analyze: AnalyzeSection,
    pub ablate: AblateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSection {
                seed: 0,
                spec: reference_spec(),
            },
            train: TrainConfig::default(),
            grid: BTreeMap::new(),
            criterion: Criterion::WorstGroup,
            study: StudySection {
                fractions: vec![1.0, 0.2, 0.1, 0.05],
                seeds: vec![0, 1, 2, 3, 4],
            },
            analyze: AnalyzeSection { reference_report: None },
            ablate: AblateSection {
                modes: vec![
                    ErrorSetEdit::SwapSameGroup,
                    ErrorSetEdit::DropAligned,
                    ErrorSetEdit::DropMisaligned,
                    ErrorSetEdit::ReplaceRandom,
                ],
                seed: 0,
            },
        }
    }
}

const DATA_KEYS: [&str; 10] = [
    "seed",
    "n_train",
    "n_val",
    "n_test",
    "majority_fraction",
    "label_balance",
    "core_separation",
    "spurious_separation",
    "noise_dims",
    "noise_sigma",
];

/// A scalar or list value in textual form, with its line.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: Raw,
}

#[derive(Debug, Clone)]
enum Raw {
    Scalar(String),
    List(Vec<String>),
}

struct Located {
    lines: Vec<usize>,
}

impl Located {
    fn new(text: &str) -> Self {
        let lines = text.match_indices('\n').map(|(i, _)| i).collect();
        Self { lines }
    }

    fn line(&self, offset: usize) -> usize {
        self.lines.partition_point(|&nl| nl < offset) + 1
    }
}

fn scalar_text(v: &DeValue<'_>) -> Option<String> {
    match v {
        DeValue::String(s) => Some(s.to_string()),
        DeValue::Integer(i) => Some(i.as_str().replace('_', "")),
        DeValue::Float(f) => Some(f.as_str().replace('_', "")),
        DeValue::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

type Sections = BTreeMap<String, (usize, BTreeMap<String, Entry>)>;

fn read_sections(text: &str) -> Result<Sections, ConfigError> {
    let loc = Located::new(text);
    let root = DeTable::parse(text).map_err(|e| ConfigError {
        key: "<document>".into(),
        line: e.span().map(|s| loc.line(s.start)),
        message: e.message().trim().to_string(),
    })?;
    let mut out = Sections::new();
    for (name, value) in root.get_ref().iter() {
        let line = loc.line(name.span().start);
        let DeValue::Table(table) = value.get_ref() else {
            return Err(ConfigError {
                key: name.get_ref().to_string(),
                line: Some(line),
                message: "top-level keys must be sections such as [train]".into(),
            });
        };
        let mut entries = BTreeMap::new();
        for (key, v) in table.iter() {
            let key_line = loc.line(key.span().start);
            let bad = |message: &str| ConfigError {
                key: key.get_ref().to_string(),
                line: Some(key_line),
                message: message.into(),
            };
            let value = match v.get_ref() {
                DeValue::Array(items) => Raw::List(
                    items
                        .iter()
                        .map(|i| scalar_text(i.get_ref()).ok_or_else(|| bad("list entries must be scalars")))
                        .collect::<Result<_, _>>()?,
                ),
                other => Raw::Scalar(scalar_text(other).ok_or_else(|| bad("unsupported value type"))?),
            };
            entries.insert(key.get_ref().to_string(), Entry { line: key_line, value });
        }
        out.insert(name.get_ref().to_string(), (line, entries));
    }
    Ok(out)
}

struct SectionReader<'a> {
    section: &'static str,
    entries: &'a BTreeMap<String, Entry>,
}

impl SectionReader<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: format!("{}.{key}", self.section),
            line: self.entries.get(key).map(|e| e.line),
            message: message.into(),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }

    fn scalar(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.entries.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Raw::Scalar(s)) => Ok(Some(s)),
            Some(Raw::List(_)) => Err(self.err(key, "expected a single value, found a list")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<&[String]>, ConfigError> {
        match self.entries.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Raw::List(v)) => Ok(Some(v)),
            Some(Raw::Scalar(_)) => Err(self.err(key, "expected a list")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, into: &mut T) -> Result<(), ConfigError> {
        if let Some(s) = self.scalar(key)? {
            *into = s.parse().map_err(|_| self.err(key, format!("cannot parse `{s}`")))?;
        }
        Ok(())
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str, into: &mut Vec<T>) -> Result<(), ConfigError> {
        if let Some(items) = self.list(key)? {
            *into = items
                .iter()
                .map(|s| s.parse().map_err(|_| self.err(key, format!("cannot parse `{s}`"))))
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

fn core_error(reader: &SectionReader<'_>, e: CoreError) -> ConfigError {
    match e {
        CoreError::Config { field, message } => reader.err(&field, message),
        other => reader.err("<section>", other.to_string()),
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = read_sections(text)?;
    let mut cfg = ExperimentConfig::default();
    let empty = BTreeMap::new();
    let section = |name: &'static str| SectionReader {
        section: name,
        entries: sections.get(name).map_or(&empty, |(_, e)| e),
    };
    const KNOWN: [&str; 7] = ["data", "train", "grid", "sweep", "study", "analyze", "ablate"];
    if let Some((name, (line, _))) = sections.iter().find(|(n, _)| !KNOWN.contains(&n.as_str())) {
        return Err(ConfigError {
            key: name.clone(),
            line: Some(*line),
            message: format!("unknown section; expected one of {}", KNOWN.join(", ")),
        });
    }

    let data = section("data");
    data.check_keys(&DATA_KEYS)?;
    let spec = &mut cfg.data.spec;
    data.parse("seed", &mut cfg.data.seed)?;
    data.parse("n_train", &mut spec.n_train)?;
    data.parse("n_val", &mut spec.n_val)?;
    data.parse("n_test", &mut spec.n_test)?;
    data.parse("majority_fraction", &mut spec.majority_fraction)?;
    data.parse_list("label_balance", &mut spec.label_balance)?;
    data.parse("core_separation", &mut spec.core_separation)?;
    data.parse("spurious_separation", &mut spec.spurious_separation)?;
    data.parse("noise_dims", &mut spec.noise_dims)?;
    data.parse("noise_sigma", &mut spec.noise_sigma)?;
    spec.validate().map_err(|e| core_error(&data, e))?;

    let train = section("train");
    train.check_keys(&TrainConfig::FIELDS)?;
    for (key, entry) in train.entries {
        let Raw::Scalar(v) = &entry.value else {
            return Err(train.err(key, "expected a single value; put value lists under [grid]"));
        };
        cfg.train.set_field(key, v).map_err(|e| core_error(&train, e))?;
    }
    cfg.train.validate().map_err(|e| core_error(&train, e))?;

    let grid = section("grid");
    grid.check_keys(&TrainConfig::FIELDS)?;
    for (key, entry) in grid.entries {
        let values = match &entry.value {
            Raw::List(v) => v.clone(),
            Raw::Scalar(s) => vec![s.clone()],
        };
        if values.is_empty() {
            return Err(grid.err(key, "axis has no values"));
        }
        for v in &values {
            let mut probe = cfg.train.clone();
            probe.set_field(key, v).map_err(|e| core_error(&grid, e))?;
            probe.validate().map_err(|e| core_error(&grid, e))?;
        }
        cfg.grid.insert(key.clone(), values);
    }

    let sweep = section("sweep");
    sweep.check_keys(&["criterion"])?;
    sweep.parse("criterion", &mut cfg.criterion)?;

    let study = section("study");
    study.check_keys(&["fractions", "seeds"])?;
    study.parse_list("fractions", &mut cfg.study.fractions)?;
    study.parse_list("seeds", &mut cfg.study.seeds)?;
    if cfg.study.fractions.is_empty() || cfg.study.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(study.err("fractions", "fractions must be a non-empty list in (0, 1]"));
    }
    if cfg.study.seeds.is_empty() {
        return Err(study.err("seeds", "at least one seed is required"));
    }

    let analyze = section("analyze");
    analyze.check_keys(&["reference_report"])?;
    if let Some(p) = analyze.scalar("reference_report")? {
        cfg.analyze.reference_report = Some(PathBuf::from(p));
    }

    let ablate = section("ablate");
    ablate.check_keys(&["modes", "seed"])?;
    ablate.parse_list("modes", &mut cfg.ablate.modes)?;
    ablate.parse("seed", &mut cfg.ablate.seed)?;
    Ok(cfg)
}
