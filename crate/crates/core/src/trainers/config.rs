use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Erm,
    Jtt,
    JttDynamic,
    Cvar,
    Lff,
    GroupDro,
    UpsampleMinority,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Erm,
        Algorithm::Jtt,
        Algorithm::JttDynamic,
        Algorithm::Cvar,
        Algorithm::Lff,
        Algorithm::GroupDro,
        Algorithm::UpsampleMinority,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Erm => "erm",
            Algorithm::Jtt => "jtt",
            Algorithm::JttDynamic => "jtt-dynamic",
            Algorithm::Cvar => "cvar",
            Algorithm::Lff => "lff",
            Algorithm::GroupDro => "group-dro",
            Algorithm::UpsampleMinority => "upsample-minority",
        }
    }

    /// Whether the trainer may read training-set group annotations.
    pub fn uses_train_groups(&self) -> bool {
        matches!(self, Algorithm::GroupDro | Algorithm::UpsampleMinority)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::config("algorithm", format!("`{s}` is not one of {}", names.join(", ")))
            })
    }
}

/// Every knob of a training run. Fields irrelevant to `algorithm` are
/// ignored by the trainer but still echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub seed: u64,
    /// Hidden layer widths; empty means a logistic model.
    pub hidden: Vec<usize>,
    /// JTT identification epochs.
    #[serde(rename = "T")]
    pub identification_epochs: usize,
    pub lambda_up: usize,
    /// Epochs between error-set refreshes in dynamic JTT; `None` never refreshes.
    #[serde(rename = "K", serialize_with = "ser_refresh")]
    pub refresh_every: Option<usize>,
    pub alpha: f64,
    pub gce_q: f64,
    pub eta_q: f64,
    /// Stage-one overrides; `None` shares the stage-two value.
    #[serde(rename = "id_learning_rate")]
    pub identification_learning_rate: Option<f64>,
    #[serde(rename = "id_l2")]
    pub identification_l2: Option<f64>,
    /// Record full-train loss snapshots each epoch (CVaR only).
    pub track_cvar_set: bool,
}

fn ser_refresh<S: Serializer>(k: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.serialize_u64(*k as u64),
        None => s.serialize_str("inf"),
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Erm,
            epochs: 20,
            batch_size: 64,
            learning_rate: 0.05,
            momentum: 0.9,
            l2: 0.0,
            seed: 0,
            hidden: Vec::new(),
            identification_epochs: 1,
            lambda_up: 5,
            refresh_every: None,
            alpha: 0.2,
            gce_q: 0.7,
            eta_q: 0.01,
            identification_learning_rate: None,
            identification_l2: None,
            track_cvar_set: false,
        }
    }
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{value}`")))
}

fn parse_optional_f64(field: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(field, v).map(Some),
    }
}

fn parse_hidden(value: &str) -> Result<Vec<usize>> {
    let v = value.trim();
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split('x').map(|w| parse("hidden", w)).collect()
}

impl TrainConfig {
    /// Field names accepted by [`TrainConfig::set_field`], in echo order.
    pub const FIELDS: [&'static str; 17] = [
        "algorithm",
        "epochs",
        "batch_size",
        "learning_rate",
        "momentum",
        "l2",
        "seed",
        "hidden",
        "T",
        "lambda_up",
        "K",
        "alpha",
        "gce_q",
        "eta_q",
        "id_learning_rate",
        "id_l2",
        "track_cvar_set",
    ];

    /// Sets one field from its textual form. `hidden` is written `16x8`, `K`
    /// accepts `inf`, and the `id_*` overrides accept `none`. Values are not
    /// range-checked here; see [`TrainConfig::validate`].
    pub fn set_field(&mut self, name: &str, value: &str) -> Result<()> {
        match name {
            "algorithm" => self.algorithm = value.trim().parse()?,
            "epochs" => self.epochs = parse(name, value)?,
            "batch_size" => self.batch_size = parse(name, value)?,
            "learning_rate" => self.learning_rate = parse(name, value)?,
            "momentum" => self.momentum = parse(name, value)?,
            "l2" => self.l2 = parse(name, value)?,
            "seed" => self.seed = parse(name, value)?,
            "hidden" => self.hidden = parse_hidden(value)?,
            "T" => self.identification_epochs = parse(name, value)?,
            "lambda_up" => self.lambda_up = parse(name, value)?,
            "K" => {
                self.refresh_every = match value.trim() {
                    "inf" => None,
                    v => Some(parse(name, v)?),
                }
            }
            "alpha" => self.alpha = parse(name, value)?,
            "gce_q" => self.gce_q = parse(name, value)?,
            "eta_q" => self.eta_q = parse(name, value)?,
            "id_learning_rate" => self.identification_learning_rate = parse_optional_f64(name, value)?,
            "id_l2" => self.identification_l2 = parse_optional_f64(name, value)?,
            "track_cvar_set" => self.track_cvar_set = parse(name, value)?,
            other => return Err(Error::config(other, "unknown training field")),
        }
        Ok(())
    }

    /// `(name, value)` pairs in [`TrainConfig::FIELDS`] order. Values
    /// round-trip through [`TrainConfig::set_field`].
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let hidden = if self.hidden.is_empty() {
            "none".to_string()
        } else {
            self.hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("x")
        };
        vec![
            ("algorithm", self.algorithm.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("momentum", self.momentum.to_string()),
            ("l2", self.l2.to_string()),
            ("seed", self.seed.to_string()),
            ("hidden", hidden),
            ("T", self.identification_epochs.to_string()),
            ("lambda_up", self.lambda_up.to_string()),
            ("K", self.refresh_every.map_or_else(|| "inf".to_string(), |k| k.to_string())),
            ("alpha", self.alpha.to_string()),
            ("gce_q", self.gce_q.to_string()),
            ("eta_q", self.eta_q.to_string()),
            ("id_learning_rate", opt(self.identification_learning_rate)),
            ("id_l2", opt(self.identification_l2)),
            ("track_cvar_set", self.track_cvar_set.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("{v} must be finite and non-negative")))
            }
        };
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", format!("{} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", format!("{} is outside [0, 1)", self.momentum)));
        }
        finite_nonneg("l2", self.l2)?;
        finite_nonneg("eta_q", self.eta_q)?;
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if self.lambda_up == 0 {
            return Err(Error::config("lambda_up", "must be at least 1"));
        }
        if self.refresh_every == Some(0) {
            return Err(Error::config("K", "must be at least 1 or `inf`"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("{} is outside (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gce_q) {
            return Err(Error::config("gce_q", format!("{} is outside [0, 1)", self.gce_q)));
        }
        if let Some(lr) = self.identification_learning_rate {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::config("id_learning_rate", format!("{lr} must be positive")));
            }
        }
        if let Some(l2) = self.identification_l2 {
            finite_nonneg("id_l2", l2)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_round_trip() {
        let mut cfg = TrainConfig {
            algorithm: Algorithm::JttDynamic,
            hidden: vec![16, 8],
            refresh_every: Some(3),
            identification_learning_rate: Some(0.3),
            learning_rate: 0.1 + 0.2,
            ..TrainConfig::default()
        };
        cfg.track_cvar_set = true;
        let mut back = TrainConfig::default();
        for (k, v) in cfg.fields() {
            back.set_field(k, &v).unwrap();
        }
        assert_eq!(back, cfg);
        let names: Vec<_> = cfg.fields().into_iter().map(|(k, _)| k).collect();
        assert_eq!(names, TrainConfig::FIELDS);
    }

    #[test]
    fn range_errors_name_the_field() {
        let cfg = TrainConfig {
            alpha: 1.5,
            ..TrainConfig::default()
        };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("{other:?}"),
        }
        let mut cfg = TrainConfig::default();
        assert!(cfg.set_field("lambda", "2").is_err());
        cfg.set_field("K", "inf").unwrap();
        assert_eq!(cfg.refresh_every, None);
    }

    #[test]
    fn defaults() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.momentum, 0.9);
        assert_eq!(cfg.eta_q, 0.01);
        cfg.validate().unwrap();
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }
}
