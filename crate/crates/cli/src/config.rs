//! Run configuration: defaults, then a `key = value` file, then `--set`
//! pairs, then dedicated flags. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use asl_core::data::SyntheticConfig;
use asl_core::evaluation::EvalConfig;
use asl_core::inference::{InferenceConfig, LocalizationMode};
use asl_core::model::ActionnessLoss;
use asl_core::training::{Schedule, TrainConfig};
use asl_core::{AslError, Result};

/// Every accepted key with its default, in the order `--help-keys` prints.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("out", "out"),
    ("num_classes", "5"),
    ("feature_dim", "20"),
    ("length", "64"),
    ("videos_train", "200"),
    ("videos_test", "100"),
    ("noise_sigma", "0.3"),
    ("action_fraction", "0.25"),
    ("context_fraction", "0.3"),
    ("context_strength", "0.5"),
    ("max_classes_per_video", "2"),
    ("epochs", "100"),
    ("batch_size", "16"),
    ("lr", "1e-4"),
    ("weight_decay", "1e-4"),
    ("schedule", "joint"),
    ("q", "0.7"),
    ("beta", "0.5"),
    ("k_ratio", "0.125"),
    ("hidden", "512"),
    ("loss", "gce"),
    ("class_rate_cap", "none"),
    ("early_stop", "false"),
    ("mode", "asl"),
    ("nms_iou", "0.4"),
    ("alphas", "j/11 for j=1..10"),
    ("grid", "thumos"),
    ("recall_n", "100"),
    ("sweep_rates", "0.7,0.6,0.5,0.4,0.3"),
    ("train_manifest", "none"),
    ("manifest", "none"),
    ("checkpoint", "none"),
    ("proposals", "none"),
    ("log", "none"),
    ("previous_checkpoint", "none"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub synthetic: SyntheticConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub grid: String,
    pub recall_n: usize,
    pub sweep_rates: Vec<f64>,
    pub train_manifest: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub proposals: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub previous_checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            synthetic: SyntheticConfig::default(),
            train: TrainConfig::default(),
            inference: InferenceConfig::default(),
            grid: "thumos".into(),
            recall_n: 100,
            sweep_rates: vec![0.7, 0.6, 0.5, 0.4, 0.3],
            train_manifest: None,
            manifest: None,
            checkpoint: None,
            proposals: None,
            log: None,
            previous_checkpoint: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AslError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(AslError::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let s = &mut self.synthetic;
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "num_classes" => s.num_classes = parse(key, value)?,
            "feature_dim" => s.feature_dim = parse(key, value)?,
            "length" => s.length = parse(key, value)?,
            "videos_train" => s.videos_train = parse(key, value)?,
            "videos_test" => s.videos_test = parse(key, value)?,
            "noise_sigma" => s.noise_sigma = parse(key, value)?,
            "action_fraction" => s.action_fraction = parse(key, value)?,
            "context_fraction" => s.context_fraction = parse(key, value)?,
            "context_strength" => s.context_strength = parse(key, value)?,
            "max_classes_per_video" => s.max_classes_per_video = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "schedule" => t.schedule = value.parse::<Schedule>()?,
            "q" => t.q = parse(key, value)?,
            "beta" => t.beta = parse(key, value)?,
            "k_ratio" => t.k_ratio = parse(key, value)?,
            "hidden" => t.hidden = parse(key, value)?,
            "loss" => {
                t.actionness_loss = match value {
                    "gce" => ActionnessLoss::Gce,
                    "bce" => ActionnessLoss::Bce,
                    _ => return Err(AslError::Config(format!("loss: expected gce or bce, got {value:?}"))),
                }
            }
            "class_rate_cap" => {
                t.class_rate_cap = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "early_stop" => t.early_stop = parse_bool(key, value)?,
            "mode" => self.inference.mode = value.parse::<LocalizationMode>()?,
            "nms_iou" => self.inference.nms_iou = parse(key, value)?,
            "alphas" => self.inference.alphas = parse_list(key, value)?,
            "grid" => {
                EvalConfig::from_grid(value)?;
                self.grid = value.to_string();
            }
            "recall_n" => self.recall_n = parse(key, value)?,
            "sweep_rates" => self.sweep_rates = parse_list(key, value)?,
            "train_manifest" => self.train_manifest = optional_path(value),
            "manifest" => self.manifest = optional_path(value),
            "checkpoint" => self.checkpoint = optional_path(value),
            "proposals" => self.proposals = optional_path(value),
            "log" => self.log = optional_path(value),
            "previous_checkpoint" => self.previous_checkpoint = optional_path(value),
            _ => return Err(AslError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AslError::Config(format!("{}:{}: expected key = value", origin.display(), i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| AslError::Config(format!("{}:{}: {e}", origin.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(AslError::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| AslError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text, path)
    }

    /// A `KEY=VALUE` pair from the command line.
    pub fn apply_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| AslError::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        self.set(key.trim(), value)
    }

    /// Propagates the shared seed and validates every section.
    pub fn finish(mut self) -> Result<Self> {
        self.synthetic.seed = self.seed;
        self.train.seed = self.seed;
        self.train.validate()?;
        self.inference.validate()?;
        if self.recall_n == 0 {
            return Err(AslError::Config("recall_n must be at least 1".into()));
        }
        if self.sweep_rates.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(AslError::Config("sweep_rates must lie in (0, 1]".into()));
        }
        Ok(self)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig::from_grid(&self.grid).expect("grid checked when set")
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| AslError::Config(format!("missing {key} (set it with a flag or in the config file)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_key_is_accepted() {
        for (key, default) in KEYS {
            let mut c = RunConfig::default();
            let value = match *key {
                "alphas" => "0.2,0.5",
                _ => default,
            };
            c.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn listed_defaults_match() {
        let mut c = RunConfig::default();
        for (key, default) in KEYS {
            if *key != "alphas" {
                c.set(key, default).unwrap();
            }
        }
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn file_then_pairs() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# run\nepochs = 7\nloss=bce  # ablation\n\nmode = asl-a\n",
            Path::new("f"),
        )
        .unwrap();
        c.apply_pair("epochs=9").unwrap();
        assert_eq!(c.train.epochs, 9);
        assert_eq!(c.train.actionness_loss, ActionnessLoss::Bce);
        assert_eq!(c.inference.mode, LocalizationMode::AslA);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut c = RunConfig::default();
        let err = c
            .apply_text("epochs = 3\nepoch = 4\n", Path::new("run.cfg"))
            .unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");
        assert!(c.apply_text("epochs 3\n", Path::new("f")).is_err());
        assert!(c.apply_pair("lr").is_err());
        assert!(c.set("lr", "fast").is_err());
        assert!(c.set("grid", "coco").is_err());
        assert!(c.set("schedule", "alternate:0:1").is_err());
    }

    #[test]
    fn finish_propagates_seed_and_validates() {
        let mut c = RunConfig::default();
        c.set("seed", "42").unwrap();
        let c = c.finish().unwrap();
        assert_eq!((c.synthetic.seed, c.train.seed), (42, 42));
        let mut bad = RunConfig::default();
        bad.set("nms_iou", "1.5").unwrap();
        assert!(bad.finish().is_err());
    }
}
