//! Synthetic corpus with planted action, context and background instances.
//!
//! Every instance is a prototype plus isotropic Gaussian noise. Prototypes
//! follow an additive scene model over three random directions drawn once
//! per corpus: a shared background `b`, a class direction `v_c` per class,
//! and one action direction `u` shared by all classes:
//!
//! ```text
//! background      b
//! context(c)      b + ρ v_c
//! action(c)       b + v_c + u
//! ```
//!
//! Context is class-specific, so a classifier alone will pick it up as
//! evidence, while only action instances carry the class-agnostic `u`.
//! All features are rounded to `f32` so that a corpus written to disk and
//! read back is bit-identical to the in-memory one.

use super::{Dataset, GtSegment, VideoRecord};
use crate::error::{AslError, Result};
use crate::numerics::{Matrix, Prng};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub length: usize,
    pub videos_train: usize,
    pub videos_test: usize,
    pub noise_sigma: f64,
    pub action_fraction: f64,
    pub context_fraction: f64,
    /// ρ: how much class evidence a context instance carries relative to
    /// an action instance.
    pub context_strength: f64,
    pub max_classes_per_video: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_classes: 5,
            feature_dim: 20,
            length: 64,
            videos_train: 200,
            videos_test: 100,
            noise_sigma: 0.3,
            action_fraction: 0.25,
            context_fraction: 0.3,
            context_strength: 0.5,
            max_classes_per_video: 2,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn action_instances(&self) -> usize {
        (self.action_fraction * self.length as f64).round() as usize
    }

    pub fn context_instances(&self) -> usize {
        (self.context_fraction * self.length as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(AslError::Config(m));
        if self.num_classes == 0 || self.feature_dim == 0 || self.length == 0 || self.max_classes_per_video == 0 {
            return err("synthetic counts must be positive".into());
        }
        if self.videos_train == 0 && self.videos_test == 0 {
            return err("synthetic corpus needs at least one video".into());
        }
        if self.max_classes_per_video > self.num_classes {
            return err(format!(
                "max_classes_per_video {} exceeds {} classes",
                self.max_classes_per_video, self.num_classes
            ));
        }
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !in_unit(self.action_fraction) || !in_unit(self.context_fraction) {
            return err("action_fraction and context_fraction must lie in (0, 1)".into());
        }
        if self.action_fraction + self.context_fraction >= 1.0 {
            return err(format!(
                "action_fraction + context_fraction = {} leaves no background",
                self.action_fraction + self.context_fraction
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return err(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if !(self.context_strength > 0.0 && self.context_strength < 1.0) {
            return err(format!("context_strength {} must lie in (0, 1)", self.context_strength));
        }
        let (a, x) = (self.action_instances(), self.context_instances());
        if a < self.max_classes_per_video {
            return err(format!(
                "{a} action instances cannot hold {} classes",
                self.max_classes_per_video
            ));
        }
        if a + x > self.length {
            return err(format!(
                "{a} action + {x} context instances exceed length {}",
                self.length
            ));
        }
        Ok(())
    }
}

/// Per-class prototype vectors of a synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototypes {
    pub action: Vec<Vec<f64>>,
    pub context: Vec<Vec<f64>>,
    pub background: Vec<f64>,
}

impl Prototypes {
    fn draw(config: &SyntheticConfig, prng: &mut Prng) -> Result<Self> {
        let d = config.feature_dim;
        let rho = config.context_strength;
        let min_dist = 4.0 * config.noise_sigma;
        for _ in 0..1000 {
            let mut gauss = || -> Vec<f64> { (0..d).map(|_| prng.normal()).collect() };
            let background = gauss();
            let shared_action = gauss();
            let class_dirs: Vec<Vec<f64>> = (0..config.num_classes).map(|_| gauss()).collect();
            let combine = |class_scale: f64, action_scale: f64, v: &[f64]| -> Vec<f64> {
                (0..d)
                    .map(|j| background[j] + class_scale * v[j] + action_scale * shared_action[j])
                    .collect()
            };
            let protos = Prototypes {
                action: class_dirs.iter().map(|v| combine(1.0, 1.0, v)).collect(),
                context: class_dirs.iter().map(|v| combine(rho, 0.0, v)).collect(),
                background: background.clone(),
            };
            if protos.min_pairwise_distance() >= min_dist {
                return Ok(protos);
            }
        }
        Err(AslError::Config(format!(
            "could not draw prototypes {min_dist} apart in {d} dimensions"
        )))
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let all: Vec<&Vec<f64>> = self
            .action
            .iter()
            .chain(&self.context)
            .chain(std::iter::once(&self.background))
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let d2: f64 = all[i].iter().zip(all[j]).map(|(a, b)| (a - b).powi(2)).sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Background,
    Context(usize),
    Action(usize),
}

/// Generates `(train, test)` from one seeded stream. Both splits carry
/// ground-truth action segments.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let mut prng = Prng::new(config.seed);
    let protos = Prototypes::draw(config, &mut prng)?;
    let class_names: Vec<String> = (0..config.num_classes).map(|c| format!("class_{c:02}")).collect();

    let mut split = |prefix: &str, count: usize| -> Result<Dataset> {
        let records = (0..count)
            .map(|i| make_video(format!("{prefix}_{i:04}"), config, &protos, &mut prng))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records, config.num_classes, config.feature_dim, class_names.clone())
    };
    let train = split("train", config.videos_train)?;
    let test = split("test", config.videos_test)?;
    Ok((train, test))
}

/// The prototypes [`generate_synthetic`] uses for `config`.
pub fn synthetic_prototypes(config: &SyntheticConfig) -> Result<Prototypes> {
    config.validate()?;
    Prototypes::draw(config, &mut Prng::new(config.seed))
}

fn make_video(id: String, config: &SyntheticConfig, protos: &Prototypes, prng: &mut Prng) -> Result<VideoRecord> {
    let t_len = config.length;
    let num_labels = 1 + prng.below(config.max_classes_per_video);
    let mut classes: Vec<usize> = (0..config.num_classes).collect();
    for i in 0..num_labels {
        let j = i + prng.below(classes.len() - i);
        classes.swap(i, j);
    }
    let mut labels = classes[..num_labels].to_vec();
    labels.sort_unstable();

    // action events: (class, length)
    let action_total = config.action_instances();
    let mut events: Vec<(usize, usize)> = Vec::new();
    for (i, &c) in labels.iter().enumerate() {
        let share = action_total / num_labels + usize::from(i < action_total % num_labels);
        let pieces = if share >= 4 { 1 + prng.below(2) } else { 1 };
        for p in 0..pieces {
            events.push((c, share / pieces + usize::from(p < share % pieces)));
        }
    }
    prng.shuffle(&mut events);

    // context split evenly across events, flanking each side
    let context_total = config.context_instances();
    let n_events = events.len();
    let flanks: Vec<(usize, usize)> = (0..n_events)
        .map(|e| {
            let ctx = context_total / n_events + usize::from(e < context_total % n_events);
            let before = ctx / 2 + if ctx % 2 == 1 { prng.below(2) } else { 0 };
            (before, ctx - before)
        })
        .collect();

    // background gaps: one between consecutive events when possible, the
    // rest scattered uniformly over the n_events + 1 gaps
    let background_total = t_len - action_total - context_total;
    let mut gaps = vec![0usize; n_events + 1];
    let mut remaining = background_total;
    for g in gaps.iter_mut().take(n_events).skip(1) {
        if remaining == 0 {
            break;
        }
        *g += 1;
        remaining -= 1;
    }
    for _ in 0..remaining {
        gaps[prng.below(n_events + 1)] += 1;
    }

    let mut kinds = Vec::with_capacity(t_len);
    let mut gt = Vec::with_capacity(n_events);
    for (e, &(class, len)) in events.iter().enumerate() {
        kinds.extend(std::iter::repeat_n(Kind::Background, gaps[e]));
        kinds.extend(std::iter::repeat_n(Kind::Context(class), flanks[e].0));
        let start = kinds.len();
        kinds.extend(std::iter::repeat_n(Kind::Action(class), len));
        gt.push(GtSegment {
            class,
            start,
            end: kinds.len() - 1,
        });
        kinds.extend(std::iter::repeat_n(Kind::Context(class), flanks[e].1));
    }
    kinds.extend(std::iter::repeat_n(Kind::Background, gaps[n_events]));
    debug_assert_eq!(kinds.len(), t_len);
    gt.sort();

    let d = config.feature_dim;
    let mut data = Vec::with_capacity(t_len * d);
    for kind in kinds {
        let proto = match kind {
            Kind::Background => &protos.background,
            Kind::Context(c) => &protos.context[c],
            Kind::Action(c) => &protos.action[c],
        };
        for &m in proto {
            let v = m + config.noise_sigma * prng.normal();
            data.push(f64::from(v as f32));
        }
    }
    VideoRecord::new(id, Matrix::from_vec(t_len, d, data)?, labels, Some(gt))
}
