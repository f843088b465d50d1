//! Browser bindings. The plain Rust functions hold the logic and are what
//! the native tests exercise; the `#[wasm_bindgen]` items are thin JSON
//! wrappers over them.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use asl_core::data::{generate_synthetic, Dataset, SyntheticConfig};
use asl_core::evaluation::{evaluate, EvalConfig};
use asl_core::inference::{localize, localize_dataset, InferenceConfig, LocalizationMode, Proposal};
use asl_core::model::{asl_loss, forward_selection, ActionnessLoss, AslModel};
use asl_core::training::{train, TrainConfig};

pub fn demo_synthetic(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        num_classes: 3,
        feature_dim: 8,
        length: 48,
        videos_train: 60,
        videos_test: 12,
        max_classes_per_video: 1,
        seed,
        ..SyntheticConfig::default()
    }
}

pub fn demo_training(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        hidden: 32,
        lr: 1e-3,
        seed,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochPoint {
    pub epoch: usize,
    pub l_cls: f64,
    pub l_asl: f64,
}

pub struct DemoState {
    pub model: AslModel,
    pub test: Dataset,
    pub curve: Vec<EpochPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub class: usize,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl From<&Proposal> for Segment {
    fn from(p: &Proposal) -> Self {
        Segment {
            class: p.class_index,
            start: p.start,
            end: p.end,
            score: p.score,
        }
    }
}

/// One test video seen through a model re-fused at some β.
#[derive(Clone, Debug, Serialize)]
pub struct VideoView {
    pub id: String,
    pub labels: Vec<usize>,
    pub class: usize,
    pub gt: Vec<Segment>,
    pub cas: Vec<f64>,
    pub actionness: Vec<f64>,
    pub fused: Vec<f64>,
    pub proposals: Vec<Segment>,
    /// mAP of the whole test split at the same β and mode.
    pub test_map: f64,
}

impl DemoState {
    pub fn train(seed: u64, epochs: usize) -> Result<Self, String> {
        let (train_set, test) = generate_synthetic(&demo_synthetic(seed)).map_err(|e| e.to_string())?;
        let (model, logs) = train(&train_set, &demo_training(seed, epochs)).map_err(|e| e.to_string())?;
        let curve = logs
            .iter()
            .map(|l| EpochPoint {
                epoch: l.epoch,
                l_cls: l.l_cls,
                l_asl: l.l_asl,
            })
            .collect();
        Ok(DemoState { model, test, curve })
    }

    pub fn view(&self, video: usize, beta: f64, mode: &str) -> Result<VideoView, String> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(format!("beta {beta} outside [0, 1]"));
        }
        let mode: LocalizationMode = mode.parse().map_err(|e: asl_core::AslError| e.to_string())?;
        let record = self
            .test
            .records
            .get(video)
            .ok_or_else(|| format!("video {video} out of range 0..{}", self.test.len()))?;
        let model = AslModel {
            beta,
            ..self.model.clone()
        };
        let config = InferenceConfig {
            mode,
            ..InferenceConfig::default()
        };
        let state = forward_selection(&model, record).map_err(|e| e.to_string())?;
        let class = record.labels[0];
        let proposals = localize(&model, record, &config).map_err(|e| e.to_string())?;
        let rows = localize_dataset(&model, &self.test, &config).map_err(|e| e.to_string())?;
        let report = evaluate(&rows, &self.test, &EvalConfig::thumos()).map_err(|e| e.to_string())?;
        Ok(VideoView {
            id: record.id.clone(),
            labels: record.labels.clone(),
            class,
            gt: record
                .gt_segments
                .iter()
                .flatten()
                .map(|g| Segment {
                    class: g.class,
                    start: g.start,
                    end: g.end,
                    score: 1.0,
                })
                .collect(),
            cas: state.cas.row(class).to_vec(),
            actionness: state.actionness.clone(),
            fused: state.fused.row(class).to_vec(),
            proposals: proposals.iter().map(Segment::from).collect(),
            test_map: report.map,
        })
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LossCurves {
    pub a: Vec<f64>,
    /// Loss of a `T_pos` instance with actionness `a`.
    pub gce: Vec<f64>,
    pub bce: Vec<f64>,
    /// Gradient magnitude w.r.t. `a`: `a^(q-1)` for GCE against `1/a` for BCE.
    pub gce_grad: Vec<f64>,
    pub bce_grad: Vec<f64>,
}

pub fn loss_curves(q: f64, points: usize) -> Result<LossCurves, String> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(format!("q {q} outside (0, 1]"));
    }
    if points < 2 {
        return Err("need at least two points".into());
    }
    let a: Vec<f64> = (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
    let loss = |x: f64, variant| asl_loss(&[x], &[0], &[], q, variant);
    Ok(LossCurves {
        gce: a.iter().map(|&x| loss(x, ActionnessLoss::Gce)).collect(),
        bce: a.iter().map(|&x| loss(x, ActionnessLoss::Bce)).collect(),
        gce_grad: a.iter().map(|&x| x.powf(q - 1.0)).collect(),
        bce_grad: a.iter().map(|&x| 1.0 / x).collect(),
        a,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, epochs: usize) -> Result<Demo, JsValue> {
        DemoState::train(u64::from(seed), epochs)
            .map(|state| Demo { state })
            .map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = numVideos)]
    pub fn num_videos(&self) -> usize {
        self.state.test.len()
    }

    #[wasm_bindgen(js_name = trainedBeta)]
    pub fn trained_beta(&self) -> f64 {
        self.state.model.beta
    }

    /// JSON array of `{epoch, l_cls, l_asl}`.
    #[wasm_bindgen(js_name = trainingCurve)]
    pub fn training_curve(&self) -> String {
        to_json(&self.state.curve)
    }

    /// JSON [`VideoView`].
    pub fn view(&self, video: usize, beta: f64, mode: &str) -> Result<String, JsValue> {
        self.state
            .view(video, beta, mode)
            .map(|v| to_json(&v))
            .map_err(|e| JsValue::from_str(&e))
    }
}

/// JSON [`LossCurves`].
#[wasm_bindgen(js_name = lossCurves)]
pub fn loss_curves_json(q: f64, points: usize) -> Result<String, JsValue> {
    loss_curves(q, points)
        .map(|c| to_json(&c))
        .map_err(|e| JsValue::from_str(&e))
}
