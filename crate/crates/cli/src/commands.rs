use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use asl_core::data::{generate_synthetic, load_dataset, save_dataset, Dataset};
use asl_core::evaluation::{evaluate, render_table, write_ap_csv, write_summary};
use asl_core::inference::{localize_dataset, read_proposals_csv, write_proposals_csv};
use asl_core::model::{load_checkpoint, run_gradcheck, save_checkpoint, AslModel, GradcheckConfig};
use asl_core::training::{
    actionness_recall, dataset_diagnostics, read_epoch_log_csv, train_with, EpochLog, TrainConfig,
};
use asl_core::{AslError, Result};

use crate::config::RunConfig;
use crate::CliError;

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.out).map_err(|source| AslError::Io {
        path: config.out.clone(),
        source,
    })?;
    Ok(&config.out)
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|source| AslError::Io { path, source })
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn check_compatible(model: &AslModel, data: &Dataset) -> Result<()> {
    if model.num_classes() != data.num_classes || model.feature_dim() != data.feature_dim {
        return Err(AslError::ModelMismatch {
            model_classes: model.num_classes(),
            model_dim: model.feature_dim(),
            data_classes: data.num_classes,
            data_dim: data.feature_dim,
        });
    }
    Ok(())
}

pub fn synth(config: &RunConfig) -> Result<()> {
    let (train, test) = generate_synthetic(&config.synthetic)?;
    let out = out_dir(config)?;
    save_dataset(&train, out.join("train.txt"))?;
    save_dataset(&test, out.join("test.txt"))?;
    for (name, data) in [("train", &train), ("test", &test)] {
        let (mut action, mut total) = (0usize, 0usize);
        for r in &data.records {
            let mask = r.action_mask().unwrap_or_default();
            action += mask.iter().filter(|&&m| m).count();
            total += r.len();
        }
        println!(
            "{name}: {} videos, {} classes, action fraction {:.3} -> {}",
            data.len(),
            data.num_classes,
            action as f64 / total.max(1) as f64,
            out.join(format!("{name}.txt")).display()
        );
    }
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<()> {
    let data = load_dataset(config.require(&config.train_manifest, "train_manifest")?)?;
    let out = out_dir(config)?;
    let (model, logs) = train_with(&data, &config.train, |_, log| {
        println!(
            "epoch {:>3} l_cls {:.6} l_asl {:.6} tpos_iou {:.4}",
            log.epoch, log.l_cls, log.l_asl, log.tpos_iou_mean
        );
    })?;
    save_checkpoint(&model, out.join("model.ckpt"))?;
    asl_core::training::write_epoch_log_csv(&logs, out.join("epochs.csv"))?;
    println!(
        "wrote {} and {}",
        out.join("model.ckpt").display(),
        out.join("epochs.csv").display()
    );
    Ok(())
}

pub fn localize(config: &RunConfig) -> Result<()> {
    let model = load_checkpoint(config.require(&config.checkpoint, "checkpoint")?)?;
    let data = load_dataset(config.require(&config.manifest, "manifest")?)?;
    check_compatible(&model, &data)?;
    let rows = localize_dataset(&model, &data, &config.inference)?;
    let out = out_dir(config)?;
    write_proposals_csv(&rows, out.join("proposals.csv"))?;
    println!(
        "{} proposals for {} videos (mode {}, beta {} from checkpoint) -> {}",
        rows.len(),
        data.len(),
        config.inference.mode,
        model.beta,
        out.join("proposals.csv").display()
    );
    Ok(())
}

pub fn eval(config: &RunConfig) -> Result<()> {
    let rows = read_proposals_csv(config.require(&config.proposals, "proposals")?)?;
    let data = load_dataset(config.require(&config.manifest, "manifest")?)?;
    let mut report = evaluate(&rows, &data, &config.eval_config())?;
    if let Some(path) = &config.checkpoint {
        let model = load_checkpoint(path)?;
        check_compatible(&model, &data)?;
        report.recall_at_n = Some(actionness_recall(&model, &data, config.recall_n)?);
    }
    let out = out_dir(config)?;
    write_ap_csv(&report, out.join("ap.csv"))?;
    write_summary(&report, out.join("summary.txt"))?;
    print!("{}", render_table(&report));
    if let Some(r) = &report.recall_at_n {
        if r.used < r.requested {
            println!("note: only {} instances available for Recall@{}", r.used, r.requested);
        }
    }
    Ok(())
}

pub const DIAGNOSTICS_HEADER: &str = "epoch,tpos_action_fraction,g_membership_accuracy,tpos_iou_mean,tpos_iou_std";

fn diagnostics_row(epoch: &str, log: &EpochLog, iou_known: bool) -> String {
    let (mean, std) = if iou_known {
        (log.tpos_iou_mean.to_string(), log.tpos_iou_std.to_string())
    } else {
        ("NA".to_string(), "NA".to_string())
    };
    format!(
        "{epoch},{},{},{mean},{std}\n",
        na(log.tpos_action_fraction),
        log.g_membership_accuracy
    )
}

/// Rows from the training log (when given), then one `checkpoint` row for
/// the model itself on `manifest`. Fields that cannot be computed are `NA`.
pub fn diagnose(config: &RunConfig, sweep: bool) -> Result<()> {
    let model = load_checkpoint(config.require(&config.checkpoint, "checkpoint")?)?;
    let data = load_dataset(config.require(&config.manifest, "manifest")?)?;
    check_compatible(&model, &data)?;

    let previous = match &config.previous_checkpoint {
        Some(path) => {
            let prev = load_checkpoint(path)?;
            check_compatible(&prev, &data)?;
            Some(dataset_diagnostics(&prev, &data, None)?.1)
        }
        None => None,
    };
    let (snapshot, _) = dataset_diagnostics(&model, &data, previous.as_deref())?;
    let recall = actionness_recall(&model, &data, config.recall_n)?;

    let logs = match &config.log {
        Some(path) => Some(read_epoch_log_csv(path)?),
        None => None,
    };
    let mut csv = String::from(DIAGNOSTICS_HEADER);
    csv.push('\n');
    for log in logs.iter().flatten() {
        csv.push_str(&diagnostics_row(&log.epoch.to_string(), log, true));
    }
    csv.push_str(&diagnostics_row("checkpoint", &snapshot, previous.is_some()));

    let mut summary = String::new();
    let _ = writeln!(summary, "tpos_action_fraction={}", na(snapshot.tpos_action_fraction));
    let _ = writeln!(summary, "g_membership_accuracy={}", snapshot.g_membership_accuracy);
    let _ = writeln!(
        summary,
        "tpos_iou_vs_previous={}",
        na(previous.is_some().then_some(snapshot.tpos_iou_mean))
    );
    let _ = writeln!(summary, "recall_at_n.requested={}", recall.requested);
    let _ = writeln!(summary, "recall_at_n.used={}", recall.used);
    let _ = writeln!(summary, "recall_at_n.value={}", recall.value);
    let last10 = logs.as_ref().filter(|l| !l.is_empty()).map(|l| {
        let tail = &l[l.len().saturating_sub(10)..];
        tail.iter().map(|e| e.tpos_iou_mean).sum::<f64>() / tail.len() as f64
    });
    let _ = writeln!(
        summary,
        "log_epochs={}",
        logs.as_ref().map_or("NA".into(), |l| l.len().to_string())
    );
    let _ = writeln!(summary, "tpos_iou_last10_mean={}", na(last10));

    let out = out_dir(config)?;
    if sweep {
        let train_data = load_dataset(config.require(&config.train_manifest, "train_manifest")?)?;
        let mut sweep_csv = String::from("rate,recall_at_n,used,final_tpos_action_fraction\n");
        let mut values = Vec::new();
        for &rate in &config.sweep_rates {
            let train_config = TrainConfig {
                class_rate_cap: Some(rate),
                ..config.train.clone()
            };
            let (capped, logs) = train_with(&train_data, &train_config, |_, _| {})?;
            check_compatible(&capped, &data)?;
            let r = actionness_recall(&capped, &data, config.recall_n)?;
            let frac = logs.last().and_then(|l| l.tpos_action_fraction);
            let _ = writeln!(sweep_csv, "{rate},{},{},{}", r.value, r.used, na(frac));
            println!("class rate {rate}: Recall@{} {:.4}", config.recall_n, r.value);
            values.push((rate, r.value));
        }
        // recorded, not enforced: higher class rate should not hurt recall
        let mut ordered = values.clone();
        ordered.sort_by(|a, b| b.0.total_cmp(&a.0));
        let monotone = ordered.windows(2).all(|w| w[0].1 >= w[1].1);
        let _ = writeln!(summary, "sweep_monotone={monotone}");
        write_text(out.join("class_rate_sweep.csv"), &sweep_csv)?;
    } else {
        let _ = writeln!(summary, "sweep_monotone=NA");
    }
    write_text(out.join("diagnostics.csv"), &csv)?;
    write_text(out.join("diagnostics_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn gradcheck(config: &RunConfig, seeds: usize, inject_sign_flip: bool) -> Result<(), CliError> {
    let gc = GradcheckConfig {
        seeds,
        first_seed: config.seed,
        inject_sign_flip,
        ..GradcheckConfig::default()
    };
    let report = run_gradcheck(&gc)?;
    for case in &report.cases {
        println!(
            "seed {:>3} {:?} l_cls {:.3e} l_asl {:.3e}",
            case.seed, case.loss, case.cls_error, case.asl_error
        );
    }
    if report.passed() {
        println!(
            "PASS max relative error {:.3e} < {:e}",
            report.max_error(),
            report.tolerance
        );
        Ok(())
    } else {
        println!(
            "FAIL max relative error {:.3e} >= {:e}",
            report.max_error(),
            report.tolerance
        );
        Err(CliError::GradcheckFailed {
            max_error: report.max_error(),
            tolerance: report.tolerance,
        })
    }
}
