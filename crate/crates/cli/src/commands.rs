use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use hsmcfl_core::dataio::{generate_synthetic, write_dataset, Dataset, Split, HEALTH_CONDITIONS};
use hsmcfl_core::hsm::{build_batches, write_batches_jsonl, SimilarityView};
use hsmcfl_core::metrics::MetricsBundle;
use hsmcfl_core::nn::{read_checkpoint, write_checkpoint, Checkpoint, Network};
use hsmcfl_core::train::{
    evaluate as evaluate_split, export_embeddings, run_experiment, run_pipeline, train_plain_mlp, AblationCell, MeanStd,
    NoHooks, TrainConfig,
};
use hsmcfl_core::{exec, rng};

use crate::config::{load_config, prepare_dataset, read_spec, RunConfig};
use crate::Common;

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn class_names(k: usize) -> Vec<String> {
    if k == HEALTH_CONDITIONS.len() {
        HEALTH_CONDITIONS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..k).map(|c| format!("class{c}")).collect()
    }
}

fn load(common: &Common) -> Result<(RunConfig, Dataset)> {
    let (mut cfg, base) = load_config(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    let ds = prepare_dataset(&cfg, &base)?;
    Ok((cfg, ds))
}

pub fn generate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = read_spec(spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    create_dir(out)?;
    let csv = out.join("dataset.csv");
    write_dataset(&ds, &csv)?;
    println!("wrote {} samples to {}", ds.len(), csv.display());
    Ok(())
}

fn metadata(cfg: &TrainConfig, ds: &Dataset) -> serde_json::Value {
    serde_json::json!({
        "feature_count": ds.feature_count(),
        "class_count": ds.class_count(),
        "cell": cfg.cell(),
        "seed": cfg.seed,
    })
}

pub fn train(common: &Common) -> Result<()> {
    let (cfg, ds) = load(common)?;
    let out = &common.out;
    create_dir(out)?;
    let result = run_pipeline(&ds, &cfg.train, &mut NoHooks)?;
    let report = &result.report;

    write_dataset(&ds, out.join("dataset.csv"))?;
    write_checkpoint(
        &Checkpoint {
            networks: vec![
                ("encoder".into(), result.model.encoder.clone()),
                ("projection".into(), result.model.projection.clone()),
            ],
            metadata: metadata(&cfg.train, &ds),
        },
        out.join("encoder.ckpt"),
    )?;
    write_checkpoint(
        &Checkpoint {
            networks: vec![("classifier".into(), result.classifier.clone())],
            metadata: metadata(&cfg.train, &ds),
        },
        out.join("classifier.ckpt"),
    )?;
    write_json(&out.join("report.json"), report)?;
    write_json(&out.join("timings.json"), &report.timings)?;
    let names = class_names(ds.class_count());
    let splits = [(Split::Train, Some(&report.train)), (Split::Val, report.val.as_ref()), (Split::Test, Some(&report.test))];
    for (split, bundle) in splits {
        if let Some(b) = bundle {
            b.confusion_matrix()?
                .write_csv(&names, out.join(format!("confusion_{}.csv", split.name())))?;
        }
    }
    export_embeddings(&result.model.encoder, &ds.labeled_all(), out.join("embeddings.csv"))?;
    println!(
        "{}: test accuracy {:.4}, macro G-mean {:.4}",
        report.cell.name(),
        report.test.accuracy,
        report.test.macro_gmean
    );
    Ok(())
}

fn network(ckpt: &Checkpoint, name: &str, path: &Path) -> Result<Network> {
    match ckpt.network(name) {
        Some(n) => Ok(n.clone()),
        None => bail!("{} has no network named {name:?}", path.display()),
    }
}

pub fn evaluate(dataset: &Path, checkpoints: &Path, out: &Path) -> Result<()> {
    let ds = hsmcfl_core::dataio::load_dataset(dataset)?;
    let enc_path = checkpoints.join("encoder.ckpt");
    let cls_path = checkpoints.join("classifier.ckpt");
    let encoder = network(&read_checkpoint(&enc_path)?, "encoder", &enc_path)?;
    let classifier = network(&read_checkpoint(&cls_path)?, "classifier", &cls_path)?;
    if encoder.input_dim() != ds.feature_count() {
        bail!(
            "encoder expects {} input features but {} has {}",
            encoder.input_dim(),
            dataset.display(),
            ds.feature_count()
        );
    }
    if classifier.input_dim() != encoder.output_dim() {
        bail!(
            "classifier expects {} inputs but the encoder produces {}",
            classifier.input_dim(),
            encoder.output_dim()
        );
    }
    if classifier.output_dim() != ds.class_count() {
        bail!(
            "classifier predicts {} classes but the dataset has {}",
            classifier.output_dim(),
            ds.class_count()
        );
    }
    let test = ds.labeled_set(Split::Test);
    let bundle: MetricsBundle = evaluate_split(&encoder, &classifier, &test)?;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &bundle)?;
    bundle
        .confusion_matrix()?
        .write_csv(&class_names(ds.class_count()), out.join("confusion_test.csv"))?;
    println!("test accuracy {:.4}, macro G-mean {:.4}", bundle.accuracy, bundle.macro_gmean);
    Ok(())
}

#[derive(Serialize)]
struct AblationOutput<'a> {
    #[serde(flatten)]
    report: &'a hsmcfl_core::train::ExperimentReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    plain_mlp_macro_gmean: Option<MeanStd>,
}

pub fn ablate(common: &Common, repeats: Option<usize>) -> Result<()> {
    let (cfg, ds) = load(common)?;
    let repeats = repeats.unwrap_or(cfg.repeats);
    let out = &common.out;
    create_dir(out)?;
    let report = run_experiment(&ds, &cfg.train, repeats, &AblationCell::ALL)?;
    let baseline = if cfg.baseline {
        let seeds: Vec<u64> = (0..repeats as u64).map(|r| cfg.train.seed.wrapping_add(r)).collect();
        let scores = exec::map_jobs(seeds, |seed| {
            train_plain_mlp(&ds, &TrainConfig { seed, ..cfg.train.clone() }).map(|m| m.macro_gmean)
        });
        Some(MeanStd::of(&scores.into_iter().collect::<hsmcfl_core::Result<Vec<_>>>()?))
    } else {
        None
    };
    let table = report.to_csv();
    std::fs::write(out.join("ablation_table.csv"), &table).context("writing ablation_table.csv")?;
    write_json(
        &out.join("ablation.json"),
        &AblationOutput {
            report: &report,
            plain_mlp_macro_gmean: baseline,
        },
    )?;
    print!("{table}");
    if let Some(b) = baseline {
        println!("plain MLP macro G-mean {:.6} ± {:.6}", b.mean, b.std);
    }
    Ok(())
}

pub fn mine_debug(common: &Common) -> Result<()> {
    let (cfg, ds) = load(common)?;
    let train = ds.labeled_set(Split::Train);
    let view = SimilarityView::from_raw(&train.features, train.labels.clone(), train.class_count)?;
    let mut miner = cfg.train.miner.clone();
    miner.batch_size = cfg.train.batch_size;
    miner.seed = rng::stage_seed(cfg.train.seed, rng::CFL_MINER, 0);
    let batches = build_batches(&view, &miner, &[])?;
    create_dir(&common.out)?;
    let path: PathBuf = common.out.join("batches.jsonl");
    write_batches_jsonl(&batches, &path)?;
    println!("wrote {} batches to {}", batches.len(), path.display());
    Ok(())
}
