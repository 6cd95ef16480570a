//! Enhanced decoding and the training / evaluation driver.
//!
//! The enhanced decoder extracts quantized coefficients from a low-quality
//! stream, lets a network predict the coefficients of a higher-quality
//! encoding, and dequantizes the prediction with the higher-quality tables
//! before the usual inverse transform, merge and color conversion.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dctrestore_nn::ops::mse_loss;
use dctrestore_nn::{AdamConfig, AdamState, ArchConfig, Mode, Model, NnError, Rng, Tensor4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{decode_planes, encode_planes, CodecError, QualityFactor};
use crate::dataset::{denormalize, normalize_batch, quantize_prediction, CoeffTensor, DatasetError, DatasetManifest, NormStats, Split};
use crate::entropy::{extract_quantized_coeffs, EntropyError};
use crate::media::RgbImage;
use crate::metrics::{aggregate, score, sort_by_ssim, to_csv, render_table, MetricChannels, MetricReport, MetricRow, MetricsError};

pub const WEIGHTS_FILE: &str = "best.dctw";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const DIVERGED_FILE: &str = "diverged.dctw";
/// Quality factor of the second plain-codec comparison row.
pub const BASELINE_QF: u8 = 20;
/// Train patches used to re-estimate batchnorm statistics after each epoch.
pub const RECALIBRATION_PATCHES: usize = 64;
const RECALIBRATION_BATCH: usize = 16;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("stream has qf {found}, the model expects qf {expected}")]
    QfMismatch { expected: u8, found: u8 },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("training diverged at epoch {epoch} (loss {loss}); state written to {dump}")]
    Diverged { epoch: usize, loss: f64, dump: PathBuf },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), EnhanceError> {
    fs::write(path, contents).map_err(|source| EnhanceError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceConfig {
    pub input_qf: QualityFactor,
    /// Tables used to dequantize the model's prediction.
    pub reference_qf: QualityFactor,
    /// Normalizes the input-QF coefficients fed to the model.
    pub input_stats: NormStats,
    /// Maps the model output back to reference-QF coefficients.
    pub reference_stats: NormStats,
}

impl EnhanceConfig {
    /// Quality factors and their normalization statistics from a dataset.
    pub fn from_manifest(manifest: &DatasetManifest, input_qf: u8, reference_qf: u8) -> Result<Self, EnhanceError> {
        Ok(Self {
            input_qf: qf(input_qf)?,
            reference_qf: qf(reference_qf)?,
            input_stats: manifest.stats_for(input_qf)?,
            reference_stats: manifest.stats_for(reference_qf)?,
        })
    }
}

/// Runs the model on equally sized tensors and returns its predictions as
/// quantized coefficients: denormalized and rounded to the nearest integer.
pub fn predict_coeffs(model: &Model<f32>, tensors: &[&CoeffTensor], cfg: &EnhanceConfig) -> Result<Vec<CoeffTensor>, EnhanceError> {
    let x = normalize_batch(tensors, &cfg.input_stats)?;
    let y = model.infer(&x)?;
    let (w, h) = (x.width(), x.height());
    Ok((0..y.batch())
        .map(|n| quantize_prediction(&denormalize(y.item(n), &cfg.reference_stats), w, h))
        .collect::<Result<_, _>>()?)
}

/// Enhanced decode of coefficient tensors, `batch` at a time.
pub fn enhance_tensors(
    model: &Model<f32>,
    tensors: &[&CoeffTensor],
    cfg: &EnhanceConfig,
    width: usize,
    height: usize,
    batch: usize,
) -> Result<Vec<RgbImage>, EnhanceError> {
    let mut out = Vec::with_capacity(tensors.len());
    for chunk in tensors.chunks(batch.max(1)) {
        for t in predict_coeffs(model, chunk, cfg)? {
            out.push(decode_planes(&t.to_planes(), cfg.reference_qf, width, height)?);
        }
    }
    Ok(out)
}

/// Extract → normalize → model → denormalize and round → dequantize with
/// the reference tables → inverse transform, merge, color conversion.
pub fn enhance_decode(stream: &[u8], model: &Model<f32>, cfg: &EnhanceConfig) -> Result<RgbImage, EnhanceError> {
    let frame = extract_quantized_coeffs(stream)?;
    if frame.qf != cfg.input_qf {
        return Err(EnhanceError::QfMismatch { expected: cfg.input_qf.get(), found: frame.qf.get() });
    }
    let tensor = CoeffTensor::from_planes(&frame.planes);
    let mut images = enhance_tensors(model, &[&tensor], cfg, frame.width, frame.height, 1)?;
    Ok(images.pop().expect("one image per tensor"))
}

/// One line of a convergence log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub epoch: usize,
    pub loss: f64,
    pub ssim: f64,
    pub psnr: f64,
    pub nrmse: f64,
}

pub const CONVERGENCE_HEADER: &str = "epoch,loss,ssim,psnr,nrmse";

pub fn convergence_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{:.8},{:.6},{:.6},{:.6}", r.epoch, r.loss, r.ssim, r.psnr, r.nrmse);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub arch: ArchConfig,
    pub dataset_dir: PathBuf,
    pub input_qf: u8,
    pub target_qf: u8,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub channels: MetricChannels,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl ExperimentConfig {
    pub fn new(arch: ArchConfig, dataset_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            arch,
            dataset_dir: dataset_dir.into(),
            input_qf: 10,
            target_qf: 50,
            epochs: 400,
            batch_size: 16,
            seed: 0,
            out_dir: out_dir.into(),
            channels: MetricChannels::Rgb,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub weights: PathBuf,
    pub convergence: Vec<ConvergenceRecord>,
    pub best_epoch: usize,
    /// Model row plus baseline rows, best SSIM first.
    pub report: Vec<MetricReport>,
}

pub fn input_label(qf: u8) -> String {
    format!("MPEG QF={qf} (input)")
}

pub fn baseline_label(qf: u8) -> String {
    format!("MPEG QF={qf}")
}

fn qf(v: u8) -> Result<QualityFactor, EnhanceError> {
    Ok(QualityFactor::new(v as u32)?)
}

struct SplitData {
    entries: Vec<usize>,
    inputs: Vec<CoeffTensor>,
    references: Vec<RgbImage>,
}

fn load_split(manifest: &DatasetManifest, dir: &Path, split: Split, input_qf: u8, target_qf: u8) -> Result<SplitData, EnhanceError> {
    let target = qf(target_qf)?;
    let size = manifest.config.patch_size;
    let entries: Vec<usize> = manifest.split(split).map(|e| e.id).collect();
    let loaded = entries
        .par_iter()
        .map(|&id| -> Result<(CoeffTensor, RgbImage), EnhanceError> {
            let input = manifest.load_tensor(dir, id, input_qf)?;
            let t = manifest.load_tensor(dir, id, target_qf)?;
            Ok((input, decode_planes(&t.to_planes(), target, size, size)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (inputs, references) = loaded.into_iter().unzip();
    Ok(SplitData { entries, inputs, references })
}

fn score_all(images: &[RgbImage], refs: &[RgbImage], channels: MetricChannels) -> Result<Vec<MetricRow>, EnhanceError> {
    Ok(images.par_iter().zip(refs).map(|(a, r)| score(a, r, channels)).collect::<Result<Vec<_>, _>>()?)
}

/// Plain decodes of the input coefficients, scored against the references.
fn input_rows(data: &SplitData, input_qf: QualityFactor, size: usize, channels: MetricChannels) -> Result<Vec<MetricRow>, EnhanceError> {
    let images = data
        .inputs
        .par_iter()
        .map(|t| decode_planes(&t.to_planes(), input_qf, size, size))
        .collect::<Result<Vec<_>, _>>()?;
    score_all(&images, &data.references, channels)
}

/// Re-encodes the source patches at `qf` and scores the plain decodes.
fn reencoded_rows(
    manifest: &DatasetManifest,
    data: &SplitData,
    qf: QualityFactor,
    channels: MetricChannels,
) -> Result<Vec<MetricRow>, EnhanceError> {
    let size = manifest.config.patch_size;
    let images = data
        .entries
        .par_iter()
        .map(|&id| -> Result<RgbImage, EnhanceError> {
            let patch = manifest.load_patch(&manifest.samples[id])?;
            Ok(decode_planes(&encode_planes(&patch, qf)?, qf, size, size)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    score_all(&images, &data.references, channels)
}

fn validate_experiment(cfg: &ExperimentConfig, manifest: &DatasetManifest) -> Result<(), EnhanceError> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(EnhanceError::Config("epochs and batch size must be at least 1".into()));
    }
    for q in [cfg.input_qf, cfg.target_qf] {
        if !manifest.has_qf(q) {
            return Err(DatasetError::MissingQf(q).into());
        }
    }
    Ok(())
}

/// Trains `cfg.arch` on the dataset's train split with MSE between
/// predictions and target-QF coefficients normalized with the target-QF
/// statistics (inputs use the input-QF statistics), validates
/// end to end after every epoch, keeps the best-SSIM weights and writes the
/// convergence log and the result table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, EnhanceError> {
    let manifest = DatasetManifest::read(&cfg.dataset_dir)?;
    validate_experiment(cfg, &manifest)?;
    let input_qf = qf(cfg.input_qf)?;
    let norm = EnhanceConfig::from_manifest(&manifest, cfg.input_qf, cfg.target_qf)?;
    let size = manifest.config.patch_size;
    fs::create_dir_all(&cfg.out_dir).map_err(|source| EnhanceError::Io { path: cfg.out_dir.clone(), source })?;

    let train_ids: Vec<usize> = manifest.split(Split::Train).map(|e| e.id).collect();
    if train_ids.is_empty() {
        return Err(DatasetError::EmptySplit(Split::Train).into());
    }
    let valid = load_split(&manifest, &cfg.dataset_dir, Split::Valid, cfg.input_qf, cfg.target_qf)?;
    if valid.entries.is_empty() {
        return Err(DatasetError::EmptySplit(Split::Valid).into());
    }
    let train: Vec<(Vec<f32>, Vec<f32>)> = train_ids
        .par_iter()
        .map(|&id| -> Result<(Vec<f32>, Vec<f32>), EnhanceError> {
            let x = manifest.load_tensor(&cfg.dataset_dir, id, cfg.input_qf)?;
            let y = manifest.load_tensor(&cfg.dataset_dir, id, cfg.target_qf)?;
            Ok((normalize_batch(&[&x], &norm.input_stats)?.into_vec(), normalize_batch(&[&y], &norm.reference_stats)?.into_vec()))
        })
        .collect::<Result<_, _>>()?;

    let graph = cfg.arch.build()?;
    let mut rng = Rng::new(cfg.seed);
    let mut model: Model<f32> = Model::new(graph, &mut rng);
    let mut adam = AdamState::new(AdamConfig::default(), &model.trainable_sizes());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let item = 3 * size * size;

    let weights_path = cfg.out_dir.join(WEIGHTS_FILE);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<ConvergenceRecord> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut xs = Vec::with_capacity(batch.len() * item);
            let mut ys = Vec::with_capacity(batch.len() * item);
            for &i in batch {
                xs.extend_from_slice(&train[i].0);
                ys.extend_from_slice(&train[i].1);
            }
            let shape = [batch.len(), 3, size, size];
            let (x, y) = (Tensor4::from_vec(shape, xs)?, Tensor4::from_vec(shape, ys)?);
            let tape = model.forward_train(&x)?;
            let (loss, grad) = mse_loss(tape.output(), &y)?;
            if !loss.is_finite() {
                let dump = cfg.out_dir.join(DIVERGED_FILE);
                model.save(&dump)?;
                return Err(EnhanceError::Diverged { epoch, loss, dump });
            }
            let grads = model.backward(&tape, &grad)?;
            drop(tape);
            adam.step(&mut model.trainable_mut(), &grads.slices())?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        recalibrate(&mut model, &train, &order, size)?;
        let inputs: Vec<&CoeffTensor> = valid.inputs.iter().collect();
        let images = enhance_tensors(&model, &inputs, &norm, size, size, cfg.batch_size)?;
        let m = aggregate(&score_all(&images, &valid.references, cfg.channels)?, "valid")?;
        let rec = ConvergenceRecord { epoch, loss: loss_sum / seen as f64, ssim: m.ssim, psnr: m.psnr, nrmse: m.nrmse };
        records.push(rec);
        if best.is_none_or(|b| rec.ssim > b.ssim) {
            best = Some(rec);
            model.save(&weights_path)?;
        }
        write_file(&cfg.out_dir.join(CONVERGENCE_FILE), convergence_csv(&records))?;
        if cfg.verbose {
            eprintln!(
                "epoch {epoch:>4}  loss {:.6}  ssim {:.6}  psnr {:.4}  nrmse {:.6}",
                rec.loss, rec.ssim, rec.psnr, rec.nrmse
            );
        }
    }
    let best = best.expect("at least one epoch ran");

    let mut report = vec![
        MetricReport { label: cfg.arch.arch.label().to_string(), ..aggregate_record(&best, valid.entries.len()) },
        MetricReport {
            baseline: true,
            ..aggregate(&input_rows(&valid, input_qf, size, cfg.channels)?, &input_label(cfg.input_qf))?
        },
        MetricReport {
            baseline: true,
            ..aggregate(&reencoded_rows(&manifest, &valid, qf(BASELINE_QF)?, cfg.channels)?, &baseline_label(BASELINE_QF))?
        },
    ];
    sort_by_ssim(&mut report);
    write_file(&cfg.out_dir.join(REPORT_CSV_FILE), to_csv(&report))?;
    write_file(&cfg.out_dir.join(REPORT_TEXT_FILE), render_table(&report))?;
    Ok(ExperimentOutcome { weights: weights_path, convergence: records, best_epoch: best.epoch, report })
}

/// Re-estimates batchnorm running statistics with the current weights from
/// the first train patches of this epoch's order. With a 0.9997 momentum the
/// running averages would otherwise still be dominated by statistics of the
/// early, very different weights for runs of a few thousand steps.
fn recalibrate(model: &mut Model<f32>, train: &[(Vec<f32>, Vec<f32>)], order: &[usize], size: usize) -> Result<(), EnhanceError> {
    model.reset_batchnorm_statistics();
    let picked = &order[..order.len().min(RECALIBRATION_PATCHES)];
    for chunk in picked.chunks(RECALIBRATION_BATCH) {
        let xs: Vec<f32> = chunk.iter().flat_map(|&i| train[i].0.iter().copied()).collect();
        model.forward(&Tensor4::from_vec([chunk.len(), 3, size, size], xs)?, Mode::Train)?;
    }
    Ok(())
}

fn aggregate_record(r: &ConvergenceRecord, count: usize) -> MetricReport {
    MetricReport {
        label: String::new(),
        ssim: r.ssim,
        psnr: r.psnr,
        nrmse: r.nrmse,
        count,
        infinite_psnr: 0,
        baseline: false,
    }
}

/// Loads a model for `arch` from a weights file, checking that the file
/// was written for the same architecture.
pub fn load_model(arch: &ArchConfig, weights: &Path) -> Result<Model<f32>, EnhanceError> {
    let mut model = Model::new(arch.build()?, &mut Rng::new(0));
    model.load(weights)?;
    Ok(model)
}

/// Paired rows per source (plain input decode and enhanced decode, both
/// scored against the target-QF decode) followed by the aggregate pair.
pub fn evaluate(
    model: &Model<f32>,
    model_label: &str,
    dataset_dir: &Path,
    split: Split,
    input_qf: u8,
    target_qf: u8,
    channels: MetricChannels,
) -> Result<Vec<MetricReport>, EnhanceError> {
    let manifest = DatasetManifest::read(dataset_dir)?;
    for q in [input_qf, target_qf] {
        if !manifest.has_qf(q) {
            return Err(DatasetError::MissingQf(q).into());
        }
    }
    let data = load_split(&manifest, dataset_dir, split, input_qf, target_qf)?;
    if data.entries.is_empty() {
        return Err(DatasetError::EmptySplit(split).into());
    }
    let size = manifest.config.patch_size;
    let plain = input_rows(&data, qf(input_qf)?, size, channels)?;
    let inputs: Vec<&CoeffTensor> = data.inputs.iter().collect();
    let enhanced = score_all(
        &enhance_tensors(model, &inputs, &EnhanceConfig::from_manifest(&manifest, input_qf, target_qf)?, size, size, 16)?,
        &data.references,
        channels,
    )?;
    let mut sources: Vec<&str> = Vec::new();
    for &id in &data.entries {
        let s = manifest.samples[id].source.as_str();
        if !sources.contains(&s) {
            sources.push(s);
        }
    }
    let input_name = format!("QF={input_qf}");
    let mut out = Vec::new();
    for s in &sources {
        let pick = |rows: &[MetricRow]| -> Vec<MetricRow> {
            data.entries.iter().zip(rows).filter(|(id, _)| manifest.samples[**id].source == *s).map(|(_, r)| *r).collect()
        };
        out.push(MetricReport { baseline: true, ..aggregate(&pick(&plain), &format!("{s} {input_name}"))? });
        out.push(aggregate(&pick(&enhanced), &format!("{s} {model_label}"))?);
    }
    out.push(MetricReport { baseline: true, ..aggregate(&plain, &format!("all {input_name}"))? });
    out.push(aggregate(&enhanced, &format!("all {model_label}"))?);
    Ok(out)
}

/// One quality level of a degradation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub qf: QualityFactor,
    pub image: RgbImage,
    pub metrics: MetricRow,
}

/// Encodes and decodes `image` at every quality factor and scores each
/// result against the original.
pub fn qf_sweep(image: &RgbImage, qfs: &[QualityFactor], channels: MetricChannels) -> Result<Vec<SweepRow>, EnhanceError> {
    qfs.par_iter()
        .map(|&q| {
            let decoded = decode_planes(&encode_planes(image, q)?, q, image.width(), image.height())?;
            let metrics = score(&decoded, image, channels)?;
            Ok(SweepRow { qf: q, image: decoded, metrics })
        })
        .collect()
}
