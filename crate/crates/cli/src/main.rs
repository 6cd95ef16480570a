//! `dctrestore`: encode, decode and sweep I-frames, build datasets, train
//! and evaluate restoration models, and run the enhanced decoder.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.
//! Mutating subcommands write a JSON run manifest next to their output.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dctrestore_core::codec::{decode_planes, encode_planes, QualityFactor};
use dctrestore_core::dataset::{build_dataset, discover_frames, DatasetConfig, DatasetManifest, Split, MANIFEST_FILE};
use dctrestore_core::enhance::{
    enhance_decode, evaluate, load_model, qf_sweep, run_experiment, EnhanceConfig, ExperimentConfig, CONVERGENCE_FILE,
    REPORT_CSV_FILE,
};
use dctrestore_core::entropy::{extract_quantized_coeffs, serialize};
use dctrestore_core::media::{read_ppm, write_ppm};
use dctrestore_core::metrics::{aggregate, render_table, score, to_csv, MetricChannels, MetricReport};
use dctrestore_core::synth::{synthetic_image, TEST_IMAGE_SEED, TEST_IMAGE_SIZE};
use dctrestore_nn::{Arch, ArchConfig};

use manifest::RunManifest;

/// Overrides the worker thread count.
const THREADS_ENV: &str = "DCTRESTORE_THREADS";

#[derive(Parser)]
#[command(name = "dctrestore", version, about = "I-frame codec and DCT-domain restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a PPM image into an IFR1 stream.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=100))]
        qf: u32,
    },
    /// Decode an IFR1 stream into a PPM image.
    Decode { input: PathBuf, output: PathBuf },
    /// Encode and decode an image at several quality factors.
    QfSweep {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,100", value_parser = clap::value_parser!(u32).range(1..=100))]
        qfs: Vec<u32>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        luma: bool,
    },
    /// Write the seeded synthetic test image.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = TEST_IMAGE_SIZE)]
        width: usize,
        #[arg(long, default_value_t = TEST_IMAGE_SIZE)]
        height: usize,
        #[arg(long, default_value_t = TEST_IMAGE_SEED)]
        seed: u64,
    },
    /// Tile frames into patches and store their coefficients at every QF.
    DatasetBuild {
        frames: PathBuf,
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,30,40,50")]
        qfs: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        patch_size: usize,
        #[arg(long, default_value_t = 0.95)]
        train_fraction: f64,
        /// Source directory whose patches all go to the test split.
        #[arg(long = "test-source")]
        test_sources: Vec<String>,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10)]
        input_qf: u8,
        #[arg(long, default_value_t = 50)]
        target_qf: u8,
        #[arg(long, default_value_t = 400)]
        epochs: usize,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        luma: bool,
        /// Print one line per epoch.
        #[arg(long)]
        verbose: bool,
    },
    /// Score a trained model against plain decodes on one split.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "valid", value_parser = parse_split)]
        split: Split,
        #[arg(long, default_value_t = 10)]
        input_qf: u8,
        #[arg(long, default_value_t = 50)]
        target_qf: u8,
        #[arg(long)]
        luma: bool,
        /// Also write the rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Decode an IFR1 stream through a trained model.
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Dataset whose normalization statistics the model was trained with.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        input_qf: u8,
        #[arg(long, default_value_t = 50)]
        reference_qf: u8,
    },
    /// Compare two PPM images.
    Metrics {
        image: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        luma: bool,
    },
}

#[derive(Args, Clone, Copy)]
struct ModelArgs {
    #[arg(long, default_value = "res-unet", value_parser = parse_arch)]
    arch: Arch,
    #[arg(long, default_value_t = 1.0)]
    width_mult: f64,
}

impl ModelArgs {
    fn config(self) -> ArchConfig {
        ArchConfig::new(self.arch).with_width_mult(self.width_mult)
    }
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    s.parse().map_err(|e: dctrestore_nn::NnError| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split {s:?} (train, valid or test)"))
}

fn channels(luma: bool) -> MetricChannels {
    if luma {
        MetricChannels::Luma
    } else {
        MetricChannels::Rgb
    }
}

fn qf(v: u32) -> Result<QualityFactor> {
    Ok(QualityFactor::new(v)?)
}

fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p:.4}")
    }
}

fn sibling_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    output.with_file_name(name)
}

fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    match cli.command {
        Command::Encode { input, output, qf: q } => {
            let run = RunManifest::start("encode", argv, None, &[&input])?;
            let img = read_ppm(&input)?;
            let q = qf(q)?;
            let stream = serialize(&encode_planes(&img, q)?, q, img.width(), img.height())?;
            fs::write(&output, &stream).with_context(|| format!("writing {}", output.display()))?;
            println!("width={} height={} qf={} bytes={}", img.width(), img.height(), q.get(), stream.len());
            run.finish(&sibling_manifest(&output))
        }
        Command::Decode { input, output } => {
            let run = RunManifest::start("decode", argv, None, &[&input])?;
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let frame = extract_quantized_coeffs(&bytes)?;
            write_ppm(&decode_planes(&frame.planes, frame.qf, frame.width, frame.height)?, &output)?;
            println!("width={} height={} qf={}", frame.width, frame.height, frame.qf.get());
            run.finish(&sibling_manifest(&output))
        }
        Command::QfSweep { input, qfs, out, luma } => {
            let run = RunManifest::start("qf-sweep", argv, None, &[&input])?;
            let img = read_ppm(&input)?;
            let qfs = qfs.into_iter().map(qf).collect::<Result<Vec<_>>>()?;
            let rows = qf_sweep(&img, &qfs, channels(luma))?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut csv = String::from("qf,ssim,psnr,nrmse\n");
            for r in &rows {
                write_ppm(&r.image, out.join(format!("qf{:03}.ppm", r.qf.get())))?;
                let line = format!("{},{:.6},{},{:.6}", r.qf.get(), r.metrics.ssim, fmt_psnr(r.metrics.psnr), r.metrics.nrmse);
                println!("{line}");
                csv.push_str(&line);
                csv.push('\n');
            }
            fs::write(out.join("metrics.csv"), csv)?;
            run.finish(&out.join("run.json"))
        }
        Command::Synth { output, width, height, seed } => {
            let run = RunManifest::start("synth", argv, Some(seed), &[])?;
            write_ppm(&synthetic_image(width, height, seed), &output)?;
            println!("width={width} height={height} seed={seed}");
            run.finish(&sibling_manifest(&output))
        }
        Command::DatasetBuild { frames, output, qfs, seed, patch_size, train_fraction, test_sources } => {
            let inputs: Vec<PathBuf> = discover_frames(&frames)?.into_iter().map(|(_, f)| frames.join(f)).collect();
            let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            let run = RunManifest::start("dataset-build", argv, Some(seed), &refs)?;
            let cfg = DatasetConfig { qfs, seed, patch_size, train_fraction, test_sources };
            let m = build_dataset(&frames, &output, &cfg)?;
            for split in [Split::Train, Split::Valid, Split::Test] {
                println!("{}={}", split.name(), m.split(split).count());
            }
            println!("samples={} files={}", m.samples.len(), m.samples.len() * m.config.qfs.len());
            run.finish(&output.join("run.json"))
        }
        Command::Train { dataset, out, model, input_qf, target_qf, epochs, batch, seed, luma, verbose } => {
            let run = RunManifest::start("train", argv, Some(seed), &[&dataset.join(MANIFEST_FILE)])?;
            let cfg = ExperimentConfig {
                input_qf,
                target_qf,
                epochs,
                batch_size: batch,
                seed,
                channels: channels(luma),
                verbose,
                ..ExperimentConfig::new(model.config(), &dataset, &out)
            };
            let outcome = run_experiment(&cfg)?;
            print!("{}", render_table(&outcome.report));
            println!("best_epoch={}", outcome.best_epoch);
            println!("weights={}", outcome.weights.display());
            println!("convergence={}", out.join(CONVERGENCE_FILE).display());
            println!("report={}", out.join(REPORT_CSV_FILE).display());
            run.finish(&out.join("run.json"))
        }
        Command::Eval { dataset, weights, model, split, input_qf, target_qf, luma, csv } => {
            let m = load_model(&model.config(), &weights)?;
            let rows = evaluate(&m, model.arch.label(), &dataset, split, input_qf, target_qf, channels(luma))?;
            print!("{}", render_table(&rows));
            print!("{}", to_csv(&rows));
            if let Some(path) = csv {
                fs::write(&path, to_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Enhance { input, output, weights, model, dataset, input_qf, reference_qf } => {
            let run = RunManifest::start("enhance", argv, None, &[&input, &weights, &dataset.join(MANIFEST_FILE)])?;
            let manifest = DatasetManifest::read(&dataset).context("normalization statistics are missing")?;
            let m = load_model(&model.config(), &weights)?;
            let cfg = EnhanceConfig::from_manifest(&manifest, input_qf, reference_qf)?;
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let img = enhance_decode(&bytes, &m, &cfg)?;
            write_ppm(&img, &output)?;
            println!("width={} height={} input_qf={} reference_qf={}", img.width(), img.height(), cfg.input_qf.get(), reference_qf);
            run.finish(&sibling_manifest(&output))
        }
        Command::Metrics { image, reference, luma } => {
            let row = score(&read_ppm(&image)?, &read_ppm(&reference)?, channels(luma))?;
            let report: MetricReport = aggregate(&[row], &image.display().to_string())?;
            print!("{}", render_table(&[report]));
            println!("ssim={:.6}", row.ssim);
            println!("psnr={}", fmt_psnr(row.psnr));
            println!("nrmse={:.6}", row.nrmse);
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match configure_threads().and_then(|_| run(cli, argv)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
