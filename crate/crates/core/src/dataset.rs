//! Multi-QF coefficient datasets built from directories of still frames.
//!
//! Each frame is tiled into non-overlapping square patches; every patch is
//! encoded at each requested quality factor and stored as a `DCTS` sample
//! file. A text manifest records the build parameters, the split of every
//! patch and the normalization statistics.
//!
//! Layout of `frames_dir`: PPM files directly inside it form the source
//! `.`; each subdirectory is a separate source holding its own PPM files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dctrestore_nn::Tensor4;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{encode_planes, CodecError, CoeffPlane, CoeffPlanes, QualityFactor, QuantizedBlock, MAX_COEFF};
use crate::media::{read_ppm, MediaError, RgbImage};

pub const DEFAULT_PATCH_SIZE: usize = 120;
pub const DEFAULT_QFS: [u8; 4] = [10, 30, 40, 50];
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.95;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SAMPLES_DIR: &str = "samples";
pub const SAMPLE_MAGIC: &[u8; 4] = b"DCTS";
pub const SAMPLE_VERSION: u8 = 1;
const MANIFEST_HEADER: &str = "dctrestore-dataset 1";
/// Floor applied to per-channel standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("frame {width}x{height} is smaller than the {size}x{size} patch")]
    FrameTooSmall { width: usize, height: usize, size: usize },
    #[error("patch {width}x{height} is not a multiple of 8")]
    BadPatchDims { width: usize, height: usize },
    #[error("no frames found under {0}")]
    NoFrames(PathBuf),
    #[error("no samples in the {0} split")]
    EmptySplit(Split),
    #[error("malformed sample file {path}: {reason}")]
    BadSample { path: PathBuf, reason: String },
    #[error("malformed manifest: {0}")]
    BadManifest(String),
    #[error("invalid dataset configuration: {0}")]
    InvalidConfig(String),
    #[error("quality factor {0} is not stored in this dataset")]
    MissingQf(u8),
    #[error("no normalization statistics for quality factor {0}")]
    MissingStats(u8),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Quantized coefficients of an image laid out spatially: channel `c`
/// (Y, Cb, Cr) holds each block's 8×8 coefficients at the block's pixel
/// position, so entry `(c, 8·by + u, 8·bx + v)` is coefficient `(u, v)` of
/// block `(bx, by)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffTensor {
    width: usize,
    height: usize,
    data: Vec<i16>,
}

impl CoeffTensor {
    pub fn new(width: usize, height: usize, data: Vec<i16>) -> Result<Self, DatasetError> {
        if width == 0 || height == 0 || width % 8 != 0 || height % 8 != 0 {
            return Err(DatasetError::BadPatchDims { width, height });
        }
        if data.len() != 3 * width * height {
            return Err(DatasetError::InvalidConfig(format!("{} values for a 3x{height}x{width} tensor", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_planes(planes: &CoeffPlanes) -> Self {
        let (bw, bh) = (planes.y.blocks_w, planes.y.blocks_h);
        let (w, h) = (bw * 8, bh * 8);
        let mut data = vec![0i16; 3 * w * h];
        for (c, plane) in planes.channels().into_iter().enumerate() {
            let dst = &mut data[c * w * h..(c + 1) * w * h];
            for (i, block) in plane.blocks.iter().enumerate() {
                let (bx, by) = (i % bw, i / bw);
                for u in 0..8 {
                    let row = (by * 8 + u) * w + bx * 8;
                    dst[row..row + 8].copy_from_slice(&block.0[u * 8..u * 8 + 8]);
                }
            }
        }
        Self { width: w, height: h, data }
    }

    pub fn to_planes(&self) -> CoeffPlanes {
        let (bw, bh) = (self.width / 8, self.height / 8);
        let plane = |c: usize| {
            let src = self.channel(c);
            let blocks = (0..bw * bh)
                .map(|i| {
                    let (bx, by) = (i % bw, i / bw);
                    let mut b = [0i16; 64];
                    for u in 0..8 {
                        let row = (by * 8 + u) * self.width + bx * 8;
                        b[u * 8..u * 8 + 8].copy_from_slice(&src[row..row + 8]);
                    }
                    QuantizedBlock(b)
                })
                .collect();
            CoeffPlane { blocks_w: bw, blocks_h: bh, blocks }
        };
        CoeffPlanes { y: plane(0), cb: plane(1), cr: plane(2) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[i16] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> i16 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Non-overlapping `size`×`size` tiles in row-major order; partial tiles at
/// the right and bottom edges are dropped.
pub fn extract_patches(frame: &RgbImage, size: usize) -> Result<Vec<RgbImage>, DatasetError> {
    Ok(tile_origins(frame, size)?.into_iter().map(|(x, y)| frame.crop(x, y, size, size)).collect())
}

fn tile_origins(frame: &RgbImage, size: usize) -> Result<Vec<(usize, usize)>, DatasetError> {
    if size == 0 || frame.width() < size || frame.height() < size {
        return Err(DatasetError::FrameTooSmall { width: frame.width(), height: frame.height(), size });
    }
    let mut out = Vec::new();
    for ty in 0..frame.height() / size {
        for tx in 0..frame.width() / size {
            out.push((tx * size, ty * size));
        }
    }
    Ok(out)
}

/// Encodes a patch at `qf` and lays the quantized coefficients out spatially.
pub fn patch_to_coeff_tensor(patch: &RgbImage, qf: QualityFactor) -> Result<CoeffTensor, DatasetError> {
    if patch.width() % 8 != 0 || patch.height() % 8 != 0 {
        return Err(DatasetError::BadPatchDims { width: patch.width(), height: patch.height() });
    }
    Ok(CoeffTensor::from_planes(&encode_planes(patch, qf)?))
}

/// Serializes a sample: `"DCTS"`, version u8, width u16, height u16,
/// channels u8 (3), qf u8, then i16 coefficients, all little-endian.
pub fn encode_sample(tensor: &CoeffTensor, qf: QualityFactor) -> Vec<u8> {
    let mut out = Vec::with_capacity(11 + tensor.data.len() * 2);
    out.extend_from_slice(SAMPLE_MAGIC);
    out.push(SAMPLE_VERSION);
    out.extend_from_slice(&(tensor.width as u16).to_le_bytes());
    out.extend_from_slice(&(tensor.height as u16).to_le_bytes());
    out.push(3);
    out.push(qf.get());
    for v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_sample(bytes: &[u8], path: &Path) -> Result<(CoeffTensor, QualityFactor), DatasetError> {
    let bad = |reason: &str| DatasetError::BadSample { path: path.to_path_buf(), reason: reason.to_string() };
    if bytes.len() < 11 || &bytes[..4] != SAMPLE_MAGIC {
        return Err(bad("bad magic"));
    }
    if bytes[4] != SAMPLE_VERSION {
        return Err(bad("unsupported version"));
    }
    let w = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    let h = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
    if bytes[9] != 3 {
        return Err(bad("channel count must be 3"));
    }
    let qf = QualityFactor::new(bytes[10] as u32).map_err(|_| bad("quality factor out of range"))?;
    let body = &bytes[11..];
    if body.len() != 3 * w * h * 2 {
        return Err(bad("payload length does not match dimensions"));
    }
    let data: Vec<i16> = body.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
    if data.iter().any(|v| v.abs() > MAX_COEFF) {
        return Err(bad("coefficient out of range"));
    }
    Ok((CoeffTensor::new(w, h, data).map_err(|_| bad("dimensions are not multiples of 8"))?, qf))
}

pub fn write_sample(path: &Path, tensor: &CoeffTensor, qf: QualityFactor) -> Result<(), DatasetError> {
    fs::write(path, encode_sample(tensor, qf)).map_err(io_err(path))
}

pub fn read_sample(path: &Path) -> Result<(CoeffTensor, QualityFactor), DatasetError> {
    decode_sample(&fs::read(path).map_err(io_err(path))?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        [Split::Train, Split::Valid, Split::Test].into_iter().find(|x| x.name() == s)
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-channel mean and standard deviation of coefficient values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { mean: [0.0; 3], std: [1.0; 3] };
}

/// Per-channel sums of one or more tensors. Merging per-tensor sums in a
/// fixed order keeps the statistics independent of how tensors were loaded.
#[derive(Debug, Clone, Copy, Default)]
struct StatSums {
    sum: [f64; 3],
    sq: [f64; 3],
    n: usize,
}

impl StatSums {
    fn of(t: &CoeffTensor) -> Self {
        let mut s = Self::default();
        for c in 0..3 {
            for &v in t.channel(c) {
                let v = v as f64;
                s.sum[c] += v;
                s.sq[c] += v * v;
            }
        }
        s.n = t.width * t.height;
        s
    }

    fn merge(&mut self, o: &StatSums) {
        for c in 0..3 {
            self.sum[c] += o.sum[c];
            self.sq[c] += o.sq[c];
        }
        self.n += o.n;
    }

    fn finish(&self) -> Result<NormStats, DatasetError> {
        if self.n == 0 {
            return Err(DatasetError::EmptySplit(Split::Train));
        }
        let mut stats = NormStats { mean: [0.0; 3], std: [0.0; 3] };
        for c in 0..3 {
            let mean = self.sum[c] / self.n as f64;
            stats.mean[c] = mean;
            stats.std[c] = (self.sq[c] / self.n as f64 - mean * mean).max(0.0).sqrt().max(STD_FLOOR);
        }
        Ok(stats)
    }
}

/// Statistics over every value of every tensor, per channel.
pub fn compute_norm_stats<'a>(tensors: impl IntoIterator<Item = &'a CoeffTensor>) -> Result<NormStats, DatasetError> {
    let mut total = StatSums::default();
    for t in tensors {
        total.merge(&StatSums::of(t));
    }
    total.finish()
}

/// `(x − mean) / std` per channel, as 32-bit reals in CHW order.
pub fn normalize(tensor: &CoeffTensor, stats: &NormStats) -> Vec<f32> {
    let n = tensor.width * tensor.height;
    let mut out = Vec::with_capacity(3 * n);
    for c in 0..3 {
        let (m, s) = (stats.mean[c], stats.std[c]);
        out.extend(tensor.channel(c).iter().map(|&v| ((v as f64 - m) / s) as f32));
    }
    out
}

/// Stacks normalized tensors of equal size into a batch.
pub fn normalize_batch(tensors: &[&CoeffTensor], stats: &NormStats) -> Result<Tensor4<f32>, DatasetError> {
    let first = tensors.first().ok_or(DatasetError::EmptySplit(Split::Train))?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(tensors.len() * 3 * w * h);
    for t in tensors {
        if (t.width, t.height) != (w, h) {
            return Err(DatasetError::InvalidConfig("batch tensors differ in size".into()));
        }
        data.extend(normalize(t, stats));
    }
    Tensor4::from_vec([tensors.len(), 3, h, w], data).map_err(|e| DatasetError::InvalidConfig(e.to_string()))
}

/// Inverse of [`normalize`] for one CHW item.
pub fn denormalize(values: &[f32], stats: &NormStats) -> Vec<f64> {
    let n = values.len() / 3;
    values.iter().enumerate().map(|(i, &v)| v as f64 * stats.std[i / n] + stats.mean[i / n]).collect()
}

/// Rounds real-valued coefficients (CHW, as from [`denormalize`]) to the
/// nearest representable quantized coefficient.
pub fn quantize_prediction(values: &[f64], width: usize, height: usize) -> Result<CoeffTensor, DatasetError> {
    let lim = MAX_COEFF as f64;
    let data = values.iter().map(|v| if v.is_nan() { 0 } else { v.round().clamp(-lim, lim) as i16 }).collect();
    CoeffTensor::new(width, height, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub qfs: Vec<u8>,
    pub seed: u64,
    pub patch_size: usize,
    pub train_fraction: f64,
    /// Sources whose patches all go to the test split.
    pub test_sources: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            qfs: DEFAULT_QFS.to_vec(),
            seed: 0,
            patch_size: DEFAULT_PATCH_SIZE,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            test_sources: Vec::new(),
        }
    }
}

/// One patch of the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleEntry {
    pub id: usize,
    pub split: Split,
    pub source: String,
    /// Frame path relative to the frames directory.
    pub frame: String,
    pub tile_x: usize,
    pub tile_y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub config: DatasetConfig,
    pub frames_dir: PathBuf,
    /// Normalization statistics of the train split, per stored quality
    /// factor.
    pub stats: BTreeMap<u8, NormStats>,
    pub samples: Vec<SampleEntry>,
}

pub fn sample_file_name(id: usize, qf: u8) -> String {
    format!("{id:06}_qf{qf}.dcts")
}

fn join(v: &[impl ToString]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn has_qf(&self, qf: u8) -> bool {
        self.config.qfs.contains(&qf)
    }

    pub fn stats_for(&self, qf: u8) -> Result<NormStats, DatasetError> {
        self.stats.get(&qf).copied().ok_or(DatasetError::MissingStats(qf))
    }

    pub fn sample_path(&self, dataset_dir: &Path, id: usize, qf: u8) -> PathBuf {
        dataset_dir.join(SAMPLES_DIR).join(sample_file_name(id, qf))
    }

    pub fn load_tensor(&self, dataset_dir: &Path, id: usize, qf: u8) -> Result<CoeffTensor, DatasetError> {
        if !self.has_qf(qf) {
            return Err(DatasetError::MissingQf(qf));
        }
        let path = self.sample_path(dataset_dir, id, qf);
        let (t, stored) = read_sample(&path)?;
        if stored.get() != qf {
            return Err(DatasetError::BadSample { path, reason: format!("stores qf {stored}, expected {qf}") });
        }
        Ok(t)
    }

    /// Re-reads the source patch of a sample from the frames directory.
    pub fn load_patch(&self, entry: &SampleEntry) -> Result<RgbImage, DatasetError> {
        let frame = read_ppm(self.frames_dir.join(&entry.frame))?;
        let s = self.config.patch_size;
        if entry.tile_x + s > frame.width() || entry.tile_y + s > frame.height() {
            return Err(DatasetError::FrameTooSmall { width: frame.width(), height: frame.height(), size: s });
        }
        Ok(frame.crop(entry.tile_x, entry.tile_y, s, s))
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_HEADER}");
        let _ = writeln!(s, "seed = {}", c.seed);
        let _ = writeln!(s, "patch_size = {}", c.patch_size);
        let _ = writeln!(s, "qfs = {}", join(&c.qfs));
        let _ = writeln!(s, "train_fraction = {:?}", c.train_fraction);
        let _ = writeln!(s, "test_sources = {}", c.test_sources.join(","));
        let _ = writeln!(s, "frames_dir = {}", self.frames_dir.display());
        for (q, st) in &self.stats {
            let _ = writeln!(s, "norm_mean_qf{q} = {:?},{:?},{:?}", st.mean[0], st.mean[1], st.mean[2]);
            let _ = writeln!(s, "norm_std_qf{q} = {:?},{:?},{:?}", st.std[0], st.std[1], st.std[2]);
        }
        let _ = writeln!(s, "samples = {}", self.samples.len());
        let _ = writeln!(s, "id\tsplit\tsource\ttile_x\ttile_y\tframe");
        for e in &self.samples {
            let _ = writeln!(s, "{:06}\t{}\t{}\t{}\t{}\t{}", e.id, e.split, e.source, e.tile_x, e.tile_y, e.frame);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let bad = |m: String| DatasetError::BadManifest(m);
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(bad("missing header line".into()));
        }
        let mut kv = std::collections::HashMap::new();
        for line in lines.by_ref() {
            if line.starts_with("id\t") {
                break;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("bad line {line:?}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| kv.get(k).cloned().ok_or_else(|| bad(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64, DatasetError> { get(k)?.parse().map_err(|_| bad(format!("bad number for {k}"))) };
        let triple = |k: &str| -> Result<[f64; 3], DatasetError> {
            let v: Vec<f64> = get(k)?.split(',').map(|x| x.parse()).collect::<Result<_, _>>().map_err(|_| bad(format!("bad {k}")))?;
            v.try_into().map_err(|_| bad(format!("{k} needs three values")))
        };
        let qfs: Vec<u8> = get("qfs")?.split(',').map(|x| x.parse()).collect::<Result<_, _>>().map_err(|_| bad("bad qfs".into()))?;
        let test_sources = get("test_sources")?;
        let config = DatasetConfig {
            qfs,
            seed: get("seed")?.parse().map_err(|_| bad("bad seed".into()))?,
            patch_size: num("patch_size")? as usize,
            train_fraction: num("train_fraction")?,
            test_sources: if test_sources.is_empty() { vec![] } else { test_sources.split(',').map(String::from).collect() },
        };
        let stats = config
            .qfs
            .iter()
            .map(|&q| Ok((q, NormStats { mean: triple(&format!("norm_mean_qf{q}"))?, std: triple(&format!("norm_std_qf{q}"))? })))
            .collect::<Result<_, DatasetError>>()?;
        let count = num("samples")? as usize;
        let mut samples = Vec::with_capacity(count);
        for line in lines {
            let f: Vec<&str> = line.splitn(6, '\t').collect();
            if f.len() != 6 {
                return Err(bad(format!("bad sample row {line:?}")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number in {line:?}")));
            samples.push(SampleEntry {
                id: p(f[0])?,
                split: Split::parse(f[1]).ok_or_else(|| bad(format!("bad split {:?}", f[1])))?,
                source: f[2].to_string(),
                tile_x: p(f[3])?,
                tile_y: p(f[4])?,
                frame: f[5].to_string(),
            });
        }
        if samples.len() != count {
            return Err(bad(format!("{} sample rows, header says {count}", samples.len())));
        }
        Ok(Self { config, frames_dir: PathBuf::from(get("frames_dir")?), stats, samples })
    }

    pub fn read(dataset_dir: &Path) -> Result<Self, DatasetError> {
        let path = dataset_dir.join(MANIFEST_FILE);
        Self::parse(&fs::read_to_string(&path).map_err(io_err(&path))?)
    }

    pub fn write(&self, dataset_dir: &Path) -> Result<(), DatasetError> {
        let path = dataset_dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(io_err(&path))
    }
}

fn is_ppm(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err(dir))?;
    v.sort();
    Ok(v)
}

/// `(source, frame path relative to frames_dir)` for every frame, ordered by
/// path.
pub fn discover_frames(frames_dir: &Path) -> Result<Vec<(String, String)>, DatasetError> {
    let mut frames = Vec::new();
    let rel = |p: &Path| p.strip_prefix(frames_dir).expect("listed under frames_dir").to_string_lossy().replace('\\', "/");
    for p in sorted_entries(frames_dir)? {
        if is_ppm(&p) {
            frames.push((".".to_string(), rel(&p)));
        } else if p.is_dir() {
            let source = p.file_name().expect("directory has a name").to_string_lossy().to_string();
            for f in sorted_entries(&p)? {
                if is_ppm(&f) {
                    frames.push((source.clone(), rel(&f)));
                }
            }
        }
    }
    if frames.is_empty() {
        return Err(DatasetError::NoFrames(frames_dir.to_path_buf()));
    }
    Ok(frames)
}

fn validate(cfg: &DatasetConfig) -> Result<Vec<QualityFactor>, DatasetError> {
    if cfg.qfs.is_empty() {
        return Err(DatasetError::InvalidConfig("no quality factors".into()));
    }
    let qfs = cfg.qfs.iter().map(|&q| QualityFactor::new(q as u32)).collect::<Result<Vec<_>, _>>()?;
    let mut seen = cfg.qfs.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != cfg.qfs.len() {
        return Err(DatasetError::InvalidConfig(format!("repeated quality factor in {:?}", cfg.qfs)));
    }
    if cfg.patch_size == 0 || cfg.patch_size % 8 != 0 || cfg.patch_size > u16::MAX as usize {
        return Err(DatasetError::InvalidConfig(format!("patch size {} must be a positive multiple of 8", cfg.patch_size)));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(DatasetError::InvalidConfig(format!("train fraction {} must be in (0, 1]", cfg.train_fraction)));
    }
    Ok(qfs)
}

/// Seeded train/valid assignment: a shuffled `round(fraction·n)` go to train
/// and the rest to valid, keeping at least one validation patch when there
/// are two or more.
fn assign_splits(n: usize, fraction: f64, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_train = (fraction * n as f64).round() as usize;
    if n >= 2 && n_train == n && fraction < 1.0 {
        n_train = n - 1;
    }
    let mut splits = vec![Split::Valid; n];
    for &i in &order[..n_train] {
        splits[i] = Split::Train;
    }
    splits
}

/// Tiles every frame, encodes each patch at every quality factor, writes the
/// sample files and the manifest. The output is a pure function of the
/// frames and the configuration.
pub fn build_dataset(frames_dir: &Path, out_dir: &Path, cfg: &DatasetConfig) -> Result<DatasetManifest, DatasetError> {
    let qfs = validate(cfg)?;
    let frames = discover_frames(frames_dir)?;
    for s in &cfg.test_sources {
        if !frames.iter().any(|(src, _)| src == s) {
            return Err(DatasetError::InvalidConfig(format!("test source {s:?} not found")));
        }
    }
    let samples_dir = out_dir.join(SAMPLES_DIR);
    fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;

    // patches per frame, in frame order
    let tiles: Vec<Vec<(usize, usize)>> = frames
        .par_iter()
        .map(|(_, f)| {
            let img = read_ppm(frames_dir.join(f))?;
            tile_origins(&img, cfg.patch_size)
        })
        .collect::<Result<_, _>>()?;

    let mut samples = Vec::new();
    for ((source, frame), origins) in frames.iter().zip(&tiles) {
        for &(x, y) in origins {
            let split = if cfg.test_sources.contains(source) { Split::Test } else { Split::Train };
            samples.push(SampleEntry { id: samples.len(), split, source: source.clone(), frame: frame.clone(), tile_x: x, tile_y: y });
        }
    }
    let pool: Vec<usize> = samples.iter().filter(|s| s.split != Split::Test).map(|s| s.id).collect();
    for (&id, split) in pool.iter().zip(assign_splits(pool.len(), cfg.train_fraction, cfg.seed)) {
        samples[id].split = split;
    }

    // encode frame by frame so each frame is decoded once
    // per train patch of each frame: sums at every qf, in cfg.qfs order
    let per_frame: Vec<Vec<Vec<StatSums>>> = frames
        .par_iter()
        .map(|(_, f)| -> Result<Vec<Vec<StatSums>>, DatasetError> {
            let img = read_ppm(frames_dir.join(f))?;
            let mut sums = Vec::new();
            for s in samples.iter().filter(|s| &s.frame == f) {
                let patch = img.crop(s.tile_x, s.tile_y, cfg.patch_size, cfg.patch_size);
                let mut per_qf = Vec::with_capacity(qfs.len());
                for &qf in &qfs {
                    let t = patch_to_coeff_tensor(&patch, qf)?;
                    write_sample(&samples_dir.join(sample_file_name(s.id, qf.get())), &t, qf)?;
                    per_qf.push(StatSums::of(&t));
                }
                if s.split == Split::Train {
                    sums.push(per_qf);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_, _>>()?;
    let train: Vec<Vec<StatSums>> = per_frame.into_iter().flatten().collect();
    if train.is_empty() {
        return Err(DatasetError::EmptySplit(Split::Train));
    }
    let mut stats = BTreeMap::new();
    for (i, &q) in cfg.qfs.iter().enumerate() {
        let mut total = StatSums::default();
        for patch in &train {
            total.merge(&patch[i]);
        }
        stats.insert(q, total.finish()?);
    }
    let manifest = DatasetManifest { config: cfg.clone(), frames_dir: frames_dir.to_path_buf(), stats, samples };
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Recomputes normalization statistics from the stored `qf` tensors of one
/// split.
pub fn compute_split_stats(manifest: &DatasetManifest, dataset_dir: &Path, split: Split, qf: u8) -> Result<NormStats, DatasetError> {
    let tensors = manifest
        .split(split)
        .map(|e| manifest.load_tensor(dataset_dir, e.id, qf))
        .collect::<Result<Vec<_>, _>>()?;
    if tensors.is_empty() {
        return Err(DatasetError::EmptySplit(split));
    }
    compute_norm_stats(&tensors)
}
