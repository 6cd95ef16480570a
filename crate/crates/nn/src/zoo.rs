//! Restoration architectures as layer graphs. Every model maps 3 coefficient
//! channels to 3 and preserves spatial size.

use std::fmt;
use std::str::FromStr;

use crate::error::NnError;
use crate::graph::{GraphBuilder, ModelGraph, NodeId};

pub const IO_CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arch {
    DnCnn,
    DeeperSrcnn,
    ResNet,
    UNet,
    ResUNet,
    ArCnn,
    FastArCnn,
}

impl Arch {
    pub const ALL: [Arch; 7] =
        [Arch::DnCnn, Arch::DeeperSrcnn, Arch::ResNet, Arch::UNet, Arch::ResUNet, Arch::ArCnn, Arch::FastArCnn];

    pub fn name(self) -> &'static str {
        match self {
            Arch::DnCnn => "dncnn",
            Arch::DeeperSrcnn => "deeper-srcnn",
            Arch::ResNet => "resnet",
            Arch::UNet => "unet",
            Arch::ResUNet => "res-unet",
            Arch::ArCnn => "arcnn",
            Arch::FastArCnn => "fast-arcnn",
        }
    }

    /// Display label for reports.
    pub fn label(self) -> &'static str {
        match self {
            Arch::DnCnn => "DnCNN",
            Arch::DeeperSrcnn => "Deeper SRCNN",
            Arch::ResNet => "ResNet",
            Arch::UNet => "U-Net",
            Arch::ResUNet => "Res-UNet",
            Arch::ArCnn => "AR-CNN",
            Arch::FastArCnn => "Fast AR-CNN",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == norm || a.name().replace('-', "") == norm)
            .ok_or_else(|| NnError::UnknownArchitecture(s.to_string()))
    }
}

/// Architecture plus size knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchConfig {
    pub arch: Arch,
    /// Scales every hidden width; 1.0 gives the full-size network.
    pub width_mult: f64,
    /// Residual block count for [`Arch::ResNet`].
    pub resnet_blocks: usize,
}

impl ArchConfig {
    pub fn new(arch: Arch) -> Self {
        Self { arch, width_mult: 1.0, resnet_blocks: 8 }
    }

    pub fn with_width_mult(mut self, m: f64) -> Self {
        self.width_mult = m;
        self
    }

    pub fn descriptor(&self) -> String {
        let mut s = format!("arch={} width_mult={} in_channels={IO_CHANNELS}", self.arch, self.width_mult);
        if self.arch == Arch::ResNet {
            s.push_str(&format!(" blocks={}", self.resnet_blocks));
        }
        s
    }

    fn width(&self, base: usize) -> usize {
        ((base as f64 * self.width_mult).round() as usize).max(1)
    }

    pub fn build(&self) -> Result<ModelGraph, NnError> {
        if !(self.width_mult.is_finite() && self.width_mult > 0.0) {
            return Err(NnError::InvalidSpec(format!("width multiplier {} must be positive", self.width_mult)));
        }
        match self.arch {
            Arch::DnCnn => build_dncnn(self),
            Arch::DeeperSrcnn => build_deeper_srcnn(self),
            Arch::ResNet => build_resnet(self),
            Arch::UNet => build_unet(self, false),
            Arch::ResUNet => build_unet(self, true),
            Arch::ArCnn => build_arcnn(self, false),
            Arch::FastArCnn => build_arcnn(self, true),
        }
    }
}

/// conv64+ReLU, 18 × (conv64+BN+ReLU), conv3; output = input − residual.
pub fn build_dncnn(cfg: &ArchConfig) -> Result<ModelGraph, NnError> {
    let w = cfg.width(64);
    let mut g = GraphBuilder::new(IO_CHANNELS);
    let c = g.conv("conv1", g.input(), w, 3);
    let mut x = g.relu("relu1", c);
    for i in 2..=19 {
        let c = g.conv(format!("conv{i}"), x, w, 3);
        let b = g.batchnorm(format!("bn{i}"), c);
        x = g.relu(format!("relu{i}"), b);
    }
    let r = g.conv("conv20", x, IO_CHANNELS, 3);
    let r = g.linear("residual", r);
    g.subtract("output", 0, r);
    g.finish(cfg.descriptor(), 1)
}

/// Stem conv, a plain block of three convs, five three-conv blocks with a
/// local residual add each, and a linear conv3; output = input + residual.
/// All kernels 5×5, hidden width 32.
pub fn build_deeper_srcnn(cfg: &ArchConfig) -> Result<ModelGraph, NnError> {
    let w = cfg.width(32);
    let mut g = GraphBuilder::new(IO_CHANNELS);
    let mut n = 0;
    let mut conv_relu = |g: &mut GraphBuilder, x: NodeId, relu: bool| {
        n += 1;
        let c = g.conv(format!("conv{n}"), x, w, 5);
        if relu { g.relu(format!("relu{n}"), c) } else { c }
    };
    let mut x = conv_relu(&mut g, 0, true);
    for _ in 0..3 {
        x = conv_relu(&mut g, x, true);
    }
    for b in 1..=5 {
        let skip = x;
        let mut y = conv_relu(&mut g, x, true);
        y = conv_relu(&mut g, y, true);
        y = conv_relu(&mut g, y, false);
        let s = g.add(format!("block{b}_add"), skip, y);
        x = g.relu(format!("block{b}_relu"), s);
    }
    let r = g.conv("conv20", x, IO_CHANNELS, 5);
    let r = g.linear("residual", r);
    g.add("output", 0, r);
    g.finish(cfg.descriptor(), 1)
}

/// Stem conv+ReLU, residual blocks `ReLU(x + BN(conv(ReLU(BN(conv(x))))))`,
/// head conv3; output = input + head.
pub fn build_resnet(cfg: &ArchConfig) -> Result<ModelGraph, NnError> {
    if cfg.resnet_blocks == 0 {
        return Err(NnError::InvalidSpec("resnet needs at least one block".into()));
    }
    let w = cfg.width(64);
    let mut g = GraphBuilder::new(IO_CHANNELS);
    let c = g.conv("stem", 0, w, 3);
    let mut x = g.relu("stem_relu", c);
    for b in 1..=cfg.resnet_blocks {
        let c1 = g.conv(format!("block{b}_conv1"), x, w, 3);
        let b1 = g.batchnorm(format!("block{b}_bn1"), c1);
        let r1 = g.relu(format!("block{b}_relu1"), b1);
        let c2 = g.conv(format!("block{b}_conv2"), r1, w, 3);
        let b2 = g.batchnorm(format!("block{b}_bn2"), c2);
        let s = g.add(format!("block{b}_add"), x, b2);
        x = g.relu(format!("block{b}_relu2"), s);
    }
    let r = g.conv("head", x, IO_CHANNELS, 3);
    let r = g.linear("residual", r);
    g.add("output", 0, r);
    g.finish(cfg.descriptor(), 1)
}

/// Smallest spatial size the U-Nets accept.
pub const UNET_MIN_INPUT: usize = 32;

/// Encoder convs 1–5 (conv+BN+ReLU, each followed by a 3×3 stride-2 max
/// pool), bottleneck conv 6, decoder convs 7–11 each preceded by a 3×3
/// stride-2 transpose conv sized to the matching encoder output and a
/// channel concat with it, then a 1×1 projection to 3 channels. Widths are
/// `32·2^i` capped at 256, mirrored in the decoder.
pub fn build_unet(cfg: &ArchConfig, residual: bool) -> Result<ModelGraph, NnError> {
    let cap = cfg.width(256);
    let widths: Vec<usize> = (0..6).map(|i| cfg.width(32 << i).min(cap)).collect();
    let mut g = GraphBuilder::new(IO_CHANNELS);
    let conv_bn_relu = |g: &mut GraphBuilder, i: usize, x: NodeId, w: usize| {
        let c = g.conv(format!("conv{i}"), x, w, 3);
        let b = g.batchnorm(format!("bn{i}"), c);
        g.relu(format!("relu{i}"), b)
    };
    let mut skips = Vec::new();
    let mut x = 0;
    for i in 1..=5 {
        let e = conv_bn_relu(&mut g, i, x, widths[i - 1]);
        skips.push(e);
        x = g.maxpool(format!("pool{i}"), e, 3, 2);
    }
    x = conv_bn_relu(&mut g, 6, x, widths[5]);
    for i in 7..=11 {
        let skip = skips[11 - i];
        let w = g.channels(skip);
        let up = g.transpose_conv(format!("up{i}"), x, skip, w, 3, 2);
        let cat = g.concat(format!("cat{i}"), &[up, skip]);
        x = conv_bn_relu(&mut g, i, cat, w);
    }
    let p = g.conv("projection", x, IO_CHANNELS, 1);
    if residual {
        let r = g.linear("residual", p);
        g.add("output", 0, r);
    } else {
        g.linear("output", p);
    }
    g.finish(cfg.descriptor(), UNET_MIN_INPUT)
}

/// AR-CNN: conv64 9×9, conv32 7×7, conv16 1×1, conv3 5×5 (ReLU between,
/// linear output, no residual). The fast variant inserts a 1×1 conv32
/// shrinking layer after the first conv.
pub fn build_arcnn(cfg: &ArchConfig, fast: bool) -> Result<ModelGraph, NnError> {
    let mut g = GraphBuilder::new(IO_CHANNELS);
    let mut specs = vec![(64, 9)];
    if fast {
        specs.push((32, 1));
    }
    specs.extend([(32, 7), (16, 1)]);
    let mut x = 0;
    for (i, (w, k)) in specs.into_iter().enumerate() {
        let c = g.conv(format!("conv{}", i + 1), x, cfg.width(w), k);
        x = g.relu(format!("relu{}", i + 1), c);
    }
    let n = if fast { 5 } else { 4 };
    let c = g.conv(format!("conv{n}"), x, IO_CHANNELS, 5);
    g.linear("output", c);
    g.finish(cfg.descriptor(), 1)
}
