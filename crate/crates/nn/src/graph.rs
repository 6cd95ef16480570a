//! Layer graphs: an ordered list of layers where every input reference
//! points at an earlier layer.

use crate::error::NnError;
use crate::ops::{conv_output_size, pool_output_size, Padding};
use crate::tensor::Shape4;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Input,
    Conv { filters: usize, kernel: usize, stride: usize, padding: Padding },
    BatchNorm,
    Relu,
    Linear,
    MaxPool { kernel: usize, stride: usize },
    /// Inputs are `[x, size_ref]`; the output takes the spatial size of
    /// `size_ref`.
    TransposeConv { filters: usize, kernel: usize, stride: usize },
    Concat,
    Add,
    /// `inputs[0] - inputs[1]`.
    Subtract,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv { .. } => "conv",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::Linear => "linear_activation",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::TransposeConv { .. } => "transpose_conv",
            LayerKind::Concat => "concat",
            LayerKind::Add => "add",
            LayerKind::Subtract => "subtract",
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerKind::Conv { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<NodeId>,
}

/// Which tensors a layer owns; see [`ModelGraph::param_shapes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamLayout {
    None,
    /// weight `(out, in, k, k)` (or `(in, out, k, k)` for transpose conv) and a bias per output channel.
    Conv { weight: Shape4, bias: usize },
    BatchNorm { channels: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    layers: Vec<LayerSpec>,
    channels: Vec<usize>,
    descriptor: String,
    min_input: usize,
}

impl ModelGraph {
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Text naming the architecture and its hyperparameters; stored in
    /// weights files and checked on load.
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn min_input(&self) -> usize {
        self.min_input
    }

    pub fn input_channels(&self) -> usize {
        self.channels[0]
    }

    pub fn output_channels(&self) -> usize {
        *self.channels.last().expect("graph has layers")
    }

    pub fn output(&self) -> NodeId {
        self.layers.len() - 1
    }

    pub fn channels_of(&self, id: NodeId) -> usize {
        self.channels[id]
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|l| l.kind.is_conv()).count()
    }

    pub fn param_layout(&self, id: NodeId) -> ParamLayout {
        let l = &self.layers[id];
        match l.kind {
            LayerKind::Conv { filters, kernel, .. } => {
                ParamLayout::Conv { weight: [filters, self.channels[l.inputs[0]], kernel, kernel], bias: filters }
            }
            LayerKind::TransposeConv { filters, kernel, .. } => {
                ParamLayout::Conv { weight: [self.channels[l.inputs[0]], filters, kernel, kernel], bias: filters }
            }
            LayerKind::BatchNorm => ParamLayout::BatchNorm { channels: self.channels[id] },
            _ => ParamLayout::None,
        }
    }

    /// Trainable parameter count: convolution weights and biases plus
    /// batchnorm scale and shift. Running statistics are not counted.
    pub fn param_count(&self) -> usize {
        (0..self.layers.len())
            .map(|i| match self.param_layout(i) {
                ParamLayout::None => 0,
                ParamLayout::Conv { weight, bias } => weight.iter().product::<usize>() + bias,
                ParamLayout::BatchNorm { channels } => 2 * channels,
            })
            .sum()
    }

    /// Output shape of every layer for a given input shape.
    pub fn infer_shapes(&self, input: Shape4) -> Result<Vec<Shape4>, NnError> {
        if input[1] != self.input_channels() {
            return Err(NnError::Shape(format!("model expects {} channels, got {}", self.input_channels(), input[1])));
        }
        if input[2] < self.min_input || input[3] < self.min_input {
            return Err(NnError::InputTooSmall { height: input[2], width: input[3], min: self.min_input });
        }
        let mut shapes: Vec<Shape4> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let ins: Vec<Shape4> = l.inputs.iter().map(|&i| shapes[i]).collect();
            let shape = match &l.kind {
                LayerKind::Input => input,
                LayerKind::Conv { filters, kernel, stride, padding } => {
                    let [n, _, h, w] = ins[0];
                    let (oh, _) = conv_output_size(h, *kernel, *stride, *padding)
                        .ok_or_else(|| NnError::Shape(format!("{}: height {h} below kernel", l.name)))?;
                    let (ow, _) = conv_output_size(w, *kernel, *stride, *padding)
                        .ok_or_else(|| NnError::Shape(format!("{}: width {w} below kernel", l.name)))?;
                    [n, *filters, oh, ow]
                }
                LayerKind::BatchNorm | LayerKind::Relu | LayerKind::Linear => ins[0],
                LayerKind::MaxPool { kernel, stride } => {
                    let [n, c, h, w] = ins[0];
                    [n, c, pool_output_size(h, *kernel, *stride).0, pool_output_size(w, *kernel, *stride).0]
                }
                LayerKind::TransposeConv { filters, .. } => [ins[0][0], *filters, ins[1][2], ins[1][3]],
                LayerKind::Concat => {
                    let [n, _, h, w] = ins[0];
                    if ins.iter().any(|s| s[0] != n || s[2] != h || s[3] != w) {
                        return Err(NnError::Shape(format!("{}: cannot concat {ins:?}", l.name)));
                    }
                    [n, ins.iter().map(|s| s[1]).sum(), h, w]
                }
                LayerKind::Add | LayerKind::Subtract => {
                    if ins[0] != ins[1] {
                        return Err(NnError::Shape(format!("{}: {:?} vs {:?}", l.name, ins[0], ins[1])));
                    }
                    ins[0]
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }
}

/// Incremental graph construction with channel bookkeeping.
#[derive(Debug)]
pub struct GraphBuilder {
    layers: Vec<LayerSpec>,
    channels: Vec<usize>,
}

impl GraphBuilder {
    pub fn new(input_channels: usize) -> Self {
        Self {
            layers: vec![LayerSpec { name: "input".into(), kind: LayerKind::Input, inputs: vec![] }],
            channels: vec![input_channels],
        }
    }

    pub fn input(&self) -> NodeId {
        0
    }

    pub fn channels(&self, id: NodeId) -> usize {
        self.channels[id]
    }

    fn push(&mut self, name: impl Into<String>, kind: LayerKind, inputs: Vec<NodeId>, channels: usize) -> NodeId {
        self.layers.push(LayerSpec { name: name.into(), kind, inputs });
        self.channels.push(channels);
        self.layers.len() - 1
    }

    /// Stride-1 same-padded convolution.
    pub fn conv(&mut self, name: impl Into<String>, x: NodeId, filters: usize, kernel: usize) -> NodeId {
        self.conv_with(name, x, filters, kernel, 1, Padding::Same)
    }

    pub fn conv_with(
        &mut self,
        name: impl Into<String>,
        x: NodeId,
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> NodeId {
        self.push(name, LayerKind::Conv { filters, kernel, stride, padding }, vec![x], filters)
    }

    pub fn batchnorm(&mut self, name: impl Into<String>, x: NodeId) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::BatchNorm, vec![x], c)
    }

    pub fn relu(&mut self, name: impl Into<String>, x: NodeId) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::Relu, vec![x], c)
    }

    pub fn linear(&mut self, name: impl Into<String>, x: NodeId) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::Linear, vec![x], c)
    }

    pub fn maxpool(&mut self, name: impl Into<String>, x: NodeId, kernel: usize, stride: usize) -> NodeId {
        let c = self.channels[x];
        self.push(name, LayerKind::MaxPool { kernel, stride }, vec![x], c)
    }

    pub fn transpose_conv(
        &mut self,
        name: impl Into<String>,
        x: NodeId,
        size_ref: NodeId,
        filters: usize,
        kernel: usize,
        stride: usize,
    ) -> NodeId {
        self.push(name, LayerKind::TransposeConv { filters, kernel, stride }, vec![x, size_ref], filters)
    }

    pub fn concat(&mut self, name: impl Into<String>, parts: &[NodeId]) -> NodeId {
        let c = parts.iter().map(|&p| self.channels[p]).sum();
        self.push(name, LayerKind::Concat, parts.to_vec(), c)
    }

    pub fn add(&mut self, name: impl Into<String>, a: NodeId, b: NodeId) -> NodeId {
        let c = self.channels[a];
        self.push(name, LayerKind::Add, vec![a, b], c)
    }

    pub fn subtract(&mut self, name: impl Into<String>, a: NodeId, b: NodeId) -> NodeId {
        let c = self.channels[a];
        self.push(name, LayerKind::Subtract, vec![a, b], c)
    }

    /// Validates hyperparameters and references and freezes the graph.
    pub fn finish(self, descriptor: impl Into<String>, min_input: usize) -> Result<ModelGraph, NnError> {
        let mut names = std::collections::HashSet::new();
        for (i, l) in self.layers.iter().enumerate() {
            if !names.insert(l.name.as_str()) {
                return Err(NnError::InvalidSpec(format!("duplicate layer name {:?}", l.name)));
            }
            if l.inputs.iter().any(|&j| j >= i) {
                return Err(NnError::InvalidSpec(format!("{} references a later layer", l.name)));
            }
            let arity_ok = match l.kind {
                LayerKind::Input => i == 0 && l.inputs.is_empty(),
                LayerKind::Concat => !l.inputs.is_empty(),
                LayerKind::Add | LayerKind::Subtract | LayerKind::TransposeConv { .. } => l.inputs.len() == 2,
                _ => l.inputs.len() == 1,
            };
            if !arity_ok || (i == 0) != matches!(l.kind, LayerKind::Input) {
                return Err(NnError::InvalidSpec(format!("{}: bad inputs for {}", l.name, l.kind.name())));
            }
            let ok = match l.kind {
                LayerKind::Conv { filters, kernel, stride, .. } | LayerKind::TransposeConv { filters, kernel, stride } => {
                    filters >= 1 && kernel >= 1 && stride >= 1
                }
                LayerKind::MaxPool { kernel, stride } => kernel >= 1 && stride >= 1,
                LayerKind::Add | LayerKind::Subtract => self.channels[l.inputs[0]] == self.channels[l.inputs[1]],
                _ => true,
            };
            if !ok {
                return Err(NnError::InvalidSpec(format!("{}: invalid hyperparameters", l.name)));
            }
        }
        Ok(ModelGraph { layers: self.layers, channels: self.channels, descriptor: descriptor.into(), min_input: min_input.max(1) })
    }
}
