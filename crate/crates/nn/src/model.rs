//! Parameterized execution of a [`ModelGraph`].

use crate::error::NnError;
use crate::graph::{LayerKind, ModelGraph, NodeId, ParamLayout};
use crate::ops::{
    add, batchnorm_backward, batchnorm_forward, concat_channels, conv2d_backward, conv2d_forward, maxpool_backward,
    maxpool_forward, relu_backward, relu_forward, split_channels, subtract, transpose_conv_backward,
    transpose_conv_forward, BatchNormCache, BatchNormState, Mode, PoolCache,
};
use crate::rng::{he_init, Rng};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams<T> {
    None,
    Conv { weight: Tensor4<T>, bias: Vec<T> },
    BatchNorm(BatchNormState<T>),
}

#[derive(Clone, Debug)]
pub enum LayerGrad<T> {
    None,
    Conv { weight: Tensor4<T>, bias: Vec<T> },
    BatchNorm { scale: Vec<T>, shift: Vec<T> },
}

/// Gradients of every trainable tensor, plus the gradient at the input.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
    pub input: Tensor4<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Flat views in the same order as [`Model::trainable_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::None => {}
                LayerGrad::Conv { weight, bias } => {
                    out.push(weight.data());
                    out.push(&bias[..]);
                }
                LayerGrad::BatchNorm { scale, shift } => {
                    out.push(&scale[..]);
                    out.push(&shift[..]);
                }
            }
        }
        out
    }
}

/// Activations and caches recorded by a train-mode forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    acts: Vec<Tensor4<T>>,
    bn: Vec<Option<BatchNormCache<T>>>,
    pool: Vec<Option<PoolCache>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Tensor4<T> {
        self.acts.last().expect("tape is never empty")
    }
}

struct Step<T> {
    out: Tensor4<T>,
    bn_cache: Option<BatchNormCache<T>>,
    bn_state: Option<BatchNormState<T>>,
    pool_cache: Option<PoolCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    graph: ModelGraph,
    params: Vec<LayerParams<T>>,
}

impl<T: Scalar> Model<T> {
    /// He-normal convolution weights, zero biases, identity batchnorm.
    pub fn new(graph: ModelGraph, rng: &mut Rng) -> Self {
        let params = (0..graph.layers().len())
            .map(|i| match graph.param_layout(i) {
                ParamLayout::None => LayerParams::None,
                ParamLayout::Conv { weight, bias } => {
                    let w = match graph.layers()[i].kind {
                        // fan-in of a transpose conv is in_channels·k² as well
                        LayerKind::TransposeConv { .. } => {
                            let [cin, cout, k, _] = weight;
                            let t: Tensor4<T> = crate::rng::he_init_with_fan_in(weight, cin * k * k, rng);
                            debug_assert_eq!(t.shape(), [cin, cout, k, k]);
                            t
                        }
                        _ => he_init(weight, rng),
                    };
                    LayerParams::Conv { weight: w, bias: vec![T::zero(); bias] }
                }
                ParamLayout::BatchNorm { channels } => LayerParams::BatchNorm(BatchNormState::new(channels)),
            })
            .collect();
        Self { graph, params }
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    /// Zeroes the weights and bias of the last convolution in the graph.
    pub fn zero_final_layer(&mut self) {
        if let Some(p) = self.params.iter_mut().rev().find(|p| matches!(p, LayerParams::Conv { .. })) {
            if let LayerParams::Conv { weight, bias } = p {
                weight.data_mut().fill(T::zero());
                bias.fill(T::zero());
            }
        }
    }

    /// Forgets batchnorm running statistics; the next train-mode passes
    /// estimate them afresh. Scale and shift are kept.
    pub fn reset_batchnorm_statistics(&mut self) {
        for p in &mut self.params {
            if let LayerParams::BatchNorm(s) = p {
                let fresh = BatchNormState::<T>::new(s.channels());
                s.running_mean = fresh.running_mean;
                s.running_var = fresh.running_var;
                s.updates = 0;
            }
        }
    }

    /// Mutable flat views of every trainable tensor, in graph order.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for p in &mut self.params {
            match p {
                LayerParams::None => {}
                LayerParams::Conv { weight, bias } => {
                    out.push(weight.data_mut());
                    out.push(&mut bias[..]);
                }
                LayerParams::BatchNorm(s) => {
                    out.push(&mut s.scale[..]);
                    out.push(&mut s.shift[..]);
                }
            }
        }
        out
    }

    pub fn trainable_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for p in &self.params {
            match p {
                LayerParams::None => {}
                LayerParams::Conv { weight, bias } => out.extend([weight.len(), bias.len()]),
                LayerParams::BatchNorm(s) => out.extend([s.scale.len(), s.shift.len()]),
            }
        }
        out
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<(), NnError> {
        self.graph.infer_shapes(x.shape()).map(|_| ())
    }

    fn step(&self, i: NodeId, acts: &[Option<Tensor4<T>>], mode: Mode) -> Result<Step<T>, NnError> {
        let layer = &self.graph.layers()[i];
        let arg = |k: usize| acts[layer.inputs[k]].as_ref().expect("input activation is live");
        let mut step = Step { out: Tensor4::zeros([1, 1, 1, 1]), bn_cache: None, bn_state: None, pool_cache: None };
        step.out = match (&layer.kind, &self.params[i]) {
            (LayerKind::Input, _) => unreachable!("input is seeded by the caller"),
            (LayerKind::Conv { stride, padding, .. }, LayerParams::Conv { weight, bias }) => {
                conv2d_forward(arg(0), weight, bias, *stride, *padding)?
            }
            (LayerKind::TransposeConv { stride, .. }, LayerParams::Conv { weight, bias }) => {
                let r = arg(1);
                transpose_conv_forward(arg(0), weight, bias, *stride, (r.height(), r.width()))?
            }
            (LayerKind::BatchNorm, LayerParams::BatchNorm(state)) => {
                let mut st = state.clone();
                let (y, cache) = batchnorm_forward(arg(0), &mut st, mode)?;
                if mode == Mode::Train {
                    step.bn_state = Some(st);
                }
                step.bn_cache = cache;
                y
            }
            (LayerKind::Relu, _) => relu_forward(arg(0)),
            (LayerKind::Linear, _) => arg(0).clone(),
            (LayerKind::MaxPool { kernel, stride }, _) => {
                let (y, cache) = maxpool_forward(arg(0), *kernel, *stride)?;
                if mode == Mode::Train {
                    step.pool_cache = Some(cache);
                }
                y
            }
            (LayerKind::Concat, _) => {
                let parts: Vec<&Tensor4<T>> = (0..layer.inputs.len()).map(arg).collect();
                concat_channels(&parts)?
            }
            (LayerKind::Add, _) => add(arg(0), arg(1))?,
            (LayerKind::Subtract, _) => subtract(arg(0), arg(1))?,
            (kind, _) => return Err(NnError::InvalidSpec(format!("{}: parameters missing for {}", layer.name, kind.name()))),
        };
        Ok(step)
    }

    /// Inference pass; frees each activation after its last use.
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
        self.check_input(x)?;
        let n = self.graph.layers().len();
        let mut last_use = vec![0; n];
        for (i, l) in self.graph.layers().iter().enumerate() {
            for &j in &l.inputs {
                last_use[j] = i;
            }
        }
        let mut acts: Vec<Option<Tensor4<T>>> = vec![None; n];
        acts[0] = Some(x.clone());
        for i in 1..n {
            acts[i] = Some(self.step(i, &acts, Mode::Infer)?.out);
            for &j in &self.graph.layers()[i].inputs {
                if last_use[j] == i {
                    acts[j] = None;
                }
            }
        }
        Ok(acts[n - 1].take().expect("output is live"))
    }

    /// Train-mode pass recording everything the backward pass needs.
    /// Batchnorm running statistics are updated.
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Tape<T>, NnError> {
        self.check_input(x)?;
        let n = self.graph.layers().len();
        let mut acts: Vec<Option<Tensor4<T>>> = Vec::with_capacity(n);
        acts.push(Some(x.clone()));
        let mut bn = vec![None];
        let mut pool = vec![None];
        for i in 1..n {
            let s = self.step(i, &acts, Mode::Train)?;
            if let (Some(st), LayerParams::BatchNorm(dst)) = (s.bn_state, &mut self.params[i]) {
                *dst = st;
            }
            acts.push(Some(s.out));
            bn.push(s.bn_cache);
            pool.push(s.pool_cache);
        }
        Ok(Tape { acts: acts.into_iter().map(|a| a.expect("all activations recorded")).collect(), bn, pool })
    }

    /// Executes the graph. Train mode normalizes with batch statistics and
    /// updates running statistics.
    pub fn forward(&mut self, x: &Tensor4<T>, mode: Mode) -> Result<Tensor4<T>, NnError> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => {
                let mut tape = self.forward_train(x)?;
                Ok(tape.acts.pop().expect("tape is never empty"))
            }
        }
    }

    /// Backpropagates `grad_out` (gradient of the loss at the model output)
    /// through a recorded tape.
    pub fn backward(&self, tape: &Tape<T>, grad_out: &Tensor4<T>) -> Result<Gradients<T>, NnError> {
        let layers = self.graph.layers();
        let n = layers.len();
        if grad_out.shape() != tape.output().shape() {
            return Err(NnError::Shape(format!("output grad {:?} vs output {:?}", grad_out.shape(), tape.output().shape())));
        }
        let mut grads: Vec<Option<Tensor4<T>>> = vec![None; n];
        grads[n - 1] = Some(grad_out.clone());
        let mut param_grads: Vec<LayerGrad<T>> = (0..n).map(|_| LayerGrad::None).collect();
        let push = |grads: &mut Vec<Option<Tensor4<T>>>, j: NodeId, g: Tensor4<T>| match &mut grads[j] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        };
        for i in (1..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let layer = &layers[i];
            let input = |k: usize| &tape.acts[layer.inputs[k]];
            match (&layer.kind, &self.params[i]) {
                (LayerKind::Conv { stride, padding, .. }, LayerParams::Conv { weight, .. }) => {
                    let (gx, gw, gb) = conv2d_backward(input(0), weight, &g, *stride, *padding)?;
                    param_grads[i] = LayerGrad::Conv { weight: gw, bias: gb };
                    push(&mut grads, layer.inputs[0], gx);
                }
                (LayerKind::TransposeConv { stride, .. }, LayerParams::Conv { weight, .. }) => {
                    let (gx, gw, gb) = transpose_conv_backward(input(0), weight, &g, *stride)?;
                    param_grads[i] = LayerGrad::Conv { weight: gw, bias: gb };
                    push(&mut grads, layer.inputs[0], gx);
                }
                (LayerKind::BatchNorm, LayerParams::BatchNorm(state)) => {
                    let cache = tape.bn[i].as_ref().expect("train tape has batchnorm cache");
                    let (gx, gs, gsh) = batchnorm_backward(cache, state, &g)?;
                    param_grads[i] = LayerGrad::BatchNorm { scale: gs, shift: gsh };
                    push(&mut grads, layer.inputs[0], gx);
                }
                (LayerKind::Relu, _) => push(&mut grads, layer.inputs[0], relu_backward(&tape.acts[i], &g)?),
                (LayerKind::Linear, _) => push(&mut grads, layer.inputs[0], g),
                (LayerKind::MaxPool { .. }, _) => {
                    let cache = tape.pool[i].as_ref().expect("train tape has pool cache");
                    push(&mut grads, layer.inputs[0], maxpool_backward(cache, &g)?);
                }
                (LayerKind::Concat, _) => {
                    let chans: Vec<usize> = layer.inputs.iter().map(|&j| tape.acts[j].channels()).collect();
                    for (&j, part) in layer.inputs.iter().zip(split_channels(&g, &chans)?) {
                        push(&mut grads, j, part);
                    }
                }
                (LayerKind::Add, _) => {
                    push(&mut grads, layer.inputs[1], g.clone());
                    push(&mut grads, layer.inputs[0], g);
                }
                (LayerKind::Subtract, _) => {
                    push(&mut grads, layer.inputs[1], g.map(|v| -v));
                    push(&mut grads, layer.inputs[0], g);
                }
                (kind, _) => {
                    return Err(NnError::InvalidSpec(format!("{}: cannot differentiate {}", layer.name, kind.name())))
                }
            }
        }
        // parameterized layers that received no gradient still report zeros
        for (i, pg) in param_grads.iter_mut().enumerate() {
            if matches!(pg, LayerGrad::None) {
                match &self.params[i] {
                    LayerParams::Conv { weight, bias } => {
                        *pg = LayerGrad::Conv { weight: Tensor4::zeros(weight.shape()), bias: vec![T::zero(); bias.len()] }
                    }
                    LayerParams::BatchNorm(s) => {
                        *pg = LayerGrad::BatchNorm { scale: vec![T::zero(); s.channels()], shift: vec![T::zero(); s.channels()] }
                    }
                    LayerParams::None => {}
                }
            }
        }
        let input = grads[0].take().unwrap_or_else(|| Tensor4::zeros(tape.acts[0].shape()));
        Ok(Gradients { layers: param_grads, input })
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        let params = self
            .params
            .iter()
            .map(|p| match p {
                LayerParams::None => LayerParams::None,
                LayerParams::Conv { weight, bias } => LayerParams::Conv { weight: weight.cast(), bias: conv(bias) },
                LayerParams::BatchNorm(s) => LayerParams::BatchNorm(BatchNormState {
                    scale: conv(&s.scale),
                    shift: conv(&s.shift),
                    running_mean: conv(&s.running_mean),
                    running_var: conv(&s.running_var),
                    updates: s.updates,
                }),
            })
            .collect();
        Model { graph: self.graph.clone(), params }
    }
}
