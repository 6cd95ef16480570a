use dctrestore_nn::zoo::UNET_MIN_INPUT;
use dctrestore_nn::{Arch, ArchConfig, LayerKind, Model, ModelGraph, NnError, Rng, Tensor4};

fn graph(arch: Arch, mult: f64) -> ModelGraph {
    ArchConfig::new(arch).with_width_mult(mult).build().unwrap()
}

fn layer<'a>(g: &'a ModelGraph, name: &str) -> &'a dctrestore_nn::LayerSpec {
    g.layers().iter().find(|l| l.name == name).unwrap_or_else(|| panic!("no layer {name}"))
}

fn convs(g: &ModelGraph) -> Vec<(usize, usize)> {
    g.layers()
        .iter()
        .filter_map(|l| match l.kind {
            LayerKind::Conv { filters, kernel, .. } => Some((filters, kernel)),
            _ => None,
        })
        .collect()
}

fn count(g: &ModelGraph, pred: impl Fn(&LayerKind) -> bool) -> usize {
    g.layers().iter().filter(|l| pred(&l.kind)).count()
}

fn random_input(seed: u64, n: usize, size: usize) -> Tensor4<f32> {
    let mut rng = Rng::new(seed);
    let data = (0..n * 3 * size * size).map(|_| rng.normal(1.0) as f32).collect();
    Tensor4::from_vec([n, 3, size, size], data).unwrap()
}

#[test]
fn dncnn_structure() {
    let g = graph(Arch::DnCnn, 1.0);
    let c = convs(&g);
    assert_eq!(c.len(), 20);
    assert!(c[..19].iter().all(|&(f, k)| f == 64 && k == 3));
    assert_eq!(c[19], (3, 3));
    assert_eq!(count(&g, |k| *k == LayerKind::BatchNorm), 18);
    let out = &g.layers()[g.output()];
    assert_eq!(out.kind, LayerKind::Subtract);
    assert_eq!(out.inputs[0], 0);
}

#[test]
fn deeper_srcnn_structure() {
    let g = graph(Arch::DeeperSrcnn, 1.0);
    let c = convs(&g);
    assert_eq!(c.len(), 20);
    assert!(c.iter().all(|&(_, k)| k == 5));
    assert!(c[..19].iter().all(|&(f, _)| f == 32));
    let out = &g.layers()[g.output()];
    assert_eq!(out.kind, LayerKind::Add);
    assert!(out.inputs.contains(&0));
}

#[test]
fn res_unet_structure() {
    let g = graph(Arch::ResUNet, 1.0);
    for i in 1..=11 {
        assert!(layer(&g, &format!("conv{i}")).kind.is_conv());
    }
    assert_eq!(convs(&g).len(), 12, "11 body convs plus the projection");
    assert_eq!(count(&g, |k| matches!(k, LayerKind::MaxPool { kernel: 3, stride: 2 })), 5);
    assert_eq!(count(&g, |k| matches!(k, LayerKind::TransposeConv { kernel: 3, stride: 2, .. })), 5);
    for i in 7..=11 {
        let cat = layer(&g, &format!("cat{i}"));
        let skip = &g.layers()[cat.inputs[1]];
        assert_eq!(skip.name, format!("relu{}", 12 - i));
        let up = &g.layers()[cat.inputs[0]];
        assert_eq!(up.inputs[1], cat.inputs[1], "upsampling sized by its skip");
    }
    let out = &g.layers()[g.output()];
    assert_eq!(out.kind, LayerKind::Add);
    assert_eq!(out.inputs[0], 0);

    let shapes = g.infer_shapes([1, 3, 120, 120]).unwrap();
    let enc: Vec<usize> = (1..=5).map(|i| shapes[g.layers().iter().position(|l| l.name == format!("conv{i}")).unwrap()][2]).collect();
    assert_eq!(enc, [120, 60, 30, 15, 8]);
    let bottleneck = g.layers().iter().position(|l| l.name == "conv6").unwrap();
    assert_eq!(shapes[bottleneck][2], 4);
}

#[test]
fn plain_unet_has_no_global_skip() {
    let g = graph(Arch::UNet, 0.5);
    let out = &g.layers()[g.output()];
    assert_eq!(out.kind, LayerKind::Linear);
}

#[test]
fn arcnn_structure() {
    assert_eq!(convs(&graph(Arch::ArCnn, 1.0)), [(64, 9), (32, 7), (16, 1), (3, 5)]);
    assert_eq!(convs(&graph(Arch::FastArCnn, 1.0)), [(64, 9), (32, 1), (32, 7), (16, 1), (3, 5)]);
}

#[test]
fn every_architecture_preserves_shape() {
    for arch in Arch::ALL {
        let g = graph(arch, 0.25);
        let shapes = g.infer_shapes([1, 3, 120, 120]).unwrap();
        assert_eq!(shapes[g.output()], [1, 3, 120, 120], "{arch}");
    }
    for arch in [Arch::DnCnn, Arch::ResUNet, Arch::ArCnn] {
        let model: Model<f32> = Model::new(graph(arch, 0.25), &mut Rng::new(1));
        let y = model.infer(&random_input(2, 1, 120)).unwrap();
        assert_eq!(y.shape(), [1, 3, 120, 120], "{arch}");
    }
}

#[test]
fn width_multiplier_scales_hidden_layers() {
    let c = convs(&graph(Arch::ResUNet, 0.5));
    assert_eq!(&c[..6].iter().map(|x| x.0).collect::<Vec<_>>(), &[16, 32, 64, 128, 128, 128]);
    assert_eq!(c.last(), Some(&(3, 1)));
}

/// Closed-form parameter counts for the full-size networks.
#[test]
fn parameter_counts() {
    let conv = |cin: usize, cout: usize, k: usize| cin * cout * k * k + cout;
    let dncnn = conv(3, 64, 3) + 18 * (conv(64, 64, 3) + 128) + conv(64, 3, 3);
    assert_eq!(graph(Arch::DnCnn, 1.0).param_count(), dncnn);

    let srcnn = conv(3, 32, 5) + 18 * conv(32, 32, 5) + conv(32, 3, 5);
    assert_eq!(graph(Arch::DeeperSrcnn, 1.0).param_count(), srcnn);

    let w = [32, 64, 128, 256, 256, 256];
    let mut unet = 0;
    let mut cin = 3;
    for &c in &w {
        unet += conv(cin, c, 3) + 2 * c;
        cin = c;
    }
    for i in (0..5).rev() {
        unet += conv(cin, w[i], 3) + conv(2 * w[i], w[i], 3) + 2 * w[i];
        cin = w[i];
    }
    unet += conv(32, 3, 1);
    assert_eq!(graph(Arch::ResUNet, 1.0).param_count(), unet);
    assert_eq!(graph(Arch::UNet, 1.0).param_count(), unet);

    let arcnn = conv(3, 64, 9) + conv(64, 32, 7) + conv(32, 16, 1) + conv(16, 3, 5);
    assert_eq!(graph(Arch::ArCnn, 1.0).param_count(), arcnn);
}

#[test]
fn zero_final_layer_gives_identity() {
    let x = random_input(5, 2, 40);
    for arch in [Arch::DnCnn, Arch::DeeperSrcnn, Arch::ResNet, Arch::ResUNet] {
        let mut model: Model<f32> = Model::new(graph(arch, 0.25), &mut Rng::new(3));
        model.zero_final_layer();
        assert_eq!(model.infer(&x).unwrap().data(), x.data(), "{arch}");
    }
}

#[test]
fn arcnn_with_zero_final_layer_outputs_zero() {
    let mut model: Model<f32> = Model::new(graph(Arch::ArCnn, 0.25), &mut Rng::new(3));
    model.zero_final_layer();
    let y = model.infer(&random_input(5, 1, 24)).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn unet_rejects_small_inputs() {
    let g = graph(Arch::ResUNet, 0.5);
    let err = g.infer_shapes([1, 3, UNET_MIN_INPUT - 1, 64]).unwrap_err();
    assert!(matches!(err, NnError::InputTooSmall { .. }));
    let model: Model<f32> = Model::new(g, &mut Rng::new(1));
    assert!(model.infer(&random_input(1, 1, 16)).is_err());
    assert!(model.infer(&random_input(1, 1, UNET_MIN_INPUT)).is_ok());
}

#[test]
fn arch_names_round_trip() {
    for arch in Arch::ALL {
        assert_eq!(arch.name().parse::<Arch>().unwrap(), arch);
    }
    assert_eq!("ResUNet".parse::<Arch>().unwrap(), Arch::ResUNet);
    assert!(matches!("vgg".parse::<Arch>(), Err(NnError::UnknownArchitecture(_))));
}
