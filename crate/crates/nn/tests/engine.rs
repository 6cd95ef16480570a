use dctrestore_nn::ops::{batchnorm_forward, mse_loss, BatchNormState};
use dctrestore_nn::weights::NamedTensor;
use dctrestore_nn::{
    he_init, AdamConfig, AdamState, Arch, ArchConfig, GraphBuilder, LayerParams, Mode, Model, NnError, Rng, Tensor4,
    WeightsFile,
};
use proptest::prelude::*;

fn random(seed: u64, shape: [usize; 4], std: f64) -> Tensor4<f32> {
    let mut rng = Rng::new(seed);
    let data = (0..shape.iter().product()).map(|_| rng.normal(std) as f32).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

fn small_model(seed: u64) -> Model<f32> {
    Model::new(ArchConfig::new(Arch::ResUNet).with_width_mult(0.125).build().unwrap(), &mut Rng::new(seed))
}

/// A few Adam steps so batchnorm statistics and weights move off their
/// initial values.
fn trained(seed: u64) -> Model<f32> {
    let mut model = small_model(seed);
    let mut adam = AdamState::new(AdamConfig::default(), &model.trainable_sizes());
    let x = random(seed + 10, [2, 3, 32, 32], 1.0);
    let y = random(seed + 11, [2, 3, 32, 32], 1.0);
    for _ in 0..3 {
        let tape = model.forward_train(&x).unwrap();
        let (_, g) = mse_loss(tape.output(), &y).unwrap();
        let grads = model.backward(&tape, &g).unwrap();
        adam.step(&mut model.trainable_mut(), &grads.slices()).unwrap();
    }
    model
}

#[test]
fn he_init_variance() {
    let fan_in = 4 * 5 * 5;
    let w: Tensor4<f64> = he_init([1000, 4, 5, 5], &mut Rng::new(42));
    let n = w.len() as f64;
    let mean = w.data().iter().sum::<f64>() / n;
    let var = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let expected = 2.0 / fan_in as f64;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var} vs {expected}");
    assert!(mean.abs() < 0.01);
}

#[test]
fn initialization_is_seeded() {
    let a = small_model(9).to_weights();
    assert_eq!(a, small_model(9).to_weights());
    assert_ne!(a, small_model(10).to_weights());
}

#[test]
fn training_steps_are_deterministic() {
    assert_eq!(trained(4).to_weights(), trained(4).to_weights());
}

#[test]
fn weights_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dctw");
    let model = trained(2);
    model.save(&path).unwrap();
    let mut loaded = small_model(99);
    loaded.load(&path).unwrap();
    assert_eq!(loaded.to_weights(), model.to_weights());

    let x = random(3, [1, 3, 32, 32], 1.0);
    assert_eq!(loaded.infer(&x).unwrap().data(), model.infer(&x).unwrap().data());
    assert!(!dir.path().join("m.dctw.tmp").exists());
}

#[test]
fn weights_include_batchnorm_statistics() {
    let w = trained(2).to_weights();
    for suffix in ["scale", "shift", "running_mean", "running_var", "updates"] {
        assert!(w.tensors.iter().any(|t| t.name == format!("bn1.{suffix}")), "bn1.{suffix}");
    }
    let updates = w.tensors.iter().find(|t| t.name == "bn1.updates").unwrap();
    assert_eq!(updates.values, [3.0]);
}

#[test]
fn weights_header_layout() {
    let file = WeightsFile {
        descriptor: "toy".into(),
        tensors: vec![NamedTensor { name: "a".into(), dims: [1, 1, 1, 2], values: vec![1.5, -2.0] }],
    };
    let mut bytes = Vec::new();
    file.write_to(&mut bytes).unwrap();
    assert_eq!(&bytes[..5], b"DCTW\x01");
    assert_eq!(&bytes[bytes.len() - 8..], [1.5f32.to_le_bytes(), (-2.0f32).to_le_bytes()].concat());
    assert_eq!(WeightsFile::parse(&bytes).unwrap(), file);

    assert!(matches!(WeightsFile::parse(&bytes[..bytes.len() - 1]), Err(NnError::BadWeights(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(WeightsFile::parse(&bad), Err(NnError::BadWeights(_))));
}

#[test]
fn loading_another_architecture_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.dctw");
    let dncnn: Model<f32> = Model::new(ArchConfig::new(Arch::DnCnn).with_width_mult(0.125).build().unwrap(), &mut Rng::new(1));
    dncnn.save(&path).unwrap();
    let err = small_model(1).load(&path).unwrap_err();
    assert!(matches!(err, NnError::ArchitectureMismatch { .. }), "{err}");
    assert!(err.to_string().contains("architecture mismatch"));

    let wider: Model<f32> = Model::new(ArchConfig::new(Arch::ResUNet).with_width_mult(0.25).build().unwrap(), &mut Rng::new(1));
    wider.save(&path).unwrap();
    assert!(small_model(1).load(&path).is_err());
}

#[test]
fn batchnorm_train_and_infer_agree_once_statistics_settle() {
    let x = random(8, [4, 5, 6, 6], 3.0).map(|v| v + 2.0);
    let mut state = BatchNormState::new(5);
    state.scale = vec![1.5, 0.5, 1.0, 2.0, 0.8];
    state.shift = vec![0.1, -0.3, 0.0, 0.5, 1.0];
    let mut train = None;
    for _ in 0..200 {
        train = Some(batchnorm_forward(&x, &mut state, Mode::Train).unwrap().0);
    }
    let (infer, cache) = batchnorm_forward(&x, &mut state, Mode::Infer).unwrap();
    assert!(cache.is_none());
    assert!(train.unwrap().max_abs_diff(&infer) < 1e-2);
}

#[test]
fn infer_mode_leaves_statistics_alone() {
    let mut model = trained(3);
    let before = model.to_weights();
    let x = random(1, [1, 3, 32, 32], 1.0);
    let a = model.forward(&x, Mode::Infer).unwrap();
    assert_eq!(model.to_weights(), before);
    assert_eq!(a.data(), model.infer(&x).unwrap().data());
}

#[test]
fn train_forward_updates_statistics() {
    let mut model = small_model(3);
    model.forward(&random(1, [2, 3, 32, 32], 1.0), Mode::Train).unwrap();
    let updated = model.params().iter().any(|p| matches!(p, LayerParams::BatchNorm(s) if s.updates == 1));
    assert!(updated);
}

#[test]
fn adam_reduces_a_simple_loss() {
    let mut b = GraphBuilder::new(3);
    let c = b.conv("conv", b.input(), 3, 3);
    b.linear("out", c);
    let mut model: Model<f32> = Model::new(b.finish("toy", 1).unwrap(), &mut Rng::new(0));
    let mut adam = AdamState::new(AdamConfig::default(), &model.trainable_sizes());
    let x = random(1, [2, 3, 8, 8], 1.0);
    let target = x.map(|v| 0.5 * v);
    let mut losses = Vec::new();
    for _ in 0..300 {
        let tape = model.forward_train(&x).unwrap();
        let (loss, g) = mse_loss(tape.output(), &target).unwrap();
        losses.push(loss);
        let grads = model.backward(&tape, &g).unwrap();
        adam.step(&mut model.trainable_mut(), &grads.slices()).unwrap();
    }
    assert_eq!(adam.step_count(), 300);
    assert!(losses[299] < 0.2 * losses[0], "{} -> {}", losses[0], losses[299]);
}

#[test]
fn graph_builder_rejects_bad_graphs() {
    let mut b = GraphBuilder::new(3);
    let c = b.conv("conv", b.input(), 4, 3);
    b.relu("conv", c);
    assert!(b.finish("dup", 1).is_err());

    let mut b = GraphBuilder::new(3);
    let c = b.conv("conv", b.input(), 4, 3);
    b.add("sum", b.input(), c);
    assert!(b.finish("mismatch", 1).is_err(), "channel counts differ");
}

#[test]
fn f64_model_matches_f32_model() {
    let model = trained(6);
    let wide: Model<f64> = model.cast();
    let x = random(2, [1, 3, 32, 32], 1.0);
    let a = model.infer(&x).unwrap();
    let b = wide.infer(&x.cast()).unwrap().cast::<f32>();
    assert!(a.max_abs_diff(&b) < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shapes_are_preserved(arch in 0usize..7, h in 32usize..80, w in 32usize..80, n in 1usize..3) {
        let arch = Arch::ALL[arch];
        let g = ArchConfig::new(arch).with_width_mult(0.25).build().unwrap();
        let shapes = g.infer_shapes([n, 3, h, w]).unwrap();
        prop_assert_eq!(shapes[g.output()], [n, 3, h, w]);
    }

    #[test]
    fn unet_runs_on_odd_sizes(h in 32usize..56, w in 32usize..56) {
        let model = small_model(1);
        let y = model.infer(&random(h as u64, [1, 3, h, w], 1.0)).unwrap();
        prop_assert_eq!(y.shape(), [1, 3, h, w]);
        prop_assert!(y.data().iter().all(|v| v.is_finite()));
    }
}
