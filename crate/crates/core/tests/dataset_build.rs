use std::fs;
use std::path::Path;

use dctrestore_core::codec::{encode_planes, QualityFactor};
use dctrestore_core::dataset::{
    build_dataset, compute_split_stats, read_sample, sample_file_name, CoeffTensor, DatasetConfig, DatasetError, DatasetManifest, Split,
    MANIFEST_FILE, SAMPLES_DIR,
};
use dctrestore_core::media::write_ppm;
use dctrestore_core::synth::synthetic_image;

fn frames(dir: &Path, n: u64) {
    fs::create_dir_all(dir).unwrap();
    for s in 0..n {
        write_ppm(&synthetic_image(240, 240, s), dir.join(format!("f{s:02}.ppm"))).unwrap();
    }
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir.join(SAMPLES_DIR))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn twenty_frames_give_eighty_patches_at_four_qualities() {
    let tmp = tempfile::tempdir().unwrap();
    frames(&tmp.path().join("frames"), 20);
    let out = tmp.path().join("data");
    let m = build_dataset(&tmp.path().join("frames"), &out, &DatasetConfig::default()).unwrap();
    assert_eq!(m.samples.len(), 80);
    assert_eq!(listing(&out).len(), 320);
    assert_eq!(m.split(Split::Train).count(), 76);
    assert_eq!(m.split(Split::Valid).count(), 4);

    let e = &m.samples[5];
    let (t, q) = read_sample(&out.join(SAMPLES_DIR).join(sample_file_name(5, 30))).unwrap();
    assert_eq!(q.get(), 30);
    let patch = m.load_patch(e).unwrap();
    let expected = CoeffTensor::from_planes(&encode_planes(&patch, QualityFactor::new(30).unwrap()).unwrap());
    assert_eq!(t, expected);

    let reread = DatasetManifest::read(&out).unwrap();
    assert_eq!(reread, m);
    for q in [10, 30, 40, 50] {
        assert_eq!(compute_split_stats(&m, &out, Split::Train, q).unwrap(), m.stats_for(q).unwrap());
    }
    assert!(matches!(m.stats_for(20), Err(DatasetError::MissingStats(20))));
}

#[test]
fn builds_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    frames(&tmp.path().join("frames"), 4);
    let cfg = DatasetConfig { seed: 3, ..Default::default() };
    build_dataset(&tmp.path().join("frames"), &tmp.path().join("a"), &cfg).unwrap();
    build_dataset(&tmp.path().join("frames"), &tmp.path().join("b"), &cfg).unwrap();
    assert_eq!(listing(&tmp.path().join("a")), listing(&tmp.path().join("b")));
    assert_eq!(
        fs::read(tmp.path().join("a").join(MANIFEST_FILE)).unwrap(),
        fs::read(tmp.path().join("b").join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn test_sources_are_held_out() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("frames");
    frames(&root.join("clipA"), 2);
    frames(&root.join("clipB"), 1);
    let cfg = DatasetConfig { test_sources: vec!["clipB".into()], ..Default::default() };
    let m = build_dataset(&root, &tmp.path().join("d"), &cfg).unwrap();
    assert_eq!(m.split(Split::Test).count(), 4);
    assert!(m.split(Split::Test).all(|e| e.source == "clipB"));
    assert!(m.samples.iter().filter(|e| e.source == "clipA").all(|e| e.split != Split::Test));

    let missing = DatasetConfig { test_sources: vec!["nope".into()], ..Default::default() };
    assert!(matches!(build_dataset(&root, &tmp.path().join("e"), &missing), Err(DatasetError::InvalidConfig(_))));
}

#[test]
fn bad_configurations_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    frames(&tmp.path().join("frames"), 1);
    let out = tmp.path().join("d");
    for cfg in [
        DatasetConfig { patch_size: 12, ..Default::default() },
        DatasetConfig { qfs: vec![10, 50, 10], ..Default::default() },
        DatasetConfig { train_fraction: 0.0, ..Default::default() },
        DatasetConfig { qfs: vec![], ..Default::default() },
    ] {
        assert!(build_dataset(&tmp.path().join("frames"), &out, &cfg).is_err(), "{cfg:?}");
    }
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(matches!(build_dataset(&empty, &out, &DatasetConfig::default()), Err(DatasetError::NoFrames(_))));
}
