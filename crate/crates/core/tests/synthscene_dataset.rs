use std::fs;
use std::path::Path;

use hsar_core::classify::{accuracy, argmax_labels, macro_auc, svm_predict};
use hsar_core::geometry::backproject;
use hsar_core::hypercube::{calibrate, demosaic, preprocess, CalibrationRefs, Precision};
use hsar_core::synthscene::{generate_dataset, Dataset, NoiseSpec, Scene, SceneSpec};

fn small_spec() -> SceneSpec {
    let mut s = SceneSpec::demo().downscaled(4);
    s.noise = NoiseSpec {
        dropout_rate: 0.02,
        temporal_jitter_sigma_mm: 2.0,
        ..Default::default()
    };
    s.seed = 11;
    s
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn regeneration_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_dataset(&small_spec(), 2, a.path()).unwrap();
    generate_dataset(&small_spec(), 2, b.path()).unwrap();
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    assert!(ta.len() >= 15);
    assert_eq!(ta, tb);
}

#[test]
fn layout_and_reader() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small_spec(), 2, dir.path()).unwrap();
    for f in [
        "manifest.json",
        "cameras.json",
        "correction.csv",
        "refs/dark.raw",
        "refs/white.raw",
        "model.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    for f in [
        "mosaic.raw",
        "rgb_rgb.png",
        "depth_clean.png",
        "depth_noisy.png",
        "labels.png",
    ] {
        assert!(dir.path().join("frames/0001").join(f).is_file(), "{f}");
    }
    let ds = Dataset::open(dir.path()).unwrap();
    assert_eq!(ds.frame_count(), 2);
    let f = ds.load_frame(1).unwrap();
    assert_eq!(f.depth_noisy.width(), 256);
    assert_eq!(f.labels.width(), 102);
    assert!(ds.load_frame(2).is_err());
    assert!(Dataset::open(&dir.path().join("nope")).is_err());
}

#[test]
fn calibration_recovers_reflectance_within_sensor_quantization() {
    let mut spec = small_spec();
    spec.sensor.read_noise_counts = 0.0;
    let scene = Scene::new(spec.clone()).unwrap();
    let refs = scene.references();
    let mosaic = scene.render_mosaic(&refs, 0);
    let cube = calibrate(
        &demosaic(&mosaic).unwrap(),
        &CalibrationRefs::new(&refs).unwrap(),
        Precision::F32,
    )
    .unwrap();
    let truth = scene.render_reflectance(spec.cameras.get("hs").unwrap());
    let mut worst = 0.0f64;
    for (i, t) in truth.iter().enumerate() {
        let (x, y) = (i % cube.width(), i / cube.width());
        for (b, &r) in t.iter().enumerate() {
            worst = worst.max((cube.get(x, y, b) as f64 - r).abs());
        }
    }
    assert!(worst <= 1.0 / 1024.0, "worst {worst}");
}

#[test]
fn clean_depth_round_trips_through_geometry() {
    let spec = small_spec();
    let scene = Scene::new(spec.clone()).unwrap();
    let cam = spec.cameras.get("depth").unwrap();
    let clean = scene.render_depth(cam);
    let cloud = backproject(&clean, cam).unwrap();
    assert_eq!(cloud.len(), clean.valid_count());
    for p in cloud.points.iter().step_by(37) {
        let (u, v) = (p.source_pixel.0 as f64, p.source_pixel.1 as f64);
        let hit = scene.cast(cam, u, v).unwrap();
        let err_mm = (hit.point - p.vector()).norm() * 1000.0;
        // quantization moves the point along its ray by at most 0.5 mm of depth
        let ray_stretch = cam.pixel_to_camera(u, v, 1.0).norm();
        assert!(err_mm <= 0.5 * ray_stretch + 1e-9, "{err_mm}");
    }
}

#[test]
fn stored_model_classifies_a_later_frame() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small_spec(), 2, dir.path()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let f = ds.load_frame(1).unwrap();
    let refs = CalibrationRefs::new(&ds.references().unwrap()).unwrap();
    let cube = preprocess(&f.mosaic, &refs, &ds.correction().unwrap(), Precision::F16).unwrap();
    let probs = svm_predict(&cube, &ds.model().unwrap()).unwrap();
    assert!(accuracy(&argmax_labels(&probs), &f.labels) >= 0.95);
    let (per_class, _) = macro_auc(&probs, &f.labels).unwrap();
    assert!(per_class.iter().flatten().all(|&a| a >= 0.95), "{per_class:?}");
}

#[test]
fn in_memory_source_matches_stored_frames() {
    use hsar_core::synthscene::{ModelTraining, SyntheticSource};
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&small_spec(), 2, dir.path()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let src = SyntheticSource::new(&small_spec(), 2, &ModelTraining::default()).unwrap();
    assert_eq!(src.model(), &ds.model().unwrap());
    assert_eq!(src.cameras(), ds.cameras());
    for i in 0..2 {
        let (a, b) = (src.frame(i).unwrap(), ds.load_frame(i).unwrap());
        assert_eq!(a.mosaic.values(), b.mosaic.values());
        assert_eq!(a.rgb, b.rgb);
        assert_eq!(a.depth_noisy, b.depth_noisy);
        assert_eq!(a.depth_clean, b.depth_clean);
        assert_eq!(a.labels, b.labels);
    }
    assert!(src.frame(2).is_err());
}
