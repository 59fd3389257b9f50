//! Per-kernel throughput on a quarter-scale demo frame, on one worker thread and on
//! the default pool. Built without the `parallel` feature only the sequential
//! variant exists.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hsar_core::classify::{kmeans_cluster, svm_predict, KMeansParams};
use hsar_core::depthproc::{inpaint, radius_outlier_filter, statistical_outlier_filter, DepthConfig};
use hsar_core::geometry::{align_rgb_to_depth_filled, register_frame};
use hsar_core::hypercube::{preprocess, CalibrationRefs, Precision};
use hsar_core::synthscene::{ModelTraining, NoiseSpec, SceneSpec, SyntheticSource};

type Kernel<'a> = (&'static str, Box<dyn Fn() + Sync + 'a>);

fn kernels(c: &mut Criterion) {
    let mut spec = SceneSpec::demo().downscaled(4);
    spec.noise = NoiseSpec {
        dropout_rate: 0.05,
        flying_point_rate: 0.005,
        flying_point_offset_mm: 300.0,
        temporal_jitter_sigma_mm: 8.0,
        ..Default::default()
    };
    let src = SyntheticSource::new(&spec, 1, &ModelTraining::default()).expect("demo scene");
    let frame = src.frame(0).expect("frame 0");
    let rig = src.rig().clone();
    let calib = CalibrationRefs::new(src.references()).expect("references");
    let cube = preprocess(&frame.mosaic, &calib, src.correction(), Precision::F16).expect("cube");
    let cfg = DepthConfig::default();
    let kparams = KMeansParams {
        k: 16,
        ..Default::default()
    };
    let guide = align_rgb_to_depth_filled(&frame.rgb, &rig.rgb, &frame.depth_noisy, &rig.depth).expect("guide");

    let list: Vec<Kernel> = vec![
        (
            "preprocess",
            Box::new(|| {
                drop(black_box(preprocess(
                    &frame.mosaic,
                    &calib,
                    src.correction(),
                    Precision::F16,
                )))
            }),
        ),
        (
            "svm_predict",
            Box::new(|| drop(black_box(svm_predict(&cube, src.model())))),
        ),
        ("kmeans", Box::new(|| drop(black_box(kmeans_cluster(&cube, &kparams))))),
        (
            "statistical_filter",
            Box::new(|| {
                drop(black_box(statistical_outlier_filter(
                    &frame.depth_noisy,
                    &rig.depth,
                    &cfg,
                )))
            }),
        ),
        (
            "radius_filter",
            Box::new(|| drop(black_box(radius_outlier_filter(&frame.depth_noisy, &rig.depth, &cfg)))),
        ),
        (
            "inpaint",
            Box::new(|| drop(black_box(inpaint(&frame.depth_noisy, &guide.image, &cfg.inpaint)))),
        ),
        (
            "register",
            Box::new(|| drop(black_box(register_frame(&frame.depth_noisy, &frame.rgb, None, &rig)))),
        ),
    ];

    #[cfg(feature = "parallel")]
    let pools = {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
        let all = rayon::ThreadPoolBuilder::new().build().expect("pool");
        vec![("1_thread", one), ("default_pool", all)]
    };

    for (name, f) in &list {
        let mut group = c.benchmark_group(*name);
        group.sample_size(20);
        #[cfg(feature = "parallel")]
        for (label, pool) in &pools {
            group.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| pool.install(f)));
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::from_parameter("sequential"), |b| b.iter(f));
        group.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
