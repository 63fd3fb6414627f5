use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spir_core::compositor::Mode;
use spir_core::course::Course;
use spir_core::geometry::{CameraIntrinsics, CameraMount, CameraPose};
use spir_core::par::Exec;
use spir_core::scene::{render_scene_with, SceneModel};
use spir_core::session::{run_batch, Horizon, SessionConfig};
use spir_core::SimTime;

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn render(c: &mut Criterion) {
    let course = Course::default_course();
    let scene = SceneModel::from_course(&course);
    let camera = CameraPose::from_pose(&course.start, &CameraMount::default());
    let intr = CameraIntrinsics::default();
    let frame = render_scene_with(&camera, &intr, &scene, Exec::Sequential);

    let mut group = c.benchmark_group("render_scene");
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| render_scene_with(black_box(&camera), &intr, &scene, exec))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("zoom_center");
    for (name, exec) in STRATEGIES {
        group
            .bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(&frame).zoom_center(0.4, exec)));
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let configs: Vec<_> = Mode::ALL.iter().cycle().take(6).map(|&m| SessionConfig::for_mode(m)).collect();
    let horizon = Horizon::Duration(SimTime::from_secs(5.0));
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_batch(black_box(&configs), horizon, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, render, batch);
criterion_main!(benches);
