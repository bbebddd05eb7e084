use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use streetgeo::config::{Grid, RunConfig};
use streetgeo::eval::grid_search;
use streetgeo::exec::Execution;
use streetgeo::sim::{NoiseModel, SceneSpec};
use streetgeo::{run_pipeline, Survey};

fn scene(objects: usize) -> (Survey, Vec<streetgeo::eval::GroundTruth>) {
    let scene = SceneSpec::street(42, objects, NoiseModel::default()).generate().unwrap();
    (Survey::new(scene.frames, scene.detections).unwrap(), scene.truth)
}

fn pipeline(c: &mut Criterion) {
    let (survey, _) = scene(20);
    let mut group = c.benchmark_group("pipeline");
    for execution in [Execution::Sequential, Execution::Parallel] {
        let config = RunConfig { execution, ..RunConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &config, |b, config| {
            b.iter(|| run_pipeline(&survey, config).unwrap())
        });
    }
    group.finish();
}

fn tuning(c: &mut Criterion) {
    let (survey, truth) = scene(10);
    let grid = Grid {
        alpha: vec![0.2, 0.3],
        beta: vec![0.05],
        lambda: vec![0.05, 0.1],
        linkage_cutoff: vec![1.0, 2.0],
    };
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let base = RunConfig { execution, ..RunConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &base, |b, base| {
            b.iter(|| grid_search(&survey, &truth, &grid, base, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pipeline, tuning);
criterion_main!(benches);
