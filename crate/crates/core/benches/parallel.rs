//! One-thread rayon pool against the default pool on the data-parallel hot
//! paths. Build with `--no-default-features` to time the plain sequential
//! fallback; both groups then run the same code.

use abp_core::pde::assemble_weighted_stiffness;
use abp_core::{AbpRun, AnalyticSurface, ShapeData, SolverConfig, Tolerances};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = default.current_num_threads();
    vec![
        ("single".into(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        (format!("default-{n}"), default),
    ]
}

fn bench(c: &mut Criterion) {
    let disk = AnalyticSurface::FlatDisk {
        radius: 1.0,
        ambient_dim: 3,
    };
    let mesh = disk.mesh_at_level(disk.default_resolution(), 3);
    let f = vec![1.0; mesh.num_vertices()];
    let run = AbpRun::new(&mesh, &f, &SolverConfig::default(), &Tolerances::default()).unwrap();
    let pools = pools();

    let mut g = c.benchmark_group("shape_data");
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| ShapeData::compute(&mesh)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("stiffness");
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| assemble_weighted_stiffness(&mesh, &f)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("coverage_2000");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| run.state.coverage_check(2000, 42).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
