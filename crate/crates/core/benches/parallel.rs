use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lvr_core::contour::verify_reconstruct_s;
use lvr_core::exec::Execution;
use lvr_core::lvr_action::{Model, ModelParams, Spectrum};
use lvr_core::mc::{estimate, gaussian_matrix, McConfig};
use lvr_core::C64;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo_action(c: &mut Criterion) {
    let model = Model::new(ModelParams::square(3, C64::from_polar(0.05, 0.5), 3).unwrap()).unwrap();
    let cfg = McConfig::new(8192, 7);
    let mut g = c.benchmark_group("mc_action_mean");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                estimate(&cfg, 0, exec, |rng, _| {
                    let m = gaussian_matrix(rng, 3, 3, 1.0 / 3.0);
                    Ok(model.action_s(&Spectrum::of_matrix(&m))?.total)
                })
                .unwrap()
            })
        });
    }
    g.finish();
}

fn contour_reconstruction(c: &mut Criterion) {
    let model = Model::new(ModelParams::square(3, C64::from_polar(0.05, std::f64::consts::FRAC_PI_4), 2).unwrap()).unwrap();
    let spec = Spectrum::new(vec![0.5, 1.2]).unwrap();
    let mut g = c.benchmark_group("contour_reconstruction");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_reconstruct_s(&model, &spec, 1e-5, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo_action, contour_reconstruction);
criterion_main!(benches);
