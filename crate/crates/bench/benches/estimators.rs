use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use phidep::gaussian::{phi_gaussian_numeric, NumericMethod};
use phidep::normal::norm_quantile;
use phidep::*;

fn equicorrelated(q: usize, rho: f64, sizes: &[usize]) -> BlockCorrelationMatrix {
    let m = DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rho });
    BlockCorrelationMatrix::new(m, GroupStructure::new(sizes.to_vec()).unwrap()).unwrap()
}

fn gaussian_route(c: &mut Criterion) {
    let r = equicorrelated(4, 0.4, &[2, 2]);
    let u = CopulaModel::Gaussian(r.clone()).sampler().unwrap().sample(5000, 1);
    let sample = GroupedSample::new(u.map(norm_quantile), r.structure().clone()).unwrap();
    let opts = GaussianOptions::default();
    c.bench_function("estimate_gaussian mi n=5000 q=4", |b| {
        b.iter(|| estimate_gaussian(&sample, &PhiFunction::mutual_information(), 0.05, &opts).unwrap())
    });
    c.bench_function("quadrature hellinger q=4", |b| {
        b.iter(|| phi_gaussian_numeric(&r, &PhiFunction::hellinger(), NumericMethod::Quadrature).unwrap())
    });
}

fn copula_route(c: &mut Criterion) {
    let nested = CopulaModel::Nested(NestedArchimedeanCopula::from_params(Family::Gumbel, 3.0, &[(3.0, 2), (4.0, 2)]).unwrap());
    let point = [0.3, 0.6, 0.5, 0.7];
    c.bench_function("nested gumbel log density q=4", |b| b.iter(|| nested.log_density(&point).unwrap()));
    let mut group = c.benchmark_group("monte carlo");
    group.sample_size(10);
    for m in [10_000usize, 100_000] {
        group.bench_with_input(BenchmarkId::new("hellinger reduced", m), &m, |b, &m| {
            b.iter(|| estimate_hellinger_reduced(&nested, m, 3).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("nested sampling", m), &m, |b, &m| {
            b.iter(|| nested.sampler().unwrap().sample(m, 4))
        });
    }
    group.finish();
}

criterion_group!(benches, gaussian_route, copula_route);
criterion_main!(benches);
