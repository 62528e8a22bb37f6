use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use dyadlab::dyadic::build_grid;
use dyadlab::metrics::{ball_kobayashi, kobayashi_proxy};
use dyadlab::operator_lab::{commutator_apply, commutator_norm_l2, discretize_projection, nystrom_cloud, PowerOptions, ProjectorMode};
use dyadlab::qmc::ball_point;
use dyadlab::{c64, CPoint, Domain, DomainSpec, DyadicSystem, GridConfig, SampleSpec};

fn points(n: usize, count: usize) -> Vec<CPoint> {
    (0..count)
        .map(|i| {
            let u: Vec<f64> = (0..2 * n).map(|j| ((i * 2 * n + j) as f64 * 0.618_033_988_75).fract()).collect();
            ball_point(n, &u) * 0.99
        })
        .collect()
}

fn metrics(c: &mut Criterion) {
    let pts = points(2, 256);
    c.bench_function("ball_kobayashi_256_pairs", |b| {
        b.iter(|| pts.windows(2).map(|w| ball_kobayashi(&w[0], &w[1])).sum::<f64>())
    });
    let ell = Domain::new(DomainSpec::Ellipsoid { n: 2, weights: vec![1.0, 2.0] }).unwrap();
    c.bench_function("kobayashi_proxy_ellipsoid_64_pairs", |b| {
        b.iter(|| pts[..65].windows(2).map(|w| kobayashi_proxy(&ell, &w[0], &w[1])).sum::<f64>())
    });
}

fn grids(c: &mut Criterion) {
    let ball = Domain::ball(1);
    let mut g = c.benchmark_group("dyadic");
    g.sample_size(10);
    g.bench_function("build_ball_n1_20k_levels4", |b| {
        b.iter(|| build_grid(&ball, GridConfig::new(2.0, 0.7, 4, 1), SampleSpec::Uniform { count: 20_000, seed: 1 }).unwrap())
    });
    let sys = DyadicSystem::new(build_grid(&ball, GridConfig::new(2.0, 0.7, 4, 1), SampleSpec::Uniform { count: 20_000, seed: 1 }).unwrap());
    let pts = points(1, 512);
    g.bench_function("locate_512", |b| b.iter(|| pts.iter().map(|z| black_box(sys.locate(z)).chain.len()).sum::<usize>()));
    g.finish();
}

fn operators(c: &mut Criterion) {
    let ball = Domain::ball(1);
    let cloud = nystrom_cloud(&ball, 1000, 0.04, 3);
    let disc = discretize_projection(&ball, &cloud, ProjectorMode::Nystrom, None).unwrap();
    let sym: Vec<_> = disc.points().iter().map(|w| w.coords()[0].conj()).collect();
    let f: Vec<_> = (0..disc.len()).map(|i| c64((i as f64).sin(), (i as f64).cos())).collect();
    let mut g = c.benchmark_group("operator");
    g.sample_size(10);
    g.bench_function("commutator_apply_1000", |b| b.iter(|| commutator_apply(&disc, &sym, black_box(&f))));
    g.bench_function("commutator_norm_1000", |b| {
        b.iter_batched(
            || PowerOptions { tol: 1e-3, cap: 200, seed: 5 },
            |opts| commutator_norm_l2(&disc, &sym, &opts).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, metrics, grids, operators);
criterion_main!(benches);
