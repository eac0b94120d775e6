use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskshare_bench::random_total;
use riskshare_core::allocate::{
    comonotonic_allocation, comonotonic_improvement, mixed_allocation, MixedOptions,
};
use riskshare_core::infconv::infconv_comonotonic;
use riskshare_core::verify::{dominance_check, sample_allocation, trial_rng};
use riskshare_core::{choquet, AgentSpec, DistortionFunction, SampleMode, TieRule};

fn mixed_agents() -> Vec<AgentSpec> {
    vec![
        AgentSpec::new(DistortionFunction::gd(), 1.0),
        AgentSpec::new(DistortionFunction::mmd(), 0.75),
        AgentSpec::iqd(0.1, 0.2).unwrap(),
    ]
}

fn bench_choquet(c: &mut Criterion) {
    let mut g = c.benchmark_group("choquet");
    let h = DistortionFunction::gd().add(&DistortionFunction::iqd(0.1).unwrap());
    for n in [1_000, 10_000, 100_000] {
        let x = random_total(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| choquet(&h, x))
        });
    }
    g.finish();
}

fn bench_allocation(c: &mut Criterion) {
    let mut g = c.benchmark_group("allocation");
    let agents = mixed_agents();
    for n in [1_000, 10_000] {
        let x = random_total(n, 2);
        g.bench_with_input(BenchmarkId::new("comonotonic", n), &x, |b, x| {
            b.iter(|| comonotonic_allocation(x, &agents[..2], TieRule::EqualSplit).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mixed", n), &x, |b, x| {
            b.iter(|| {
                mixed_allocation(x, &agents, TieRule::EqualSplit, &MixedOptions::default()).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_improvement(c: &mut Criterion) {
    let x = random_total(500, 3);
    let a = sample_allocation(&x, 3, SampleMode::Unconstrained, &mut trial_rng(3, 0));
    c.bench_function("improvement/500x3", |b| {
        b.iter(|| comonotonic_improvement(&a))
    });
}

fn bench_dominance(c: &mut Criterion) {
    let x = random_total(200, 4);
    let agents = &mixed_agents()[..2];
    let hs: Vec<DistortionFunction> = agents.iter().map(|a| a.distortion.clone()).collect();
    let closed = infconv_comonotonic(&hs, &[1.0, 0.75]).unwrap();
    c.bench_function("dominance/200x2x1000", |b| {
        b.iter(|| dominance_check(&x, agents, &closed, 1000, 7, 1e-9).unwrap())
    });
}

criterion_group!(
    benches,
    bench_choquet,
    bench_allocation,
    bench_improvement,
    bench_dominance
);
criterion_main!(benches);
