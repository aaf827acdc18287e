use criterion::{criterion_group, criterion_main, Criterion};
use swmc::model::ModelKind;
use swmc::posterior::{default_start, learn, TwoPhaseConfig};
use swmc::rng::substream;
use swmc::sampler::da_mh;
use swmc_bench::posterior;

fn delayed_acceptance(c: &mut Criterion) {
    let target = posterior(ModelKind::Linear, 500);
    let cfg = TwoPhaseConfig { phase1_iters: 2000, ..TwoPhaseConfig::default() };
    let start = default_start(&target.priors);
    let (chain, _, surrogate) = learn(&target, &start, &cfg, &mut substream(3, 0)).unwrap();
    let theta0 = chain.last().unwrap().to_vec();
    let mut g = c.benchmark_group("da_mh/linear_500");
    g.sample_size(20);
    for eps in [1.0, 2.0] {
        g.bench_function(format!("eps_{eps}_1000_iters"), |b| {
            let mut rng = substream(3, 1);
            b.iter(|| da_mh(&target, &surrogate, &theta0, 1000, eps, &mut rng).unwrap().alpha2())
        });
    }
    g.finish();
}

criterion_group!(benches, delayed_acceptance);
criterion_main!(benches);
