use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use traitgeo::conditioning::{gram, Scheme};
use traitgeo::steersim::simulate_bleed;
use traitgeo::{apply_condition, ConditioningSpec};
use traitgeo_bench::{ocean_set, world_and_axes};

fn conditioning(c: &mut Criterion) {
    let set = ocean_set(4096);
    let mut group = c.benchmark_group("condition_5x4096");
    for scheme in Scheme::ALL {
        let spec = match scheme {
            Scheme::C0 => ConditioningSpec::c0(),
            Scheme::C1 => ConditioningSpec::c1(0.5),
            Scheme::C2 => ConditioningSpec::c2(None),
            Scheme::C3 => ConditioningSpec::c3(0.5, None),
            Scheme::C4 => ConditioningSpec::c4(0.5, 0.5, None),
            Scheme::C5 => ConditioningSpec::c5(),
        };
        group.bench_function(scheme.to_string(), |b| {
            b.iter(|| apply_condition(black_box(&set), &spec).unwrap())
        });
    }
    group.finish();
    c.bench_function("gram_5x4096", |b| b.iter(|| gram(black_box(&set))));
}

fn bleed(c: &mut Criterion) {
    let (world, axes) = world_and_axes(256, 8);
    c.bench_function("simulate_bleed_5x256x8", |b| {
        b.iter(|| simulate_bleed(&world, black_box(&axes), 0.5).unwrap())
    });
}

criterion_group!(benches, conditioning, bleed);
criterion_main!(benches);
