use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kmsgraph::construct::{build, ConstructionRecipe, Theorem};
use kmsgraph::construct::intervals::IntervalSpec;
use kmsgraph::series::{green, power_entry};
use kmsgraph::spectrum::classify_at;
use kmsgraph::SeriesBudget;
use kmsgraph_bench::{geometric_loop, power_law_pair, six_cycle_with_chords};

fn bench_power_entry(c: &mut Criterion) {
    let budget = SeriesBudget::default();
    let pair = power_law_pair();
    let cyc = six_cycle_with_chords();
    c.bench_function("power_entry/power_law_pair_n8", |b| {
        b.iter(|| power_entry(&pair, black_box(2.5), 8, 0, 0, &budget).unwrap())
    });
    c.bench_function("power_entry/six_cycle_n12", |b| {
        b.iter(|| power_entry(&cyc, black_box(1.2), 12, 0, 3, &budget).unwrap())
    });
}

fn bench_green(c: &mut Criterion) {
    let budget = SeriesBudget::default();
    let g = geometric_loop();
    c.bench_function("green/geometric_loop", |b| {
        b.iter(|| green(&g, black_box(1.5), 0, 0, &budget).unwrap())
    });
}

fn bench_classify(c: &mut Criterion) {
    let budget = SeriesBudget::default();
    let pair = power_law_pair();
    c.bench_function("classify/power_law_pair", |b| {
        b.iter(|| classify_at(&pair, 0, black_box(2.5), &budget).unwrap())
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let h = std::f64::consts::LN_2;
    let recipe = ConstructionRecipe {
        theorem: Theorem::Rev2,
        h,
        intervals: vec![
            IntervalSpec::new(h, f64::INFINITY, true, false),
            IntervalSpec::new(h + 1.0, h + 2.0, true, true),
        ],
        emitters: None,
    };
    let budget = SeriesBudget::default().with_max_terms(48);
    c.bench_function("pipeline/rev2_build_and_classify", |b| {
        b.iter(|| {
            let (g, _) = build(&recipe).unwrap();
            classify_at(&g, 0, black_box(h), &budget).unwrap()
        })
    });
}

criterion_group!(benches, bench_power_entry, bench_green, bench_classify, bench_pipeline);
criterion_main!(benches);
