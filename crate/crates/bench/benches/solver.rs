use criterion::{black_box, criterion_group, criterion_main, Criterion};
use maass_core::automorphy::{assemble, choose_points, solve, Mode};
use maass_core::group::gamma222;
use maass_core::BesselEvaluator;

fn bessel(c: &mut Criterion) {
    let ev = BesselEvaluator::new(11.5);
    c.bench_function("k_scaled trapezoid R=11.5", |b| {
        b.iter(|| {
            for k in 1..=20 {
                black_box(ev.k_scaled_uncached(black_box(0.7 * k as f64)).unwrap());
            }
        })
    });
    c.bench_function("k_scaled gauss R=11.5", |b| {
        b.iter(|| {
            for k in 1..=20 {
                black_box(ev.k_scaled_gauss(black_box(0.7 * k as f64)).unwrap());
            }
        })
    });
}

fn collocation(c: &mut Criterion) {
    let g = gamma222(5.0, 0.0).unwrap();
    let y0 = 0.8 * g.min_elliptic_height();
    let coll = choose_points(&g, 29, 1.25, y0).unwrap();
    c.bench_function("assemble + solve M=29", |b| {
        b.iter(|| {
            let ev = BesselEvaluator::new(black_box(11.4));
            let sys = assemble(&g, 11.4, &coll, &ev, Mode::Cusp).unwrap();
            black_box(solve(&sys).unwrap().residual)
        })
    });
    c.bench_function("choose_points M=29", |b| {
        b.iter(|| black_box(choose_points(&g, 29, 1.25, y0).unwrap().len()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bessel, collocation
}
criterion_main!(benches);
