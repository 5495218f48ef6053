use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use torsionlab_core::adiabatic::{assemble_operator, delta_u, TorusDiscretization};
use torsionlab_core::superconn::curvature_c_u;
use torsionlab_core::torsion::{torsion_report, TorsionOptions};
use torsionlab_core::FlatComplexSpec;

fn fixture(name: &str) -> FlatComplexSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    FlatComplexSpec::from_file(path).unwrap()
}

fn kernels(c: &mut Criterion) {
    let spec = fixture("rank22.json");
    let x = [0.7, 2.1];

    let curvature = curvature_c_u(&spec, &x, 1.0).unwrap();
    c.bench_function("superexp rank22", |b| b.iter(|| black_box(&curvature).superexp().unwrap()));

    let pd = spec.point_data(&x).unwrap();
    let opts = TorsionOptions::default();
    c.bench_function("torsion_report rank22", |b| {
        b.iter(|| torsion_report(black_box(&pd), 0.0, &opts).unwrap())
    });

    let disc = TorusDiscretization::with_n(8);
    let bundle = assemble_operator(&spec, &disc, 4.0, 0.0).unwrap();
    c.bench_function("delta_u rank22 N=8", |b| b.iter(|| delta_u(black_box(&bundle)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
