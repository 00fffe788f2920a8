use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use emapr_core::problems::Gresho;
use emapr_core::{
    BoundaryMode, ConvectionForm, FormAssembler, InitialCondition, Mesh, NonlinearMethod, NonlinearSettings, Rect,
    Simulation, Spaces, TimeConfig, TimeScheme, VelocityElementKind,
};

const CASES: [(VelocityElementKind, usize); 2] = [(VelocityElementKind::BernardiRaugel, 32), (VelocityElementKind::P2Bubble, 16)];

fn spaces(kind: VelocityElementKind, n: usize) -> Spaces {
    Spaces::new(&Mesh::uniform_square(n, Rect::centered_unit()).unwrap(), kind)
}

/// Gresho interpolant coefficients, used as the advecting field.
fn gresho_field(spaces: &Spaces) -> Vec<f64> {
    let fa = FormAssembler::new(spaces);
    let mut sim = Simulation::new(&fa, &Gresho, gresho_config()).unwrap();
    sim.initial_state().unwrap().u_now
}

fn gresho_config() -> TimeConfig {
    TimeConfig {
        scheme: TimeScheme::CrankNicolson,
        dt: 0.01,
        t_end: 0.01,
        form: ConvectionForm::Emapr,
        alpha: 0.0,
        boundary: BoundaryMode::NoPenetration,
        nonlinear: NonlinearSettings { method: NonlinearMethod::Picard, tolerance: 1e-10, max_iterations: 50 },
        initial: InitialCondition::Interpolation,
    }
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for (kind, n) in CASES {
        let s = spaces(kind, n);
        let fa = FormAssembler::new(&s);
        let beta = gresho_field(&s);
        group.bench_function(BenchmarkId::new("stiffness", kind.name()), |b| b.iter(|| black_box(fa.gradgrad())));
        group.bench_function(BenchmarkId::new("dh_mass", kind.name()), |b| b.iter(|| black_box(fa.dh_mass(1.0).unwrap())));
        for form in [ConvectionForm::Skew, ConvectionForm::Emapr] {
            let id = BenchmarkId::new(format!("convection_{}", form.name()), kind.name());
            group.bench_function(id, |b| b.iter(|| black_box(fa.convection(form, &beta).unwrap())));
        }
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruction");
    for (kind, n) in CASES {
        let s = spaces(kind, n);
        let fa = FormAssembler::new(&s);
        let v = gresho_field(&s);
        group.bench_function(BenchmarkId::new("operators", kind.name()), |b| b.iter(|| black_box(FormAssembler::new(&s))));
        group.bench_function(BenchmarkId::new("apply", kind.name()), |b| b.iter(|| black_box(fa.ops().reconstruct(&v).unwrap())));
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (kind, n) in CASES {
        let s = spaces(kind, n);
        let fa = FormAssembler::new(&s);
        group.bench_function(BenchmarkId::new("stokes_projection", kind.name()), |b| {
            let mut sim = Simulation::new(&fa, &Gresho, gresho_config()).unwrap();
            b.iter(|| black_box(sim.stokes_projection(0.0).unwrap()))
        });
        group.bench_function(BenchmarkId::new("cn_picard_step", kind.name()), |b| {
            let mut sim = Simulation::new(&fa, &Gresho, gresho_config()).unwrap();
            let initial = sim.initial_state().unwrap();
            b.iter(|| {
                let mut state = initial.clone();
                black_box(sim.advance(&mut state).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, reconstruction, solve);
criterion_main!(benches);
