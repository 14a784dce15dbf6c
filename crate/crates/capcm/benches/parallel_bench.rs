//! Data-parallel inner loops, timed on both execution lanes: the rayon
//! pool (default feature set) against the sequential fallback (runtime
//! thread cap of one, the same code path that a `--no-default-features`
//! build compiles to). Results are bit-identical between lanes; only the
//! wall clock differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use capcm::domain::{CapDomain, GridMode};
use capcm::geometry::ell;
use capcm::linalg::BorderedSolver;
use capcm::par;
use capcm::solver::{assemble_jacobian, kernel_constraints, Discretization};
use capcm::validate::{manufactured_family, Family};

use std::f64::consts::PI;

struct Setup {
    disc: Discretization,
    s: Vec<f64>,
    phi: Vec<f64>,
}

fn setup(nr: usize) -> Setup {
    let d = CapDomain::build(2, PI / 3.0, GridMode::Full2d, nr, 2 * nr).unwrap();
    let s = manufactured_family(Family::G2, 0.05, &d).unwrap();
    let phi = capcm::validate::manufactured_phi(Family::G2, 0.05, 2, &d).unwrap();
    Setup {
        disc: Discretization::new(&d),
        s: s.values,
        phi: phi.values,
    }
}

fn lanes() -> [(&'static str, usize); 2] {
    [("parallel", 0), ("serial", 1)]
}

fn set_lane(cap: usize) {
    if cap == 1 {
        par::set_max_threads(1);
    } else {
        par::set_max_threads(usize::MAX);
    }
}

fn bench_residual(c: &mut Criterion) {
    let su = setup(64);
    let mut group = c.benchmark_group("residual_assembly_64x128");
    for (name, cap) in lanes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &cap, |b, &cap| {
            set_lane(cap);
            b.iter(|| su.disc.residual(&su.s, &su.phi, 2));
        });
    }
    group.finish();
    set_lane(0);
}

fn bench_jacobian(c: &mut Criterion) {
    let su = setup(64);
    let mut group = c.benchmark_group("jacobian_assembly_64x128");
    group.sample_size(20);
    for (name, cap) in lanes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &cap, |b, &cap| {
            set_lane(cap);
            b.iter(|| assemble_jacobian(&su.disc, &su.s, 2).unwrap());
        });
    }
    group.finish();
    set_lane(0);
}

fn bench_bordered_factor(c: &mut Criterion) {
    let su = setup(48);
    let cons = kernel_constraints(&su.disc).unwrap();
    let jac = assemble_jacobian(&su.disc, &su.s, 2).unwrap();
    let mut group = c.benchmark_group("bordered_factor_48x96");
    group.sample_size(10);
    for (name, cap) in lanes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &cap, |b, &cap| {
            set_lane(cap);
            b.iter(|| BorderedSolver::new(jac.clone(), su.disc.kl, cons.clone()).unwrap());
        });
    }
    group.finish();
    set_lane(0);
}

fn bench_eigen_monitor(c: &mut Criterion) {
    let d = CapDomain::build(2, PI / 3.0, GridMode::Full2d, 64, 128).unwrap();
    let t = capcm::geometry::tau(&ell(&d));
    let mut group = c.benchmark_group("eigen_monitor_64x128");
    for (name, cap) in lanes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &cap, |b, &cap| {
            set_lane(cap);
            b.iter(|| capcm::hessian_ops::lambda_min_field(&t));
        });
    }
    group.finish();
    set_lane(0);
}

criterion_group!(
    benches,
    bench_residual,
    bench_jacobian,
    bench_bordered_factor,
    bench_eigen_monitor
);
criterion_main!(benches);
