#![allow(dead_code)]

use memschro::kernel::KernelSpec;
use memschro::solver::{EquationVariant, ModalState, SimulationConfig};
use memschro::spectral::InitialHistorySpec;
use memschro::Cplx;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn c(re: f64, im: f64) -> Cplx<f64> {
    Cplx::new(re, im)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut StdRng, scale: f64) -> Cplx<f64> {
    c(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Random per-mode histories `[mode][j] = B^{-j}`, `j = 0..=history+1`.
pub fn random_history(rng: &mut StdRng, modes: usize, history: usize) -> Vec<Vec<Cplx<f64>>> {
    (0..modes)
        .map(|_| (0..history + 2).map(|_| random_complex(rng, 1.0)).collect())
        .collect()
}

pub fn random_state(
    rng: &mut StdRng,
    first_mode: usize,
    modes: usize,
    history: usize,
) -> ModalState<f64> {
    ModalState::from_history(first_mode, random_history(rng, modes, history)).unwrap()
}

/// Single-domain config with explicit window, independent of any profile.
#[allow(clippy::too_many_arguments)]
pub fn config(
    equation: EquationVariant,
    kernel: KernelSpec<f64>,
    length: f64,
    dispersion: f64,
    first_mode: usize,
    modes: usize,
    dt: f64,
    history: usize,
) -> SimulationConfig<f64> {
    let mut cfg = SimulationConfig::new(
        length,
        dispersion,
        equation,
        kernel,
        modes,
        dt,
        0,
        InitialHistorySpec::zero(),
    );
    cfg.first_mode = first_mode;
    cfg.history_steps = history;
    cfg.quadrature_points = 64 * (first_mode + modes);
    cfg
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn crel(a: Cplx<f64>, b: Cplx<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
