//! Time stepping of the modal amplitudes.
//!
//! Each mode `k` obeys
//!
//! ```text
//! i B_k' - a μ_k B_k + i c_k ∫₀^∞ f(s) B_k(t - s) ds = 0,   μ_k = 4π²k²/L²,
//! ```
//!
//! with `c_k = μ_k` when the memory acts through the Laplacian, `c_k = 1`
//! when it acts on `y` directly and `c_k = 0` without memory. The scheme is
//! Crank–Nicolson in the amplitude with the convolution replaced by a
//! truncated sum over midpoint values `B^{n-m+1/2}`, `m = 0..=N_hist`. The
//! `m = 0` term contains the unknown, so every step solves one scalar
//! complex linear equation per mode in closed form.

use std::fmt;

use rayon::prelude::*;

use crate::analysis::{discrete_energy, EnergySample, EnergyTrace, TraceMeta};
use crate::error::{Error, Result};
use crate::kernel::{check_hypotheses, KernelSpec};
use crate::scalar::{is_finite_c, Cplx, Real};
use crate::spectral::{parseval_l2, InitialHistorySpec, ModalCoefficients};

/// Steps between divergence checks in [`Solver::run`].
pub const DIVERGENCE_CHECK_INTERVAL: usize = 100;

/// Default quadrature points used to project initial data.
pub const DEFAULT_QUADRATURE_POINTS: usize = 16384;

/// Per-step residual bound relative to the magnitude of the scheme's terms.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

const PARALLEL_WORK_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquationVariant {
    /// Memory acts through `Δy(t - s)`.
    LaplacianMemory,
    /// Memory acts through `y(t - s)`.
    ZerothOrderMemory,
    NoMemory,
}

impl EquationVariant {
    pub fn name(&self) -> &'static str {
        match self {
            EquationVariant::LaplacianMemory => "laplacian",
            EquationVariant::ZerothOrderMemory => "zeroth-order",
            EquationVariant::NoMemory => "none",
        }
    }
}

impl fmt::Display for EquationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weight given to the newest (`m = 0`) convolution term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemoryRule {
    /// Half weight on `m = 0`; second order in `δt`.
    #[default]
    Trapezoid,
    /// Uniform `δt f^m` weights; first order in `δt`.
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemorySumStrategy {
    /// Exponential kernels use the O(1) recursion, others the direct sum.
    #[default]
    Auto,
    Direct,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig<T> {
    pub length: T,
    /// Dispersion coefficient `a > 0`.
    pub dispersion: T,
    pub equation: EquationVariant,
    pub kernel: KernelSpec<T>,
    /// Number of modes `K`.
    pub modes: usize,
    /// Index of the first simulated mode; modes are `first_mode..first_mode+K`.
    pub first_mode: usize,
    pub dt: T,
    /// Memory truncation window `N_hist`, in steps.
    pub history_steps: usize,
    pub steps: usize,
    pub initial: InitialHistorySpec<T>,
    pub energy_stride: usize,
    pub memory_rule: MemoryRule,
    pub memory_sum: MemorySumStrategy,
    pub quadrature_points: usize,
}

impl<T: Real> SimulationConfig<T> {
    /// Configuration with the default stride (100), trapezoid rule and a
    /// memory window as long as the run.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        length: T,
        dispersion: T,
        equation: EquationVariant,
        kernel: KernelSpec<T>,
        modes: usize,
        dt: T,
        steps: usize,
        initial: InitialHistorySpec<T>,
    ) -> Self {
        let history_steps = if equation == EquationVariant::NoMemory {
            0
        } else {
            steps.max(1)
        };
        SimulationConfig {
            length,
            dispersion,
            equation,
            kernel,
            modes,
            first_mode: 1,
            dt,
            history_steps,
            steps,
            initial,
            energy_stride: 100,
            memory_rule: MemoryRule::default(),
            memory_sum: MemorySumStrategy::default(),
            quadrature_points: DEFAULT_QUADRATURE_POINTS.max(4 * modes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, what: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.length, "domain length")?;
        positive(self.dispersion, "dispersion coefficient")?;
        positive(self.dt, "time step")?;
        if self.modes == 0 {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.first_mode == 0 {
            return Err(Error::Config("mode indices start at 1".into()));
        }
        if self.energy_stride == 0 {
            return Err(Error::Config("energy stride must be at least 1".into()));
        }
        let memoryless = self.equation == EquationVariant::NoMemory;
        if memoryless != self.kernel.is_none() {
            return Err(Error::Config(format!(
                "equation `{}` is incompatible with a `{}` kernel",
                self.equation,
                self.kernel.family()
            )));
        }
        if !memoryless && self.history_steps == 0 {
            return Err(Error::Config(
                "memory window must span at least one step".into(),
            ));
        }
        Ok(())
    }

    /// `4π²k²/L²`.
    pub fn eigenvalue(&self, k: usize) -> T {
        let kk = T::TAU() * T::from_count(k) / self.length;
        kk * kk
    }

    /// Weight of the memory term for mode `k`.
    pub fn memory_coupling(&self, k: usize) -> T {
        match self.equation {
            EquationVariant::LaplacianMemory => self.eigenvalue(k),
            EquationVariant::ZerothOrderMemory => T::one(),
            EquationVariant::NoMemory => T::zero(),
        }
    }

    /// `δt · N_hist`.
    pub fn memory_horizon(&self) -> T {
        self.dt * T::from_count(self.history_steps)
    }

    pub fn mode_indices(&self) -> std::ops::Range<usize> {
        self.first_mode..self.first_mode + self.modes
    }
}

/// Kernel samples on the time grid, cached for a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryWeights<T> {
    pub dt: T,
    /// `f^m = f(mδt)`, `m = 0..=N_hist`.
    pub f: Vec<T>,
    /// `g^m = g(mδt)`, `m = 0..=N_hist`.
    pub g: Vec<T>,
    /// Convolution weights: `δt f^m`, with the `m = 0` entry halved under
    /// [`MemoryRule::Trapezoid`].
    pub scheme: Vec<T>,
    /// `e^{-q δt}` when the recursive tail update applies.
    pub decay_ratio: Option<T>,
}

impl<T: Real> MemoryWeights<T> {
    pub fn history_steps(&self) -> usize {
        self.f.len() - 1
    }
}

pub fn precompute_weights<T: Real>(config: &SimulationConfig<T>) -> Result<MemoryWeights<T>> {
    let n = config.history_steps;
    let times = (0..=n).map(|m| config.dt * T::from_count(m));
    let f = times
        .clone()
        .map(|s| config.kernel.eval_f(s))
        .collect::<Result<Vec<_>>>()?;
    let g = times
        .map(|s| config.kernel.eval_g(s))
        .collect::<Result<Vec<_>>>()?;
    let mut scheme: Vec<T> = f.iter().map(|&fm| config.dt * fm).collect();
    if config.memory_rule == MemoryRule::Trapezoid {
        scheme[0] /= T::lit(2.0);
    }
    let decay_ratio = match (config.kernel, config.memory_sum) {
        (KernelSpec::Exponential { rate, .. }, MemorySumStrategy::Auto) if n >= 1 => {
            Some((-rate * config.dt).exp())
        }
        _ => None,
    };
    Ok(MemoryWeights {
        dt: config.dt,
        f,
        g,
        scheme,
        decay_ratio,
    })
}

/// Amplitudes at the current step plus a per-mode ring of past raw values
/// `B^{n-j}`, `j = 0..=N_hist+1`, reaching into the prescribed history.
///
/// Midpoints `B^{ℓ+1/2} = (B^{ℓ+1} + B^ℓ)/2` are formed on the fly; for the
/// pre-run history this is `(B^{0,j} + B^{0,j+1})/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState<T> {
    step: usize,
    first_mode: usize,
    depth: usize,
    head: usize,
    ring: Vec<Cplx<T>>,
    /// Cached `Σ_{m≥1} w^m B^{n-m+1/2}` per mode, for exponential kernels.
    tails: Option<Vec<Cplx<T>>>,
}

impl<T: Real> ModalState<T> {
    /// Builds a state at step 0 from per-mode backward histories:
    /// `history[i][j] = B_{first_mode+i}^{-j}` for `j = 0..=history_steps+1`.
    pub fn from_history(first_mode: usize, history: Vec<Vec<Cplx<T>>>) -> Result<Self> {
        let Some(depth) = history.first().map(Vec::len) else {
            return Err(Error::StateConsistency(
                "at least one mode is required".into(),
            ));
        };
        if depth < 2 {
            return Err(Error::StateConsistency(
                "history needs at least two samples".into(),
            ));
        }
        if first_mode == 0 {
            return Err(Error::StateConsistency("mode indices start at 1".into()));
        }
        let mut ring = Vec::with_capacity(depth * history.len());
        for (i, mode) in history.into_iter().enumerate() {
            if mode.len() != depth {
                return Err(Error::StateConsistency(format!(
                    "mode {} history has {} samples, expected {depth}",
                    first_mode + i,
                    mode.len()
                )));
            }
            if mode.iter().any(|z| !is_finite_c(*z)) {
                return Err(Error::StateConsistency(format!(
                    "mode {} history is not finite",
                    first_mode + i
                )));
            }
            // oldest first, newest at the head (last slot)
            ring.extend(mode.into_iter().rev());
        }
        Ok(ModalState {
            step: 0,
            first_mode,
            depth,
            head: depth - 1,
            ring,
            tails: None,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn mode_count(&self) -> usize {
        self.ring.len() / self.depth
    }

    pub fn first_mode(&self) -> usize {
        self.first_mode
    }

    pub fn modes(&self) -> std::ops::Range<usize> {
        self.first_mode..self.first_mode + self.mode_count()
    }

    /// Longest memory window this state can serve.
    pub fn history_steps(&self) -> usize {
        self.depth - 2
    }

    /// Past values of mode slot `i`, newest first: `B^n, B^{n-1}, …`.
    pub fn history(&self, i: usize) -> impl Iterator<Item = Cplx<T>> + '_ {
        newest_first(self.chunk(i), self.head)
    }

    /// `B^{n-j}` of mode slot `i`.
    pub fn past(&self, i: usize, j: usize) -> Cplx<T> {
        assert!(
            j < self.depth,
            "history index {j} beyond depth {}",
            self.depth
        );
        ring_at(self.chunk(i), self.head, j)
    }

    pub fn current(&self, i: usize) -> Cplx<T> {
        self.chunk(i)[self.head]
    }

    pub fn amplitudes(&self) -> Vec<Cplx<T>> {
        (0..self.mode_count()).map(|i| self.current(i)).collect()
    }

    pub fn coefficients(&self, length: T) -> Result<ModalCoefficients<T>> {
        ModalCoefficients::with_first_mode(self.amplitudes(), length, self.first_mode)
    }

    /// Cached exponential-kernel tails, if the fast path is active.
    pub fn memory_tails(&self) -> Option<&[Cplx<T>]> {
        self.tails.as_deref()
    }

    fn chunk(&self, i: usize) -> &[Cplx<T>] {
        &self.ring[i * self.depth..(i + 1) * self.depth]
    }

    fn is_finite(&self) -> bool {
        (0..self.mode_count()).all(|i| is_finite_c(self.current(i)))
    }
}

fn newest_first<T: Copy>(chunk: &[T], head: usize) -> impl Iterator<Item = T> + '_ {
    chunk[..=head]
        .iter()
        .rev()
        .chain(chunk[head + 1..].iter().rev())
        .copied()
}

#[inline]
fn ring_at<T: Copy>(chunk: &[T], head: usize, j: usize) -> T {
    chunk[(head + chunk.len() - j) % chunk.len()]
}

/// `Σ_{m=1}^{N} w^m B^{n-m+1/2}` over a newest-first history.
fn direct_tail<T: Real>(history: impl Iterator<Item = Cplx<T>>, scheme: &[T]) -> Cplx<T> {
    let half = T::lit(0.5);
    let mut acc = Cplx::new(T::zero(), T::zero());
    let mut newer: Option<Cplx<T>> = None;
    let mut weights = scheme.iter().skip(1);
    for value in history {
        if let Some(prev) = newer {
            let Some(&w) = weights.next() else { break };
            acc += (prev + value) * (w * half);
        }
        newer = Some(value);
    }
    acc
}

/// Convolution sum `w⁰ (candidate + B^n)/2 + Σ_{m=1}^{N} w^m B^{n-m+1/2}` for
/// mode slot `i`, evaluated directly.
pub fn memory_sum<T: Real>(
    state: &ModalState<T>,
    i: usize,
    weights: &MemoryWeights<T>,
    candidate: Cplx<T>,
) -> Cplx<T> {
    if weights.scheme.iter().all(|w| *w == T::zero()) {
        return Cplx::new(T::zero(), T::zero());
    }
    let midpoint = (candidate + state.current(i)) * T::lit(0.5);
    midpoint * weights.scheme[0] + direct_tail(state.history(i), &weights.scheme)
}

/// Recursion for exponential weights `w^{m+1} = r·w^m`:
/// `S^{n+1} = w¹ b_n + r (S^n − w^N b_{n−N})`, where `b_j = B^{j+1/2}`.
pub fn advance_exponential_tail<T: Real>(
    tail: Cplx<T>,
    ratio: T,
    first_weight: T,
    last_weight: T,
    newest_midpoint: Cplx<T>,
    dropped_midpoint: Cplx<T>,
) -> Cplx<T> {
    newest_midpoint * first_weight + (tail - dropped_midpoint * last_weight) * ratio
}

/// One mode's ring and cached tail during a step.
type ModeSlot<'a, T> = (&'a mut [Cplx<T>], Option<&'a mut Cplx<T>>);

/// A validated configuration with its cached weights.
#[derive(Debug, Clone)]
pub struct Solver<T> {
    config: SimulationConfig<T>,
    weights: MemoryWeights<T>,
}

struct ModeCoefficients<T> {
    mode: usize,
    /// `a μ δt / 2`.
    dispersive: T,
    /// `c δt`.
    coupling_dt: T,
}

impl<T: Real> Solver<T> {
    /// Validates the configuration and rejects kernels that fail the
    /// structural hypotheses.
    pub fn new(config: SimulationConfig<T>) -> Result<Self> {
        config.validate()?;
        let report = check_hypotheses(&config.kernel);
        if !report.all_hold() {
            return Err(Error::Config(format!(
                "kernel hypotheses violated: {}",
                report.violations.join("; ")
            )));
        }
        let weights = precompute_weights(&config)?;
        Ok(Solver { config, weights })
    }

    pub fn config(&self) -> &SimulationConfig<T> {
        &self.config
    }

    pub fn weights(&self) -> &MemoryWeights<T> {
        &self.weights
    }

    fn uses_fast_path(&self) -> bool {
        self.weights.decay_ratio.is_some() && self.config.equation != EquationVariant::NoMemory
    }

    /// Projects the prescribed history `B^{-j} = B^{0,j}` for
    /// `j = 0..=N_hist+1` and primes the cached tails.
    pub fn initial_state(&self) -> Result<ModalState<T>> {
        let cfg = &self.config;
        let depth = cfg.history_steps + 2;
        let project = |j: usize| {
            cfg.initial
                .project_at(
                    cfg.dt * T::from_count(j),
                    cfg.first_mode,
                    cfg.modes,
                    cfg.length,
                    cfg.quadrature_points,
                )
                .map(ModalCoefficients::into_values)
        };
        let samples: Vec<Vec<Cplx<T>>> = if cfg.initial.is_constant() {
            let first = project(0)?;
            vec![first; depth]
        } else {
            (0..depth).map(project).collect::<Result<_>>()?
        };
        let history = (0..cfg.modes)
            .map(|i| samples.iter().map(|s| s[i]).collect())
            .collect();
        let mut state = ModalState::from_history(cfg.first_mode, history)?;
        self.prime(&mut state);
        Ok(state)
    }

    /// Installs the cached tails when the fast path applies.
    fn prime(&self, state: &mut ModalState<T>) {
        if self.uses_fast_path() && state.tails.is_none() {
            let tails = (0..state.mode_count())
                .map(|i| direct_tail(state.history(i), &self.weights.scheme))
                .collect();
            state.tails = Some(tails);
        }
    }

    fn mode_coefficients(&self, k: usize) -> ModeCoefficients<T> {
        let cfg = &self.config;
        ModeCoefficients {
            mode: k,
            dispersive: cfg.dispersion * cfg.eigenvalue(k) * cfg.dt / T::lit(2.0),
            coupling_dt: cfg.memory_coupling(k) * cfg.dt,
        }
    }

    fn check_state(&self, state: &ModalState<T>) -> Result<()> {
        if state.history_steps() < self.config.history_steps {
            return Err(Error::StateConsistency(format!(
                "state holds {} history steps, the memory window needs {}",
                state.history_steps(),
                self.config.history_steps
            )));
        }
        Ok(())
    }

    /// Advances every mode by one step.
    pub fn step(&self, state: &mut ModalState<T>) -> Result<()> {
        self.check_state(state)?;
        self.prime(state);
        let depth = state.depth;
        let head = state.head;
        let next = (head + 1) % depth;
        let first_mode = state.first_mode;
        let count = state.mode_count();
        let mut tails = state.tails.take();
        let tail_slots: Vec<Option<&mut Cplx<T>>> = match tails.as_mut() {
            Some(t) => t.iter_mut().map(Some).collect(),
            None => (0..count).map(|_| None).collect(),
        };
        let advance = |(i, (chunk, tail)): (usize, ModeSlot<'_, T>)| {
            let coeffs = self.mode_coefficients(first_mode + i);
            let value = self.advance_mode(&coeffs, chunk, head, tail)?;
            chunk[next] = value;
            Ok(())
        };
        let result: Result<()> = if count * depth >= PARALLEL_WORK_THRESHOLD {
            state
                .ring
                .par_chunks_mut(depth)
                .zip(tail_slots)
                .enumerate()
                .try_for_each(advance)
        } else {
            state
                .ring
                .chunks_mut(depth)
                .zip(tail_slots)
                .enumerate()
                .try_for_each(advance)
        };
        state.tails = tails;
        result?;
        state.head = next;
        state.step += 1;
        Ok(())
    }

    /// Solves one mode's update; returns `B^{n+1}` and advances its tail.
    fn advance_mode(
        &self,
        coeffs: &ModeCoefficients<T>,
        chunk: &[Cplx<T>],
        head: usize,
        tail: Option<&mut Cplx<T>>,
    ) -> Result<Cplx<T>> {
        let w = &self.weights.scheme;
        let one = T::one();
        let half = T::lit(0.5);
        let current = chunk[head];
        let memory = coeffs.coupling_dt != T::zero();
        let sum = match (&tail, memory) {
            (_, false) => Cplx::new(T::zero(), T::zero()),
            (Some(cached), true) => **cached,
            (None, true) => direct_tail(newest_first(chunk, head), w),
        };
        // (B' - B) + i aμδt B^{n+1/2} + cδt (w⁰ B^{n+1/2} + S) = 0
        let damping = coeffs.coupling_dt * w[0] * half;
        let lhs = Cplx::new(one + damping, coeffs.dispersive);
        let rhs_factor = Cplx::new(one - damping, -coeffs.dispersive);
        if !(lhs.norm() > T::zero()) || !is_finite_c(lhs) {
            return Err(Error::Degenerate {
                mode: coeffs.mode,
                detail: format!("update denominator {lhs}"),
            });
        }
        let next = (current * rhs_factor - sum * coeffs.coupling_dt) / lhs;

        #[cfg(debug_assertions)]
        {
            let mid = (next + current) * half;
            let residual = (next - current)
                + mid * Cplx::new(T::zero(), coeffs.dispersive * T::lit(2.0))
                + (mid * w[0] + sum) * coeffs.coupling_dt;
            let scale = (current.norm() + next.norm())
                * (one + coeffs.dispersive * T::lit(2.0) + coeffs.coupling_dt * w[0])
                + sum.norm() * coeffs.coupling_dt;
            let tolerance = T::lit(RESIDUAL_TOLERANCE).max(T::epsilon() * T::lit(64.0));
            debug_assert!(
                residual.norm() <= tolerance * scale,
                "scheme residual {} exceeds bound for mode {}",
                residual.norm(),
                coeffs.mode
            );
        }

        if let (Some(cached), Some(ratio)) = (tail, self.weights.decay_ratio) {
            if memory {
                let n = self.config.history_steps;
                let dropped = (ring_at(chunk, head, n - 1) + ring_at(chunk, head, n)) * half;
                let newest = (next + current) * half;
                *cached = advance_exponential_tail(*cached, ratio, w[1], w[n], newest, dropped);
            }
        }
        Ok(next)
    }

    /// Direct convolution sum for mode slot `i` with candidate `B^{n+1}`.
    pub fn memory_sum(&self, state: &ModalState<T>, i: usize, candidate: Cplx<T>) -> Cplx<T> {
        memory_sum(state, i, &self.weights, candidate)
    }

    fn sample(&self, state: &ModalState<T>) -> Result<EnergySample<T>> {
        let energy = discrete_energy(state, &self.config, &self.weights)?;
        let l2 = parseval_l2(&state.coefficients(self.config.length)?);
        Ok(EnergySample {
            t: self.config.dt * T::from_count(state.step),
            energy,
            l2,
        })
    }

    /// Runs the configured number of steps, sampling energies every
    /// `energy_stride` steps (step 0 included).
    pub fn run(&self) -> Result<(ModalState<T>, EnergyTrace<T>)> {
        self.run_observed(|_, _| Ok(()))
    }

    /// As [`Solver::run`], calling `observer` at every energy sample.
    pub fn run_observed<F>(&self, mut observer: F) -> Result<(ModalState<T>, EnergyTrace<T>)>
    where
        F: FnMut(&ModalState<T>, &EnergySample<T>) -> Result<()>,
    {
        let mut state = self.initial_state()?;
        let mut trace = EnergyTrace::new(TraceMeta::from_config(&self.config));
        let first = self.sample(&state)?;
        observer(&state, &first)?;
        trace.push(first)?;
        for n in 1..=self.config.steps {
            self.step(&mut state)?;
            let sampling = n % self.config.energy_stride == 0;
            if (n % DIVERGENCE_CHECK_INTERVAL == 0 || sampling || n == self.config.steps)
                && !state.is_finite()
            {
                return Err(Error::Divergence { step: n });
            }
            if sampling {
                let sample = self.sample(&state)?;
                observer(&state, &sample)?;
                trace.push(sample)?;
            }
        }
        Ok((state, trace))
    }
}
