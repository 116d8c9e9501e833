//! Discrete energies, dissipativity checks, decay fits and envelope
//! comparisons.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::kernel::{DecayEnvelope, GrowthBranch};
use crate::scalar::{Cplx, Real};
use crate::solver::{MemoryWeights, ModalState, SimulationConfig};

/// Fraction of the trace (from the end) fitted by default.
pub const DEFAULT_FIT_FRACTION: f64 = 0.6;

/// Default envelope anchor as a fraction of the run.
pub const DEFAULT_ANCHOR_FRACTION: f64 = 0.1;

/// Minimum samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

pub const TRACE_HEADER: [&str; 3] = ["t", "E", "l2"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample<T> {
    pub t: T,
    /// Discrete energy of the equation variant.
    pub energy: T,
    /// `‖y‖²` by Parseval.
    pub l2: T,
}

/// Identifiers of the run that produced a trace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceMeta {
    pub equation: String,
    pub kernel: String,
}

impl TraceMeta {
    pub fn from_config<T: Real>(config: &SimulationConfig<T>) -> Self {
        TraceMeta {
            equation: config.equation.name().to_string(),
            kernel: config.kernel.family().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace<T> {
    rows: Vec<EnergySample<T>>,
    pub meta: TraceMeta,
}

impl<T: Real> EnergyTrace<T> {
    pub fn new(meta: TraceMeta) -> Self {
        EnergyTrace {
            rows: Vec::new(),
            meta,
        }
    }

    pub fn from_samples(samples: impl IntoIterator<Item = EnergySample<T>>) -> Result<Self> {
        let mut trace = EnergyTrace::new(TraceMeta::default());
        for sample in samples {
            trace.push(sample)?;
        }
        Ok(trace)
    }

    /// Appends a sample; times must increase strictly and energies be
    /// non-negative.
    pub fn push(&mut self, sample: EnergySample<T>) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(sample.t > last.t) {
                return Err(Error::Domain(format!(
                    "trace times must increase: {} after {}",
                    sample.t, last.t
                )));
            }
        }
        if !(sample.energy >= T::zero() && sample.l2 >= T::zero()) {
            return Err(Error::Domain(format!(
                "negative or undefined energy at t={}",
                sample.t
            )));
        }
        self.rows.push(sample);
        Ok(())
    }

    pub fn rows(&self) -> &[EnergySample<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Self {
        EnergyTrace {
            rows: self
                .rows
                .iter()
                .map(|r| EnergySample {
                    t: r.t,
                    energy: r.energy * factor,
                    l2: r.l2 * factor,
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// Largest `|E(t) − E(t₀)| / E(t₀)` over the trace.
    pub fn max_relative_drift(&self) -> T {
        let Some(first) = self.rows.first() else {
            return T::zero();
        };
        self.rows.iter().fold(T::zero(), |acc, r| {
            acc.max((r.energy - first.energy).abs() / first.energy)
        })
    }

    /// Linear interpolation of the energy at `t`.
    pub fn energy_at(&self, t: T) -> Result<T> {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return Err(Error::Domain("empty trace".into()));
        };
        if !(t >= first.t && t <= last.t) {
            return Err(Error::Domain(format!(
                "time {t} outside trace [{}, {}]",
                first.t, last.t
            )));
        }
        let upper = self.rows.partition_point(|r| r.t < t);
        if upper == 0 {
            return Ok(first.energy);
        }
        let (a, b) = (self.rows[upper - 1], self.rows[upper]);
        let w = (t - a.t) / (b.t - a.t);
        Ok(a.energy * (T::one() - w) + b.energy * w)
    }

    /// Time `fraction` of the way through the trace.
    pub fn time_at_fraction(&self, fraction: T) -> Result<T> {
        let (Some(first), Some(last)) = (self.rows.first(), self.rows.last()) else {
            return Err(Error::Domain("empty trace".into()));
        };
        Ok(first.t + (last.t - first.t) * fraction)
    }
}

impl EnergyTrace<f64> {
    /// CSV with header `t,E,l2` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(TRACE_HEADER)?;
        for row in &self.rows {
            out.write_record([
                format!("{:.16e}", row.t),
                format!("{:.16e}", row.energy),
                format!("{:.16e}", row.l2),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, String> {
        let mut input = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = input.headers().map_err(|e| e.to_string())?.clone();
        if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(format!(
                "expected header `t,E,l2`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ));
        }
        let mut trace = EnergyTrace::new(TraceMeta::default());
        for (i, record) in input.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let parse = |j: usize| -> Result<f64, String> {
                record.get(j).and_then(|v| v.parse().ok()).ok_or_else(|| {
                    format!("row {}: column {} is not a number", i + 2, TRACE_HEADER[j])
                })
            };
            trace
                .push(EnergySample {
                    t: parse(0)?,
                    energy: parse(1)?,
                    l2: parse(2)?,
                })
                .map_err(|e| format!("row {}: {e}", i + 2))?;
        }
        Ok(trace)
    }
}

fn check_window<T: Real>(state: &ModalState<T>, weights: &MemoryWeights<T>) -> Result<()> {
    if state.history_steps() < weights.history_steps() {
        return Err(Error::StateConsistency(format!(
            "state holds {} history steps, the energy needs {}",
            state.history_steps(),
            weights.history_steps()
        )));
    }
    Ok(())
}

/// Discrete energy
///
/// ```text
/// E = (L/4) [ Σ_k |B_k^n|² + Σ_k Σ_{m=1}^{N} δt w_k g^m |η_k^{m,n}|² ],
/// η_k^{m,n} = Σ_{ℓ=n-m}^{n} δt B_k^ℓ,
/// ```
///
/// with `w_k = 4π²k²/L²` for Laplacian memory and `w_k = 1` for zeroth-order
/// memory. `η` is accumulated newest-first, so no long-run prefix sums are
/// differenced.
pub fn discrete_energy<T: Real>(
    state: &ModalState<T>,
    config: &SimulationConfig<T>,
    weights: &MemoryWeights<T>,
) -> Result<T> {
    check_window(state, weights)?;
    let dt = weights.dt;
    let n = weights.history_steps();
    let mut amplitude = T::zero();
    let mut memory = T::zero();
    for (i, k) in state.modes().enumerate() {
        amplitude += state.current(i).norm_sqr();
        let wk = config.memory_coupling(k);
        if wk == T::zero() || n == 0 {
            continue;
        }
        let mut eta = Cplx::new(T::zero(), T::zero());
        let mut mode_sum = T::zero();
        for (m, value) in state.history(i).take(n + 1).enumerate() {
            eta += value * dt;
            if m >= 1 {
                mode_sum += weights.g[m] * eta.norm_sqr();
            }
        }
        memory += wk * dt * mode_sum;
    }
    Ok(config.length / T::lit(4.0) * (amplitude + memory))
}

/// Energy for which the time-stepping scheme is exactly dissipative:
///
/// ```text
/// (L/4) [ Σ_k |B_k^n|² + Σ_k c_k Σ_{m=0}^{N} (f^m − f^{m+1}) |H_k^m|² ],
/// H_k^m = Σ_{j=0}^{m} δt B_k^{n-j-1/2},   f^{N+1} = 0.
/// ```
///
/// Summation by parts turns the scheme's convolution into
/// `Σ (f^m − f^{m+1}) H^m`; for convex `f` this functional decreases step by
/// step up to the truncation of the window.
pub fn scheme_energy<T: Real>(
    state: &ModalState<T>,
    config: &SimulationConfig<T>,
    weights: &MemoryWeights<T>,
) -> Result<T> {
    check_window(state, weights)?;
    let dt = weights.dt;
    let n = weights.history_steps();
    let half = T::lit(0.5);
    let mut amplitude = T::zero();
    let mut memory = T::zero();
    for (i, k) in state.modes().enumerate() {
        amplitude += state.current(i).norm_sqr();
        let ck = config.memory_coupling(k);
        if ck == T::zero() {
            continue;
        }
        let mut h = Cplx::new(T::zero(), T::zero());
        let mut mode_sum = T::zero();
        for m in 0..=n {
            h += (state.past(i, m) + state.past(i, m + 1)) * (half * dt);
            let next_f = weights.f.get(m + 1).copied().unwrap_or_else(T::zero);
            mode_sum += (weights.f[m] - next_f) * h.norm_sqr();
        }
        memory += ck * mode_sum;
    }
    Ok(config.length / T::lit(4.0) * (amplitude + memory))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DissipativityCheck {
    pub passed: bool,
    /// Index of the first sample exceeding its predecessor beyond tolerance.
    pub first_violation: Option<usize>,
}

/// Passes iff `E(t_{j+1}) ≤ E(t_j)(1 + tol)` for all consecutive samples.
pub fn check_dissipativity<T: Real>(trace: &EnergyTrace<T>, tol: T) -> DissipativityCheck {
    let first_violation = trace
        .rows
        .windows(2)
        .position(|w| w[1].energy > w[0].energy * (T::one() + tol))
        .map(|j| j + 1);
    DissipativityCheck {
        passed: first_violation.is_none(),
        first_violation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    /// `ln E` linear in `t`.
    Exponential,
    /// `ln E` linear in `ln t`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow<T> {
    /// The last `fraction` of the trace's time span.
    Tail(T),
    Interval(T, T),
}

impl<T: Real> Default for FitWindow<T> {
    fn default() -> Self {
        FitWindow::Tail(T::lit(DEFAULT_FIT_FRACTION))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel<T> {
    Exponential { rate: T },
    Power { exponent: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub model: DecayModel<T>,
    pub r2: T,
    pub window: (T, T),
}

impl<T: Real> DecayFit<T> {
    /// The fitted rate or exponent.
    pub fn value(&self) -> T {
        match self.model {
            DecayModel::Exponential { rate } => rate,
            DecayModel::Power { exponent } => exponent,
        }
    }
}

/// Least-squares line through `(t, ln E)` or `(ln t, ln E)` on the window.
pub fn fit_decay<T: Real>(
    trace: &EnergyTrace<T>,
    kind: FitKind,
    window: FitWindow<T>,
) -> Result<DecayFit<T>> {
    let (Some(first), Some(last)) = (trace.rows.first(), trace.rows.last()) else {
        return Err(Error::Domain("cannot fit an empty trace".into()));
    };
    let (lo, hi) = match window {
        FitWindow::Tail(fraction) => {
            if !(fraction > T::zero() && fraction <= T::one()) {
                return Err(Error::Domain(format!(
                    "fit fraction {fraction} outside (0, 1]"
                )));
            }
            (last.t - (last.t - first.t) * fraction, last.t)
        }
        FitWindow::Interval(lo, hi) => (lo, hi),
    };
    let rows: Vec<_> = trace
        .rows
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi)
        .collect();
    if rows.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] holds {} samples, need {MIN_FIT_SAMPLES}",
            rows.len()
        )));
    }
    let mut points = Vec::with_capacity(rows.len());
    for r in &rows {
        if !(r.energy > T::zero()) {
            return Err(Error::Domain(format!("non-positive energy at t={}", r.t)));
        }
        let x = match kind {
            FitKind::Exponential => r.t,
            FitKind::Power => {
                if !(r.t > T::zero()) {
                    return Err(Error::Domain(format!("power fit needs t > 0, got {}", r.t)));
                }
                r.t.ln()
            }
        };
        points.push((x, r.energy.ln()));
    }
    let count = T::from_count(points.len());
    let mean_x = points.iter().fold(T::zero(), |a, p| a + p.0) / count;
    let mean_y = points.iter().fold(T::zero(), |a, p| a + p.1) / count;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in &points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::Domain("fit window has no spread in time".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res = points.iter().fold(T::zero(), |a, &(x, y)| {
        let e = y - (intercept + slope * x);
        a + e * e
    });
    let r2 = if syy > T::zero() {
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    } else {
        T::one()
    };
    let model = match kind {
        FitKind::Exponential => DecayModel::Exponential { rate: -slope },
        FitKind::Power => DecayModel::Power { exponent: -slope },
    };
    Ok(DecayFit {
        model,
        r2,
        window: (rows[0].t, rows[rows.len() - 1].t),
    })
}

/// Envelope of the given order passing through the trace's energy at
/// `t_anchor`.
pub fn calibrate_envelope<T: Real>(
    trace: &EnergyTrace<T>,
    order: u32,
    branch: &GrowthBranch<T>,
    t_anchor: T,
) -> Result<DecayEnvelope<T>> {
    let energy = trace.energy_at(t_anchor)?;
    DecayEnvelope::calibrated(order, branch, t_anchor, energy)
}

/// Largest `E(t) / envelope(t)` over samples with `t ≥ t_anchor`.
pub fn compare_envelope<T: Real>(
    trace: &EnergyTrace<T>,
    envelope: &DecayEnvelope<T>,
    t_anchor: T,
) -> Result<T> {
    let (Some(first), Some(last)) = (trace.rows.first(), trace.rows.last()) else {
        return Err(Error::Domain("empty trace".into()));
    };
    if !(t_anchor > T::zero() && t_anchor >= first.t && t_anchor <= last.t) {
        return Err(Error::Domain(format!(
            "anchor {t_anchor} outside trace [{}, {}]",
            first.t, last.t
        )));
    }
    let mut worst = T::zero();
    for row in trace.rows.iter().filter(|r| r.t >= t_anchor) {
        worst = worst.max(row.energy / envelope.value(row.t)?);
    }
    Ok(worst)
}
