//! Sine-series representation of profiles on `(0, L)`.
//!
//! The modal basis is `sin(2kπx/L)`, `k = first_mode, first_mode+1, …`.
//! Projection uses the composite trapezoid rule on a uniform grid; the
//! endpoint samples vanish because every basis function does.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{is_finite_c, Cplx, Real};

/// Complex-valued profile `x ↦ y(x)`.
pub type Profile<T> = Arc<dyn Fn(T) -> Cplx<T> + Send + Sync>;

/// Complex-valued history `(x, s) ↦ y(x, -s)`, `s ≥ 0`.
pub type HistoryProfile<T> = Arc<dyn Fn(T, T) -> Cplx<T> + Send + Sync>;

/// Minimum quadrature points per mode accepted by [`project`].
pub const POINTS_PER_MODE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients<T> {
    values: Vec<Cplx<T>>,
    length: T,
    first_mode: usize,
}

impl<T: Real> ModalCoefficients<T> {
    pub fn new(values: Vec<Cplx<T>>, length: T) -> Result<Self> {
        Self::with_first_mode(values, length, 1)
    }

    /// Coefficients for the consecutive modes `first_mode, first_mode+1, …`.
    pub fn with_first_mode(values: Vec<Cplx<T>>, length: T, first_mode: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("at least one mode is required".into()));
        }
        if first_mode == 0 {
            return Err(Error::Domain("mode indices start at 1".into()));
        }
        if !(length > T::zero() && length.is_finite()) {
            return Err(Error::Domain(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if let Some(bad) = values.iter().position(|z| !is_finite_c(*z)) {
            return Err(Error::Domain(format!("coefficient {bad} is not finite")));
        }
        Ok(ModalCoefficients {
            values,
            length,
            first_mode,
        })
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Cplx<T>> {
        self.values
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn first_mode(&self) -> usize {
        self.first_mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mode indices `k` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = usize> {
        self.first_mode..self.first_mode + self.values.len()
    }
}

#[inline]
fn basis<T: Real>(k: usize, x: T, length: T) -> T {
    (T::TAU() * T::from_count(k) * x / length).sin()
}

/// Projects `profile` onto modes `1..=modes`.
pub fn project<T: Real>(
    profile: &(dyn Fn(T) -> Cplx<T> + Sync),
    modes: usize,
    length: T,
    points: usize,
) -> Result<ModalCoefficients<T>> {
    project_modes(profile, 1, modes, length, points)
}

/// Projects `profile` onto modes `first_mode..first_mode+modes`:
/// `B_k = (2/L)∫₀^L y(x) sin(2kπx/L) dx` by the trapezoid rule on `points`
/// uniform intervals.
pub fn project_modes<T: Real>(
    profile: &(dyn Fn(T) -> Cplx<T> + Sync),
    first_mode: usize,
    modes: usize,
    length: T,
    points: usize,
) -> Result<ModalCoefficients<T>> {
    if modes == 0 || first_mode == 0 {
        return Err(Error::Domain(
            "mode range must be non-empty and start at 1".into(),
        ));
    }
    let highest = first_mode + modes - 1;
    let required = POINTS_PER_MODE * highest;
    if points < required {
        return Err(Error::Resolution {
            points,
            modes: highest,
            required,
        });
    }
    if !(length > T::zero() && length.is_finite()) {
        return Err(Error::Domain(format!(
            "domain length must be positive, got {length}"
        )));
    }
    let h = length / T::from_count(points);
    let grid: Vec<(T, Cplx<T>)> = (1..points)
        .map(|j| {
            let x = h * T::from_count(j);
            (x, profile(x))
        })
        .collect();
    let weight = T::lit(2.0) * h / length;
    let values = (first_mode..=highest)
        .into_par_iter()
        .map(|k| {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for &(x, y) in &grid {
                acc += y * basis(k, x, length);
            }
            acc * weight
        })
        .collect();
    ModalCoefficients::with_first_mode(values, length, first_mode)
}

/// Evaluates `Σ_k B_k sin(2kπx/L)` at each position; exactly zero at the
/// endpoints.
pub fn reconstruct<T: Real>(coeffs: &ModalCoefficients<T>, xs: &[T]) -> Result<Vec<Cplx<T>>> {
    let length = coeffs.length;
    xs.iter()
        .map(|&x| {
            if !(x >= T::zero() && x <= length) {
                return Err(Error::Domain(format!(
                    "sample position {x} outside [0, {length}]"
                )));
            }
            if x == T::zero() || x == length {
                return Ok(Cplx::new(T::zero(), T::zero()));
            }
            Ok(coeffs
                .modes()
                .zip(&coeffs.values)
                .fold(Cplx::new(T::zero(), T::zero()), |acc, (k, b)| {
                    acc + b * basis(k, x, length)
                }))
        })
        .collect()
}

/// `∫₀^L |y|² dx = (L/2) Σ |B_k|²` for the band-limited profile.
pub fn parseval_l2<T: Real>(coeffs: &ModalCoefficients<T>) -> T {
    let sum = coeffs
        .values
        .iter()
        .fold(T::zero(), |acc, b| acc + b.norm_sqr());
    coeffs.length / T::lit(2.0) * sum
}

/// History data `y(x, -s)` for `s ≥ 0`.
#[derive(Clone)]
pub enum InitialHistorySpec<T> {
    /// Constant in time.
    Constant(Profile<T>),
    TimeVarying(HistoryProfile<T>),
}

impl<T> fmt::Debug for InitialHistorySpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialHistorySpec::Constant(_) => f.write_str("Constant(..)"),
            InitialHistorySpec::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

impl<T: Real> InitialHistorySpec<T> {
    pub fn constant(profile: impl Fn(T) -> Cplx<T> + Send + Sync + 'static) -> Self {
        InitialHistorySpec::Constant(Arc::new(profile))
    }

    pub fn time_varying(profile: impl Fn(T, T) -> Cplx<T> + Send + Sync + 'static) -> Self {
        InitialHistorySpec::TimeVarying(Arc::new(profile))
    }

    /// `A e^{iλx} / cosh((x - x₁)/x₀)`, constant in time.
    pub fn soliton(amplitude: T, wavenumber: T, width: T, center: T) -> Self {
        Self::constant(move |x| {
            let envelope = amplitude / ((x - center) / width).cosh();
            Cplx::from_polar(envelope, wavenumber * x)
        })
    }

    /// Soliton with the width tied to amplitude and wavenumber,
    /// `x₀ = 1/(2A√λ)`.
    pub fn soliton_default_width(amplitude: T, wavenumber: T, center: T) -> Self {
        let width = (T::lit(2.0) * amplitude * wavenumber.sqrt()).recip();
        Self::soliton(amplitude, wavenumber, width, center)
    }

    /// Single basis function `amplitude · sin(2kπx/L)`.
    pub fn mode(k: usize, amplitude: Cplx<T>, length: T) -> Self {
        Self::constant(move |x| amplitude * basis(k, x, length))
    }

    pub fn zero() -> Self {
        Self::constant(|_| Cplx::new(T::zero(), T::zero()))
    }

    /// Piecewise-linear interpolation of `(x, y)` samples sorted by `x`;
    /// zero outside the sampled range.
    pub fn tabulated(samples: Vec<(T, Cplx<T>)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain(
                "tabulated profile needs at least two samples".into(),
            ));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain(
                "tabulated positions must be strictly increasing".into(),
            ));
        }
        Ok(Self::constant(move |x| {
            let zero = Cplx::new(T::zero(), T::zero());
            if x < samples[0].0 || x > samples[samples.len() - 1].0 {
                return zero;
            }
            let upper = samples.partition_point(|s| s.0 < x).max(1);
            let (x0, y0) = samples[upper - 1];
            let (x1, y1) = samples[upper];
            let w = (x - x0) / (x1 - x0);
            y0 * (T::one() - w) + y1 * w
        }))
    }

    /// Reads a tabulated profile from CSV rows `x, Re y, Im y`. A header row
    /// is skipped when its first field is not numeric.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Parse {
                path: path.into(),
                detail: e.to_string(),
            })?;
        let mut samples = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: path.into(),
                detail: e.to_string(),
            })?;
            let fields: Vec<Option<f64>> = record.iter().map(|f| f.parse().ok()).collect();
            if line == 0 && fields.first().copied().flatten().is_none() {
                continue;
            }
            match fields.as_slice() {
                [Some(x), Some(re), Some(im), ..] => {
                    samples.push((T::lit(*x), Cplx::new(T::lit(*re), T::lit(*im))))
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.into(),
                        detail: format!("row {} is not `x, re, im`", line + 1),
                    })
                }
            }
        }
        Self::tabulated(samples)
    }

    /// History value `y(x, -s)`.
    pub fn eval(&self, x: T, s: T) -> Cplx<T> {
        match self {
            InitialHistorySpec::Constant(profile) => profile(x),
            InitialHistorySpec::TimeVarying(profile) => profile(x, s),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, InitialHistorySpec::Constant(_))
    }

    /// Projects the history at `s` (time `-s`).
    pub fn project_at(
        &self,
        s: T,
        first_mode: usize,
        modes: usize,
        length: T,
        points: usize,
    ) -> Result<ModalCoefficients<T>> {
        let at = |x: T| self.eval(x, s);
        project_modes(&at, first_mode, modes, length, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn orthogonality_examples() {
        let two = |x: f64| c((std::f64::consts::TAU * x).sin(), 0.0);
        let b = project(&two, 4, 1.0, 64).unwrap();
        let expected = [1.0, 0.0, 0.0, 0.0];
        for (got, want) in b.values().iter().zip(expected) {
            assert!((got - c(want, 0.0)).norm() < 1e-14);
        }
        let four = |x: f64| c((2.0 * std::f64::consts::TAU * x).sin(), 0.0);
        let b = project(&four, 4, 1.0, 64).unwrap();
        assert!((b.values()[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(b.values()[0].norm() < 1e-14);
    }

    #[test]
    fn resolution_guard() {
        let zero = |_: f64| c(0.0, 0.0);
        assert!(matches!(
            project(&zero, 8, 1.0, 31),
            Err(Error::Resolution { required: 32, .. })
        ));
        assert!(project(&zero, 8, 1.0, 32).is_ok());
    }

    #[test]
    fn reconstruct_examples() {
        let coeffs = ModalCoefficients::new(vec![c(1.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        let y = reconstruct(&coeffs, &[0.25, 0.0, 1.0]).unwrap();
        assert!((y[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(y[1], c(0.0, 0.0));
        assert_eq!(y[2], c(0.0, 0.0));
        assert!(reconstruct(&coeffs, &[1.5]).is_err());
        assert!(reconstruct(&coeffs, &[-0.1]).is_err());
    }

    #[test]
    fn parseval_examples() {
        let one = ModalCoefficients::new(vec![c(1.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        assert_eq!(parseval_l2(&one), 0.5);
        let zero = ModalCoefficients::new(vec![c(0.0, 0.0); 3], 2.0).unwrap();
        assert_eq!(parseval_l2(&zero), 0.0);
    }

    #[test]
    fn rejects_non_finite_coefficients() {
        assert!(ModalCoefficients::new(vec![c(f64::NAN, 0.0)], 1.0).is_err());
        assert!(ModalCoefficients::<f64>::new(vec![], 1.0).is_err());
    }

    #[test]
    fn shifted_mode_range() {
        let third = InitialHistorySpec::mode(3, c(0.5, -2.0), 2.0);
        let b = third.project_at(0.0, 3, 2, 2.0, 64).unwrap();
        assert_eq!(b.modes().collect::<Vec<_>>(), vec![3, 4]);
        assert!((b.values()[0] - c(0.5, -2.0)).norm() < 1e-13);
        assert!(b.values()[1].norm() < 1e-13);
    }

    #[test]
    fn tabulated_interpolates() {
        let spec = InitialHistorySpec::tabulated(vec![
            (0.0, c(0.0, 0.0)),
            (0.5, c(1.0, 2.0)),
            (1.0, c(0.0, 0.0)),
        ])
        .unwrap();
        assert!((spec.eval(0.25, 0.0) - c(0.5, 1.0)).norm() < 1e-15);
        assert!((spec.eval(0.75, 3.0) - c(0.5, 1.0)).norm() < 1e-15);
        assert!(
            InitialHistorySpec::tabulated(vec![(0.0, c(0.0, 0.0)), (0.0, c(1.0, 0.0))]).is_err()
        );
    }

    #[test]
    fn soliton_profile() {
        let spec = InitialHistorySpec::<f64>::soliton_default_width(4.0, 7.0, 0.4);
        let peak = spec.eval(0.4, 0.0);
        assert!((peak.norm() - 4.0).abs() < 1e-14);
        assert!((peak.arg() - 2.8).abs() < 1e-14);
    }

    #[test]
    fn single_precision_projection() {
        let two = |x: f32| Cplx::new((std::f32::consts::TAU * x).sin(), 0.0);
        let b = project(&two, 2, 1.0f32, 64).unwrap();
        assert!((b.values()[0].re - 1.0).abs() < 1e-5);
    }
}
