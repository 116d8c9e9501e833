//! Memory kernels and their calculus.
//!
//! A kernel is described by its relaxation density `g`, with the relaxation
//! function `f(s) = ∫_s^∞ g` (so `f' = -g`, `f(0)` is the total mass of `g`
//! and `f → 0` at infinity). Two families are supported, an exponential
//! `g(s) = d·e^{-q s}` and an algebraic `g(s) = d·(1+s)^{-q}`, plus the
//! memoryless kernel `g ≡ 0`.
//!
//! [`check_hypotheses`] certifies the structural assumptions the decay theory
//! needs (monotone `f`, a lower bound `g' ≥ -β₀ g`, and either `g' ≤ -α₀ g`
//! or a convex growth function `G(s) = s^p`), and [`DecayEnvelope`] evaluates
//! the resulting energy envelope `α·Gₙ(α/t)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative margin applied above the critical convex exponent `(q+1)/(q-3)`.
pub const CONVEX_EXPONENT_MARGIN: f64 = 1.01;

/// Number of log-spaced audit points used by [`check_hypotheses`].
pub const AUDIT_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    /// `g(s) = amplitude · e^{-rate·s}`.
    Exponential { amplitude: T, rate: T },
    /// `g(s) = amplitude · (1+s)^{-exponent}`.
    Polynomial { amplitude: T, exponent: T },
    /// No memory.
    None,
}

impl<T: Real> KernelSpec<T> {
    pub fn exponential(amplitude: T, rate: T) -> Result<Self> {
        if !(amplitude > T::zero() && amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "exponential kernel amplitude must be positive, got {amplitude}"
            )));
        }
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::Config(format!(
                "exponential kernel rate must be positive, got {rate}"
            )));
        }
        Ok(KernelSpec::Exponential { amplitude, rate })
    }

    /// Builds an algebraic kernel. Exponents in `(0, 3]` are accepted here so
    /// that [`check_hypotheses`] can report them; they fail the growth
    /// hypothesis.
    pub fn polynomial(amplitude: T, exponent: T) -> Result<Self> {
        if !(amplitude > T::zero() && amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "polynomial kernel amplitude must be positive, got {amplitude}"
            )));
        }
        if !(exponent > T::zero() && exponent.is_finite()) {
            return Err(Error::Config(format!(
                "polynomial kernel exponent must be positive, got {exponent}"
            )));
        }
        Ok(KernelSpec::Polynomial {
            amplitude,
            exponent,
        })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, KernelSpec::None)
    }

    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Exponential { .. } => "exponential",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::None => "none",
        }
    }

    /// Relaxation density `g(s)`.
    pub fn eval_g(&self, s: T) -> Result<T> {
        check_time(s)?;
        Ok(match *self {
            KernelSpec::Exponential { amplitude, rate } => amplitude * (-rate * s).exp(),
            KernelSpec::Polynomial {
                amplitude,
                exponent,
            } => amplitude * (T::one() + s).powf(-exponent),
            KernelSpec::None => T::zero(),
        })
    }

    /// Derivative `g'(s)`.
    pub fn eval_g_prime(&self, s: T) -> Result<T> {
        check_time(s)?;
        Ok(match *self {
            KernelSpec::Exponential { amplitude, rate } => -rate * (amplitude * (-rate * s).exp()),
            KernelSpec::Polynomial {
                amplitude,
                exponent,
            } => -exponent * amplitude * (T::one() + s).powf(-exponent - T::one()),
            KernelSpec::None => T::zero(),
        })
    }

    /// Relaxation function `f(s) = ∫_s^∞ g(σ) dσ`.
    ///
    /// Fails for algebraic kernels with exponent `≤ 1`, whose tail mass is
    /// infinite.
    pub fn eval_f(&self, s: T) -> Result<T> {
        check_time(s)?;
        Ok(match *self {
            KernelSpec::Exponential { amplitude, rate } => amplitude / rate * (-rate * s).exp(),
            KernelSpec::Polynomial {
                amplitude,
                exponent,
            } => {
                let tail = exponent - T::one();
                if tail <= T::zero() {
                    return Err(Error::Domain(format!(
                        "polynomial kernel with exponent {exponent} has infinite mass"
                    )));
                }
                amplitude / tail * (T::one() + s).powf(-tail)
            }
            KernelSpec::None => T::zero(),
        })
    }

    /// Total mass `∫₀^∞ g = f(0)`; infinite for non-integrable kernels.
    pub fn mass(&self) -> T {
        self.eval_f(T::zero()).unwrap_or_else(|_| T::infinity())
    }
}

fn check_time<T: Real>(s: T) -> Result<()> {
    if s >= T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "kernel evaluated at negative time {s}"
        )))
    }
}

/// Which branch of the growth hypothesis a kernel satisfies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthBranch<T> {
    /// `g' ≤ -α₀ g`.
    Exponential {
        alpha0: T,
    },
    /// Convex growth function `G(s) = s^p`.
    Convex {
        p: T,
    },
    NotSatisfied,
}

impl<T: Real> GrowthBranch<T> {
    pub fn is_satisfied(&self) -> bool {
        !matches!(self, GrowthBranch::NotSatisfied)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport<T> {
    pub kernel: KernelSpec<T>,
    /// `f` is `C²`, non-increasing, `f(0) > 0` and `f → 0`.
    pub h1_ok: bool,
    /// `g` is non-increasing with `-β₀ g ≤ g'`.
    pub h2_ok: bool,
    pub beta0: Option<T>,
    pub h3_branch: GrowthBranch<T>,
    /// `∫₀^∞ g = f(0)`.
    pub g0_mass: T,
    /// Outcome of the pointwise grid audit.
    pub audit_ok: bool,
    /// Human-readable reasons for every failed check.
    pub violations: Vec<String>,
}

impl<T: Real> HypothesisReport<T> {
    /// True when the kernel carries no memory.
    pub fn is_conservative(&self) -> bool {
        self.kernel.is_none()
    }

    /// All hypotheses required by the decay theory hold (vacuously for the
    /// memoryless kernel).
    pub fn all_hold(&self) -> bool {
        self.h1_ok && self.h2_ok && self.audit_ok && self.h3_branch.is_satisfied()
    }
}

impl<T: Real> fmt::Display for HypothesisReport<T> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kernel {
            KernelSpec::Exponential { amplitude, rate } => writeln!(
                out,
                "variant=exponential amplitude={amplitude:?} rate={rate:?}"
            )?,
            KernelSpec::Polynomial {
                amplitude,
                exponent,
            } => writeln!(
                out,
                "variant=polynomial amplitude={amplitude:?} exponent={exponent:?}"
            )?,
            KernelSpec::None => writeln!(out, "variant=none")?,
        }
        let flag = |ok: bool| if ok { "ok" } else { "violated" };
        writeln!(
            out,
            "H1={} H2={} audit={}",
            flag(self.h1_ok),
            flag(self.h2_ok),
            flag(self.audit_ok)
        )?;
        match self.beta0 {
            Some(beta0) => writeln!(out, "beta0={beta0:?}")?,
            None => writeln!(out, "beta0=none")?,
        }
        match self.h3_branch {
            _ if self.is_conservative() => writeln!(out, "branch=vacuous")?,
            GrowthBranch::Exponential { alpha0 } => {
                writeln!(out, "branch=exponential alpha0={alpha0:?}")?
            }
            GrowthBranch::Convex { p } => writeln!(out, "branch=convex G(s)=s^p p={p:?}")?,
            GrowthBranch::NotSatisfied => writeln!(out, "branch=none")?,
        }
        if self.is_conservative() {
            writeln!(out, "g0=0: conservative")?;
        } else {
            writeln!(out, "g0={:?}", self.g0_mass)?;
        }
        for violation in &self.violations {
            writeln!(out, "violation: {violation}")?;
        }
        Ok(())
    }
}

/// Checks the kernel hypotheses analytically per family, then audits the
/// pointwise inequalities on log-spaced points in `[1e-3, 1e3]`.
pub fn check_hypotheses<T: Real>(kernel: &KernelSpec<T>) -> HypothesisReport<T> {
    let mut violations = Vec::new();
    let (beta0, h3_branch) = match *kernel {
        // vacuous: zero energy flux, the exponential branch holds with any rate
        KernelSpec::None => (None, GrowthBranch::Exponential { alpha0: T::zero() }),
        KernelSpec::Exponential { rate, .. } => {
            (Some(rate), GrowthBranch::Exponential { alpha0: rate })
        }
        KernelSpec::Polynomial { exponent, .. } => {
            let three = T::lit(3.0);
            let branch = if exponent > three {
                let critical = (exponent + T::one()) / (exponent - three);
                GrowthBranch::Convex {
                    p: critical * T::lit(CONVEX_EXPONENT_MARGIN),
                }
            } else {
                violations.push("H3 requires q2>3".to_string());
                GrowthBranch::NotSatisfied
            };
            (Some(exponent), branch)
        }
    };

    let g0_mass = kernel.mass();
    let h1_ok = match kernel {
        KernelSpec::None => true,
        _ => {
            let ok = g0_mass.is_finite() && g0_mass > T::zero();
            if !ok {
                violations.push("H1 requires 0 < f(0) < inf".to_string());
            }
            ok
        }
    };
    // g is non-increasing and g' >= -beta0 g hold analytically for both
    // families; the audit below re-checks them numerically.
    let h2_ok = true;
    let audit_ok = audit_grid(kernel, beta0, &h3_branch, &mut violations);

    HypothesisReport {
        kernel: *kernel,
        h1_ok,
        h2_ok,
        beta0,
        h3_branch,
        g0_mass: if kernel.is_none() { T::zero() } else { g0_mass },
        audit_ok,
        violations,
    }
}

fn audit_grid<T: Real>(
    kernel: &KernelSpec<T>,
    beta0: Option<T>,
    branch: &GrowthBranch<T>,
    violations: &mut Vec<String>,
) -> bool {
    if kernel.is_none() {
        return true;
    }
    let slack = T::lit(1e-12);
    let lo = T::lit(-3.0);
    let span = T::lit(6.0);
    let ten = T::lit(10.0);
    let mut previous_g = kernel.eval_g(T::zero()).unwrap_or(T::nan());
    let mut ok = true;
    for i in 0..AUDIT_POINTS {
        let frac = T::from_count(i) / T::from_count(AUDIT_POINTS - 1);
        let s = ten.powf(lo + span * frac);
        let (Ok(g), Ok(dg)) = (kernel.eval_g(s), kernel.eval_g_prime(s)) else {
            ok = false;
            break;
        };
        let tol = slack * g.abs().max(dg.abs());
        if g < T::zero() || g > previous_g {
            violations.push(format!("g not non-negative and non-increasing at s={s}"));
            ok = false;
            break;
        }
        previous_g = g;
        if let Some(beta0) = beta0 {
            if dg < -beta0 * g - tol {
                violations.push(format!("H2 bound g' >= -beta0 g fails at s={s}"));
                ok = false;
                break;
            }
        }
        if let GrowthBranch::Exponential { alpha0 } = *branch {
            if dg > -alpha0 * g + tol {
                violations.push(format!("H3 bound g' <= -alpha0 g fails at s={s}"));
                ok = false;
                break;
            }
        }
    }
    ok
}

/// Branch of an envelope; mirrors the satisfied variants of [`GrowthBranch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeBranch<T> {
    /// `G₀(s) = s`.
    Exponential,
    /// `G₀(s) = s·G'(s) = p·s^p`.
    Convex { p: T },
}

/// Energy envelope `t ↦ scale · Gₙ(scale / t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope<T> {
    pub order: u32,
    pub branch: EnvelopeBranch<T>,
    pub scale: T,
}

impl<T: Real> DecayEnvelope<T> {
    pub fn new(order: u32, branch: &GrowthBranch<T>, scale: T) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("envelope order must be at least 1".into()));
        }
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "envelope scale must be positive, got {scale}"
            )));
        }
        let branch = match *branch {
            GrowthBranch::Exponential { .. } => EnvelopeBranch::Exponential,
            GrowthBranch::Convex { p } => {
                if !(p > T::one()) {
                    return Err(Error::Domain(format!(
                        "convex exponent must exceed 1, got {p}"
                    )));
                }
                EnvelopeBranch::Convex { p }
            }
            GrowthBranch::NotSatisfied => {
                return Err(Error::Domain(
                    "no decay envelope: growth hypothesis not satisfied".into(),
                ))
            }
        };
        Ok(DecayEnvelope {
            order,
            branch,
            scale,
        })
    }

    /// Chooses the scale so that the envelope passes through
    /// `(t_anchor, energy)`. Every `Gₙ` here is a monomial `cₙ sᵉ`, so the
    /// scale solves `cₙ α^{1+e} t^{-e} = E` in closed form.
    pub fn calibrated(
        order: u32,
        branch: &GrowthBranch<T>,
        t_anchor: T,
        energy: T,
    ) -> Result<Self> {
        if !(t_anchor > T::zero()) {
            return Err(Error::Domain(format!(
                "anchor time must be positive, got {t_anchor}"
            )));
        }
        if !(energy > T::zero() && energy.is_finite()) {
            return Err(Error::Domain(format!(
                "anchor energy must be positive, got {energy}"
            )));
        }
        let probe = DecayEnvelope::new(order, branch, T::one())?;
        let e = probe.exponent();
        let c = probe.g_n(T::one());
        let scale = (energy * t_anchor.powf(e) / c).powf(T::one() / (T::one() + e));
        DecayEnvelope::new(order, branch, scale)
    }

    /// `G₀`.
    pub fn g0(&self, s: T) -> T {
        match self.branch {
            EnvelopeBranch::Exponential => s,
            EnvelopeBranch::Convex { p } => p * s.powf(p),
        }
    }

    /// `G₁ = G₀⁻¹`, in closed form.
    pub fn g1(&self, s: T) -> T {
        match self.branch {
            EnvelopeBranch::Exponential => s,
            EnvelopeBranch::Convex { p } => (s / p).powf(p.recip()),
        }
    }

    /// `Gₙ` through the recursion `G_m(s) = G₁(s·G_{m-1}(s))`.
    pub fn g_n(&self, s: T) -> T {
        let mut value = self.g1(s);
        for _ in 1..self.order {
            value = self.g1(s * value);
        }
        value
    }

    /// Power-law exponent of the envelope in `t`: `n` on the exponential
    /// branch, `Σ_{m=1..n} p^{-m}` on the convex branch.
    pub fn exponent(&self) -> T {
        match self.branch {
            EnvelopeBranch::Exponential => T::from_u32(self.order).expect("order"),
            EnvelopeBranch::Convex { p } => {
                let mut total = T::zero();
                let mut term = T::one();
                for _ in 0..self.order {
                    term /= p;
                    total += term;
                }
                total
            }
        }
    }

    pub fn value(&self, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::Domain(format!(
                "envelope evaluated at non-positive time {t}"
            )));
        }
        Ok(self.scale * self.g_n(self.scale / t))
    }
}
