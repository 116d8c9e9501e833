//! Independent reference solutions for exponential kernels.
//!
//! With `f(s) = (d/q) e^{-qs}` the convolution `z(t) = ∫₀^∞ f(s) B(t-s) ds`
//! obeys `z' = (d/q) B − q z`, so a single mode becomes the linear system
//!
//! ```text
//! B' = −i a μ B − c z,    z' = (d/q) B − q z,
//! ```
//!
//! integrated here with classical RK4. A constant history `B ≡ B₀` gives
//! `z(0) = (d/q²) B₀`.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy)]
pub struct AugmentedMode<T> {
    pub dispersion: T,
    /// `4π²k²/L²`.
    pub eigenvalue: T,
    /// Memory weight `c` of the mode.
    pub coupling: T,
    pub kernel: KernelSpec<T>,
}

impl<T: Real> AugmentedMode<T> {
    fn rhs(&self, b: Cplx<T>, z: Cplx<T>, amplitude: T, rate: T) -> (Cplx<T>, Cplx<T>) {
        let i = Cplx::new(T::zero(), T::one());
        let db = -(i * (self.dispersion * self.eigenvalue)) * b - z * self.coupling;
        let dz = b * (amplitude / rate) - z * rate;
        (db, dz)
    }

    /// `B(t_end)` from the constant history `B ≡ b0`, using `substeps` RK4
    /// steps. Memoryless modes evolve with `z ≡ 0`.
    pub fn solve(&self, b0: Cplx<T>, t_end: T, substeps: usize) -> Result<Cplx<T>> {
        if substeps == 0 {
            return Err(Error::Domain("at least one RK4 step is required".into()));
        }
        let (amplitude, rate) = match self.kernel {
            KernelSpec::Exponential { amplitude, rate } => (amplitude, rate),
            KernelSpec::None => (T::zero(), T::one()),
            KernelSpec::Polynomial { .. } => {
                return Err(Error::Domain(
                    "augmented reference requires an exponential kernel".into(),
                ))
            }
        };
        let h = t_end / T::from_count(substeps);
        let half = T::lit(0.5);
        let sixth = T::lit(1.0 / 6.0);
        let two = T::lit(2.0);
        let mut b = b0;
        let mut z = b0 * (amplitude / (rate * rate));
        for _ in 0..substeps {
            let (k1b, k1z) = self.rhs(b, z, amplitude, rate);
            let (k2b, k2z) = self.rhs(b + k1b * (h * half), z + k1z * (h * half), amplitude, rate);
            let (k3b, k3z) = self.rhs(b + k2b * (h * half), z + k2z * (h * half), amplitude, rate);
            let (k4b, k4z) = self.rhs(b + k3b * h, z + k3z * h, amplitude, rate);
            b += (k1b + k2b * two + k3b * two + k4b) * (h * sixth);
            z += (k1z + k2z * two + k3z * two + k4z) * (h * sixth);
        }
        Ok(b)
    }
}
