use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar used for probabilities, rewards and values.
///
/// Implemented for `f32` and `f64`. Everything in the crate that touches a
/// probability or a value is generic over this trait.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used when checking that a distribution sums to one.
    const SIMPLEX_TOL: f64;

    /// Converts an `f64` literal, panicking only if the value is not representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f64 {
    const SIMPLEX_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const SIMPLEX_TOL: f64 = 1e-5;
}

/// Draws a uniform value in `[0, 1)` in the requested precision.
#[inline]
pub(crate) fn unit<F: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> F {
    let u: f64 = rng.gen();
    // f32 rounding can land on 1.0 exactly
    let x = F::lit(u);
    if x >= F::one() {
        F::one() - F::epsilon()
    } else {
        x
    }
}

/// Index drawn from a probability row, never landing on a zero entry.
///
/// Falls back to the last positive entry when accumulated rounding leaves the
/// draw above the running sum.
#[inline]
pub(crate) fn sample_index<F: Real, R: rand::Rng + ?Sized>(probs: &[F], rng: &mut R) -> usize {
    let u = unit::<F, R>(rng);
    let mut acc = F::zero();
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > F::zero() {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
