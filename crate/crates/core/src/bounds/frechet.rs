use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("probability {0} is outside [0, 1]")]
pub struct DomainError(pub f64);

/// Distribution-free bounds on `Pr(A and B)` given `Pr(A) = a`, `Pr(B) = b`.
///
/// Returns `(max{0, a + b - 1}, min{a, b})`.
pub fn frechet_bounds<T: Real>(a: T, b: T) -> Result<(T, T), DomainError> {
    for p in [a, b] {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(DomainError(p.as_f64()));
        }
    }
    Ok((joint_lower(a, b), joint_upper(a, b)))
}

#[inline]
pub(crate) fn joint_lower<T: Real>(a: T, b: T) -> T {
    (a + b - T::one()).max_of(T::zero())
}

#[inline]
pub(crate) fn joint_upper<T: Real>(a: T, b: T) -> T {
    a.min_of(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let (lo, hi) = frechet_bounds(0.6f64, 0.7).unwrap();
        assert!((lo - 0.3).abs() < 1e-15 && hi == 0.6);
        assert_eq!(frechet_bounds(0.2, 0.3).unwrap(), (0.0, 0.2));
        assert_eq!(frechet_bounds(1.0, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(frechet_bounds(1.5, 0.0), Err(DomainError(1.5)));
        assert!(frechet_bounds(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn exact_over_rationals() {
        let r = |a, b| Ratio::new(a, b);
        assert_eq!(frechet_bounds(r(3i64, 5), r(7, 10)).unwrap(), (r(3, 10), r(3, 5)));
    }

    proptest! {
        #[test]
        fn product_lies_between(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = frechet_bounds(a, b).unwrap();
            prop_assert!(lo <= a * b + 1e-15);
            prop_assert!(a * b <= hi);
        }
    }
}
