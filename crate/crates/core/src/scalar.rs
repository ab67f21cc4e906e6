//! Scalar abstraction shared by the propagation and metric models.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type the channel and metric models are generic over.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal or configuration value.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf((dbm - T::lit(30.0)) / T::lit(10.0))
}

pub fn watts_to_dbm<T: Scalar>(w: T) -> T {
    T::lit(10.0) * w.log10() + T::lit(30.0)
}

/// Converts a gain in dB (or dBi) to a linear ratio.
pub fn db_to_linear<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

pub fn linear_to_db<T: Scalar>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        for dbm in [-107.0, -30.0, 0.0, 20.0, 36.0, 40.0] {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }
        assert!((dbm_to_watts(36.0_f64) - 3.981_071_705_534_973).abs() < 1e-12);
        assert!((dbm_to_watts(36.0_f32) - 3.981_072).abs() < 1e-5);
    }

    #[test]
    fn db_round_trip() {
        for db in [-3.0, 0.0, 20.0, 26.0, 30.0] {
            let back = linear_to_db(db_to_linear(db));
            assert!((back - db).abs() <= 1e-12 * f64::abs(db).max(1.0));
        }
    }
}
