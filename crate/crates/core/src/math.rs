//! Float math shim: routes transcendental functions through `libm` so the
//! crate builds without `std`.

// some methods are shadowed by core inherent versions on newer toolchains
#[allow(dead_code)]
pub(crate) trait F64Ext {
    fn exp(self) -> f64;
    fn ln(self) -> f64;
    fn sqrt(self) -> f64;
    fn cos(self) -> f64;
    fn sin(self) -> f64;
    fn abs(self) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn acos(self) -> f64;
    fn atan2(self, other: f64) -> f64;
    fn hypot(self, other: f64) -> f64;
    fn powi(self, n: i32) -> f64;
    /// Fractional part reduced to [0, 1).
    fn frac1(self) -> f64;
}

impl F64Ext for f64 {
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    #[inline]
    fn acos(self) -> f64 {
        libm::acos(self)
    }
    #[inline]
    fn atan2(self, other: f64) -> f64 {
        libm::atan2(self, other)
    }
    #[inline]
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
    #[inline]
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
    #[inline]
    fn frac1(self) -> f64 {
        let f = self - libm::floor(self);
        // floor(x) can round so that f == 1.0 for tiny negative x
        if f >= 1.0 {
            0.0
        } else {
            f
        }
    }
}

pub(crate) const TAU: f64 = core::f64::consts::TAU;
