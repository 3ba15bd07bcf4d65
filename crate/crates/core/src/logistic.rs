//! Standard logistic distribution helpers and extended-real thresholds.

/// Standard logistic cdf.
#[inline]
pub fn cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Standard logistic density, written as `F(z)(1 - F(z))`.
#[inline]
pub fn pdf(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Derivative of the density.
#[inline]
pub fn pdf_prime(z: f64) -> f64 {
    pdf(z) * (1.0 - 2.0 * cdf(z))
}

/// `log F(z)`, accurate in both tails.
#[inline]
pub fn log_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Logistic quantile `log(p / (1 - p))`.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        (p / (1.0 - p)).ln()
    }
}

/// A real number or one of the two infinities.
///
/// Thresholds use explicit infinities so that `F(+inf) = 1` and `F(-inf) = 0`
/// hold exactly rather than through float saturation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn cdf(self) -> f64 {
        match self {
            ExtReal::NegInf => 0.0,
            ExtReal::Finite(z) => cdf(z),
            ExtReal::PosInf => 1.0,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(z) => z,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn le(self, other: ExtReal) -> bool {
        self.to_f64() <= other.to_f64()
    }
}
