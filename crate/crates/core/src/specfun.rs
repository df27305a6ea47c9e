//! Scalar special functions: log-gamma, the regularized incomplete beta
//! function and its inverse (the Beta quantile function).
//!
//! All functions are pure and reentrant.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Lanczos coefficients for g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Shapes at or above this use the Stirling expansion for `ln B(a, b)`.
const STIRLING_CUTOFF: f64 = 10.0;

const CF_EPS: f64 = 1e-16;
const CF_MAX_ITER: usize = 100_000;

/// Iteration budget of the quantile root finder.
pub const QUANTILE_MAX_ITER: usize = 200;

/// Shape parameters `(a, b)` of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePair {
    a: f64,
    b: f64,
}

impl ShapePair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!(
                "Beta shapes must be finite and positive, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let n = self.a + self.b;
        self.a * self.b / (n * n * (n + 1.0))
    }

    /// Log of the Beta density at `x`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return f64::NEG_INFINITY;
        }
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - ln_beta(self.a, self.b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        reg_inc_beta(x, *self)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        beta_quantile(p, *self)
    }
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    // Valid for x >= 0.5.
    let x = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Remainder of Stirling's series, `ln Γ(x) - [(x - ½) ln x - x + ½ ln 2π]`.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0
            - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x
        lanczos_ln_gamma(x + 1.0) - x.ln()
    } else if x < 15.0 {
        lanczos_ln_gamma(x)
    } else {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x)
    }
}

/// `ln B(a, b)`. For large shapes the Stirling form avoids cancelling three
/// large log-gamma values.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    if a.min(b) >= STIRLING_CUTOFF {
        let s = a + b;
        LN_SQRT_2PI + a * (a / s).ln() + b * (b / s).ln() + 0.5 * (s / (a * b)).ln()
            + stirling_correction(a)
            + stirling_correction(b)
            - stirling_correction(s)
    } else {
        ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Convergence {
        routine: "incomplete beta continued fraction",
        iterations: CF_MAX_ITER,
    })
}

/// `ln[x^a (1-x)^b / B(a, b)]`, the common prefactor of the continued fraction.
fn ln_cf_front(x: f64, a: f64, b: f64) -> f64 {
    if a.min(b) >= STIRLING_CUTOFF {
        // Expand around the mean so the large a, b terms do not cancel.
        let s = a + b;
        let ra = (x * s - a) / a;
        let rb = ((1.0 - x) * s - b) / b;
        a * ra.ln_1p() + b * rb.ln_1p() - LN_SQRT_2PI - 0.5 * (s / (a * b)).ln()
            - stirling_correction(a)
            - stirling_correction(b)
            + stirling_correction(s)
    } else {
        a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`, i.e. the Beta CDF.
pub fn reg_inc_beta(x: f64, s: ShapePair) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "reg_inc_beta requires 0 <= x <= 1, got {x}"
        )));
    }
    let (a, b) = (s.a, s.b);
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        ln_cf_front(x, a, b).exp() * beta_cf(x, a, b)? / a
    } else {
        1.0 - ln_cf_front(1.0 - x, b, a).exp() * beta_cf(1.0 - x, b, a)? / b
    };
    Ok(value.clamp(0.0, 1.0))
}

fn quantile_initial_guess(p: f64, a: f64, b: f64) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            x = -x;
        }
        let al = (x * x - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = x * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * (2.0 * w).exp())
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        if p < t / w {
            (a * w * p).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
        }
    }
}

/// Midpoint of `[lo, hi]` in the ordering of representable doubles, so the
/// bracket shrinks by half its double count each step (at most ~62 steps on
/// `[0, 1]`) and also resolves roots far below the smallest normal number.
fn bisect_representable(lo: f64, hi: f64) -> f64 {
    let (l, h) = (lo.to_bits(), hi.to_bits());
    f64::from_bits(l + (h - l) / 2)
}

/// Beta quantile function: returns `x` with `I_x(a, b) = p`.
///
/// Newton iteration on the CDF, safeguarded by a bisection bracket. Fails
/// with [`Error::Convergence`] if the budget of [`QUANTILE_MAX_ITER`]
/// iterations is exhausted.
pub fn beta_quantile(p: f64, s: ShapePair) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "beta_quantile requires 0 < p < 1, got {p}"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = quantile_initial_guess(p, s.a, s.b);
    if !(x > lo && x < hi) {
        x = 0.5;
    }
    for _ in 0..QUANTILE_MAX_ITER {
        let f = reg_inc_beta(x, s)? - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi.to_bits() - lo.to_bits() <= 1 {
            // Bracket exhausted at double resolution: take the better end.
            let f_lo = (reg_inc_beta(lo, s)? - p).abs();
            let f_hi = (reg_inc_beta(hi, s)? - p).abs();
            return Ok(if f_lo < f_hi { lo } else { hi });
        }
        let density = s.pdf(x);
        let newton = x - f / density;
        let next = if density > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            bisect_representable(lo, hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x && f.abs() < 1e-13 {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        routine: "beta_quantile",
        iterations: QUANTILE_MAX_ITER,
    })
}
