//! Scalar math routed through `libm` so results are identical with and
//! without the `std` feature.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// True when `t` encodes a nonnegative integer exactly.
#[inline]
pub fn is_nonneg_integer(t: f64) -> bool {
    t >= 0.0 && t.is_finite() && libm::trunc(t) == t
}

// Horner evaluation, highest-degree coefficient first.
#[inline]
fn horner(r: f64, coeffs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs {
        acc = acc * r + c;
    }
    acc
}

/// Quantile of the standard normal distribution (Wichura's PPND16,
/// algorithm AS 241). Absolute error below 1e-15 on (0, 1).
#[allow(clippy::excessive_precision)] // published coefficients kept verbatim
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = horner(
            r,
            &[
                2509.0809287301226727,
                33430.575583588128105,
                67265.770927008700853,
                45921.953931549871457,
                13731.693765509461125,
                1971.5909503065514427,
                133.14166789178437745,
                3.387132872796366608,
            ],
        );
        let den = horner(
            r,
            &[
                5226.495278852545703,
                28729.085735721942674,
                39307.89580009271061,
                21213.794301586595867,
                5394.1960214247511077,
                687.1870074920579083,
                42.313330701600911252,
                1.0,
            ],
        );
        return q * num / den;
    }
    let r0 = if q < 0.0 { p } else { 1.0 - p };
    let r = sqrt(-ln(r0));
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(
            r,
            &[
                7.7454501427834140764e-4,
                0.0227238449892691845833,
                0.24178072517745061177,
                1.27045825245236838258,
                3.64784832476320460504,
                5.7694972214606914055,
                4.6303378461565452959,
                1.42343711074968357734,
            ],
        ) / horner(
            r,
            &[
                1.05075007164441684324e-9,
                5.475938084995344946e-4,
                0.0151986665636164571966,
                0.14810397642748007459,
                0.68976733498510000455,
                1.6763848301838038494,
                2.05319162663775882187,
                1.0,
            ],
        )
    } else {
        let r = r - 5.0;
        horner(
            r,
            &[
                2.01033439929228813265e-7,
                2.71155556874348757815e-5,
                0.0012426609473880784386,
                0.026532189526576123093,
                0.29656057182850489123,
                1.7848265399172913358,
                5.4637849111641143699,
                6.6579046435011037772,
            ],
        ) / horner(
            r,
            &[
                2.04426310338993978564e-15,
                1.4215117583164458887e-7,
                1.8463183175100546818e-5,
                7.868691311456132591e-4,
                0.0148753612908506148525,
                0.13692988092273580531,
                0.59983220655588793769,
                1.0,
            ],
        )
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: invert the normal CDF by bisection on libm::erfc
    // (erfc avoids the cancellation that erf suffers in the lower tail).
    fn quantile_by_bisection(p: f64) -> f64 {
        let cdf = |x: f64| 0.5 * libm::erfc(-x / sqrt(2.0));
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_matches_reference_values() {
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.025) + 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.8413447460685429) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_bisection_oracle() {
        for &p in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-6] {
            let got = normal_quantile(p);
            let want = quantile_by_bisection(p);
            assert!(
                (got - want).abs() < 1e-9 * (1.0 + want.abs()),
                "p={p}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn integer_time_detection() {
        assert!(is_nonneg_integer(0.0));
        assert!(is_nonneg_integer(3.0));
        assert!(!is_nonneg_integer(3.5));
        assert!(!is_nonneg_integer(-1.0));
        assert!(!is_nonneg_integer(f64::NAN));
    }
}
