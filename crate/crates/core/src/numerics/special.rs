//! Upper-tail probabilities for the chi-square and standard normal laws.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

/// `P(X > x)` for `X ~ chi-square(df)`.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df < 1.0 {
        return Err(Error::Domain(format!("chi-square needs df >= 1, got {df}")));
    }
    if x.is_nan() {
        return Err(Error::Domain("chi-square statistic is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_q(0.5 * df, 0.5 * x).clamp(0.0, 1.0))
}

/// `P(Z > z)` for a standard normal `Z`.
pub fn normal_sf(z: f64) -> f64 {
    (0.5 * erfc(z / std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule; the oracle is independent of the series code.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn factorial_ln(k: u32) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_integers() {
        for k in 1..20u32 {
            assert!((ln_gamma(k as f64 + 1.0) - factorial_ln(k)).abs() < 1e-12);
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn trivial_values() {
        for k in 1..6 {
            assert_eq!(chi_square_sf(0.0, k as f64).unwrap(), 1.0);
        }
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_square_two_df_critical_value() {
        // with two degrees of freedom the tail is exp(-x/2)
        let p = chi_square_sf(5.991, 2.0).unwrap();
        assert!((p - 0.05).abs() < 1e-3);
        for x in [0.1, 1.0, 7.2, 20.0, 39.0] {
            assert!((chi_square_sf(x, 2.0).unwrap() - (-x / 2.0f64).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn chi_square_matches_quadrature() {
        for df in [1.0f64, 2.0, 3.0, 4.0, 7.0, 12.0] {
            let k2 = df / 2.0;
            let norm = -(k2 * 2f64.ln() + ln_gamma(k2));
            let pdf = move |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    ((k2 - 1.0) * t.ln() - t / 2.0 + norm).exp()
                }
            };
            for x in [0.5f64, 2.0, 5.0, 11.0, 25.0, 40.0] {
                // integrate the tail far enough that the remainder is negligible
                let upper = x + 400.0;
                let oracle = if df == 1.0 {
                    // singular density at the origin: integrate on sqrt scale
                    let g = |u: f64| 2.0 * u * pdf(u * u);
                    simpson(g, x.sqrt(), upper.sqrt(), 200_000)
                } else {
                    simpson(pdf, x, upper, 200_000)
                };
                let p = chi_square_sf(x, df).unwrap();
                assert!((p - oracle).abs() < 1e-8, "df={df} x={x}: {p} vs {oracle}");
            }
        }
    }

    #[test]
    fn normal_matches_quadrature() {
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for z in [-3.0, -1.0, 0.3, 1.0, 1.96, 4.0, 6.0] {
            let oracle = simpson(pdf, z, 40.0, 400_000);
            assert!((normal_sf(z) - oracle).abs() < 1e-10, "z={z}");
        }
        assert!((normal_sf(1.959_963_984_540_054) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(chi_square_sf(1.0, 0.5).is_err());
        assert!(chi_square_sf(f64::NAN, 2.0).is_err());
    }
}
