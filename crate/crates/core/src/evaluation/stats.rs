//! Paired t-test and the special functions behind it.

use serde::{Deserialize, Serialize};

use super::EvalError;

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

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
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

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-15;
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
    for m in 1..=MAX_ITER {
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * regularized_beta(df / (df + t * t), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value for a t statistic.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_beta(df / (df + t * t), df / 2.0, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub t: f64,
    pub p: f64,
    /// Mean difference over the sample standard deviation of differences.
    pub dz: f64,
    pub n: usize,
}

impl PairedTest {
    pub fn df(&self) -> usize {
        self.n - 1
    }
}

fn differences(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPairs(xs.len()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| x - y).collect())
}

fn mean_sd(d: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn spread(d: &[f64]) -> Result<(f64, f64), EvalError> {
    let (mean, sd) = mean_sd(d);
    // Rounding noise in identical differences is treated as no spread.
    let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if sd <= 1e-12 * scale {
        return Err(EvalError::ZeroVariance);
    }
    Ok((mean, sd))
}

/// Paired effect size `mean(d) / sd(d)` for `d = xs - ys`.
pub fn cohens_dz(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    let (mean, sd) = spread(&differences(xs, ys)?)?;
    Ok(mean / sd)
}

/// Two-sided paired t-test of `xs` against `ys`.
pub fn paired_t_test(xs: &[f64], ys: &[f64]) -> Result<PairedTest, EvalError> {
    let d = differences(xs, ys)?;
    let (mean, sd) = spread(&d)?;
    let n = d.len();
    let t = mean / (sd / (n as f64).sqrt());
    Ok(PairedTest {
        t,
        p: two_sided_p(t, (n - 1) as f64),
        dz: mean / sd,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_at_integers_and_half() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((ln_gamma(0.5) - sqrt_pi.ln()).abs() < 1e-13);
    }

    #[test]
    fn beta_symmetry() {
        for &(x, a, b) in &[(0.3, 2.0, 5.0), (0.9, 0.5, 16.0), (0.01, 3.5, 0.5)] {
            let lhs = regularized_beta(x, a, b);
            let rhs = 1.0 - regularized_beta(1.0 - x, b, a);
            assert!((lhs - rhs).abs() < 1e-13, "{x} {a} {b}");
        }
    }

    #[test]
    fn one_df_is_cauchy() {
        for &t in &[-3.0, -0.4, 0.0, 1.0, 7.5] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-13);
        }
    }

    #[test]
    fn two_point_sample() {
        let r = paired_t_test(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert!((r.t - 2.0).abs() < 1e-12);
        // With one degree of freedom p = 1 - 2 atan(2) / pi.
        let expected = 1.0 - 2.0 * f64::atan(2.0) / std::f64::consts::PI;
        assert!((r.p - expected).abs() < 1e-12);
        assert!((r.p - 0.295).abs() < 5e-4);
        assert_eq!(r.n, 2);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            paired_t_test(&[1.0, 2.0], &[1.0, 2.0]),
            Err(EvalError::ZeroVariance)
        ));
        assert!(matches!(
            paired_t_test(&[3.0; 4], &[1.0; 4]),
            Err(EvalError::ZeroVariance)
        ));
        assert!(matches!(paired_t_test(&[1.0], &[0.0]), Err(EvalError::TooFewPairs(1))));
        assert!(matches!(
            paired_t_test(&[1.0, 2.0], &[0.0]),
            Err(EvalError::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn dz_is_t_over_root_n() {
        let xs = [0.7, 0.9, 0.4, 0.8, 0.85];
        let ys = [0.6, 0.7, 0.5, 0.75, 0.6];
        let r = paired_t_test(&xs, &ys).unwrap();
        assert!((r.dz - r.t / 5f64.sqrt()).abs() < 1e-12);
        assert!((cohens_dz(&xs, &ys).unwrap() - r.dz).abs() < 1e-15);
    }
}
