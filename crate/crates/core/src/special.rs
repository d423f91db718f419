//! Special functions: Gaussian tails, scaled erfc, incomplete gamma with
//! negative order, exponential integral, Bessel J of real order and its zeros.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::gamma::{gamma_ui, ln_gamma};

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ̄(x) = P[N > x].
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    norm_sf(-x)
}

/// Complementary error function, relative accuracy near machine precision
/// (Maclaurin series of erf for |x| < 1.5, Laplace continued fraction beyond).
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() < 1.5 {
        return 1.0 - erf_series(x);
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x > 27.3 {
        return 0.0;
    }
    (-x * x).exp() * erfcx_cf(x)
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut t = x;
    let mut s = x;
    for n in 1..200 {
        t *= -x2 / n as f64;
        let term = t / (2 * n + 1) as f64;
        s += term;
        if term.abs() < 1e-17 * s.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * s
}

/// Continued fraction erfcx(x) = (1/√π) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated by modified Lentz; accurate for x >= 1.5.
fn erfcx_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..1000 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (PI.sqrt() * f)
}

/// Scaled complementary error function e^{x²} erfc(x); finite for x > -26.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 1.5 {
        return (x * x).exp() * erfc(x);
    }
    erfcx_cf(x)
}

/// Mills-type ratio E(x) = e^{x²/2} Φ̄(x).
#[inline]
pub fn norm_sf_scaled(x: f64) -> f64 {
    0.5 * erfcx(x * FRAC_1_SQRT_2)
}

/// Exponential integral E1(x) = ∫_x^∞ e^{-t}/t dt, x > 0.
pub fn exp_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Invalid(format!("E1 needs x > 0, got {x}")));
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return Ok(-EULER_GAMMA - x.ln() + sum);
    }
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h * (-x).exp());
        }
    }
    Err(Error::Numerical(format!("E1 continued fraction failed at {x}")))
}

/// Upper incomplete gamma Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt for any real s
/// and x > 0 (negative s by downward recurrence).
pub fn upper_gamma(s: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Invalid(format!("upper incomplete gamma needs x > 0, got {x}")));
    }
    if s > 0.0 {
        return Ok(gamma_ui(s, x));
    }
    if s == 0.0 {
        return exp_e1(x);
    }
    let next = upper_gamma(s + 1.0, x)?;
    Ok((next - x.powf(s) * (-x).exp()) / s)
}

pub fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Bessel function of the first kind J_ν(x) for ν ≥ 0, x ≥ 0.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    bessel_j_pair(nu, x).0
}

/// (J_ν(x), J_{ν+1}(x)).
pub fn bessel_j_pair(nu: f64, x: f64) -> (f64, f64) {
    assert!(nu >= 0.0 && x >= 0.0, "bessel_j needs nu >= 0 and x >= 0");
    if x == 0.0 {
        return (if nu == 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    if x <= 10.0 {
        (j_series(nu, x), j_series(nu + 1.0, x))
    } else if x >= 25.0 + nu * nu {
        (j_hankel(nu, x), j_hankel(nu + 1.0, x))
    } else {
        j_miller(nu, x)
    }
}

fn j_series(nu: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = (nu * h.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    let h2 = h * h;
    for k in 1..300 {
        let kf = k as f64;
        term *= -h2 / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > h {
            break;
        }
    }
    sum
}

fn j_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a.abs() > prev {
            break;
        }
        prev = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Miller backward recurrence normalized with
/// (x/2)^ν = Σ_m (ν+2m) Γ(ν+m)/m! · J_{ν+2m}(x).
fn j_miller(nu: f64, x: f64) -> (f64, f64) {
    let n = (x + 30.0 + 12.0 * x.sqrt()).ceil() as usize;
    let n = n + (n % 2);
    let coef = |m: usize| -> f64 {
        if m == 0 {
            ln_gamma(nu + 1.0).exp()
        } else {
            let mf = m as f64;
            ((nu + 2.0 * mf).ln() + ln_gamma(nu + mf) - ln_gamma(mf + 1.0)).exp()
        }
    };
    let mut jp1 = 0.0; // J_{ν+k+1}
    let mut jk = 1e-280; // J_{ν+k}
    let mut sum = coef(n / 2) * jk;
    let mut j1 = 0.0;
    for k in (1..=n).rev() {
        let jm1 = 2.0 * (nu + k as f64) / x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        let idx = k - 1;
        if idx % 2 == 0 {
            sum += coef(idx / 2) * jk;
        }
        if idx == 1 {
            j1 = jk;
        }
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp1 *= 1e-250;
            sum *= 1e-250;
            j1 *= 1e-250;
        }
    }
    if n == 0 {
        j1 = jp1;
    }
    let scale = (nu * (0.5 * x).ln()).exp() / sum;
    (jk * scale, j1 * scale)
}

/// First `k` positive zeros of J_a, from McMahon's expansion polished by
/// Newton with J_a' = (a/z) J_a - J_{a+1}.
pub fn bessel_j_zeros(a: f64, k: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0) {
        return Err(Error::Invalid(format!("Bessel order must be >= 0, got {a}")));
    }
    let mu = 4.0 * a * a;
    let mut out: Vec<f64> = Vec::with_capacity(k);
    for i in 1..=k {
        let beta = (i as f64 + 0.5 * a - 0.25) * PI;
        let e = 8.0 * beta;
        let mut z = beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e * e * e);
        let mut converged = false;
        for _ in 0..100 {
            let (j, j1) = bessel_j_pair(a, z);
            let d = a / z * j - j1;
            let step = j / d;
            z -= step;
            if step.abs() <= 1e-12 * z.abs() {
                converged = true;
                break;
            }
        }
        let prev = out.last().copied().unwrap_or(0.0);
        if !converged || !(z > prev + 1.0) {
            return Err(Error::Numerical(format!("Bessel zero {i} of order {a} did not converge")));
        }
        out.push(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_matches_definition_and_asymptotics() {
        let reference = [
            (-3.0, 16205.988853999586),
            (-0.5, 1.952360489182557),
            (0.0, 1.0),
            (0.3, 0.7345993345676554),
            (2.0, 0.2553956763105058),
            (3.9, 0.14031418160068973),
            (4.1, 0.13383411641865198),
            (4.9, 0.11287909055975874),
            (5.1, 0.10861102631393281),
        ];
        for (x, v) in reference {
            assert!((erfcx(x) - v).abs() <= 2e-14 * v, "x={x}: {} vs {v}", erfcx(x));
        }
        let x = 100.0;
        let asym = 1.0 / (x * PI.sqrt()) * (1.0 - 0.5 / (x * x) + 0.75 / x.powi(4));
        assert!((erfcx(x) - asym).abs() < 1e-11 * asym);
    }

    #[test]
    fn erfc_reference_values() {
        let reference = [
            (0.1, 8.87537083981715158e-01),
            (0.5, 4.79500122186953481e-01),
            (1.0, 1.57299207050285161e-01),
            (2.0, 4.67773498104726623e-03),
            (3.0, 2.20904969985854446e-05),
            (6.0, 2.15197367124989131e-17),
        ];
        for (x, v) in reference {
            assert!((erfc(x) - v).abs() <= 2e-15 * v, "x={x}: {} vs {v}", erfc(x));
            assert!((erfc(-x) - (2.0 - v)).abs() <= 4e-16);
        }
    }

    #[test]
    fn e1_known_values() {
        assert!((exp_e1(1.0).unwrap() - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((exp_e1(0.1).unwrap() - 1.822_923_958_419_390_7).abs() < 1e-14);
        assert!((exp_e1(5.0).unwrap() - 0.001_148_295_591_275_325_7).abs() < 1e-17);
    }

    #[test]
    fn incomplete_gamma_negative_order_by_quadrature() {
        for &(s, x) in &[(-0.5, 0.7), (-1.5, 2.0), (0.5, 1.0), (-0.999, 0.3)] {
            let q = crate::quad::integrate(
                |t: f64| t.powf(s - 1.0) * (-t).exp(),
                x,
                f64::INFINITY,
                1e-14,
                1e-13,
            )
            .unwrap();
            let v = upper_gamma(s, x).unwrap();
            assert!((v - q.value).abs() < 1e-10 * q.value.abs(), "s={s} x={x}: {v} vs {}", q.value);
        }
    }

    #[test]
    fn half_integer_bessel_is_elementary() {
        for &z in &[0.01, 0.5, 3.0, 9.9, 10.1, 17.0, 24.9, 25.5, 80.0, 300.0, 1500.0] {
            let exact = (2.0 / (PI * z)).sqrt() * z.sin();
            let exact1 = (2.0 / (PI * z)).sqrt() * (z.sin() / z - z.cos());
            let (j, j1) = bessel_j_pair(0.5, z);
            assert!((j - exact).abs() < 1e-13, "z={z}: {j} vs {exact}");
            assert!((j1 - exact1).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn integer_order_reference_values() {
        assert!((bessel_j(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1.0, 15.0) - 0.205_104_038_613_522_3).abs() < 1e-14);
        assert!((bessel_j(0.0, 20.0) - 0.167_024_664_340_583_4).abs() < 1e-14);
        assert!((bessel_j(2.0, 50.0) - (-0.059_712_800_794_258_82)).abs() < 1e-14);
    }

    #[test]
    fn zeros() {
        let z = bessel_j_zeros(0.5, 50).unwrap();
        for (k, v) in z.iter().enumerate() {
            assert!((v - (k + 1) as f64 * PI).abs() < 1e-10);
        }
        let z0 = bessel_j_zeros(0.0, 2).unwrap();
        assert!((z0[0] - 2.404_825_557_695_773).abs() < 1e-11);
        assert!((z0[1] - 5.520_078_110_286_311).abs() < 1e-11);
        let z1 = bessel_j_zeros(1.0, 1).unwrap();
        assert!((z1[0] - 3.831_705_970_207_512).abs() < 1e-11);
    }
}
