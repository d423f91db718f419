//! Adaptive Gauss–Kronrod (7/15 and 10/21) and Gauss–Legendre rules.

use crate::error::{Error, Result};

const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss 10-point weights for the odd-indexed Kronrod nodes.
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[inline]
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK21[10];
    let mut rg = 0.0;
    for j in 0..10 {
        let dx = h * XGK21[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK21[j] * s;
        if j % 2 == 1 {
            rg += WG10[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive GK21 on a finite interval with a global error budget
/// `max(abs_tol, rel_tol |I|)`; worst panel is bisected first.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if !a.is_finite() || !b.is_finite() {
        return integrate_infinite(&mut f, a, b, abs_tol, rel_tol);
    }
    integrate_finite(&mut f, a, b, abs_tol, rel_tol)
}

fn integrate_finite(
    mut f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk21(&mut f, lo, hi);
    panels.push((lo, hi, v, e));
    let mut total = v;
    let mut err = e;
    let mut evals = 21usize;
    const MAX_PANELS: usize = 4000;
    loop {
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand produced a non-finite value on [{lo}, {hi}]"
            )));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{lo}, {hi}] did not converge: estimate {total}, error {err}"
            )));
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, pv, pe) = panels.swap_remove(k);
        let m = 0.5 * (pa + pb);
        if !(m > pa && m < pb) {
            // Cannot split further; accept what we have if it is small.
            if pe <= 1e3 * abs_tol.max(rel_tol * total.abs()) {
                panels.push((pa, pb, pv, 0.0));
                err -= pe;
                continue;
            }
            return Err(Error::Numerical(format!(
                "quadrature panel collapsed near {m}; integrand likely non-integrable"
            )));
        }
        let (v1, e1) = gk21(&mut f, pa, m);
        let (v2, e2) = gk21(&mut f, m, pb);
        evals += 42;
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
    // Re-sum to shed accumulated update rounding.
    let value: f64 = panels.iter().map(|p| p.2).sum();
    let abs_error: f64 = panels.iter().map(|p| p.3).sum();
    Ok(QuadResult { value: sign * value, abs_error, evaluations: evals })
}

/// Semi-infinite or infinite intervals via `x = a + t/(1-t)` style maps.
fn integrate_infinite(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::Invalid("NaN integration bound".into()));
    }
    if a > b {
        let r = integrate_infinite(f, b, a, abs_tol, rel_tol)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, false) => integrate_finite(
            &mut |t| {
                let x = a + t / (1.0 - t);
                let w = 1.0 / ((1.0 - t) * (1.0 - t));
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    v * w
                }
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        (false, true) => integrate_finite(
            &mut |t| {
                let x = b - t / (1.0 - t);
                let w = 1.0 / ((1.0 - t) * (1.0 - t));
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    v * w
                }
            },
            0.0,
            1.0,
            abs_tol,
            rel_tol,
        ),
        _ => {
            let r1 = integrate_infinite(f, f64::NEG_INFINITY, 0.0, 0.5 * abs_tol, rel_tol)?;
            let r2 = integrate_infinite(f, 0.0, f64::INFINITY, 0.5 * abs_tol, rel_tol)?;
            Ok(QuadResult {
                value: r1.value + r2.value,
                abs_error: r1.abs_error + r2.abs_error,
                evaluations: r1.evaluations + r2.evaluations,
            })
        }
    }
}

/// Sum of integrals over consecutive breakpoints; helps when the integrand
/// has known kinks or scales.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    let mut out = QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 };
    let k = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let r = integrate(&mut f, w[0], w[1], abs_tol / k, rel_tol)?;
        out.value += r.value;
        out.abs_error += r.abs_error;
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor Gauss–Legendre integral over a rectangle.
pub fn gl_rect<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    rule: &(Vec<f64>, Vec<f64>),
    (a0, a1): (f64, f64),
    (b0, b1): (f64, f64),
) -> f64 {
    let (x, w) = rule;
    let (ca, ha) = (0.5 * (a0 + a1), 0.5 * (a1 - a0));
    let (cb, hb) = (0.5 * (b0 + b1), 0.5 * (b1 - b0));
    let mut s = 0.0;
    for i in 0..x.len() {
        let u = ca + ha * x[i];
        for j in 0..x.len() {
            s += w[i] * w[j] * f(u, cb + hb * x[j]);
        }
    }
    s * ha * hb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let r = integrate(|x| x * x, 0.0, 3.0, 1e-12, 1e-12).unwrap();
        assert!((r.value - 9.0).abs() < 1e-12);
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, 1e-12, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
        let r = integrate(|x| (-x * x / 2.0).exp(), f64::NEG_INFINITY, f64::INFINITY, 1e-12, 1e-12)
            .unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x| x, 1.0, 0.0, 1e-12, 0.0).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 12] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn rectangle_rule() {
        let rule = gauss_legendre(6);
        let v = gl_rect(|a, b| a * b * b, &rule, (0.0, 2.0), (1.0, 3.0));
        assert!((v - 2.0 * 26.0 / 3.0).abs() < 1e-12);
    }
}
