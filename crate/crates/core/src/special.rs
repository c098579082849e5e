//! Gamma-family primitives and the normalisation constants of `(-Δ)^s`.
//!
//! Only positive arguments are supported. Every constant used downstream can
//! be written with positive gamma arguments once `b_{N,s} = -c_{N,-s}` is
//! simplified, so there is no reflection branch.

use std::f64::consts::PI;

use crate::error::{Error, Result};

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

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Continued-fraction iteration budget for the incomplete beta function.
pub const BETA_CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// `Γ(1 + t)` for `t ∈ [0, 1]` via the Lanczos approximation.
fn gamma_1p(t: f64) -> f64 {
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (t + i as f64);
    }
    let base = t + LANCZOS_G + 0.5;
    // split the power so that large arguments do not overflow early
    let half = base.powf(0.5 * (t + 0.5));
    SQRT_2PI * half * (half * (-base).exp()) * acc
}

/// The gamma function for positive finite arguments.
///
/// The argument is reduced into `[1, 2)` and shifted back with the
/// recurrence `Γ(x + 1) = x Γ(x)`; the Lanczos sum itself is only evaluated
/// on `Γ(1 + t)`, `t ∈ [0, 1)`, where it is accurate to a few ulp.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("gamma_fn requires a finite x > 0, got {x}")));
    }
    if x < 1.0 {
        return Ok(gamma_1p(x) / x);
    }
    let shifts = (x - 1.0).floor();
    let t = x - 1.0 - shifts;
    let mut value = gamma_1p(t);
    let mut k = 1.0;
    while k <= shifts {
        value *= x - k;
        k += 1.0;
    }
    Ok(value)
}

/// Complete beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    Ok(gamma_fn(a)? * gamma_fn(b)? / gamma_fn(a + b)?)
}

/// Lower incomplete beta `∫_0^x u^{a-1}(1-u)^{b-1} du` (not regularised).
pub fn incomplete_beta_lower(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta argument must lie in [0, 1], got {x}")));
    }
    incomplete_beta_split(x, 1.0 - x, a, b)
}

/// Upper incomplete beta `∫_x^1 u^{a-1}(1-u)^{b-1} du`.
pub fn incomplete_beta_upper(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta argument must lie in [0, 1], got {x}")));
    }
    incomplete_beta_split(1.0 - x, x, b, a)
}

/// Lower incomplete beta with the complement `xc = 1 - x` supplied by the
/// caller, so that arguments close to 1 keep full relative precision.
pub(crate) fn incomplete_beta_split(x: f64, xc: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("incomplete beta needs a, b > 0, got a = {a}, b = {b}")));
    }
    if !(x >= 0.0 && xc >= 0.0) {
        return Err(Error::domain(format!("incomplete beta argument out of range: x = {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if xc == 0.0 {
        return beta_fn(a, b);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(beta_fn(a, b)? - beta_cf_part(xc, x, b, a)?)
    } else {
        beta_cf_part(x, xc, a, b)
    }
}

/// `x^a (1-x)^b / a · CF(x; a, b)` with the continued fraction evaluated by
/// the modified Lentz method.
fn beta_cf_part(x: f64, xc: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < CF_EPS {
            return Ok(x.powf(a) * xc.powf(b) * h / a);
        }
    }
    Err(Error::Convergence { what: "incomplete beta continued fraction", budget: BETA_CF_MAX_ITER })
}

/// Surface area `σ_N = |S^{N-1}| = 2π^{N/2}/Γ(N/2)`. For `N = 1` this is the
/// counting measure of `{-1, 1}`, i.e. 2.
pub fn sphere_area(n: usize) -> f64 {
    if n == 1 {
        return 2.0;
    }
    let half = n as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_fn(half).expect("N >= 1")
}

/// Dimension and order of the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    n: usize,
    s: f64,
}

impl FracParams {
    /// Accepts `s ∈ (0, 1)` with `N > 2s`, or the local case `s = 1` with
    /// `N > 2`.
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension N must be at least 1".into()));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidParams(format!("order s must lie in (0, 1], got {s}")));
        }
        if (n as f64) <= 2.0 * s {
            return Err(Error::InvalidParams(format!("N > 2s is required, got N = {n}, s = {s}")));
        }
        Ok(Self { n, s })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_local(&self) -> bool {
        self.s == 1.0
    }

    pub fn constants(&self) -> ConstantSet {
        make_constants(*self)
    }
}

/// Normalisation constants attached to a [`FracParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSet {
    /// `c_{N,s}` in front of the singular integral. For `s = 1` this is the
    /// unit coefficient of `-Δ`.
    pub c_norm: f64,
    /// `b_{N,s}` of the fundamental solution `b_{N,s}|x - z|^{2s-N}`.
    pub b_fund: f64,
    /// Prefactor of the ball Green function integral representation.
    pub kappa_bgr: f64,
    /// `σ_N`.
    pub sphere_area: f64,
}

/// `π^{-N/2} s 4^s Γ((N+2s)/2) / Γ(1-s)`, valid for `-N/2 < s < 1`, `s ≠ 0`.
pub fn operator_norm(n: usize, s: f64) -> Result<f64> {
    let nf = n as f64;
    Ok(PI.powf(-nf / 2.0) * s * 4f64.powf(s) * gamma_fn((nf + 2.0 * s) / 2.0)? / gamma_fn(1.0 - s)?)
}

/// `b_{N,s}` in its simplified form `Γ(N/2 - s)/(4^s π^{N/2} Γ(s))`.
pub fn fundamental_norm(n: usize, s: f64) -> Result<f64> {
    let nf = n as f64;
    Ok(gamma_fn(nf / 2.0 - s)? / (4f64.powf(s) * PI.powf(nf / 2.0) * gamma_fn(s)?))
}

pub fn make_constants(p: FracParams) -> ConstantSet {
    let (n, s) = (p.n, p.s);
    let nf = n as f64;
    let sphere = sphere_area(n);
    // FracParams::new guarantees every gamma argument below is positive.
    let kappa_bgr = gamma_fn(nf / 2.0).unwrap() / (4f64.powf(s) * PI.powf(nf / 2.0) * gamma_fn(s).unwrap().powi(2));
    if p.is_local() {
        ConstantSet { c_norm: 1.0, b_fund: 1.0 / ((nf - 2.0) * sphere), kappa_bgr, sphere_area: sphere }
    } else {
        ConstantSet {
            c_norm: operator_norm(n, s).unwrap(),
            b_fund: fundamental_norm(n, s).unwrap(),
            kappa_bgr,
            sphere_area: sphere,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma_fn(1.0).unwrap(), 1.0) < 1e-15);
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(4.0).unwrap(), 6.0) < 1e-14);
    }

    #[test]
    fn gamma_matches_high_precision_table() {
        // reference values from a 30-digit evaluation
        let table = [
            (0.1, 9.513_507_698_668_731_836_3),
            (0.25, 3.625_609_908_221_908_311_9),
            (1.0 / 3.0, 2.678_938_534_707_747_788_9),
            (1.5, 0.886_226_925_452_758_013_65),
            (2.5, 1.329_340_388_179_137_020_5),
            (3.7, 4.170_651_783_796_603_165_4),
            (7.25, 1_155.381_013_919_989_687_2),
            (12.5, 136_843_365.465_565_857_26),
            (25.3, 1.622_777_117_670_872_872_6e24),
            (49.9, 4.118_011_034_253_058_041_9e62),
            (50.0, 6.082_818_640_342_675_608_7e62),
        ];
        for (x, want) in table {
            let got = gamma_fn(x).unwrap();
            assert!(rel(got, want) < 1e-14, "Γ({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn gamma_factorials_up_to_fifty() {
        let mut fact = 1.0f64;
        for n in 1..=50u32 {
            let got = gamma_fn(n as f64).unwrap();
            assert!(rel(got, fact) < 1e-14, "Γ({n})");
            fact *= n as f64;
        }
    }

    #[test]
    fn gamma_rejects_non_positive() {
        assert!(matches!(gamma_fn(0.0), Err(Error::Domain(_))));
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
        assert!(gamma_fn(f64::INFINITY).is_err());
    }

    #[test]
    fn incomplete_beta_trivial_cases() {
        let (a, b) = (0.7, 2.3);
        let full = gamma_fn(a).unwrap() * gamma_fn(b).unwrap() / gamma_fn(a + b).unwrap();
        assert!(rel(incomplete_beta_lower(1.0, a, b).unwrap(), full) < 1e-14);
        assert_eq!(incomplete_beta_lower(0.0, a, b).unwrap(), 0.0);
        assert!((incomplete_beta_lower(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        for &x in &[1e-6f64, 0.01, 0.2, 0.5, 0.77, 0.95, 0.999_999] {
            // B_x(1, b) = (1 - (1-x)^b)/b
            let b = 2.7;
            let want = -(b * (-x).ln_1p()).exp_m1() / b;
            assert!(rel(incomplete_beta_lower(x, 1.0, b).unwrap(), want) < 1e-12, "x = {x}");
            // B_x(a, 1) = x^a / a
            let a = 0.35;
            assert!(rel(incomplete_beta_lower(x, a, 1.0).unwrap(), x.powf(a) / a) < 1e-12);
            // B_x(1/2, 1/2) = 2 asin(sqrt x)
            let want = 2.0 * x.sqrt().asin();
            assert!(rel(incomplete_beta_lower(x, 0.5, 0.5).unwrap(), want) < 1e-12);
        }
    }

    #[test]
    fn incomplete_beta_matches_high_precision_table() {
        let table = [
            ((0.3, 0.25, 1.25), 2.912_749_553_317_175_885_6),
            ((0.9, 0.25, 1.25), 3.661_165_411_567_298_821_8),
            ((0.7, 1.5, 0.5), 0.532_899_016_935_608_250_81),
            ((0.05, 0.9, 2.1), 0.073_010_483_919_472_617_251),
            ((0.999, 0.3, 1.2), 3.099_183_151_655_017_137_2),
            ((0.5, 2.5, 3.5), 0.024_657_769_454_627_694_757),
            ((0.2, 0.1, 1.4), 8.449_381_407_412_355_571_8),
        ];
        for ((x, a, b), want) in table {
            let got = incomplete_beta_lower(x, a, b).unwrap();
            assert!(rel(got, want) < 1e-12, "B_{x}({a},{b}) = {got}, want {want}");
        }
    }

    #[test]
    fn incomplete_beta_upper_complements_lower() {
        let (a, b) = (1.3, 0.4);
        let full = beta_fn(a, b).unwrap();
        for &x in &[0.01, 0.4, 0.9] {
            let sum = incomplete_beta_lower(x, a, b).unwrap() + incomplete_beta_upper(x, a, b).unwrap();
            assert!(rel(sum, full) < 1e-13);
        }
    }

    #[test]
    fn incomplete_beta_domain_errors() {
        assert!(incomplete_beta_lower(-0.1, 1.0, 1.0).is_err());
        assert!(incomplete_beta_lower(1.1, 1.0, 1.0).is_err());
        assert!(incomplete_beta_lower(0.5, 0.0, 1.0).is_err());
        assert!(incomplete_beta_lower(0.5, 1.0, -2.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(3, 0.5).is_ok());
        assert!(FracParams::new(3, 1.0).unwrap().is_local());
        assert!(FracParams::new(1, 0.5).is_err());
        assert!(FracParams::new(2, 1.0).is_err());
        assert!(FracParams::new(0, 0.3).is_err());
        assert!(FracParams::new(3, 0.0).is_err());
        assert!(FracParams::new(3, 1.2).is_err());
        assert!(FracParams::new(3, f64::NAN).is_err());
    }

    #[test]
    fn constants_examples() {
        // N = 1, s = 1/4: b = 4^{-1/4} π^{-1/2}
        let c = FracParams::new(1, 0.25).unwrap().constants();
        assert!(rel(c.b_fund, 4f64.powf(-0.25) / PI.sqrt()) < 1e-14);
        assert!((c.b_fund - 0.398_942_280_401_432_7).abs() < 1e-14);

        let c = FracParams::new(3, 0.5).unwrap().constants();
        assert!(rel(c.b_fund, 1.0 / (2.0 * PI * PI)) < 1e-14);
        assert!(rel(c.kappa_bgr * 2.0, c.b_fund) < 1e-14);
        assert!(rel(c.sphere_area, 4.0 * PI) < 1e-15);

        let c = FracParams::new(3, 1.0).unwrap().constants();
        assert!(rel(c.b_fund, 1.0 / (4.0 * PI)) < 1e-14);
        assert_eq!(FracParams::new(1, 0.3).unwrap().constants().sphere_area, 2.0);
    }

    #[test]
    fn constants_consistency_grid() {
        for n in 1..=4usize {
            for s in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
                let Ok(p) = FracParams::new(n, s) else { continue };
                let c = p.constants();
                assert!(c.c_norm > 0.0 && c.b_fund > 0.0 && c.kappa_bgr > 0.0 && c.sphere_area > 0.0);
                let kb = c.kappa_bgr * beta_fn(s, n as f64 / 2.0 - s).unwrap();
                assert!(rel(kb, c.b_fund) <= 1e-13, "N={n} s={s}");
                let literal = -operator_norm(n, -s).unwrap();
                assert!(rel(literal, c.b_fund) <= 1e-13, "N={n} s={s}");
            }
        }
    }

    proptest! {
        #[test]
        fn incomplete_beta_is_monotone(a in 0.05f64..5.0, b in 0.05f64..5.0,
                                       x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let f_lo = incomplete_beta_lower(lo, a, b).unwrap();
            let f_hi = incomplete_beta_lower(hi, a, b).unwrap();
            prop_assert!(f_lo <= f_hi * (1.0 + 1e-13) + 1e-300);
        }
    }
}
