//! Real Airy functions: double-double Maclaurin series for `|x| <= 8`, asymptotic
//! expansions beyond.

use std::f64::consts::{FRAC_PI_4, PI};

use super::AiryKind;
use crate::error::{Error, Result};

pub const SERIES_RADIUS: f64 = 8.0;
/// `Bi` and `Bi'` overflow once `(2/3) x^{3/2}` exceeds the largest finite exponent.
pub const BI_OVERFLOW_THRESHOLD: f64 = 104.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryValues {
    pub ai: f64,
    pub ai_prime: f64,
    pub bi: f64,
    pub bi_prime: f64,
}

pub fn airy(kind: AiryKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("Airy argument {x}")));
    }
    if x > BI_OVERFLOW_THRESHOLD && matches!(kind, AiryKind::Bi | AiryKind::BiPrime) {
        return Err(Error::Overflow(format!("{}({x}) exceeds the double range", kind.name())));
    }
    let vals = if x.abs() <= SERIES_RADIUS { series(x) } else { asymptotic(x) };
    Ok(match kind {
        AiryKind::Ai => vals.ai,
        AiryKind::Bi => vals.bi,
        AiryKind::AiPrime => vals.ai_prime,
        AiryKind::BiPrime => vals.bi_prime,
    })
}

/// All four values at once. `Bi` entries are infinite beyond the overflow threshold.
pub fn airy_all(x: f64) -> AiryValues {
    if x.abs() <= SERIES_RADIUS {
        series(x)
    } else {
        asymptotic(x)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let r = Dd::quick_two_sum(s.hi, s.lo + t.hi);
        Dd::quick_two_sum(r.hi, r.lo + t.lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = q1 * d;
        let e = q1.mul_add(d, -p);
        let r = (self.hi - p - e + self.lo) / d;
        Dd::quick_two_sum(q1, r)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

const AI0: Dd = Dd::new(0.3550280538878172, 2.05233632436212e-17);
const MINUS_AI0_PRIME: Dd = Dd::new(0.2588194037928068, -2.522243111610832e-17);
const SQRT3: Dd = Dd::new(1.7320508075688772, 1.0035084221806903e-16);

const SERIES_MAX_TERMS: usize = 400;

/// Sums `sum_k term_k` with `term_{k} = term_{k-1} * x^3 / ratio(k)` to double-double accuracy.
fn series_sum(first: Dd, x3: Dd, k0: usize, ratio: impl Fn(f64) -> f64) -> Dd {
    let mut term = first;
    let mut sum = first;
    for k in k0..k0 + SERIES_MAX_TERMS {
        term = term.mul(x3).div_f64(ratio(k as f64));
        sum = sum.add(term);
        if term.hi.abs() <= 1e-34 * sum.hi.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn series(x: f64) -> AiryValues {
    let xd = Dd::from(x);
    let x2 = xd.mul(xd);
    let x3 = x2.mul(xd);
    let f = series_sum(Dd::from(1.0), x3, 1, |k| (3.0 * k - 1.0) * (3.0 * k));
    let g = series_sum(xd, x3, 1, |k| (3.0 * k) * (3.0 * k + 1.0));
    let fp = if x == 0.0 {
        Dd::from(0.0)
    } else {
        series_sum(x2.div_f64(2.0), x3, 2, |k| (3.0 * k - 3.0) * (3.0 * k - 1.0))
    };
    let gp = series_sum(Dd::from(1.0), x3, 1, |k| (3.0 * k - 2.0) * (3.0 * k));
    let a = AI0;
    let b = MINUS_AI0_PRIME;
    let ai = a.mul(f).add(b.mul(g).neg());
    let ai_prime = a.mul(fp).add(b.mul(gp).neg());
    let bi = SQRT3.mul(a.mul(f).add(b.mul(g)));
    let bi_prime = SQRT3.mul(a.mul(fp).add(b.mul(gp)));
    AiryValues {
        ai: ai.to_f64(),
        ai_prime: ai_prime.to_f64(),
        bi: bi.to_f64(),
        bi_prime: bi_prime.to_f64(),
    }
}

const ASYMPTOTIC_MAX_TERMS: usize = 60;

/// The coefficients `u_k` and `v_k` of the Airy asymptotic series.
fn uv_coefficients() -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0];
    let mut v = vec![1.0];
    for k in 1..ASYMPTOTIC_MAX_TERMS {
        let kf = k as f64;
        let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(uk);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
    }
    (u, v)
}

/// Sums `sum_k sign^k c_{start + step k} / zeta^{start + step k}`, truncated at the smallest term.
fn truncated(c: &[f64], zeta: f64, start: usize, step: usize, alternate: bool) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = start;
    let mut sign = 1.0;
    while k < c.len() {
        let t = c[k] / zeta.powi(k as i32);
        if t.abs() > prev {
            break;
        }
        sum += sign * t;
        prev = t.abs();
        if t.abs() < 1e-17 * sum.abs() {
            break;
        }
        if alternate {
            sign = -sign;
        }
        k += step;
    }
    sum
}

fn asymptotic(x: f64) -> AiryValues {
    let (u, v) = uv_coefficients();
    let sqrt_pi = PI.sqrt();
    if x > 0.0 {
        let zeta = 2.0 / 3.0 * x * x.sqrt();
        let x14 = x.sqrt().sqrt();
        let su_alt = truncated_alternating_all(&u, zeta);
        let sv_alt = truncated_alternating_all(&v, zeta);
        let su = truncated(&u, zeta, 0, 1, false);
        let sv = truncated(&v, zeta, 0, 1, false);
        let decay = (-zeta).exp();
        let growth = zeta.exp();
        AiryValues {
            ai: decay / (2.0 * sqrt_pi * x14) * su_alt,
            ai_prime: -x14 * decay / (2.0 * sqrt_pi) * sv_alt,
            bi: growth / (sqrt_pi * x14) * su,
            bi_prime: x14 * growth / sqrt_pi * sv,
        }
    } else {
        let y = -x;
        let zeta = 2.0 / 3.0 * y * y.sqrt();
        let y14 = y.sqrt().sqrt();
        let phase = zeta - FRAC_PI_4;
        let (s, c) = phase.sin_cos();
        let ue = truncated(&u, zeta, 0, 2, true);
        let uo = truncated(&u, zeta, 1, 2, true);
        let ve = truncated(&v, zeta, 0, 2, true);
        let vo = truncated(&v, zeta, 1, 2, true);
        AiryValues {
            ai: (c * ue + s * uo) / (sqrt_pi * y14),
            ai_prime: y14 / sqrt_pi * (s * ve - c * vo),
            bi: (-s * ue + c * uo) / (sqrt_pi * y14),
            bi_prime: y14 / sqrt_pi * (c * ve + s * vo),
        }
    }
}

fn truncated_alternating_all(c: &[f64], zeta: f64) -> f64 {
    truncated(c, zeta, 0, 1, true)
}
