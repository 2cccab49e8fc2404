//! `∫ B²(t) dt` over scenario field profiles.

use super::profile::FieldProfile;
use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;
/// Levels subdivided unconditionally before the error test is trusted.
const MIN_DEPTH: u32 = 4;
const REL_TOL: f64 = 1e-12;

/// `∫_{t0}^{t1} B²(t) dt`.
///
/// Constant fields use the closed form. Ramp and table fields are piecewise
/// linear, so `B²` is piecewise quadratic and Simpson's rule on each linear
/// piece is exact. Other profiles use adaptive Simpson with absolute tolerance
/// `1e-12 (t1 - t0) max|B|²`.
pub fn integrate_b_squared(p: &FieldProfile, t0: f64, t1: f64) -> Result<f64> {
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidInput(format!(
            "integration bounds must satisfy t0 <= t1, got [{t0}, {t1}]"
        )));
    }
    p.sample(t0)?;
    p.sample(t1)?;
    if t0 == t1 {
        return Ok(0.0);
    }
    let b2 = |t: f64| p.sample(t).map(|b| b * b);
    match p {
        FieldProfile::Constant { value } => Ok(value * value * (t1 - t0)),
        FieldProfile::LinearRamp { .. } => simpson(&b2, t0, t1),
        FieldProfile::SampledTable { times, .. } => {
            let mut knots = vec![t0];
            knots.extend(times.iter().copied().filter(|&x| x > t0 && x < t1));
            knots.push(t1);
            knots.windows(2).map(|w| simpson(&b2, w[0], w[1])).sum()
        }
        FieldProfile::Sinusoid { .. } => {
            let bound = p.max_abs_bound(t0, t1)?;
            if bound == 0.0 {
                return Ok(0.0);
            }
            let tol = REL_TOL * (t1 - t0) * bound * bound;
            adaptive_simpson(&b2, t0, t1, tol)
        }
    }
}

fn simpson(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    Ok((b - a) / 6.0 * (f(a)? + 4.0 * f(m)? + f(b)?))
}

fn adaptive_simpson(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, [a, m, b], [fa, fm, fb], whole, tol, 0)
}

fn refine(
    f: &impl Fn(f64) -> Result<f64>,
    [a, m, b]: [f64; 3],
    [fa, fm, fb]: [f64; 3],
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(
        refine(f, [a, lm, m], [fa, flm, fm], left, 0.5 * tol, depth + 1)?
            + refine(f, [m, rm, b], [fm, frm, fb], right, 0.5 * tol, depth + 1)?,
    )
}

/// Running `∫_0^t B²` evaluated at nondecreasing times, reusing the
/// previously integrated prefix.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral<'a> {
    profile: &'a FieldProfile,
    t: f64,
    value: f64,
}

impl<'a> CumulativeIntegral<'a> {
    pub fn new(profile: &'a FieldProfile, t0: f64) -> Self {
        Self {
            profile,
            t: t0,
            value: 0.0,
        }
    }

    pub fn advance_to(&mut self, t: f64) -> Result<f64> {
        if t < self.t {
            return Err(Error::InvalidInput(format!(
                "cumulative integral cannot move backwards from {} to {t}",
                self.t
            )));
        }
        self.value += integrate_b_squared(self.profile, self.t, t)?;
        self.t = t;
        Ok(self.value)
    }
}
