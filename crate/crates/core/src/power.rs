//! MCPA input-power models.
//!
//! Two variants are supported:
//!
//! - [`Variant::ClassAB`]: sleep power at zero load, otherwise
//!   `p_sta + alpha * p_out`.
//! - [`Variant::Doherty`]: as Class-AB up to the threshold `p_th`; above it the
//!   efficiency grows linearly in dB of output power, so
//!   `p_in = p_out / (beta * 10 log10(p_out) + gamma)` on `(p_th, p_max]`.
//!
//! The branches are not forced to meet at `p_th`. [`PowerModelParams::threshold_jump`]
//! reports how far apart they are.

use std::f64::consts::LN_10;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Doherty,
    ClassAB,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Doherty => "doherty",
            Variant::ClassAB => "classab",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "doherty" => Ok(Variant::Doherty),
            "classab" | "class-ab" | "class_ab" => Ok(Variant::ClassAB),
            other => Err(Error::InvalidParams(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Constants of the MCPA power model. All powers are in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_th: f64,
    pub p_max: f64,
    pub p_sta: f64,
    pub p_slp: f64,
    pub variant: Variant,
}

/// Names of the built-in parameter presets.
pub const PRESET_NAMES: [&str; 3] = ["exp1", "exp2", "exp3"];

impl PowerModelParams {
    /// Validates and builds a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        p_th: f64,
        p_max: f64,
        p_sta: f64,
        p_slp: f64,
        variant: Variant,
    ) -> Result<Self> {
        let params = Self {
            alpha,
            beta,
            gamma,
            p_th,
            p_max,
            p_sta,
            p_slp,
            variant,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha, self.beta, self.gamma, self.p_th, self.p_max, self.p_sta, self.p_slp,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all constants must be finite".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.p_slp >= 0.0 && self.p_sta > self.p_slp) {
            return Err(Error::InvalidParams(format!(
                "need p_sta > p_slp >= 0, got p_sta={} p_slp={}",
                self.p_sta, self.p_slp
            )));
        }
        match self.variant {
            Variant::ClassAB => {
                if self.p_max <= 0.0 {
                    return Err(Error::InvalidParams(format!("p_max must be > 0, got {}", self.p_max)));
                }
            }
            Variant::Doherty => {
                if !(0.0 < self.p_th && self.p_th < self.p_max) {
                    return Err(Error::InvalidParams(format!(
                        "need 0 < p_th < p_max, got p_th={} p_max={}",
                        self.p_th, self.p_max
                    )));
                }
                // The denominator is monotone in p, so checking both ends of
                // the Doherty interval covers all of it.
                let lo = self.efficiency(self.p_th);
                let hi = self.efficiency(self.p_max);
                if lo <= 0.0 || hi <= 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "efficiency denominator must stay positive on (p_th, p_max]; \
                         got {lo} at p_th and {hi} at p_max"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Built-in parameter columns for the three reference experiments.
    pub fn preset(name: &str) -> Option<Self> {
        let (beta, gamma, p_th, p_max, p_sta, p_slp) = match name {
            "exp1" => (0.03, -0.06, 5.0, 40.0, 20.0, 13.0),
            "exp2" => (0.03, -0.06, 5.0, 60.0, 20.0, 13.0),
            "exp3" => (0.025, 0.01, 4.0, 40.0, 14.0, 9.0),
            _ => return None,
        };
        Some(Self {
            alpha: 2.7,
            beta,
            gamma,
            p_th,
            p_max,
            p_sta,
            p_slp,
            variant: Variant::Doherty,
        })
    }

    /// Doherty efficiency `beta * 10 log10(p) + gamma`.
    #[inline]
    fn efficiency(&self, p: f64) -> f64 {
        self.beta * 10.0 * p.log10() + self.gamma
    }

    /// `10 beta / ln 10`, the derivative of the efficiency w.r.t. `ln p`.
    #[inline]
    fn efficiency_slope(&self) -> f64 {
        10.0 * self.beta / LN_10
    }

    fn in_doherty_region(&self, p_out: f64) -> bool {
        self.variant == Variant::Doherty && p_out > self.p_th
    }

    /// Input power drawn by one MCPA delivering `p_out` watts.
    pub fn input_power(&self, p_out: f64) -> Result<f64> {
        if !(0.0..=self.p_max).contains(&p_out) {
            return Err(Error::Domain {
                p_out,
                lo: 0.0,
                hi: self.p_max,
            });
        }
        Ok(self.input_power_unchecked(p_out))
    }

    /// [`Self::input_power`] without the domain check. Callers must ensure
    /// `0 <= p_out <= p_max`.
    #[inline]
    pub(crate) fn input_power_unchecked(&self, p_out: f64) -> f64 {
        if p_out == 0.0 {
            self.p_slp
        } else if self.in_doherty_region(p_out) {
            p_out / self.efficiency(p_out)
        } else {
            self.p_sta + self.alpha * p_out
        }
    }

    fn check_derivative_domain(&self, p_out: f64) -> Result<()> {
        let (lo, hi) = match self.variant {
            Variant::Doherty => (self.p_th, self.p_max),
            Variant::ClassAB => (0.0, self.p_max),
        };
        if p_out > lo && p_out < hi {
            Ok(())
        } else {
            Err(Error::Domain { p_out, lo, hi })
        }
    }

    /// First derivative of the input power on the open Doherty interval.
    ///
    /// With `g(p) = beta (10/ln 10) ln p + gamma` and `c = 10 beta / ln 10`
    /// this is `(g - c) / g^2`. For Class-AB the slope is `alpha` on `(0, p_max)`.
    pub fn d_input_power(&self, p_out: f64) -> Result<f64> {
        self.check_derivative_domain(p_out)?;
        if self.variant == Variant::ClassAB {
            return Ok(self.alpha);
        }
        let g = self.efficiency(p_out);
        let c = self.efficiency_slope();
        Ok((g - c) / (g * g))
    }

    /// Second derivative, `(c/p) (2c - g) / g^3`. Zero for Class-AB.
    pub fn d2_input_power(&self, p_out: f64) -> Result<f64> {
        self.check_derivative_domain(p_out)?;
        if self.variant == Variant::ClassAB {
            return Ok(0.0);
        }
        let g = self.efficiency(p_out);
        let c = self.efficiency_slope();
        Ok((c / p_out) * (2.0 * c - g) / (g * g * g))
    }

    /// Right limit of the Doherty branch at `p_th` minus the linear branch
    /// value there. Zero for Class-AB.
    pub fn threshold_jump(&self) -> f64 {
        match self.variant {
            Variant::ClassAB => 0.0,
            Variant::Doherty => {
                self.p_th / self.efficiency(self.p_th) - (self.p_sta + self.alpha * self.p_th)
            }
        }
    }

    /// Second-order expansion of the input power around the configured midpoint.
    pub fn taylor_coeffs(&self) -> Result<QuadraticCoeffs> {
        self.taylor_coeffs_with(MidpointRule::Literal)
    }

    pub fn taylor_coeffs_with(&self, rule: MidpointRule) -> Result<QuadraticCoeffs> {
        let p_mid = rule.midpoint(self);
        if self.variant == Variant::Doherty && p_mid <= self.p_th {
            return Err(Error::InvalidParams(format!(
                "expansion point {p_mid} W is not above p_th={} W",
                self.p_th
            )));
        }
        Ok(QuadraticCoeffs {
            p_mid,
            f0: self.input_power(p_mid)?,
            f1: self.d_input_power(p_mid)?,
            f2: self.d2_input_power(p_mid)?,
        })
    }
}

/// Where the quadratic surrogate is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MidpointRule {
    /// `(p_max - p_th) / 2`.
    #[default]
    Literal,
    /// `(p_max + p_th) / 2`, the centre of the Doherty interval.
    Interval,
}

impl MidpointRule {
    pub fn midpoint(self, params: &PowerModelParams) -> f64 {
        match self {
            MidpointRule::Literal => (params.p_max - params.p_th) / 2.0,
            MidpointRule::Interval => (params.p_max + params.p_th) / 2.0,
        }
    }
}

impl fmt::Display for MidpointRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MidpointRule::Literal => "literal",
            MidpointRule::Interval => "interval",
        })
    }
}

impl FromStr for MidpointRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(MidpointRule::Literal),
            "interval" => Ok(MidpointRule::Interval),
            other => Err(Error::Config(format!("unknown midpoint rule `{other}`"))),
        }
    }
}

/// `q(x) = f0 + f1 (x - p_mid) + f2/2 (x - p_mid)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoeffs {
    pub p_mid: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
}

impl QuadraticCoeffs {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.p_mid;
        self.f0 + self.f1 * d + 0.5 * self.f2 * d * d
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        self.f1 + self.f2 * (x - self.p_mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> PowerModelParams {
        PowerModelParams::preset("exp1").unwrap()
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn second_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    #[test]
    fn presets_match_reference_table() {
        let e1 = exp1();
        assert_eq!(
            (e1.alpha, e1.beta, e1.gamma, e1.p_th, e1.p_max, e1.p_sta, e1.p_slp),
            (2.7, 0.03, -0.06, 5.0, 40.0, 20.0, 13.0)
        );
        let e2 = PowerModelParams::preset("exp2").unwrap();
        assert_eq!(
            (e2.alpha, e2.beta, e2.gamma, e2.p_th, e2.p_max, e2.p_sta, e2.p_slp),
            (2.7, 0.03, -0.06, 5.0, 60.0, 20.0, 13.0)
        );
        let e3 = PowerModelParams::preset("exp3").unwrap();
        assert_eq!(
            (e3.alpha, e3.beta, e3.gamma, e3.p_th, e3.p_max, e3.p_sta, e3.p_slp),
            (2.7, 0.025, 0.01, 4.0, 40.0, 14.0, 9.0)
        );
        for name in PRESET_NAMES {
            PowerModelParams::preset(name).unwrap().validate().unwrap();
        }
        assert!(PowerModelParams::preset("exp4").is_none());
    }

    #[test]
    fn input_power_branches() {
        let p = exp1();
        let at20 = p.input_power(20.0).unwrap();
        assert!((at20 - 60.55).abs() < 0.01, "{at20}");
        assert_eq!(p.input_power(0.0).unwrap(), 13.0);
        let at40 = p.input_power(40.0).unwrap();
        assert!((at40 - 95.1).abs() < 0.05, "{at40}");
        assert!((p.input_power(3.0).unwrap() - 28.1).abs() < 1e-12);
        // Exactly at the threshold the linear branch applies.
        assert_eq!(p.input_power(5.0).unwrap(), 20.0 + 2.7 * 5.0);
    }

    #[test]
    fn input_power_rejects_out_of_domain() {
        let p = exp1();
        assert!(matches!(p.input_power(40.0001), Err(Error::Domain { .. })));
        assert!(matches!(p.input_power(-1e-9), Err(Error::Domain { .. })));
        assert!(p.input_power(f64::NAN).is_err());
    }

    #[test]
    fn class_ab_is_linear_everywhere() {
        let mut p = exp1();
        p.variant = Variant::ClassAB;
        assert_eq!(p.input_power(0.0).unwrap(), 13.0);
        assert!((p.input_power(30.0).unwrap() - (20.0 + 2.7 * 30.0)).abs() < 1e-12);
        assert_eq!(p.d_input_power(30.0).unwrap(), 2.7);
        assert_eq!(p.d2_input_power(30.0).unwrap(), 0.0);
        assert_eq!(p.threshold_jump(), 0.0);
    }

    #[test]
    fn threshold_jump_is_small_for_exp1() {
        let jump = exp1().threshold_jump();
        assert!(jump.abs() < 0.2 && jump.abs() > 0.01, "{jump}");
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let p = exp1();
        let fd = central_diff(|x| p.input_power(x).unwrap(), 17.5, 1e-4);
        let an = p.d_input_power(17.5).unwrap();
        assert!(((an - fd) / fd).abs() < 1e-6, "{an} vs {fd}");
        assert!((an - 1.865).abs() < 1e-3, "{an}");

        let p3 = PowerModelParams::preset("exp3").unwrap();
        let fd = central_diff(|x| p3.input_power(x).unwrap(), 18.0, 1e-4);
        let an = p3.d_input_power(18.0).unwrap();
        assert!(((an - fd) / fd).abs() < 1e-6, "{an} vs {fd}");
    }

    #[test]
    fn second_derivative_is_negative_for_exp1() {
        let p = exp1();
        let fd = second_diff(|x| p.input_power(x).unwrap(), 17.5, 1e-3);
        let an = p.d2_input_power(17.5).unwrap();
        assert!(((an - fd) / fd).abs() < 1e-5, "{an} vs {fd}");
        assert!((an - (-0.0127)).abs() < 5e-5, "{an}");
        // f'' has the sign of 2c - g(p): convex just above p_th, concave from
        // p = 10^((2c - gamma) / 10 beta) ~ 11.7 W up to p_max.
        let c = 10.0 * p.beta / LN_10;
        let turn = 10f64.powf((2.0 * c - p.gamma) / (10.0 * p.beta));
        assert!(turn > 11.6 && turn < 11.8, "{turn}");
        for k in 1..=100 {
            let x = p.p_th + (p.p_max - p.p_th) * k as f64 / 101.0;
            let fd = second_diff(|x| p.input_power(x).unwrap(), x, 1e-3);
            if (x - turn).abs() > 0.05 {
                assert_eq!(fd < 0.0, x > turn, "f'' sign at {x}: {fd}");
            }
        }
        assert!(turn < p.taylor_coeffs().unwrap().p_mid);
    }

    #[test]
    fn second_derivative_vanishes_as_beta_shrinks() {
        let p = PowerModelParams::new(2.7, 1e-9, 0.3, 5.0, 40.0, 20.0, 13.0, Variant::Doherty)
            .unwrap();
        assert!(p.d2_input_power(20.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn derivatives_reject_linear_region() {
        let p = exp1();
        assert!(p.d_input_power(5.0).is_err());
        assert!(p.d2_input_power(40.0).is_err());
        assert!(p.d_input_power(20.0).is_ok());
    }

    #[test]
    fn taylor_coefficients() {
        let c = exp1().taylor_coeffs().unwrap();
        assert_eq!(c.p_mid, 17.5);
        assert!((c.f0 - 55.93).abs() < 0.01, "{}", c.f0);
        assert!((c.f1 - 1.865).abs() < 1e-3);
        assert!((c.f2 + 0.0127).abs() < 5e-5);
        assert_eq!(c.eval(c.p_mid), c.f0);

        let c2 = PowerModelParams::preset("exp2").unwrap().taylor_coeffs().unwrap();
        assert_eq!(c2.p_mid, 27.5);

        let ci = exp1().taylor_coeffs_with(MidpointRule::Interval).unwrap();
        assert_eq!(ci.p_mid, 22.5);
    }

    #[test]
    fn taylor_rejects_midpoint_in_linear_region() {
        let p = PowerModelParams::new(2.7, 0.03, -0.06, 15.0, 40.0, 20.0, 13.0, Variant::Doherty)
            .unwrap();
        assert!(matches!(p.taylor_coeffs(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn validation() {
        let bad = |r: Result<PowerModelParams>| assert!(matches!(r, Err(Error::InvalidParams(_))));
        bad(PowerModelParams::new(0.0, 0.03, -0.06, 5.0, 40.0, 20.0, 13.0, Variant::Doherty));
        bad(PowerModelParams::new(2.7, 0.03, -0.06, 50.0, 40.0, 20.0, 13.0, Variant::Doherty));
        bad(PowerModelParams::new(2.7, 0.03, -0.06, 5.0, 40.0, 13.0, 13.0, Variant::Doherty));
        // Denominator 0.3 log10(2) - 0.2 < 0 at p_th = 2.
        bad(PowerModelParams::new(2.7, 0.03, -0.2, 2.0, 40.0, 20.0, 13.0, Variant::Doherty));
    }
}
