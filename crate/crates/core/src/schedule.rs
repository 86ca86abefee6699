//! Time switches `eta(t)` and the reference phase `phi0(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary-condition tolerance for user-supplied switches.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Value and first two time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
}

pub type EtaFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

#[derive(Clone)]
pub enum EtaKind {
    /// `10 s^3 - 15 s^4 + 6 s^5`, `s = t / t_f`.
    Quintic,
    /// `sum_k c_k s^k`.
    Polynomial(Vec<f64>),
    /// Arbitrary switch of `t` with its derivatives.
    Custom(EtaFn),
}

impl fmt::Debug for EtaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaKind::Quintic => f.write_str("Quintic"),
            EtaKind::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            EtaKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseConvention {
    /// `phi0 = s (1 - s) [(E_i + E_f) t - E_i t_f]`.
    #[default]
    Polynomial,
    /// Endpoint energies taken as zero, `phi0 = 0`.
    ZeroEnergy,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    t_f: f64,
    e_i: f64,
    e_f: f64,
    eta: EtaKind,
    phase: PhaseConvention,
}

impl Schedule {
    /// Quintic switch with the polynomial phase.
    pub fn new(t_f: f64, e_i: f64, e_f: f64) -> Result<Self> {
        Self::with(t_f, e_i, e_f, EtaKind::Quintic, PhaseConvention::Polynomial)
    }

    pub fn with(t_f: f64, e_i: f64, e_f: f64, eta: EtaKind, phase: PhaseConvention) -> Result<Self> {
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::InvalidSchedule(format!("t_f must be positive, got {t_f}")));
        }
        if !(e_i.is_finite() && e_f.is_finite()) {
            return Err(Error::InvalidSchedule("endpoint energies must be finite".into()));
        }
        let s = Schedule {
            t_f,
            e_i,
            e_f,
            eta,
            phase,
        };
        s.check_boundaries()?;
        Ok(s)
    }

    fn check_boundaries(&self) -> Result<()> {
        let a = self.eta_unchecked(0.0);
        let b = self.eta_unchecked(self.t_f);
        // Rates are compared in units of the protocol duration.
        let checks = [
            ("eta(0)", a.value),
            ("eta(t_f) - 1", b.value - 1.0),
            ("eta'(0)", a.rate * self.t_f),
            ("eta'(t_f)", b.rate * self.t_f),
            ("eta''(0)", a.accel * self.t_f * self.t_f),
            ("eta''(t_f)", b.accel * self.t_f * self.t_f),
        ];
        for (name, v) in checks {
            if !(v.abs() <= BOUNDARY_TOLERANCE) {
                return Err(Error::InvalidSchedule(format!("{name} = {v:e}, must vanish")));
            }
        }
        Ok(())
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn e_i(&self) -> f64 {
        self.e_i
    }

    pub fn e_f(&self) -> f64 {
        self.e_f
    }

    pub fn phase(&self) -> PhaseConvention {
        self.phase
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.t_f;
        if !(t >= -slack && t <= self.t_f + slack) {
            return Err(Error::TimeOutOfRange { t, t_f: self.t_f });
        }
        Ok(t.clamp(0.0, self.t_f))
    }

    pub fn eta(&self, t: f64) -> Result<Jet> {
        Ok(self.eta_unchecked(self.check_time(t)?))
    }

    fn eta_unchecked(&self, t: f64) -> Jet {
        let tf = self.t_f;
        let s = t / tf;
        match &self.eta {
            EtaKind::Quintic => Jet {
                value: s * s * s * (10.0 + s * (-15.0 + 6.0 * s)),
                rate: 30.0 * s * s * (1.0 - s) * (1.0 - s) / tf,
                accel: 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (tf * tf),
            },
            EtaKind::Polynomial(c) => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    v = v * s + ck;
                }
                for (k, &ck) in c.iter().enumerate().skip(1).rev() {
                    d1 = d1 * s + k as f64 * ck;
                }
                for (k, &ck) in c.iter().enumerate().skip(2).rev() {
                    d2 = d2 * s + (k * (k - 1)) as f64 * ck;
                }
                Jet {
                    value: v,
                    rate: d1 / tf,
                    accel: d2 / (tf * tf),
                }
            }
            EtaKind::Custom(f) => f(t),
        }
    }

    /// `(phi0, d phi0 / dt)`.
    pub fn phi0(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.check_time(t)?;
        if self.phase == PhaseConvention::ZeroEnergy {
            return Ok((0.0, 0.0));
        }
        let tf = self.t_f;
        let s = t / tf;
        let p = (self.e_i + self.e_f) * t - self.e_i * tf;
        let value = s * (1.0 - s) * p;
        let rate = (1.0 - 2.0 * s) * p / tf + s * (1.0 - s) * (self.e_i + self.e_f);
        Ok((value, rate))
    }
}
