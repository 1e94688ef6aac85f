//! Ideal-gas constants and the equation-of-state relations linking pressure
//! `p`, Exner pressure `π`, and the mass-weighted potential temperature
//! `P = ρΘ`.
//!
//! ```text
//! π = (p / p_ref)^(R/c_p)          P = (p_ref / R) π^(c_v/R)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dry-air constants plus gravity and the (constant) Coriolis parameter.
///
/// `c_v` and `γ` are derived, so `c_v = c_p − R` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasConstants {
    /// Gas constant, J kg⁻¹ K⁻¹.
    pub r: f64,
    /// Specific heat at constant pressure, J kg⁻¹ K⁻¹.
    pub cp: f64,
    /// Reference pressure, Pa.
    pub p_ref: f64,
    /// Gravitational acceleration, m s⁻².
    pub g: f64,
    /// Coriolis parameter, s⁻¹.
    pub f: f64,
}

impl Default for GasConstants {
    fn default() -> Self {
        Self {
            r: 287.4,
            cp: 1004.9,
            p_ref: 1.0e5,
            g: 9.81,
            f: 0.0,
        }
    }
}

impl GasConstants {
    pub fn cv(&self) -> f64 {
        self.cp - self.r
    }

    pub fn gamma(&self) -> f64 {
        self.cp / self.cv()
    }

    /// R / c_p
    pub fn kappa(&self) -> f64 {
        self.r / self.cp
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r > 0.0
            && self.cp > self.r
            && self.p_ref > 0.0
            && self.g >= 0.0
            && self.f.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid gas constants {self:?}")))
        }
    }

    /// Exner pressure from pressure.
    pub fn exner_from_p(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!("pressure must be positive, got {p}")));
        }
        Ok((p / self.p_ref).powf(self.kappa()))
    }

    /// Inverse of [`exner_from_p`](Self::exner_from_p).
    pub fn p_from_exner(&self, pi: f64) -> Result<f64> {
        if !(pi > 0.0) {
            return Err(Error::Domain(format!("Exner pressure must be positive, got {pi}")));
        }
        Ok(self.p_ref * pi.powf(self.cp / self.r))
    }

    /// Mass-weighted potential temperature `P = ρΘ` from the Exner pressure.
    pub fn big_p_from_pi(&self, pi: f64) -> Result<f64> {
        if !(pi > 0.0) {
            return Err(Error::Domain(format!("Exner pressure must be positive, got {pi}")));
        }
        Ok(self.p_ref / self.r * pi.powf(self.cv() / self.r))
    }

    /// Inverse of [`big_p_from_pi`](Self::big_p_from_pi).
    pub fn pi_from_big_p(&self, big_p: f64) -> Result<f64> {
        if !(big_p > 0.0) {
            return Err(Error::Domain(format!("P must be positive, got {big_p}")));
        }
        Ok((big_p * self.r / self.p_ref).powf(self.r / self.cv()))
    }

    /// `dP/dπ`, the linearization coefficient of the equation of state.
    pub fn dp_dpi(&self, pi: f64) -> Result<f64> {
        if !(pi > 0.0) {
            return Err(Error::Domain(format!("Exner pressure must be positive, got {pi}")));
        }
        let e = self.cv() / self.r;
        Ok(self.p_ref / self.r * e * pi.powf(e - 1.0))
    }

    /// `dP/dπ` expressed directly through `P`; avoids a round trip through π
    /// in the hot loops.
    pub(crate) fn dp_dpi_from_big_p(&self, big_p: f64) -> f64 {
        // P = a π^e  =>  dP/dπ = e P / π
        let e = self.cv() / self.r;
        let pi = (big_p * self.r / self.p_ref).powf(1.0 / e);
        e * big_p / pi
    }

    /// Speed of sound `√(γ R T)`.
    pub fn sound_speed(&self, temperature: f64) -> Result<f64> {
        if !(temperature > 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok((self.gamma() * self.r * temperature).sqrt())
    }
}
