//! Resolved model configuration and its validation gates.

use serde::{Deserialize, Serialize};

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::noise::{check_alpha, validate_spectrum, NoiseRole, NoiseSpectrum};
use crate::spectral::{SpectralField, LAMBDA_1};

/// Any coefficient above this magnitude aborts the path.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Independent on/off switches for each term; disabling terms gives the
/// linear test modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Switches {
    pub nonlinearity: bool,
    pub f: bool,
    pub g: bool,
    pub slow_noise: bool,
    pub fast_noise: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Switches {
            nonlinearity: true,
            f: true,
            g: true,
            slow_noise: true,
            fast_noise: true,
        }
    }
}

impl Switches {
    /// Everything off: pure heat flow.
    pub fn linear() -> Self {
        Switches {
            nonlinearity: false,
            f: false,
            g: false,
            slow_noise: false,
            fast_noise: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// Time-scale ratio `ε`.
    pub eps: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub dt: f64,
    /// Number of Galerkin modes per parity (`|k| <= m`).
    pub m: usize,
    pub alpha: f64,
    pub slow_noise: NoiseSpectrum,
    pub fast_noise: NoiseSpectrum,
    pub coupling: Coupling,
    pub switches: Switches,
    /// Block length `δ` of the auxiliary (frozen-slow-state) process.
    pub delta: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub x0: SpectralField,
    pub y0: SpectralField,
}

/// Default initial slow state `e₁ + ½ e₂`.
pub fn default_x0(m: usize) -> SpectralField {
    let cos: Vec<f64> = [1.0, 0.5].into_iter().take(m).collect();
    SpectralField::from_parts(m, &cos, &[]).expect("fits")
}

impl SystemConfig {
    /// Defaults for everything except `ε` and `T`.
    pub fn new(eps: f64, horizon: f64) -> Self {
        let alpha = 1.5;
        let m = 16;
        let delta = 0.1f64.min(horizon);
        SystemConfig {
            eps,
            horizon,
            dt: default_dt(eps, delta),
            m,
            alpha,
            slow_noise: NoiseSpectrum::default_slow(alpha),
            fast_noise: NoiseSpectrum::default_fast(alpha),
            coupling: Coupling::default(),
            switches: Switches::default(),
            delta,
            record_stride: 1,
            seed: 0,
            x0: default_x0(m),
            y0: SpectralField::zeros(m),
        }
    }

    /// Changes the truncation, resizing the initial data.
    pub fn with_modes(mut self, m: usize) -> Self {
        self.m = m;
        self.x0 = self.x0.resized(m);
        self.y0 = self.y0.resized(m);
        self
    }

    /// Changes `α` in the config and both spectra.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.slow_noise.alpha = alpha;
        self.fast_noise.alpha = alpha;
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Time of step `j`.
    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// `λ₁ - L_g`.
    pub fn dissipativity_gap(&self) -> f64 {
        LAMBDA_1 - self.effective_coupling_l_g()
    }

    fn effective_coupling_l_g(&self) -> f64 {
        if self.switches.g {
            self.coupling.l_g()
        } else {
            0.0
        }
    }

    /// Checks every gate; the error names the violated condition.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        positive("eps", self.eps)?;
        positive("T", self.horizon)?;
        positive("dt", self.dt)?;
        positive("delta", self.delta)?;
        if self.m == 0 {
            return Err(Error::condition(
                "galerkin truncation",
                "m must be at least 1",
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::condition(
                "recording",
                "record_stride must be at least 1",
            ));
        }
        let slack = 1.0 + 1e-9;
        if self.dt > self.eps / 20.0 * slack {
            return Err(Error::condition(
                "time step",
                format!("dt = {} exceeds eps/20 = {}", self.dt, self.eps / 20.0),
            ));
        }
        if self.dt > self.delta / 4.0 * slack {
            return Err(Error::condition(
                "time step",
                format!("dt = {} exceeds delta/4 = {}", self.dt, self.delta / 4.0),
            ));
        }
        for (name, spec, role) in [
            ("slow noise", &self.slow_noise, NoiseRole::Slow),
            ("fast noise", &self.fast_noise, NoiseRole::Fast),
        ] {
            if spec.role != role {
                return Err(Error::Config(format!(
                    "{name} spectrum has role {:?}",
                    spec.role
                )));
            }
            if spec.alpha != self.alpha {
                return Err(Error::Config(format!(
                    "{name} spectrum alpha {} differs from alpha {}",
                    spec.alpha, self.alpha
                )));
            }
            validate_spectrum(spec, self.m)?;
        }
        let c = &self.coupling;
        for v in [c.f_x, c.f_y, c.g_x, c.g_y] {
            if !v.is_finite() {
                return Err(Error::condition(
                    "condition A1",
                    "coupling coefficients must be finite",
                ));
            }
        }
        if !c.f_bound().is_finite() {
            return Err(Error::condition(
                "condition A3",
                "f must be uniformly bounded",
            ));
        }
        let gap = self.dissipativity_gap();
        if !(gap > 0.0) {
            return Err(Error::condition(
                "condition A4",
                format!(
                    "lambda1 - L_g must be positive (lambda1 = {LAMBDA_1:.6}, L_g = {})",
                    c.l_g()
                ),
            ));
        }
        if self.x0.m() != self.m || self.y0.m() != self.m {
            return Err(Error::Config(format!(
                "initial data must have m = {} modes",
                self.m
            )));
        }
        Ok(())
    }
}

/// `min(eps/20, delta/4)`.
pub fn default_dt(eps: f64, delta: f64) -> f64 {
    (eps / 20.0).min(delta / 4.0)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SystemConfig::new(0.01, 1.0);
        cfg.validate().unwrap();
        assert_eq!(cfg.dt, 0.0005);
        assert_eq!(cfg.steps(), 2000);
        assert_eq!(cfg.x0.coeff(1), 1.0);
        assert_eq!(cfg.x0.coeff(2), 0.5);
    }

    #[test]
    fn step_count_rounds_up_partial_steps() {
        let mut cfg = SystemConfig::new(0.03, 1.0);
        cfg.dt = 0.0015;
        assert_eq!(cfg.steps(), 667);
    }

    #[test]
    fn gates_name_their_condition() {
        let mut cfg = SystemConfig::new(0.01, 1.0);
        cfg.coupling.g_y = 50.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(
            msg.contains("condition A4: lambda1 - L_g must be positive"),
            "{msg}"
        );

        let cfg = SystemConfig::new(0.01, 1.0).with_alpha(2.5);
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("alpha out of (1,2)"));

        let mut cfg = SystemConfig::new(0.01, 1.0);
        cfg.slow_noise = NoiseSpectrum::slow(1.5, 1.0, 0.8);
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("condition A2"));

        let mut cfg = SystemConfig::new(0.01, 1.0);
        cfg.dt = 0.001;
        assert!(cfg.validate().unwrap_err().to_string().contains("eps/20"));
    }

    #[test]
    fn disabled_g_has_full_gap() {
        let mut cfg = SystemConfig::new(0.01, 1.0);
        cfg.switches.g = false;
        assert_eq!(cfg.dissipativity_gap(), LAMBDA_1);
    }
}
