//! Symmetric α-stable sampling, cylindrical noise spectra, and exact per-mode
//! updates of the stable stochastic convolutions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::eigenvalue;

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::condition(
            "stability index",
            format!("alpha out of (1,2): got {alpha}"),
        ))
    }
}

/// One draw of the standard symmetric α-stable law, `E e^{ihX} = e^{-|h|^α}`
/// (Chambers–Mallows–Stuck). No argument checks.
#[inline]
pub fn standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * (rng.sample::<f64, _>(Open01) - 0.5);
    let e: f64 = rng.sample(Exp1);
    let au = alpha * u;
    au.sin() / u.cos().powf(1.0 / alpha) * ((u - au).cos() / e).powf((1.0 - alpha) / alpha)
}

/// One draw of `SαS(scale)`: `E e^{ihX} = e^{-scale^α |h|^α}`.
pub fn sample_sas<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale must be finite and nonnegative, got {scale}"
        )));
    }
    let x = standard_sas(alpha, rng);
    Ok(if scale == 0.0 { 0.0 } else { scale * x })
}

/// Scale of the exact increment of one mode of `ε^{-1/α} ∫ e^{(t-s)A/ε} dZ_s`
/// over a step `dt`: `σ [(1 - e^{-αλ dt/ε}) / (αλ)]^{1/α}`. The slow
/// convolution is the case `eps = 1`.
#[inline]
pub fn convolution_scale(lambda: f64, sigma: f64, dt: f64, eps: f64, alpha: f64) -> f64 {
    let h = dt / eps;
    sigma * (-(-alpha * lambda * h).exp_m1() / (alpha * lambda)).powf(1.0 / alpha)
}

/// Scale of the stationary law of one mode, `σ (αλ)^{-1/α}`.
pub fn stationary_scale(lambda: f64, sigma: f64, alpha: f64) -> f64 {
    sigma * (alpha * lambda).powf(-1.0 / alpha)
}

/// Advances one mode of a stable stochastic convolution by `dt`, exactly in
/// law: `e^{-λ dt/ε} state + ξ` with `ξ ~ SαS(convolution_scale(..))`.
pub fn convolution_step<R: Rng + ?Sized>(
    state: f64,
    lambda: f64,
    sigma: f64,
    dt: f64,
    eps: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(dt > 0.0) || !(eps > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0, eps > 0, lambda > 0 (got dt={dt}, eps={eps}, lambda={lambda})"
        )));
    }
    let scale = convolution_scale(lambda, sigma, dt, eps, alpha);
    let xi = sample_sas(alpha, scale, rng)?;
    Ok((-lambda * dt / eps).exp() * state + xi)
}

/// Which noise the spectrum drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRole {
    /// `L`, with `β_k = c₀ λ_k^{-β}`.
    Slow,
    /// `Z`, with scales `γ_k`.
    Fast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// `σ_k = c₀ λ_k^{-exponent}`.
    PowerLaw { c0: f64, exponent: f64 },
    /// Explicit `σ_1, σ_2, ...`; needs at least `m` entries.
    Raw(Vec<f64>),
}

/// Per-mode scales of a cylindrical α-stable process. Cosine and sine modes
/// of the same `|k|` share a scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub alpha: f64,
    pub role: NoiseRole,
    pub decay: Decay,
}

impl NoiseSpectrum {
    pub fn slow(alpha: f64, c0: f64, beta: f64) -> Self {
        NoiseSpectrum {
            alpha,
            role: NoiseRole::Slow,
            decay: Decay::PowerLaw { c0, exponent: beta },
        }
    }

    pub fn fast(alpha: f64, c0: f64, exponent: f64) -> Self {
        NoiseSpectrum {
            alpha,
            role: NoiseRole::Fast,
            decay: Decay::PowerLaw { c0, exponent },
        }
    }

    /// Default slow spectrum `β_k = λ_k^{-1}`.
    pub fn default_slow(alpha: f64) -> Self {
        Self::slow(alpha, 1.0, 1.0)
    }

    /// Default fast spectrum `γ_k = λ_k^{-1/2}`.
    pub fn default_fast(alpha: f64) -> Self {
        Self::fast(alpha, 1.0, 0.5)
    }

    /// Scale of modes `±k`, `k >= 1`.
    pub fn scale(&self, k: usize) -> f64 {
        match &self.decay {
            Decay::PowerLaw { c0, exponent } => c0 * eigenvalue(k).powf(-exponent),
            Decay::Raw(s) => s.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// Scales laid out like the flat coefficients of an `m`-mode field.
    pub fn flat_scales(&self, m: usize) -> Vec<f64> {
        (0..2 * m).map(|i| self.scale(i % m + 1)).collect()
    }

    /// `1/2 + 1/(2α)`, the lower bound on the slow decay exponent.
    pub fn beta_threshold(&self) -> f64 {
        0.5 + 0.5 / self.alpha
    }
}

/// Outcome of a successful [`validate_spectrum`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// `Σ_{k<=m} 2 σ_k^α / λ_k` over cosine and sine modes.
    pub truncated_sum: f64,
    /// Decay exponent in force (declared, or fitted for raw sequences).
    pub exponent: Option<f64>,
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Checks the decay requirements on a noise spectrum truncated to `m` modes:
/// the slow spectrum needs `β > 1/2 + 1/(2α)`, the fast one a summable
/// `Σ γ_k^α / λ_k`. Raw sequences are judged by the power law fitted to
/// their upper half (only with at least 8 modes).
pub fn validate_spectrum(spec: &NoiseSpectrum, m: usize) -> Result<SpectrumReport> {
    check_alpha(spec.alpha)?;
    let alpha = spec.alpha;
    if m == 0 {
        return Err(Error::InvalidArgument("spectrum needs m >= 1".into()));
    }
    if let Decay::Raw(s) = &spec.decay {
        if s.len() < m {
            return Err(Error::InvalidArgument(format!(
                "raw spectrum has {} entries, need {m}",
                s.len()
            )));
        }
    }
    if let Decay::PowerLaw { c0, .. } = spec.decay {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::condition(
                "condition A2",
                format!("amplitude c0 must be positive, got {c0}"),
            ));
        }
    }
    for k in 1..=m {
        let s = spec.scale(k);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::condition(
                "condition A2",
                format!("scale of mode {k} must be positive and finite, got {s}"),
            ));
        }
    }
    let truncated_sum: f64 = (1..=m)
        .map(|k| 2.0 * spec.scale(k).powf(alpha) / eigenvalue(k))
        .sum();

    let tail: Vec<usize> = ((m / 2).max(1)..=m).collect();
    let fitted = |values: &dyn Fn(usize) -> f64| -> Option<f64> {
        if m < 8 {
            return None;
        }
        let xs: Vec<f64> = tail.iter().map(|&k| (k as f64).ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|&k| values(k).ln()).collect();
        Some(ls_slope(&xs, &ys))
    };

    let exponent = match (spec.role, &spec.decay) {
        (NoiseRole::Slow, Decay::PowerLaw { exponent, .. }) => Some(*exponent),
        (NoiseRole::Slow, Decay::Raw(_)) => {
            // σ_k ∝ k^{slope} = λ_k^{slope/2}
            fitted(&|k| spec.scale(k)).map(|slope| -slope / 2.0)
        }
        (NoiseRole::Fast, Decay::PowerLaw { exponent, .. }) => Some(*exponent),
        (NoiseRole::Fast, Decay::Raw(_)) => None,
    };

    match spec.role {
        NoiseRole::Slow => {
            if let Some(beta) = exponent {
                let threshold = spec.beta_threshold();
                if beta <= threshold {
                    return Err(Error::condition(
                        "condition A2",
                        format!(
                            "beta = {beta} <= 1/2 + 1/(2 alpha) = {threshold} for alpha = {alpha}"
                        ),
                    ));
                }
            }
        }
        NoiseRole::Fast => {
            // γ_k^α/λ_k ∝ k^{-2(α r + 1)} for γ_k = λ_k^{-r}
            let divergent = match &spec.decay {
                Decay::PowerLaw { exponent, .. } => 2.0 * (alpha * exponent + 1.0) <= 1.0,
                Decay::Raw(_) => fitted(&|k| spec.scale(k).powf(alpha) / eigenvalue(k))
                    .is_some_and(|s| s >= -1.0),
            };
            if divergent {
                return Err(Error::condition(
                    "condition A2",
                    "sum of gamma_k^alpha / lambda_k diverges for the fast noise spectrum",
                ));
            }
        }
    }
    Ok(SpectrumReport {
        truncated_sum,
        exponent,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    use super::*;
    use crate::spectral::LAMBDA_1;

    #[test]
    fn zero_scale_gives_exact_zero() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_sas(1.5, 0.0, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampler_rejects_bad_arguments() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        assert!(sample_sas(2.0, 1.0, &mut rng).is_err());
        assert!(sample_sas(1.0, 1.0, &mut rng).is_err());
        let err = sample_sas(2.5, 1.0, &mut rng).unwrap_err();
        assert!(err.to_string().contains("alpha out of (1,2)"));
        assert!(sample_sas(1.5, -1.0, &mut rng).is_err());
        assert!(sample_sas(1.5, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn cf_and_median_at_moderate_sample_size() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let n = 200_000;
        let mut xs: Vec<f64> = (0..n).map(|_| standard_sas(1.5, &mut rng)).collect();
        let cf = xs.iter().map(|x| x.cos()).sum::<f64>() / n as f64;
        assert!((cf - (-1.0f64).exp()).abs() < 0.01, "cf = {cf}");
        xs.sort_by(f64::total_cmp);
        assert!(xs[n / 2].abs() < 0.02);
    }

    #[test]
    fn convolution_scale_limits() {
        let (lam, sigma, alpha) = (LAMBDA_1, 1.0, 1.5);
        let stat = convolution_scale(lam, sigma, 1e6, 1.0, alpha);
        assert!((stat - stationary_scale(lam, sigma, alpha)).abs() < 1e-15);
        assert!((stat - (1.0f64 / 59.21762640653615).powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((stat - 0.0658).abs() < 5e-5);
        let dt = 1e-9;
        let small = convolution_scale(lam, sigma, dt, 1.0, alpha);
        assert!((small / dt.powf(1.0 / alpha) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn convolution_scale_depends_on_dt_over_eps_only() {
        let base = convolution_scale(LAMBDA_1 * 4.0, 0.3, 0.01, 1.0, 1.7);
        for eps in [0.5, 0.25, 0.125, 0.0625] {
            let s = convolution_scale(LAMBDA_1 * 4.0, 0.3, 0.01 * eps, eps, 1.7);
            assert!(((s - base) / base).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_step_of_zero_is_zero() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        assert_eq!(
            convolution_step(0.0, LAMBDA_1, 0.0, 0.01, 1.0, 1.5, &mut rng).unwrap(),
            0.0
        );
        let decayed = convolution_step(2.0, LAMBDA_1, 0.0, 0.01, 1.0, 1.5, &mut rng).unwrap();
        assert_eq!(decayed, 2.0 * (-LAMBDA_1 * 0.01).exp());
        assert!(convolution_step(0.0, LAMBDA_1, 1.0, 0.0, 1.0, 1.5, &mut rng).is_err());
    }

    #[test]
    fn spectrum_gate_examples() {
        assert!(validate_spectrum(&NoiseSpectrum::slow(1.5, 1.0, 1.0), 16).is_ok());
        let err = validate_spectrum(&NoiseSpectrum::slow(1.5, 1.0, 0.8), 16).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("condition A2"), "{msg}");
        let ones = NoiseSpectrum {
            alpha: 1.5,
            role: NoiseRole::Fast,
            decay: Decay::Raw(vec![1.0; 32]),
        };
        let report = validate_spectrum(&ones, 32).unwrap();
        // 2 Σ 1/(4π² k²) < 2 π²/6 / (4π²) = 1/12
        assert!(report.truncated_sum < 1.0 / 12.0);
        let bad_alpha = validate_spectrum(&NoiseSpectrum::slow(2.5, 1.0, 1.0), 4).unwrap_err();
        assert!(bad_alpha.to_string().contains("alpha out of (1,2)"));
    }

    #[test]
    fn defaults_pass_for_every_alpha() {
        for alpha in [1.01, 1.2, 1.5, 1.8, 1.99] {
            assert!(validate_spectrum(&NoiseSpectrum::default_slow(alpha), 32).is_ok());
            assert!(validate_spectrum(&NoiseSpectrum::default_fast(alpha), 32).is_ok());
        }
    }

    #[test]
    fn divergent_fast_sequences_are_flagged() {
        // γ_k^α / λ_k ∝ k^0
        let grow: Vec<f64> = (1..=32).map(|k| (k as f64).powf(2.0 / 1.5)).collect();
        let spec = NoiseSpectrum {
            alpha: 1.5,
            role: NoiseRole::Fast,
            decay: Decay::Raw(grow),
        };
        assert!(validate_spectrum(&spec, 32).is_err());
        assert!(validate_spectrum(&NoiseSpectrum::fast(1.5, 1.0, -0.5), 16).is_err());
        assert!(validate_spectrum(&NoiseSpectrum::fast(1.5, 1.0, -0.3), 16).is_ok());
    }

    #[test]
    fn raw_slow_sequences_use_fitted_exponent() {
        let steep: Vec<f64> = (1..=16).map(|k| eigenvalue(k).powf(-1.2)).collect();
        let flat: Vec<f64> = (1..=16).map(|k| eigenvalue(k).powf(-0.6)).collect();
        let mk = |s| NoiseSpectrum {
            alpha: 1.5,
            role: NoiseRole::Slow,
            decay: Decay::Raw(s),
        };
        let ok = validate_spectrum(&mk(steep), 16).unwrap();
        assert!((ok.exponent.unwrap() - 1.2).abs() < 1e-9);
        assert!(validate_spectrum(&mk(flat), 16).is_err());
        assert!(validate_spectrum(&mk(vec![1.0; 4]), 8).is_err());
    }
}
