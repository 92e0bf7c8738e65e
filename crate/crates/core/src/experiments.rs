//! Monte Carlo studies: averaging convergence in `ε`, the Khasminskii
//! block-length sweep, Galerkin refinement, and the property report.
//!
//! Path `i` of every study uses the path seed `path_seed(sys.seed, i)`, so
//! compared runs share their noise and adding paths never changes earlier
//! ones. Paths that blow up are flagged and excluded from the statistics.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::averaging::{contraction_gap, run_averaged, AveragedConfig};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::noise::{convolution_scale, standard_sas, stationary_scale};
use crate::parallel::Executor;
use crate::rng::{derive_seed, path_seed};
use crate::sim::{run_aux, run_pair};
use crate::spectral::{
    cubic_inner_product, growth_ratio, local_lipschitz_ratio, to_physical, SpectralField, LAMBDA_1,
};
use crate::stats::{empirical_cf, linear_fit, mean, median, quantile, trimmed_mean};

/// Shared settings of the Monte Carlo studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub paths: usize,
    /// Moment order of `mean_err_p`; must satisfy `1 <= p < α`.
    pub p: f64,
    pub executor: Executor,
    pub averaged: AveragedConfig,
    /// Abort when more than this fraction of paths is flagged.
    pub max_flagged_fraction: f64,
}

impl StudyConfig {
    pub fn new(sys: &SystemConfig, paths: usize) -> Self {
        StudyConfig {
            paths,
            p: 1.0,
            executor: Executor::default(),
            averaged: AveragedConfig::for_system(sys),
            max_flagged_fraction: 0.2,
        }
    }

    fn check_flagged(&self, label: String, flagged: usize) -> Result<()> {
        if flagged as f64 > self.max_flagged_fraction * self.paths as f64 {
            return Err(Error::StudyAborted {
                label,
                flagged,
                total: self.paths,
            });
        }
        Ok(())
    }
}

fn flag_blowup<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::BlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub n_paths: usize,
    pub n_flagged: usize,
    pub mean_err_p: f64,
    pub median_err: f64,
    pub trimmed_mean_10pct: f64,
    pub q25: f64,
    pub q75: f64,
}

impl ErrorRow {
    fn from_errors(eps: f64, p: f64, errors: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = errors.iter().flatten().copied().collect();
        let powered: Vec<f64> = ok.iter().map(|e| e.powf(p)).collect();
        let stat = |f: &dyn Fn(&[f64]) -> f64| if ok.is_empty() { f64::NAN } else { f(&ok) };
        ErrorRow {
            eps,
            n_paths: errors.len(),
            n_flagged: errors.len() - ok.len(),
            mean_err_p: if ok.is_empty() {
                f64::NAN
            } else {
                mean(&powered)
            },
            median_err: stat(&median),
            trimmed_mean_10pct: stat(&|d| trimmed_mean(d, 0.1)),
            q25: stat(&|d| quantile(d, 0.25)),
            q75: stat(&|d| quantile(d, 0.75)),
        }
    }
}

/// `err = sup_t ‖X^ε_t - X̄_t‖` statistics, one row per `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub p: f64,
    pub rows: Vec<ErrorRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub table: ErrorTable,
    /// Common step used by every run.
    pub dt: f64,
    /// `errors[path][eps index]`, `None` when flagged.
    pub errors: Vec<Vec<Option<f64>>>,
}

/// Configuration shared by all runs of a convergence study: the step is the
/// finest one the grid needs, so `X̄` and every `X^ε` see the same `L` draws.
pub fn convergence_system(sys: &SystemConfig, eps_grid: &[f64]) -> Result<SystemConfig> {
    if eps_grid.is_empty() {
        return Err(Error::Config("eps grid is empty".into()));
    }
    for w in eps_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Config("eps grid must be strictly decreasing".into()));
        }
    }
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0,1), got {eps}")));
        }
    }
    let eps_min = *eps_grid.last().expect("non-empty");
    let mut base = sys.clone();
    base.eps = eps_min;
    base.dt = sys.dt.min(eps_min / 20.0);
    base.validate()?;
    Ok(base)
}

fn check_moment(p: f64, alpha: f64) -> Result<()> {
    if !(p >= 1.0 && p < alpha) {
        return Err(Error::condition(
            "moment order",
            format!("p must satisfy 1 <= p < alpha = {alpha}, got {p}"),
        ));
    }
    Ok(())
}

/// Sup-norm errors of path `index` for every `ε`, `None` where flagged.
pub fn path_errors(
    base: &SystemConfig,
    eps_grid: &[f64],
    averaged: &AveragedConfig,
    index: usize,
) -> Result<Vec<Option<f64>>> {
    let path = path_seed(base.seed, index as u64);
    let mut xbar = Vec::with_capacity(base.steps() + 1);
    let bar = run_averaged(base, path, averaged, |_, _, x| xbar.push(x.clone()));
    if flag_blowup(bar)?.is_none() {
        return Ok(vec![None; eps_grid.len()]);
    }
    eps_grid
        .iter()
        .map(|&eps| {
            let mut cfg = base.clone();
            cfg.eps = eps;
            let mut sup = 0.0f64;
            let run = run_pair(&cfg, path, |s| sup = sup.max(s.x.distance(&xbar[s.step])));
            Ok(flag_blowup(run)?.map(|_| sup))
        })
        .collect()
}

/// Error of the averaged approximation for each `ε` of a decreasing grid.
pub fn convergence_study(
    sys: &SystemConfig,
    eps_grid: &[f64],
    study: &StudyConfig,
) -> Result<ConvergenceStudy> {
    check_moment(study.p, sys.alpha)?;
    let base = convergence_system(sys, eps_grid)?;
    let errors = study
        .executor
        .map_indexed(study.paths, |i| {
            path_errors(&base, eps_grid, &study.averaged, i)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    for (j, &eps) in eps_grid.iter().enumerate() {
        let column: Vec<Option<f64>> = errors.iter().map(|e| e[j]).collect();
        let row = ErrorRow::from_errors(eps, study.p, &column);
        study.check_flagged(format!("eps = {eps}"), row.n_flagged)?;
        rows.push(row);
    }
    Ok(ConvergenceStudy {
        table: ErrorTable { p: study.p, rows },
        dt: base.dt,
        errors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub n_paths: usize,
    pub n_flagged: usize,
    /// Median of `∫₀ᵀ ‖Y^ε_t - Ŷ_t‖ dt`.
    pub median_y_integral: f64,
    /// Median of `sup_t ‖X^ε_t - X̂_t‖`.
    pub median_x_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub rows: Vec<DeltaRow>,
    /// Slope of `log median_y_integral` against `log δ`.
    pub y_slope: f64,
}

/// Discrepancy between the original pair and the auxiliary process for each
/// block length `δ`.
pub fn delta_sweep(
    sys: &SystemConfig,
    delta_grid: &[f64],
    study: &StudyConfig,
) -> Result<DeltaSweep> {
    if delta_grid.is_empty() {
        return Err(Error::Config("delta grid is empty".into()));
    }
    let configs: Vec<SystemConfig> = delta_grid
        .iter()
        .map(|&delta| {
            if delta < 4.0 * sys.dt * (1.0 - 1e-12) {
                return Err(Error::condition(
                    "block length",
                    format!("delta = {delta} must be at least 4 dt = {}", 4.0 * sys.dt),
                ));
            }
            let mut cfg = sys.clone();
            cfg.delta = delta;
            cfg.validate()?;
            crate::sim::block_steps(&cfg)?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;

    let per_path = study
        .executor
        .map_indexed(study.paths, |i| -> Result<Vec<Option<(f64, f64)>>> {
            let path = path_seed(sys.seed, i as u64);
            configs
                .iter()
                .map(|cfg| {
                    let (mut y_int, mut x_sup) = (0.0, 0.0f64);
                    let run = run_aux(cfg, path, |s| {
                        if s.pair.step > 0 {
                            y_int += s.pair.y.distance(&s.y_hat) * cfg.dt;
                        }
                        x_sup = x_sup.max(s.pair.x.distance(&s.x_hat));
                    });
                    Ok(flag_blowup(run)?.map(|_| (y_int, x_sup)))
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(configs.len());
    for (j, &delta) in delta_grid.iter().enumerate() {
        let ok: Vec<(f64, f64)> = per_path.iter().filter_map(|p| p[j]).collect();
        let n_flagged = study.paths - ok.len();
        study.check_flagged(format!("delta = {delta}"), n_flagged)?;
        let ys: Vec<f64> = ok.iter().map(|v| v.0).collect();
        let xs: Vec<f64> = ok.iter().map(|v| v.1).collect();
        rows.push(DeltaRow {
            delta,
            n_paths: study.paths,
            n_flagged,
            median_y_integral: if ys.is_empty() { f64::NAN } else { median(&ys) },
            median_x_sup: if xs.is_empty() { f64::NAN } else { median(&xs) },
        });
    }
    let logd: Vec<f64> = rows.iter().map(|r| r.delta.ln()).collect();
    let logy: Vec<f64> = rows.iter().map(|r| r.median_y_integral.ln()).collect();
    let y_slope = if rows.len() >= 2 {
        linear_fit(&logd, &logy).1
    } else {
        f64::NAN
    };
    Ok(DeltaSweep { rows, y_slope })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalerkinRow {
    pub m: usize,
    pub n_paths: usize,
    pub n_flagged: usize,
    /// Median over paths of `‖X^m_T - X^{2m}_T‖`.
    pub median_diff: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Truncation error estimate `‖X^m_T - X^{2m}_T‖` for each `m`. Noise
/// streams are mode-indexed, so every truncation sees the same low-mode
/// draws.
pub fn galerkin_study(
    sys: &SystemConfig,
    m_grid: &[usize],
    study: &StudyConfig,
) -> Result<Vec<GalerkinRow>> {
    let mut all_m: Vec<usize> = m_grid.iter().flat_map(|&m| [m, 2 * m]).collect();
    all_m.sort_unstable();
    all_m.dedup();
    let configs: Vec<SystemConfig> = all_m
        .iter()
        .map(|&m| {
            let cfg = sys.clone().with_modes(m);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<_>>()?;

    let finals = study
        .executor
        .map_indexed(study.paths, |i| -> Result<Vec<Option<SpectralField>>> {
            let path = path_seed(sys.seed, i as u64);
            configs
                .iter()
                .map(|cfg| Ok(flag_blowup(run_pair(cfg, path, |_| {}))?.map(|s| s.x)))
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let slot = |m: usize| all_m.binary_search(&m).expect("collected above");
    m_grid
        .iter()
        .map(|&m| {
            let (a, b) = (slot(m), slot(2 * m));
            let diffs: Vec<f64> = finals
                .iter()
                .filter_map(|f| match (&f[a], &f[b]) {
                    (Some(u), Some(v)) => Some(u.distance(v)),
                    _ => None,
                })
                .collect();
            let n_flagged = study.paths - diffs.len();
            study.check_flagged(format!("m = {m}"), n_flagged)?;
            let stat = |q: f64| {
                if diffs.is_empty() {
                    f64::NAN
                } else {
                    quantile(&diffs, q)
                }
            };
            Ok(GalerkinRow {
                m,
                n_paths: study.paths,
                n_flagged,
                median_diff: stat(0.5),
                q25: stat(0.25),
                q75: stat(0.75),
            })
        })
        .collect()
}

/// Field with i.i.d. uniform coefficients in `[-amplitude, amplitude]`.
pub fn random_field<R: Rng>(m: usize, amplitude: f64, rng: &mut R) -> SpectralField {
    let coeffs = (0..2 * m)
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    SpectralField::from_coeffs(m, coeffs).expect("finite")
}

/// Random field whose overall amplitude is log-uniform over `[1e-2, 1e2]`.
pub fn random_field_log_amplitude<R: Rng>(m: usize, rng: &mut R) -> SpectralField {
    let amplitude = 10f64.powf(rng.gen_range(-2.0..=2.0));
    random_field(m, amplitude, rng)
}

/// Largest value of `f` along the ray through a random unit-cube direction,
/// over 21 log-spaced amplitudes in `[1e-2, 1e2]`. Taking the amplitude out
/// of the sampling makes the sample supremum settle far faster.
pub fn ray_sup<R: Rng>(m: usize, rng: &mut R, f: impl Fn(&SpectralField) -> f64) -> f64 {
    let direction = random_field(m, 1.0, rng);
    (0..=20)
        .map(|i| f(&direction.scaled(10f64.powf(-2.0 + 0.2 * i as f64))))
        .fold(0.0, f64::max)
}

/// Largest sample ratio over `n` draws and over `2n` draws (the first `n`
/// draws are shared).
pub fn doubling_sup(n: usize, mut sample: impl FnMut(usize) -> f64) -> (f64, f64) {
    let first = (0..n).map(&mut sample).fold(0.0, f64::max);
    let second = (n..2 * n).map(&mut sample).fold(0.0, f64::max);
    (first, first.max(second))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(
        &mut self,
        name: &str,
        outcome: Result<(f64, f64, String)>,
        pass: impl Fn(f64, f64) -> bool,
    ) {
        let check = match outcome {
            Ok((measured, threshold, detail)) => PropertyCheck {
                name: name.into(),
                passed: pass(measured, threshold),
                measured,
                threshold,
                detail,
            },
            Err(e) => PropertyCheck {
                name: name.into(),
                passed: false,
                measured: f64::NAN,
                threshold: f64::NAN,
                detail: e.to_string(),
            },
        };
        self.checks.push(check);
    }
}

const RATIO_GROWTH_TOLERANCE: f64 = 1.25;

/// Runs the reduced-size property suite against `sys`.
pub fn validate_properties(sys: &SystemConfig) -> PropertyReport {
    let mut report = PropertyReport::default();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(sys.seed, 0x7661_6c69));
    let le = |a: f64, b: f64| a <= b;

    report.push(
        "config gates",
        sys.validate()
            .map(|_| (0.0, 0.0, "all conditions hold".into())),
        |_, _| true,
    );

    let p5 = (|| {
        let mut worst = f64::NEG_INFINITY;
        for m in [4, 16, 64] {
            for _ in 0..1000 {
                let x = random_field(m, 2.0, &mut rng);
                worst = worst.max(cubic_inner_product(&x, (6 * m + 1).next_power_of_two())?);
            }
        }
        Ok((worst, 0.25 + 1e-9, "sup <x, N(x)> over 3000 fields".into()))
    })();
    report.push("P5 inner product bound", p5, le);

    let m = sys.m.clamp(4, 32);
    let (a, b) = doubling_sup(2000, |_| {
        let x = random_field_log_amplitude(m, &mut rng);
        let y = random_field_log_amplitude(m, &mut rng);
        local_lipschitz_ratio(&x, &y)
    });
    report.push(
        "P3 ratio stable under doubling",
        Ok((
            b / a,
            RATIO_GROWTH_TOLERANCE,
            format!("sup {a:.6e} -> {b:.6e}"),
        )),
        |v, t| v.is_finite() && v <= t,
    );
    for sigma in [0.0, 0.25, 0.49] {
        let (a, b) = doubling_sup(2000, |_| ray_sup(m, &mut rng, |x| growth_ratio(x, sigma)));
        report.push(
            &format!("P2 ratio stable under doubling (sigma = {sigma})"),
            Ok((
                b / a,
                RATIO_GROWTH_TOLERANCE,
                format!("sup {a:.6e} -> {b:.6e}"),
            )),
            |v, t| v.is_finite() && v <= t,
        );
    }

    let alpha = sys.alpha;
    let sampler = (|| {
        crate::noise::check_alpha(alpha)?;
        let draws: Vec<f64> = (0..100_000)
            .map(|_| standard_sas(alpha, &mut rng))
            .collect();
        let worst = [0.5, 1.0, 2.0]
            .iter()
            .map(|&h| (empirical_cf(&draws, h) - (-f64::powf(h, alpha)).exp()).abs())
            .fold(0.0, f64::max);
        Ok((worst, 0.01, format!("1e5 draws at alpha = {alpha}")))
    })();
    report.push("stable sampler characteristic function", sampler, le);

    let conv = (|| {
        crate::noise::check_alpha(alpha)?;
        let (lambda, sigma, dt, n, sub) = (LAMBDA_1, 1.0, 0.01, 100_000, 100);
        let one = convolution_scale(lambda, sigma, dt, 1.0, alpha);
        let exact: Vec<f64> = (0..n)
            .map(|_| one * standard_sas(alpha, &mut rng))
            .collect();
        let ds = dt / sub as f64;
        let piece = sigma * ds.powf(1.0 / alpha);
        let riemann: Vec<f64> = (0..n)
            .map(|_| {
                (0..sub)
                    .map(|j| {
                        (-lambda * (dt - j as f64 * ds)).exp()
                            * piece
                            * standard_sas(alpha, &mut rng)
                    })
                    .sum()
            })
            .collect();
        let worst = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&h| (empirical_cf(&exact, h) - empirical_cf(&riemann, h)).abs())
            .fold(0.0, f64::max);
        Ok((worst, 0.01, format!("1e5 samples, {sub} substeps")))
    })();
    report.push("exact convolution step vs Riemann sum", conv, le);

    let scale_inv = (|| {
        crate::noise::check_alpha(alpha)?;
        let a = convolution_scale(LAMBDA_1, 1.0, 0.001, 1.0, alpha);
        let b = convolution_scale(LAMBDA_1, 1.0, 0.001 * 0.01, 0.01, alpha);
        let long = convolution_scale(LAMBDA_1, 1.0, 1e6, 1.0, alpha);
        let stat = stationary_scale(LAMBDA_1, 1.0, alpha);
        Ok((
            ((a - b) / a).abs().max(((long - stat) / stat).abs()),
            1e-14,
            "eps and stationary limit".into(),
        ))
    })();
    report.push("convolution scale invariance", scale_inv, le);

    let contraction = (|| {
        let dt = 1e-4;
        let horizon = 3.0 / sys.dissipativity_gap();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let y1 = random_field(sys.m, 1.0, &mut rng);
            let y2 = random_field(sys.m, 1.0, &mut rng);
            let gaps = contraction_gap(sys, &sys.x0, &y1, &sys.x0, &y2, horizon, dt, sys.seed ^ i)?;
            let gap0 = gaps[0].1;
            for (t, g) in gaps {
                worst = worst.max(g / ((-sys.dissipativity_gap() * t).exp() * gap0));
            }
        }
        Ok((worst, 1.0 + 1e-6, "5 pairs, dt = 1e-4".into()))
    })();
    report.push("frozen contraction in y", contraction, le);

    let two_x = (|| {
        let dt = 1e-4;
        let horizon = 3.0 / sys.dissipativity_gap();
        let c_g = if sys.switches.g {
            sys.coupling.c_g()
        } else {
            0.0
        };
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let x2 = random_field(sys.m, 1.0, &mut rng);
            let y = random_field(sys.m, 1.0, &mut rng);
            let bound = c_g * sys.x0.distance(&x2) / sys.dissipativity_gap();
            let gaps = contraction_gap(sys, &sys.x0, &y, &x2, &y, horizon, dt, sys.seed ^ i)?;
            let sup = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
            worst = worst.max(if sup == 0.0 { 0.0 } else { sup / bound });
        }
        Ok((worst, 1.0 + 1e-6, "5 pairs, dt = 1e-4".into()))
    })();
    report.push("frozen two-state bound", two_x, le);

    let parseval = (|| {
        let x = random_field(sys.m, 1.0, &mut rng);
        let grid = to_physical(&x, (2 * sys.m + 1).next_power_of_two())?;
        let l2 = grid.values.iter().map(|v| v * v).sum::<f64>() / grid.n() as f64;
        Ok((
            (l2 - x.norm().powi(2)).abs() / x.norm().powi(2),
            1e-12,
            "grid vs coefficient norm".into(),
        ))
    })();
    report.push("Parseval", parseval, le);

    let semigroup = (|| {
        let x = random_field(sys.m, 1.0, &mut rng);
        let two = x.semigroup_apply(0.003)?.semigroup_apply(0.004)?;
        let one = x.semigroup_apply(0.007)?;
        Ok((
            two.distance(&one) / one.norm(),
            1e-13,
            "e^{sA} e^{tA} = e^{(s+t)A}".into(),
        ))
    })();
    report.push("semigroup composition", semigroup, le);

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{Coupling, CouplingPreset};

    fn quick_sys() -> SystemConfig {
        let mut sys = SystemConfig::new(0.1, 0.05).with_modes(4);
        sys.dt = 0.001;
        sys.seed = 11;
        sys
    }

    #[test]
    fn degenerate_coupling_has_zero_errors() {
        let mut sys = quick_sys();
        sys.coupling = Coupling::from_preset(CouplingPreset::SlowOnly, 1.0, 1.0, 1.0);
        let study = StudyConfig::new(&sys, 4);
        let out = convergence_study(&sys, &[0.1, 0.05], &study).unwrap();
        for row in &out.table.rows {
            assert_eq!((row.median_err, row.mean_err_p, row.q75), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn moment_order_gate() {
        let sys = quick_sys();
        let mut study = StudyConfig::new(&sys, 1);
        study.p = 1.5;
        let err = convergence_study(&sys, &[0.1], &study).unwrap_err();
        assert!(err.to_string().contains("p must satisfy"));
    }

    #[test]
    fn grid_must_decrease() {
        let sys = quick_sys();
        let study = StudyConfig::new(&sys, 1);
        assert!(convergence_study(&sys, &[0.05, 0.1], &study).is_err());
        assert!(convergence_study(&sys, &[1.5], &study).is_err());
    }

    #[test]
    fn error_row_statistics() {
        let row = ErrorRow::from_errors(0.1, 1.0, &[Some(1.0), None, Some(3.0), Some(2.0)]);
        assert_eq!((row.n_paths, row.n_flagged), (4, 1));
        assert_eq!(row.median_err, 2.0);
        assert_eq!(row.mean_err_p, 2.0);
    }

    #[test]
    fn flagged_fraction_aborts() {
        let sys = quick_sys();
        let study = StudyConfig::new(&sys, 10);
        assert!(study.check_flagged("x".into(), 2).is_ok());
        assert!(matches!(
            study.check_flagged("x".into(), 3),
            Err(Error::StudyAborted { flagged: 3, .. })
        ));
    }

    #[test]
    fn x_free_coupling_has_zero_block_discrepancy() {
        let mut sys = quick_sys();
        sys.coupling = Coupling::from_preset(CouplingPreset::XFree, 1.0, 1.0, 1.0);
        let study = StudyConfig::new(&sys, 3);
        let sweep = delta_sweep(&sys, &[0.02, 0.01], &study).unwrap();
        for row in sweep.rows {
            assert_eq!((row.median_y_integral, row.median_x_sup), (0.0, 0.0));
        }
    }

    #[test]
    fn delta_below_four_steps_is_rejected() {
        let sys = quick_sys();
        let study = StudyConfig::new(&sys, 1);
        let err = delta_sweep(&sys, &[0.002], &study).unwrap_err();
        assert!(err.to_string().contains("4 dt"));
    }

    #[test]
    fn galerkin_exact_for_resolved_heat_flow() {
        let mut sys = quick_sys();
        sys.switches = crate::config::Switches::linear();
        let rows = galerkin_study(&sys, &[2, 4], &StudyConfig::new(&sys, 2)).unwrap();
        for row in rows {
            assert_eq!(row.median_diff, 0.0);
        }
    }

    #[test]
    fn doubling_shares_first_half() {
        let (a, b) = doubling_sup(3, |i| i as f64);
        assert_eq!((a, b), (2.0, 5.0));
    }
}
