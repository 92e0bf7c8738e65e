//! The frozen fast equation, ergodic estimation of the averaged drift
//! `f̄(x) = ∫ f(x,y) μ^x(dy)`, and the averaged slow equation
//! `dX̄ = [AX̄ + N(X̄) + f̄(X̄)]dt + dL`.
//!
//! `f` splits as `f_x sin x + f_y sin y`; only the second part depends on
//! the fast variable, so only it is time-averaged. The first part enters
//! `f̄` exactly.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, RngStream, Stream, TAG_INNER};
use crate::sim::{check_blowup, Component, DriftEval, StepCoefficients, Trajectory};
use crate::spectral::{SpectralField, LAMBDA_1};
use crate::stats::{linear_fit, std_dev};

/// Settings of one frozen-equation run. Times are on the frozen (`ε = 1`)
/// scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenConfig {
    pub burn_in: f64,
    pub averaging_time: f64,
    pub dt: f64,
    /// Path-level seed; the `Z̄` stream is derived from it.
    pub seed: u64,
    /// Average each path with its sign-flipped noise twin.
    pub antithetic: bool,
    pub batches: usize,
    /// Largest acceptable per-mode batch spread.
    pub spread_threshold: f64,
}

impl FrozenConfig {
    /// Burn-in `5/(λ₁-L_g)`, averaging window `20/(λ₁-L_g)`, `dt = 0.1/λ₁`.
    pub fn for_system(sys: &SystemConfig, seed: u64) -> Self {
        let gap = sys.dissipativity_gap();
        FrozenConfig {
            burn_in: 5.0 / gap,
            averaging_time: 20.0 / gap,
            dt: 0.1 / LAMBDA_1,
            seed,
            antithetic: false,
            batches: 8,
            spread_threshold: 0.05,
        }
    }

    pub fn validate(&self, sys: &SystemConfig) -> Result<()> {
        for (name, v) in [
            ("burn_in", self.burn_in),
            ("averaging_time", self.averaging_time),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "frozen {name} must be positive, got {v}"
                )));
            }
        }
        if self.batches < 2 {
            return Err(Error::Config("frozen batches must be at least 2".into()));
        }
        let relax = 5.0 / sys.dissipativity_gap();
        if self.burn_in < relax * (1.0 - 1e-12) {
            return Err(Error::condition(
                "ergodicity",
                format!(
                    "burn-in {} is shorter than 5 relaxation times 5/(lambda1 - L_g) = {relax}",
                    self.burn_in
                ),
            ));
        }
        Ok(())
    }
}

/// Stepper for `dY = [AY + g(x, Y)]dt + dZ̄` at a fixed slow state `x`.
#[derive(Clone)]
pub struct FrozenModel {
    alpha: f64,
    g_on: bool,
    noise_on: bool,
    coeffs: StepCoefficients,
    drift: DriftEval,
    xg: Vec<f64>,
    yg: Vec<f64>,
    g: Vec<f64>,
    inc: Vec<f64>,
    f_fast: Vec<f64>,
}

impl FrozenModel {
    pub fn new(sys: &SystemConfig, x: &SpectralField, dt: f64) -> Result<Self> {
        if x.m() != sys.m {
            return Err(Error::ModeMismatch(sys.m, x.m()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frozen dt must be positive, got {dt}"
            )));
        }
        let m = sys.m;
        let coeffs = StepCoefficients::new(m, dt, 1.0, &sys.fast_noise.flat_scales(m), sys.alpha);
        let mut drift = DriftEval::new(m, sys.coupling, sys.switches);
        let n = drift.n();
        let mut xg = vec![0.0; n];
        drift.synthesize(x.coeffs(), &mut xg);
        Ok(FrozenModel {
            alpha: sys.alpha,
            g_on: sys.switches.g,
            noise_on: sys.switches.fast_noise,
            coeffs,
            drift,
            xg,
            yg: vec![0.0; n],
            g: vec![0.0; 2 * m],
            inc: vec![0.0; 2 * m],
            f_fast: vec![0.0; 2 * m],
        })
    }

    /// Draws one step of noise into the internal buffer.
    pub fn draw(&mut self, rng: &mut RngStream) {
        if self.noise_on {
            self.coeffs.draw_increments(self.alpha, rng, &mut self.inc);
        }
    }

    pub fn increments(&self) -> &[f64] {
        &self.inc
    }

    /// Advances `y` with the last drawn increments scaled by `sign`.
    pub fn advance(&mut self, y: &mut [f64], sign: f64) {
        let has_g = if self.g_on {
            self.drift.synthesize(y, &mut self.yg);
            self.drift.fast_drift(&self.xg, &self.yg, &mut self.g)
        } else {
            false
        };
        if !self.noise_on {
            self.coeffs.advance(y, has_g.then_some(&self.g), None);
        } else if sign == 1.0 {
            self.coeffs
                .advance(y, has_g.then_some(&self.g), Some(&self.inc));
        } else {
            let flipped: Vec<f64> = self.inc.iter().map(|v| sign * v).collect();
            self.coeffs
                .advance(y, has_g.then_some(&self.g), Some(&flipped));
        }
    }

    /// `π_m [f_y sin y]` at the current `y`.
    pub fn f_fast(&mut self, y: &[f64]) -> &[f64] {
        self.drift.synthesize(y, &mut self.yg);
        self.drift.f_fast_part(&self.yg, &mut self.f_fast);
        &self.f_fast
    }

    /// `π_m [f_x sin x]`, the exactly known part of `f̄(x)`.
    pub fn f_slow(&mut self) -> Vec<f64> {
        let mut out = vec![0.0; self.g.len()];
        self.drift.f_slow_part(&self.xg, &mut out);
        out
    }
}

fn steps_for(time: f64, dt: f64) -> usize {
    (time / dt - 1e-9).ceil().max(0.0) as usize
}

/// Path of the frozen equation from `y0` over `[0, horizon]`, recorded every
/// `record_stride` steps, with `Z̄` drawn from `rng`.
pub fn simulate_frozen_with(
    sys: &SystemConfig,
    x: &SpectralField,
    y0: &SpectralField,
    dt: f64,
    horizon: f64,
    record_stride: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut model = FrozenModel::new(sys, x, dt)?;
    let mut y = y0.clone();
    let mut traj = Trajectory::new(Component::YFrozen, sys.m);
    traj.push(0.0, y.clone())?;
    let steps = steps_for(horizon, dt);
    let stride = record_stride.max(1);
    for j in 1..=steps {
        model.draw(rng);
        model.advance(y.coeffs_mut(), 1.0);
        let t = j as f64 * dt;
        check_blowup(y.coeffs(), t)?;
        if j % stride == 0 || j == steps {
            traj.push(t, y.clone())?;
        }
    }
    Ok(traj)
}

/// Frozen path driven by the `Z̄` stream of `cfg.seed`, over
/// `burn_in + averaging_time`.
pub fn simulate_frozen(
    sys: &SystemConfig,
    x: &SpectralField,
    y0: &SpectralField,
    cfg: &FrozenConfig,
    record_stride: usize,
) -> Result<Trajectory> {
    let mut rng = RngStream::for_path(cfg.seed, Stream::Frozen, sys.m);
    simulate_frozen_with(
        sys,
        x,
        y0,
        cfg.dt,
        cfg.burn_in + cfg.averaging_time,
        record_stride,
        &mut rng,
    )
}

/// `‖Y^{x₁,y₁}_t - Y^{x₂,y₂}_t‖` on the step grid, both paths driven by the
/// same `Z̄` draws. Returns `(t, gap)` pairs starting at `t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_gap(
    sys: &SystemConfig,
    x1: &SpectralField,
    y1: &SpectralField,
    x2: &SpectralField,
    y2: &SpectralField,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut a = FrozenModel::new(sys, x1, dt)?;
    let mut b = FrozenModel::new(sys, x2, dt)?;
    let mut rng = RngStream::for_path(seed, Stream::Frozen, sys.m);
    let (mut u, mut v) = (y1.clone(), y2.clone());
    let mut out = vec![(0.0, u.distance(&v))];
    for j in 1..=steps_for(horizon, dt) {
        a.draw(&mut rng);
        b.inc.copy_from_slice(&a.inc);
        a.advance(u.coeffs_mut(), 1.0);
        b.advance(v.coeffs_mut(), 1.0);
        let t = j as f64 * dt;
        check_blowup(u.coeffs(), t)?;
        check_blowup(v.coeffs(), t)?;
        out.push((t, u.distance(&v)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FbarEstimate {
    pub value: SpectralField,
    /// Per-mode standard error from batch means (zero when exact).
    pub spread: SpectralField,
    /// Time samples in the averaging window (per path).
    pub samples: usize,
    pub batches: usize,
    pub low_confidence: bool,
}

impl FbarEstimate {
    pub fn max_spread(&self) -> f64 {
        self.spread.coeffs().iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Every mode differs by at most `k` combined spreads.
    pub fn agrees_with(&self, other: &FbarEstimate, k: f64) -> bool {
        self.worst_discrepancy(other) <= k
    }

    /// Largest `|a_k - b_k| / sqrt(s_a² + s_b²)` over modes (0/0 counts as 0).
    pub fn worst_discrepancy(&self, other: &FbarEstimate) -> f64 {
        self.value
            .coeffs()
            .iter()
            .zip(other.value.coeffs())
            .zip(self.spread.coeffs().iter().zip(other.spread.coeffs()))
            .map(|((a, b), (sa, sb))| {
                let d = (a - b).abs();
                let s = (sa * sa + sb * sb).sqrt();
                if d == 0.0 {
                    0.0
                } else {
                    d / s
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Ergodic estimate of `f̄(x)` from a single long frozen path started at `y0`.
pub fn estimate_fbar(
    sys: &SystemConfig,
    x: &SpectralField,
    y0: &SpectralField,
    cfg: &FrozenConfig,
) -> Result<FbarEstimate> {
    cfg.validate(sys)?;
    let m = sys.m;
    let mut model = FrozenModel::new(sys, x, cfg.dt)?;
    let f_on = sys.switches.f;
    let slow_part = if f_on {
        model.f_slow()
    } else {
        vec![0.0; 2 * m]
    };
    if !f_on || !sys.coupling.f_depends_on_y() {
        return Ok(FbarEstimate {
            value: SpectralField::from_coeffs(m, slow_part)?,
            spread: SpectralField::zeros(m),
            samples: 0,
            batches: cfg.batches,
            low_confidence: false,
        });
    }

    let batches = cfg.batches;
    let per_batch = steps_for(cfg.averaging_time, cfg.dt)
        .div_ceil(batches)
        .max(1);
    let burn = steps_for(cfg.burn_in, cfg.dt);
    let mut rng = RngStream::for_path(cfg.seed, Stream::Frozen, m);
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut ys: Vec<SpectralField> = signs.iter().map(|_| y0.clone()).collect();

    let step_all =
        |model: &mut FrozenModel, ys: &mut [SpectralField], rng: &mut RngStream, t: f64| {
            model.draw(rng);
            for (y, &s) in ys.iter_mut().zip(signs) {
                model.advance(y.coeffs_mut(), s);
                check_blowup(y.coeffs(), t)?;
            }
            Ok::<(), Error>(())
        };

    for j in 0..burn {
        step_all(&mut model, &mut ys, &mut rng, (j + 1) as f64 * cfg.dt)?;
    }
    let mut batch_means = vec![vec![0.0; 2 * m]; batches];
    let weight = 1.0 / (per_batch * signs.len()) as f64;
    for (b, means) in batch_means.iter_mut().enumerate() {
        for j in 0..per_batch {
            for y in ys.iter() {
                for (acc, v) in means.iter_mut().zip(model.f_fast(y.coeffs())) {
                    *acc += v;
                }
            }
            let t = (burn + b * per_batch + j + 1) as f64 * cfg.dt;
            step_all(&mut model, &mut ys, &mut rng, t)?;
        }
        means.iter_mut().for_each(|v| *v *= weight);
    }

    let mut value = slow_part;
    let mut spread = vec![0.0; 2 * m];
    for i in 0..2 * m {
        let column: Vec<f64> = batch_means.iter().map(|b| b[i]).collect();
        value[i] += column.iter().sum::<f64>() / batches as f64;
        spread[i] = std_dev(&column) / (batches as f64).sqrt();
    }
    let spread = SpectralField::from_coeffs(m, spread)?;
    let low_confidence = spread.coeffs().iter().any(|&s| s > cfg.spread_threshold);
    Ok(FbarEstimate {
        value: SpectralField::from_coeffs(m, value)?,
        spread,
        samples: per_batch * batches,
        batches,
        low_confidence,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRatio {
    pub ratio: f64,
    /// `x1 == x2`; the ratio is reported as zero.
    pub degenerate: bool,
}

/// `‖f̄(x₁) - f̄(x₂)‖ / ‖x₁ - x₂‖` with both estimates on the same `Z̄` draws.
pub fn fbar_lipschitz_probe(
    sys: &SystemConfig,
    x1: &SpectralField,
    x2: &SpectralField,
    cfg: &FrozenConfig,
) -> Result<ProbeRatio> {
    let dx = x1.distance(x2);
    if dx == 0.0 {
        return Ok(ProbeRatio {
            ratio: 0.0,
            degenerate: true,
        });
    }
    let y0 = SpectralField::zeros(sys.m);
    let a = estimate_fbar(sys, x1, &y0, cfg)?;
    let b = estimate_fbar(sys, x2, &y0, cfg)?;
    Ok(ProbeRatio {
        ratio: a.value.distance(&b.value) / dx,
        degenerate: false,
    })
}

/// Ensemble mean of `π_m f(x, Y^{x,y0}_t)` over `paths` independent `Z̄`
/// streams, on the step grid up to `horizon`.
pub fn ensemble_f_mean(
    sys: &SystemConfig,
    x: &SpectralField,
    y0: &SpectralField,
    dt: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<Vec<(f64, SpectralField)>> {
    let m = sys.m;
    let steps = steps_for(horizon, dt);
    let per_path = crate::parallel::map_indexed(paths, |p| -> Result<Vec<Vec<f64>>> {
        let mut model = FrozenModel::new(sys, x, dt)?;
        let slow = model.f_slow();
        let mut rng = RngStream::for_path(crate::rng::path_seed(seed, p as u64), Stream::Frozen, m);
        let mut y = y0.clone();
        let mut out = Vec::with_capacity(steps + 1);
        for j in 0..=steps {
            let fast = model.f_fast(y.coeffs());
            out.push(slow.iter().zip(fast).map(|(a, b)| a + b).collect());
            if j < steps {
                model.draw(&mut rng);
                model.advance(y.coeffs_mut(), 1.0);
                check_blowup(y.coeffs(), (j + 1) as f64 * dt)?;
            }
        }
        Ok(out)
    });
    let mut sums = vec![vec![0.0; 2 * m]; steps + 1];
    for path in per_path {
        for (acc, v) in sums.iter_mut().zip(path?) {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(j, s)| {
            let mean = s.into_iter().map(|v| v / paths as f64).collect();
            Ok((j as f64 * dt, SpectralField::from_coeffs(m, mean)?))
        })
        .collect()
}

/// Exponential rate fitted to `‖Ê f(x, Y_t) - f̄(x)‖` over `[0, horizon]`.
pub fn fitted_decay_rate(
    means: &[(f64, SpectralField)],
    fbar: &SpectralField,
    horizon: f64,
) -> f64 {
    let (ts, logs): (Vec<f64>, Vec<f64>) = means
        .iter()
        .filter(|(t, _)| *t <= horizon * (1.0 + 1e-12))
        .map(|(t, f)| (*t, f.distance(fbar).ln()))
        .unzip();
    -linear_fit(&ts, &logs).1
}

/// How the averaged drift is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbarMode {
    /// Closed form; needs `f` independent of `y`.
    Exact,
    /// Fast average estimated once; needs `g` independent of `x`.
    Tabulated,
    /// Re-estimated from the frozen equation every macro step.
    OnTheFly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedConfig {
    /// `None` picks `Exact` when available, else `OnTheFly`.
    pub mode: Option<FbarMode>,
    /// Time between nested estimates, rounded to a whole number of steps.
    pub macro_step: f64,
    pub inner: FrozenConfig,
}

impl AveragedConfig {
    /// Antithetic inner runs, re-estimated every `0.1/λ₁` of slow time.
    pub fn for_system(sys: &SystemConfig) -> Self {
        let mut inner = FrozenConfig::for_system(sys, 0);
        inner.antithetic = true;
        AveragedConfig {
            mode: None,
            macro_step: 0.1 / LAMBDA_1,
            inner,
        }
    }

    /// Steps of size `dt` per macro step (at least one).
    pub fn stride(&self, dt: f64) -> usize {
        ((self.macro_step / dt).round() as usize).max(1)
    }

    pub fn resolved_mode(&self, sys: &SystemConfig) -> FbarMode {
        self.mode.unwrap_or(if exact_available(sys) {
            FbarMode::Exact
        } else {
            FbarMode::OnTheFly
        })
    }
}

fn exact_available(sys: &SystemConfig) -> bool {
    !sys.switches.f || !sys.coupling.f_depends_on_y()
}

/// Runs `X̄` on the slow noise `L` of `path`, i.e. the same draws as
/// [`crate::sim::simulate_pair`] with the same `path`.
pub fn simulate_averaged(
    sys: &SystemConfig,
    path: u64,
    avg: &AveragedConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new(Component::XBar, sys.m);
    run_averaged(sys, path, avg, |step, t, x| {
        if step % sys.record_stride == 0 || step == sys.steps() {
            traj.times.push(t);
            traj.snapshots.push(x.clone());
        }
    })?;
    Ok(traj)
}

/// Core loop of [`simulate_averaged`]; `observe(step, t, X̄)`.
pub fn run_averaged(
    sys: &SystemConfig,
    path: u64,
    avg: &AveragedConfig,
    mut observe: impl FnMut(usize, f64, &SpectralField),
) -> Result<SpectralField> {
    sys.validate()?;
    let mode = avg.resolved_mode(sys);
    let needs_average = !exact_available(sys);
    match mode {
        FbarMode::Exact if needs_average => {
            return Err(Error::Config(
                "exact averaged drift requires f independent of y".into(),
            ))
        }
        FbarMode::Tabulated if !sys.coupling.is_separable() => {
            return Err(Error::Config(
                "tabulated averaged drift requires g independent of x (separable coupling)".into(),
            ))
        }
        _ => {}
    }
    if !(avg.macro_step > 0.0) {
        return Err(Error::Config("averaged macro_step must be positive".into()));
    }
    let stride = avg.stride(sys.dt);
    if needs_average {
        avg.inner.validate(sys)?;
    }

    let m = sys.m;
    let slow = StepCoefficients::new(m, sys.dt, 1.0, &sys.slow_noise.flat_scales(m), sys.alpha);
    let mut drift = DriftEval::new(m, sys.coupling, sys.switches);
    let mut xg = vec![0.0; drift.n()];
    let mut buf = vec![0.0; 2 * m];
    let mut inc = vec![0.0; 2 * m];
    let mut rng = RngStream::for_path(path, Stream::Slow, m);
    let inner_root = derive_seed(path, TAG_INNER);
    let zero = SpectralField::zeros(m);

    let fast_average = |x: &SpectralField, macro_index: u64| -> Result<Vec<f64>> {
        let mut inner = avg.inner.clone();
        inner.seed = derive_seed(inner_root, macro_index);
        let est = estimate_fbar(sys, x, &zero, &inner)?;
        // keep only the averaged fast part
        let mut model = FrozenModel::new(sys, x, inner.dt)?;
        let slow_part = model.f_slow();
        Ok(est
            .value
            .coeffs()
            .iter()
            .zip(&slow_part)
            .map(|(v, s)| v - s)
            .collect())
    };

    let mut x = sys.x0.clone();
    let mut fast_part: Option<Vec<f64>> = None;
    if needs_average && mode == FbarMode::Tabulated {
        fast_part = Some(fast_average(&x, 0)?);
    }
    observe(0, 0.0, &x);
    for j in 0..sys.steps() {
        if needs_average && mode == FbarMode::OnTheFly && j % stride == 0 {
            fast_part = Some(fast_average(&x, (j / stride) as u64)?);
        }
        drift.synthesize(x.coeffs(), &mut xg);
        let mut has_drift = drift.slow_drift(&xg, &xg, None, &mut buf);
        if let Some(fp) = &fast_part {
            if !has_drift {
                buf.iter_mut().for_each(|b| *b = 0.0);
                has_drift = true;
            }
            for (b, v) in buf.iter_mut().zip(fp) {
                *b += v;
            }
        }
        let noise = if sys.switches.slow_noise {
            slow.draw_increments(sys.alpha, &mut rng, &mut inc);
            Some(inc.as_slice())
        } else {
            None
        };
        slow.advance(x.coeffs_mut(), has_drift.then_some(&buf), noise);
        let t = sys.time(j + 1);
        check_blowup(x.coeffs(), t)?;
        observe(j + 1, t, &x);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Switches;
    use crate::coupling::{Coupling, CouplingPreset};
    use crate::sim::simulate_pair;

    fn small_sys() -> SystemConfig {
        SystemConfig::new(0.05, 0.1).with_modes(6)
    }

    #[test]
    fn frozen_heat_decay_without_g_or_noise() {
        let mut sys = small_sys();
        sys.switches = Switches::linear();
        let x = sys.x0.clone();
        let y0 = SpectralField::basis(6, 1).unwrap();
        let mut rng = RngStream::for_path(1, Stream::Frozen, 6);
        let traj = simulate_frozen_with(&sys, &x, &y0, 0.001, 0.05, 10, &mut rng).unwrap();
        for (t, y) in traj.times.iter().zip(&traj.snapshots) {
            assert!((y.coeff(1) - (-LAMBDA_1 * t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn frozen_is_deterministic() {
        let sys = small_sys();
        let cfg = FrozenConfig::for_system(&sys, 5);
        let zero = SpectralField::zeros(6);
        let a = simulate_frozen(&sys, &sys.x0, &zero, &cfg, 50).unwrap();
        let b = simulate_frozen(&sys, &sys.x0, &zero, &cfg, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_decays_exactly_without_g() {
        let mut sys = small_sys();
        sys.switches.g = false;
        let y1 = SpectralField::from_parts(6, &[1.0], &[]).unwrap();
        let y2 = SpectralField::from_parts(6, &[0.2], &[]).unwrap();
        let gaps = contraction_gap(&sys, &sys.x0, &y1, &sys.x0, &y2, 0.05, 0.001, 3).unwrap();
        for (t, gap) in gaps {
            let expected = (-LAMBDA_1 * t).exp() * 0.8;
            assert!(
                (gap - expected).abs() < 1e-12 * (1.0 + expected),
                "{t}: {gap} vs {expected}"
            );
        }
    }

    #[test]
    fn fbar_exact_without_y_dependence() {
        let mut sys = small_sys();
        sys.coupling = Coupling::from_preset(CouplingPreset::SlowOnly, 1.0, 1.0, 1.0);
        let cfg = FrozenConfig::for_system(&sys, 1);
        let est = estimate_fbar(&sys, &sys.x0, &SpectralField::zeros(6), &cfg).unwrap();
        let mut model = FrozenModel::new(&sys, &sys.x0, cfg.dt).unwrap();
        assert_eq!(est.value.coeffs(), model.f_slow().as_slice());
        assert_eq!(est.max_spread(), 0.0);
    }

    #[test]
    fn burn_in_gate() {
        let sys = small_sys();
        let mut cfg = FrozenConfig::for_system(&sys, 1);
        cfg.burn_in = 1.0 / sys.dissipativity_gap();
        let err = estimate_fbar(&sys, &sys.x0, &SpectralField::zeros(6), &cfg).unwrap_err();
        assert!(err.to_string().contains("relaxation"));
    }

    #[test]
    fn probe_degenerate_pair() {
        let sys = small_sys();
        let cfg = FrozenConfig::for_system(&sys, 1);
        let r = fbar_lipschitz_probe(&sys, &sys.x0, &sys.x0, &cfg).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn probe_slow_only_is_bounded_by_declared_lipschitz() {
        let mut sys = small_sys();
        sys.coupling = Coupling::from_preset(CouplingPreset::SlowOnly, 1.0, 1.0, 1.0);
        let cfg = FrozenConfig::for_system(&sys, 1);
        let x2 = sys.x0.scaled(0.3);
        let r = fbar_lipschitz_probe(&sys, &sys.x0, &x2, &cfg).unwrap();
        assert!(r.ratio > 0.0 && r.ratio <= sys.coupling.lipschitz_f());
    }

    #[test]
    fn averaged_linear_mode_is_heat_flow() {
        let mut sys = small_sys();
        sys.switches = Switches::linear();
        let traj = simulate_averaged(&sys, 0, &AveragedConfig::for_system(&sys)).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.snapshots) {
            let expected = sys.x0.semigroup_apply(*t).unwrap();
            assert!(x.distance(&expected) < 1e-13);
        }
    }

    #[test]
    fn averaged_matches_pair_bitwise_for_slow_only_coupling() {
        let mut sys = small_sys();
        sys.dt = 0.0005;
        sys.coupling = Coupling::from_preset(CouplingPreset::SlowOnly, 1.0, 1.0, 1.0);
        let avg = AveragedConfig::for_system(&sys);
        let bar = simulate_averaged(&sys, 17, &avg).unwrap();
        for eps in [0.05, 0.02] {
            let mut s = sys.clone();
            s.eps = eps;
            let (x, _) = simulate_pair(&s, 17).unwrap();
            assert_eq!(x.snapshots, bar.snapshots);
        }
        let mut nested = avg.clone();
        nested.mode = Some(FbarMode::OnTheFly);
        assert_eq!(simulate_averaged(&sys, 17, &nested).unwrap(), bar);
    }

    #[test]
    fn averaged_mode_gates() {
        let sys = small_sys();
        let mut avg = AveragedConfig::for_system(&sys);
        avg.mode = Some(FbarMode::Exact);
        assert!(simulate_averaged(&sys, 0, &avg).is_err());
        avg.mode = Some(FbarMode::Tabulated);
        assert!(simulate_averaged(&sys, 0, &avg).is_err());
    }

    #[test]
    fn tabulated_runs_for_separable_coupling() {
        let mut sys = small_sys();
        sys.coupling = Coupling::from_preset(CouplingPreset::XFree, 1.0, 1.0, 1.0);
        let mut avg = AveragedConfig::for_system(&sys);
        avg.mode = Some(FbarMode::Tabulated);
        let traj = simulate_averaged(&sys, 0, &avg).unwrap();
        assert_eq!(traj.len(), sys.steps() + 1);
    }
}
