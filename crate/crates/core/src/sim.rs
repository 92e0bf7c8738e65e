//! Exponential-Euler stepping of the Galerkin slow-fast system in mild form.
//!
//! The linear part and the stable convolutions are advanced exactly per mode;
//! the drift is taken at the left endpoint of each step:
//!
//! ```text
//! X ← e^{dt A} X + φ(dt)   [N(X) + f(X,Y)] + ΔL_A
//! Y ← e^{dt A/ε} Y + φ(dt/ε) g(X,Y)        + ΔZ_A,     φ(h)_k = (1 - e^{-λ_k h}) / λ_k
//! ```

use serde::{Deserialize, Serialize};

use crate::config::{Switches, SystemConfig, BLOWUP_THRESHOLD};
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::noise::{convolution_scale, standard_sas};
use crate::rng::{RngStream, Stream};
use crate::spectral::{eigenvalues, SpectralField, Transform};

/// Per-mode multipliers of one step of size `dt` on time scale `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCoefficients {
    pub decay: Vec<f64>,
    pub phi: Vec<f64>,
    pub noise: Vec<f64>,
}

impl StepCoefficients {
    /// `sigma` holds one scale per flat mode index.
    pub fn new(m: usize, dt: f64, eps: f64, sigma: &[f64], alpha: f64) -> Self {
        let h = dt / eps;
        let lambda = eigenvalues(m);
        StepCoefficients {
            decay: lambda.iter().map(|l| (-l * h).exp()).collect(),
            phi: lambda.iter().map(|l| -(-l * h).exp_m1() / l).collect(),
            noise: lambda
                .iter()
                .zip(sigma)
                .map(|(&l, &s)| convolution_scale(l, s, dt, eps, alpha))
                .collect(),
        }
    }

    /// `state ← decay·state + φ·drift + increment`, skipping absent terms.
    #[inline]
    pub fn advance(&self, state: &mut [f64], drift: Option<&[f64]>, increment: Option<&[f64]>) {
        for (i, s) in state.iter_mut().enumerate() {
            let mut v = self.decay[i] * *s;
            if let Some(d) = drift {
                v += self.phi[i] * d[i];
            }
            if let Some(inc) = increment {
                v += inc[i];
            }
            *s = v;
        }
    }

    /// Exact convolution increments from state zero, one stable draw per mode.
    #[inline]
    pub fn draw_increments(&self, alpha: f64, rng: &mut RngStream, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.noise[i] * standard_sas(alpha, rng.mode(i));
        }
    }
}

/// Pseudo-spectral evaluation of the drift terms.
#[derive(Clone)]
pub(crate) struct DriftEval {
    transform: Transform,
    coupling: Coupling,
    switches: Switches,
    work: Vec<f64>,
}

impl DriftEval {
    pub(crate) fn new(m: usize, coupling: Coupling, switches: Switches) -> Self {
        let transform = Transform::dealiased(m);
        let work = vec![0.0; transform.n()];
        DriftEval {
            transform,
            coupling,
            switches,
            work,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.transform.n()
    }

    pub(crate) fn synthesize(&mut self, coeffs: &[f64], out: &mut [f64]) {
        self.transform.to_grid(coeffs, out);
    }

    /// `π_m [N(own) + f(x_arg, y)]`; `y = None` drops the fast part of `f`.
    /// Returns false when every slow drift term is switched off.
    pub(crate) fn slow_drift(
        &mut self,
        own: &[f64],
        x_arg: &[f64],
        y: Option<&[f64]>,
        out: &mut [f64],
    ) -> bool {
        if !self.switches.nonlinearity && !self.switches.f {
            return false;
        }
        if self.switches.nonlinearity {
            for (w, &v) in self.work.iter_mut().zip(own) {
                *w = v - v * v * v;
            }
        } else {
            self.work.iter_mut().for_each(|w| *w = 0.0);
        }
        if self.switches.f {
            self.coupling.add_f_slow(x_arg, &mut self.work);
            if let Some(y) = y {
                self.coupling.add_f_fast(y, &mut self.work);
            }
        }
        self.transform.project(&mut self.work, out);
        true
    }

    /// `π_m g(x_arg, y)`, or false when `g` is switched off.
    pub(crate) fn fast_drift(&mut self, x_arg: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        if !self.switches.g {
            return false;
        }
        self.coupling.eval_g(x_arg, y, &mut self.work);
        self.transform.project(&mut self.work, out);
        true
    }

    /// `π_m [f_x sin x]`, the part of `f` that needs no averaging.
    pub(crate) fn f_slow_part(&mut self, x: &[f64], out: &mut [f64]) {
        self.work.iter_mut().for_each(|w| *w = 0.0);
        self.coupling.add_f_slow(x, &mut self.work);
        self.transform.project(&mut self.work, out);
    }

    /// `π_m [f_y sin y]`, the part of `f` that is averaged.
    pub(crate) fn f_fast_part(&mut self, y: &[f64], out: &mut [f64]) {
        self.work.iter_mut().for_each(|w| *w = 0.0);
        self.coupling.add_f_fast(y, &mut self.work);
        self.transform.project(&mut self.work, out);
    }
}

pub(crate) fn check_blowup(coeffs: &[f64], time: f64) -> Result<()> {
    if coeffs.iter().any(|c| !(c.abs() <= BLOWUP_THRESHOLD)) {
        return Err(Error::BlowUp { time });
    }
    Ok(())
}

/// Which process a trajectory holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    X,
    Y,
    XHat,
    YHat,
    XBar,
    YFrozen,
}

/// Snapshots of one component on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub component: Component,
    pub m: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(component: Component, m: usize) -> Self {
        Trajectory {
            component,
            m,
            times: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, field: SpectralField) -> Result<()> {
        if field.m() != self.m {
            return Err(Error::ModeMismatch(self.m, field.m()));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory times must increase ({t} after {last})"
                )));
            }
        }
        self.times.push(t);
        self.snapshots.push(field);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&SpectralField> {
        self.snapshots.last()
    }

    /// `max_j ‖self_j - other_j‖` over a shared grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::InvalidArgument(
                "trajectories are on different grids".into(),
            ));
        }
        Ok(self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }
}

/// First grid time with `‖X_t‖ >= R`; `None` stands for `+∞`.
pub fn stopping_time(traj: &Trajectory, radius: f64) -> Result<Option<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(traj
        .times
        .iter()
        .zip(&traj.snapshots)
        .find(|(_, x)| x.norm() >= radius)
        .map(|(&t, _)| t))
}

/// `t(δ) = [t/δ] δ`, the last block start at or before `t`.
pub fn breakpoint(t: f64, delta: f64) -> f64 {
    (t / delta + 1e-9).floor() * delta
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairState {
    pub x: SpectralField,
    pub y: SpectralField,
    /// Slow stochastic convolution `∫ e^{(t-s)A} dL_s`.
    pub slow_conv: Vec<f64>,
    /// Fast stochastic convolution `ε^{-1/α} ∫ e^{(t-s)A/ε} dZ_s`.
    pub fast_conv: Vec<f64>,
    pub step: usize,
    pub t: f64,
}

/// Stepper for the coupled system; owns its scratch space.
#[derive(Clone)]
pub struct PairModel {
    cfg: SystemConfig,
    slow: StepCoefficients,
    fast: StepCoefficients,
    drift: DriftEval,
    xg: Vec<f64>,
    yg: Vec<f64>,
    slow_drift: Vec<f64>,
    fast_drift: Vec<f64>,
    slow_inc: Vec<f64>,
    fast_inc: Vec<f64>,
}

impl PairModel {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.m;
        let slow = StepCoefficients::new(m, cfg.dt, 1.0, &cfg.slow_noise.flat_scales(m), cfg.alpha);
        let fast = StepCoefficients::new(
            m,
            cfg.dt,
            cfg.eps,
            &cfg.fast_noise.flat_scales(m),
            cfg.alpha,
        );
        let drift = DriftEval::new(m, cfg.coupling, cfg.switches);
        let n = drift.n();
        Ok(PairModel {
            cfg: cfg.clone(),
            slow,
            fast,
            drift,
            xg: vec![0.0; n],
            yg: vec![0.0; n],
            slow_drift: vec![0.0; 2 * m],
            fast_drift: vec![0.0; 2 * m],
            slow_inc: vec![0.0; 2 * m],
            fast_inc: vec![0.0; 2 * m],
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn slow_coefficients(&self) -> &StepCoefficients {
        &self.slow
    }

    pub fn fast_coefficients(&self) -> &StepCoefficients {
        &self.fast
    }

    pub fn initial_state(&self) -> PairState {
        PairState {
            x: self.cfg.x0.clone(),
            y: self.cfg.y0.clone(),
            slow_conv: vec![0.0; 2 * self.cfg.m],
            fast_conv: vec![0.0; 2 * self.cfg.m],
            step: 0,
            t: 0.0,
        }
    }

    /// Draws this step's noise increments (zero-length `None` when off).
    fn draw(&mut self, rng_slow: &mut RngStream, rng_fast: &mut RngStream) -> (bool, bool) {
        let sw = self.cfg.switches;
        if sw.slow_noise {
            self.slow
                .draw_increments(self.cfg.alpha, rng_slow, &mut self.slow_inc);
        }
        if sw.fast_noise {
            self.fast
                .draw_increments(self.cfg.alpha, rng_fast, &mut self.fast_inc);
        }
        (sw.slow_noise, sw.fast_noise)
    }

    /// One exponential-Euler step of the pair.
    pub fn step(
        &mut self,
        state: &mut PairState,
        rng_slow: &mut RngStream,
        rng_fast: &mut RngStream,
    ) -> Result<()> {
        let (ls, fs) = self.draw(rng_slow, rng_fast);
        self.apply(state, ls, fs)
    }

    fn apply(&mut self, state: &mut PairState, ls: bool, fs: bool) -> Result<()> {
        self.drift.synthesize(state.x.coeffs(), &mut self.xg);
        self.drift.synthesize(state.y.coeffs(), &mut self.yg);
        let has_slow =
            self.drift
                .slow_drift(&self.xg, &self.xg, Some(&self.yg), &mut self.slow_drift);
        let has_fast = self
            .drift
            .fast_drift(&self.xg, &self.yg, &mut self.fast_drift);
        let slow_inc = ls.then_some(self.slow_inc.as_slice());
        let fast_inc = fs.then_some(self.fast_inc.as_slice());
        self.slow.advance(
            state.x.coeffs_mut(),
            has_slow.then_some(&self.slow_drift),
            slow_inc,
        );
        self.fast.advance(
            state.y.coeffs_mut(),
            has_fast.then_some(&self.fast_drift),
            fast_inc,
        );
        self.slow.advance(&mut state.slow_conv, None, slow_inc);
        self.fast.advance(&mut state.fast_conv, None, fast_inc);
        state.step += 1;
        state.t = self.cfg.time(state.step);
        check_blowup(state.x.coeffs(), state.t)?;
        check_blowup(state.y.coeffs(), state.t)
    }
}

/// Runs one path of the pair for `cfg.steps()` steps, calling `observe` on
/// the initial state and after every step.
pub fn run_pair(
    cfg: &SystemConfig,
    path: u64,
    mut observe: impl FnMut(&PairState),
) -> Result<PairState> {
    let mut model = PairModel::new(cfg)?;
    let mut rng_slow = RngStream::for_path(path, Stream::Slow, cfg.m);
    let mut rng_fast = RngStream::for_path(path, Stream::Fast, cfg.m);
    let mut state = model.initial_state();
    observe(&state);
    for _ in 0..cfg.steps() {
        model.step(&mut state, &mut rng_slow, &mut rng_fast)?;
        observe(&state);
    }
    Ok(state)
}

fn records(cfg: &SystemConfig, step: usize) -> bool {
    step.is_multiple_of(cfg.record_stride) || step == cfg.steps()
}

/// Full `(X, Y)` path on `[0, T]` recorded every `record_stride` steps (and
/// at `T`). `path` is the path seed, see [`crate::rng::path_seed`].
pub fn simulate_pair(cfg: &SystemConfig, path: u64) -> Result<(Trajectory, Trajectory)> {
    let mut xs = Trajectory::new(Component::X, cfg.m);
    let mut ys = Trajectory::new(Component::Y, cfg.m);
    run_pair(cfg, path, |s| {
        if records(cfg, s.step) {
            xs.times.push(s.t);
            xs.snapshots.push(s.x.clone());
            ys.times.push(s.t);
            ys.snapshots.push(s.y.clone());
        }
    })?;
    Ok((xs, ys))
}

/// State of the auxiliary pair alongside the original one.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxState {
    pub pair: PairState,
    pub x_hat: SpectralField,
    pub y_hat: SpectralField,
}

/// Number of steps per δ-block; δ must be a whole number of steps.
pub fn block_steps(cfg: &SystemConfig) -> Result<usize> {
    let ratio = cfg.delta / cfg.dt;
    let b = ratio.round();
    if b < 1.0 || (ratio - b).abs() > 1e-6 * ratio {
        return Err(Error::Config(format!(
            "delta = {} must be a whole multiple of dt = {}",
            cfg.delta, cfg.dt
        )));
    }
    Ok(b as usize)
}

/// Runs `(X^ε, Y^ε)` and the auxiliary `(X̂, Ŷ)` in lockstep on the same
/// noise. Over each block `[kδ, (k+1)δ)` the auxiliary drifts see the slow
/// state frozen at `X^ε_{kδ}`:
/// `dŶ = ε^{-1}[AŶ + g(X_{t(δ)}, Ŷ)]dt + ε^{-1/α}dZ`,
/// `dX̂ = [AX̂ + N(X̂) + f(X_{t(δ)}, Ŷ)]dt + dL`.
pub fn run_aux(
    cfg: &SystemConfig,
    path: u64,
    mut observe: impl FnMut(&AuxState),
) -> Result<AuxState> {
    let block = block_steps(cfg)?;
    let mut model = PairModel::new(cfg)?;
    let mut aux_drift = model.drift.clone();
    let n = aux_drift.n();
    let m = cfg.m;
    let mut frozen_g = vec![0.0; n];
    let mut hat_xg = vec![0.0; n];
    let mut hat_yg = vec![0.0; n];
    let mut hat_slow = vec![0.0; 2 * m];
    let mut hat_fast = vec![0.0; 2 * m];

    let mut rng_slow = RngStream::for_path(path, Stream::Slow, m);
    let mut rng_fast = RngStream::for_path(path, Stream::Fast, m);
    let pair = model.initial_state();
    let mut state = AuxState {
        x_hat: pair.x.clone(),
        y_hat: pair.y.clone(),
        pair,
    };
    observe(&state);
    for _ in 0..cfg.steps() {
        if state.pair.step.is_multiple_of(block) {
            aux_drift.synthesize(state.pair.x.coeffs(), &mut frozen_g);
        }
        let (ls, fs) = model.draw(&mut rng_slow, &mut rng_fast);

        aux_drift.synthesize(state.x_hat.coeffs(), &mut hat_xg);
        aux_drift.synthesize(state.y_hat.coeffs(), &mut hat_yg);
        let has_slow = aux_drift.slow_drift(&hat_xg, &frozen_g, Some(&hat_yg), &mut hat_slow);
        let has_fast = aux_drift.fast_drift(&frozen_g, &hat_yg, &mut hat_fast);
        let slow_inc = ls.then_some(model.slow_inc.as_slice());
        let fast_inc = fs.then_some(model.fast_inc.as_slice());
        model.slow.advance(
            state.x_hat.coeffs_mut(),
            has_slow.then_some(&hat_slow),
            slow_inc,
        );
        model.fast.advance(
            state.y_hat.coeffs_mut(),
            has_fast.then_some(&hat_fast),
            fast_inc,
        );

        model.apply(&mut state.pair, ls, fs)?;
        check_blowup(state.x_hat.coeffs(), state.pair.t)?;
        check_blowup(state.y_hat.coeffs(), state.pair.t)?;
        observe(&state);
    }
    Ok(state)
}

/// Recorded `(X̂, Ŷ)`; the paired `(X^ε, Y^ε)` uses the same seeds as
/// [`simulate_pair`] with the same `path`.
pub fn khasminskii_pair(cfg: &SystemConfig, path: u64) -> Result<(Trajectory, Trajectory)> {
    let mut xs = Trajectory::new(Component::XHat, cfg.m);
    let mut ys = Trajectory::new(Component::YHat, cfg.m);
    run_aux(cfg, path, |s| {
        if records(cfg, s.pair.step) {
            xs.times.push(s.pair.t);
            xs.snapshots.push(s.x_hat.clone());
            ys.times.push(s.pair.t);
            ys.snapshots.push(s.y_hat.clone());
        }
    })?;
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingPreset;
    use crate::rng::path_seed;
    use crate::spectral::LAMBDA_1;

    fn linear_cfg(dt: f64) -> SystemConfig {
        let mut cfg = SystemConfig::new(0.1, 0.05);
        cfg.m = 4;
        cfg.x0 = SpectralField::basis(4, 1).unwrap();
        cfg.y0 = SpectralField::zeros(4);
        cfg.dt = dt;
        cfg.switches = Switches::linear();
        cfg
    }

    #[test]
    fn linear_mode_is_pure_heat_flow() {
        let cfg = linear_cfg(0.001);
        let (xs, _) = simulate_pair(&cfg, 1).unwrap();
        let t = *xs.times.last().unwrap();
        let expected = (-LAMBDA_1 * t).exp();
        assert!((xs.last().unwrap().coeff(1) - expected).abs() < 1e-13);
    }

    #[test]
    fn linear_mode_two_half_steps_equal_one_step() {
        let coarse = simulate_pair(&linear_cfg(0.002), 1).unwrap().0;
        let fine = simulate_pair(&linear_cfg(0.001), 1).unwrap().0;
        let a = coarse.last().unwrap();
        let b = fine.last().unwrap();
        assert!(a.distance(b) < 1e-12);
    }

    #[test]
    fn same_seed_same_path() {
        let mut cfg = SystemConfig::new(0.05, 0.05);
        cfg.m = 8;
        cfg = cfg.with_modes(8);
        let a = simulate_pair(&cfg, path_seed(3, 0)).unwrap();
        let b = simulate_pair(&cfg, path_seed(3, 0)).unwrap();
        assert_eq!(a, b);
        let c = simulate_pair(&cfg, path_seed(3, 1)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn recording_grid() {
        let mut cfg = SystemConfig::new(0.05, 0.05).with_modes(4);
        cfg.record_stride = 7;
        let (xs, ys) = simulate_pair(&cfg, 0).unwrap();
        assert_eq!(cfg.steps(), 20);
        assert_eq!(xs.len(), 4); // steps 0, 7, 14, 20
        assert_eq!(xs.times, ys.times);
        assert!(xs.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stopping_time_cases() {
        let mut traj = Trajectory::new(Component::X, 1);
        for (t, c) in [(0.0, 1.0), (0.1, 3.0), (0.2, 2.0), (0.3, 5.0)] {
            traj.push(t, SpectralField::from_coeffs(1, vec![c, 0.0]).unwrap())
                .unwrap();
        }
        assert_eq!(stopping_time(&traj, 10.0).unwrap(), None);
        assert_eq!(stopping_time(&traj, 1e-9).unwrap(), Some(0.0));
        assert_eq!(stopping_time(&traj, 2.5).unwrap(), Some(0.1));
        assert_eq!(stopping_time(&traj, 4.0).unwrap(), Some(0.3));
        assert!(stopping_time(&traj, 0.0).is_err());
    }

    #[test]
    fn breakpoint_examples() {
        assert!((breakpoint(0.35, 0.1) - 0.3).abs() < 1e-12);
        assert!((breakpoint(0.3, 0.1) - 0.3).abs() < 1e-12);
        assert_eq!(breakpoint(0.05, 0.1), 0.0);
    }

    #[test]
    fn aux_equals_original_when_couplings_ignore_x() {
        let mut cfg = SystemConfig::new(0.05, 0.2).with_modes(6);
        cfg.coupling = Coupling::from_preset(CouplingPreset::XFree, 1.0, 1.0, 1.0);
        cfg.delta = 0.05;
        let last = run_aux(&cfg, 9, |_| {}).unwrap();
        assert_eq!(last.x_hat, last.pair.x);
        assert_eq!(last.y_hat, last.pair.y);
    }

    #[test]
    fn aux_differs_under_standard_coupling() {
        let mut cfg = SystemConfig::new(0.05, 0.2).with_modes(6);
        cfg.delta = 0.05;
        let last = run_aux(&cfg, 9, |_| {}).unwrap();
        assert_ne!(last.y_hat, last.pair.y);
        assert!(last.y_hat.distance(&last.pair.y) < 0.1);
    }

    #[test]
    fn delta_must_be_whole_steps() {
        let mut cfg = SystemConfig::new(0.05, 0.2).with_modes(4);
        cfg.delta = 0.0333;
        assert!(block_steps(&cfg).is_err());
    }

    #[test]
    fn blowup_is_flagged_with_time() {
        let mut cfg = SystemConfig::new(0.05, 0.1).with_modes(4);
        cfg.x0 = SpectralField::basis(4, 1).unwrap().scaled(1e5);
        let err = run_pair(&cfg, 0, |_| {}).unwrap_err();
        match err {
            Error::BlowUp { time } => assert!(time > 0.0 && time <= 0.1),
            other => panic!("unexpected {other}"),
        }
    }
}
