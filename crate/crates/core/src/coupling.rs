//! Pointwise couplings between the slow and fast components.
//!
//! `f(x,y)(ξ) = f_x sin x(ξ) + f_y sin y(ξ)` and
//! `g(x,y)(ξ) = g_x sin x(ξ) + g_y arctan y(ξ)`, evaluated on the physical
//! grid and projected back onto the Galerkin modes. Both maps are bounded
//! in `x`, globally Lipschitz, and `g` is `|g_y|`-Lipschitz in `y`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingPreset {
    /// `f = a_f (sin x + ½ sin y)`, `g = a_g sin x + b_g arctan y`.
    #[default]
    Standard,
    /// Standard `g`, `f = a_f sin x` (no `y` dependence).
    SlowOnly,
    /// No `x` dependence: `f = ½ a_f sin y`, `g = b_g arctan y`.
    XFree,
    /// `f = a_f sin y`, `g ≡ 0`.
    Symmetric,
    /// `f ≡ 0`, `g ≡ 0`.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_y: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling::standard(1.0, 1.0, 1.0)
    }
}

impl Coupling {
    pub fn standard(a_f: f64, a_g: f64, b_g: f64) -> Self {
        Coupling::from_preset(CouplingPreset::Standard, a_f, a_g, b_g)
    }

    pub fn from_preset(preset: CouplingPreset, a_f: f64, a_g: f64, b_g: f64) -> Self {
        let (f_x, f_y, g_x, g_y) = match preset {
            CouplingPreset::Standard => (a_f, 0.5 * a_f, a_g, b_g),
            CouplingPreset::SlowOnly => (a_f, 0.0, a_g, b_g),
            CouplingPreset::XFree => (0.0, 0.5 * a_f, 0.0, b_g),
            CouplingPreset::Symmetric => (0.0, a_f, 0.0, 0.0),
            CouplingPreset::Zero => (0.0, 0.0, 0.0, 0.0),
        };
        Coupling { f_x, f_y, g_x, g_y }
    }

    /// Declared Lipschitz constant of `f` on `H × H`.
    pub fn lipschitz_f(&self) -> f64 {
        self.f_x.abs() + self.f_y.abs()
    }

    /// Declared bound on `‖f(x,y)‖` (pointwise bound on the unit torus).
    pub fn f_bound(&self) -> f64 {
        self.f_x.abs() + self.f_y.abs()
    }

    /// Lipschitz constant of `g` in the slow argument.
    pub fn c_g(&self) -> f64 {
        self.g_x.abs()
    }

    /// Lipschitz constant of `g` in the fast argument.
    pub fn l_g(&self) -> f64 {
        self.g_y.abs()
    }

    pub fn f_depends_on_y(&self) -> bool {
        self.f_y != 0.0
    }

    pub fn depends_on_x(&self) -> bool {
        self.f_x != 0.0 || self.g_x != 0.0
    }

    /// The fast dynamics do not see `x`, so one invariant measure serves all
    /// slow states.
    pub fn is_separable(&self) -> bool {
        self.g_x == 0.0
    }

    /// `out += f_x sin x` pointwise.
    #[inline]
    pub fn add_f_slow(&self, x: &[f64], out: &mut [f64]) {
        if self.f_x != 0.0 {
            for (o, &v) in out.iter_mut().zip(x) {
                *o += self.f_x * v.sin();
            }
        }
    }

    /// `out += f_y sin y` pointwise.
    #[inline]
    pub fn add_f_fast(&self, y: &[f64], out: &mut [f64]) {
        if self.f_y != 0.0 {
            for (o, &v) in out.iter_mut().zip(y) {
                *o += self.f_y * v.sin();
            }
        }
    }

    /// `out = g(x, y)` pointwise.
    #[inline]
    pub fn eval_g(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if self.g_x != 0.0 {
            for (o, &v) in out.iter_mut().zip(x) {
                *o += self.g_x * v.sin();
            }
        }
        if self.g_y != 0.0 {
            for (o, &v) in out.iter_mut().zip(y) {
                *o += self.g_y * v.atan();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let c = Coupling::default();
        assert_eq!((c.f_x, c.f_y, c.g_x, c.g_y), (1.0, 0.5, 1.0, 1.0));
        assert_eq!(c.f_bound(), 1.5);
        assert_eq!(c.l_g(), 1.0);
        assert!(!c.is_separable());
        let s = Coupling::from_preset(CouplingPreset::SlowOnly, 2.0, 1.0, 1.0);
        assert!(!s.f_depends_on_y());
        let x = Coupling::from_preset(CouplingPreset::XFree, 1.0, 1.0, 1.0);
        assert!(!x.depends_on_x() && x.is_separable());
        let sym = Coupling::from_preset(CouplingPreset::Symmetric, 1.0, 1.0, 1.0);
        assert_eq!((sym.f_x, sym.f_y, sym.g_x, sym.g_y), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn pointwise_evaluation() {
        let c = Coupling::standard(1.0, 2.0, 0.5);
        let x = [0.3, -1.0];
        let y = [2.0, 0.0];
        let mut f = [0.0; 2];
        c.add_f_slow(&x, &mut f);
        c.add_f_fast(&y, &mut f);
        assert_eq!(f[0], 0.3f64.sin() + 0.5 * 2.0f64.sin());
        let mut g = [9.0; 2];
        c.eval_g(&x, &y, &mut g);
        assert_eq!(g[1], 2.0 * (-1.0f64).sin() + 0.5 * 0.0f64.atan());
    }

    #[test]
    fn f_respects_declared_bound() {
        let c = Coupling::default();
        let mut worst = 0.0f64;
        for i in 0..200 {
            for j in 0..200 {
                let (x, y) = (i as f64 * 0.1 - 10.0, j as f64 * 0.1 - 10.0);
                let mut f = [0.0];
                c.add_f_slow(&[x], &mut f);
                c.add_f_fast(&[y], &mut f);
                worst = worst.max(f[0].abs());
            }
        }
        assert!(worst <= c.f_bound());
    }
}
