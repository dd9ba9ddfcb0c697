//! Reaction terms, ionic models and diffusion coefficients.

use crate::error::{Error, Result};

/// Scalar reaction `f(u)` in `∂u/∂t − div(A∇u) + f(u) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarReaction {
    /// `scale · (u − r0)(u − r1)(u − r2)`.
    Cubic { scale: f64, roots: [f64; 3] },
    /// `c · u`.
    Linear { c: f64 },
    Zero,
}

impl ScalarReaction {
    /// The bistable cubic `10⁴ u (u − 1)(u − 0.25)`.
    pub fn bistable() -> Self {
        Self::Cubic { scale: 1e4, roots: [0.0, 1.0, 0.25] }
    }

    /// `(f(u), f′(u))`.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        match *self {
            Self::Cubic { scale, roots: [a, b, c] } => {
                let (p, q, r) = (u - a, u - b, u - c);
                (scale * p * q * r, scale * (q * r + p * r + p * q))
            }
            Self::Linear { c } => (c * u, c),
            Self::Zero => (0.0, 0.0),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.eval(u).0
    }
}

/// `(f, f′)` of the bistable cubic.
pub fn eval_cubic(u: f64) -> (f64, f64) {
    ScalarReaction::bistable().eval(u)
}

/// Values and partial derivatives of an ionic model at one state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct IonicEval {
    pub f: f64,
    pub g: f64,
    pub f_u: f64,
    pub f_w: f64,
    pub g_u: f64,
    pub g_w: f64,
}

/// Ionic model for `∂u/∂t − D Δu + F(u, w) = 0`, `∂w/∂t + G(u, w) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IonicModel {
    Fhn { a: f64, eps: f64, kappa: f64 },
    Ms { tau_in: f64, tau_out: f64, tau_open: f64, tau_close: f64, u_gate: f64, kappa: f64 },
}

impl IonicModel {
    pub fn fhn_default() -> Self {
        Self::Fhn { a: 0.25, eps: 0.01, kappa: 0.16875 }
    }

    pub fn ms_default() -> Self {
        Self::Ms { tau_in: 0.315, tau_out: 5.556, tau_open: 94.942, tau_close: 168.5, u_gate: 0.13, kappa: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Fhn { a, eps, kappa } => a > 0.0 && a < 1.0 && eps > 0.0 && kappa > 0.0,
            Self::Ms { tau_in, tau_out, tau_open, tau_close, u_gate, kappa } => {
                [tau_in, tau_out, tau_open, tau_close, kappa].iter().all(|&v| v > 0.0 && v.is_finite())
                    && u_gate > 0.0
                    && u_gate < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid ionic model parameters {self:?}")))
        }
    }

    pub fn eval(&self, u: f64, w: f64) -> IonicEval {
        match *self {
            Self::Fhn { a, eps, kappa } => eval_fhn(u, w, a, eps, kappa),
            Self::Ms { tau_in, tau_out, tau_open, tau_close, u_gate, kappa } => {
                eval_ms_regularized(u, w, tau_in, tau_out, tau_open, tau_close, u_gate, kappa)
            }
        }
    }
}

pub fn eval_fhn(u: f64, w: f64, a: f64, eps: f64, kappa: f64) -> IonicEval {
    IonicEval {
        f: u * (u - a) * (u - 1.0) + w,
        g: -eps * (kappa * u - w),
        f_u: 3.0 * u * u - 2.0 * (1.0 + a) * u + a,
        f_w: 1.0,
        g_u: -eps * kappa,
        g_w: eps,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn eval_ms_regularized(
    u: f64,
    w: f64,
    tau_in: f64,
    tau_out: f64,
    tau_open: f64,
    tau_close: f64,
    u_gate: f64,
    kappa: f64,
) -> IonicEval {
    let th = (kappa * (u - u_gate)).tanh();
    let s = 0.5 * (1.0 + th);
    let ds = 0.5 * kappa * (1.0 - th * th);
    let tau_u = tau_open + (tau_close - tau_open) * s;
    let dtau = (tau_close - tau_open) * ds;
    // (1 − s)(w − 1) + s·w = w − 1 + s
    let num = w - 1.0 + s;
    IonicEval {
        f: w * u * u * (u - 1.0) / tau_in + u / tau_out,
        g: num / tau_u,
        f_u: w * (3.0 * u * u - 2.0 * u) / tau_in + 1.0 / tau_out,
        f_w: u * u * (u - 1.0) / tau_in,
        g_u: ds / tau_u - num * dtau / (tau_u * tau_u),
        g_w: 1.0 / tau_u,
    }
}

/// Gate function `s` and time constant `τ_u` of the regularized model.
pub fn ms_gate(u: f64, tau_open: f64, tau_close: f64, u_gate: f64, kappa: f64) -> (f64, f64) {
    let s = 0.5 * (1.0 + (kappa * (u - u_gate)).tanh());
    (s, tau_open + (tau_close - tau_open) * s)
}

/// Constants `(α, β)` of the monotonicity bound for the ionic model.
pub fn monotonicity_constants(model: &IonicModel) -> Result<(f64, f64)> {
    match *model {
        IonicModel::Fhn { a, eps, kappa } => {
            let u = (1.0 + a) / 3.0;
            let mu = -(3.0 * u * u - 2.0 * (1.0 + a) * u + a);
            Ok((mu + (1.0 + eps * kappa).powi(2) / (2.0 * eps), eps / 2.0))
        }
        IonicModel::Ms { tau_in, tau_out, tau_open, tau_close, kappa, .. } => {
            let tmax = tau_open.max(tau_close);
            let tmin = tau_open.min(tau_close);
            let mu1 = 1.0 / (3.0 * tau_in) - 1.0 / tau_out;
            let mu2 = 4.0 / (27.0 * tau_in) + kappa * (tmax + (tau_close - tau_open).abs()) / (tmin * tmin);
            let mu3 = 1.0 / tmax;
            Ok((mu1 + mu2 * mu2 / (2.0 * mu3), mu3 / 2.0))
        }
    }
}

/// Diffusion coefficient `A(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffusionCoefficient {
    Constant(f64),
    /// `1 + 19 (1 − tanh²(20 (r − 0.3)))`.
    RadialBump,
}

impl DiffusionCoefficient {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::RadialBump => eval_diffusion_bump(x, y),
        }
    }
}

pub fn eval_diffusion_bump(x: f64, y: f64) -> f64 {
    let t = (20.0 * (x.hypot(y) - 0.3)).tanh();
    1.0 + 19.0 * (1.0 - t * t)
}
