//! Run configuration: scenario presets and the flat `key = value` file.

use std::path::{Path, PathBuf};

use crate::adapt::{AdaptConfig, RemeshConfig};
use crate::bdf2::{ControllerConfig, NewtonOptions};
use crate::error::{Error, Result};
use crate::estimators::EstimatorOptions;
use crate::mesh::Rect;
use crate::models::{DiffusionCoefficient, IonicModel, ScalarReaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Bistable front from a corner Gaussian on the unit square.
    Test1,
    /// Test 1 with the radial diffusion bump.
    Test2,
    /// FitzHugh–Nagumo on (0,100)².
    Test3,
    /// Regularized Mitchell–Schaeffer on (0,100)².
    Test4,
    /// Heat equation with a manufactured cosine solution.
    Heat,
    Custom,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "test1" => Self::Test1,
            "test2" => Self::Test2,
            "test3" => Self::Test3,
            "test4" => Self::Test4,
            "heat" => Self::Heat,
            "custom" => Self::Custom,
            _ => return Err(Error::Config(format!("unknown scenario `{s}` (expected test1..test4, heat or custom)"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Test1 => "test1",
            Self::Test2 => "test2",
            Self::Test3 => "test3",
            Self::Test4 => "test4",
            Self::Heat => "heat",
            Self::Custom => "custom",
        }
    }
}

/// Desk presets trade tolerance and final time for runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Initial {
    /// `e^{−100(x²+y²)}`.
    Gaussian,
    /// `0.5 − arctan(√(x²+y²) − 200)/π`.
    ArctanLiteral,
    /// `0.5 − arctan(x²+y² − 200)/π`.
    ArctanCorrected,
    /// `cos(πx) cos(πy)`, the manufactured heat solution at t = 0.
    Cosine,
    Constant(f64),
}

impl Initial {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian" => Self::Gaussian,
            "literal" => Self::ArctanLiteral,
            "corrected" => Self::ArctanCorrected,
            "cosine" => Self::Cosine,
            _ => Self::Constant(
                s.parse()
                    .map_err(|_| Error::Config(format!("initial must be gaussian|literal|corrected|cosine or a number, got `{s}`")))?,
            ),
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Gaussian => (-100.0 * (x * x + y * y)).exp(),
            Self::ArctanLiteral => 0.5 - ((x * x + y * y).sqrt() - 200.0).atan() / std::f64::consts::PI,
            Self::ArctanCorrected => 0.5 - (x * x + y * y - 200.0).atan() / std::f64::consts::PI,
            Self::Cosine => (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos(),
            Self::Constant(c) => c,
        }
    }
}

/// The PDE being solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Physics {
    Scalar { reaction: ScalarReaction, diffusion: DiffusionCoefficient, manufactured: bool },
    Monodomain { model: IonicModel, diffusion: f64 },
}

impl Physics {
    pub fn is_monodomain(&self) -> bool {
        matches!(self, Self::Monodomain { .. })
    }
}

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub scale: Scale,
    pub physics: Physics,
    pub domain: Rect,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub mesh_file: Option<PathBuf>,
    pub initial: Initial,
    pub w_initial: f64,
    pub t_end: f64,
    pub tau0: f64,
    pub tau_max: f64,
    /// Scalar tolerances; infinite values switch the adaptation off.
    pub tol_s: f64,
    pub tol_t: f64,
    pub tol_s_u: f64,
    pub tol_s_w: f64,
    pub tol_t_u: f64,
    pub tol_t_w: f64,
    pub init_iterations: usize,
    pub max_remesh_per_step: usize,
    pub max_shrinks_per_step: usize,
    pub max_restarts: usize,
    /// Learn a correction of the equidistribution target from the achieved
    /// estimator after each remesh.
    pub target_correction: bool,
    pub adapt: AdaptConfig,
    pub controller: ControllerConfig,
    pub newton: NewtonOptions,
    pub estimator: EstimatorOptions,
    pub w_norm_floor: Option<f64>,
    pub vtk_stride: usize,
    pub artifact_stride: usize,
    pub log_timing: bool,
}

/// The keys a config file may set.
pub const KEYS: &[&str] = &[
    "scenario",
    "scale",
    "model",
    "cubic_scale",
    "reaction_c",
    "fhn_a",
    "fhn_eps",
    "fhn_kappa",
    "ms_tau_in",
    "ms_tau_out",
    "ms_tau_open",
    "ms_tau_close",
    "ms_u_gate",
    "ms_kappa",
    "diffusion",
    "domain",
    "mesh_nx",
    "mesh_ny",
    "mesh_file",
    "initial",
    "w_initial",
    "t_end",
    "tau0",
    "tau_max",
    "tol_s",
    "tol_t",
    "tol_s_u",
    "tol_s_w",
    "tol_t_u",
    "tol_t_w",
    "init_iterations",
    "h_min",
    "h_max",
    "aspect_max",
    "remesh_passes",
    "max_remesh_per_step",
    "max_shrinks_per_step",
    "max_restarts",
    "target_correction",
    "gamma_min",
    "gamma_max",
    "restart_factor",
    "norm_floor",
    "w_norm_floor",
    "time_points",
    "space_degree",
    "quadrature_subdivisions",
    "newton_tol",
    "newton_max",
    "linear_tol",
    "reaction_quadrature",
    "vtk_stride",
    "artifact_stride",
    "log_timing",
];

impl RunConfig {
    /// Preset of a scenario at the given scale.
    pub fn preset(scenario: Scenario, scale: Scale) -> Self {
        let paper = scale == Scale::Paper;
        let unit = Rect::new(0.0, 0.0, 1.0, 1.0);
        let heart = Rect::new(0.0, 0.0, 100.0, 100.0);
        let base = Self {
            scenario,
            scale,
            physics: Physics::Scalar {
                reaction: ScalarReaction::bistable(),
                diffusion: DiffusionCoefficient::Constant(1.0),
                manufactured: false,
            },
            domain: unit,
            mesh_nx: 20,
            mesh_ny: 20,
            mesh_file: None,
            initial: Initial::Gaussian,
            w_initial: 0.0,
            t_end: 0.04,
            tau0: 1e-4,
            tau_max: f64::INFINITY,
            tol_s: 0.25,
            tol_t: 0.1875,
            tol_s_u: 0.25,
            tol_s_w: 0.25,
            tol_t_u: 0.14,
            tol_t_w: 0.03,
            init_iterations: 5,
            max_remesh_per_step: 6,
            max_shrinks_per_step: 10,
            max_restarts: 10,
            target_correction: true,
            adapt: AdaptConfig { h_min: 1e-4, h_max: 0.25, ..Default::default() },
            controller: ControllerConfig::scalar(),
            newton: NewtonOptions::default(),
            estimator: EstimatorOptions::default(),
            w_norm_floor: None,
            vtk_stride: 0,
            artifact_stride: 0,
            log_timing: false,
        };
        let mono = |model, diffusion| Physics::Monodomain { model, diffusion };
        let mut c = match scenario {
            Scenario::Test1 => Self {
                tol_s: if paper { 0.125 } else { 0.25 },
                tol_t: if paper { 0.09375 } else { 0.1875 },
                estimator: EstimatorOptions { norm_floor: Some(1.0), ..Default::default() },
                ..base
            },
            Scenario::Test2 => Self {
                physics: Physics::Scalar {
                    reaction: ScalarReaction::bistable(),
                    diffusion: DiffusionCoefficient::RadialBump,
                    manufactured: false,
                },
                t_end: 0.01,
                tol_s: 0.25,
                tol_t: 0.375,
                ..base
            },
            Scenario::Test3 => Self {
                physics: mono(IonicModel::fhn_default(), 1.0),
                domain: heart,
                initial: Initial::ArctanCorrected,
                t_end: if paper { 350.0 } else { 100.0 },
                tau0: 0.5,
                tau_max: 4.0,
                tol_s_u: if paper { 0.125 } else { 0.25 },
                tol_s_w: if paper { 0.0125 } else { 0.25 },
                tol_t_u: if paper { 0.035875 } else { 0.14 },
                tol_t_w: if paper { 0.0075 } else { 0.03 },
                controller: ControllerConfig::monodomain(),
                adapt: AdaptConfig { h_min: 0.02, h_max: 10.0, ..Default::default() },
                // w starts flat, so |w|_1 alone would blow up the relative w estimators
                w_norm_floor: Some(1.0),
                ..base
            },
            Scenario::Test4 => Self {
                physics: mono(IonicModel::ms_default(), 3.949),
                domain: heart,
                initial: Initial::ArctanCorrected,
                w_initial: 1.0,
                t_end: if paper { 500.0 } else { 120.0 },
                tau0: 0.05,
                tau_max: 4.0,
                tol_s_u: if paper { 0.0625 } else { 0.25 },
                tol_s_w: if paper { 0.0625 } else { 0.25 },
                tol_t_u: if paper { 0.035875 } else { 0.14 },
                tol_t_w: if paper { 0.0075 } else { 0.03 },
                controller: ControllerConfig::monodomain(),
                adapt: AdaptConfig { h_min: 0.02, h_max: 10.0, ..Default::default() },
                // w starts flat, so |w|_1 alone would blow up the relative w estimators
                w_norm_floor: Some(1.0),
                ..base
            },
            Scenario::Heat => Self {
                physics: Physics::Scalar {
                    reaction: ScalarReaction::Zero,
                    diffusion: DiffusionCoefficient::Constant(1.0),
                    manufactured: true,
                },
                initial: Initial::Cosine,
                mesh_nx: 32,
                mesh_ny: 32,
                t_end: 0.5,
                tau0: 1.0 / 40.0,
                tol_s: f64::INFINITY,
                tol_t: f64::INFINITY,
                ..base
            },
            Scenario::Custom => Self {
                physics: Physics::Scalar {
                    reaction: ScalarReaction::Zero,
                    diffusion: DiffusionCoefficient::Constant(1.0),
                    manufactured: false,
                },
                initial: Initial::Constant(0.0),
                t_end: 1.0,
                tau0: 0.01,
                tol_s: f64::INFINITY,
                tol_t: f64::INFINITY,
                ..base
            },
        };
        c.sync_adapt();
        c
    }

    /// Copies the space tolerances into `adapt`. An infinite tolerance
    /// never triggers refinement and makes its metric the coarsest one.
    pub fn sync_adapt(&mut self) {
        self.adapt.tol_s = self.tol_s;
        self.adapt.tol_s_u = self.tol_s_u;
        self.adapt.tol_s_w = self.tol_s_w;
    }

    /// Whether the mesh is adapted at all.
    pub fn space_adaptive(&self) -> bool {
        if self.physics.is_monodomain() {
            self.tol_s_u.is_finite() || self.tol_s_w.is_finite()
        } else {
            self.tol_s.is_finite()
        }
    }

    /// Whether the step size is controlled.
    pub fn time_adaptive(&self) -> bool {
        if self.physics.is_monodomain() {
            self.tol_t_u.is_finite() || self.tol_t_w.is_finite()
        } else {
            self.tol_t.is_finite()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_end", self.t_end),
            ("tau0", self.tau0),
            ("tau_max", self.tau_max),
            ("tol_s", self.tol_s),
            ("tol_t", self.tol_t),
            ("tol_s_u", self.tol_s_u),
            ("tol_s_w", self.tol_s_w),
            ("tol_t_u", self.tol_t_u),
            ("tol_t_w", self.tol_t_w),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !self.t_end.is_finite() || !self.tau0.is_finite() {
            return Err(Error::Config("t_end and tau0 must be finite".into()));
        }
        if self.mesh_file.is_none() && (self.mesh_nx == 0 || self.mesh_ny == 0) {
            return Err(Error::Config("mesh_nx and mesh_ny must be at least 1".into()));
        }
        let ctl = &self.controller;
        if !(ctl.gamma_min > 0.0 && ctl.gamma_min < 1.0 && ctl.gamma_max > 1.0 && ctl.restart_factor > 0.0 && ctl.restart_factor < 1.0)
        {
            return Err(Error::Config(format!("invalid controller constants {ctl:?}")));
        }
        if self.estimator.time_points == 0 || self.estimator.time_points > 5 {
            return Err(Error::Config(format!("time_points must be in 1..=5, got {}", self.estimator.time_points)));
        }
        if let Physics::Monodomain { model, diffusion } = &self.physics {
            model.validate()?;
            if !(*diffusion > 0.0) {
                return Err(Error::Config(format!("diffusion must be positive, got {diffusion}")));
            }
        }
        self.adapt.validate()
    }

    /// Parses a config file body; `scenario` and `scale` pick the preset the
    /// other keys override.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { path: path.to_path_buf(), line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown key `{k}` at {}:{}", path.display(), i + 1)));
            }
            pairs.push((i + 1, k.to_string(), v.to_string()));
        }
        let find = |key: &str| pairs.iter().rev().find(|p| p.1 == key).map(|p| p.2.as_str());
        let scenario = Scenario::parse(find("scenario").unwrap_or("custom"))?;
        let scale = match find("scale").unwrap_or("desk") {
            "desk" => Scale::Desk,
            "paper" => Scale::Paper,
            s => return Err(Error::Config(format!("scale must be desk or paper, got `{s}`"))),
        };
        let mut c = Self::preset(scenario, scale);
        // the model has to be known before its parameters
        if let Some(m) = find("model") {
            c.set("model", m)?;
        }
        for (line, k, v) in &pairs {
            if k == "scenario" || k == "scale" || k == "model" {
                continue;
            }
            c.set(k, v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}:{line}: {msg}", path.display())),
                e => e,
            })?;
        }
        c.sync_adapt();
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        fn num(key: &str, v: &str) -> Result<f64> {
            match v {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}` as a number"))),
            }
        }
        fn int(key: &str, v: &str) -> Result<usize> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}` as a non-negative integer")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "on" | "yes" | "1" => Ok(true),
                "false" | "off" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got `{v}`"))),
            }
        }
        fn floor(key: &str, v: &str) -> Result<Option<f64>> {
            match v {
                "none" | "off" => Ok(None),
                _ => num(key, v).map(Some),
            }
        }
        let x = || num(key, v);
        match key {
            "model" => {
                self.physics = match v {
                    "cubic" => {
                        let diffusion = match self.physics {
                            Physics::Scalar { diffusion, .. } => diffusion,
                            Physics::Monodomain { diffusion, .. } => DiffusionCoefficient::Constant(diffusion),
                        };
                        Physics::Scalar { reaction: ScalarReaction::bistable(), diffusion, manufactured: false }
                    }
                    "zero" | "linear" => {
                        let reaction = if v == "zero" { ScalarReaction::Zero } else { ScalarReaction::Linear { c: 1.0 } };
                        let (diffusion, manufactured) = match self.physics {
                            Physics::Scalar { diffusion, manufactured, .. } => (diffusion, manufactured),
                            Physics::Monodomain { diffusion, .. } => (DiffusionCoefficient::Constant(diffusion), false),
                        };
                        Physics::Scalar { reaction, diffusion, manufactured }
                    }
                    "fhn" | "ms" => {
                        let model = if v == "fhn" { IonicModel::fhn_default() } else { IonicModel::ms_default() };
                        let diffusion = match self.physics {
                            Physics::Monodomain { diffusion, .. } => diffusion,
                            Physics::Scalar { .. } => {
                                if v == "ms" {
                                    3.949
                                } else {
                                    1.0
                                }
                            }
                        };
                        self.controller = ControllerConfig::monodomain();
                        Physics::Monodomain { model, diffusion }
                    }
                    _ => return Err(Error::Config(format!("model must be cubic|zero|linear|fhn|ms, got `{v}`"))),
                }
            }
            "cubic_scale" => match &mut self.physics {
                Physics::Scalar { reaction: ScalarReaction::Cubic { scale, .. }, .. } => *scale = x()?,
                _ => return Err(Error::Config("cubic_scale needs model = cubic".into())),
            },
            "reaction_c" => match &mut self.physics {
                Physics::Scalar { reaction: ScalarReaction::Linear { c }, .. } => *c = x()?,
                _ => return Err(Error::Config("reaction_c needs model = linear".into())),
            },
            "fhn_a" | "fhn_eps" | "fhn_kappa" => match &mut self.physics {
                Physics::Monodomain { model: IonicModel::Fhn { a, eps, kappa }, .. } => {
                    *match key {
                        "fhn_a" => a,
                        "fhn_eps" => eps,
                        _ => kappa,
                    } = x()?
                }
                _ => return Err(Error::Config(format!("{key} needs model = fhn"))),
            },
            "ms_tau_in" | "ms_tau_out" | "ms_tau_open" | "ms_tau_close" | "ms_u_gate" | "ms_kappa" => match &mut self.physics {
                Physics::Monodomain { model: IonicModel::Ms { tau_in, tau_out, tau_open, tau_close, u_gate, kappa }, .. } => {
                    *match key {
                        "ms_tau_in" => tau_in,
                        "ms_tau_out" => tau_out,
                        "ms_tau_open" => tau_open,
                        "ms_tau_close" => tau_close,
                        "ms_u_gate" => u_gate,
                        _ => kappa,
                    } = x()?
                }
                _ => return Err(Error::Config(format!("{key} needs model = ms"))),
            },
            "diffusion" => match &mut self.physics {
                Physics::Scalar { diffusion, .. } => {
                    *diffusion = if v == "bump" { DiffusionCoefficient::RadialBump } else { DiffusionCoefficient::Constant(x()?) }
                }
                Physics::Monodomain { diffusion, .. } => *diffusion = x()?,
            },
            "domain" => {
                let vals: Vec<f64> = v.split_whitespace().map(|s| num(key, s)).collect::<Result<_>>()?;
                let [x0, y0, x1, y1] = vals[..] else {
                    return Err(Error::Config(format!("domain needs `x0 y0 x1 y1`, got `{v}`")));
                };
                if !(x1 > x0 && y1 > y0) {
                    return Err(Error::Config(format!("degenerate domain `{v}`")));
                }
                self.domain = Rect::new(x0, y0, x1, y1);
            }
            "mesh_nx" => self.mesh_nx = int(key, v)?,
            "mesh_ny" => self.mesh_ny = int(key, v)?,
            "mesh_file" => self.mesh_file = Some(PathBuf::from(v)),
            "initial" => self.initial = Initial::parse(v)?,
            "w_initial" => self.w_initial = x()?,
            "t_end" => self.t_end = x()?,
            "tau0" => self.tau0 = x()?,
            "tau_max" => self.tau_max = x()?,
            "tol_s" => self.tol_s = x()?,
            "tol_t" => self.tol_t = x()?,
            "tol_s_u" => self.tol_s_u = x()?,
            "tol_s_w" => self.tol_s_w = x()?,
            "tol_t_u" => self.tol_t_u = x()?,
            "tol_t_w" => self.tol_t_w = x()?,
            "init_iterations" => self.init_iterations = int(key, v)?,
            "h_min" => self.adapt.h_min = x()?,
            "h_max" => self.adapt.h_max = x()?,
            "aspect_max" => self.adapt.aspect_max = x()?,
            "remesh_passes" => self.adapt.remesh = RemeshConfig { passes: int(key, v)?, ..self.adapt.remesh },
            "max_remesh_per_step" => self.max_remesh_per_step = int(key, v)?,
            "max_shrinks_per_step" => self.max_shrinks_per_step = int(key, v)?,
            "max_restarts" => self.max_restarts = int(key, v)?,
            "target_correction" => self.target_correction = flag(key, v)?,
            "gamma_min" => self.controller.gamma_min = x()?,
            "gamma_max" => self.controller.gamma_max = x()?,
            "restart_factor" => self.controller.restart_factor = x()?,
            "norm_floor" => self.estimator.norm_floor = floor(key, v)?,
            "w_norm_floor" => self.w_norm_floor = floor(key, v)?,
            "time_points" => self.estimator.time_points = int(key, v)?,
            "space_degree" => self.estimator.space_degree = int(key, v)?,
            "quadrature_subdivisions" => self.estimator.subdivisions = int(key, v)?,
            "newton_tol" => self.newton.tol = x()?,
            "newton_max" => self.newton.max_iter = int(key, v)?,
            "linear_tol" => self.newton.linear_tol = x()?,
            "reaction_quadrature" => {
                self.newton.consistent_reaction = match v {
                    "nodal" => false,
                    "consistent" => true,
                    _ => return Err(Error::Config(format!("reaction_quadrature must be nodal or consistent, got `{v}`"))),
                }
            }
            "vtk_stride" => self.vtk_stride = int(key, v)?,
            "artifact_stride" => self.artifact_stride = int(key, v)?,
            "log_timing" => self.log_timing = flag(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Serializes every key so that parsing the text gives the same config.
    pub fn to_text(&self) -> String {
        use crate::textio::fmt_f64 as f;
        let floor = |v: Option<f64>| v.map_or("none".to_string(), f);
        let mut out = vec![
            format!("scenario = {}", self.scenario.name()),
            format!("scale = {}", if self.scale == Scale::Paper { "paper" } else { "desk" }),
        ];
        match self.physics {
            Physics::Scalar { reaction, diffusion, .. } => {
                match reaction {
                    ScalarReaction::Cubic { scale, .. } => {
                        out.push("model = cubic".into());
                        out.push(format!("cubic_scale = {}", f(scale)));
                    }
                    ScalarReaction::Linear { c } => {
                        out.push("model = linear".into());
                        out.push(format!("reaction_c = {}", f(c)));
                    }
                    ScalarReaction::Zero => out.push("model = zero".into()),
                }
                out.push(match diffusion {
                    DiffusionCoefficient::Constant(c) => format!("diffusion = {}", f(c)),
                    DiffusionCoefficient::RadialBump => "diffusion = bump".into(),
                });
            }
            Physics::Monodomain { model, diffusion } => {
                match model {
                    IonicModel::Fhn { a, eps, kappa } => {
                        out.push("model = fhn".into());
                        out.push(format!("fhn_a = {}\nfhn_eps = {}\nfhn_kappa = {}", f(a), f(eps), f(kappa)));
                    }
                    IonicModel::Ms { tau_in, tau_out, tau_open, tau_close, u_gate, kappa } => {
                        out.push("model = ms".into());
                        out.push(format!(
                            "ms_tau_in = {}\nms_tau_out = {}\nms_tau_open = {}\nms_tau_close = {}\nms_u_gate = {}\nms_kappa = {}",
                            f(tau_in),
                            f(tau_out),
                            f(tau_open),
                            f(tau_close),
                            f(u_gate),
                            f(kappa)
                        ));
                    }
                }
                out.push(format!("diffusion = {}", f(diffusion)));
            }
        }
        let d = self.domain;
        out.push(format!("domain = {} {} {} {}", f(d.x0), f(d.y0), f(d.x1), f(d.y1)));
        out.push(format!("mesh_nx = {}\nmesh_ny = {}", self.mesh_nx, self.mesh_ny));
        if let Some(p) = &self.mesh_file {
            out.push(format!("mesh_file = {}", p.display()));
        }
        out.push(format!(
            "initial = {}",
            match self.initial {
                Initial::Gaussian => "gaussian".to_string(),
                Initial::ArctanLiteral => "literal".into(),
                Initial::ArctanCorrected => "corrected".into(),
                Initial::Cosine => "cosine".into(),
                Initial::Constant(c) => f(c),
            }
        ));
        let inf = |v: f64| if v.is_infinite() { "inf".to_string() } else { f(v) };
        for (k, v) in [
            ("w_initial", self.w_initial),
            ("t_end", self.t_end),
            ("tau0", self.tau0),
            ("tau_max", self.tau_max),
            ("tol_s", self.tol_s),
            ("tol_t", self.tol_t),
            ("tol_s_u", self.tol_s_u),
            ("tol_s_w", self.tol_s_w),
            ("tol_t_u", self.tol_t_u),
            ("tol_t_w", self.tol_t_w),
            ("h_min", self.adapt.h_min),
            ("h_max", self.adapt.h_max),
            ("aspect_max", self.adapt.aspect_max),
            ("gamma_min", self.controller.gamma_min),
            ("gamma_max", self.controller.gamma_max),
            ("restart_factor", self.controller.restart_factor),
            ("newton_tol", self.newton.tol),
            ("linear_tol", self.newton.linear_tol),
        ] {
            out.push(format!("{k} = {}", inf(v)));
        }
        for (k, v) in [
            ("init_iterations", self.init_iterations),
            ("remesh_passes", self.adapt.remesh.passes),
            ("max_remesh_per_step", self.max_remesh_per_step),
            ("max_shrinks_per_step", self.max_shrinks_per_step),
            ("max_restarts", self.max_restarts),
            ("time_points", self.estimator.time_points),
            ("space_degree", self.estimator.space_degree),
            ("quadrature_subdivisions", self.estimator.subdivisions),
            ("newton_max", self.newton.max_iter),
            ("vtk_stride", self.vtk_stride),
            ("artifact_stride", self.artifact_stride),
        ] {
            out.push(format!("{k} = {v}"));
        }
        out.push(format!("target_correction = {}", self.target_correction));
        out.push(format!("norm_floor = {}", floor(self.estimator.norm_floor)));
        out.push(format!("w_norm_floor = {}", floor(self.w_norm_floor)));
        out.push(format!("reaction_quadrature = {}", if self.newton.consistent_reaction { "consistent" } else { "nodal" }));
        out.push(format!("log_timing = {}", self.log_timing));
        out.join("\n") + "\n"
    }
}
