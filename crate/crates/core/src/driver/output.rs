//! Run log, summary, VTK field files and the per-step artifacts that let
//! `estimate` recompute a logged row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bdf2::{Level, TimeHistory};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorReport, TimeReport};
use crate::fem::{read_fields, write_fields};
use crate::mesh::{read_mesh, write_mesh, Mesh};
use crate::textio::{fmt_f64, Tokens};

/// What ended a step's row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Accept,
    /// Accepted; the next step is enlarged.
    Grow,
    /// The step was discarded and the run restarted from t = 0.
    Restart,
}

impl Action {
    fn name(&self) -> &'static str {
        match self {
            Self::Accept => "accept",
            Self::Grow => "grow",
            Self::Restart => "restart",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "accept" => Self::Accept,
            "grow" => Self::Grow,
            "restart" => Self::Restart,
            _ => return None,
        })
    }
}

/// Irregular events of a step.
pub mod flag {
    /// The step-size ratio left `[γ_min, γ_max]`; the step was accepted as is.
    pub const GAMMA_ESCAPE: &str = "gamma-escape";
    /// The space estimator stayed below its band after coarsening.
    pub const BAND_EXIT: &str = "band-exit";
    /// The step was accepted after the shrink limit.
    pub const SHRINK_CAP: &str = "shrink-cap";
    /// Newton failed at least once and the step was halved.
    pub const NEWTON_RETRY: &str = "newton-retry";
    /// Step shortened to land on T.
    pub const CLIPPED: &str = "clipped";
}

/// One log line.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub elements: usize,
    pub vertices: usize,
    /// `η^S` or `η^{S,U}`.
    pub eta_s: f64,
    pub omega_w: Option<f64>,
    /// `η^{i,T}` (monodomain: the `u` terms; `eta2` is absent there).
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eta3: Option<f64>,
    pub eta4: Option<f64>,
    pub eta3_w: Option<f64>,
    pub eta4_w: Option<f64>,
    pub eta_t: Option<f64>,
    pub eta_t_mod: Option<f64>,
    pub eta_t_w: Option<f64>,
    pub eta_t_w_mod: Option<f64>,
    pub norm_u: f64,
    pub norm_w: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub gamma: Option<f64>,
    pub remeshes: usize,
    pub shrinks: usize,
    pub newton: usize,
    pub action: Action,
    pub flags: Vec<String>,
    pub wall: Option<f64>,
}

pub const LOG_HEADER: &str = "step,t,tau,elements,vertices,eta_s,omega_w,eta1_t,eta2_t,eta3_t,eta4_t,eta3_t_w,eta4_t_w,\
eta_t,eta_t_mod,eta_t_w,eta_t_w_mod,norm_u,norm_w,u_min,u_max,w_min,w_max,gamma,remeshes,shrinks,newton,action,flags,wall_s";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt_f64)
}

fn minmax(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

impl LogRow {
    /// The estimator part of a row.
    pub fn from_report(r: &EstimatorReport, level: &Level) -> Self {
        let (u_min, u_max) = minmax(&level.u);
        let (w_min, w_max) = match &level.w {
            Some(w) => {
                let (a, b) = minmax(w);
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        let mut row = Self {
            step: r.step,
            t: r.t,
            tau: r.tau,
            elements: r.elements,
            vertices: level.u.len(),
            eta_s: r.space.global,
            omega_w: r.omega_w.as_ref().map(|o| o.global),
            eta1: None,
            eta2: None,
            eta3: None,
            eta4: None,
            eta3_w: None,
            eta4_w: None,
            eta_t: None,
            eta_t_mod: None,
            eta_t_w: None,
            eta_t_w_mod: None,
            norm_u: r.norm_u,
            norm_w: r.norm_w,
            u_min,
            u_max,
            w_min,
            w_max,
            gamma: None,
            remeshes: 0,
            shrinks: 0,
            newton: 0,
            action: Action::Accept,
            flags: Vec::new(),
            wall: None,
        };
        match &r.time {
            Some(TimeReport::Scalar(t)) => {
                row.eta1 = Some(t.eta1);
                row.eta2 = Some(t.eta2);
                row.eta3 = Some(t.eta3);
                row.eta4 = Some(t.eta4);
                row.eta_t = Some(t.total);
                row.eta_t_mod = Some(t.modified);
            }
            Some(TimeReport::Monodomain(t)) => {
                row.eta1 = Some(t.eta1_u);
                row.eta3 = Some(t.eta3_u);
                row.eta4 = Some(t.eta4_u);
                row.eta3_w = Some(t.eta3_w);
                row.eta4_w = Some(t.eta4_w);
                row.eta_t = Some(t.total_u);
                row.eta_t_mod = Some(t.modified_u);
                row.eta_t_w = Some(t.total_w);
                row.eta_t_w_mod = Some(t.modified_w);
            }
            None => {}
        }
        row
    }

    /// Whether two rows agree bit for bit in every estimated quantity.
    pub fn same_estimates(&self, o: &LogRow) -> bool {
        let bits = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
        self.step == o.step
            && self.t.to_bits() == o.t.to_bits()
            && self.tau.to_bits() == o.tau.to_bits()
            && self.elements == o.elements
            && self.eta_s.to_bits() == o.eta_s.to_bits()
            && self.norm_u.to_bits() == o.norm_u.to_bits()
            && [
                (self.omega_w, o.omega_w),
                (self.eta1, o.eta1),
                (self.eta2, o.eta2),
                (self.eta3, o.eta3),
                (self.eta4, o.eta4),
                (self.eta3_w, o.eta3_w),
                (self.eta4_w, o.eta4_w),
                (self.eta_t, o.eta_t),
                (self.eta_t_mod, o.eta_t_mod),
                (self.eta_t_w, o.eta_t_w),
                (self.eta_t_w_mod, o.eta_t_w_mod),
                (self.norm_w, o.norm_w),
            ]
            .iter()
            .all(|&(a, b)| bits(a, b))
    }

    pub fn to_csv(&self) -> String {
        let flags = if self.flags.is_empty() { "-".to_string() } else { self.flags.join("|") };
        [
            self.step.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.tau),
            self.elements.to_string(),
            self.vertices.to_string(),
            fmt_f64(self.eta_s),
            opt(self.omega_w),
            opt(self.eta1),
            opt(self.eta2),
            opt(self.eta3),
            opt(self.eta4),
            opt(self.eta3_w),
            opt(self.eta4_w),
            opt(self.eta_t),
            opt(self.eta_t_mod),
            opt(self.eta_t_w),
            opt(self.eta_t_w_mod),
            fmt_f64(self.norm_u),
            opt(self.norm_w),
            fmt_f64(self.u_min),
            fmt_f64(self.u_max),
            opt(self.w_min),
            opt(self.w_max),
            opt(self.gamma),
            self.remeshes.to_string(),
            self.shrinks.to_string(),
            self.newton.to_string(),
            self.action.name().to_string(),
            flags,
            opt(self.wall),
        ]
        .join(",")
    }

    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let c: Vec<&str> = line.trim().split(',').collect();
        if c.len() != 30 {
            return Err(format!("expected 30 columns, found {}", c.len()));
        }
        let f = |i: usize| c[i].parse::<f64>().map_err(|_| format!("column {} `{}` is not a number", i + 1, c[i]));
        let o = |i: usize| if c[i] == "-" { Ok(None) } else { f(i).map(Some) };
        let u = |i: usize| c[i].parse::<usize>().map_err(|_| format!("column {} `{}` is not an integer", i + 1, c[i]));
        Ok(Self {
            step: u(0)?,
            t: f(1)?,
            tau: f(2)?,
            elements: u(3)?,
            vertices: u(4)?,
            eta_s: f(5)?,
            omega_w: o(6)?,
            eta1: o(7)?,
            eta2: o(8)?,
            eta3: o(9)?,
            eta4: o(10)?,
            eta3_w: o(11)?,
            eta4_w: o(12)?,
            eta_t: o(13)?,
            eta_t_mod: o(14)?,
            eta_t_w: o(15)?,
            eta_t_w_mod: o(16)?,
            norm_u: f(17)?,
            norm_w: o(18)?,
            u_min: f(19)?,
            u_max: f(20)?,
            w_min: o(21)?,
            w_max: o(22)?,
            gamma: o(23)?,
            remeshes: u(24)?,
            shrinks: u(25)?,
            newton: u(26)?,
            action: Action::parse(c[27]).ok_or_else(|| format!("unknown action `{}`", c[27]))?,
            flags: if c[28] == "-" { Vec::new() } else { c[28].split('|').map(String::from).collect() },
            wall: o(29)?,
        })
    }
}

pub fn log_to_string(rows: &[LogRow]) -> String {
    let mut s = String::with_capacity(256 * (rows.len() + 1));
    s.push_str(LOG_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn parse_log(text: &str, path: &Path) -> Result<Vec<LogRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LOG_HEADER => {}
        _ => return Err(Error::Parse { path: path.to_path_buf(), line: 1, msg: "missing log header".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| LogRow::parse(l).map_err(|msg| Error::Parse { path: path.to_path_buf(), line: i + 1, msg }))
        .collect()
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    parse_log(&std::fs::read_to_string(path)?, path)
}

/// Legacy ASCII VTK unstructured grid with nodal scalars.
pub fn vtk_to_string(mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> String {
    let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
    let mut s = String::with_capacity(64 * (nv + nt));
    let _ = write!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {nv} double\n");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for (name, v) in fields {
            let _ = write!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default\n");
            for x in v.iter() {
                let _ = writeln!(s, "{}", fmt_f64(*x));
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    std::fs::write(path, vtk_to_string(mesh, title, fields))?;
    Ok(())
}

/// Levels stored with each artifact: enough for every estimator.
pub const ARTIFACT_LEVELS: usize = 4;

pub fn artifact_stem(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step:06}"))
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Stores the mesh and newest levels a step's estimators were computed from.
pub fn write_artifact(dir: &Path, mesh: &Mesh, history: &TimeHistory) -> Result<()> {
    let stem = artifact_stem(dir, history.n);
    let k = history.len().min(ARTIFACT_LEVELS);
    let has_w = history.level(0).w.is_some();
    write_mesh(mesh, &with_ext(&stem, ".mesh"))?;
    let mut cols: Vec<&[f64]> = (0..k).map(|j| &history.level(j).u[..]).collect();
    if has_w {
        cols.extend((0..k).map(|j| history.level(j).w.as_deref().expect("w on every level")));
    }
    write_fields(&cols, &with_ext(&stem, ".fields"))?;
    let mut s = format!("rdlevels 1\n{} {} {}\n", history.n, k, u8::from(has_w));
    for j in 0..k {
        let _ = writeln!(s, "{}", fmt_f64(history.t(j)));
    }
    std::fs::write(with_ext(&stem, ".levels"), s)?;
    Ok(())
}

/// Reloads an artifact as a mesh and a history on it.
pub fn read_artifact(dir: &Path, step: usize) -> Result<(Mesh, TimeHistory)> {
    let stem = artifact_stem(dir, step);
    let mesh = read_mesh(&with_ext(&stem, ".mesh"))?;
    let lpath = with_ext(&stem, ".levels");
    let text = std::fs::read_to_string(&lpath)?;
    let mut tk = Tokens::new(&text, &lpath);
    tk.expect_header("rdlevels")?;
    let n: usize = tk.next_parse()?;
    let k: usize = tk.next_parse()?;
    let has_w: u8 = tk.next_parse()?;
    let times = (0..k).map(|_| tk.next_parse::<f64>()).collect::<Result<Vec<_>>>()?;
    tk.expect_end()?;
    let mut cols = read_fields(&with_ext(&stem, ".fields"))?;
    let expect = if has_w == 1 { 2 * k } else { k };
    if cols.len() != expect || cols.iter().any(|c| c.len() != mesh.num_vertices()) {
        return Err(Error::Parse { path: lpath, line: 2, msg: format!("fields do not match {k} levels on {} vertices", mesh.num_vertices()) });
    }
    let ws: Vec<Option<Vec<f64>>> = if has_w == 1 { cols.split_off(k).into_iter().map(Some).collect() } else { vec![None; k] };
    let mut levels: Vec<Level> = cols.into_iter().zip(ws).zip(&times).map(|((u, w), &t)| Level { t, u, w }).collect();
    let oldest = levels.pop().ok_or_else(|| Error::History { needed: 1, available: 0 })?;
    let mut h = TimeHistory::new(oldest, mesh.generation(), ARTIFACT_LEVELS.max(6));
    while let Some(l) = levels.pop() {
        h.push(l);
    }
    h.n = n;
    Ok((mesh, h))
}

/// Run totals written next to the log.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunSummary {
    pub steps: usize,
    pub remeshings: usize,
    pub init_remeshings: usize,
    pub step_adapts: usize,
    pub restarts: usize,
    pub rejected_solves: usize,
    pub final_t: f64,
    pub final_elements: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub eta_s: f64,
    pub eta_t: f64,
    pub eta_t_modified: f64,
    pub omega_w: Option<f64>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "accepted steps      {}", self.steps);
        let _ = writeln!(s, "remeshings          {}", self.remeshings);
        let _ = writeln!(s, "init remeshings     {}", self.init_remeshings);
        let _ = writeln!(s, "step adapts         {}", self.step_adapts);
        let _ = writeln!(s, "restarts            {}", self.restarts);
        let _ = writeln!(s, "rejected solves     {}", self.rejected_solves);
        let _ = writeln!(s, "final time          {}", fmt_f64(self.final_t));
        let _ = writeln!(s, "final elements      {}", self.final_elements);
        let _ = writeln!(s, "tau min             {}", fmt_f64(self.tau_min));
        let _ = writeln!(s, "tau max             {}", fmt_f64(self.tau_max));
        let _ = writeln!(s, "eta_s               {}", fmt_f64(self.eta_s));
        let _ = writeln!(s, "eta_t               {}", fmt_f64(self.eta_t));
        let _ = writeln!(s, "eta_t modified      {}", fmt_f64(self.eta_t_modified));
        if let Some(w) = self.omega_w {
            let _ = writeln!(s, "omega_w             {}", fmt_f64(w));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_uniform_mesh, Rect};

    fn row() -> LogRow {
        LogRow {
            step: 7,
            t: 0.1 + 0.2,
            tau: 1.0 / 3.0,
            elements: 12,
            vertices: 10,
            eta_s: 1e-5,
            omega_w: None,
            eta1: Some(2.0),
            eta2: Some(0.1),
            eta3: None,
            eta4: Some(f64::MIN_POSITIVE),
            eta3_w: None,
            eta4_w: None,
            eta_t: None,
            eta_t_mod: Some(3.0),
            eta_t_w: None,
            eta_t_w_mod: None,
            norm_u: 0.7,
            norm_w: None,
            u_min: -0.0,
            u_max: 1.0,
            w_min: None,
            w_max: None,
            gamma: Some(1.5),
            remeshes: 1,
            shrinks: 2,
            newton: 3,
            action: Action::Grow,
            flags: vec![flag::CLIPPED.into(), flag::BAND_EXIT.into()],
            wall: None,
        }
    }

    #[test]
    fn rows_round_trip() {
        let r = row();
        let back = LogRow::parse(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert!(back.same_estimates(&r));
        let text = log_to_string(&[r.clone(), r]);
        assert_eq!(parse_log(&text, Path::new("x")).unwrap().len(), 2);
    }

    #[test]
    fn vtk_layout() {
        let m = generate_uniform_mesh(1, 1, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let s = vtk_to_string(&m, "t", &[("u", &[0.0, 1.0, 2.0, 3.0])]);
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(s.contains("POINT_DATA 4\nSCALARS u double 1"));
    }

    #[test]
    fn artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_uniform_mesh(2, 1, Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        let lv = |t: f64| Level { t, u: vec![t; 6], w: Some(vec![2.0 * t; 6]) };
        let mut h = TimeHistory::new(lv(0.0), m.generation(), 6);
        for t in [0.1, 0.25, 0.3, 0.45] {
            h.push(lv(t));
        }
        h.n = 4;
        write_artifact(dir.path(), &m, &h).unwrap();
        let (m2, h2) = read_artifact(dir.path(), 4).unwrap();
        assert_eq!(m2.vertices(), m.vertices());
        assert_eq!(h2.len(), 4);
        assert_eq!(h2.n, 4);
        for j in 0..4 {
            assert_eq!(h2.level(j), h.level(j));
        }
    }
}
