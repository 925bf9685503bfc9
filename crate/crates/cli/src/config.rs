//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected. The
//! manifest written next to every output is the same format, with every key
//! present, so it parses back to the configuration that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mimfd::fem::Rect;
use mimfd::inversion::{Armijo, ControlSpace, DirectionMode, GradientMode, InverseConfig, StepStart};

use crate::presets::{CoefficientPreset, FieldPreset, RhoPreset};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub q: f64,
    pub t_final: f64,
    pub steps: usize,
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub coefficients: CoefficientPreset,
    pub rho: RhoPreset,
    pub g_true: FieldPreset,
    pub initial: FieldPreset,
    /// Inner square `[a, b]²`; ω is its complement.
    pub frame: (f64, f64),
    pub noise: f64,
    pub seed: u64,
    pub refine: usize,
    /// Directory of `frame_NNNN.csv` files to invert instead of synthetic data.
    pub data: Option<PathBuf>,
    pub beta: f64,
    pub g_max: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: Armijo,
    pub step_start: StepStart,
    pub direction: DirectionMode,
    pub gradient: GradientMode,
    pub control: ControlSpace,
    pub initial_guess: FieldPreset,
    pub out: Option<PathBuf>,
}

const REQUIRED: [&str; 6] = ["alpha", "q", "t_final", "steps", "nx", "ny"];

const OPTIONAL: [&str; 24] = [
    "domain",
    "coefficients",
    "rho",
    "g_true",
    "initial",
    "frame",
    "noise",
    "seed",
    "refine",
    "data",
    "beta",
    "g_max",
    "max_iters",
    "grad_tol",
    "armijo_c1",
    "armijo_ratio",
    "armijo_step",
    "armijo_max_backtracks",
    "step_start",
    "direction",
    "gradient",
    "control",
    "initial_guess",
    "out",
];

impl RunConfig {
    /// Example 1 on the 20² × 20 grid with ω = Ω \ [0.1, 0.9]², noise free.
    pub fn example1() -> Self {
        let inv = InverseConfig::default();
        Self {
            alpha: 0.5,
            q: 1.0,
            t_final: 1.5,
            steps: 20,
            nx: 20,
            ny: 20,
            domain: Rect::UNIT,
            coefficients: CoefficientPreset::Laplacian,
            rho: RhoPreset::Example1,
            g_true: FieldPreset::Example1,
            initial: FieldPreset::Zero,
            frame: (0.1, 0.9),
            noise: 0.0,
            seed: 0,
            refine: 1,
            data: None,
            beta: inv.beta,
            g_max: inv.g_max,
            max_iters: inv.max_iters,
            grad_tol: inv.grad_tol,
            armijo: inv.armijo,
            step_start: inv.step_start,
            direction: inv.direction,
            gradient: inv.gradient,
            control: inv.control,
            initial_guess: FieldPreset::Zero,
            out: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        text.parse()
    }

    pub fn inverse_config(&self) -> InverseConfig {
        InverseConfig {
            beta: self.beta,
            g_max: self.g_max,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            armijo: self.armijo,
            step_start: self.step_start,
            direction: self.direction,
            gradient: self.gradient,
            control: self.control,
            initial_guess: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: String| Err(CliError::Config(format!("{key}: {why}")));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return bad("q", format!("must be nonnegative, got {}", self.q));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("t_final", format!("must be positive, got {}", self.t_final));
        }
        if self.steps == 0 {
            return bad("steps", "must be at least 1".into());
        }
        if self.nx < 2 || self.ny < 2 {
            return bad("nx/ny", "need at least 2 cells per axis".into());
        }
        let d = self.domain;
        if !(d.x1 > d.x0 && d.y1 > d.y0) {
            return bad("domain", "rectangle is degenerate".into());
        }
        let (a, b) = self.frame;
        if !(a <= b && a > d.x0.max(d.y0) && b < d.x1.min(d.y1)) {
            return bad("frame", format!("[{a}, {b}]² must lie strictly inside the domain"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise", format!("must be nonnegative, got {}", self.noise));
        }
        if self.refine == 0 {
            return bad("refine", "must be at least 1".into());
        }
        self.inverse_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("alpha", fmt(self.alpha));
        put("q", fmt(self.q));
        put("t_final", fmt(self.t_final));
        put("steps", self.steps.to_string());
        put("nx", self.nx.to_string());
        put("ny", self.ny.to_string());
        let d = self.domain;
        put("domain", format!("{},{},{},{}", fmt(d.x0), fmt(d.x1), fmt(d.y0), fmt(d.y1)));
        put("coefficients", self.coefficients.name().into());
        put("rho", self.rho.name().into());
        put("g_true", self.g_true.name().into());
        put("initial", self.initial.name().into());
        put("frame", format!("{},{}", fmt(self.frame.0), fmt(self.frame.1)));
        put("noise", fmt(self.noise));
        put("seed", self.seed.to_string());
        put("refine", self.refine.to_string());
        put(
            "data",
            self.data.as_ref().map_or("none".into(), |p| p.display().to_string()),
        );
        put("beta", fmt(self.beta));
        put("g_max", self.g_max.map_or("none".into(), fmt));
        put("max_iters", self.max_iters.to_string());
        put("grad_tol", fmt(self.grad_tol));
        put("armijo_c1", fmt(self.armijo.c1));
        put("armijo_ratio", fmt(self.armijo.ratio));
        put("armijo_step", fmt(self.armijo.initial_step));
        put("armijo_max_backtracks", self.armijo.max_backtracks.to_string());
        put("step_start", step_start_name(self.step_start).into());
        put("direction", direction_name(self.direction).into());
        put("gradient", gradient_name(self.gradient).into());
        put("control", control_name(self.control).into());
        put("initial_guess", self.initial_guess.name().into());
        put(
            "out",
            self.out.as_ref().map_or("none".into(), |p| p.display().to_string()),
        );
        s
    }
}

/// Shortest representation that parses back to the same f64.
pub fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn step_start_name(s: StepStart) -> &'static str {
    match s {
        StepStart::Fixed => "fixed",
        StepStart::Quadratic => "quadratic",
    }
}

fn direction_name(d: DirectionMode) -> &'static str {
    match d {
        DirectionMode::SteepestDescent => "steepest-descent",
        DirectionMode::FletcherReeves => "fletcher-reeves",
    }
}

fn gradient_name(g: GradientMode) -> &'static str {
    match g {
        GradientMode::Discrete => "discrete",
        GradientMode::Continuous => "continuous",
    }
}

fn control_name(c: ControlSpace) -> &'static str {
    match c {
        ControlSpace::Nodal => "nodal",
        ControlSpace::Constant => "constant",
        ControlSpace::Extrapolated => "extrapolated",
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list(key: &str, v: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| parse_num(key, p.trim()))
        .collect::<Result<_, _>>()?;
    if parts.len() != n {
        return Err(CliError::Config(format!("{key}: expected {n} comma-separated numbers")));
    }
    Ok(parts)
}

fn parse_choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("{key}: unknown value {v:?}, expected one of {}", names.join(", ")))
        })
}

fn optional_path(v: &str) -> Option<PathBuf> {
    (v != "none").then(|| PathBuf::from(v))
}

/// Splits the text into key/value pairs, rejecting duplicates and unknown keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !REQUIRED.contains(&k) && !OPTIONAL.contains(&k) {
            return Err(CliError::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
        }
    }
    Ok(map)
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let map = parse_pairs(text)?;
        for key in REQUIRED {
            if !map.contains_key(key) {
                return Err(CliError::Config(format!("missing required key {key:?}")));
            }
        }
        let mut c = RunConfig::example1();
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "alpha" => c.alpha = parse_num(k, v)?,
                "q" => c.q = parse_num(k, v)?,
                "t_final" => c.t_final = parse_num(k, v)?,
                "steps" => c.steps = parse_num(k, v)?,
                "nx" => c.nx = parse_num(k, v)?,
                "ny" => c.ny = parse_num(k, v)?,
                "domain" => {
                    let p = parse_list(k, v, 4)?;
                    c.domain = Rect {
                        x0: p[0],
                        x1: p[1],
                        y0: p[2],
                        y1: p[3],
                    };
                }
                "coefficients" => c.coefficients = CoefficientPreset::parse(v)?,
                "rho" => c.rho = RhoPreset::parse(v)?,
                "g_true" => c.g_true = FieldPreset::parse(k, v)?,
                "initial" => c.initial = FieldPreset::parse(k, v)?,
                "frame" => {
                    let p = parse_list(k, v, 2)?;
                    c.frame = (p[0], p[1]);
                }
                "noise" => c.noise = parse_num(k, v)?,
                "seed" => c.seed = parse_num(k, v)?,
                "refine" => c.refine = parse_num(k, v)?,
                "data" => c.data = optional_path(v),
                "beta" => c.beta = parse_num(k, v)?,
                "g_max" => c.g_max = if v == "none" { None } else { Some(parse_num(k, v)?) },
                "max_iters" => c.max_iters = parse_num(k, v)?,
                "grad_tol" => c.grad_tol = parse_num(k, v)?,
                "armijo_c1" => c.armijo.c1 = parse_num(k, v)?,
                "armijo_ratio" => c.armijo.ratio = parse_num(k, v)?,
                "armijo_step" => c.armijo.initial_step = parse_num(k, v)?,
                "armijo_max_backtracks" => c.armijo.max_backtracks = parse_num(k, v)?,
                "step_start" => {
                    c.step_start = parse_choice(
                        k,
                        v,
                        &[("fixed", StepStart::Fixed), ("quadratic", StepStart::Quadratic)],
                    )?
                }
                "direction" => {
                    c.direction = parse_choice(
                        k,
                        v,
                        &[
                            ("steepest-descent", DirectionMode::SteepestDescent),
                            ("fletcher-reeves", DirectionMode::FletcherReeves),
                        ],
                    )?
                }
                "gradient" => {
                    c.gradient = parse_choice(
                        k,
                        v,
                        &[
                            ("discrete", GradientMode::Discrete),
                            ("continuous", GradientMode::Continuous),
                        ],
                    )?
                }
                "control" => {
                    c.control = parse_choice(
                        k,
                        v,
                        &[
                            ("nodal", ControlSpace::Nodal),
                            ("constant", ControlSpace::Constant),
                            ("extrapolated", ControlSpace::Extrapolated),
                        ],
                    )?
                }
                "initial_guess" => c.initial_guess = FieldPreset::parse(k, v)?,
                "out" => c.out = optional_path(v),
                _ => unreachable!("key list and match arms disagree on {k}"),
            }
        }
        c.validate()?;
        Ok(c)
    }
}
