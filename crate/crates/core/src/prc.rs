//! Phase response curves.
//!
//! A curve `f` maps the receiver's phase to a phase shift; the simulator
//! applies `phi <- max(0, phi + f(phi))`. Curves here are pure and never
//! clamp. Every curve carries a [`PrcParams`] with the breakpoint `B` that
//! separates the inhibitory branch (`x < B`) from the excitatory branch
//! (`x >= B`); the phase `B` itself always belongs to the excitatory branch.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used by every classification comparison.
pub const CLASSIFY_TOL: f64 = 1e-12;

/// Default grid density for classification checks, in points per unit phase.
pub const DEFAULT_GRID: usize = 10_000;

#[derive(Debug, Error)]
pub enum PrcError {
    #[error("phase {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("invalid PRC parameters: {0}")]
    InvalidParams(String),
    #[error("PRC table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrcParams {
    /// Breakpoint phase in (0, 1).
    #[serde(rename = "B")]
    pub b: f64,
    /// Inhibition margin beyond the delay.
    pub kappa: f64,
    /// Excitation slack.
    pub eta: f64,
    /// Transmission delay in [0, 0.5).
    pub tau: f64,
}

impl Default for PrcParams {
    fn default() -> Self {
        PrcParams {
            b: 0.55,
            kappa: 0.05,
            eta: 0.0,
            tau: 0.05,
        }
    }
}

impl PrcParams {
    pub fn new(b: f64, kappa: f64, eta: f64, tau: f64) -> Result<Self, PrcError> {
        let p = PrcParams { b, kappa, eta, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PrcError> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(PrcError::InvalidParams(format!("B = {} not in (0, 1)", self.b)));
        }
        if !(self.kappa > 0.0) {
            return Err(PrcError::InvalidParams(format!("kappa = {} must be > 0", self.kappa)));
        }
        if !(self.eta >= 0.0) {
            return Err(PrcError::InvalidParams(format!("eta = {} must be >= 0", self.eta)));
        }
        if !(self.tau >= 0.0 && self.tau < 0.5) {
            return Err(PrcError::InvalidParams(format!("tau = {} not in [0, 0.5)", self.tau)));
        }
        Ok(())
    }
}

/// Mirollo–Strogatz style charging curve `V(x) = ln(1 + (e^b - 1) x) / b`.
/// A pulse raises the state by `epsilon`, so `f(x) = V^-1(min(1, V(x) + eps)) - x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingCurve {
    pub b: f64,
    pub epsilon: f64,
}

impl Default for ChargingCurve {
    fn default() -> Self {
        ChargingCurve {
            b: 3.0,
            epsilon: 0.01,
        }
    }
}

impl ChargingCurve {
    pub fn v(&self, x: f64) -> f64 {
        (1.0 + (self.b.exp() - 1.0) * x).ln() / self.b
    }

    pub fn v_inv(&self, y: f64) -> f64 {
        ((self.b * y).exp() - 1.0) / (self.b.exp() - 1.0)
    }

    fn response(&self, x: f64) -> f64 {
        let y = (self.v(x) + self.epsilon).min(1.0);
        if y >= 1.0 {
            1.0 - x
        } else {
            self.v_inv(y) - x
        }
    }
}

/// Piecewise-linear curve through `(x, f(x))` knots spanning `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl Table {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self, PrcError> {
        let bad = |msg: String| PrcError::Table { line: 0, msg };
        if xs.len() != fs.len() || xs.len() < 2 {
            return Err(bad("need at least two (x, f) rows".into()));
        }
        if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 {
            return Err(bad("table must start at x = 0 and end at x = 1".into()));
        }
        if let Some(i) = xs.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(PrcError::Table {
                line: i + 2,
                msg: "x values must be strictly increasing".into(),
            });
        }
        if fs.iter().any(|f| !f.is_finite()) {
            return Err(bad("non-finite response".into()));
        }
        Ok(Table { xs, fs })
    }

    /// Parses `x,f(x)` rows; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PrcError> {
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(PrcError::Table {
                    line: idx + 1,
                    msg: format!("expected x,f(x), got {line:?}"),
                });
            };
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| PrcError::Table {
                    line: idx + 1,
                    msg: format!("bad number {s:?}"),
                })
            };
            xs.push(num(a)?);
            fs.push(num(b)?);
            lines.push(idx + 1);
        }
        Table::new(xs, fs).map_err(|e| match e {
            PrcError::Table { line, msg } if line >= 2 => PrcError::Table {
                line: lines[line - 1],
                msg,
            },
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PrcError> {
        Table::parse(&std::fs::read_to_string(path)?)
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    fn response(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&k| k <= x);
        if i == 0 {
            return self.fs[0];
        }
        if i >= self.xs.len() {
            return *self.fs.last().unwrap();
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (f0, f1) = (self.fs[i - 1], self.fs[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }
}

/// Arbitrary user curve, mostly for experiments and tests.
#[derive(Clone)]
pub struct CustomCurve {
    pub name: String,
    pub func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCurve").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Curve {
    /// Reset to 0 below `B`, fire at or above `B`.
    StrongFiring,
    /// Below `B`: `-min(B/h, x) - margin`. At or above `B`: the equally
    /// spaced `m`-tooth sawtooth, so each pulse advances to the next tooth.
    SyntheticStii { h: u32, m: u32, margin: f64 },
    Charging(ChargingCurve),
    Tabulated(Table),
    /// Clipped to `[-w, .]` below `B` and `[., w]` at or above it.
    Weighted { inner: Box<Curve>, w: f64 },
    Custom(CustomCurve),
}

#[derive(Debug, Clone)]
pub struct Prc {
    pub curve: Curve,
    pub params: PrcParams,
}

/// Right edge of tooth `t` when `[b, 1]` is split into `m` equal teeth.
pub fn tooth_boundary(b: f64, m: u32, t: u32) -> f64 {
    if t >= m {
        1.0
    } else {
        b + (1.0 - b) * t as f64 / m as f64
    }
}

fn curve_response(curve: &Curve, b: f64, x: f64) -> f64 {
    match curve {
        Curve::StrongFiring => {
            if x < b {
                -x
            } else {
                1.0 - x
            }
        }
        Curve::SyntheticStii { h, m, margin } => {
            if x < b {
                -(b / *h as f64).min(x) - margin
            } else {
                let t = (0..*m)
                    .rev()
                    .find(|&t| tooth_boundary(b, *m, t) <= x + CLASSIFY_TOL)
                    .unwrap_or(0);
                tooth_boundary(b, *m, t + 1) - x
            }
        }
        Curve::Charging(c) => c.response(x),
        Curve::Tabulated(t) => t.response(x),
        Curve::Weighted { inner, w } => {
            let f = curve_response(inner, b, x);
            if x < b {
                f.max(-w)
            } else {
                f.min(*w)
            }
        }
        Curve::Custom(c) => (c.func)(x),
    }
}

impl Prc {
    pub fn new(curve: Curve, params: PrcParams) -> Self {
        Prc { curve, params }
    }

    pub fn strong_firing(params: PrcParams) -> Self {
        Prc::new(Curve::StrongFiring, params)
    }

    /// Sawtooth test curve classifying as `(h, m)`. It is an STII member only
    /// when `B/h + margin >= tau + kappa`; see [`is_stii`].
    pub fn synthetic_stii(h: u32, m: u32, margin: f64, params: PrcParams) -> Result<Self, PrcError> {
        if h == 0 || m == 0 {
            return Err(PrcError::InvalidParams("h and m must be at least 1".into()));
        }
        if !(margin >= 0.0) {
            return Err(PrcError::InvalidParams("margin must be >= 0".into()));
        }
        Ok(Prc::new(Curve::SyntheticStii { h, m, margin }, params))
    }

    pub fn charging(curve: ChargingCurve, params: PrcParams) -> Result<Self, PrcError> {
        if !(curve.b > 0.0) || !(curve.epsilon > 0.0) {
            return Err(PrcError::InvalidParams("charging curve needs b > 0 and epsilon > 0".into()));
        }
        Ok(Prc::new(Curve::Charging(curve), params))
    }

    pub fn tabulated(table: Table, params: PrcParams) -> Self {
        Prc::new(Curve::Tabulated(table), params)
    }

    pub fn custom(
        name: impl Into<String>,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        params: PrcParams,
    ) -> Self {
        Prc::new(
            Curve::Custom(CustomCurve {
                name: name.into(),
                func: Arc::new(func),
            }),
            params,
        )
    }

    /// Short label used in tables.
    pub fn name(&self) -> String {
        fn label(c: &Curve) -> String {
            match c {
                Curve::StrongFiring => "sf".into(),
                Curve::SyntheticStii { h, m, .. } => format!("stii_h{h}_m{m}"),
                Curve::Charging(_) => "charging".into(),
                Curve::Tabulated(_) => "table".into(),
                Curve::Weighted { inner, w } => format!("{}_w{w}", label(inner)),
                Curve::Custom(c) => c.name.clone(),
            }
        }
        label(&self.curve)
    }

    /// `f(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64, PrcError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(PrcError::OutOfDomain(x));
        }
        Ok(self.response(x))
    }

    /// Unchecked evaluation for callers that already keep `x` in `[0, 1]`.
    pub fn response(&self, x: f64) -> f64 {
        curve_response(&self.curve, self.params.b, x)
    }

    /// Knots that classification grids must contain exactly.
    fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        fn walk(c: &Curve, b: f64, out: &mut Vec<f64>) {
            match c {
                Curve::Tabulated(t) => out.extend_from_slice(t.knots()),
                Curve::SyntheticStii { h, m, .. } => {
                    out.push(b / *h as f64);
                    out.extend((0..=*m).map(|t| tooth_boundary(b, *m, t)));
                }
                Curve::Weighted { inner, .. } => walk(inner, b, out),
                _ => {}
            }
        }
        walk(&self.curve, self.params.b, &mut out);
        out
    }
}

/// Clips `prc` by an edge weight: `max(-w, f)` below `B`, `min(w, f)` at or
/// above `B`.
pub fn weighted_wrap(prc: &Prc, w: f64, params: PrcParams) -> Result<Prc, PrcError> {
    if !(w > 0.0) {
        return Err(PrcError::InvalidParams(format!("weight {w} must be > 0")));
    }
    Ok(Prc::new(
        Curve::Weighted {
            inner: Box::new(prc.curve.clone()),
            w,
        },
        params,
    ))
}

fn uniform_points(lo: f64, hi: f64, per_unit: usize, include_hi: bool) -> Vec<f64> {
    let count = (((hi - lo) * per_unit as f64).ceil() as usize).max(2);
    let last = if include_hi { count } else { count - 1 };
    (0..=last)
        .map(|i| if i == count { hi } else { lo + (hi - lo) * i as f64 / count as f64 })
        .collect()
}

/// Grid on `[0, B)`: uniform points, curve knots and the given extras.
fn lower_grid(prc: &Prc, b: f64, per_unit: usize, extra: &[f64]) -> Vec<f64> {
    let mut g = uniform_points(0.0, b, per_unit, false);
    g.extend(prc.breakpoints().into_iter().chain(extra.iter().copied()).filter(|&x| (0.0..b).contains(&x)));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Grid on `[B, hi]`.
fn upper_grid(prc: &Prc, b: f64, hi: f64, per_unit: usize, extra: &[f64]) -> Vec<f64> {
    let mut g = uniform_points(b, hi, per_unit, true);
    g.extend(
        prc.breakpoints()
            .into_iter()
            .chain(extra.iter().copied())
            .filter(|&x| x >= b && x <= hi),
    );
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// STII membership on a grid: `f(x) <= -min(x, tau + kappa)` below `B` and
/// `f(x) >= 0` at or above `B`.
pub fn is_stii(prc: &Prc, params: &PrcParams, grid: usize) -> bool {
    let b = params.b;
    let limit = params.tau + params.kappa;
    let lower_ok = lower_grid(prc, b, grid, &[limit])
        .into_iter()
        .all(|x| prc.response(x) <= -x.min(limit) + CLASSIFY_TOL);
    lower_ok
        && upper_grid(prc, b, 1.0, grid, &[])
            .into_iter()
            .all(|x| prc.response(x) >= -CLASSIFY_TOL)
}

/// Sufficient condition for `h`-inhibition: `f(x) <= -min(B/h, x)` on `[0, B)`.
pub fn check_h_inhibitory(prc: &Prc, params: &PrcParams, h: u32, grid: usize) -> bool {
    assert!(h >= 1, "h must be at least 1");
    let b = params.b;
    let cap = b / h as f64;
    lower_grid(prc, b, grid, &[cap])
        .into_iter()
        .all(|x| prc.response(x) <= -cap.min(x) + CLASSIFY_TOL)
}

/// Whether `f` lies on or above the `teeth`-tooth sawtooth over `[B, 1 - eta]`.
pub fn sawtooth_dominates(prc: &Prc, params: &PrcParams, teeth: u32, grid: usize) -> bool {
    let b = params.b;
    let hi = 1.0 - params.eta;
    if hi < b {
        return true;
    }
    let bounds: Vec<f64> = (0..=teeth).map(|t| tooth_boundary(b, teeth, t)).collect();
    upper_grid(prc, b, hi, grid, &bounds)
        .into_iter()
        .filter(|&x| x < 1.0)
        .all(|x| {
            let t = bounds.partition_point(|&edge| edge <= x).saturating_sub(1);
            prc.response(x) >= bounds[t + 1] - x - CLASSIFY_TOL
        })
}

/// Sufficient condition for `m`-excitation: some sawtooth with at most `m`
/// equal teeth lies under `f` on `[B, 1 - eta]`. Each pulse then advances the
/// phase past the next tooth edge, so that many pulses force a firing.
pub fn check_m_excitatory(prc: &Prc, params: &PrcParams, m: u32, grid: usize) -> bool {
    assert!(m >= 1, "m must be at least 1");
    (1..=m).any(|teeth| sawtooth_dominates(prc, params, teeth, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StiiClass {
    pub h: u32,
    pub m: u32,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    #[serde(flatten)]
    pub class: StiiClass,
    pub eta: f64,
}

/// Smallest `k = h + m - 1` with `h <= h_max`, `m <= m_max` passing both
/// checks. Both checks are monotone, so the minimal `h` and `m` are found
/// independently.
pub fn classify_stii(prc: &Prc, params: &PrcParams, h_max: u32, m_max: u32) -> Option<Classification> {
    classify_stii_with_grid(prc, params, h_max, m_max, DEFAULT_GRID)
}

pub fn classify_stii_with_grid(
    prc: &Prc,
    params: &PrcParams,
    h_max: u32,
    m_max: u32,
    grid: usize,
) -> Option<Classification> {
    let h = (1..=h_max).find(|&h| check_h_inhibitory(prc, params, h, grid))?;
    let m = (1..=m_max).find(|&m| sawtooth_dominates(prc, params, m, grid))?;
    Some(Classification {
        class: StiiClass { h, m, k: h + m - 1 },
        eta: params.eta,
    })
}

/// Serializable PRC description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrcConfig {
    pub family: String,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// Charging-curve shape.
    #[serde(rename = "b", default, skip_serializing_if = "Option::is_none")]
    pub charge_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Table file for `family = "table"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

pub const DEFAULT_SYNTHETIC_MARGIN: f64 = 0.01;

impl PrcConfig {
    pub fn family(name: &str) -> Self {
        PrcConfig {
            family: name.into(),
            b: None,
            kappa: None,
            eta: None,
            h: None,
            m: None,
            margin: None,
            charge_b: None,
            epsilon: None,
            path: None,
        }
    }

    /// Builds the curve; `base` fills parameters the config leaves unset.
    pub fn build(&self, base: PrcParams) -> Result<Prc, PrcError> {
        let params = PrcParams {
            b: self.b.unwrap_or(base.b),
            kappa: self.kappa.unwrap_or(base.kappa),
            eta: self.eta.unwrap_or(base.eta),
            tau: base.tau,
        };
        params.validate()?;
        match self.family.as_str() {
            "sf" => Ok(Prc::strong_firing(params)),
            "stii_synthetic" | "stii" => Prc::synthetic_stii(
                self.h.unwrap_or(1),
                self.m.unwrap_or(1),
                self.margin.unwrap_or(DEFAULT_SYNTHETIC_MARGIN),
                params,
            ),
            "charging" => {
                let d = ChargingCurve::default();
                Prc::charging(
                    ChargingCurve {
                        b: self.charge_b.unwrap_or(d.b),
                        epsilon: self.epsilon.unwrap_or(d.epsilon),
                    },
                    params,
                )
            }
            "table" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| PrcError::InvalidParams("table family needs a path".into()))?;
                Ok(Prc::tabulated(Table::load(path)?, params))
            }
            other => Err(PrcError::InvalidParams(format!("unknown PRC family {other:?}"))),
        }
    }
}
