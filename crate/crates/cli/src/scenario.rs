//! Scenario files: one JSON document per run.
//!
//! Parsing never stops at the first problem. Every violation found is
//! collected and reported together, and unknown keys are violations.

use std::fmt;
use std::path::{Path, PathBuf};

use mfpt_core::dist::{alpha_of_k, k_of_alpha};
use mfpt_core::env::{BoundaryRole, Domain, OrientationSign};
use mfpt_core::fd::SolveMethod;
use mfpt_core::Vec2;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ScenarioError {
    pub violations: Vec<String>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64, inner_role: BoundaryRole, outer_role: BoundaryRole },
    Rectangle { x_min: f64, x_max: f64, y_min: f64, y_max: f64, roles: [BoundaryRole; 4] },
}

impl DomainSpec {
    pub fn build(&self) -> mfpt_core::Result<Domain> {
        match *self {
            DomainSpec::Disk { radius } => Domain::disk(radius),
            DomainSpec::Annulus { inner, outer, inner_role, outer_role } => {
                Domain::annulus(inner, outer, inner_role, outer_role)
            }
            DomainSpec::Rectangle { x_min, x_max, y_min, y_max, roles } => {
                Domain::rectangle(x_min, x_max, y_min, y_max, roles)
            }
        }
    }

    /// `(x_min, x_max, y_min, y_max)` of the bounding box.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            DomainSpec::Disk { radius: r } | DomainSpec::Annulus { outer: r, .. } => (-r, r, -r, r),
            DomainSpec::Rectangle { x_min, x_max, y_min, y_max, .. } => (x_min, x_max, y_min, y_max),
        }
    }
}

/// Shape of a kernel aimed radially or circularly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrientedShape {
    VonMises { k: f64 },
    Bimodal { k: f64 },
    Strict { unidirectional: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Uniform,
    Oriented { shape: OrientedShape, sign: OrientationSign },
    Segments { path: PathBuf, k0: f64, d0: f64 },
    Raster { path: PathBuf, k0: f64, d0: f64, threshold: u8, window: f64 },
}

impl KernelSpec {
    /// Signed anisotropy `α` of a radially symmetric kernel, when it has a
    /// diffusive limit.
    pub fn radial_alpha(&self) -> Option<f64> {
        match *self {
            KernelSpec::Uniform => Some(0.0),
            KernelSpec::Oriented { shape: OrientedShape::Bimodal { k }, sign } => Some(sign.value() * alpha_of_k(k)),
            KernelSpec::Oriented { shape: OrientedShape::Strict { unidirectional: false }, sign } => Some(sign.value()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdSpec {
    pub n1: usize,
    pub n2: usize,
    pub tol: f64,
    pub radial_nodes: usize,
    pub method: SolveMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StartSpec {
    pub x: Vec2,
    pub direction: Option<Vec2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalSpec {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSpec {
    pub walkers: usize,
    pub moments: usize,
    pub seed: u64,
    pub event_cap: u64,
    pub starts: Vec<StartSpec>,
    pub trajectories: usize,
    pub survival: Option<SurvivalSpec>,
    pub allow_boundary_start: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub prefix: String,
    pub heatmap: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub domain: DomainSpec,
    pub kernel: KernelSpec,
    pub mu: f64,
    pub sigma: f64,
    pub fd: FdSpec,
    pub mc: McSpec,
    pub radii: Vec<f64>,
    pub outputs: OutputSpec,
    /// SHA-256 of the scenario file bytes, lowercase hex.
    pub sha256: String,
}

impl Scenario {
    pub fn diffusivity(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.mu)
    }

    pub fn load(path: &Path) -> anyhow::Result<Scenario> {
        let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("cannot read scenario {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Scenario::parse(&bytes, base)?)
    }

    /// Relative file references resolve against `base`.
    pub fn parse(bytes: &[u8], base: &Path) -> Result<Scenario, ScenarioError> {
        let sha256 = hex::encode(Sha256::digest(bytes));
        let value: Value = serde_json::from_slice(bytes)
            .map_err(|e| ScenarioError { violations: vec![format!("not valid JSON: {e}")] })?;
        let mut c = Checker::default();
        let top = c.object(&value, "", &["domain", "kernel", "physics", "fd", "mc", "analytic", "outputs"]);
        let empty = Value::Object(Map::new());
        let section = |name: &str| top.and_then(|m| m.get(name));

        let domain = match section("domain") {
            Some(v) => c.domain(v),
            None => c.fail("domain: required"),
        };
        let (mu, sigma) = match section("physics") {
            Some(v) => c.physics(v),
            None => (c.fail("physics: required"), None),
        };
        let kernel = match section("kernel") {
            Some(v) => c.kernel(v, base),
            None => c.fail("kernel: required"),
        };
        let fd = c.fd(section("fd").unwrap_or(&empty));
        let mc = c.mc(section("mc").unwrap_or(&empty));
        let radii = c.radii(section("analytic").unwrap_or(&empty));
        let outputs = c.outputs(section("outputs").unwrap_or(&empty));

        if let (Some(domain), Some(kernel)) = (&domain, &kernel) {
            c.cross_check(domain, kernel, mc.as_ref(), radii.as_deref());
        }
        match (domain, kernel, mu, sigma, fd, mc, radii, outputs) {
            (Some(domain), Some(kernel), Some(mu), Some(sigma), Some(fd), Some(mc), Some(radii), Some(outputs))
                if c.errors.is_empty() =>
            {
                Ok(Scenario { domain, kernel, mu, sigma, fd, mc, radii, outputs, sha256 })
            }
            _ => Err(ScenarioError { violations: c.errors }),
        }
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Checker {
    fn fail<T>(&mut self, msg: impl Into<String>) -> Option<T> {
        self.errors.push(msg.into());
        None
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(m) = v.as_object() else {
            let name = if path.is_empty() { "scenario" } else { path };
            return self.fail(format!("{name}: expected an object"));
        };
        for key in m.keys() {
            if !allowed.contains(&key.as_str()) {
                self.errors.push(format!("{}: unknown key", join(path, key)));
            }
        }
        Some(m)
    }

    fn number(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<Option<f64>> {
        match m.get(key) {
            None => Some(None),
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(Some(x)),
                _ => self.fail(format!("{}: expected a number", join(path, key))),
            },
        }
    }

    fn positive(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let x = match self.number(m, path, key)? {
            Some(x) => x,
            None => return default.or_else(|| self.fail(format!("{}: required", join(path, key)))),
        };
        if x > 0.0 {
            Some(x)
        } else {
            self.fail(format!("{}: must be positive, got {x}", join(path, key)))
        }
    }

    fn integer(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: u64, min: u64) -> Option<u64> {
        let x = match m.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) => x,
                None => return self.fail(format!("{}: expected a non-negative integer", join(path, key))),
            },
        };
        if x < min {
            return self.fail(format!("{}: must be at least {min}, got {x}", join(path, key)));
        }
        Some(x)
    }

    fn string<'a>(&mut self, m: &'a Map<String, Value>, path: &str, key: &str) -> Option<Option<&'a str>> {
        match m.get(key) {
            None => Some(None),
            Some(Value::String(s)) => Some(Some(s)),
            Some(_) => self.fail(format!("{}: expected a string", join(path, key))),
        }
    }

    fn boolean(&mut self, m: &Map<String, Value>, path: &str, key: &str, default: bool) -> Option<bool> {
        match m.get(key) {
            None => Some(default),
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => self.fail(format!("{}: expected true or false", join(path, key))),
        }
    }

    fn point(&mut self, v: &Value, path: &str) -> Option<Vec2> {
        match v.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>()) {
            Some(Some(xs)) if xs.len() == 2 && xs.iter().all(|x| x.is_finite()) => Some(Vec2::new(xs[0], xs[1])),
            _ => self.fail(format!("{path}: expected [x1, x2]")),
        }
    }

    fn role(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<BoundaryRole> {
        match self.string(m, path, key)? {
            None | Some("absorbing") => Some(BoundaryRole::Absorbing),
            Some("reflecting") => Some(BoundaryRole::Reflecting),
            Some(other) => {
                self.fail(format!("{}: expected \"absorbing\" or \"reflecting\", got {other:?}", join(path, key)))
            }
        }
    }

    fn domain(&mut self, v: &Value) -> Option<DomainSpec> {
        let m = v.as_object().or_else(|| self.fail("domain: expected an object"))?;
        let shape = self.string(m, "domain", "shape")?;
        match shape {
            Some("disk") => {
                self.object(v, "domain", &["shape", "radius"]);
                let radius = self.positive(m, "domain", "radius", None)?;
                Some(DomainSpec::Disk { radius })
            }
            Some("annulus") => {
                self.object(v, "domain", &["shape", "inner", "outer", "inner_boundary", "outer_boundary"]);
                let inner = self.positive(m, "domain", "inner", None);
                let outer = self.positive(m, "domain", "outer", None);
                let inner_role = self.role(m, "domain", "inner_boundary");
                let outer_role = self.role(m, "domain", "outer_boundary");
                let (inner, outer) = (inner?, outer?);
                if inner >= outer {
                    return self.fail(format!("domain: inner radius {inner} must be below outer radius {outer}"));
                }
                let (inner_role, outer_role) = (inner_role?, outer_role?);
                if inner_role == BoundaryRole::Reflecting && outer_role == BoundaryRole::Reflecting {
                    return self.fail("domain: at least one annulus boundary must be absorbing");
                }
                Some(DomainSpec::Annulus { inner, outer, inner_role, outer_role })
            }
            Some("rectangle") => {
                self.object(v, "domain", &["shape", "x_min", "x_max", "y_min", "y_max", "boundaries"]);
                let mut b = [0.0; 4];
                let mut ok = true;
                for (slot, key) in b.iter_mut().zip(["x_min", "x_max", "y_min", "y_max"]) {
                    match self.number(m, "domain", key) {
                        Some(Some(x)) => *slot = x,
                        Some(None) => ok = self.fail::<()>(format!("domain.{key}: required")).is_some(),
                        None => ok = false,
                    }
                }
                let mut roles = [BoundaryRole::Absorbing; 4];
                if let Some(bv) = m.get("boundaries") {
                    let bm = self.object(bv, "domain.boundaries", &["left", "right", "bottom", "top"]);
                    if let Some(bm) = bm {
                        for (slot, key) in roles.iter_mut().zip(["left", "right", "bottom", "top"]) {
                            match self.role(bm, "domain.boundaries", key) {
                                Some(r) => *slot = r,
                                None => ok = false,
                            }
                        }
                    }
                }
                if !ok {
                    return None;
                }
                if !(b[0] < b[1] && b[2] < b[3]) {
                    return self.fail("domain: rectangle needs x_min < x_max and y_min < y_max");
                }
                if roles.iter().all(|r| *r == BoundaryRole::Reflecting) {
                    return self.fail("domain: at least one rectangle edge must be absorbing");
                }
                Some(DomainSpec::Rectangle { x_min: b[0], x_max: b[1], y_min: b[2], y_max: b[3], roles })
            }
            Some(other) => self.fail(format!("domain.shape: expected disk, annulus or rectangle, got {other:?}")),
            None => self.fail("domain.shape: required"),
        }
    }

    fn physics(&mut self, v: &Value) -> (Option<f64>, Option<f64>) {
        let Some(m) = self.object(v, "physics", &["mu", "sigma"]) else {
            return (None, None);
        };
        (self.positive(m, "physics", "mu", None), self.positive(m, "physics", "sigma", None))
    }

    fn kernel(&mut self, v: &Value, base: &Path) -> Option<KernelSpec> {
        let m = self.object(
            v,
            "kernel",
            &["type", "k", "alpha", "k0", "d0", "orientation", "polarity", "threshold", "window"],
        )?;
        let kind = self.string(m, "kernel", "type")?;
        let orientation = self.string(m, "kernel", "orientation")?;
        let unused = |c: &mut Checker, keys: &[&str], why: &str| {
            for key in keys {
                if m.contains_key(*key) {
                    c.errors.push(format!("kernel.{key}: not used by {why}"));
                }
            }
        };
        match kind {
            Some("uniform") => {
                unused(self, &["k", "alpha", "k0", "d0", "orientation", "polarity", "threshold", "window"], "a uniform kernel");
                Some(KernelSpec::Uniform)
            }
            Some(kind @ ("von_mises" | "bimodal_von_mises" | "strict_alignment")) => {
                if let Some(path) = orientation.and_then(|o| o.strip_prefix("segments:")) {
                    return self.feature_kernel(m, kind, base, path, false);
                }
                if let Some(path) = orientation.and_then(|o| o.strip_prefix("raster:")) {
                    return self.feature_kernel(m, kind, base, path, true);
                }
                unused(self, &["k0", "d0", "threshold", "window"], "a radial or circular kernel");
                let mut sign = match orientation {
                    Some("radial") => Some(OrientationSign::Radial),
                    Some("circular") => Some(OrientationSign::Circular),
                    None => None,
                    Some(other) => {
                        return self.fail(format!(
                            "kernel.orientation: expected radial, circular, segments:<path> or raster:<path>, got {other:?}"
                        ))
                    }
                };
                let shape = match kind {
                    "strict_alignment" => {
                        unused(self, &["k", "alpha"], "strict alignment");
                        let unidirectional = match self.string(m, "kernel", "polarity")? {
                            None | Some("bidirectional") => false,
                            Some("unidirectional") => true,
                            Some(other) => {
                                return self.fail(format!(
                                    "kernel.polarity: expected bidirectional or unidirectional, got {other:?}"
                                ))
                            }
                        };
                        OrientedShape::Strict { unidirectional }
                    }
                    _ => {
                        unused(self, &["polarity"], "a von Mises kernel");
                        let k = match (self.number(m, "kernel", "k")?, self.number(m, "kernel", "alpha")?) {
                            (Some(_), Some(_)) => return self.fail("kernel: give either k or alpha, not both"),
                            (None, None) => return self.fail("kernel: k or alpha required"),
                            (Some(k), None) if k >= 0.0 => k,
                            (Some(k), None) => return self.fail(format!("kernel.k: must be non-negative, got {k}")),
                            (None, Some(_)) if kind == "von_mises" => {
                                return self.fail("kernel.alpha: only defined for bimodal_von_mises")
                            }
                            (None, Some(a)) => {
                                let implied = if a < 0.0 { OrientationSign::Circular } else { OrientationSign::Radial };
                                if a != 0.0 && sign.is_some_and(|s| s != implied) {
                                    return self.fail(format!(
                                        "kernel.alpha: sign of {a} contradicts orientation {:?}",
                                        orientation.unwrap_or_default()
                                    ));
                                }
                                sign = sign.or(Some(implied));
                                match k_of_alpha(a.abs()) {
                                    Ok(k) => k,
                                    Err(_) => return self.fail(format!("kernel.alpha: must lie in (-1, 1), got {a}")),
                                }
                            }
                        };
                        if kind == "von_mises" {
                            OrientedShape::VonMises { k }
                        } else {
                            OrientedShape::Bimodal { k }
                        }
                    }
                };
                let Some(sign) = sign else {
                    return self.fail("kernel.orientation: required");
                };
                Some(KernelSpec::Oriented { shape, sign })
            }
            Some(other) => self.fail(format!(
                "kernel.type: expected uniform, von_mises, bimodal_von_mises or strict_alignment, got {other:?}"
            )),
            None => self.fail("kernel.type: required"),
        }
    }

    fn feature_kernel(
        &mut self,
        m: &Map<String, Value>,
        kind: &str,
        base: &Path,
        path: &str,
        raster: bool,
    ) -> Option<KernelSpec> {
        if kind != "bimodal_von_mises" {
            return self.fail("kernel.type: feature orientations need bimodal_von_mises");
        }
        for key in ["k", "alpha", "polarity"] {
            if m.contains_key(key) {
                self.errors.push(format!("kernel.{key}: not used with feature orientations (use k0 and d0)"));
            }
        }
        let file = base.join(path);
        if !file.is_file() {
            self.errors.push(format!("kernel.orientation: file {} not found", file.display()));
        }
        let k0 = self.number(m, "kernel", "k0").and_then(|k| match k {
            Some(k) if k >= 0.0 => Some(k),
            Some(k) => self.fail(format!("kernel.k0: must be non-negative, got {k}")),
            None => self.fail("kernel.k0: required"),
        });
        let d0 = self.positive(m, "kernel", "d0", None);
        if !raster {
            for key in ["threshold", "window"] {
                if m.contains_key(key) {
                    self.errors.push(format!("kernel.{key}: only used with raster orientations"));
                }
            }
            return Some(KernelSpec::Segments { path: file, k0: k0?, d0: d0? });
        }
        let threshold = self.integer(m, "kernel", "threshold", 128, 1);
        let threshold = match threshold {
            Some(t) if t <= 255 => Some(t as u8),
            Some(t) => self.fail(format!("kernel.threshold: must be at most 255, got {t}")),
            None => None,
        };
        let window = self.positive(m, "kernel", "window", Some(mfpt_core::env::DEFAULT_WINDOW));
        Some(KernelSpec::Raster { path: file, k0: k0?, d0: d0?, threshold: threshold?, window: window? })
    }

    fn fd(&mut self, v: &Value) -> Option<FdSpec> {
        let m = self.object(v, "fd", &["n1", "n2", "tol", "radial_nodes", "method"])?;
        let n1 = self.integer(m, "fd", "n1", 129, 3);
        let n2 = self.integer(m, "fd", "n2", n1.unwrap_or(129), 3);
        let tol = self.positive(m, "fd", "tol", Some(1e-10));
        let radial_nodes = self.integer(m, "fd", "radial_nodes", 4097, 16);
        let method = match self.string(m, "fd", "method")? {
            None | Some("auto") => Some(SolveMethod::Auto),
            Some("direct") => Some(SolveMethod::Direct),
            Some("iterative") => Some(SolveMethod::Iterative),
            Some(other) => self.fail(format!("fd.method: expected auto, direct or iterative, got {other:?}")),
        };
        Some(FdSpec {
            n1: n1? as usize,
            n2: n2? as usize,
            tol: tol?,
            radial_nodes: radial_nodes? as usize,
            method: method?,
        })
    }

    fn mc(&mut self, v: &Value) -> Option<McSpec> {
        let m = self.object(
            v,
            "mc",
            &["walkers", "moments", "seed", "event_cap", "starts", "trajectories", "survival", "allow_boundary_start"],
        )?;
        let walkers = self.integer(m, "mc", "walkers", 1000, 2);
        let moments = self.integer(m, "mc", "moments", 2, 1);
        let seed = self.integer(m, "mc", "seed", 0, 0);
        let event_cap = self.integer(m, "mc", "event_cap", mfpt_core::mc::DEFAULT_EVENT_CAP, 1);
        let trajectories = self.integer(m, "mc", "trajectories", 0, 0);
        let allow_boundary_start = self.boolean(m, "mc", "allow_boundary_start", false);
        let mut starts = Some(Vec::new());
        match m.get("starts") {
            None => {}
            Some(Value::Array(list)) => {
                for (i, s) in list.iter().enumerate() {
                    let path = format!("mc.starts[{i}]");
                    let parsed = self.object(s, &path, &["x", "direction"]).and_then(|sm| {
                        let x = match sm.get("x") {
                            Some(p) => self.point(p, &format!("{path}.x")),
                            None => self.fail(format!("{path}.x: required")),
                        };
                        let direction = match sm.get("direction") {
                            None | Some(Value::Null) => Some(None),
                            Some(d) => match self.point(d, &format!("{path}.direction")) {
                                Some(u) if u.norm() > 0.0 => Some(Some(u)),
                                Some(_) => self.fail(format!("{path}.direction: must be non-zero")),
                                None => None,
                            },
                        };
                        Some(StartSpec { x: x?, direction: direction? })
                    });
                    // failures are already recorded; valid starts still get cross-checked
                    if let (Some(p), Some(v)) = (parsed, starts.as_mut()) {
                        v.push(p);
                    }
                }
            }
            Some(_) => starts = self.fail("mc.starts: expected a list"),
        }
        let survival = match m.get("survival") {
            None => Some(None),
            Some(sv) => self.object(sv, "mc.survival", &["t_max", "points"]).and_then(|sm| {
                let t_max = self.positive(sm, "mc.survival", "t_max", None);
                let points = self.integer(sm, "mc.survival", "points", 201, 2);
                Some(Some(SurvivalSpec { t_max: t_max?, points: points? as usize }))
            }),
        };
        Some(McSpec {
            walkers: walkers? as usize,
            moments: moments? as usize,
            seed: seed?,
            event_cap: event_cap?,
            starts: starts?,
            trajectories: trajectories? as usize,
            survival: survival?,
            allow_boundary_start: allow_boundary_start?,
        })
    }

    fn radii(&mut self, v: &Value) -> Option<Vec<f64>> {
        let m = self.object(v, "analytic", &["radii", "r_min", "r_max", "points"])?;
        if let Some(list) = m.get("radii") {
            for key in ["r_min", "r_max", "points"] {
                if m.contains_key(key) {
                    self.errors.push(format!("analytic.{key}: conflicts with analytic.radii"));
                }
            }
            return match list.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>()) {
                Some(Some(r)) => Some(r),
                _ => self.fail("analytic.radii: expected a list of numbers"),
            };
        }
        let lo = self.number(m, "analytic", "r_min");
        let hi = self.number(m, "analytic", "r_max");
        let points = self.integer(m, "analytic", "points", 101, 1);
        match (lo?, hi?, points?) {
            (None, None, _) => Some(Vec::new()),
            (Some(lo), Some(hi), 1) if lo == hi => Some(vec![lo]),
            (Some(lo), Some(hi), n) if lo < hi && n >= 2 => {
                Some((0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
            }
            _ => self.fail("analytic: need r_min < r_max with at least 2 points, or r_min = r_max with 1 point"),
        }
    }

    fn outputs(&mut self, v: &Value) -> Option<OutputSpec> {
        let m = self.object(v, "outputs", &["prefix", "heatmap"])?;
        let prefix = self.string(m, "outputs", "prefix")?.unwrap_or("").to_string();
        if prefix.contains(['/', '\\']) {
            return self.fail("outputs.prefix: must not contain path separators");
        }
        let heatmap = self.boolean(m, "outputs", "heatmap", true)?;
        Some(OutputSpec { prefix, heatmap })
    }

    fn cross_check(&mut self, domain: &DomainSpec, kernel: &KernelSpec, mc: Option<&McSpec>, radii: Option<&[f64]>) {
        let Ok(built) = domain.build() else {
            self.errors.push("domain: rejected by the geometry engine".into());
            return;
        };
        if let Some(mc) = mc {
            for (i, s) in mc.starts.iter().enumerate() {
                let on_boundary = built.boundary_piece_at(s.x, 1e-12).is_some();
                if !built.contains(s.x) && !(mc.allow_boundary_start && on_boundary) {
                    self.errors.push(format!("mc.starts[{i}].x: ({}, {}) is outside the domain", s.x.x, s.x.y));
                }
            }
        }
        if let Some(radii) = radii {
            let (lo, hi) = match *domain {
                DomainSpec::Disk { radius } => (0.0, radius),
                DomainSpec::Annulus { inner, outer, .. } => (inner, outer),
                DomainSpec::Rectangle { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            };
            for (i, &r) in radii.iter().enumerate() {
                if !(lo..=hi).contains(&r) {
                    self.errors.push(format!("analytic.radii[{i}]: {r} lies outside [{lo}, {hi}]"));
                }
            }
            if !radii.is_empty() && matches!(domain, DomainSpec::Rectangle { .. }) {
                self.errors.push("analytic: radius grids need a disk or annulus domain".into());
            }
        }
        if matches!(kernel, KernelSpec::Raster { .. }) && !matches!(domain, DomainSpec::Rectangle { .. }) {
            self.errors.push("kernel.orientation: raster landscapes need a rectangle domain".into());
        }
    }
}
