use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use mfpt_core::analytic::{annulus_limit, annulus_mfpt_ln, Alpha, Exit, Geometry, LimitMode, RadialProblem};
use mfpt_core::dist::DirectionalKernel;
use mfpt_core::env::{
    anisotropy_from_distance, distance_direction_from_segments, fields_from_raster, rasterize_segments, tensor_field,
    AnisotropyField, BoundaryRole, Domain, GrayImage, OrientationSign,
};
use mfpt_core::fd::{assemble_2d, difference_map, radial_solve, solve_system, SolveOptions};
use mfpt_core::io::{encode_heatmap, encode_pgm, read_pgm, read_segments, write_scalar_csv};
use mfpt_core::mc::{
    estimate_survival, estimate_theta, export_trajectories, record_trajectories, FeatureKernel, FptEstimate,
    GriddedKernel, KernelField, OrientedKernel, Physics, SimOptions, Start,
};
use mfpt_core::{GridSpec, ScalarField, Vec2};

use crate::scenario::{DomainSpec, KernelSpec, OrientedShape, Scenario};

/// Flags shared by every subcommand, already merged with the scenario.
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub seed: Option<u64>,
    pub baseline_isotropic: bool,
    pub raise_event_cap: Option<u64>,
}

/// A run refused before any walker was launched.
#[derive(Debug)]
pub struct GuardTripped(pub String);

impl std::fmt::Display for GuardTripped {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GuardTripped {}

/// Output directory plus the metadata line stamped on every artifact.
pub struct Sink {
    dir: PathBuf,
    prefix: String,
    header: String,
}

impl Sink {
    pub fn new(dir: &Path, scenario: &Scenario, seed: Option<u64>) -> anyhow::Result<Sink> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut header = format!(
            "mfpt {} scenario_sha256={} D={}",
            env!("CARGO_PKG_VERSION"),
            scenario.sha256,
            scenario.diffusivity()
        );
        if let Some(seed) = seed {
            header.push_str(&format!(" seed={seed}"));
        }
        Ok(Sink { dir: dir.to_path_buf(), prefix: scenario.outputs.prefix.clone(), header })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }

    fn bytes(&self, name: &str, data: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write, &str) -> anyhow::Result<()>) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w, &self.header)?;
        w.flush()?;
        Ok(path)
    }

    fn scalar(&self, name: &str, field: &ScalarField, column: &str, heatmap: bool) -> anyhow::Result<Vec<PathBuf>> {
        let mut out = vec![self.csv(&format!("{name}.csv"), |w, h| Ok(write_scalar_csv(w, field, column, Some(h))?))?];
        if heatmap {
            let (pgm, range) = encode_heatmap(field, Some(&self.header));
            out.push(self.bytes(&format!("{name}.pgm"), &pgm)?);
            out.push(self.bytes(&format!("{name}.range.txt"), format!("# {}\n{range}", self.header).as_bytes())?);
        }
        Ok(out)
    }
}

fn physics(s: &Scenario) -> anyhow::Result<Physics> {
    Ok(Physics::new(s.mu, s.sigma)?)
}

fn radial_geometry(s: &Scenario) -> anyhow::Result<(Geometry, Exit)> {
    match s.domain {
        DomainSpec::Disk { radius } => Ok((Geometry::Disk { radius }, Exit::Outer)),
        DomainSpec::Annulus { inner, outer, inner_role, outer_role } => {
            let exit = match (inner_role, outer_role) {
                (BoundaryRole::Absorbing, BoundaryRole::Absorbing) => Exit::Both,
                (BoundaryRole::Absorbing, BoundaryRole::Reflecting) => Exit::Inner,
                _ => Exit::Outer,
            };
            Ok((Geometry::Annulus { inner, outer }, exit))
        }
        DomainSpec::Rectangle { .. } => bail!("radial solutions need a disk or annulus domain"),
    }
}

fn radial_alpha(s: &Scenario) -> anyhow::Result<f64> {
    s.kernel
        .radial_alpha()
        .ok_or_else(|| anyhow!("the kernel has no radially symmetric diffusive limit (use uniform, bimodal_von_mises or bidirectional strict_alignment with radial or circular orientation)"))
}

/// `T(r)` from the closed forms, including the strict-alignment limits.
fn analytic_value(s: &Scenario, r: f64) -> anyhow::Result<f64> {
    let (geometry, exit) = radial_geometry(s)?;
    let alpha = radial_alpha(s)?;
    let d = s.diffusivity();
    let value = match geometry {
        Geometry::Disk { radius } => mfpt_core::analytic::disk_exit_time(r, radius, d)?,
        Geometry::Annulus { inner, outer } if alpha.abs() == 1.0 => {
            let mode = if alpha > 0.0 { LimitMode::Radial } else { LimitMode::Circular };
            annulus_limit(r, inner, outer, d, mode, exit)?
        }
        Geometry::Annulus { inner, outer } => mfpt_core::analytic::annulus_mfpt(r, inner, outer, d, alpha, exit)?,
    };
    Ok(value)
}

fn radial_problem(s: &Scenario) -> anyhow::Result<RadialProblem> {
    let (geometry, exit) = radial_geometry(s)?;
    let alpha = radial_alpha(s)?;
    if alpha.abs() >= 1.0 {
        bail!("strict alignment has no finite-difference solution (α = {alpha})");
    }
    Ok(RadialProblem::new(geometry, exit, s.diffusivity(), Alpha::Constant(alpha))?)
}

pub fn analytic(s: &Scenario, sink: &Sink) -> anyhow::Result<Vec<PathBuf>> {
    if s.radii.is_empty() {
        bail!("analytic: no radii given (set analytic.radii or analytic.r_min/r_max/points)");
    }
    let values = s.radii.iter().map(|&r| analytic_value(s, r)).collect::<anyhow::Result<Vec<f64>>>()?;
    let path = sink.csv("analytic.csv", |w, h| {
        writeln!(w, "# {h}")?;
        writeln!(w, "r,T")?;
        for (r, t) in s.radii.iter().zip(&values) {
            writeln!(w, "{r},{t}")?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

/// Grid, anisotropy and (for feature scenarios) the feature raster.
struct Environment {
    field: AnisotropyField,
    sign: OrientationSign,
    features: Option<GrayImage>,
}

fn fd_grid(s: &Scenario) -> anyhow::Result<GridSpec> {
    let (x0, x1, y0, y1) = s.domain.bounds();
    Ok(GridSpec::new(s.fd.n1, s.fd.n2, x0, x1, y0, y1)?)
}

fn environment(s: &Scenario) -> anyhow::Result<Environment> {
    match &s.kernel {
        KernelSpec::Uniform => Ok(Environment {
            field: AnisotropyField::isotropic(fd_grid(s)?),
            sign: OrientationSign::Radial,
            features: None,
        }),
        KernelSpec::Oriented { shape: OrientedShape::Bimodal { k }, sign } => Ok(Environment {
            field: AnisotropyField::radial(fd_grid(s)?, *k)?,
            sign: *sign,
            features: None,
        }),
        KernelSpec::Oriented { .. } => {
            bail!("only uniform and bimodal_von_mises kernels have a finite anisotropic diffusion tensor")
        }
        KernelSpec::Segments { path, k0, d0 } => {
            let grid = fd_grid(s)?;
            let segs = read_segments(path).with_context(|| format!("reading {}", path.display()))?;
            if segs.is_empty() {
                return Ok(Environment {
                    field: AnisotropyField::isotropic(grid),
                    sign: OrientationSign::Radial,
                    features: Some(GrayImage::filled(grid.n1(), grid.n2(), 0)?),
                });
            }
            let (d, dir) = distance_direction_from_segments(&grid, &segs)?;
            Ok(Environment {
                field: anisotropy_from_distance(&d, &dir, *k0, *d0)?,
                sign: OrientationSign::Radial,
                features: Some(rasterize_segments(&grid, &segs)?),
            })
        }
        KernelSpec::Raster { path, k0, d0, threshold, window } => {
            let image = read_pgm(path).with_context(|| format!("reading {}", path.display()))?;
            let (x0, x1, y0, y1) = s.domain.bounds();
            let grid = image.grid(x0, x1, y0, y1)?;
            let (d, dir) = fields_from_raster(&image, &grid, *threshold, *window)?;
            Ok(Environment {
                field: anisotropy_from_distance(&d, &dir, *k0, *d0)?,
                sign: OrientationSign::Radial,
                features: Some(image),
            })
        }
    }
}

fn solve_field(s: &Scenario, domain: &Domain, env: &Environment) -> anyhow::Result<ScalarField> {
    if domain.roles().contains(&BoundaryRole::Reflecting) {
        bail!("the 2D finite-difference solver supports absorbing boundaries only");
    }
    let tensor = tensor_field(&env.field, s.sigma, s.mu, env.sign)?;
    let bc = mfpt_core::fd::Dirichlet::zero_edges(env.field.grid).mask_outside(|p| domain.contains(p));
    let sys = assemble_2d(&tensor, &bc)?;
    Ok(solve_system(&sys, &SolveOptions { tol: s.fd.tol, method: s.fd.method })?)
}

pub fn solve(s: &Scenario, flags: &RunFlags, sink: &Sink) -> anyhow::Result<Vec<PathBuf>> {
    let domain = s.domain.build()?;
    let env = environment(s)?;
    let t = solve_field(s, &domain, &env)?;
    let mut written = sink.scalar("T", &t, "T", s.outputs.heatmap)?;
    if flags.baseline_isotropic {
        let iso = Environment {
            field: AnisotropyField::isotropic(env.field.grid),
            sign: OrientationSign::Radial,
            features: None,
        };
        let t_iso = solve_field(s, &domain, &iso)?;
        let diff = difference_map(&t, &t_iso)?;
        written.extend(sink.scalar("T_iso", &t_iso, "T", s.outputs.heatmap)?);
        written.extend(sink.scalar("difference", &diff, "dT", s.outputs.heatmap)?);
    }
    Ok(written)
}

pub fn env(s: &Scenario, sink: &Sink) -> anyhow::Result<Vec<PathBuf>> {
    let env = environment(s)?;
    let tensor = tensor_field(&env.field, s.sigma, s.mu, env.sign)?;
    let a = &env.field;
    let mut written = vec![sink.csv("anisotropy.csv", |w, h| {
        writeln!(w, "# {h}")?;
        writeln!(w, "x1,x2,d,k,alpha,g1,g2,flagged,d11,d12,d22")?;
        for idx in 0..a.grid.len() {
            let p = a.grid.node_at(idx);
            let g = a.gamma[idx];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.x,
                p.y,
                a.distance[idx],
                a.k[idx],
                env.sign.value() * a.alpha[idx],
                g.x,
                g.y,
                u8::from(a.flagged[idx]),
                tensor.d11[idx],
                tensor.d12[idx],
                tensor.d22[idx]
            )?;
        }
        Ok(())
    })?];
    if let Some(image) = &env.features {
        written.push(sink.bytes("features.pgm", &encode_pgm(image, Some(&sink.header)))?);
    }
    Ok(written)
}

fn kernel_field(s: &Scenario) -> anyhow::Result<Box<dyn KernelField>> {
    let sigma = s.sigma;
    Ok(match &s.kernel {
        KernelSpec::Uniform => Box::new(DirectionalKernel::uniform(sigma)?),
        KernelSpec::Oriented { shape, sign } => {
            let k = match *shape {
                OrientedShape::VonMises { k } => DirectionalKernel::von_mises(k, Vec2::E1, sigma)?,
                OrientedShape::Bimodal { k } => DirectionalKernel::bimodal_von_mises(k, Vec2::E1, sigma)?,
                OrientedShape::Strict { unidirectional: false } => DirectionalKernel::strict_alignment(Vec2::E1, sigma)?,
                OrientedShape::Strict { unidirectional: true } => {
                    DirectionalKernel::strict_alignment_unidirectional(Vec2::E1, sigma)?
                }
            };
            Box::new(OrientedKernel::new(k, *sign)?)
        }
        KernelSpec::Segments { path, k0, d0 } => {
            let segs = read_segments(path).with_context(|| format!("reading {}", path.display()))?;
            if segs.is_empty() {
                Box::new(DirectionalKernel::uniform(sigma)?)
            } else {
                Box::new(FeatureKernel::new(segs, *k0, *d0, sigma)?)
            }
        }
        KernelSpec::Raster { .. } => Box::new(GriddedKernel::new(environment(s)?.field, sigma, OrientationSign::Radial)?),
    })
}

/// Refuses inner-exit annulus runs whose expected event count per walker
/// exceeds the cap, unless the cap was raised explicitly.
fn event_guard(s: &Scenario, flags: &RunFlags) -> anyhow::Result<u64> {
    if let Some(cap) = flags.raise_event_cap {
        return Ok(cap);
    }
    let cap = s.mc.event_cap;
    let DomainSpec::Annulus { inner, outer, inner_role: BoundaryRole::Absorbing, outer_role: BoundaryRole::Reflecting } =
        s.domain
    else {
        return Ok(cap);
    };
    let Some(alpha) = s.kernel.radial_alpha() else {
        return Ok(cap);
    };
    let d = s.diffusivity();
    for start in &s.mc.starts {
        let r = start.x.norm();
        let ln_t = if alpha <= -1.0 {
            if r > inner {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            annulus_mfpt_ln(r, inner, outer, d, alpha, Exit::Inner)?
        };
        let ln_events = s.mu.ln() + ln_t;
        if ln_events > (cap as f64).ln() {
            return Err(GuardTripped(format!(
                "refusing inner-exit run with α = {alpha}: a walker from r = {r} needs about e^{ln_events:.1} events, above the event cap {cap} (non-exit suspected). Pass --raise-event-cap <n> to run anyway."
            ))
            .into());
        }
    }
    Ok(cap)
}

fn estimates(s: &Scenario, flags: &RunFlags, field: &dyn KernelField) -> anyhow::Result<Vec<FptEstimate>> {
    let cap = event_guard(s, flags)?;
    let domain = s.domain.build()?;
    let starts: Vec<Start> = s.mc.starts.iter().map(|st| Start { x: st.x, direction: st.direction }).collect();
    if starts.is_empty() {
        return Ok(Vec::new());
    }
    let opts = SimOptions { event_cap: cap, allow_boundary_start: s.mc.allow_boundary_start };
    let seed = flags.seed.unwrap_or(s.mc.seed);
    let est = estimate_theta(&domain, field, physics(s)?, &starts, s.mc.walkers, s.mc.moments, seed, &opts, false)?;
    for (i, e) in est.iter().enumerate() {
        if e.capped > 0 {
            eprintln!("warning: start {i}: {} walker(s) hit the event cap and were excluded", e.capped);
        }
    }
    Ok(est)
}

pub fn simulate(s: &Scenario, flags: &RunFlags, sink: &Sink) -> anyhow::Result<Vec<PathBuf>> {
    let field = kernel_field(s)?;
    let est = estimates(s, flags, field.as_ref())?;
    let m = s.mc.moments;
    let mut written = vec![sink.csv("estimates.csv", |w, h| {
        writeln!(w, "# {h}")?;
        let mut cols = vec!["x1".to_string(), "x2".into(), "theta1".into(), "stderr".into()];
        cols.extend((2..=m).map(|i| format!("theta{i}")));
        cols.push("capped_count".into());
        writeln!(w, "{}", cols.join(","))?;
        for e in &est {
            write!(w, "{},{},{},{}", e.start.x.x, e.start.x.y, e.mean, e.stderr)?;
            for i in 2..=m {
                write!(w, ",{}", e.theta(i))?;
            }
            writeln!(w, ",{}", e.capped)?;
        }
        Ok(())
    })?];

    let domain = s.domain.build()?;
    let seed = flags.seed.unwrap_or(s.mc.seed);
    let cap = flags.raise_event_cap.unwrap_or(s.mc.event_cap);
    let opts = SimOptions { event_cap: cap, allow_boundary_start: s.mc.allow_boundary_start };
    if s.mc.trajectories > 0 {
        let runs = match s.mc.starts.first() {
            Some(st) => {
                let start = Start { x: st.x, direction: st.direction };
                record_trajectories(&domain, field.as_ref(), physics(s)?, &start, s.mc.trajectories, seed, &opts)?
            }
            None => Vec::new(),
        };
        written.push(sink.csv("trajectories.csv", |w, h| Ok(export_trajectories(w, &runs, Some(h))?))?);
    }
    if let Some(sv) = &s.mc.survival {
        let times: Vec<f64> =
            (0..sv.points).map(|i| if i + 1 == sv.points { sv.t_max } else { sv.t_max * i as f64 / (sv.points - 1) as f64 }).collect();
        let mut curves = Vec::new();
        for st in &s.mc.starts {
            let start = Start { x: st.x, direction: st.direction };
            curves.push(estimate_survival(&domain, field.as_ref(), physics(s)?, &start, &times, s.mc.walkers, seed, &opts)?);
        }
        written.push(sink.csv("survival.csv", |w, h| {
            writeln!(w, "# {h}")?;
            writeln!(w, "start_id,t,S")?;
            for (i, c) in curves.iter().enumerate() {
                for (t, v) in c.times.iter().zip(&c.survival) {
                    writeln!(w, "{i},{t},{v}")?;
                }
            }
            Ok(())
        })?);
    }
    Ok(written)
}

pub fn compare(s: &Scenario, flags: &RunFlags, sink: &Sink) -> anyhow::Result<Vec<PathBuf>> {
    let problem = radial_problem(s)?;
    let mut rows = Vec::new();
    if !s.mc.starts.is_empty() {
        let fd = radial_solve(&problem, s.fd.radial_nodes)?;
        let field = kernel_field(s)?;
        let est = estimates(s, flags, field.as_ref())?;
        for e in est {
            let r = e.start.x.norm();
            let exact = analytic_value(s, r)?;
            let numeric = fd.interpolate(r);
            let rel = if exact == 0.0 { (numeric - exact).abs() } else { ((numeric - exact) / exact).abs() };
            let z = (e.mean - exact) / e.stderr;
            rows.push((e.start.x, r, exact, numeric, rel, e.mean, e.stderr, z, e.capped));
        }
    }
    let path = sink.csv("compare.csv", |w, h| {
        writeln!(w, "# {h}")?;
        writeln!(w, "x1,x2,r,analytic,fd,fd_rel_err,mc,stderr,z,capped_count")?;
        for (x, r, exact, numeric, rel, mean, se, z, capped) in &rows {
            writeln!(w, "{},{},{r},{exact},{numeric},{rel},{mean},{se},{z},{capped}", x.x, x.y)?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(text: &str) -> Scenario {
        Scenario::parse(text.as_bytes(), Path::new(".")).unwrap()
    }

    #[test]
    fn disk_analytic_matches_closed_form() {
        let s = scenario(
            r#"{"domain": {"shape": "disk", "radius": 3},
                "kernel": {"type": "bimodal_von_mises", "alpha": 0.7},
                "physics": {"mu": 1, "sigma": 1}}"#,
        );
        for r in [0.0, 1.0, 2.5, 3.0] {
            assert!((analytic_value(&s, r).unwrap() - (9.0 - r * r) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_inner_exit_limit_is_infinite() {
        let s = scenario(
            r#"{"domain": {"shape": "annulus", "inner": 0.5, "outer": 3, "outer_boundary": "reflecting"},
                "kernel": {"type": "strict_alignment", "orientation": "circular"},
                "physics": {"mu": 1, "sigma": 1}}"#,
        );
        assert_eq!(analytic_value(&s, 0.5).unwrap(), 0.0);
        assert_eq!(analytic_value(&s, 1.0).unwrap(), f64::INFINITY);
        assert!(radial_problem(&s).is_err());
    }

    #[test]
    fn guard_trips_near_circular_limit() {
        let text = r#"{"domain": {"shape": "annulus", "inner": 0.5, "outer": 3, "outer_boundary": "reflecting"},
                "kernel": {"type": "bimodal_von_mises", "alpha": -0.999},
                "physics": {"mu": 10000, "sigma": 100},
                "mc": {"starts": [{"x": [1, 0]}]}}"#;
        let s = scenario(text);
        let err = event_guard(&s, &RunFlags::default()).unwrap_err();
        assert!(err.downcast_ref::<GuardTripped>().is_some());
        let raised = RunFlags { raise_event_cap: Some(5), ..RunFlags::default() };
        assert_eq!(event_guard(&s, &raised).unwrap(), 5);
        let mild = scenario(&text.replace("-0.999", "-0.5"));
        assert_eq!(event_guard(&mild, &RunFlags::default()).unwrap(), mfpt_core::mc::DEFAULT_EVENT_CAP);
    }

    #[test]
    fn drift_kernels_have_no_tensor() {
        let s = scenario(
            r#"{"domain": {"shape": "disk", "radius": 1},
                "kernel": {"type": "von_mises", "k": 2, "orientation": "radial"},
                "physics": {"mu": 1, "sigma": 1}}"#,
        );
        assert!(environment(&s).is_err());
        assert!(radial_alpha(&s).is_err());
        assert!(kernel_field(&s).is_ok());
    }
}
