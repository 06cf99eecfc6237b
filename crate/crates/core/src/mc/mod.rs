//! Event-driven Monte Carlo of the velocity-jump process.
//!
//! Walkers fly straight at speed `σ` for exponential times of rate `μ`,
//! then redraw a direction from the kernel at their current position.
//! Boundary crossings are resolved exactly; absorbing pieces end the walk
//! and reflecting pieces mirror the direction.

mod field;

pub use field::{FeatureKernel, GriddedKernel, KernelField, OrientedKernel, WalkerRng};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::env::{BoundaryRole, Domain};
use crate::error::{invalid, Error, Result};
use crate::geom::Vec2;

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Turning rate `μ` and speed `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physics {
    pub mu: f64,
    pub sigma: f64,
}

impl Physics {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0) || !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(invalid(format!("μ and σ must be positive, got μ = {mu}, σ = {sigma}")));
        }
        Ok(Physics { mu, sigma })
    }

    /// `D = σ²/(2μ)`.
    pub fn diffusivity(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.mu)
    }
}

/// Start position and initial direction (`None` draws it from the kernel at
/// the start).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Start {
    pub x: Vec2,
    pub direction: Option<Vec2>,
}

impl Start {
    pub fn drawn(x: Vec2) -> Self {
        Start { x, direction: None }
    }

    pub fn fixed(x: Vec2, direction: Vec2) -> Self {
        Start { x, direction: Some(direction) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub event_cap: u64,
    /// Accept starts on the boundary (they exit at time 0 when absorbing).
    pub allow_boundary_start: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { event_cap: DEFAULT_EVENT_CAP, allow_boundary_start: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitEvent {
    pub time: f64,
    pub point: Vec2,
    pub events: u64,
}

/// Event points `(t, x)` of one walk: start, turns, reflections and exit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<(f64, Vec2)>,
}

/// Stream for walker `walker` of start `start` under `seed`.
pub fn walker_rng(seed: u64, start: usize, walker: usize) -> WalkerRng {
    let mut rng = WalkerRng::seed_from_u64(seed);
    rng.set_stream(((start as u64) << 32) | walker as u64);
    rng
}

fn check_start(domain: &Domain, start: &Start, opts: &SimOptions) -> Result<Option<f64>> {
    if domain.contains(start.x) {
        return Ok(None);
    }
    if opts.allow_boundary_start {
        if let Some(piece) = domain.boundary_piece_at(start.x, 1e-12) {
            if domain.role(piece) == Some(BoundaryRole::Absorbing) {
                return Ok(Some(0.0));
            }
            return Ok(None);
        }
    }
    Err(Error::OutsideDomain(format!("start ({}, {})", start.x.x, start.x.y)))
}

/// Runs one walker to absorption.
pub fn simulate_exit<F: KernelField + ?Sized>(
    domain: &Domain,
    field: &F,
    physics: Physics,
    start: &Start,
    rng: &mut WalkerRng,
    opts: &SimOptions,
    mut trajectory: Option<&mut Trajectory>,
) -> Result<ExitEvent> {
    if let Some(t0) = check_start(domain, start, opts)? {
        if let Some(tr) = trajectory {
            tr.points.push((t0, start.x));
        }
        return Ok(ExitEvent { time: t0, point: start.x, events: 0 });
    }
    let Physics { mu, sigma } = physics;
    let mut x = start.x;
    let mut u = match start.direction {
        Some(d) => d.normalized().ok_or_else(|| invalid("initial direction must be non-zero"))?,
        None => field.sample(x, rng),
    };
    let mut t = 0.0;
    if let Some(tr) = trajectory.as_deref_mut() {
        tr.points.push((0.0, x));
    }
    let mut events: u64 = 0;
    loop {
        let tau: f64 = rng.sample::<f64, _>(Exp1) / mu;
        let mut left = sigma * tau;
        loop {
            match domain.first_hit(x, u, left) {
                None => {
                    x = x + u * left;
                    t += left / sigma;
                    break;
                }
                Some((s, piece)) => {
                    t += s / sigma;
                    let hit = domain.project(piece, x + u * s);
                    if domain.role(piece) == Some(BoundaryRole::Absorbing) {
                        if let Some(tr) = trajectory.as_deref_mut() {
                            tr.points.push((t, hit));
                        }
                        return Ok(ExitEvent { time: t, point: hit, events });
                    }
                    let n = domain.outward_normal(piece, hit);
                    u = u - n * (2.0 * u.dot(n));
                    x = hit;
                    left -= s;
                    if let Some(tr) = trajectory.as_deref_mut() {
                        tr.points.push((t, x));
                    }
                }
            }
        }
        events += 1;
        if events >= opts.event_cap {
            return Err(Error::EventCapExceeded { cap: opts.event_cap });
        }
        u = field.sample(x, rng);
        if let Some(tr) = trajectory.as_deref_mut() {
            tr.points.push((t, x));
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Exit-time statistics for one start.
#[derive(Clone, Debug, PartialEq)]
pub struct FptEstimate {
    pub start: Start,
    /// Walkers that exited.
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `Θ_m` for `m = 1..=M`.
    pub moments: Vec<f64>,
    /// Walkers stopped by the event cap, excluded from the statistics.
    pub capped: u64,
    pub samples: Option<Vec<f64>>,
}

impl FptEstimate {
    /// `Θ_m`, with `Θ₀ = 1`.
    pub fn theta(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            self.moments[m - 1]
        }
    }

    fn from_samples(start: Start, times: &[f64], order: usize, capped: u64, keep: bool) -> Self {
        let n = times.len();
        let mut sums = vec![Sum::default(); order.max(1)];
        for &t in times {
            let mut p = 1.0;
            for s in sums.iter_mut() {
                p *= t;
                s.add(p);
            }
        }
        let moments: Vec<f64> = sums.iter().map(|s| s.value() / n as f64).collect();
        let mean = moments[0];
        let mut dev = Sum::default();
        for &t in times {
            dev.add((t - mean) * (t - mean));
        }
        let stderr = if n > 1 { (dev.value() / (n - 1) as f64).sqrt() / (n as f64).sqrt() } else { f64::NAN };
        FptEstimate {
            start,
            n,
            mean,
            stderr,
            moments: moments[..order].to_vec(),
            capped,
            samples: keep.then(|| times.to_vec()),
        }
    }
}

fn exit_times<F: KernelField + ?Sized>(
    domain: &Domain,
    field: &F,
    physics: Physics,
    start: &Start,
    start_index: usize,
    n: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<(Vec<f64>, u64)> {
    check_start(domain, start, opts)?;
    let results: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|w| {
            let mut rng = walker_rng(seed, start_index, w);
            simulate_exit(domain, field, physics, start, &mut rng, opts, None).map(|e| e.time)
        })
        .collect();
    let mut times = Vec::with_capacity(n);
    let mut capped = 0;
    for r in results {
        match r {
            Ok(t) => times.push(t),
            Err(Error::EventCapExceeded { .. }) => capped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((times, capped))
}

/// `N` walkers per start, moments up to order `M`. Walker `w` of start `i`
/// uses [`walker_rng`]`(seed, i, w)`, so results do not depend on the
/// number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn estimate_theta<F: KernelField + ?Sized>(
    domain: &Domain,
    field: &F,
    physics: Physics,
    starts: &[Start],
    n: usize,
    order: usize,
    seed: u64,
    opts: &SimOptions,
    keep_samples: bool,
) -> Result<Vec<FptEstimate>> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 walkers per start, got {n}")));
    }
    if order < 1 {
        return Err(invalid("moment order must be at least 1"));
    }
    starts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (times, capped) = exit_times(domain, field, physics, s, i, n, seed, opts)?;
            if times.len() < 2 {
                return Err(Error::EventCapExceeded { cap: opts.event_cap });
            }
            Ok(FptEstimate::from_samples(*s, &times, order, capped, keep_samples))
        })
        .collect()
}

/// Empirical `S(t)` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    /// Walkers that exited.
    pub n: usize,
    pub capped: u64,
}

impl SurvivalCurve {
    /// Trapezoid rule `∫ S dt` over the grid.
    pub fn integral(&self) -> f64 {
        self.times.windows(2).zip(self.survival.windows(2)).map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1])).sum()
    }
}

/// Fraction of walkers still inside at each grid time.
#[allow(clippy::too_many_arguments)]
pub fn estimate_survival<F: KernelField + ?Sized>(
    domain: &Domain,
    field: &F,
    physics: Physics,
    start: &Start,
    times: &[f64],
    n: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<SurvivalCurve> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("survival time grid must start at 0 and increase"));
    }
    if n < 1 {
        return Err(invalid("need at least one walker"));
    }
    let (mut exits, capped) = exit_times(domain, field, physics, start, 0, n, seed, opts)?;
    exits.sort_unstable_by(f64::total_cmp);
    let m = exits.len() as f64;
    let survival = times
        .iter()
        .map(|&t| {
            let gone = exits.partition_point(|&e| e <= t);
            (exits.len() - gone) as f64 / m
        })
        .collect();
    Ok(SurvivalCurve { times: times.to_vec(), survival, n: exits.len(), capped })
}

/// Records `count` full walks from one start.
pub fn record_trajectories<F: KernelField + ?Sized>(
    domain: &Domain,
    field: &F,
    physics: Physics,
    start: &Start,
    count: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<Trajectory>> {
    (0..count)
        .into_par_iter()
        .map(|w| {
            let mut rng = walker_rng(seed, 0, w);
            let mut tr = Trajectory::default();
            simulate_exit(domain, field, physics, start, &mut rng, opts, Some(&mut tr))?;
            Ok(tr)
        })
        .collect()
}

/// `run_id,t,x1,x2` rows, one per event point.
pub fn export_trajectories<W: Write + ?Sized>(w: &mut W, runs: &[Trajectory], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "run_id,t,x1,x2")?;
    for (id, run) in runs.iter().enumerate() {
        for (t, p) in &run.points {
            writeln!(w, "{id},{t},{},{}", p.x, p.y)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DirectionalKernel;
    use crate::env::{OrientationSign, SegmentSet};

    fn disk_setup() -> (Domain, DirectionalKernel, Physics) {
        (Domain::disk(3.0).unwrap(), DirectionalKernel::uniform(10.0).unwrap(), Physics::new(100.0, 10.0).unwrap())
    }

    #[test]
    fn ballistic_exit_is_exact() {
        let d = Domain::disk(3.0).unwrap();
        let k = DirectionalKernel::strict_alignment_unidirectional(Vec2::E1, 2.0).unwrap();
        let field = OrientedKernel::new(k, OrientationSign::Radial).unwrap();
        let ph = Physics::new(50.0, 2.0).unwrap();
        for w in 0..20 {
            let mut rng = walker_rng(1, 0, w);
            let mut tr = Trajectory::default();
            let e = simulate_exit(&d, &field, ph, &Start::drawn(Vec2::ZERO), &mut rng, &SimOptions::default(), Some(&mut tr))
                .unwrap();
            assert!((e.time - 1.5).abs() < 1e-12, "{}", e.time);
            assert!((e.point.norm() - 3.0).abs() < 1e-12);
        }
        // a single flight longer than the radius: start and exit only
        let slow = Physics::new(1e-9, 2.0).unwrap();
        let mut tr = Trajectory::default();
        let start = Start::fixed(Vec2::ZERO, Vec2::E2);
        simulate_exit(&d, &field, slow, &start, &mut walker_rng(3, 0, 0), &SimOptions::default(), Some(&mut tr)).unwrap();
        assert_eq!(tr.points.len(), 2);
        assert_eq!(tr.points[1].1, Vec2::new(0.0, 3.0));
    }

    #[test]
    fn boundary_start() {
        let (d, k, ph) = disk_setup();
        let s = Start::drawn(Vec2::new(3.0, 0.0));
        let mut rng = walker_rng(0, 0, 0);
        assert!(matches!(
            simulate_exit(&d, &k, ph, &s, &mut rng, &SimOptions::default(), None),
            Err(Error::OutsideDomain(_))
        ));
        let permissive = SimOptions { allow_boundary_start: true, ..SimOptions::default() };
        assert_eq!(simulate_exit(&d, &k, ph, &s, &mut rng, &permissive, None).unwrap().time, 0.0);
        assert!(simulate_exit(&d, &k, ph, &Start::drawn(Vec2::new(4.0, 0.0)), &mut rng, &permissive, None).is_err());
    }

    #[test]
    fn event_cap_is_reported() {
        let (d, k, ph) = disk_setup();
        let opts = SimOptions { event_cap: 10, ..SimOptions::default() };
        let est = estimate_theta(&d, &k, ph, &[Start::drawn(Vec2::ZERO)], 8, 1, 5, &opts, false);
        assert!(matches!(est, Err(Error::EventCapExceeded { cap: 10 })));
        let mut rng = walker_rng(0, 0, 0);
        let err = simulate_exit(&d, &k, ph, &Start::drawn(Vec2::ZERO), &mut rng, &opts, None).unwrap_err();
        assert!(err.to_string().contains("non-exit suspected"));
    }

    #[test]
    fn moments_and_determinism() {
        let (d, k, ph) = disk_setup();
        let starts = [Start::drawn(Vec2::ZERO), Start::drawn(Vec2::new(1.0, 1.0))];
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_theta(&d, &k, ph, &starts, 200, 3, 42, &SimOptions::default(), true).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        for e in &a {
            assert!(e.theta(2) >= e.theta(1) * e.theta(1));
            assert_eq!(e.theta(0), 1.0);
            assert_eq!(e.capped, 0);
            let s = e.samples.as_ref().unwrap();
            let direct: f64 = s.iter().map(|t| t * t * t).sum::<f64>() / s.len() as f64;
            assert!((direct - e.theta(3)).abs() < 1e-12 * direct);
        }
        let c = estimate_theta(&d, &k, ph, &starts, 2, 1, 42, &SimOptions::default(), false).unwrap();
        let c2 = estimate_theta(&d, &k, ph, &starts, 2, 1, 42, &SimOptions::default(), false).unwrap();
        assert_eq!(c, c2);
        assert!(estimate_theta(&d, &k, ph, &starts, 1, 1, 42, &SimOptions::default(), false).is_err());
    }

    #[test]
    fn reflecting_walls_keep_walkers_inside() {
        let d = Domain::rectangle(0.0, 1.0, 0.0, 1.0, [
            BoundaryRole::Reflecting,
            BoundaryRole::Absorbing,
            BoundaryRole::Reflecting,
            BoundaryRole::Reflecting,
        ])
        .unwrap();
        let k = DirectionalKernel::uniform(1.0).unwrap();
        let ph = Physics::new(2.0, 1.0).unwrap();
        for w in 0..50 {
            let mut tr = Trajectory::default();
            let mut rng = walker_rng(9, 0, w);
            let e = simulate_exit(&d, &k, ph, &Start::drawn(Vec2::new(0.3, 0.6)), &mut rng, &SimOptions::default(), Some(&mut tr))
                .unwrap();
            assert_eq!(e.point.x, 1.0);
            for (_, p) in &tr.points {
                assert!((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y), "{p:?}");
            }
            assert!(tr.points.windows(2).all(|w| w[1].0 >= w[0].0));
        }
    }

    #[test]
    fn annulus_reflection_off_inner_circle() {
        let d = Domain::annulus(0.5, 1.0, BoundaryRole::Reflecting, BoundaryRole::Absorbing).unwrap();
        let k = DirectionalKernel::uniform(1.0).unwrap();
        let ph = Physics::new(1e-12, 1.0).unwrap();
        // straight at the inner circle, bounced back along the same line
        let start = Start::fixed(Vec2::new(0.75, 0.0), -Vec2::E1);
        let e = simulate_exit(&d, &k, ph, &start, &mut walker_rng(0, 0, 0), &SimOptions::default(), None).unwrap();
        assert!((e.time - 0.75).abs() < 1e-12);
        assert!((e.point - Vec2::E1).norm() < 1e-12);
    }

    #[test]
    fn survival_curve_properties() {
        let (d, k, ph) = disk_setup();
        let times: Vec<f64> = (0..1000).map(|i| i as f64 * 0.1).collect();
        let s = estimate_survival(&d, &k, ph, &Start::drawn(Vec2::ZERO), &times, 500, 3, &SimOptions::default()).unwrap();
        assert_eq!(s.survival[0], 1.0);
        assert!(s.survival.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*s.survival.last().unwrap(), 0.0);
        assert!(estimate_survival(&d, &k, ph, &Start::drawn(Vec2::ZERO), &[0.1, 0.2], 5, 3, &SimOptions::default()).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let mut out = Vec::new();
        export_trajectories(&mut out, &[], None).unwrap();
        assert_eq!(out, b"run_id,t,x1,x2\n");
        let runs = vec![Trajectory { points: vec![(0.0, Vec2::ZERO), (1.5, Vec2::new(3.0, 0.0))] }];
        let mut out = Vec::new();
        export_trajectories(&mut out, &runs, Some("meta")).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "# meta\nrun_id,t,x1,x2\n0,0,0,0\n0,1.5,3,0\n");
    }

    #[test]
    fn feature_kernel_aligns_near_segments() {
        let segs = SegmentSet::from_endpoints(&[[0.0, -1.0, 0.0, 1.0]]).unwrap();
        let f = FeatureKernel::new(segs, 200.0, 0.1, 1.0).unwrap();
        let mut rng = walker_rng(0, 0, 0);
        for _ in 0..200 {
            let v = f.sample(Vec2::new(0.05, 0.0), &mut rng);
            assert!(v.y.abs() > 0.9);
        }
        let far: f64 = (0..4000).map(|_| f.sample(Vec2::new(0.5, 0.0), &mut rng).y.abs()).sum::<f64>() / 4000.0;
        assert!((far - 2.0 / std::f64::consts::PI).abs() < 0.03);
        assert!(FeatureKernel::new(SegmentSet::default(), 1.0, 0.1, 1.0).is_err());
    }
}
