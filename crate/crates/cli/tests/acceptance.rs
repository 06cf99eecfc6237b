//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p mfpt-cli --test acceptance -- 1 5`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mfpt_core::analytic::{
    annulus_mfpt, annulus_mfpt_ln, inner_exit_quadrature_ln, Alpha, Exit, Geometry, RadialProblem,
};
use mfpt_core::dist::{alpha_of_k, k_of_alpha, DirectionalKernel};
use mfpt_core::env::{
    anisotropy_from_distance, distance_direction_from_segments, tensor_field, AnisotropyField, BoundaryRole, Domain,
    OrientationSign, TensorField,
};
use mfpt_core::fd::{assemble_2d, assemble_2d_with_source, difference_map, radial_moments, radial_solve, solve_system, Dirichlet, SolveOptions};
use mfpt_core::io::read_segments;
use mfpt_core::mc::{estimate_theta, walker_rng, OrientedKernel, Physics, SimOptions, Start};
use mfpt_core::{GridSpec, ScalarField, Vec2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Disk MFPT is the same for every α.
fn disk_alpha_independence() -> Outcome {
    let (r0, d, n) = (3.0, 0.5, 2049);
    let mut worst = 0.0f64;
    for alpha in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        let p = RadialProblem::new(Geometry::Disk { radius: r0 }, Exit::Outer, d, Alpha::Constant(alpha)).unwrap();
        let sol = radial_solve(&p, n).unwrap();
        let exact: Vec<f64> = sol.r.iter().map(|r| (r0 * r0 - r * r) / (4.0 * d)).collect();
        worst = worst.max(max_rel(&sol.t, &exact));
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} (bound 1e-4)"))
}

/// Closed forms against radial finite differences and the quadrature.
fn annulus_closed_forms() -> Outcome {
    let (rho, r0, d) = (0.5, 3.0, 0.5);
    let (mut fd_err, mut quad_err) = (0.0f64, 0.0f64);
    for alpha in [-0.5, 0.3, 0.7] {
        for exit in [Exit::Inner, Exit::Outer, Exit::Both] {
            let p = RadialProblem::new(Geometry::Annulus { inner: rho, outer: r0 }, exit, d, Alpha::Constant(alpha))
                .unwrap();
            let sol = radial_solve(&p, 4097).unwrap();
            let exact: Vec<f64> = sol.r.iter().map(|&r| annulus_mfpt(r, rho, r0, d, alpha, exit).unwrap()).collect();
            fd_err = fd_err.max(max_rel(&sol.t, &exact));
            let q = p.quadrature().unwrap();
            for i in 0..=200 {
                let r = rho + (r0 - rho) * i as f64 / 200.0;
                let e = annulus_mfpt(r, rho, r0, d, alpha, exit).unwrap();
                let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                quad_err = quad_err.max((q.value(r) - e).abs() / scale);
            }
        }
    }
    outcome(
        fd_err <= 1e-4 && quad_err <= 1e-8,
        format!("fd {fd_err:.2e} (bound 1e-4), quadrature {quad_err:.2e} (bound 1e-8)"),
    )
}

/// Monte Carlo on the both-exit annulus against the closed form.
fn fig2b_reproduction() -> Outcome {
    let (rho, r0) = (0.5, 3.0);
    let ph = Physics::new(1e4, 100.0).unwrap();
    let d = ph.diffusivity();
    let domain = Domain::annulus(rho, r0, BoundaryRole::Absorbing, BoundaryRole::Absorbing).unwrap();
    let radii = [0.875, 1.25, 1.625, 2.0, 2.375, 2.75];
    let starts: Vec<Start> = radii.iter().map(|&r| Start::drawn(Vec2::new(r, 0.0))).collect();
    let (mut within3, mut within2, mut cells, mut worst) = (0, 0, 0, 0.0f64);
    for (i, alpha) in [-0.5f64, 0.0, 0.5].into_iter().enumerate() {
        let k = k_of_alpha(alpha.abs()).unwrap();
        let sign = if alpha < 0.0 { OrientationSign::Circular } else { OrientationSign::Radial };
        let kernel = DirectionalKernel::bimodal_von_mises(k, Vec2::E1, ph.sigma).unwrap();
        let field = OrientedKernel::new(kernel, sign).unwrap();
        let est = estimate_theta(&domain, &field, ph, &starts, 10_000, 1, 300 + i as u64, &SimOptions::default(), false)
            .unwrap();
        for (e, &r) in est.iter().zip(&radii) {
            let exact = annulus_mfpt(r, rho, r0, d, alpha, Exit::Both).unwrap();
            let z = (e.mean - exact) / e.stderr;
            worst = worst.max(z.abs());
            cells += 1;
            within3 += usize::from(z.abs() <= 3.0);
            within2 += usize::from(z.abs() <= 2.0);
        }
    }
    let frac2 = within2 as f64 / cells as f64;
    outcome(
        within3 == cells && frac2 >= 0.9,
        format!("{within3}/{cells} cells within 3 stderr, {:.0}% within 2 (need 90%), max |z| {worst:.2}", 100.0 * frac2),
    )
}

/// Uniform-kernel disk against `R₀²/(4D)`, and scaling invariance.
fn isotropic_limit() -> Outcome {
    let disk = Domain::disk(3.0).unwrap();
    let start = [Start::drawn(Vec2::ZERO)];
    let run = |mu: f64, sigma: f64, seed: u64| {
        let ph = Physics::new(mu, sigma).unwrap();
        let kernel = DirectionalKernel::uniform(sigma).unwrap();
        estimate_theta(&disk, &kernel, ph, &start, 10_000, 1, seed, &SimOptions::default(), false).unwrap().remove(0)
    };
    let a = run(1e4, 100.0, 41);
    let b = run(4e4, 200.0, 42);
    let exact = 9.0 / (4.0 * 0.5);
    let z = (a.mean - exact) / a.stderr;
    let combined = a.stderr.hypot(b.stderr);
    let zs = (a.mean - b.mean) / combined;
    outcome(
        z.abs() <= 3.0 && zs.abs() < 3.0,
        format!("mean {:.4} vs {exact} (z {z:.2}); scaled mean {:.4}, difference {zs:.2} combined stderr", a.mean, b.mean),
    )
}

/// Inner-exit MFPT blows up as α → -1.
fn inner_exit_divergence() -> Outcome {
    let (r, rho, r0, d) = (1.0, 0.5, 3.0, 0.5);
    let mut ln_t = Vec::new();
    let mut oracle_gap = 0.0f64;
    for alpha in [-0.9, -0.99, -0.999] {
        let closed = annulus_mfpt_ln(r, rho, r0, d, alpha, Exit::Inner).unwrap();
        let quad = inner_exit_quadrature_ln(r, rho, r0, d, &Alpha::Constant(alpha)).unwrap();
        oracle_gap = oracle_gap.max((closed - quad).abs());
        ln_t.push(closed);
    }
    let growth: Vec<f64> = ln_t.windows(2).map(|w| w[1] - w[0]).collect();
    let pass = growth.iter().all(|g| *g >= 10f64.ln()) && oracle_gap <= 1e-8;
    outcome(
        pass,
        format!(
            "ln T = {:.3}, {:.3}, {:.3}; growth factors 10^{:.1}, 10^{:.1}; |ln closed - ln quadrature| {oracle_gap:.1e}",
            ln_t[0],
            ln_t[1],
            ln_t[2],
            growth[0] / 10f64.ln(),
            growth[1] / 10f64.ln()
        ),
    )
}

fn solve_manufactured(n: usize, tensor: impl Fn(Vec2) -> [f64; 3], exact: &dyn Fn(Vec2) -> f64, source: &dyn Fn(Vec2) -> f64) -> f64 {
    let grid = GridSpec::square(n, 0.0, 1.0).unwrap();
    let t = TensorField::from_fn(grid, |p| {
        let [a, b, c] = tensor(p);
        mfpt_core::geom::Sym2 { xx: a, xy: b, yy: c }
    });
    let bc = Dirichlet::edges_from_fn(grid, exact);
    let s: Vec<f64> = grid.nodes().map(source).collect();
    let sys = assemble_2d_with_source(&t, &bc, &s).unwrap();
    let sol = solve_system(&sys, &SolveOptions { tol: 1e-11, ..SolveOptions::default() }).unwrap();
    sol.values.iter().zip(grid.nodes()).fold(0.0f64, |m, (v, p)| m.max((v - exact(p)).abs()))
}

/// Quadratic exactness and second-order convergence of the nine-point scheme.
fn stencil_exactness() -> Outcome {
    let (d11, d12, d22) = (1.3, 0.4, 0.7);
    let quad = |p: Vec2| 0.8 * p.x * p.x - 1.1 * p.x * p.y + 0.5 * p.y * p.y + 0.3 * p.x - 0.2 * p.y + 0.1;
    // 𝔻 : ∇⊗∇ T = 2·0.8·d11 + 2·(-1.1)·d12 + 2·0.5·d22 = -s
    let s = -(1.6 * d11 - 2.2 * d12 + 1.0 * d22);
    let exact_err = solve_manufactured(65, |_| [d11, d12, d22], &quad, &|_| s);

    let tensor = |p: Vec2| {
        let a = 1.0 + 0.5 * p.x * p.y;
        let c = 1.2 + 0.3 * (PI * p.x).sin();
        let b = 0.3 * (p.x + p.y).cos();
        [a, b, c]
    };
    let u = |p: Vec2| (PI * p.x).sin() * (PI * p.y).sin() * (1.0 + 0.5 * p.x);
    let src = move |p: Vec2| {
        let (sx, cx, sy, cy) = ((PI * p.x).sin(), (PI * p.x).cos(), (PI * p.y).sin(), (PI * p.y).cos());
        let g = 1.0 + 0.5 * p.x;
        let uxx = sy * (-PI * PI * sx * g + PI * cx);
        let uxy = PI * cy * (PI * cx * g + 0.5 * sx);
        let uyy = -PI * PI * sx * sy * g;
        let [a, b, c] = tensor(p);
        -(a * uxx + 2.0 * b * uxy + c * uyy)
    };
    let errs: Vec<f64> = [17, 33, 65, 129].iter().map(|&n| solve_manufactured(n, tensor, &u, &src)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = exact_err <= 1e-10 && orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    outcome(
        pass,
        format!(
            "quadratic max error {exact_err:.1e} (bound 1e-10); orders {}",
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn max_difference(features: &Path) -> f64 {
    let grid = GridSpec::square(257, -1.0, 1.0).unwrap();
    let segs = read_segments(features).unwrap();
    let (d, dir) = distance_direction_from_segments(&grid, &segs).unwrap();
    let aniso = anisotropy_from_distance(&d, &dir, 25.0, 0.02).unwrap();
    let solve = |field: &AnisotropyField| -> ScalarField {
        let t = tensor_field(field, 1.0, 1.0, OrientationSign::Radial).unwrap();
        let sys = assemble_2d(&t, &Dirichlet::zero_edges(grid)).unwrap();
        solve_system(&sys, &SolveOptions::default()).unwrap()
    };
    let diff = difference_map(&solve(&aniso), &solve(&AnisotropyField::isotropic(grid))).unwrap();
    diff.max_abs()
}

/// Ordering of the feature-scenario difference maps.
fn feature_ordering() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/features");
    let names = ["one_line", "slant_line", "three_lines", "ten_lines"];
    let m: Vec<f64> = names.iter().map(|n| max_difference(&dir.join(format!("{n}.csv")))).collect();
    let largest_is_line = m[0].max(m[2]) > m[1].max(m[3]);
    let ten_smallest = m[3] < m[0].min(m[1]).min(m[2]);
    outcome(
        largest_is_line && ten_smallest,
        format!(
            "max |ΔT|: one {:.4}, slant {:.4}, three {:.4}, ten {:.4}; single/three largest: {largest_is_line}, ten smallest: {ten_smallest}",
            m[0], m[1], m[2], m[3]
        ),
    )
}

/// Monte Carlo Θ₂ against the parabolic moment hierarchy.
fn moment_recursion() -> Outcome {
    let disk = Domain::disk(3.0).unwrap();
    let ph = Physics::new(1e4, 100.0).unwrap();
    let kernel = DirectionalKernel::uniform(ph.sigma).unwrap();
    let e = estimate_theta(&disk, &kernel, ph, &[Start::drawn(Vec2::ZERO)], 100_000, 2, 808, &SimOptions::default(), true)
        .unwrap()
        .remove(0);
    let p = RadialProblem::new(Geometry::Disk { radius: 3.0 }, Exit::Outer, ph.diffusivity(), Alpha::Constant(0.0))
        .unwrap();
    let oracle = radial_moments(&p, 4097, 2).unwrap()[1].t[0];
    let sq: Vec<f64> = e.samples.as_ref().unwrap().iter().map(|t| t * t).collect();
    let n = sq.len() as f64;
    let var = sq.iter().map(|v| (v - e.theta(2)).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z = (e.theta(2) - oracle) / se;
    outcome(z.abs() <= 3.0, format!("Θ₂ {:.4} vs hierarchy {oracle:.4} ± {se:.4} (z {z:.2})", e.theta(2)))
}

/// Density normalization, sampled covariance and α(25).
fn distribution_layer() -> Outcome {
    let sigma = 1.7;
    let gamma = Vec2::from_angle(0.6);
    let kernels = [
        DirectionalKernel::uniform(sigma).unwrap(),
        DirectionalKernel::von_mises(3.0, gamma, sigma).unwrap(),
        DirectionalKernel::von_mises(40.0, gamma, sigma).unwrap(),
        DirectionalKernel::bimodal_von_mises(0.7, gamma, sigma).unwrap(),
        DirectionalKernel::bimodal_von_mises(25.0, gamma, sigma).unwrap(),
    ];
    // periodic trapezoid rule converges geometrically for analytic integrands
    let n = 4096;
    let h = 2.0 * PI / n as f64;
    let mut norm_err = 0.0f64;
    let mut cov_err = 0.0f64;
    for (i, k) in kernels.iter().enumerate() {
        let total: f64 = (0..n).map(|j| k.density(j as f64 * h).unwrap() * sigma * h).sum();
        norm_err = norm_err.max((total - 1.0).abs());
        let mut rng = walker_rng(99, i, 0);
        let samples = 1_000_000;
        let (mut m, mut xx, mut xy, mut yy) = (Vec2::ZERO, 0.0, 0.0, 0.0);
        for _ in 0..samples {
            let v = k.sample_unit(&mut rng) * sigma;
            m = m + v;
            xx += v.x * v.x;
            xy += v.x * v.y;
            yy += v.y * v.y;
        }
        let inv = 1.0 / samples as f64;
        let m = m * inv;
        let cov = [xx * inv - m.x * m.x, xy * inv - m.x * m.y, yy * inv - m.y * m.y];
        let want = k.moments().covariance;
        let gap = [(cov[0] - want.xx).abs(), (cov[1] - want.xy).abs(), (cov[2] - want.yy).abs()];
        cov_err = cov_err.max(gap.into_iter().fold(0.0, f64::max) / (sigma * sigma));
    }
    let a25 = alpha_of_k(25.0);
    let pass = norm_err <= 1e-10 && cov_err <= 5e-3 && format!("{a25:.3}") == "0.922";
    outcome(
        pass,
        format!("normalization {norm_err:.1e} (bound 1e-10); covariance {cov_err:.1e}σ² (bound 5e-3σ²); α(25) = {a25:.5}"),
    )
}

fn run_cli(args: &[&str], threads: usize) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mfpt"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

/// `compare` and `simulate` are byte-identical across runs and thread counts.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let disk = tmp.path().join("disk.json");
    std::fs::write(
        &disk,
        r#"{"domain": {"shape": "disk", "radius": 1.5},
            "kernel": {"type": "uniform"},
            "physics": {"mu": 100, "sigma": 10},
            "mc": {"walkers": 3000, "moments": 3, "seed": 17,
                   "starts": [{"x": [0, 0]}, {"x": [0.5, 0.5], "direction": [1, 0]}],
                   "trajectories": 4, "survival": {"t_max": 5, "points": 51}}}"#,
    )
    .unwrap();
    let annulus = tmp.path().join("annulus.json");
    std::fs::write(
        &annulus,
        r#"{"domain": {"shape": "annulus", "inner": 0.5, "outer": 3},
            "kernel": {"type": "bimodal_von_mises", "alpha": 0.5},
            "physics": {"mu": 100, "sigma": 10},
            "mc": {"walkers": 2000, "seed": 18, "starts": [{"x": [1, 0]}, {"x": [0, -2]}]}}"#,
    )
    .unwrap();
    let files = ["estimates.csv", "trajectories.csv", "survival.csv", "compare.csv"];
    let mut runs = Vec::new();
    for (tag, threads) in [("a", 1), ("b", 1), ("c", 4)] {
        let dir = tmp.path().join(tag);
        let d = dir.to_str().unwrap();
        for (cmd, scen) in [("simulate", &disk), ("compare", &annulus)] {
            if let Err(e) = run_cli(&[cmd, "--scenario", scen.to_str().unwrap(), "--out", d], threads) {
                return outcome(false, format!("{cmd} failed: {e}"));
            }
        }
        runs.push(files.map(|f| std::fs::read(dir.join(f)).unwrap()));
    }
    let same = runs[0] == runs[1] && runs[0] == runs[2];
    let bytes: usize = runs[0].iter().map(Vec::len).sum();
    outcome(same, format!("{} files, {bytes} bytes per run; repeat and 1 vs 4 threads identical: {same}", files.len()))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "disk α-independence", disk_alpha_independence),
    (2, "annulus closed forms", annulus_closed_forms),
    (3, "annulus Monte Carlo agreement", fig2b_reproduction),
    (4, "isotropic diffusive limit", isotropic_limit),
    (5, "inner-exit divergence", inner_exit_divergence),
    (6, "stencil exactness and order", stencil_exactness),
    (7, "feature difference-map ordering", feature_ordering),
    (8, "moment recursion", moment_recursion),
    (9, "distribution layer", distribution_layer),
    (10, "determinism", determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} [{name}] {} ({:.1} s)", result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
