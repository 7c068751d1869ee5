//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines show up in `cargo test` output.

#[allow(dead_code)]
#[path = "../../core/tests/common/gradient_suite.rs"]
mod gradient_suite;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use msfadv::attack::{
    calibrate_surrogates, format_poses, objective, objective_and_gradient, pgd_step, project_linf, run_attack,
    synthetic_scenario, verification_poses, verify, AttackConfig, DetectorGeometry, SceneContext, Surrogates,
};
use msfadv::baselines::{ga_attack, gn_attack, GaConfig};
use msfadv::defenses::{bit_depth_reduce, evaluate_defense, median_smooth, median_smooth_point_cloud, undefended_rates, DefenseKind, DefenseTarget};
use msfadv::features::{derive_features, hard_count_oracle, soft_pi_tanh, soft_pi_trilinear, CellGrid, Channel, TanhSharpness, DEFAULT_EPS_DIV};
use msfadv::geometry::shapes::{box_mesh, icosphere, subdivide, tetrahedron, traffic_cone, unit_cube, ConeParams};
use msfadv::geometry::{angle_deficit_sum, mean_gaussian_curvature, self_intersection_ratio, watertightness, TriMesh};
use msfadv::sensor::{LidarPoint, LidarSpec, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail on this implementation; see the README.
const KNOWN_RED: [u8; 2] = [3, 6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Golden {
    ctx: SceneContext,
    cone: TriMesh,
    s: Surrogates,
    c: AttackConfig,
}

fn golden() -> Golden {
    let ctx = SceneContext::new(synthetic_scenario(), LidarSpec::default());
    let cone = traffic_cone(ConeParams::default(), 0.0, 0.0, 0.0);
    let c = AttackConfig::default();
    let s = calibrate_surrogates(&cone, &ctx, &DetectorGeometry::default().with_config(&c).unwrap()).unwrap();
    Golden { ctx, cone, s, c }
}

fn worked_example() -> Outcome {
    let grid = CellGrid::new([-0.5; 3], [1.0; 3], [4, 4, 4]).unwrap();
    let p = [0.8, 0.7, 0.1];
    let tri = soft_pi_trilinear(&p, &grid, [1, 1, 0]);
    let tanh = soft_pi_tanh(&p, &grid, [1, 1, 0], TanhSharpness::new(100.0).unwrap());
    // independent product of per-axis tent weights
    let tent: f64 = [(0.8f64, 1.0f64), (0.7, 1.0), (0.1, 0.0)].iter().map(|(x, c)| 1.0 - (x - c).abs()).product();
    let pass = (tri - 0.504).abs() < 1e-9 && (tri - tent).abs() < 1e-12 && (tanh - 1.0).abs() < 1e-6;
    outcome(pass, format!("trilinear {tri:.12}, tanh {tanh:.9}"))
}

fn partition_of_unity() -> Outcome {
    let grid = CellGrid::new([0.0; 3], [0.5; 3], [20, 20, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut all_eight = true;
    for _ in 0..10_000 {
        let p = [rng.gen_range(0.25..9.75), rng.gen_range(0.25..9.75), rng.gen_range(0.25..3.75)];
        let cells = grid.enclosing(p);
        all_eight &= cells.len() == 8;
        let sum: f64 = cells.iter().map(|&c| soft_pi_trilinear(&p, &grid, c)).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    outcome(all_eight && worst < 1e-9, format!("worst |sum - 1| {worst:.1e} over 10000 points"))
}

fn hard_pi(p: [f64; 3], grid: &CellGrid, cell: [usize; 3]) -> f64 {
    let inside = (0..3).all(|d| {
        let lo = grid.origin[d] + cell[d] as f64 * grid.dims[d];
        p[d] >= lo && p[d] < lo + grid.dims[d]
    });
    f64::from(u8::from(inside))
}

fn soft_vs_hard_counts() -> Outcome {
    let grid = CellGrid::new([0.0; 3], [0.5; 3], [20, 20, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<LidarPoint> =
        (0..10_000).map(|_| LidarPoint::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..4.0), rng.gen())).collect();
    let pc = PointCloud::new(points).unwrap();
    let mu = TanhSharpness::new(100.0).unwrap();
    let soft = derive_features(&pc.points, &grid, mu, DEFAULT_EPS_DIV).unwrap();
    let hard = hard_count_oracle(&pc, &grid);
    let errs: Vec<f64> = soft.channel(Channel::Count).iter().zip(&hard).map(|(s, &h)| (s - h as f64).abs()).collect();
    let max = errs.iter().copied().fold(0.0, f64::max);
    let (mut e_tanh, mut e_tri, mut n) = (0.0, 0.0, 0usize);
    for p in &pc.points {
        for cell in grid.enclosing(p.xyz) {
            let h = hard_pi(p.xyz, &grid, cell);
            e_tanh += (soft_pi_tanh(&p.xyz, &grid, cell, mu) - h).abs();
            e_tri += (soft_pi_trilinear(&p.xyz, &grid, cell) - h).abs();
            n += 1;
        }
    }
    let (e_tanh, e_tri) = (e_tanh / n as f64, e_tri / n as f64);
    outcome(
        max <= 0.05 && e_tanh < e_tri,
        format!("max per-cell count error {max:.3} (bound 0.05), mean inclusion error tanh {e_tanh:.4} vs trilinear {e_tri:.4}"),
    )
}

fn gradient_checks() -> Outcome {
    use gradient_suite as g;
    let checks = [
        g::scalar_primitives,
        g::trilinear_inclusion,
        g::tanh_inclusion,
        g::cell_features,
        g::bev_aggregated_features,
        g::laplacian_realizability,
        g::ray_intersection,
        g::rigid_placement_and_projection,
        g::soft_rasterizer,
        g::camera_confidence_of_pixels,
        g::lidar_confidence_of_features,
        g::camera_chain_end_to_end,
        g::lidar_chain_from_points,
        g::full_objective_end_to_end,
    ];
    let results: Vec<g::Check> = checks.iter().map(|f| f()).collect();
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    let worst = |tol: f64| results.iter().filter(|c| c.tol == tol).map(|c| c.worst).fold(0.0, f64::max);
    let probes = results.iter().map(|c| c.probes).min().unwrap_or(0);
    let mut detail = format!(
        "{} checks, >= {probes} probes each, worst op {:.1e}, worst chain {:.1e}",
        results.len(),
        worst(g::OP_TOL),
        worst(g::CHAIN_TOL)
    );
    if !failed.is_empty() {
        detail += &format!(", failing: {}", failed.join(", "));
    }
    outcome(failed.is_empty(), detail)
}

fn pgd_contract() -> Outcome {
    let g = golden();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let init: Vec<[f64; 3]> = g.cone.vertices().iter().map(|v| v.map(|x| x + rng.gen_range(-0.01..=0.01))).collect();
    let mut mesh = project_linf(&init, &g.cone, g.c.epsilon).unwrap();
    let mut worst = 0.0f64;
    for it in 0..200 {
        let e = objective_and_gradient(&mesh, &g.cone, &g.ctx, &g.c, &g.s, rng.gen()).unwrap();
        mesh = pgd_step(&mesh, &g.cone, &e.gradient, &g.c).unwrap();
        for (v, b) in mesh.vertices().iter().zip(g.cone.vertices()) {
            for k in 0..3 {
                worst = worst.max((v[k] - b[k]).abs());
            }
        }
        if worst > g.c.epsilon || mesh.faces() != g.cone.faces() || !watertightness(&mesh) {
            return outcome(false, format!("violated at iteration {it}: max deviation {worst}"));
        }
    }
    outcome(true, format!("200 iterations, max deviation {worst} <= {}, faces and watertightness unchanged", g.c.epsilon))
}

/// Returns the attacked mesh for the later criteria.
fn golden_run(g: &Golden) -> (Outcome, TriMesh) {
    let poses = verification_poses(&g.c);
    let benign = verify(&g.cone, &g.cone, &g.ctx, &g.s, &poses).unwrap();
    let min_l = benign.iter().map(|v| v.lidar).fold(f64::INFINITY, f64::min);
    let min_c = benign.iter().map(|v| v.camera).fold(f64::INFINITY, f64::min);
    let (mesh, report) = run_attack(&g.cone, &g.ctx, &g.c, &g.s, 0).unwrap();
    let (_, again) = run_attack(&g.cone, &g.ctx, &g.c, &g.s, 0).unwrap();
    let reproducible = report.to_json() == again.to_json() && report.trace_csv() == again.trace_csv();
    let max_l = report.final_poses.iter().map(|v| v.lidar).fold(0.0, f64::max);
    let max_c = report.final_poses.iter().map(|v| v.camera).fold(0.0, f64::max);
    let last = report.trace.last().map_or(f64::NAN, |r| r.adversarial);
    let benign_ok = min_l >= 0.9 && min_c >= 0.9;
    let detail = format!(
        "benign detected {} (min lidar {min_l:.2}, camera {min_c:.2}), success {} after {} iterations (max lidar {max_l:.2}, camera {max_c:.2}, adversarial loss {last:.3}), report reproducible {reproducible}",
        benign_ok, report.success, report.iterations
    );
    (outcome(benign_ok && report.success && reproducible, detail), mesh)
}

fn baseline_ordering(g: &Golden, pgd: &TriMesh) -> Outcome {
    let eval = |m: &TriMesh| objective(m, &g.cone, &g.ctx, &g.c, &g.s, 0).unwrap();
    let p = eval(pgd);
    let ga = ga_attack(&g.cone, &g.ctx, &g.c, &GaConfig { bound: g.c.epsilon, ..GaConfig::default() }, &g.s, 0).unwrap();
    let a = eval(&ga.mesh);
    let gn: f64 = (0..100).map(|seed| eval(&gn_attack(&g.cone, 0.021, seed).unwrap())).sum::<f64>() / 100.0;
    outcome(p < a && a < gn, format!("PGD {p:.3} < GA {a:.3} < GN mean {gn:.3} ({} GA evaluations)", ga.evaluations))
}

fn geometry() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for r in [0.5, 1.0, 2.5] {
        let k = mean_gaussian_curvature(&icosphere(r, 3)).mean;
        let rel = (k - 1.0 / (r * r)).abs() * r * r;
        pass &= rel <= 0.05;
        notes.push(format!("r={r}: {:.2}%", 100.0 * rel));
    }
    let shipped = [
        unit_cube(),
        subdivide(&unit_cube(), 2),
        icosphere(1.0, 2),
        tetrahedron([0.0; 3], 1.0),
        box_mesh([0.0; 3], [2.0, 1.0, 0.5]),
        traffic_cone(ConeParams::default(), 0.0, 0.0, 0.0),
    ];
    let deficit = shipped.iter().filter(|m| watertightness(m)).map(|m| (angle_deficit_sum(m) - 4.0 * std::f64::consts::PI).abs()).fold(0.0, f64::max);
    pass &= deficit < 1e-6;
    let convex = shipped[..5].iter().map(self_intersection_ratio).fold(0.0, f64::max);
    pass &= convex == 0.0;
    outcome(pass, format!("icosphere curvature error {}, worst deficit error {deficit:.1e}, convex self-intersection {convex}", notes.join(" ")))
}

fn defense_contracts(g: &Golden, pgd: &TriMesh) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let mut lattice = true;
    let mut idempotent = true;
    for bits in 1..=8u32 {
        let levels = ((1u32 << bits) - 1) as f64;
        let once = bit_depth_reduce(&values, bits).unwrap();
        idempotent &= bit_depth_reduce(&once, bits).unwrap() == once;
        lattice &= once.iter().all(|&y| y == (y * levels).round() / levels && (0.0..=1.0).contains(&y));
    }
    let img = &g.ctx.scenario.image;
    let median_identity =
        median_smooth(img, 1).unwrap() == *img && median_smooth_point_cloud(&g.ctx.scenario.background, &g.ctx.lidar.spec, 1).unwrap() == g.ctx.scenario.background;
    let poses = verification_poses(&g.c);
    let rows = evaluate_defense(pgd, &g.cone, &g.ctx, &g.s, DefenseKind::Median, DefenseTarget::Both, &[1], &poses).unwrap();
    let (b, a) = undefended_rates(pgd, &g.cone, &g.ctx, &g.s, &poses).unwrap();
    let same = rows[0].benign_rate == b && rows[0].attack_rate == a;
    outcome(
        lattice && idempotent && median_identity && same,
        format!(
            "lattice-exact {lattice}, idempotent {idempotent}, median k=1 identity {median_identity}, no-op sweep ({}, {}) vs undefended ({b}, {a})",
            rows[0].benign_rate, rows[0].attack_rate
        ),
    )
}

fn cli(args: &[String]) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_msfadv")).args(args).output().expect("binary runs");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let p = |rel: &str| tmp.path().join(rel).to_string_lossy().into_owned();
    let (code, _) = cli(&["synth".into(), "--out".into(), p("scene")]);
    assert_eq!(code, 0);
    fs::write(p("grid.txt"), format_poses(&verification_poses(&AttackConfig::default()))).unwrap();
    let (sc, cone) = (p("scene"), p("scene/cone.obj"));
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("synth", vec!["synth", "--out", "{out}"]),
        ("attack", vec!["attack", "--scenario", &sc, "--mesh", &cone, "--seed", "0", "--max-iters", "20", "--out", "{out}"]),
        ("render", vec!["render", "--scenario", &sc, "--mesh", &cone, "--out", "{out}"]),
        ("evaluate", vec!["evaluate", "--scenario", &sc, "--mesh", &cone, "--poses", "GRID"]),
        ("baseline gn", vec!["baseline", "gn", "--mesh", &cone, "--seed", "1", "--scenario", &sc, "--out", "{out}"]),
        ("baseline ga", vec!["baseline", "ga", "--scenario", &sc, "--mesh", &cone, "--population", "6", "--generations", "3", "--out", "{out}"]),
        ("defense", vec!["defense", "--scenario", &sc, "--mesh", &cone, "--benign", &cone, "--defense", "bit-depth", "--sweep", "2,5", "--out", "{out}"]),
        ("printability", vec!["printability", "--mesh", &cone]),
    ];
    let grid = p("grid.txt");
    let mut differing = Vec::new();
    for (i, (name, args)) in cases.iter().enumerate() {
        let runs: Vec<_> = (0..2)
            .map(|k| {
                let out = p(&format!("run{i}_{k}"));
                let args: Vec<String> = args.iter().map(|a| a.replace("{out}", &out).replace("GRID", &grid)).collect();
                let (code, stdout) = cli(&args);
                (code, stdout, tree(Path::new(&out)))
            })
            .collect();
        if runs[0] != runs[1] || runs[0].0 == 1 {
            differing.push(*name);
        }
    }
    let detail = if differing.is_empty() {
        format!("{} subcommands, outputs byte-identical across two runs", cases.len())
    } else {
        format!("differing or failing: {}", differing.join(", "))
    };
    outcome(differing.is_empty(), detail)
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Duration,
}

fn run(c: &Criterion, f: impl FnOnce() -> Outcome, lines: &mut Vec<(u8, bool)>) {
    let start = Instant::now();
    let o = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    let t = start.elapsed();
    let pass = o.pass && t <= c.limit;
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {:>2} {verdict} {}: {} [{:.1} s, limit {} s]", c.id, c.name, o.detail, t.as_secs_f64(), c.limit.as_secs());
    lines.push((c.id, pass));
}

fn crit(id: u8, name: &'static str, secs: u64) -> Criterion {
    Criterion { id, name, limit: Duration::from_secs(secs) }
}

fn main() {
    // `cargo test -- --list` and filters from other targets land here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if args.iter().any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut lines = Vec::new();
    run(&crit(1, "worked softPI example", 1), worked_example, &mut lines);
    run(&crit(2, "trilinear partition of unity", 5), partition_of_unity, &mut lines);
    run(&crit(3, "soft vs hard counts", 10), soft_vs_hard_counts, &mut lines);
    run(&crit(4, "gradient suite", 120), gradient_checks, &mut lines);
    run(&crit(5, "PGD contract", 600), pgd_contract, &mut lines);
    let g = golden();
    let mut golden_mesh = None;
    run(
        &crit(6, "golden attack run", 900),
        || {
            let (o, r) = golden_run(&g);
            golden_mesh = Some(r);
            o
        },
        &mut lines,
    );
    let pgd = golden_mesh.unwrap_or_else(|| g.cone.clone());
    run(&crit(7, "baseline ordering", 1800), || baseline_ordering(&g, &pgd), &mut lines);
    run(&crit(8, "geometry oracles", 60), geometry, &mut lines);
    run(&crit(9, "defense contracts", 60), || defense_contracts(&g, &pgd), &mut lines);
    run(&crit(10, "CLI determinism", 600), cli_determinism, &mut lines);

    let unexpected: Vec<u8> = lines.iter().filter(|(id, pass)| !pass && !KNOWN_RED.contains(id)).map(|l| l.0).collect();
    let passing_red: Vec<u8> = lines.iter().filter(|(id, pass)| *pass && KNOWN_RED.contains(id)).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} pass; known red {:?}",
        lines.iter().filter(|l| l.1).count(),
        lines.len(),
        KNOWN_RED.iter().filter(|id| !passing_red.contains(id)).collect::<Vec<_>>()
    );
    if !passing_red.is_empty() {
        println!("criteria {passing_red:?} now pass; drop them from KNOWN_RED");
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
