use std::fs;
use std::path::{Path, PathBuf};

use msfadv::attack::{
    calibrate_surrogates, format_config, load_config, objective, parse_poses, place_mesh, run_attack, synthetic_scenario,
    verify, AttackConfig, DetectorGeometry, PoseVerdict, Scenario, SceneContext, Surrogates,
};
use msfadv::baselines::{ga_attack, gn_attack, GaConfig};
use msfadv::defenses::{evaluate_defense, sweep_csv, undefended_rates, DefenseKind, DefenseTarget};
use msfadv::features::{bev_aggregate, derive_features, save_feature_grid, Aabb, CellGrid};
use msfadv::geometry::shapes::{traffic_cone, ConeParams};
use msfadv::geometry::{angle_deficit_sum, load_obj, mean_gaussian_curvature, save_obj, self_intersection_ratio, watertightness, TriMesh};
use msfadv::sensor::{render_camera, render_lidar, save_point_cloud, save_ppm, LidarPoint, LidarSpec};
use msfadv::surrogate::save_weights;
use msfadv::{Error, Result};

use crate::{AttackArgs, Baseline, Command, DefenseArgs, DefenseName, Outcome, TargetName};

pub(crate) fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Synth { out } => synth(&out),
        Command::Attack(a) => attack(a),
        Command::Render { scenario, mesh, out } => render(&scenario, &mesh, &out),
        Command::Evaluate { scenario, mesh, poses, benign, config } => evaluate(&scenario, &mesh, &poses, benign.as_deref(), config.as_deref()),
        Command::Baseline(b) => baseline(b),
        Command::Defense(d) => defense(d),
        Command::Printability { mesh } => printability(&mesh),
    }
}

fn out_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn config(path: Option<&Path>) -> Result<AttackConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(AttackConfig::default()),
    }
}

fn context(scenario: &Path) -> Result<SceneContext> {
    Ok(SceneContext::new(Scenario::load(scenario)?, LidarSpec::default()))
}

fn surrogates(benign: &TriMesh, ctx: &SceneContext, c: &AttackConfig) -> Result<Surrogates> {
    calibrate_surrogates(benign, ctx, &DetectorGeometry::default().with_config(c)?)
}

fn synth(out: &Path) -> Result<Outcome> {
    out_dir(out)?;
    synthetic_scenario().save(out)?;
    save_obj(&traffic_cone(ConeParams::default(), 0.0, 0.0, 0.0), out.join("cone.obj"))?;
    write(out.join("attack.cfg"), &format_config(&AttackConfig::default()))?;
    Ok(Outcome::Success)
}

fn attack(a: AttackArgs) -> Result<Outcome> {
    let mut c = config(a.config.as_deref())?;
    if let Some(n) = a.max_iters {
        c.max_iters = n;
    }
    let benign = load_obj(&a.mesh)?;
    let ctx = context(&a.scenario)?;
    let s = surrogates(&benign, &ctx, &c)?;
    let (adv, report) = run_attack(&benign, &ctx, &c, &s, a.seed)?;
    out_dir(&a.out)?;
    save_obj(&adv, a.out.join("adv.obj"))?;
    save_weights(&s.weights, a.out.join("weights.txt"))?;
    write(a.out.join("report.json"), &report.to_json())?;
    write(a.out.join("trace.csv"), &report.trace_csv())?;
    eprintln!(
        "{} after {} iterations in {:.1} s",
        if report.success { "success" } else { "no success" },
        report.iterations,
        report.wall_time_s
    );
    Ok(if report.success { Outcome::Success } else { Outcome::Unsuccessful })
}

/// Ground-referenced BEV features of a 4 m square around the placement.
fn feature_dump(points: &[LidarPoint], scenario: &Scenario, g: &DetectorGeometry) -> Result<msfadv::features::FeatureGrid> {
    let (cells, layers) = (16usize, 8usize);
    let half = cells as f64 * g.cell / 2.0;
    let p = scenario.placement;
    let grid = CellGrid::new(
        [p.x - half, p.y - half, g.ground_clearance],
        [g.cell, g.cell, g.cell_height],
        [cells, cells, layers],
    )?;
    let up = grid.upper();
    let roi = Aabb::new(grid.origin, up)?;
    let shifted: Vec<LidarPoint> = points
        .iter()
        .map(|q| LidarPoint { xyz: [q.xyz[0], q.xyz[1], q.xyz[2] - scenario.ground_z], intensity: q.intensity })
        .filter(|q| roi.contains(q.xyz))
        .collect();
    let f = derive_features(&shifted, &grid, g.sharpness, g.eps_div)?;
    Ok(bev_aggregate(&f, g.eps_div))
}

fn render(scenario: &Path, mesh: &Path, out: &Path) -> Result<Outcome> {
    let mesh = load_obj(mesh)?;
    let sc = Scenario::load(scenario)?;
    let g = DetectorGeometry::default();
    let placed = place_mesh(&mesh, &sc.placement, sc.ground_z);
    let pc = render_lidar(&placed, &sc.background, &LidarSpec::default());
    let img = render_camera(&placed, &sc.image, &sc.calib, g.albedo, g.blur_sigma)?;
    let features = feature_dump(&pc.points, &sc, &g)?;
    out_dir(out)?;
    save_point_cloud(&pc, out.join("pc_adv.bin"))?;
    save_ppm(&img.image, out.join("image_adv.ppm"))?;
    save_feature_grid(&features, out.join("bev_features.txt"))?;
    Ok(Outcome::Success)
}

fn verdict_table(v: &[PoseVerdict]) -> String {
    let mut s = String::from("x y yaw_deg lidar camera detected\n");
    for p in v {
        s.push_str(&format!("{} {} {} {:.6} {:.6} {}\n", p.pose.x, p.pose.y, p.pose.yaw_deg, p.lidar, p.camera, p.detected));
    }
    let missed = v.iter().filter(|p| !p.detected).count();
    s.push_str(&format!("success_rate {:.6} ({missed}/{} undetected)\n", missed as f64 / v.len() as f64, v.len()));
    s
}

fn evaluate(scenario: &Path, mesh: &Path, poses: &Path, benign: Option<&Path>, cfg: Option<&Path>) -> Result<Outcome> {
    let c = config(cfg)?;
    let mesh = load_obj(mesh)?;
    let benign = match benign {
        Some(b) => load_obj(b)?,
        None => mesh.clone(),
    };
    let path = poses;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let poses = parse_poses(&text)?;
    if poses.is_empty() {
        return Err(Error::InvalidArgument(format!("poses file {} lists no poses", path.display())));
    }
    for p in &poses {
        if p.x < c.x_range.0 || p.x > c.x_range.1 {
            eprintln!("warning: pose x = {} is outside the EoT range [{}, {}]", p.x, c.x_range.0, c.x_range.1);
        }
    }
    let ctx = context(scenario)?;
    let s = surrogates(&benign, &ctx, &c)?;
    let v = verify(&mesh, &benign, &ctx, &s, &poses)?;
    print!("{}", verdict_table(&v));
    Ok(Outcome::Success)
}

fn baseline(b: Baseline) -> Result<Outcome> {
    match b {
        Baseline::Gn { mesh, sigma, seed, out, scenario, config: cfg } => {
            let benign = load_obj(&mesh)?;
            let noisy = gn_attack(&benign, sigma, seed)?;
            let mut report = serde_json::json!({ "seed": seed, "sigma": sigma });
            if let Some(sc) = scenario {
                let c = config(cfg.as_deref())?;
                let ctx = context(&sc)?;
                let s = surrogates(&benign, &ctx, &c)?;
                report["objective"] = serde_json::json!(objective(&noisy, &benign, &ctx, &c, &s, seed)?);
            }
            out_dir(&out)?;
            save_obj(&noisy, out.join("gn.obj"))?;
            write(out.join("gn.json"), &pretty(&report))?;
            Ok(Outcome::Success)
        }
        Baseline::Ga { scenario, mesh, config: cfg, seed, out, population, generations } => {
            let c = config(cfg.as_deref())?;
            let benign = load_obj(&mesh)?;
            let ctx = context(&scenario)?;
            let s = surrogates(&benign, &ctx, &c)?;
            let ga = GaConfig { population, generations, bound: c.epsilon, ..GaConfig::default() };
            let r = ga_attack(&benign, &ctx, &c, &ga, &s, seed)?;
            let report = serde_json::json!({
                "seed": seed,
                "population": population,
                "generations": generations,
                "best_fitness": r.best_fitness,
                "evaluations": r.evaluations,
            });
            out_dir(&out)?;
            save_obj(&r.mesh, out.join("ga.obj"))?;
            write(out.join("ga_trace.csv"), &r.trace_csv())?;
            write(out.join("ga.json"), &pretty(&report))?;
            Ok(Outcome::Success)
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

fn parse_sweep(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u32>().map_err(|_| Error::InvalidArgument(format!("bad sweep value `{t}`"))))
        .collect()
}

fn defense(d: DefenseArgs) -> Result<Outcome> {
    let (kind, params) = match (d.defense, d.sweep.as_deref(), d.bits, d.kernel) {
        (_, _, Some(b), _) => (DefenseKind::BitDepth, vec![b]),
        (_, _, _, Some(k)) => (DefenseKind::Median, vec![k]),
        (Some(name), Some(sweep), None, None) => {
            let kind = match name {
                DefenseName::BitDepth => DefenseKind::BitDepth,
                DefenseName::Median => DefenseKind::Median,
            };
            (kind, parse_sweep(sweep)?)
        }
        _ => return Err(Error::InvalidArgument("give --bits, --kernel, or --defense with --sweep".into())),
    };
    let target = match d.target {
        TargetName::Camera => DefenseTarget::Camera,
        TargetName::Lidar => DefenseTarget::Lidar,
        TargetName::Both => DefenseTarget::Both,
    };
    let c = config(d.config.as_deref())?;
    let adv = load_obj(&d.mesh)?;
    let benign = load_obj(&d.benign)?;
    let ctx = context(&d.scenario)?;
    let s = surrogates(&benign, &ctx, &c)?;
    let poses = msfadv::attack::verification_poses(&c);
    let rows = evaluate_defense(&adv, &benign, &ctx, &s, kind, target, &params, &poses)?;
    let (benign_rate, attack_rate) = undefended_rates(&adv, &benign, &ctx, &s, &poses)?;
    eprintln!("undefended: benign_rate {benign_rate} attack_rate {attack_rate}");
    let csv = sweep_csv(&rows);
    if let Some(out) = d.out {
        out_dir(&out)?;
        write(out.join("defense.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(Outcome::Success)
}

fn printability(mesh: &Path) -> Result<Outcome> {
    let m = load_obj(mesh)?;
    let k = mean_gaussian_curvature(&m);
    println!("watertight {}", watertightness(&m));
    println!("self_intersection_ratio {}", self_intersection_ratio(&m));
    println!("mean_gaussian_curvature {}", k.mean);
    println!("mean_abs_gaussian_curvature {}", k.mean_abs);
    println!("angle_deficit_sum {}", angle_deficit_sum(&m));
    Ok(Outcome::Success)
}
