//! One probe set per differentiable operation plus directional checks of the
//! composed chains. Shared by the gradient tests and the acceptance target.

use msfadv::attack::{
    bev_features, calibrate_surrogates, evaluate_pose, lift_vertices, objective, objective_and_gradient, place,
    realizability_loss_with, render_pose, sample_poses, synthetic_scenario, AttackConfig, DetectorGeometry, Placement,
    PoseSetup, SceneContext, Surrogates,
};
use msfadv::diff::{eval_plain, finite_diff_check, gradient, scalar_fn, Scalar, Var, V3};
use msfadv::features::{bev_aggregate, derive_features, soft_pi_tanh, soft_pi_trilinear, CellGrid, Channel, FeatureGrid, TanhSharpness};
use msfadv::geometry::shapes::{icosphere, tetrahedron, traffic_cone, ConeParams};
use msfadv::geometry::{vertex_neighbors, TriMesh};
use msfadv::sensor::{project_point, ray_triangle_intersect, render_camera, render_camera_with, Calibration, Image, LidarPoint, LidarSpec, SensorImage};
use msfadv::surrogate::{
    camera_confidence, lidar_confidence, normalize_template, CellRect, DetectionRegion, PixelRect, SurrogateWeights,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROBES: usize = 20;
pub const OP_TOL: f64 = 1e-4;
pub const CHAIN_TOL: f64 = 1e-3;

/// Largest coordinate error over the largest gradient magnitude.
fn vector_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

fn probe_error<F>(f: &F, x: &[f64], h: f64) -> f64
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let c = finite_diff_check(f, x, h).unwrap();
    assert!(c.analytic.iter().any(|g| *g != 0.0), "zero gradient at {x:?}");
    vector_error(&c.analytic, &c.numeric)
}

pub struct Check {
    pub name: &'static str,
    pub probes: usize,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.probes >= PROBES && self.worst < self.tol
    }
}

fn report(name: &'static str, errors: &[f64], tol: f64) -> Check {
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Check { name, probes: errors.len(), worst, tol }
}

fn check_op<F>(name: &'static str, f: &F, probes: &[Vec<f64>], h: f64) -> Check
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let errors: Vec<f64> = probes.iter().map(|x| probe_error(f, x, h)).collect();
    report(name, &errors, OP_TOL)
}

/// Analytic and central-difference derivative of `f` along `u`.
fn directional<F>(f: &F, x: &[f64], u: &[f64], h: f64) -> (f64, f64)
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let (_, g) = gradient(f, x).unwrap();
    let a = g.iter().zip(u).map(|(g, u)| g * u).sum();
    let at = |s: f64| -> Vec<f64> { x.iter().zip(u).map(|(x, u)| x + s * u).collect() };
    (a, (eval_plain(f, &at(h)) - eval_plain(f, &at(-h))) / (2.0 * h))
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-12)
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.into_iter().map(|v| v / norm).collect()
}

fn v3s<'t>(xs: &[Var<'t>]) -> Vec<V3<Var<'t>>> {
    xs.chunks(3).map(|c| V3([c[0], c[1], c[2]])).collect()
}

fn flat(m: &TriMesh) -> Vec<f64> {
    m.vertices().iter().flatten().copied().collect()
}

pub fn scalar_primitives() -> Check {
    let f = scalar_fn(|v| {
        let m = v[1].max(v[2] * 0.5);
        v[0].tanh() * v[1].sigmoid() + (v[2] * 0.3).exp() + (v[3] * v[3] + 1.0).sqrt() + v[4].abs() * v[0] + m.sq() - v[3].min(v[4]) / 3.0
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probes: Vec<Vec<f64>> = (0..PROBES)
        .map(|_| {
            // keep |x4| and the max/min arguments away from their kinks
            let mut x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            x[4] = x[4].signum() * x[4].abs().max(0.2);
            x[1] = x[2] * 0.5 + (x[1] - x[2] * 0.5).signum() * 0.2f64.max((x[1] - x[2] * 0.5).abs());
            x[3] = x[4] + (x[3] - x[4]).signum() * 0.2f64.max((x[3] - x[4]).abs());
            x
        })
        .collect();
    check_op("scalar primitives", &f, &probes, 1e-6)
}

fn feature_grid() -> CellGrid {
    CellGrid::new([0.0, 0.0, 0.0], [0.25, 0.25, 0.25], [4, 4, 3]).unwrap()
}

/// Random point at least `margin` from every cell centre plane.
fn point_off_centres(rng: &mut ChaCha8Rng, g: &CellGrid, lo: [f64; 3], hi: [f64; 3], margin: f64) -> [f64; 3] {
    loop {
        let p = [0, 1, 2].map(|k| rng.gen_range(lo[k]..hi[k]));
        let ok = (0..3).all(|k| {
            let r = (p[k] - g.origin[k]) / g.dims[k] - 0.5;
            (r - r.round()).abs() * g.dims[k] > margin
        });
        if ok {
            return p;
        }
    }
}

pub fn trilinear_inclusion() -> Check {
    let g = feature_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let weights: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let probes: Vec<Vec<f64>> =
        (0..PROBES).map(|_| point_off_centres(&mut rng, &g, [0.2, 0.2, 0.2], [0.8, 0.8, 0.55], 1e-3).to_vec()).collect();
    let f = scalar_fn(|v| {
        let q = [v[0], v[1], v[2]];
        let cells = g.enclosing([v[0].val(), v[1].val(), v[2].val()]);
        let terms: Vec<(Var, f64)> = cells.iter().map(|&c| (soft_pi_trilinear(&q, &g, c), weights[g.index(c)])).collect();
        Var::linear(&terms)
    });
    check_op("trilinear softPI", &f, &probes, 1e-6)
}

pub fn tanh_inclusion() -> Check {
    let g = feature_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let weights: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut errors = Vec::new();
    for mu in [20.0, 100.0] {
        let s = TanhSharpness::new(mu).unwrap();
        let probes: Vec<Vec<f64>> =
            (0..PROBES).map(|_| point_off_centres(&mut rng, &g, [0.2, 0.2, 0.2], [0.8, 0.8, 0.55], 1e-3).to_vec()).collect();
        let f = scalar_fn(|v| {
            let q = [v[0], v[1], v[2]];
            let cells = g.enclosing([v[0].val(), v[1].val(), v[2].val()]);
            let terms: Vec<(Var, f64)> = cells.iter().map(|&c| (soft_pi_tanh(&q, &g, c, s), weights[g.index(c)])).collect();
            Var::linear(&terms)
        });
        errors.extend(probes.iter().map(|x| probe_error(&f, x, 1e-7)));
    }
    report("tanh softPI (mu 20 and 100)", &errors, OP_TOL)
}

/// Weighted sum of the channels that are smooth in the point positions.
fn smooth_channel_sum<'t>(f: &FeatureGrid<Var<'t>>, weights: &[f64]) -> Var<'t> {
    let mut terms = Vec::new();
    for (ci, c) in [Channel::Count, Channel::Density, Channel::HeightMax, Channel::HeightMean, Channel::IntensityMean].into_iter().enumerate() {
        for (i, v) in f.channel(c).iter().enumerate() {
            terms.push((*v, weights[(ci * 131 + i) % weights.len()]));
        }
    }
    Var::linear(&terms)
}

fn feature_probes(seed: u64, n_points: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let g = feature_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes = (0..PROBES)
        .map(|_| (0..n_points).flat_map(|_| point_off_centres(&mut rng, &g, [0.15, 0.15, 0.1], [0.85, 0.85, 0.6], 2e-3)).collect())
        .collect();
    let intensities = (0..n_points).map(|_| rng.gen_range(0.0..1.0)).collect();
    (probes, intensities)
}

fn lidar_points<'t>(xs: &[Var<'t>], intensities: &[f64]) -> Vec<LidarPoint<Var<'t>>> {
    xs.chunks(3).zip(intensities).map(|(c, &i)| LidarPoint { xyz: [c[0], c[1], c[2]], intensity: Var::constant(i) }).collect()
}

pub fn cell_features() -> Check {
    let g = feature_grid();
    let (probes, intensities) = feature_probes(4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let weights: Vec<f64> = (0..257).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = scalar_fn(|v| {
        let fg = derive_features(&lidar_points(v, &intensities), &g, TanhSharpness::new(30.0).unwrap(), 1e-7).unwrap();
        smooth_channel_sum(&fg, &weights)
    });
    check_op("cell features", &f, &probes, 1e-7)
}

pub fn bev_aggregated_features() -> Check {
    let g = feature_grid();
    let (probes, intensities) = feature_probes(5, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let weights: Vec<f64> = (0..257).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = scalar_fn(|v| {
        let fg = derive_features(&lidar_points(v, &intensities), &g, TanhSharpness::new(30.0).unwrap(), 1e-7).unwrap();
        smooth_channel_sum(&bev_aggregate(&fg, 1e-7), &weights)
    });
    check_op("BEV aggregation", &f, &probes, 1e-7)
}

pub fn laplacian_realizability() -> Check {
    let benign = icosphere(1.0, 1);
    let nb = vertex_neighbors(&benign);
    let f = scalar_fn(|v| realizability_loss_with(&v3s(v), &benign, &nb, 0.3).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| flat(&benign).iter().map(|c| c + rng.gen_range(-0.02..0.02)).collect()).collect();
    check_op("realizability", &f, &probes, 1e-6)
}

pub fn ray_intersection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = [[3.0, -1.0, -1.0], [3.2, 1.5, -0.8], [2.9, -0.7, 1.4]];
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| base.iter().flatten().map(|c| c + rng.gen_range(-0.1..0.1)).collect()).collect();
    let dir = {
        let d = [3.0, -0.05, -0.1];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
        d.map(|c| c / n.sqrt())
    };
    let f = scalar_fn(|v| {
        let t = v3s(v);
        let hit = ray_triangle_intersect([0.0; 3], dir, &[t[0], t[1], t[2]]).expect("ray hits");
        hit.t + hit.b1 * 0.37 - hit.b2 * 0.61
    });
    check_op("ray/triangle", &f, &probes, 1e-6)
}

pub fn rigid_placement_and_projection() -> Check {
    let calib = Calibration::pinhole(500.0, 320.0, 240.0, [0.0, 0.0, -0.08]);
    let pose = Placement::new(11.0, -0.2, 3.5);
    let f = scalar_fn(|v| {
        let p = place(&V3([v[0], v[1], v[2]]), &pose, -1.73);
        let [u, w] = project_point(&calib, &p).unwrap();
        u + w * 0.5 + p.z() * 2.0
    });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..1.0)]).collect();
    check_op("placement + projection", &f, &probes, 1e-6)
}

fn small_camera() -> (SensorImage, Calibration) {
    let (w, h) = (64, 48);
    let mut img = Image::filled(w, h, [0.0; 3]);
    for y in 0..h {
        for x in 0..w {
            img.set_pixel(x, y, [0.2 + 0.005 * x as f64, 0.3, 0.5 - 0.004 * y as f64]);
        }
    }
    (img, Calibration::pinhole(60.0, 32.0, 24.0, [0.0; 3]))
}

pub fn soft_rasterizer() -> Check {
    let (bg, calib) = small_camera();
    let tet = tetrahedron([4.0, 0.0, 0.0], 1.2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| flat(&tet).iter().map(|c| c + rng.gen_range(-0.05..0.05)).collect()).collect();
    let mut errors = Vec::new();
    for x in &probes {
        let mesh = tet.with_vertices(x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()).unwrap();
        let fwd = render_camera(&mesh, &bg, &calib, [1.0, 0.45, 0.1], 0.7).unwrap();
        // pixels well inside the coverage cut-off; the rest never move
        let mask: Vec<(usize, f64)> = fwd
            .footprint
            .iter()
            .filter(|p| p.2 > 0.01)
            .map(|p| (bg.idx(p.0, p.1), rng.gen_range(-1.0..1.0)))
            .collect();
        assert!(mask.len() > 50);
        let f = scalar_fn(|v| {
            let r = render_camera_with(&v3s(v), tet.faces(), &bg, &calib, [1.0, 0.45, 0.1], 0.7).unwrap();
            let terms: Vec<(Var, f64)> = mask.iter().flat_map(|&(i, w)| (0..3).map(move |c| (i + c, w))).map(|(i, w)| (r.image.data[i], w)).collect();
            Var::linear(&terms)
        });
        errors.push(probe_error(&f, x, 1e-7));
    }
    report("soft rasterizer", &errors, OP_TOL)
}

fn test_weights(rng: &mut ChaCha8Rng) -> SurrogateWeights {
    let raw: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
    SurrogateWeights {
        lidar_weights: [2.0, -0.3, 1.1, 0.8],
        lidar_bias: -1.0,
        camera_scale: 5.0,
        camera_bias: -1.0,
        tau_lidar: 0.5,
        tau_camera: 0.5,
        template_width: 8,
        template_height: 8,
        template: normalize_template(&raw).unwrap(),
    }
}

pub fn camera_confidence_of_pixels() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let w = test_weights(&mut rng);
    let region = DetectionRegion { bev: CellRect { i0: 0, j0: 0, i1: 1, j1: 1 }, image: PixelRect { x0: 2, y0: 3, x1: 15, y1: 14 } };
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| (0..16 * 16 * 3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let f = scalar_fn(|v| {
        let img = Image { width: 16, height: 16, data: v.to_vec() };
        camera_confidence(&img, &region, &w).unwrap()
    });
    check_op("camera confidence", &f, &probes, 1e-6)
}

pub fn lidar_confidence_of_features() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = test_weights(&mut rng);
    let grid = CellGrid::new([0.0; 3], [0.25, 0.25, 1.25], [5, 5, 1]).unwrap();
    let region = DetectionRegion { bev: CellRect { i0: 1, j0: 1, i1: 4, j1: 4 }, image: PixelRect { x0: 0, y0: 0, x1: 1, y1: 1 } };
    let chans = [Channel::Occupancy, Channel::Count, Channel::HeightMax, Channel::IntensityMean];
    let probes: Vec<Vec<f64>> = (0..PROBES).map(|_| (0..4 * 25).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let f = scalar_fn(|v| {
        let mut fg = FeatureGrid::<Var>::zeros(grid);
        for (k, c) in chans.iter().enumerate() {
            fg.channel_mut(*c).copy_from_slice(&v[25 * k..25 * (k + 1)]);
        }
        lidar_confidence(&fg, &region, &w).unwrap()
    });
    check_op("LiDAR confidence", &f, &probes, 1e-6)
}

struct Golden {
    ctx: SceneContext,
    cone: TriMesh,
    s: Surrogates,
}

fn golden() -> Golden {
    let ctx = SceneContext::new(synthetic_scenario(), LidarSpec::default());
    let cone = traffic_cone(ConeParams::default(), 0.0, 0.0, 0.0);
    let s = calibrate_surrogates(&cone, &ctx, &DetectorGeometry::default()).unwrap();
    Golden { ctx, cone, s }
}

fn jittered(m: &TriMesh, rng: &mut ChaCha8Rng, a: f64) -> Vec<f64> {
    flat(m).iter().map(|c| c + rng.gen_range(-a..a)).collect()
}

pub fn camera_chain_end_to_end() -> Check {
    let g = golden();
    let poses = sample_poses(&AttackConfig { samples: PROBES, ..AttackConfig::default() }, 77);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut errors = Vec::new();
    for pose in poses {
        let setup = PoseSetup::new(&g.cone, &g.ctx.scenario, &g.s.geometry, pose).unwrap();
        let x = jittered(&g.cone, &mut rng, 0.01);
        let u = unit_direction(&mut rng, x.len());
        let f = scalar_fn(|v| evaluate_pose(&v3s(v), g.cone.faces(), &g.ctx, &g.s, &setup).unwrap().1);
        let (a, n) = directional(&f, &x, &u, 1e-7);
        assert!(a != 0.0);
        errors.push(rel(a, n));
    }
    report("camera chain", &errors, CHAIN_TOL)
}

/// Weights with the straight-through occupancy term switched off.
fn without_occupancy(s: &Surrogates) -> Surrogates {
    let mut w = s.weights.clone();
    w.lidar_weights[0] = 0.0;
    Surrogates { weights: w, geometry: s.geometry.clone() }
}

pub fn lidar_chain_from_points() -> Check {
    let g = golden();
    let s = without_occupancy(&g.s);
    let poses = sample_poses(&AttackConfig { samples: 3 * PROBES, ..AttackConfig::default() }, 78);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut errors = Vec::new();
    for pose in poses {
        let setup = PoseSetup::new(&g.cone, &g.ctx.scenario, &s.geometry, pose).unwrap();
        let inputs = render_pose(&lift_vertices::<f64>(&g.cone), g.cone.faces(), &g.ctx, &s.geometry, &setup).unwrap();
        let intensities: Vec<f64> = inputs.points.iter().map(|p| p.intensity).collect();
        // flat caps put many returns at one height; jitter them off the max ties
        let x: Vec<f64> = inputs.points.iter().flat_map(|p| p.xyz).map(|c| c + rng.gen_range(-1e-4..1e-4)).collect();
        let u = unit_direction(&mut rng, x.len());
        let f = scalar_fn(|v| {
            let bev = bev_features(&lidar_points(v, &intensities), &s.geometry, &setup).unwrap();
            lidar_confidence(&bev, &setup.region, &s.weights).unwrap()
        });
        let (a, n) = directional(&f, &x, &u, 1e-7);
        if a == 0.0 && n == 0.0 {
            // nothing in the detection region at this pose
            continue;
        }
        errors.push(rel(a, n));
        if errors.len() == PROBES {
            break;
        }
    }
    report("LiDAR chain", &errors, CHAIN_TOL)
}

pub fn full_objective_end_to_end() -> Check {
    let g = golden();
    let mut s = g.s.clone();
    // the LiDAR branch moves hit points with the surface and passes occupancy
    // straight through, neither of which central differences can see
    s.weights.lidar_weights = [0.0; 4];
    let c = AttackConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut errors = Vec::new();
    for seed in 0..PROBES as u64 {
        let x = jittered(&g.cone, &mut rng, 0.01);
        let mesh = g.cone.with_vertices(x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()).unwrap();
        let e = objective_and_gradient(&mesh, &g.cone, &g.ctx, &c, &s, seed).unwrap();
        assert!((e.value - objective(&mesh, &g.cone, &g.ctx, &c, &s, seed).unwrap()).abs() < 1e-12);
        let u = unit_direction(&mut rng, x.len());
        let h = 1e-7;
        let at = |sg: f64| {
            let v = x.chunks(3).zip(u.chunks(3)).map(|(p, d)| [0, 1, 2].map(|k| p[k] + sg * h * d[k])).collect();
            objective(&g.cone.with_vertices(v).unwrap(), &g.cone, &g.ctx, &c, &s, seed).unwrap()
        };
        let n = (at(1.0) - at(-1.0)) / (2.0 * h);
        let a: f64 = e.gradient.iter().flatten().zip(&u).map(|(g, u)| g * u).sum();
        errors.push(rel(a, n));
    }
    report("objective", &errors, CHAIN_TOL)
}
