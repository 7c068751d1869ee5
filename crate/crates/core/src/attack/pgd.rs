use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::TriMesh;

use super::config::AttackConfig;
use super::loss::objective_and_gradient;
use super::pipeline::{verification_poses, verify, PoseVerdict, SceneContext, Surrogates};

/// `benign + d` with `d` clamped to `[-eps, eps]`, nudged by ulps so the
/// stored deviation `|result - benign|` never exceeds `eps` after rounding.
fn clamp_coordinate(benign: f64, target: f64, eps: f64) -> f64 {
    let mut v = benign + (target - benign).clamp(-eps, eps);
    while (v - benign).abs() > eps {
        v = if v > benign { next_down(v) } else { next_up(v) };
    }
    v
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

/// Projection of arbitrary positions onto the L∞ ball of radius `eps` around `benign`.
pub fn project_linf(positions: &[[f64; 3]], benign: &TriMesh, eps: f64) -> Result<TriMesh> {
    let v = positions
        .iter()
        .zip(benign.vertices())
        .map(|(p, b)| [0, 1, 2].map(|k| clamp_coordinate(b[k], p[k], eps)))
        .collect();
    benign.with_vertices(v)
}

/// One gradient step of size `learning_rate` followed by the L∞ projection.
pub fn pgd_step(mesh: &TriMesh, benign: &TriMesh, gradient: &[[f64; 3]], c: &AttackConfig) -> Result<TriMesh> {
    mesh.same_topology(benign)?;
    if gradient.len() != mesh.vertices().len() {
        return Err(Error::TopologyMismatch(format!("{} gradients for {} vertices", gradient.len(), mesh.vertices().len())));
    }
    if let Some(i) = gradient.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite { op: "pgd gradient".into(), node: i });
    }
    let moved: Vec<[f64; 3]> = mesh
        .vertices()
        .iter()
        .zip(gradient)
        .map(|(v, g)| [0, 1, 2].map(|k| v[k] - c.learning_rate * g[k]))
        .collect();
    project_linf(&moved, benign, c.epsilon)
}

/// Mean per-vertex ℓ1 and ℓ2 displacement and the largest per-coordinate
/// displacement, all in centimeters.
pub fn perturbation_stats(mesh: &TriMesh, benign: &TriMesh) -> Result<(f64, f64, f64)> {
    mesh.same_topology(benign)?;
    let n = mesh.vertices().len().max(1) as f64;
    let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
    for (a, b) in mesh.vertices().iter().zip(benign.vertices()) {
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        l1 += d.iter().map(|x| x.abs()).sum::<f64>();
        l2 += d.iter().map(|x| x * x).sum::<f64>().sqrt();
        linf = d.iter().fold(linf, |m, x| m.max(x.abs()));
    }
    Ok((100.0 * l1 / n, 100.0 * l2 / n, 100.0 * linf))
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub adversarial: f64,
    pub realizability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub seed: u64,
    /// Gradient steps taken.
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Verification-grid outcome of the returned mesh.
    pub final_poses: Vec<PoseVerdict>,
    pub success: bool,
    /// Set when the benign object was already undetected at every pose.
    pub degenerate: bool,
    pub delta_l1_cm: f64,
    pub delta_l2_cm: f64,
    pub delta_linf_cm: f64,
    /// Not serialized, so the JSON report is reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// `iteration,objective,adversarial,realizability` rows.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,adversarial,realizability\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{},{}\n", r.iteration, r.objective, r.adversarial, r.realizability));
        }
        s
    }
}

fn all_undetected(v: &[PoseVerdict]) -> bool {
    v.iter().all(|p| !p.detected)
}

/// PGD with EoT from a seeded random start until no verification pose
/// detects the object or `max_iters` steps have been taken.
pub fn run_attack(
    benign: &TriMesh,
    ctx: &SceneContext,
    c: &AttackConfig,
    s: &Surrogates,
    seed: u64,
) -> Result<(TriMesh, AttackReport)> {
    c.validate()?;
    let start = Instant::now();
    let s = Surrogates { weights: s.weights.clone(), geometry: s.geometry.with_config(c)? };
    let poses = verification_poses(c);
    let finish = |mesh: TriMesh, iterations: usize, trace: Vec<IterationRecord>, final_poses: Vec<PoseVerdict>, degenerate: bool| {
        let (l1, l2, linf) = perturbation_stats(&mesh, benign)?;
        let report = AttackReport {
            seed,
            iterations,
            trace,
            success: all_undetected(&final_poses),
            final_poses,
            degenerate,
            delta_l1_cm: l1,
            delta_l2_cm: l2,
            delta_linf_cm: linf,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((mesh, report))
    };

    let benign_check = verify(benign, benign, ctx, &s, &poses)?;
    if all_undetected(&benign_check) {
        return finish(benign.clone(), 0, Vec::new(), benign_check, true);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<[f64; 3]> = benign
        .vertices()
        .iter()
        .map(|v| [0, 1, 2].map(|k| v[k] + if c.pgd_init > 0.0 { rng.gen_range(-c.pgd_init..=c.pgd_init) } else { 0.0 }))
        .collect();
    let mut mesh = project_linf(&init, benign, c.epsilon)?;
    let mut trace = Vec::new();
    let mut verdicts = None;
    for it in 0..c.max_iters {
        let eot_seed: u64 = rng.gen();
        let e = objective_and_gradient(&mesh, benign, ctx, c, &s, eot_seed)?;
        if !e.value.is_finite() {
            return Err(Error::AttackAborted { iteration: it, reason: format!("objective is {}", e.value) });
        }
        trace.push(IterationRecord { iteration: it, objective: e.value, adversarial: e.adversarial, realizability: e.realizability });
        mesh = pgd_step(&mesh, benign, &e.gradient, c).map_err(|err| Error::AttackAborted { iteration: it, reason: err.to_string() })?;
        if (it + 1) % c.verify_every == 0 || it + 1 == c.max_iters {
            let v = verify(&mesh, benign, ctx, &s, &poses)?;
            let done = all_undetected(&v);
            verdicts = Some(v);
            if done {
                break;
            }
        }
    }
    let iterations = trace.len();
    let final_poses = match verdicts {
        Some(v) => v,
        None => verify(&mesh, benign, ctx, &s, &poses)?,
    };
    finish(mesh, iterations, trace, final_poses, false)
}
