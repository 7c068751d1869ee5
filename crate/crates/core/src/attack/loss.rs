use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diff::{Scalar, Tape, Var, V3};
use crate::error::{Error, Result};
use crate::geometry::{vertex_neighbors, TriMesh};

use super::config::AttackConfig;
use super::pipeline::{evaluate_pose, lift_vertices, PoseSetup, SceneContext, Surrogates};
use super::scenario::Placement;

/// `conf_l + conf_c` of the object-frame `vertices` at one pose.
pub fn adversarial_loss_with<S: Scalar>(
    vertices: &[V3<S>],
    faces: &[[usize; 3]],
    ctx: &SceneContext,
    s: &Surrogates,
    setup: &PoseSetup,
) -> Result<S> {
    let (l, c) = evaluate_pose(vertices, faces, ctx, s, setup)?;
    Ok(l + c)
}

pub fn adversarial_loss(mesh: &TriMesh, benign: &TriMesh, ctx: &SceneContext, s: &Surrogates, pose: Placement) -> Result<f64> {
    let setup = PoseSetup::new(benign, &ctx.scenario, &s.geometry, pose)?;
    adversarial_loss_with(&lift_vertices::<f64>(mesh), mesh.faces(), ctx, s, &setup)
}

/// Directed-pair Laplacian of the displacements plus the weighted squared
/// change of the lowest vertex height.
pub fn realizability_loss_with<S: Scalar>(
    vertices: &[V3<S>],
    benign: &TriMesh,
    neighbors: &[BTreeSet<usize>],
    beta1: f64,
) -> Result<S> {
    let b = benign.vertices();
    if vertices.len() != b.len() || neighbors.len() != b.len() {
        return Err(Error::TopologyMismatch(format!("{} positions for {} vertices", vertices.len(), b.len())));
    }
    if b.is_empty() {
        return Ok(S::cst(0.0));
    }
    let delta: Vec<[S; 3]> = vertices.iter().zip(b).map(|(v, o)| [0, 1, 2].map(|k| v.0[k] - o[k])).collect();
    let mut terms = Vec::new();
    for (i, ns) in neighbors.iter().enumerate() {
        for &q in ns {
            for k in 0..3 {
                terms.push((delta[i][k] - delta[q][k]).sq());
            }
        }
    }
    let lap = S::sum(&terms);
    let min_adv = vertices.iter().map(|v| v.z()).reduce(S::min).expect("non-empty");
    let min_ben = b.iter().map(|v| v[2]).fold(f64::INFINITY, f64::min);
    Ok(lap + (min_adv - min_ben).sq() * beta1)
}

pub fn realizability_loss(mesh: &TriMesh, benign: &TriMesh, beta1: f64) -> Result<f64> {
    mesh.same_topology(benign)?;
    realizability_loss_with(&lift_vertices::<f64>(mesh), benign, &vertex_neighbors(benign), beta1)
}

/// Uniform draws over the EoT ranges from a generator seeded with `seed`.
pub fn sample_poses(c: &AttackConfig, seed: u64) -> Vec<Placement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |r: (f64, f64)| r.0 + (r.1 - r.0) * rng.gen::<f64>();
    (0..c.samples)
        .map(|_| {
            let x = u(c.x_range);
            let y = u(c.y_range);
            let yaw = u(c.yaw_range);
            Placement::new(x, y, yaw)
        })
        .collect()
}

/// Objective value, its parts, and (when requested) the vertex gradient.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    /// Mean adversarial loss over the EoT samples.
    pub adversarial: f64,
    pub realizability: f64,
    pub gradient: Vec<[f64; 3]>,
}

fn for_config(s: &Surrogates, c: &AttackConfig) -> Result<Surrogates> {
    Ok(Surrogates { weights: s.weights.clone(), geometry: s.geometry.with_config(c)? })
}

/// Mean adversarial loss over seeded EoT poses plus λ times the
/// realizability loss, evaluated once since it does not depend on the pose.
pub fn objective(mesh: &TriMesh, benign: &TriMesh, ctx: &SceneContext, c: &AttackConfig, s: &Surrogates, seed: u64) -> Result<f64> {
    c.validate()?;
    mesh.same_topology(benign)?;
    let s = for_config(s, c)?;
    let poses = sample_poses(c, seed);
    let losses: Vec<f64> = poses
        .par_iter()
        .map(|&pose| adversarial_loss(mesh, benign, ctx, &s, pose))
        .collect::<Result<_>>()?;
    let lr = realizability_loss(mesh, benign, c.beta1)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64 + c.lambda * lr)
}

fn tape_vertices<'t>(tape: &'t Tape, mesh: &TriMesh) -> (Vec<Var<'t>>, Vec<V3<Var<'t>>>) {
    let flat: Vec<f64> = mesh.vertices().iter().flatten().copied().collect();
    let vars = tape.vars(&flat);
    let v3 = vars.chunks(3).map(|c| V3([c[0], c[1], c[2]])).collect();
    (vars, v3)
}

fn unflatten(g: Vec<f64>) -> Vec<[f64; 3]> {
    g.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// [`objective`] with its gradient. Each EoT sample runs on its own tape;
/// per-sample gradients are merged in sample order.
pub fn objective_and_gradient(
    mesh: &TriMesh,
    benign: &TriMesh,
    ctx: &SceneContext,
    c: &AttackConfig,
    s: &Surrogates,
    seed: u64,
) -> Result<ObjectiveEval> {
    c.validate()?;
    mesh.same_topology(benign)?;
    let s = for_config(s, c)?;
    let poses = sample_poses(c, seed);
    let per_sample: Vec<(f64, Vec<f64>)> = poses
        .par_iter()
        .map(|&pose| {
            let setup = PoseSetup::new(benign, &ctx.scenario, &s.geometry, pose)?;
            let tape = Tape::new();
            let (vars, v3) = tape_vertices(&tape, mesh);
            let loss = adversarial_loss_with(&v3, mesh.faces(), ctx, &s, &setup)?;
            let g = tape.backward(loss)?;
            Ok((loss.val(), g.wrt_all(&vars)))
        })
        .collect::<Result<_>>()?;

    let tape = Tape::new();
    let (vars, v3) = tape_vertices(&tape, mesh);
    let lr = realizability_loss_with(&v3, benign, &vertex_neighbors(benign), c.beta1)?;
    let lr_grad = tape.backward(lr)?.wrt_all(&vars);

    let n = per_sample.len() as f64;
    let mut grad = vec![0.0; vars.len()];
    let mut adv = 0.0;
    for (v, g) in &per_sample {
        adv += v;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi / n;
        }
    }
    adv /= n;
    for (acc, gi) in grad.iter_mut().zip(&lr_grad) {
        *acc += c.lambda * gi;
    }
    let realizability = lr.val();
    Ok(ObjectiveEval { value: adv + c.lambda * realizability, adversarial: adv, realizability, gradient: unflatten(grad) })
}
