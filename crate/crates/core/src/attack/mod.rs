//! Adversarial object optimization: losses, EoT objective and PGD.

mod config;
mod loss;
mod pgd;
mod pipeline;
mod scenario;

pub use config::{format_config, load_config, parse_config, AttackConfig};
pub use loss::{
    adversarial_loss, adversarial_loss_with, objective, objective_and_gradient, realizability_loss,
    realizability_loss_with, sample_poses, ObjectiveEval,
};
pub use pgd::{perturbation_stats, pgd_step, project_linf, run_attack, AttackReport, IterationRecord};
pub use pipeline::{
    bev_features, calibrate_surrogates, calibration_sample, confidences, crop_image, evaluate_pose, lift_vertices,
    place, place_mesh, render_pose, shifted_calibration, verification_poses, verify, DetectorGeometry, PoseInputs,
    PoseSetup, PoseVerdict, SceneContext, Surrogates, CALIBRATION_X,
};
pub use scenario::{format_poses, format_scene_cfg, parse_poses, parse_scene_cfg, synthetic_scenario, Placement, Scenario, SCENE_FILES};
