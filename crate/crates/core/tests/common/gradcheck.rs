//! Finite-difference checks of every loss gradient, one randomized
//! configuration per seed (batch 8, d = h = p = 16, C = 4).

use super::{central_diff, gaussian, rel_err, simplex, unit_rows};
use ltgcd::losses::{info_nce, overall_loss, regularizers, sup_con};
use ltgcd::{BatchViews, Hyperparams, Matrix, ProjectionHead, Prototypes, RngService};

pub const BATCH: usize = 8;
pub const DIM: usize = 16;
pub const CLASSES: usize = 4;
pub const STEP: f64 = 1e-5;

fn random_hp(rng: &mut RngService) -> Hyperparams {
    Hyperparams {
        tau: rng.uniform_range(0.1, 0.7),
        tau_p: rng.uniform_range(0.1, 0.7),
        lambda: rng.uniform_range(0.0, 2.0),
        alpha: rng.uniform_range(0.0, 2.0),
        beta: rng.uniform_range(0.0, 5.0),
        ..Hyperparams::default()
    }
}

fn as_views(x: &[f64]) -> Matrix {
    Matrix::from_vec(2 * BATCH, DIM, x.to_vec()).unwrap()
}

pub fn info_nce_error(seed: u64) -> f64 {
    let mut rng = RngService::derive_stream(seed, "grad-ins");
    let z = unit_rows(&mut rng, 2 * BATCH, DIM);
    let tau = rng.uniform_range(0.1, 0.7);
    let out = info_nce(&z, tau).unwrap();
    let fd = central_diff(z.as_slice(), STEP, |x| info_nce(&as_views(x), tau).unwrap().value);
    rel_err(out.grad.as_slice(), &fd)
}

pub fn sup_con_error(seed: u64) -> f64 {
    let mut rng = RngService::derive_stream(seed, "grad-sup");
    let z = unit_rows(&mut rng, 2 * BATCH, DIM);
    let labels: Vec<usize> = (0..BATCH).flat_map(|_| [rng.index(CLASSES); 2]).collect();
    let tau = rng.uniform_range(0.1, 0.7);
    let out = sup_con(&z, &labels, tau).unwrap();
    let fd = central_diff(z.as_slice(), STEP, |x| sup_con(&as_views(x), &labels, tau).unwrap().value);
    rel_err(out.grad.as_slice(), &fd)
}

pub fn regularizer_error(seed: u64) -> f64 {
    let mut rng = RngService::derive_stream(seed, "grad-reg");
    let hp = random_hp(&mut rng);
    let z = unit_rows(&mut rng, 2 * BATCH, DIM);
    let protos = Prototypes::new(gaussian(&mut rng, CLASSES, DIM)).unwrap();
    let prior = simplex(&mut rng, CLASSES);
    let out = regularizers(&z, &protos, &prior, &hp).unwrap();
    let fd = central_diff(z.as_slice(), STEP, |x| {
        let r = regularizers(&as_views(x), &protos, &prior, &hp).unwrap();
        hp.alpha * r.h_prior + hp.beta * r.h_uniform
    });
    rel_err(out.grad.as_slice(), &fd)
}

fn head_from(flat: &[f64], like: &ProjectionHead) -> ProjectionHead {
    let mut head = like.clone();
    let mut offset = 0;
    for part in head.params_mut() {
        part.copy_from_slice(&flat[offset..offset + part.len()]);
        offset += part.len();
    }
    head
}

/// The full objective differentiated through the projection head parameters.
pub fn end_to_end_error(seed: u64) -> f64 {
    let mut rng = RngService::derive_stream(seed, "grad-all");
    let hp = random_hp(&mut rng);
    let head = ProjectionHead::init(DIM, DIM, DIM, &mut rng);
    // rows 2i and 2i+1 are the two views of instance i
    let x = gaussian(&mut rng, 2 * BATCH, DIM);
    let mut labeled_mask: Vec<bool> = (0..BATCH).map(|_| rng.uniform() < 0.5).collect();
    labeled_mask[0] = false;
    labeled_mask[1] = false;
    let labels: Vec<usize> = (0..BATCH).map(|_| rng.index(CLASSES)).collect();
    let protos = Prototypes::new(gaussian(&mut rng, CLASSES, DIM)).unwrap();
    let prior = simplex(&mut rng, CLASSES);

    let loss_of = |h: &ProjectionHead| {
        let batch = BatchViews {
            z: h.forward(&x).unwrap(),
            labeled_mask: labeled_mask.clone(),
            labels: labels.clone(),
        };
        overall_loss(&batch, &protos, &prior, &hp).unwrap()
    };
    let cache = head.forward_cached(&x).unwrap();
    let grads = head.backward(&cache, &loss_of(&head).grad_z).flatten();
    let flat: Vec<f64> = head.params().concat();
    let fd = central_diff(&flat, STEP, |p| loss_of(&head_from(p, &head)).l_overall);
    rel_err(&grads, &fd)
}

/// Name and checker of each gradient.
pub const CHECKS: [(&str, fn(u64) -> f64); 4] = [
    ("instance contrastive", info_nce_error),
    ("supervised contrastive", sup_con_error),
    ("prior + uniform regularizers", regularizer_error),
    ("overall loss through the head", end_to_end_error),
];
