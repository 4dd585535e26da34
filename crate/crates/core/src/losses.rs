//! Contrastive losses, target-distribution cross-entropy and the combined
//! objective, each with its exact gradient on the feature rows.
//!
//! Feature rows are unit-norm, so `<z_a, z_b>` is a cosine similarity.
//! Both contrastive losses reduce to a matrix of logit weights `G` with
//! `grad = (G + G^T) Z / (n tau)`.

use crate::config::Hyperparams;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::model::{predict_probs, Prototypes};

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;
/// Allowed deviation of a probability vector's sum from 1.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// A loss value with its gradient on the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Matrix,
}

/// Supervised contrastive result. `no_positives` is set when no anchor had a
/// same-label partner; the value is then 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SupConOutput {
    pub value: f64,
    pub grad: Matrix,
    pub no_positives: bool,
}

/// Shared core: given per-anchor positive weights, build `G` and the loss.
///
/// For anchor `a`, `weights(a)` lists `(k, w)` with `sum w = 1`. The anchor
/// loss is `sum_k w_k (-s_ak + log sum_{j != a} exp s_aj)` with
/// `s = <z_a, z_j> / tau`.
fn contrastive_core(
    z: &Matrix,
    tau: f64,
    anchors: &[(usize, Vec<(usize, f64)>)],
) -> (f64, Matrix) {
    let n = z.rows();
    let sims = z.matmul_t(z);
    let mut g = Matrix::zeros(n, n);
    let mut total = 0.0;
    let count = anchors.len() as f64;
    let mut probs = vec![0.0; n];
    for (a, positives) in anchors {
        let a = *a;
        let row = sims.row(a);
        let m = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != a)
            .map(|(_, &s)| s / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..n {
            probs[j] = if j == a { 0.0 } else { (row[j] / tau - m).exp() };
            denom += probs[j];
        }
        let lse = m + denom.ln();
        let grow = g.row_mut(a);
        for j in 0..n {
            grow[j] += probs[j] / denom;
        }
        for &(k, w) in positives {
            total += w * (lse - row[k] / tau);
            grow[k] -= w;
        }
    }
    // d/dz = (G + G^T) Z / (count tau)
    let scale = 1.0 / (count * tau);
    let mut grad = Matrix::zeros(n, z.cols());
    for a in 0..n {
        for b in 0..n {
            let w = (g.get(a, b) + g.get(b, a)) * scale;
            if w != 0.0 {
                axpy(w, z.row(b), grad.row_mut(a));
            }
        }
    }
    (total / count, grad)
}

/// Instance contrastive loss over interleaved view pairs: rows `2i` and
/// `2i+1` are the two views of instance `i`. Each view is an anchor whose
/// positive is its sibling; the denominator runs over every other view.
/// The value is the mean over all anchors.
pub fn info_nce(z: &Matrix, tau: f64) -> Result<LossGrad> {
    if z.rows() % 2 != 0 {
        return Err(Error::invalid("info_nce", "views must come in interleaved pairs"));
    }
    if z.rows() < 4 {
        return Err(Error::invalid(
            "info_nce",
            format!("needs at least 2 instances, got {}", z.rows() / 2),
        ));
    }
    let anchors: Vec<_> = (0..z.rows()).map(|a| (a, vec![(a ^ 1, 1.0)])).collect();
    let (value, grad) = contrastive_core(z, tau, &anchors);
    Ok(LossGrad { value, grad })
}

/// Supervised contrastive loss. Every row is an anchor; its positives are
/// all other rows with the same label. Anchors without positives are left
/// out of the mean.
pub fn sup_con(z: &Matrix, labels: &[usize], tau: f64) -> Result<SupConOutput> {
    if labels.len() != z.rows() {
        return Err(Error::invalid("sup_con", "one label per row required"));
    }
    if z.rows() < 2 {
        return Err(Error::invalid("sup_con", format!("needs at least 2 labeled views, got {}", z.rows())));
    }
    let anchors: Vec<_> = (0..z.rows())
        .filter_map(|a| {
            let pos: Vec<usize> = (0..z.rows()).filter(|&k| k != a && labels[k] == labels[a]).collect();
            if pos.is_empty() {
                return None;
            }
            let w = 1.0 / pos.len() as f64;
            Some((a, pos.into_iter().map(|k| (k, w)).collect()))
        })
        .collect();
    if anchors.is_empty() {
        return Ok(SupConOutput {
            value: 0.0,
            grad: Matrix::zeros(z.rows(), z.cols()),
            no_positives: true,
        });
    }
    let (value, grad) = contrastive_core(z, tau, &anchors);
    Ok(SupConOutput {
        value,
        grad,
        no_positives: false,
    })
}

fn check_simplex(name: &str, v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(name, format!("not a probability vector (sum {sum})")));
    }
    Ok(())
}

/// `-sum_c target_c log q_c` with `q` clamped below at [`LOG_CLAMP`] and
/// `0 log 0 = 0`. The gradient is `-target_c / q_c`, zero where clamped.
pub fn target_cross_entropy(q_bar: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if q_bar.len() != target.len() {
        return Err(Error::invalid("target_cross_entropy", "length mismatch"));
    }
    check_simplex("q_bar", q_bar)?;
    check_simplex("target", target)?;
    let mut value = 0.0;
    let mut grad = vec![0.0; q_bar.len()];
    for (c, (&q, &t)) in q_bar.iter().zip(target).enumerate() {
        if t == 0.0 {
            continue;
        }
        if q < LOG_CLAMP {
            value -= t * LOG_CLAMP.ln();
        } else {
            value -= t * q.ln();
            grad[c] = -t / q;
        }
    }
    Ok((value, grad))
}

/// A mini-batch of features: rows `2i` and `2i+1` are the two views of
/// instance `i`. `labels[i]` is a model class slot and is only read where
/// `labeled_mask[i]` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchViews {
    pub z: Matrix,
    pub labeled_mask: Vec<bool>,
    pub labels: Vec<usize>,
}

impl BatchViews {
    pub fn num_instances(&self) -> usize {
        self.labeled_mask.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_ins: f64,
    pub l_sup: f64,
    pub h_prior: f64,
    pub h_uniform: f64,
    pub l_overall: f64,
    /// Gradient of `l_overall` on `BatchViews::z`.
    pub grad_z: Matrix,
    /// Set when the labeled part contributed nothing.
    pub sup_empty: bool,
}

/// `l_ins + lambda l_sup + alpha h_prior + beta h_uniform`.
pub fn combine(l_ins: f64, l_sup: f64, h_prior: f64, h_uniform: f64, hp: &Hyperparams) -> f64 {
    l_ins + hp.lambda * l_sup + hp.alpha * h_prior + hp.beta * h_uniform
}

/// Gradient of `sum_c g_c qbar_c` on the feature rows, where
/// `qbar = mean_i softmax(<v_i, M> / tau_p)` and prototypes are constant.
fn mean_prediction_backward(z: &Matrix, probs: &Matrix, protos: &Prototypes, tau_p: f64, g: &[f64]) -> Matrix {
    let n = z.rows() as f64;
    let c = protos.num_classes();
    let mut dlogits = Matrix::zeros(z.rows(), c);
    for i in 0..z.rows() {
        let q = probs.row(i);
        let mean_g = dot(q, g);
        let d = dlogits.row_mut(i);
        for j in 0..c {
            d[j] = q[j] * (g[j] - mean_g) / (n * tau_p);
        }
    }
    dlogits.matmul(protos.matrix())
}

/// The two distribution regularizers on unlabeled view features.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerOutput {
    /// `H(r, qbar)`
    pub h_prior: f64,
    /// `H(u, qbar)`
    pub h_uniform: f64,
    /// Gradient of `alpha h_prior + beta h_uniform` on the rows.
    pub grad: Matrix,
}

/// Cross-entropy of the mean prediction `qbar` over the rows of `z` against
/// the prior and against uniform.
pub fn regularizers(z: &Matrix, protos: &Prototypes, prior: &[f64], hp: &Hyperparams) -> Result<RegularizerOutput> {
    if z.rows() == 0 {
        return Err(Error::invalid("regularizers", "no rows"));
    }
    let probs = predict_probs(z, protos, hp.tau_p);
    let n = z.rows() as f64;
    let q_bar: Vec<f64> = probs.column_sums().into_iter().map(|s| s / n).collect();
    let c = protos.num_classes();
    let uniform = vec![1.0 / c as f64; c];
    let (h_prior, g_prior) = target_cross_entropy(&q_bar, prior)?;
    let (h_uniform, g_uniform) = target_cross_entropy(&q_bar, &uniform)?;
    let g: Vec<f64> = g_prior.iter().zip(&g_uniform).map(|(p, u)| hp.alpha * p + hp.beta * u).collect();
    let grad = if g.iter().any(|&v| v != 0.0) {
        mean_prediction_backward(z, &probs, protos, hp.tau_p, &g)
    } else {
        Matrix::zeros(z.rows(), z.cols())
    };
    Ok(RegularizerOutput { h_prior, h_uniform, grad })
}

/// The combined objective on one batch.
///
/// The regularizers act on `qbar`, the mean prediction over unlabeled views.
/// Fewer than two labeled views leave the supervised term at zero.
pub fn overall_loss(batch: &BatchViews, protos: &Prototypes, prior: &[f64], hp: &Hyperparams) -> Result<LossBreakdown> {
    let b = batch.num_instances();
    if batch.z.rows() != 2 * b || batch.labels.len() != b {
        return Err(Error::invalid("batch", "expected 2 views and one label per instance"));
    }
    if prior.len() != protos.num_classes() {
        return Err(Error::invalid("prior", "length differs from the number of prototypes"));
    }
    check_simplex("prior", prior)?;
    let mut unlabeled_rows = Vec::new();
    let mut labeled_rows = Vec::new();
    let mut labeled_view_labels = Vec::new();
    for i in 0..b {
        if batch.labeled_mask[i] {
            labeled_rows.extend([2 * i, 2 * i + 1]);
            labeled_view_labels.extend([batch.labels[i]; 2]);
        } else {
            unlabeled_rows.extend([2 * i, 2 * i + 1]);
        }
    }
    let zu = batch.z.select_rows(&unlabeled_rows);
    let ins = info_nce(&zu, hp.tau)?;

    let (l_sup, sup_grad, sup_empty) = if labeled_rows.len() >= 2 {
        let zl = batch.z.select_rows(&labeled_rows);
        let out = sup_con(&zl, &labeled_view_labels, hp.tau)?;
        (out.value, Some(out.grad), out.no_positives)
    } else {
        (0.0, None, true)
    };

    let reg = regularizers(&zu, protos, prior, hp)?;
    let mut grad_u = ins.grad;
    axpy(1.0, reg.grad.as_slice(), grad_u.as_mut_slice());
    let mut grad_z = Matrix::zeros(batch.z.rows(), batch.z.cols());
    for (r, &dst) in unlabeled_rows.iter().enumerate() {
        grad_z.row_mut(dst).copy_from_slice(grad_u.row(r));
    }
    if let Some(g) = sup_grad {
        for (r, &dst) in labeled_rows.iter().enumerate() {
            axpy(hp.lambda, g.row(r), grad_z.row_mut(dst));
        }
    }

    Ok(LossBreakdown {
        l_ins: ins.value,
        l_sup,
        h_prior: reg.h_prior,
        h_uniform: reg.h_uniform,
        l_overall: combine(ins.value, l_sup, reg.h_prior, reg.h_uniform, hp),
        grad_z,
        sup_empty,
    })
}
