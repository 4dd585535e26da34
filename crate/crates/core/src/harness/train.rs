use crate::config::{Hyperparams, TrainSettings};
use crate::datagen::{make_views, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_features, kmeans_plus_plus, MetricsReport};
use crate::linalg::{argmax, axpy, normalize_in_place, Matrix};
use crate::losses::{overall_loss, BatchViews};
use crate::model::{predict_probs, sgd_step, update_prototypes, ModelSnapshot, OptimizerState, ProjectionHead, Prototypes};
use crate::prior::{hard_histogram, ClassPrior};
use crate::rng::{RngService, STREAM_AUGMENT, STREAM_BATCH, STREAM_INIT};

/// Mean batch losses and the state after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub l_ins: f64,
    pub l_sup: f64,
    pub h_prior: f64,
    pub h_uniform: f64,
    pub l_overall: f64,
    /// Batches that went into the means.
    pub batches: usize,
    /// Class prior after this epoch's update, in model slot order.
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub hp: Hyperparams,
    pub settings: TrainSettings,
    pub log: Vec<EpochLog>,
    /// Absent when the run was aborted.
    pub metrics: Option<MetricsReport>,
    pub aborted: Option<String>,
    pub snapshot: ModelSnapshot,
    /// Dataset class id of each model slot.
    pub class_order: Vec<usize>,
}

fn initial_prototypes(
    head: &ProjectionHead,
    data: &EmbeddingDataset,
    slots: &[usize],
    rng: &mut RngService,
) -> Result<Prototypes> {
    let features = head.forward(&data.points)?;
    let nk = data.num_known();
    let mut known = Matrix::zeros(nk, features.cols());
    for i in data.labeled_indices() {
        axpy(1.0, features.row(i), known.row_mut(slots[data.labels[i]]));
    }
    for k in 0..nk {
        normalize_in_place(known.row_mut(k), 1e-12);
    }
    let unlabeled = features.select_rows(&data.unlabeled_indices());
    Prototypes::new(kmeans_plus_plus(&unlabeled, &known, data.num_classes, rng))
}

/// Splits interleaved view gradients back into the two view matrices.
fn deinterleave(grad: &Matrix) -> (Matrix, Matrix) {
    let b = grad.rows() / 2;
    let even: Vec<usize> = (0..b).map(|i| 2 * i).collect();
    let odd: Vec<usize> = (0..b).map(|i| 2 * i + 1).collect();
    (grad.select_rows(&even), grad.select_rows(&odd))
}

fn interleave(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows() * 2, a.cols());
    for r in 0..a.rows() {
        out.row_mut(2 * r).copy_from_slice(a.row(r));
        out.row_mut(2 * r + 1).copy_from_slice(b.row(r));
    }
    out
}

struct Trainer<'a> {
    data: &'a EmbeddingDataset,
    hp: Hyperparams,
    settings: TrainSettings,
    slots: Vec<usize>,
    head: ProjectionHead,
    protos: Prototypes,
    prior: ClassPrior,
    opt: OptimizerState,
    batch_rng: RngService,
    augment_rng: RngService,
}

impl Trainer<'_> {
    fn run_epoch(&mut self) -> Result<EpochLog> {
        let lr = self.opt.learning_rate(self.hp.lr0);
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        self.batch_rng.shuffle(&mut order);
        let mut sums = [0.0; 5];
        let mut batches = 0;
        for chunk in order.chunks(self.hp.batch_size) {
            let unlabeled = chunk.iter().filter(|&&i| !self.data.is_labeled[i]).count();
            if unlabeled < 2 {
                continue;
            }
            let views = make_views(self.data, chunk, self.settings.noise_sigma, self.settings.drop_prob, &mut self.augment_rng)?;
            let cache_a = self.head.forward_cached(&views.view_a)?;
            let cache_b = self.head.forward_cached(&views.view_b)?;
            let batch = BatchViews {
                z: interleave(cache_a.output(), cache_b.output()),
                labeled_mask: chunk.iter().map(|&i| self.data.is_labeled[i]).collect(),
                labels: chunk.iter().map(|&i| self.slots[self.data.labels[i]]).collect(),
            };
            let loss = overall_loss(&batch, &self.protos, self.prior.r(), &self.hp)?;
            if !loss.l_overall.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {} (ins {}, sup {}, prior {}, uniform {})",
                    self.opt.epoch, loss.l_ins, loss.l_sup, loss.h_prior, loss.h_uniform
                )));
            }
            let (ga, gb) = deinterleave(&loss.grad_z);
            let mut grads = self.head.backward(&cache_a, &ga);
            grads.add_assign(&self.head.backward(&cache_b, &gb));
            sgd_step(&mut self.head, &grads, &mut self.opt, &self.hp)?;
            for (s, v) in sums.iter_mut().zip([loss.l_ins, loss.l_sup, loss.h_prior, loss.h_uniform, loss.l_overall]) {
                *s += v;
            }
            batches += 1;
        }
        self.refresh()?;
        let epoch = self.opt.epoch;
        self.opt.advance_epoch();
        let mean = |v: f64| if batches > 0 { v / batches as f64 } else { 0.0 };
        Ok(EpochLog {
            epoch,
            lr,
            l_ins: mean(sums[0]),
            l_sup: mean(sums[1]),
            h_prior: mean(sums[2]),
            h_uniform: mean(sums[3]),
            l_overall: mean(sums[4]),
            batches,
            prior: self.prior.r().to_vec(),
        })
    }

    /// End of epoch: prior update from the unlabeled argmax histogram, then
    /// the prototype refresh.
    fn refresh(&mut self) -> Result<()> {
        let features = self.head.forward(&self.data.points)?;
        let unlabeled = self.data.unlabeled_indices();
        let probs = predict_probs(&features.select_rows(&unlabeled), &self.protos, self.hp.tau_p);
        self.prior.ema_update(&hard_histogram(&probs)?)?;
        let mut assignments = vec![0; self.data.len()];
        for (r, &i) in unlabeled.iter().enumerate() {
            assignments[i] = argmax(probs.row(r));
        }
        self.protos = update_prototypes(
            &features,
            &assignments,
            &self.data.labels,
            &self.data.is_labeled,
            &self.slots,
            self.data.num_known(),
            &self.protos,
            self.settings.proto_ema,
        )?;
        Ok(())
    }
}

/// Trains a fresh model on `data` and evaluates it.
///
/// A numerical failure mid-training ends the run early: the record then
/// carries the reason in `aborted` and no metrics.
pub fn train_one(data: &EmbeddingDataset, hp: &Hyperparams, settings: &TrainSettings) -> Result<RunRecord> {
    hp.validate()?;
    settings.validate()?;
    if data.unlabeled_indices().len() < 2 {
        return Err(Error::invalid("dataset", "training needs at least two unlabeled rows"));
    }
    let mut init_rng = RngService::derive_stream(hp.seed, STREAM_INIT);
    let head = ProjectionHead::init(data.dim(), settings.hidden_dim, settings.proj_dim, &mut init_rng);
    let slots = data.class_slots();
    let protos = initial_prototypes(&head, data, &slots, &mut init_rng)?;
    let opt = OptimizerState::new(&head, hp.epochs);
    let mut trainer = Trainer {
        data,
        hp: *hp,
        settings: *settings,
        slots,
        head,
        protos,
        prior: ClassPrior::uniform(data.num_classes, hp.mu)?,
        opt,
        batch_rng: RngService::derive_stream(hp.seed, STREAM_BATCH),
        augment_rng: RngService::derive_stream(hp.seed, STREAM_AUGMENT),
    };

    let mut log = Vec::with_capacity(hp.epochs);
    let mut aborted = None;
    for _ in 0..hp.epochs {
        match trainer.run_epoch() {
            Ok(entry) => log.push(entry),
            Err(e @ Error::Numerical(_)) => {
                aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let snapshot = ModelSnapshot {
        head: trainer.head,
        prototypes: trainer.protos,
    };
    let metrics = match aborted {
        Some(_) => None,
        None => {
            let features = snapshot.head.forward(&data.points)?;
            Some(evaluate_features(&features, data, hp.seed, settings.eval_restarts)?)
        }
    };
    Ok(RunRecord {
        hp: *hp,
        settings: *settings,
        log,
        metrics,
        aborted,
        snapshot,
        class_order: data.class_order(),
    })
}

