//! Projection head, prototype classifier and the SGD optimizer.
//!
//! The head maps an embedding `x` to `normalize(W2 relu(W1 x + b1) + b2)`.
//! Class probabilities are a temperature softmax over cosine similarities to
//! one unit-norm prototype per class (known classes first).

use std::fs;
use std::path::Path;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::config::Hyperparams;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, normalize_in_place, softmax_into, Matrix};
use crate::rng::RngService;

/// Rows whose pre-normalization norm falls below this are degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    /// `hidden x input`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `output x hidden`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Intermediate values of a forward pass, consumed by [`ProjectionHead::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    hidden_pre: Matrix,
    hidden: Matrix,
    /// Pre-normalization output norms.
    norms: Vec<f64>,
    /// Normalized outputs.
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }
}

/// Gradients with the same layout as [`ProjectionHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl HeadGrads {
    pub fn zeros_like(head: &ProjectionHead) -> Self {
        Self {
            w1: Matrix::zeros(head.w1.rows(), head.w1.cols()),
            b1: vec![0.0; head.b1.len()],
            w2: Matrix::zeros(head.w2.rows(), head.w2.cols()),
            b2: vec![0.0; head.b2.len()],
        }
    }

    pub fn add_assign(&mut self, other: &HeadGrads) {
        axpy(1.0, other.w1.as_slice(), self.w1.as_mut_slice());
        axpy(1.0, &other.b1, &mut self.b1);
        axpy(1.0, other.w2.as_slice(), self.w2.as_mut_slice());
        axpy(1.0, &other.b2, &mut self.b2);
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    /// All gradient entries flattened in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl ProjectionHead {
    /// He-uniform weights, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut RngService) -> Self {
        let mut layer = |rows: usize, cols: usize| {
            let bound = (6.0 / cols as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
            Matrix::from_vec(rows, cols, data).expect("shape")
        };
        let w1 = layer(hidden_dim, input_dim);
        let w2 = layer(output_dim, hidden_dim);
        Self {
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; output_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.as_mut_slice(), &mut self.b1, self.w2.as_mut_slice(), &mut self.b2]
    }

    pub fn params(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn check_shapes(&self) -> Result<()> {
        let ok = self.b1.len() == self.w1.rows() && self.w2.cols() == self.w1.rows() && self.b2.len() == self.w2.rows();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("projection head", "inconsistent parameter shapes"))
        }
    }

    /// Unit-norm features for every row of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.forward_cached(x).map(ForwardCache::into_output)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_shapes()?;
        if x.cols() != self.input_dim() {
            return Err(Error::invalid(
                "input",
                format!("{} columns, head expects {}", x.cols(), self.input_dim()),
            ));
        }
        if !x.is_finite() {
            return Err(Error::Numerical("non-finite input".into()));
        }
        let mut hidden_pre = x.matmul_t(&self.w1);
        for r in 0..hidden_pre.rows() {
            axpy(1.0, &self.b1, hidden_pre.row_mut(r));
        }
        let mut hidden = hidden_pre.clone();
        hidden.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        let mut output = hidden.matmul_t(&self.w2);
        let mut norms = Vec::with_capacity(output.rows());
        for r in 0..output.rows() {
            let row = output.row_mut(r);
            axpy(1.0, &self.b2, row);
            let n = normalize_in_place(row, DEGENERATE_NORM);
            if !(n >= DEGENERATE_NORM) {
                return Err(Error::Numerical(format!(
                    "degenerate projection for row {r}: pre-normalization norm {n:e}"
                )));
            }
            norms.push(n);
        }
        Ok(ForwardCache {
            input: x.clone(),
            hidden_pre,
            hidden,
            norms,
            output,
        })
    }

    /// Parameter gradients given the gradient on the normalized outputs.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> HeadGrads {
        assert_eq!(upstream.shape(), cache.output.shape(), "upstream gradient shape");
        // through the row normalization: (I - v v^T) g / |z|
        let mut dz = upstream.clone();
        for r in 0..dz.rows() {
            let v = cache.output.row(r);
            let g = dz.row_mut(r);
            let proj = dot(v, g);
            let inv = 1.0 / cache.norms[r];
            for (gi, vi) in g.iter_mut().zip(v) {
                *gi = (*gi - proj * vi) * inv;
            }
        }
        let w2 = dz.t_matmul(&cache.hidden);
        let b2 = dz.column_sums();
        let mut dh = dz.matmul(&self.w2);
        for (g, &pre) in dh.as_mut_slice().iter_mut().zip(cache.hidden_pre.as_slice()) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        let w1 = dh.t_matmul(&cache.input);
        let b1 = dh.column_sums();
        HeadGrads { w1, b1, w2, b2 }
    }
}

/// One unit-norm prototype per class, in the model's class order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    matrix: Matrix,
}

impl Prototypes {
    /// Normalizes every row. Fails on a (near) zero row.
    pub fn new(mut matrix: Matrix) -> Result<Self> {
        for r in 0..matrix.rows() {
            if normalize_in_place(matrix.row_mut(r), DEGENERATE_NORM) < DEGENERATE_NORM {
                return Err(Error::Numerical(format!("prototype {r} has zero norm")));
            }
        }
        Ok(Self { matrix })
    }

    /// Keeps the rows as given after checking they are unit-norm to 1e-9.
    pub fn from_unit_rows(matrix: Matrix) -> Result<Self> {
        for (r, row) in matrix.row_iter().enumerate() {
            let n = crate::linalg::norm(row);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("prototypes", format!("row {r} has norm {n}")));
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn num_classes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Row-stochastic `batch x C` class probabilities
/// `softmax_c(<v_i, M_c> / tau_p)`.
pub fn predict_probs(features: &Matrix, protos: &Prototypes, tau_p: f64) -> Matrix {
    let mut logits = features.matmul_t(&protos.matrix);
    logits.as_mut_slice().iter_mut().for_each(|v| *v /= tau_p);
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        softmax_into(logits.row(r), probs.row_mut(r));
    }
    probs
}

/// Per-epoch prototype refresh.
///
/// Known slots (`slot < num_known`) move toward the normalized mean of the
/// labeled features of that class; unknown slots toward the normalized mean
/// of the unlabeled features assigned to them. A slot with no members keeps
/// its prototype. `slot_of_label` maps dataset labels to model slots and
/// `assignments[i]` is the argmax slot of row `i` (read for unlabeled rows).
pub fn update_prototypes(
    features: &Matrix,
    assignments: &[usize],
    labels: &[usize],
    is_labeled: &[bool],
    slot_of_label: &[usize],
    num_known: usize,
    protos: &Prototypes,
    ema: f64,
) -> Result<Prototypes> {
    if !(0.0..=1.0).contains(&ema) {
        return Err(Error::invalid("ema", format!("must lie in [0, 1], got {ema}")));
    }
    let c = protos.num_classes();
    let p = protos.dim();
    let mut sums = Matrix::zeros(c, p);
    let mut counts = vec![0usize; c];
    for i in 0..features.rows() {
        let slot = if is_labeled[i] {
            slot_of_label[labels[i]]
        } else if assignments[i] >= num_known {
            assignments[i]
        } else {
            continue;
        };
        counts[slot] += 1;
        axpy(1.0, features.row(i), sums.row_mut(slot));
    }
    let mut out = protos.matrix.clone();
    for k in 0..c {
        if counts[k] == 0 {
            continue;
        }
        let target = sums.row_mut(k);
        if normalize_in_place(target, DEGENERATE_NORM) < DEGENERATE_NORM {
            continue;
        }
        let old = protos.matrix.row(k);
        let mut blended: Vec<f64> = old.iter().zip(target.iter()).map(|(o, t)| ema * o + (1.0 - ema) * t).collect();
        if normalize_in_place(&mut blended, DEGENERATE_NORM) >= DEGENERATE_NORM {
            out.row_mut(k).copy_from_slice(&blended);
        }
    }
    Ok(Prototypes { matrix: out })
}

/// Momentum buffers plus the epoch counter that drives the step schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: HeadGrads,
    pub epoch: usize,
    pub total_epochs: usize,
}

impl OptimizerState {
    pub fn new(head: &ProjectionHead, total_epochs: usize) -> Self {
        Self {
            velocity: HeadGrads::zeros_like(head),
            epoch: 0,
            total_epochs,
        }
    }

    pub fn advance_epoch(&mut self) {
        self.epoch += 1;
    }

    pub fn learning_rate(&self, lr0: f64) -> f64 {
        learning_rate(lr0, self.epoch, self.total_epochs)
    }
}

/// `lr0` divided by 10 at 50% and again at 75% of training.
pub fn learning_rate(lr0: f64, epoch: usize, total_epochs: usize) -> f64 {
    let passed = [0.5, 0.75]
        .iter()
        .filter(|&&frac| epoch as f64 >= frac * total_epochs as f64)
        .count();
    lr0 * 0.1f64.powi(passed as i32)
}

/// `v <- momentum v + grad + weight_decay param; param <- param - lr v`.
pub fn sgd_step(head: &mut ProjectionHead, grads: &HeadGrads, opt: &mut OptimizerState, hp: &Hyperparams) -> Result<()> {
    if opt.epoch >= opt.total_epochs {
        return Err(Error::invalid(
            "optimizer",
            format!("epoch {} is past the last epoch ({})", opt.epoch, opt.total_epochs),
        ));
    }
    if grads.slices().iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    let lr = opt.learning_rate(hp.lr0);
    let velocity = &mut opt.velocity;
    let vel = [
        velocity.w1.as_mut_slice(),
        &mut velocity.b1[..],
        velocity.w2.as_mut_slice(),
        &mut velocity.b2[..],
    ];
    for ((param, grad), vel) in head.params_mut().into_iter().zip(grads.slices()).zip(vel) {
        for ((p, &g), v) in param.iter_mut().zip(grad).zip(vel.iter_mut()) {
            *v = hp.momentum * *v + g + hp.weight_decay * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorBlob {
    shape: Vec<usize>,
    /// Base64 of little-endian `f64` values.
    data: String,
}

impl TensorBlob {
    fn encode(shape: Vec<usize>, values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            shape,
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }

    fn decode(&self, name: &str) -> Result<Vec<f64>> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.data)
            .map_err(|e| Error::invalid(format!("checkpoint tensor {name}"), e.to_string()))?;
        let expected: usize = self.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(Error::invalid(
                format!("checkpoint tensor {name}"),
                format!("{} bytes for shape {:?}", bytes.len(), self.shape),
            ));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&self, name: &str) -> Result<Matrix> {
        match self.shape.as_slice() {
            &[r, c] => Matrix::from_vec(r, c, self.decode(name)?),
            _ => Err(Error::invalid(format!("checkpoint tensor {name}"), "expected a 2-d shape")),
        }
    }

    fn vector(&self, name: &str) -> Result<Vec<f64>> {
        match self.shape.as_slice() {
            &[_] => self.decode(name),
            _ => Err(Error::invalid(format!("checkpoint tensor {name}"), "expected a 1-d shape")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    w1: TensorBlob,
    b1: TensorBlob,
    w2: TensorBlob,
    b2: TensorBlob,
    prototypes: TensorBlob,
}

const CHECKPOINT_FORMAT: &str = "ltgcd-checkpoint";

/// A trained head with its prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub head: ProjectionHead,
    pub prototypes: Prototypes,
}

impl ModelSnapshot {
    pub fn to_json(&self) -> Result<String> {
        let h = &self.head;
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            w1: TensorBlob::encode(vec![h.w1.rows(), h.w1.cols()], h.w1.as_slice()),
            b1: TensorBlob::encode(vec![h.b1.len()], &h.b1),
            w2: TensorBlob::encode(vec![h.w2.rows(), h.w2.cols()], h.w2.as_slice()),
            b2: TensorBlob::encode(vec![h.b2.len()], &h.b2),
            prototypes: TensorBlob::encode(
                vec![self.prototypes.num_classes(), self.prototypes.dim()],
                self.prototypes.matrix.as_slice(),
            ),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != CHECKPOINT_FORMAT || file.version != 1 {
            return Err(Error::invalid("checkpoint", format!("unsupported format {} v{}", file.format, file.version)));
        }
        let head = ProjectionHead {
            w1: file.w1.matrix("w1")?,
            b1: file.b1.vector("b1")?,
            w2: file.w2.matrix("w2")?,
            b2: file.b2.vector("b2")?,
        };
        head.check_shapes()?;
        let prototypes = Prototypes::from_unit_rows(file.prototypes.matrix("prototypes")?)?;
        if prototypes.dim() != head.output_dim() {
            return Err(Error::invalid("checkpoint", "prototype width differs from head output"));
        }
        Ok(Self { head, prototypes })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::STREAM_INIT;

    fn random_matrix(rows: usize, cols: usize, rng: &mut RngService) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    fn random_head(d: usize, h: usize, p: usize, rng: &mut RngService) -> ProjectionHead {
        let mut head = ProjectionHead::init(d, h, p, rng);
        head.b1.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        head.b2.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        head
    }

    #[test]
    fn outputs_are_unit_norm() {
        let mut rng = RngService::derive_stream(1, STREAM_INIT);
        let head = random_head(6, 5, 4, &mut rng);
        let x = random_matrix(9, 6, &mut rng);
        for row in head.forward(&x).unwrap().row_iter() {
            assert!((crate::linalg::norm(row) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_head() {
        let mut rng = RngService::derive_stream(2, STREAM_INIT);
        let mut head = random_head(3, 4, 3, &mut rng);
        head.w2 = Matrix::zeros(3, 4);
        head.b2 = vec![1.0, 0.0, 0.0];
        let out = head.forward(&random_matrix(5, 3, &mut rng)).unwrap();
        for row in out.row_iter() {
            assert_eq!(row, &[1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn duplicated_rows_match() {
        let mut rng = RngService::derive_stream(3, STREAM_INIT);
        let head = random_head(4, 8, 3, &mut rng);
        let row: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let x = Matrix::from_rows(&[row.clone(), row]).unwrap();
        let out = head.forward(&x).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn degenerate_output_rejected() {
        let mut rng = RngService::derive_stream(4, STREAM_INIT);
        let mut head = random_head(3, 4, 2, &mut rng);
        head.w2 = Matrix::zeros(2, 4);
        head.b2 = vec![0.0, 0.0];
        let err = head.forward(&random_matrix(2, 3, &mut rng)).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn two_class_softmax() {
        let protos = Prototypes::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        let feat = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let q = predict_probs(&feat, &protos, 1.0);
        let e = std::f64::consts::E;
        assert!((q.get(0, 0) - e / (e + 1.0)).abs() < 1e-12);
        assert!((q.get(0, 1) - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!((q.get(0, 0) - 0.731).abs() < 5e-4);
    }

    #[test]
    fn identical_prototypes_give_uniform() {
        let protos = Prototypes::new(Matrix::from_rows(&vec![vec![0.6, 0.8]; 3]).unwrap()).unwrap();
        let feat = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let q = predict_probs(&feat, &protos, 0.1);
        for v in q.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn low_temperature_is_one_hot() {
        let protos = Prototypes::new(random_matrix(5, 4, &mut RngService::new(5, 0))).unwrap();
        let feat = Prototypes::new(random_matrix(3, 4, &mut RngService::new(6, 0))).unwrap();
        let q = predict_probs(feat.matrix(), &protos, 1e-3);
        for row in q.row_iter() {
            assert!(row.iter().copied().fold(0.0, f64::max) > 0.999);
        }
    }

    #[test]
    fn prototype_blend_rules() {
        let old = Prototypes::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        let feats = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let labels = [0, 1];
        let labeled = [true, false];
        let slots = [0, 1];
        // unlabeled row 1 assigned to slot 1 (unknown), labeled row 0 is class 0
        let assign = [0, 1];
        let same = update_prototypes(&feats, &assign, &labels, &labeled, &slots, 1, &old, 1.0).unwrap();
        assert_eq!(same, old);
        let half = update_prototypes(&feats, &assign, &labels, &labeled, &slots, 1, &old, 0.5).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((half.matrix().get(0, 0) - s).abs() < 1e-12);
        assert!((half.matrix().get(0, 1) - s).abs() < 1e-12);
        let full = update_prototypes(&feats, &assign, &labels, &labeled, &slots, 1, &old, 0.0).unwrap();
        assert_eq!(full.matrix().row(0), &[0.0, 1.0]);
        assert_eq!(full.matrix().row(1), &[1.0, 0.0]);
        // no members: unchanged
        let none = update_prototypes(&feats, &[0, 0], &labels, &labeled, &slots, 1, &old, 0.0).unwrap();
        assert_eq!(none.matrix().row(1), &[0.0, 1.0]);
        assert!(update_prototypes(&feats, &assign, &labels, &labeled, &slots, 1, &old, 1.5).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = RngService::derive_stream(7, STREAM_INIT);
        let head = random_head(4, 6, 3, &mut rng);
        let cache = head.forward_cached(&random_matrix(5, 4, &mut rng)).unwrap();
        let g = head.backward(&cache, &Matrix::zeros(5, 3));
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_row_gets_no_gradient() {
        let mut rng = RngService::derive_stream(8, STREAM_INIT);
        let mut head = random_head(4, 6, 3, &mut rng);
        head.w1.row_mut(2).iter_mut().for_each(|v| *v = 0.0);
        head.b1[2] = -1.0;
        let cache = head.forward_cached(&random_matrix(5, 4, &mut rng)).unwrap();
        let g = head.backward(&cache, &random_matrix(5, 3, &mut rng));
        assert!(g.w1.row(2).iter().all(|&v| v == 0.0));
        assert_eq!(g.b1[2], 0.0);
    }

    #[test]
    fn step_schedule() {
        assert!((learning_rate(0.02, 120, 200) - 0.002).abs() < 1e-15);
        assert!((learning_rate(0.02, 160, 200) - 0.0002).abs() < 1e-15);
        assert_eq!(learning_rate(0.02, 99, 200), 0.02);
        assert!((learning_rate(0.02, 100, 200) - 0.002).abs() < 1e-15);
        assert!((learning_rate(0.02, 150, 200) - 0.0002).abs() < 1e-15);
    }

    fn hp(momentum: f64, weight_decay: f64) -> Hyperparams {
        Hyperparams {
            lr0: 0.02,
            momentum,
            weight_decay,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn vanilla_sgd_and_pure_decay() {
        let mut rng = RngService::derive_stream(9, STREAM_INIT);
        let head = random_head(3, 4, 2, &mut rng);
        let mut grads = HeadGrads::zeros_like(&head);
        grads.w1.as_mut_slice().iter_mut().for_each(|g| *g = rng.normal());

        let mut h = head.clone();
        let mut opt = OptimizerState::new(&h, 10);
        sgd_step(&mut h, &grads, &mut opt, &hp(0.0, 0.0)).unwrap();
        for ((new, old), g) in h.w1.as_slice().iter().zip(head.w1.as_slice()).zip(grads.w1.as_slice()) {
            assert_eq!(*new, old - 0.02 * g);
        }
        assert_eq!(h.w2, head.w2);

        let mut h = head.clone();
        let mut opt = OptimizerState::new(&h, 10);
        sgd_step(&mut h, &HeadGrads::zeros_like(&head), &mut opt, &hp(0.0, 1e-4)).unwrap();
        for (new, old) in h.w2.as_slice().iter().zip(head.w2.as_slice()) {
            assert!((new - old * (1.0 - 0.02 * 1e-4)).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut rng = RngService::derive_stream(10, STREAM_INIT);
        let head = random_head(3, 4, 2, &mut rng);
        let mut h = head.clone();
        let mut opt = OptimizerState::new(&h, 3);
        for _ in 0..3 {
            sgd_step(&mut h, &HeadGrads::zeros_like(&head), &mut opt, &hp(0.9, 0.0)).unwrap();
        }
        assert_eq!(h, head);
    }

    #[test]
    fn sgd_rejects_bad_inputs() {
        let mut rng = RngService::derive_stream(11, STREAM_INIT);
        let mut head = random_head(3, 4, 2, &mut rng);
        let mut grads = HeadGrads::zeros_like(&head);
        let mut opt = OptimizerState::new(&head, 1);
        grads.b2[0] = f64::NAN;
        assert!(sgd_step(&mut head, &grads, &mut opt, &hp(0.9, 0.0)).is_err());
        let grads = HeadGrads::zeros_like(&head);
        opt.advance_epoch();
        assert!(sgd_step(&mut head, &grads, &mut opt, &hp(0.9, 0.0)).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let mut rng = RngService::derive_stream(12, STREAM_INIT);
        let head = random_head(5, 7, 3, &mut rng);
        let prototypes = Prototypes::new(random_matrix(4, 3, &mut rng)).unwrap();
        let snap = ModelSnapshot { head, prototypes };
        let back = ModelSnapshot::from_json(&snap.to_json().unwrap()).unwrap();
        assert_eq!(back, snap);
        assert!(ModelSnapshot::from_json("{\"format\": 1}").is_err());
    }

    proptest::proptest! {
        #[test]
        fn argmax_ignores_temperature(seed in 0u64..500, t1 in 0.01f64..10.0, t2 in 0.01f64..10.0) {
            let mut rng = RngService::new(seed, 3);
            let protos = Prototypes::new(random_matrix(6, 4, &mut rng)).unwrap();
            let feats = Prototypes::new(random_matrix(5, 4, &mut rng)).unwrap();
            let a = predict_probs(feats.matrix(), &protos, t1);
            let b = predict_probs(feats.matrix(), &protos, t2);
            for r in 0..5 {
                proptest::prop_assert_eq!(crate::linalg::argmax(a.row(r)), crate::linalg::argmax(b.row(r)));
                let s: f64 = a.row(r).iter().sum();
                proptest::prop_assert!((s - 1.0).abs() <= 1e-9);
                proptest::prop_assert!(a.row(r).iter().all(|&v| v >= 0.0));
            }
        }
    }
}
