use crate::error::{Error, Result};
use crate::tables::{FeatureRow, FeatureTable, PredictionLog, PredictionRow};
use crate::trainctl::Checkpoint;

/// Dense softmax layer: `logits = W x + b`.
///
/// Parameters flatten as the row-major weight matrix followed by the biases;
/// gradients and optimizer state use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub num_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        LinearHead {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * dim],
            biases: vec![0.0; num_classes],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.weights);
        p.extend_from_slice(&self.biases);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let (w, b) = params.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.biases.copy_from_slice(b);
        Ok(())
    }

    pub fn to_checkpoint(&self, classes: &[String]) -> Checkpoint {
        Checkpoint {
            classes: classes.to_vec(),
            params: self.params(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, dim: usize) -> Result<Self> {
        let mut head = LinearHead::zeros(ckpt.classes.len(), dim);
        head.set_params(&ckpt.params)?;
        Ok(head)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim.max(1))
            .take(self.num_classes)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `batch` and its gradient in the flat parameter
/// layout. Rows are accumulated in order, so results are bit-stable.
pub fn loss_and_grad(head: &LinearHead, batch: &[&FeatureRow]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let (c, d) = (head.num_classes, head.dim);
    let mut grad = vec![0.0; head.param_count()];
    let mut loss = 0.0;
    for row in batch {
        if row.label >= c {
            return Err(Error::UnknownLabel(format!(
                "label index {} for row {}",
                row.label, row.id
            )));
        }
        let logits = head.logits(&row.features)?;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - logits[row.label];
        for k in 0..c {
            let delta = (logits[k] - log_sum).exp() - if k == row.label { 1.0 } else { 0.0 };
            let gw = &mut grad[k * d..(k + 1) * d];
            for (g, x) in gw.iter_mut().zip(&row.features) {
                *g += delta * x;
            }
            grad[c * d + k] += delta;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Score every row of `features`, one log row per feature row.
pub fn predict(head: &LinearHead, features: &FeatureTable) -> Result<PredictionLog> {
    let rows = features
        .rows
        .iter()
        .map(|r| {
            let probs = head.forward(&r.features)?;
            Ok(PredictionRow {
                id: r.id.clone(),
                truth: r.label,
                predicted: argmax(&probs),
                probs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionLog {
        classes: features.classes.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn random_head(s: &mut Stream, c: usize, d: usize) -> LinearHead {
        let mut h = LinearHead::zeros(c, d);
        let params: Vec<f64> = (0..h.param_count())
            .map(|_| s.unit_f64() * 4.0 - 2.0)
            .collect();
        h.set_params(&params).unwrap();
        h
    }

    #[test]
    fn zero_head_is_uniform() {
        let h = LinearHead::zeros(5, 3);
        let p = h.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn dominant_bias_wins() {
        let mut h = LinearHead::zeros(5, 2);
        h.biases[0] = 10.0;
        let p = h.forward(&[0.3, 0.3]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-3 && p[0] > 0.9998);
    }

    #[test]
    fn probabilities_sum_to_one_and_shift_invariant() {
        let mut s = Stream::from_seed(5);
        for _ in 0..100 {
            let h = random_head(&mut s, 6, 4);
            let x: Vec<f64> = (0..4).map(|_| s.unit_f64() * 10.0 - 5.0).collect();
            let logits = h.logits(&x).unwrap();
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|z| z + 123.456).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let h = LinearHead::zeros(2, 3);
        assert!(matches!(
            h.forward(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn uniform_head_loss_is_ln_n() {
        let h = LinearHead::zeros(5, 2);
        let rows: Vec<FeatureRow> = (0..5)
            .map(|i| FeatureRow {
                id: i.to_string(),
                label: i,
                features: vec![i as f64, 1.0],
            })
            .collect();
        let batch: Vec<&FeatureRow> = rows.iter().collect();
        let (loss, _) = loss_and_grad(&h, &batch).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_head_has_near_zero_loss() {
        let mut h = LinearHead::zeros(2, 1);
        h.weights = vec![50.0, -50.0];
        let rows = [
            FeatureRow {
                id: "a".into(),
                label: 0,
                features: vec![1.0],
            },
            FeatureRow {
                id: "b".into(),
                label: 1,
                features: vec![-1.0],
            },
        ];
        let (loss, _) = loss_and_grad(&h, &rows.iter().collect::<Vec<_>>()).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(loss_and_grad(&LinearHead::zeros(2, 2), &[]).is_err());
    }

    #[test]
    fn uniform_head_predicts_class_zero() {
        let mut t = FeatureTable::new(2, vec!["a".into(), "b".into(), "c".into()]);
        for i in 0..4 {
            t.push(FeatureRow {
                id: format!("r{i}"),
                label: i % 3,
                features: vec![i as f64, 0.5],
            })
            .unwrap();
        }
        let log = predict(&LinearHead::zeros(3, 2), &t).unwrap();
        assert_eq!(log.rows.len(), 4);
        assert!(log.rows.iter().all(|r| r.predicted == 0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut s = Stream::from_seed(1);
        let h = random_head(&mut s, 3, 4);
        let classes = vec!["a".to_string(), "b".into(), "c".into()];
        let back = LinearHead::from_checkpoint(&h.to_checkpoint(&classes), 4).unwrap();
        assert_eq!(back, h);
    }
}
