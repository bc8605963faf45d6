use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{accuracy, mean_cross_entropy, Adam, NetworkConfig, NetworkState, SnapshotSamples};
use crate::dataset::{Dataset, Split};
use crate::trace::{ActivationTrace, Snapshot, TraceManifest};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    /// Mean cross-entropy over the training set, in nats, without the L2 term.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub records: Vec<EpochMetrics>,
}

impl TrainMetrics {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.records.last()
    }
}

/// Trains a network and records activations at every scheduled epoch.
///
/// Epoch `e` in the schedule means "after `e` full passes", so epoch 0 is the
/// initialized network. The per-epoch shuffle uses a stream of the config
/// seed separate from initialization.
pub fn train(
    config: &NetworkConfig,
    dataset: &Dataset,
    split: &Split,
) -> Result<(ActivationTrace, TrainMetrics)> {
    config.validate()?;
    if split.train_indices.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    if let Some(&i) = split
        .train_indices
        .iter()
        .chain(&split.test_indices)
        .find(|&&i| i >= dataset.len())
    {
        return Err(Error::InvalidArgument(format!(
            "split index {i} out of range for {} samples",
            dataset.len()
        )));
    }

    let schedule = config.snapshot_schedule();
    let mut state = NetworkState::initialize(config)?;
    let adam = Adam::default();
    let inputs = dataset.input_matrix();
    let labels = dataset.labels();

    let recorded_rows: Vec<usize> = match config.snapshot_samples {
        SnapshotSamples::Full => (0..dataset.len()).collect(),
        SnapshotSamples::Train => split.train_indices.clone(),
    };
    let recorded_labels: Vec<u8> = recorded_rows.iter().map(|&i| labels[i]).collect();
    let recorded_inputs = match config.snapshot_samples {
        SnapshotSamples::Full => inputs.clone(),
        SnapshotSamples::Train => inputs.select_rows(&recorded_rows),
    };

    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut metrics = TrainMetrics::default();
    let mut record = |state: &NetworkState, epoch: u64| -> Result<()> {
        let cache = state.forward_cache(&inputs).map_err(|e| e.at_epoch(epoch))?;
        let full_logits = cache.pre.last().unwrap();
        let full = cache.post;
        let outputs = full.last().unwrap();
        let train_labels: Vec<u8> = split.train_indices.iter().map(|&i| labels[i]).collect();
        let test_labels: Vec<u8> = split.test_indices.iter().map(|&i| labels[i]).collect();
        metrics.records.push(EpochMetrics {
            epoch,
            train_loss: mean_cross_entropy(&full_logits.select_rows(&split.train_indices), &train_labels),
            train_accuracy: accuracy(&outputs.select_rows(&split.train_indices), &train_labels),
            test_accuracy: accuracy(&outputs.select_rows(&split.test_indices), &test_labels),
        });
        let layers = match config.snapshot_samples {
            SnapshotSamples::Full => full,
            SnapshotSamples::Train => state.forward(&recorded_inputs).map_err(|e| e.at_epoch(epoch))?,
        };
        snapshots.push(Snapshot { epoch, layers });
        Ok(())
    };

    let mut next_snapshot = schedule.iter().peekable();
    if next_snapshot.peek() == Some(&&0) {
        record(&state, 0)?;
        next_snapshot.next();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order = split.train_indices.clone();
    let mut batch_labels = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = inputs.select_rows(chunk);
            batch_labels.clear();
            batch_labels.extend(chunk.iter().map(|&i| labels[i]));
            let (_, grads) = state
                .loss_and_gradients(&batch, &batch_labels, config.l2_lambda)
                .map_err(|e| e.at_epoch(epoch))?;
            state.adam_step(&grads, config.learning_rate, &adam)?;
        }
        if next_snapshot.peek() == Some(&&epoch) {
            record(&state, epoch)?;
            next_snapshot.next();
        }
    }

    let manifest = TraceManifest {
        layer_units: state.layer_units(),
        epochs: schedule,
        config: config.clone(),
        dataset_fingerprint: dataset.fingerprint(),
        labels: TraceManifest::encode_labels(&recorded_labels),
    };
    let trace = ActivationTrace::new(manifest, snapshots)?;
    Ok((trace, metrics))
}
