//! Teacher-forced training with periodic dev decoding and early stopping
//! on dev graph accuracy.
//!
//! Batches accumulate per-example gradients (each example runs on its own
//! tape, so shapes never pad). With `threads > 1` a batch splits into
//! contiguous shards that run in parallel; shard gradients merge in shard
//! order, so a run is reproducible for a fixed thread count.

use graft_core::{
    apply_actions, derive_actions, reduce_extended, ActionSequence, Rng, Triple,
};
use graft_tensor::{adam_step, AdamState, Gradients, LrSchedule, Scalar, Tape};

use crate::decode::{decode_all, subsample_fraction};
use crate::error::ModelError;
use crate::loss::example_loss;
use crate::metrics::MetricsReport;
use crate::net::Model;
use crate::parallel::map_indexed;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Evaluations without a dev graph-accuracy improvement before
    /// stopping.
    pub patience: usize,
    pub seed: u64,
    pub warmup_steps: u64,
    /// Dev evaluation cadence, in epochs.
    pub eval_interval: usize,
    pub threads: usize,
    /// Deterministic training subsample in `(0, 1]`.
    pub train_fraction: f64,
    pub max_decode_steps: usize,
    /// Stop as soon as dev graph accuracy reaches this value.
    pub target_gacc: f64,
    /// Emit progress lines to stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_epochs: 100,
            patience: 5,
            seed: 1,
            warmup_steps: 2000,
            eval_interval: 1,
            threads: 1,
            train_fraction: 1.0,
            max_decode_steps: crate::decode::DEFAULT_MAX_STEPS,
            target_gacc: 1.0 + f64::EPSILON,
            verbose: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_interval == 0 {
            return bad("batch size, epochs, and eval interval must be positive");
        }
        if !(0.0..=1.0).contains(&self.train_fraction) || self.train_fraction == 0.0 {
            return bad("train_fraction must be in (0, 1]");
        }
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be at least 1");
        }
        Ok(())
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub best_dev_gacc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Mean batch loss per optimizer step, in order.
    pub loss_trace: Vec<f64>,
    /// One line per dev evaluation.
    pub log: Vec<String>,
}

/// Trains in place, leaving the best-dev-accuracy parameters in the
/// model. Every training triple must survive the oracle round trip.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    train_triples: &[Triple],
    dev_triples: &[Triple],
    cfg: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    cfg.validate()?;
    let triples = subsample_fraction(train_triples, cfg.train_fraction, cfg.seed);

    // gold action sequences, verified lossless up front
    let actions: Vec<ActionSequence> = triples
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let seq = derive_actions(&t.source, &t.target);
            let ok = apply_actions(&t.source, &seq)
                .map(|ext| {
                    reduce_extended(&ext).canonical_serialize()
                        == t.target.canonical_serialize()
                })
                .unwrap_or(false);
            if ok {
                Ok(seq)
            } else {
                Err(ModelError::OracleMismatch { index })
            }
        })
        .collect::<Result<_, _>>()?;

    let schedule = LrSchedule::with_warmup(model.config.hidden_dim, cfg.warmup_steps);
    let mut adam: AdamState<S> = AdamState::new();
    let mut shuffle_rng = Rng::derive(cfg.seed, &[0x5C]);

    let mut report = TrainReport {
        best_dev_gacc: f64::NEG_INFINITY,
        best_epoch: 0,
        epochs_run: 0,
        loss_trace: Vec::new(),
        log: Vec::new(),
    };
    let mut best_params = model.store.clone();
    let mut evals_since_best = 0usize;

    'epochs: for epoch in 1..=cfg.max_epochs {
        report.epochs_run = epoch;
        let mut order: Vec<usize> = (0..triples.len()).collect();
        shuffle_rng.shuffle(&mut order);

        for batch in order.chunks(cfg.batch_size) {
            let shard_results: Vec<Result<(Gradients<S>, f64), ModelError>> =
                map_indexed(batch, cfg.threads, |_, &example| {
                    let mut tape = Tape::new().with_rng(Rng::derive(
                        cfg.seed,
                        &[0xD0, epoch as u64, example as u64],
                    ));
                    let t = &triples[example];
                    let loss = example_loss(
                        model,
                        &mut tape,
                        &t.source,
                        &t.query,
                        &actions[example],
                        true,
                    )?;
                    let value = tape.get(loss).item()?;
                    let grads = tape.backward(loss)?;
                    Ok((grads, value.to_f64().unwrap_or(f64::NAN)))
                });

            let mut batch_loss = 0.0;
            for result in shard_results {
                let (grads, value) = result?;
                model.store.accumulate(&grads);
                batch_loss += value;
            }
            model.store.scale_grads(S::lit(1.0 / batch.len() as f64));
            adam_step(&mut model.store, &mut adam, &schedule)?;
            report.loss_trace.push(batch_loss / batch.len() as f64);
        }

        if epoch % cfg.eval_interval == 0 {
            let preds = decode_all(model, dev_triples, cfg.max_decode_steps, cfg.threads)?;
            let metrics = MetricsReport::from_pairs(&preds, dev_triples)?;
            let mean_loss = {
                let recent = &report.loss_trace[report.loss_trace.len().saturating_sub(16)..];
                recent.iter().sum::<f64>() / recent.len().max(1) as f64
            };
            let line = format!(
                "epoch {epoch} loss {mean_loss:.4} dev_node_f1 {:.4} dev_edge_f1 {:.4} dev_gacc {:.4}",
                metrics.node_f1, metrics.edge_f1, metrics.graph_acc
            );
            if cfg.verbose {
                eprintln!("{line}");
            }
            report.log.push(line);

            if metrics.graph_acc > report.best_dev_gacc {
                report.best_dev_gacc = metrics.graph_acc;
                report.best_epoch = epoch;
                best_params = model.store.clone();
                evals_since_best = 0;
            } else {
                evals_since_best += 1;
            }
            if metrics.graph_acc >= cfg.target_gacc || evals_since_best >= cfg.patience {
                break 'epochs;
            }
        }
    }

    if report.log.is_empty() {
        // no eval ever ran; score the final parameters once
        let preds = decode_all(model, dev_triples, cfg.max_decode_steps, cfg.threads)?;
        let metrics = MetricsReport::from_pairs(&preds, dev_triples)?;
        report.best_dev_gacc = metrics.graph_acc;
        report.best_epoch = report.epochs_run;
        report.log.push(metrics.machine_line("dev"));
        best_params = model.store.clone();
    }

    model.store = best_params;
    Ok(report)
}
