//! Shared fixtures for the model integration tests.

use graft_core::datagen::{generate_splits, GenConfig, Profile, VocabConfig};
use graft_core::Triple;
use graft_model::{Model, ModelConfig, ModelError, Vocab};
use graft_tensor::{Scalar, Tape, Var};

/// A small deterministic dataset from the real generator.
pub fn small_dataset(seed: u64, train: usize, dev: usize) -> (Vec<Triple>, Vec<Triple>) {
    let vocab = VocabConfig::builtin();
    let cfg = GenConfig::new(Profile::Mscoco, seed, train, dev.max(1), 1);
    let (train, dev, _, _) = generate_splits(&cfg, &vocab).expect("generation succeeds");
    (train, dev)
}

/// A tiny model over that dataset's vocabulary.
pub fn tiny_model(dim: usize, heads: usize, train: &[Triple], seed: u64) -> Model<f64> {
    let vocab = Vocab::build(train);
    let mut config = ModelConfig::tiny(dim, heads);
    config.dropout = 0.0;
    Model::new(config, vocab, seed).expect("model builds")
}

/// Central-difference gradient check against the model's own parameters:
/// max relative error over every element of every parameter.
#[allow(dead_code)]
pub fn model_grad_check<F>(model: &mut Model<f64>, f: F, h: f64) -> f64
where
    F: Fn(&mut Tape<f64>, &Model<f64>) -> Result<Var, ModelError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, model).expect("forward pass");
    let analytic = tape.backward(loss).expect("backward pass");

    let eval = |model: &Model<f64>| -> f64 {
        let mut tape = Tape::no_grad();
        let loss = f(&mut tape, model).expect("forward pass");
        tape.get(loss).item().expect("scalar loss")
    };

    let names: Vec<String> = model.store.names().cloned().collect();
    let mut max_rel = 0.0f64;
    for name in &names {
        let len = model.store.get(name).unwrap().len();
        for i in 0..len {
            let original = model.store.get(name).unwrap().data()[i];
            model.store.get_mut(name).unwrap().data_mut()[i] = original + h;
            let plus = eval(model);
            model.store.get_mut(name).unwrap().data_mut()[i] = original - h;
            let minus = eval(model);
            model.store.get_mut(name).unwrap().data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.get(name).map(|g| g.data()[i]).unwrap_or(0.0);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

/// Tokenized query helper.
#[allow(dead_code)]
pub fn toks(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

/// Scalarizes a tensor with fixed random weights. A plain mean is a bad
/// probe here: with unit layer-norm gains the normalized outputs sum to
/// zero per row, so the mean's upstream gradients vanish and the check
/// would only measure float noise.
#[allow(dead_code)]
pub fn probe_loss(
    tape: &mut graft_tensor::Tape<f64>,
    var: graft_tensor::Var,
    seed: u64,
) -> Result<graft_tensor::Var, ModelError> {
    let (rows, cols) = tape.shape_of(var);
    let mut rng = graft_core::Rng::new(seed ^ 0xBEEF);
    let weights = graft_tensor::Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.normal()).collect(),
    );
    let w = tape.value(weights);
    let prod = tape.mul(var, w)?;
    Ok(tape.sum(prod)?)
}

/// Forces the node decoder to emit one generation-vocabulary label by
/// biasing its output layer.
#[allow(dead_code)]
pub fn force_label<S: Scalar>(model: &mut Model<S>, label: &str, weight: f64) {
    let idx = model.vocab.gen_id(label).expect("label in gen vocab");
    let bias = model.store.get_mut("node.vocab.b").unwrap();
    bias.set(0, idx, S::lit(weight));
}
