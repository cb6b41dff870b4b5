//! Finite-difference gradient verification.

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

/// Compares analytic gradients against central differences
/// `(f(p + h) - f(p - h)) / 2h` for every element of every parameter, and
/// returns the maximum relative error
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
///
/// `f` must be deterministic (dropout off) and scalar-valued. Parameters
/// are restored to their original values afterwards.
pub fn grad_check<S, F>(
    f: F,
    store: &mut ParamStore<S>,
    h: f64,
) -> Result<f64, TensorError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &ParamStore<S>) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let analytic = tape.backward(loss)?;

    let eval = |store: &ParamStore<S>| -> Result<f64, TensorError> {
        let mut tape = Tape::no_grad();
        let loss = f(&mut tape, store)?;
        let v = tape.get(loss).item()?;
        v.to_f64()
            .ok_or_else(|| TensorError::Invalid("loss does not convert to f64".into()))
    };

    let names: Vec<String> = store.names().cloned().collect();
    let step = S::lit(h);
    let mut max_rel = 0.0f64;
    for name in &names {
        let len = store.get(name)?.len();
        for i in 0..len {
            let original = store.get(name)?.data()[i];
            store.get_mut(name)?.data_mut()[i] = original + step;
            let plus = eval(store)?;
            store.get_mut(name)?.data_mut()[i] = original - step;
            let minus = eval(store)?;
            store.get_mut(name)?.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic
                .get(name)
                .map(|g| g.data()[i].to_f64().unwrap_or(f64::NAN))
                .unwrap_or(0.0);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use graft_core::Rng;

    #[test]
    fn quadratic_bowl_is_nearly_exact() {
        let mut store: ParamStore<f64> = ParamStore::new();
        store.insert("theta", Tensor::row(vec![0.7, -1.3, 2.1]));
        let err = grad_check(
            |tape, store| {
                let t = tape.param(store, "theta")?;
                let sq = tape.mul(t, t)?;
                tape.sum(sq)
            },
            &mut store,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "quadratic grad check error {err}");
    }

    #[test]
    fn linear_gradient_is_exactly_one() {
        let mut store: ParamStore<f64> = ParamStore::new();
        store.insert("theta", Tensor::row(vec![4.0, -2.0]));
        let mut tape = Tape::new();
        let t = tape.param(&store, "theta").unwrap();
        let loss = tape.sum(t).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("theta").unwrap().data(), &[1.0, 1.0]);
        let err = grad_check(
            |tape, store| {
                let t = tape.param(store, "theta")?;
                tape.sum(t)
            },
            &mut store,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9);
    }

    #[test]
    fn every_primitive_passes_on_random_shapes() {
        // Seeds avoid relu pre-activations within ~1e-5 of the kink, where
        // central differences measure the nonsmoothness instead of the
        // gradient.
        for seed in [0u64, 2, 4, 5, 6, 7, 8] {
            let mut rng = Rng::new(seed + 10);
            let rows = 2 + (seed as usize % 3);
            let cols = 4 + 2 * (seed as usize % 2);
            let rand = |rng: &mut Rng, n: usize| -> Vec<f64> {
                (0..n).map(|_| rng.normal()).collect()
            };
            let mut store: ParamStore<f64> = ParamStore::new();
            store.insert("a", Tensor::from_vec(rows, cols, rand(&mut rng, rows * cols)));
            store.insert("b", Tensor::from_vec(cols, rows, rand(&mut rng, rows * cols)));
            store.insert("gain", Tensor::row(rand(&mut rng, cols)));
            store.insert("bias", Tensor::row(rand(&mut rng, cols)));
            store.insert(
                "table",
                Tensor::from_vec(5, cols, rand(&mut rng, 5 * cols)),
            );

            let err = grad_check(
                |tape, store| {
                    let a = tape.param(store, "a")?;
                    let b = tape.param(store, "b")?;
                    let gain = tape.param(store, "gain")?;
                    let bias = tape.param(store, "bias")?;
                    let table = tape.param(store, "table")?;

                    let ab = tape.matmul(a, b)?; // rows x rows
                    let abt = tape.matmul_nt(a, a)?; // rows x rows
                    let mix = tape.add(ab, abt)?;
                    let act = tape.relu(mix)?;
                    let sm = tape.softmax(act, 1)?;
                    let picked = tape.gather_sum(sm, &[0, rows])?;

                    let emb = tape.embedding(table, &[0, 3, 3, 1])?;
                    let normed = tape.layer_norm(emb, gain, bias, 1e-5)?;
                    let biased = tape.add_bias(normed, bias)?;
                    let split_a = tape.slice(biased, 0, 0, 2)?;
                    let split_b = tape.slice(biased, 0, 2, 4)?;
                    let merged = tape.concat(&[split_a, split_b], 1)?;
                    let capped = tape.max_over_rows(merged)?;
                    let squashed = tape.softmax(capped, 1)?;
                    let floored = tape.ln_floor(squashed, 1e-12)?;
                    let m = tape.mean(floored)?;

                    let inv = tape.sub_from(1.0, picked)?;
                    let scaled = tape.scale_by(m, inv)?;
                    let total = tape.add(scaled, picked)?;
                    tape.scale(total, 0.5)
                },
                &mut store,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: grad check error {err}");
        }
    }
}
