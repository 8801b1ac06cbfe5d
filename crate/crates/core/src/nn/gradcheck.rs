//! Finite-difference gradient checking for graphs built on a [`ParamStore`].

use super::{Graph, ParamId, ParamStore, Tensor, Var};

/// Relative error between two gradient vectors, `|a - b| / max(|a|, |b|)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite differences of `loss` against every trainable parameter
/// and every input tensor, compared with the tape gradients.
///
/// `build` receives the graph and input variables and returns a scalar loss.
#[allow(clippy::needless_range_loop)]
pub fn check_gradients(
    store: &mut ParamStore<f64>,
    inputs: Vec<Tensor<f64>>,
    build: &dyn Fn(&mut Graph<'_, f64>, &[Var]) -> Var,
) -> f64 {
    const STEP: f64 = 1e-5;
    let eval = |store: &ParamStore<f64>, inputs: &[Tensor<f64>]| {
        let mut g = Graph::new(store);
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).data()[0]
    };

    let (analytic_params, analytic_inputs) = {
        let mut g = Graph::new(store);
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &vars);
        let grads = g.backward(loss);
        let ap: Vec<Vec<f64>> = store
            .iter()
            .map(|(id, p)| {
                grads
                    .param(id)
                    .map(|t| t.data().to_vec())
                    .unwrap_or_else(|| vec![0.0; p.tensor.len()])
            })
            .collect();
        let ai: Vec<Vec<f64>> = vars
            .iter()
            .zip(&inputs)
            .map(|(&v, t)| {
                grads
                    .wrt(v)
                    .map(|t| t.data().to_vec())
                    .unwrap_or_else(|| vec![0.0; t.len()])
            })
            .collect();
        (ap, ai)
    };

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let ids: Vec<ParamId> = store.iter().map(|(id, _)| id).collect();
    for (k, id) in ids.into_iter().enumerate() {
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            store.get_mut(id).tensor.data_mut()[i] = orig + STEP;
            let up = eval(store, &inputs);
            store.get_mut(id).tensor.data_mut()[i] = orig - STEP;
            let down = eval(store, &inputs);
            store.get_mut(id).tensor.data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * STEP));
            analytic.push(analytic_params[k][i]);
        }
    }
    for (k, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let mut shifted = inputs.clone();
            shifted[k].data_mut()[i] += STEP;
            let up = eval(store, &shifted);
            shifted[k].data_mut()[i] -= 2.0 * STEP;
            let down = eval(store, &shifted);
            numeric.push((up - down) / (2.0 * STEP));
            analytic.push(analytic_inputs[k][i]);
        }
    }
    rel_error(&analytic, &numeric)
}
