//! Central-difference gradient oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonocl::neural::{Graph, Mode, Model, Var};

pub const FD_EPS: f64 = 1e-5;
/// Gradients below this magnitude are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Checks every input coordinate of a scalar graph function.
/// `build` receives the input vars and returns the scalar output.
pub fn check_inputs<F>(inputs: &[(Vec<usize>, Vec<f64>)], build: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |vals: &[(Vec<usize>, Vec<f64>)]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals
            .iter()
            .map(|(s, d)| g.input(s.clone(), d.clone()).unwrap())
            .collect();
        let out = build(&mut g, &vars);
        g.value(out)[0]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|(s, d)| g.input_with_grad(s.clone(), d.clone()).unwrap())
        .collect();
    let out = build(&mut g, &vars);
    g.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[k].1.len()]);
        for i in 0..inputs[k].1.len() {
            let mut plus = inputs.to_vec();
            plus[k].1[i] += FD_EPS;
            let mut minus = inputs.to_vec();
            minus[k].1[i] -= FD_EPS;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_EPS);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

/// Loss of a model on a batch, built inside a fresh graph.
pub type ModelLoss<'a> = dyn Fn(&Model, &mut Graph, Mode) -> Var + 'a;

/// Checks up to `per_tensor` seeded coordinates of every trainable tensor.
pub fn check_params(model: &Model, loss: &ModelLoss<'_>, per_tensor: usize, seed: u64) -> f64 {
    let mode = Mode::Train { seed };
    let eval = |m: &Model| -> f64 {
        let mut g = Graph::new();
        let l = loss(m, &mut g, mode);
        g.value(l)[0]
    };
    let mut g = Graph::new();
    let l = loss(model, &mut g, mode);
    g.backward(l).unwrap();
    let grads = g.param_grads();
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for (id, p) in model.params.params.iter().enumerate() {
        if !p.trainable {
            continue;
        }
        let analytic = grads
            .iter()
            .find(|(k, _)| *k == id)
            .map(|(_, g)| g.clone())
            .unwrap_or_else(|| vec![0.0; p.len()]);
        let coords: Vec<usize> = if p.len() <= per_tensor {
            (0..p.len()).collect()
        } else {
            (0..per_tensor).map(|_| r.random_range(0..p.len())).collect()
        };
        for i in coords {
            let orig = p.data[i];
            probe.params.get_mut(id).data[i] = orig + FD_EPS;
            let up = eval(&probe);
            probe.params.get_mut(id).data[i] = orig - FD_EPS;
            let down = eval(&probe);
            probe.params.get_mut(id).data[i] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            let e = rel_err(analytic[i], numeric);
            if e > 1e-4 {
                eprintln!("{} [{i}]: analytic {} numeric {numeric}", p.name, analytic[i]);
            }
            worst = worst.max(e);
        }
    }
    worst
}

/// Cross-entropy on a random batch for a 2-way classifier.
pub fn classifier_loss(model: &Model, batch: usize, seed: u64) -> impl Fn(&Model, &mut Graph, Mode) -> Var {
    let samples: Vec<Vec<f64>> = (0..batch)
        .map(|b| random_vec(model.input_len(), seed + b as u64))
        .collect();
    let labels: Vec<usize> = (0..batch).map(|b| b % 2).collect();
    move |m: &Model, g: &mut Graph, mode: Mode| {
        let rows: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        let inputs = m.input_batch(g, &rows).unwrap();
        let out = m.forward(g, &inputs, mode).unwrap();
        g.softmax_cross_entropy(out.output, &labels).unwrap()
    }
}

/// Contrastive loss of one pair through a shared tower.
pub fn pair_loss(model: &Model, same: bool, margin: f64, seed: u64) -> impl Fn(&Model, &mut Graph, Mode) -> Var {
    let samples: Vec<Vec<f64>> = (0..2).map(|b| random_vec(model.input_len(), seed + b)).collect();
    let y = if same { 1.0 } else { 0.0 };
    move |m: &Model, g: &mut Graph, mode: Mode| {
        let rows: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        let inputs = m.input_batch(g, &rows).unwrap();
        let e = m.forward(g, &inputs, mode).unwrap().embedding;
        let a = g.select_rows(e, &[0]).unwrap();
        let b = g.select_rows(e, &[1]).unwrap();
        let d = g.l2_distance(a, b).unwrap();
        g.contrastive_loss(d, &[y], margin).unwrap()
    }
}
