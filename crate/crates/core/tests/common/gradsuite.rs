//! Finite-difference checks shared by the gradient tests and the acceptance run.
//! Each check returns the largest relative error it saw.

use super::gradcheck::{check_inputs, check_params, classifier_loss, pair_loss, random_vec};
use sonocl::neural::{build, Arch, Graph, Model, Padding, ParamStore, Var, Variant};

pub const TOL: f64 = 1e-4;

fn probe(g: &mut Graph, y: Var, seed: u64) -> Var {
    let w = random_vec(g.value(y).len(), seed);
    g.weighted_sum(y, &w).unwrap()
}

pub fn dense_and_activations() -> f64 {
    let inputs = vec![
        (vec![3, 4], random_vec(12, 1)),
        (vec![4, 5], random_vec(20, 2)),
        (vec![5], random_vec(5, 3)),
    ];
    check_inputs(&inputs, |g, v| {
        let y = g.dense(v[0], v[1], Some(v[2])).unwrap();
        let r = g.relu(y);
        let s = g.sigmoid(r);
        probe(g, s, 9)
    })
}

pub fn conv2d_grouped_same_and_valid() -> f64 {
    let mut worst: f64 = 0.0;
    for (groups, padding, kh, kw) in [(1, Padding::Same, 3, 3), (2, Padding::Valid, 2, 3), (4, Padding::Same, 1, 4)] {
        let inputs = vec![
            (vec![2, 4, 5, 6], random_vec(240, 4)),
            (vec![4, 4 / groups, kh, kw], random_vec(4 * (4 / groups) * kh * kw, 5)),
            (vec![4], random_vec(4, 6)),
        ];
        worst = worst.max(check_inputs(&inputs, |g, v| {
            let y = g.conv2d(v[0], v[1], Some(v[2]), groups, padding).unwrap();
            probe(g, y, 7)
        }));
    }
    worst
}

pub fn conv1d_and_maxpool1d() -> f64 {
    let inputs = vec![(vec![2, 3, 11], random_vec(66, 8)), (vec![5, 3, 7], random_vec(105, 9))];
    check_inputs(&inputs, |g, v| {
        let y = g.conv1d(v[0], v[1], None, Padding::Same).unwrap();
        let p = g.maxpool1d(y, 2).unwrap();
        probe(g, p, 10)
    })
}

pub fn pooling_2d() -> f64 {
    let inputs = vec![(vec![2, 3, 7, 9], random_vec(378, 11))];
    check_inputs(&inputs, |g, v| {
        let a = g.maxpool2d(v[0], 2, 2).unwrap();
        let b = g.avgpool2d(v[0], 1, 4).unwrap();
        let fa = g.flatten(a).unwrap();
        let fb = g.flatten(b).unwrap();
        let c = g.concat(fa, fb).unwrap();
        probe(g, c, 12)
    })
}

pub fn batchnorm_both_modes() -> f64 {
    let store = {
        let mut s = ParamStore::default();
        s.constant("m", vec![3], 0.0, false);
        s.constant("v", vec![3], 1.0, false);
        s
    };
    let inputs = vec![
        (vec![4, 3, 2, 2], random_vec(48, 13)),
        (vec![3], random_vec(3, 14)),
        (vec![3], random_vec(3, 15)),
    ];
    [true, false]
        .into_iter()
        .map(|train| {
            check_inputs(&inputs, |g, v| {
                let y = g.batchnorm(v[0], v[1], v[2], (0, 1), &store, train).unwrap();
                probe(g, y, 16)
            })
        })
        .fold(0.0, f64::max)
}

pub fn dropout_reshape_select() -> f64 {
    let inputs = vec![(vec![4, 6], random_vec(24, 17))];
    check_inputs(&inputs, |g, v| {
        let d = g.dropout(v[0], 0.5, 3).unwrap();
        let r = g.reshape(d, vec![2, 12]).unwrap();
        let s = g.select_rows(r, &[1, 0, 1]).unwrap();
        probe(g, s, 18)
    })
}

pub fn contrastive_loss() -> f64 {
    let inputs = vec![(vec![3, 4], random_vec(12, 19)), (vec![3, 4], random_vec(12, 20))];
    check_inputs(&inputs, |g, v| {
        let d = g.l2_distance(v[0], v[1]).unwrap();
        g.contrastive_loss(d, &[1.0, 0.0, 0.0], 2.0).unwrap()
    })
}

pub fn cross_entropy_loss() -> f64 {
    let logits = vec![(vec![4, 3], random_vec(12, 21))];
    check_inputs(&logits, |g, v| g.softmax_cross_entropy(v[0], &[0, 2, 1, 2]).unwrap())
}

pub fn primitives() -> Vec<(&'static str, f64)> {
    vec![
        ("dense+relu+sigmoid", dense_and_activations()),
        ("conv2d", conv2d_grouped_same_and_valid()),
        ("conv1d+maxpool1d", conv1d_and_maxpool1d()),
        ("pool2d+flatten+concat", pooling_2d()),
        ("batchnorm", batchnorm_both_modes()),
        ("dropout+reshape+select", dropout_reshape_select()),
        ("contrastive", contrastive_loss()),
        ("cross-entropy", cross_entropy_loss()),
    ]
}

fn per_tensor(arch: Arch) -> usize {
    match arch {
        Arch::Cnn1d => 6,
        Arch::EegNet => 8,
        Arch::FusionMlp => 10,
        _ => 4,
    }
}

/// Classifier architectures end to end on a batch of two.
pub fn architecture(arch: Arch) -> f64 {
    let model = Model::new(build(arch, 42).unwrap()).unwrap();
    let loss = classifier_loss(&model, 2, 100);
    check_params(&model, &loss, per_tensor(arch), 7)
}

/// The Siamese tower through the contrastive loss, for a positive and a
/// negative pair.
pub fn siamese() -> f64 {
    let model = Model::new(build(Arch::Siamese, 42).unwrap()).unwrap();
    [true, false]
        .into_iter()
        .map(|same| {
            let loss = pair_loss(&model, same, 1e3, 200);
            check_params(&model, &loss, 6, 8)
        })
        .fold(0.0, f64::max)
}

pub fn classifier_archs() -> Vec<Arch> {
    let mut all = vec![Arch::Cnn1d, Arch::EegNet];
    all.extend(Variant::ALL.iter().map(|&v| Arch::Topo(v)));
    all.extend(Variant::ALL.iter().map(|&v| Arch::Spect(v)));
    all.push(Arch::FusionMlp);
    all
}
