use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::util::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Updated by the optimizer. Running statistics are not trainable.
    pub trainable: bool,
    /// Temporarily excluded from updates, e.g. encoders under a fusion head.
    pub frozen: bool,
}

impl Param {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Flat list of parameters addressed by index. One store can back several
/// graph instances at once, which is how twin towers share weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub params: Vec<Param>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>, trainable: bool) -> usize {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        self.params.push(Param {
            name: name.into(),
            shape,
            data,
            trainable,
            frozen: false,
        });
        self.params.len() - 1
    }

    /// Kaiming-uniform weights: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    pub fn kaiming(&mut self, name: impl Into<String>, shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> usize {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, shape, data, true)
    }

    pub fn constant(&mut self, name: impl Into<String>, shape: Vec<usize>, value: f64, trainable: bool) -> usize {
        let n = shape.iter().product();
        self.add(name, shape, vec![value; n], trainable)
    }

    pub fn get(&self, id: usize) -> &Param {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Param {
        &mut self.params[id]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of trainable scalars.
    pub fn n_trainable(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(Param::len).sum()
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.params.iter_mut().for_each(|p| p.frozen = frozen);
    }

    /// Concatenation of every parameter value, in order.
    pub fn flat(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.data.iter().copied()).collect()
    }
}
