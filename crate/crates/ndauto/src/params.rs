use std::collections::HashMap;

use crate::array::Array;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ParamId(pub usize);

/// Named trainable value with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Array,
    pub grad: Array,
}

/// Flat arena of parameters. Registration order is fixed by the caller and
/// determines iteration order everywhere (checkpoints, optimizer state,
/// gradient reduction).
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Array) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name:?}")));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        let grad = Array::zeros(value.shape());
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array {
        &self.params[id.0].value
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = Array::zeros(p.value.shape());
        }
    }

    /// Adds `grads` into the per-parameter gradient accumulators.
    pub fn accumulate(&mut self, grads: &ParamGrads) -> Result<()> {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id.0];
            if g.shape() != p.grad.shape() {
                return Err(Error::shape(
                    format!("gradient for {}", p.name),
                    format!("{:?}", p.grad.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            for (d, s) in p.grad.data_mut().iter_mut().zip(g.data()) {
                *d += s;
            }
        }
        Ok(())
    }

    pub fn grad_global_norm(&self) -> f64 {
        let mut acc = 0.0;
        for p in &self.params {
            for &v in p.grad.data() {
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            for v in p.grad.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// Gradients harvested from one backward pass, keyed by parameter id.
/// Parameters not reached by the loss are absent (treated as zero).
#[derive(Clone, Debug, Default)]
pub struct ParamGrads {
    grads: HashMap<usize, Array>,
}

impl ParamGrads {
    pub fn new() -> ParamGrads {
        ParamGrads::default()
    }

    pub fn add(&mut self, id: ParamId, grad: Array) {
        match self.grads.get_mut(&id.0) {
            Some(existing) => {
                for (d, s) in existing.data_mut().iter_mut().zip(grad.data()) {
                    *d += s;
                }
            }
            None => {
                self.grads.insert(id.0, grad);
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array> {
        self.grads.get(&id.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array)> {
        self.grads.iter().map(|(&i, g)| (ParamId(i), g))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
