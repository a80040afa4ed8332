use std::collections::BTreeMap;

use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Tensors keyed by fully qualified name (`encoder.fc0.weight`, `head.weight`, ...).
pub type ParamMap<T = f64> = BTreeMap<String, Tensor<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Head,
}

impl ParamGroup {
    pub fn of(name: &str) -> Self {
        if name.starts_with("head.") {
            ParamGroup::Head
        } else {
            ParamGroup::Encoder
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            ParamGroup::Encoder => "encoder.",
            ParamGroup::Head => "head.",
        }
    }
}

/// Encoder (θ) and head (φ) parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams<T = f64> {
    pub encoder: ParamMap<T>,
    pub head: ParamMap<T>,
}

impl<T: Real> ModelParams<T> {
    fn group_mut(&mut self, name: &str) -> (&mut ParamMap<T>, String) {
        let group = ParamGroup::of(name);
        let local = name
            .strip_prefix(group.prefix())
            .unwrap_or(name)
            .to_string();
        let map = match group {
            ParamGroup::Encoder => &mut self.encoder,
            ParamGroup::Head => &mut self.head,
        };
        (map, local)
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) {
        let (map, local) = self.group_mut(name);
        map.insert(local, value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        match ParamGroup::of(name) {
            ParamGroup::Encoder => self.encoder.get(name.strip_prefix("encoder.")?),
            ParamGroup::Head => self.head.get(name.strip_prefix("head.")?),
        }
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let (map, local) = self.group_mut(name);
        map.get_mut(&local)
    }

    pub fn len(&self) -> usize {
        self.encoder.len() + self.head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters with fully qualified names, encoder first, each group in name order.
    pub fn iter(&self) -> impl Iterator<Item = (String, &Tensor<T>)> {
        self.encoder
            .iter()
            .map(|(k, v)| (format!("encoder.{k}"), v))
            .chain(self.head.iter().map(|(k, v)| (format!("head.{k}"), v)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (String, &mut Tensor<T>)> {
        self.encoder
            .iter_mut()
            .map(|(k, v)| (format!("encoder.{k}"), v))
            .chain(self.head.iter_mut().map(|(k, v)| (format!("head.{k}"), v)))
    }

    pub fn to_map(&self) -> ParamMap<T> {
        self.iter().map(|(k, v)| (k, v.clone())).collect()
    }

    /// Places every parameter on the tape.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> ParamVars {
        let vars = self
            .iter()
            .map(|(name, t)| {
                let v = if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                };
                (name, v)
            })
            .collect();
        ParamVars { vars }
    }

    /// Total element count.
    pub fn numel(&self) -> usize {
        self.iter().map(|(_, t)| t.len()).sum()
    }
}

/// Tape handles for bound parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamVars {
    vars: BTreeMap<String, Var>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Gradients after `backward`; parameters unreachable from the root are omitted.
    pub fn grads<T: Real>(&self, tape: &Tape<T>) -> ParamMap<T> {
        self.vars
            .iter()
            .filter_map(|(k, &v)| tape.grad(v).map(|g| (k.clone(), g.clone())))
            .collect()
    }
}
