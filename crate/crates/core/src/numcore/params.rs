use indexmap::IndexMap;

use super::Tensor2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor2,
    pub grad: Tensor2,
    /// Set when a backward pass has written into `grad` since the last
    /// optimizer step.
    pub populated: bool,
}

/// Named parameters in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor2) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name {name}")));
        }
        let (r, c) = value.shape();
        self.entries.insert(
            name,
            Param {
                value,
                grad: Tensor2::zeros(r, c),
                populated: false,
            },
        );
        Ok(())
    }

    /// Inserts or overwrites; an existing entry must keep its shape.
    pub fn set(&mut self, name: &str, value: Tensor2) -> Result<()> {
        match self.entries.get_mut(name) {
            Some(p) => {
                if p.value.shape() != value.shape() {
                    return Err(Error::dim("ParamStore::set", p.value.shape(), value.shape()));
                }
                p.value = value;
                Ok(())
            }
            None => self.insert(name, value),
        }
    }

    pub fn remove_prefix(&mut self, prefix: &str) {
        self.entries.retain(|k, _| !k.starts_with(prefix));
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.entries.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor2> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Adds `grad` into the named accumulator and marks it populated.
    pub fn accumulate(&mut self, name: &str, grad: &Tensor2) -> Result<()> {
        let p = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))?;
        p.grad.add_assign(grad)?;
        p.populated = true;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.data_mut().fill(0.0);
            p.populated = false;
        }
    }

    /// Copies every entry whose name starts with `prefix` from `other`.
    pub fn copy_prefix_from(&mut self, other: &ParamStore, prefix: &str) -> Result<usize> {
        let mut n = 0;
        for (name, p) in other.iter() {
            if name.starts_with(prefix) {
                self.set(name, p.value.clone())?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Little-endian bytes of every value whose name starts with `prefix`,
    /// in store order. Used to verify freeze contracts.
    pub fn value_bytes(&self, prefix: &str) -> Vec<u8> {
        let mut out = Vec::new();
        for (name, p) in self.iter() {
            if name.starts_with(prefix) {
                out.extend_from_slice(name.as_bytes());
                for v in p.value.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_is_iteration_order() {
        let mut s = ParamStore::new();
        for name in ["z", "a", "m"] {
            s.insert(name, Tensor2::zeros(1, 1)).unwrap();
        }
        assert_eq!(s.names().collect::<Vec<_>>(), ["z", "a", "m"]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor2::zeros(1, 1)).unwrap();
        assert!(s.insert("w", Tensor2::zeros(1, 1)).is_err());
    }

    #[test]
    fn accumulate_checks_shape() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor2::zeros(2, 1)).unwrap();
        assert!(s.accumulate("w", &Tensor2::zeros(1, 2)).is_err());
        s.accumulate("w", &Tensor2::filled(2, 1, 1.5)).unwrap();
        s.accumulate("w", &Tensor2::filled(2, 1, 1.5)).unwrap();
        assert_eq!(s.get("w").unwrap().grad.data(), &[3.0, 3.0]);
    }
}
