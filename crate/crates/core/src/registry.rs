//! Name-keyed factories for pluggable components.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("unknown {kind} `{name}` (available: {available})")]
    Unknown { kind: &'static str, name: String, available: String },
    #[error("cannot build {kind} `{name}`: {message}")]
    Build { kind: &'static str, name: String, message: String },
}

type Factory<T, C> = Box<dyn Fn(&C) -> Result<Box<T>, String> + Send + Sync>;

/// Maps names to constructors of boxed trait objects. `C` is whatever
/// context a constructor needs (endpoint settings and the like).
pub struct Registry<T: ?Sized, C = ()> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T, C>>,
}

impl<T: ?Sized, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Registry { kind, factories: BTreeMap::new() }
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&C) -> Result<Box<T>, String> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, ctx: &C) -> Result<Box<T>, RegistryError> {
        let f = self.factories.get(name).ok_or_else(|| RegistryError::Unknown {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        f(ctx).map_err(|message| RegistryError::Build { kind: self.kind, name: name.to_string(), message })
    }
}
