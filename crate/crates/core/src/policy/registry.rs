use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::rules::{AccumulatedPriority, Aalto, Fcfs, GenCMu, StaticPriority, Whittle};
use super::{ClassConfig, IndexRule};

/// Optional policy parameters as they appear in configs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    /// Static priority order, highest priority first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    /// Accumulation slopes, one per class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
}

/// A policy reference: registry name plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    #[serde(flatten)]
    pub params: PolicyParams,
}

impl PolicySpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: PolicyParams::default(),
        }
    }

    pub fn static_priority(order: Vec<usize>) -> Self {
        Self {
            name: "static_priority".into(),
            params: PolicyParams {
                order: Some(order),
                slopes: None,
            },
        }
    }
}

pub type Factory = Arc<dyn Fn(&PolicyParams, &[ClassConfig]) -> Result<Box<dyn IndexRule>> + Send + Sync>;

/// Index rules registered by name and built on demand for a class set.
#[derive(Clone, Default)]
pub struct PolicyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl std::fmt::Debug for PolicyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register("fcfs", |_, cls| Ok(Box::new(Fcfs::new(cls.len()))));
        r.register("gen_cmu", |_, cls| Ok(Box::new(GenCMu::new(cls))));
        r.register("aalto", |_, cls| Ok(Box::new(Aalto::new(cls)?)));
        r.register("whittle", |_, cls| Ok(Box::new(Whittle::new(cls)?)));
        r.register("static_priority", |p, cls| {
            let order = p
                .order
                .clone()
                .ok_or_else(|| Error::config("policy.order", "static_priority needs an order"))?;
            if order.len() != cls.len() {
                return Err(Error::config(
                    "policy.order",
                    format!("order lists {} classes, system has {}", order.len(), cls.len()),
                ));
            }
            Ok(Box::new(StaticPriority::new(order)?))
        });
        r.register("accumulated_priority", |p, cls| {
            let slopes = p
                .slopes
                .clone()
                .unwrap_or_else(|| AccumulatedPriority::default_slopes(cls));
            if slopes.len() != cls.len() {
                return Err(Error::config(
                    "policy.slopes",
                    format!("{} slopes given for {} classes", slopes.len(), cls.len()),
                ));
            }
            Ok(Box::new(AccumulatedPriority::new(slopes)?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&PolicyParams, &[ClassConfig]) -> Result<Box<dyn IndexRule>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &PolicySpec, classes: &[ClassConfig]) -> Result<Box<dyn IndexRule>> {
        let f = self
            .factories
            .get(&spec.name)
            .ok_or_else(|| Error::UnknownPolicy(spec.name.clone()))?;
        f(&spec.params, classes)
    }
}
