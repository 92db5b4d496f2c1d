//! Named strategies chosen at runtime: local planners and context selectors.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::context::{gate, ContextPrediction};
use crate::nav::{Dwa, DwaConfig, LocalPlanner};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} '{name}', known: {known}")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub known: String,
}

/// Turns a classifier prediction into the context handed to the mode filter.
pub trait ContextSelector: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn select(&self, prediction: &ContextPrediction, epsilon_u: f64) -> u32;
}

/// The prediction's context when confident enough, otherwise 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gated;

impl ContextSelector for Gated {
    fn name(&self) -> &str {
        "gated"
    }

    fn select(&self, prediction: &ContextPrediction, epsilon_u: f64) -> u32 {
        gate(prediction, epsilon_u)
    }
}

/// Always the most supported learned context; never 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct Argmax;

impl ContextSelector for Argmax {
    fn name(&self) -> &str {
        "argmax"
    }

    fn select(&self, prediction: &ContextPrediction, _epsilon_u: f64) -> u32 {
        prediction.context
    }
}

/// Always context 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultOnly;

impl ContextSelector for DefaultOnly {
    fn name(&self) -> &str {
        "default"
    }

    fn select(&self, _prediction: &ContextPrediction, _epsilon_u: f64) -> u32 {
        0
    }
}

type Factory<T> = Box<dyn Fn() -> Arc<T> + Send + Sync>;

struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    fn register(&mut self, name: &str, f: Factory<T>) {
        self.entries.insert(name.to_string(), f);
    }

    fn get(&self, name: &str) -> Result<Arc<T>, UnknownStrategy> {
        self.entries.get(name).map(|f| f()).ok_or_else(|| UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

pub struct SelectorRegistry(Registry<dyn ContextSelector>);

impl SelectorRegistry {
    pub fn empty() -> Self {
        Self(Registry::new("selector"))
    }

    pub fn register(&mut self, name: &str, f: impl Fn() -> Arc<dyn ContextSelector> + Send + Sync + 'static) {
        self.0.register(name, Box::new(f));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ContextSelector>, UnknownStrategy> {
        self.0.get(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.0.names()
    }
}

impl Default for SelectorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("gated", || Arc::new(Gated));
        r.register("argmax", || Arc::new(Argmax));
        r.register("default", || Arc::new(DefaultOnly));
        r
    }
}

pub struct PlannerRegistry(Registry<dyn LocalPlanner>);

impl PlannerRegistry {
    pub fn empty() -> Self {
        Self(Registry::new("planner"))
    }

    pub fn register(&mut self, name: &str, f: impl Fn() -> Arc<dyn LocalPlanner> + Send + Sync + 'static) {
        self.0.register(name, Box::new(f));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn LocalPlanner>, UnknownStrategy> {
        self.0.get(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.0.names()
    }

    pub fn with_defaults(dwa: DwaConfig) -> Self {
        let mut r = Self::empty();
        r.register("dwa", move || Arc::new(Dwa::new(dwa)));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(context: u32, confidence: f64) -> ContextPrediction {
        ContextPrediction {
            context,
            confidence,
            alpha: vec![],
        }
    }

    #[test]
    fn builtin_selectors() {
        let r = SelectorRegistry::default();
        assert_eq!(r.names(), vec!["argmax", "default", "gated"]);
        let p = pred(2, 0.5);
        assert_eq!(r.get("gated").unwrap().select(&p, 0.8), 0);
        assert_eq!(r.get("argmax").unwrap().select(&p, 0.8), 2);
        assert_eq!(r.get("default").unwrap().select(&p, 0.8), 0);
        assert_eq!(r.get("gated").unwrap().select(&pred(2, 0.9), 0.8), 2);
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let e = SelectorRegistry::default().get("oracle").unwrap_err();
        assert_eq!(e.known, "argmax, default, gated");
        let p = PlannerRegistry::with_defaults(DwaConfig::default());
        assert_eq!(p.get("dwa").unwrap().name(), "dwa");
        assert!(p.get("teb").is_err());
    }
}
