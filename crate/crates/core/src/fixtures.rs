//! Data shipped with the crate: a small synthetic embedding table and the
//! Home and Calendar app descriptors. Useful for demos and tests; real
//! deployments load their own embeddings and register their own apps.

use crate::embedding::EmbeddingStore;
use crate::registry::{parse_descriptor, AppDescriptor, Registry};

pub const TOY_EMBEDDINGS: &str = include_str!("../fixtures/embeddings/toy.txt");
pub const HOME_DESCRIPTOR: &str = include_str!("../fixtures/apps/home.json");
pub const CALENDAR_DESCRIPTOR: &str = include_str!("../fixtures/apps/calendar.json");

pub fn toy_embeddings() -> EmbeddingStore {
    EmbeddingStore::parse(TOY_EMBEDDINGS).expect("toy embeddings parse")
}

pub fn home_descriptor() -> AppDescriptor {
    parse_descriptor(HOME_DESCRIPTOR.as_bytes()).expect("home descriptor is valid")
}

pub fn calendar_descriptor() -> AppDescriptor {
    parse_descriptor(CALENDAR_DESCRIPTOR.as_bytes()).expect("calendar descriptor is valid")
}

/// In-memory registry holding Home then Calendar.
pub fn registry() -> Registry {
    let mut registry = Registry::in_memory();
    registry.register(home_descriptor()).expect("fresh registry");
    registry.register(calendar_descriptor()).expect("fresh registry");
    registry
}
