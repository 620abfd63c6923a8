//! App descriptors and the registry that serves them.
//!
//! A registry optionally mirrors a directory holding one `<name>.json` file
//! per app. Writes go to a temporary file first and are renamed into place,
//! so a crash never leaves a half-written descriptor behind.

mod descriptor;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

pub use descriptor::{
    parse_descriptor, AppDescriptor, AppKind, DataType, IntentDescriptor, ParameterSpec,
};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("schema violation at {path:?}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("app {app:?} declares intent {intent:?} twice")]
    DuplicateIntent { app: String, intent: String },
    #[error("intent {intent:?} of app {app:?} has neither samples nor key phrases")]
    UnreachableIntent { app: String, intent: String },
    #[error("intent {intent:?} declares more than one {data_type} parameter")]
    TwoParamsSameType { intent: String, data_type: DataType },
    #[error("an app named {0:?} is already registered")]
    NameConflict(String),
    #[error("no app named {0:?}")]
    NotFound(String),
    #[error("apps directory {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io { path: path.display().to_string(), source }
}

/// Ordered set of app descriptors. Registration order is search order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    apps: Vec<AppDescriptor>,
    dir: Option<PathBuf>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) an apps directory and loads every valid
    /// descriptor in it, ordered by file name. Invalid files are skipped.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p
                        .file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with('.'))
            })
            .collect();
        files.sort();

        let mut registry = Self { apps: Vec::new(), dir: Some(dir) };
        for path in files {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            match parse_descriptor(&bytes) {
                Ok(d) if registry.find(&d.name).is_none() => registry.apps.push(d),
                Ok(d) => tracing::warn!(file = %path.display(), app = %d.name, "duplicate app name, skipped"),
                Err(e) => tracing::warn!(file = %path.display(), error = %e, "invalid descriptor, skipped"),
            }
        }
        Ok(registry)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn find(&self, name: &str) -> Option<usize> {
        let name = name.to_lowercase();
        self.apps.iter().position(|a| a.name.to_lowercase() == name)
    }

    pub fn register(&mut self, descriptor: AppDescriptor) -> Result<(), RegistryError> {
        descriptor.validate()?;
        if self.find(&descriptor.name).is_some() {
            return Err(RegistryError::NameConflict(descriptor.name));
        }
        if let Some(dir) = &self.dir {
            let target = dir.join(format!("{}.json", descriptor.name));
            let tmp = dir.join(format!(".{}.json.tmp", descriptor.name));
            fs::write(&tmp, descriptor.to_json()).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &target).map_err(io_err(&target))?;
        }
        self.apps.push(descriptor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&AppDescriptor, RegistryError> {
        self.find(name)
            .map(|i| &self.apps[i])
            .ok_or_else(|| RegistryError::NotFound(name.to_string()))
    }

    pub fn remove(&mut self, name: &str) -> Result<AppDescriptor, RegistryError> {
        let idx = self.find(name).ok_or_else(|| RegistryError::NotFound(name.to_string()))?;
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.json", self.apps[idx].name));
            match fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&path)(e)),
            }
        }
        Ok(self.apps.remove(idx))
    }

    pub fn list(&self) -> &[AppDescriptor] {
        &self.apps
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }
}

/// Registry shared between request handlers. Readers take an immutable
/// snapshot; writers build a new registry and swap it in.
#[derive(Debug, Clone, Default)]
pub struct SharedRegistry {
    inner: Arc<RwLock<Arc<Registry>>>,
}

impl SharedRegistry {
    pub fn new(registry: Registry) -> Self {
        Self { inner: Arc::new(RwLock::new(Arc::new(registry))) }
    }

    pub fn snapshot(&self) -> Arc<Registry> {
        self.inner.read().expect("registry lock poisoned").clone()
    }

    pub fn register(&self, descriptor: AppDescriptor) -> Result<(), RegistryError> {
        let mut guard = self.inner.write().expect("registry lock poisoned");
        let mut next = (**guard).clone();
        next.register(descriptor)?;
        *guard = Arc::new(next);
        Ok(())
    }

    pub fn remove(&self, name: &str) -> Result<AppDescriptor, RegistryError> {
        let mut guard = self.inner.write().expect("registry lock poisoned");
        let mut next = (**guard).clone();
        let removed = next.remove(name)?;
        *guard = Arc::new(next);
        Ok(removed)
    }
}
