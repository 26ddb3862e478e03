pub mod measure;
pub mod prune;
pub mod synth;
pub mod tables;

use std::path::PathBuf;

use crate::manifest::{InputRecord, RunManifest};

/// Records every input in the manifest. Unreadable inputs are listed without
/// a hash; the command reports them when it tries to load them.
pub fn record_inputs(manifest: &mut RunManifest, paths: &[PathBuf]) {
    for p in paths {
        manifest
            .inputs
            .push(InputRecord::from_path(p).unwrap_or_else(|_| InputRecord::unreadable(p)));
    }
}

/// Source ids of the form `model__task` name a (model, task) cell; any other
/// id is a model measured on pooled inputs, task `"all"`.
pub fn split_source(id: &str) -> (&str, &str) {
    id.split_once("__").unwrap_or((id, "all"))
}
