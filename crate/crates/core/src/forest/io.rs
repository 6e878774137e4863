//! Canonical JSON model files.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams, TrainingMeta, Tree};

pub const MODEL_VERSION: u32 = 1;

/// Model file layout with trees left undecoded so errors can name the tree.
#[derive(Deserialize)]
struct RawModel {
    version: u32,
    schema_id: String,
    n_features: usize,
    params: ForestParams,
    training_meta: TrainingMeta,
    trees: Vec<serde_json::Value>,
}

pub fn to_json(model: &Forest) -> Result<String> {
    Ok(serde_json::to_string(model)?)
}

pub fn from_json(text: &str) -> Result<Forest> {
    let raw: RawModel =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(format!("malformed model file: {e}")))?;
    if raw.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model version {} (expected {MODEL_VERSION})",
            raw.version
        )));
    }
    if raw.trees.is_empty() {
        return Err(Error::ModelFormat("model has no trees".into()));
    }
    let mut trees = Vec::with_capacity(raw.trees.len());
    for (i, value) in raw.trees.into_iter().enumerate() {
        let tree: Tree = serde_json::from_value(value).map_err(|e| Error::ModelFormat(format!("tree {i}: {e}")))?;
        tree.check(raw.n_features)
            .map_err(|e| Error::ModelFormat(format!("tree {i}: {e}")))?;
        trees.push(tree);
    }
    Ok(Forest {
        version: raw.version,
        schema_id: raw.schema_id,
        n_features: raw.n_features,
        params: raw.params,
        training_meta: raw.training_meta,
        trees,
    })
}

pub fn save_model(model: &Forest, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Forest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Node;

    fn model() -> Forest {
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.1 + 0.2,
                    left: 1,
                    right: 2,
                    counts: [3, 3],
                },
                Node::Leaf {
                    counts: [3, 0],
                    p_crash: 0.0,
                },
                Node::Leaf {
                    counts: [0, 3],
                    p_crash: 1.0 / 3.0,
                },
            ],
        };
        Forest::from_trees("s", 2, ForestParams::default(), vec![tree])
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let text = to_json(&m).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_json(&back).unwrap(), text);
    }

    #[test]
    fn unknown_version_rejected() {
        let text = to_json(&model()).unwrap().replace("\"version\":1", "\"version\":7");
        let err = from_json(&text).unwrap_err().to_string();
        assert!(err.contains("version 7"), "{err}");
    }

    #[test]
    fn truncated_file_rejected() {
        let text = to_json(&model()).unwrap();
        assert!(from_json(&text[..text.len() / 2]).is_err());
    }

    #[test]
    fn malformed_node_names_tree() {
        let text = to_json(&model()).unwrap().replace("\"feature\":1", "\"feature\":9");
        let err = from_json(&text).unwrap_err().to_string();
        assert!(err.contains("tree 0"), "{err}");
    }
}
