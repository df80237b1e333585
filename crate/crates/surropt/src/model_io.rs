//! JSON manifests for trained surrogate models.

use std::path::Path;

use surropt_core::SurrogateModel;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model manifest at `{path}`: {message}")]
    Format { path: String, message: String },
    #[error("model manifest is inconsistent: {0}")]
    Shape(String),
}

/// Layer dims, row-major weights, biases and normalization constants.
/// Floats are written in shortest round-trip form, so a load returns the
/// same bits.
pub fn to_json(model: &SurrogateModel) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("model serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<SurrogateModel, ModelIoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let model: SurrogateModel = serde_path_to_error::deserialize(de)
        .map_err(|e| ModelIoError::Format { path: e.path().to_string(), message: e.inner().to_string() })?;
    check_shape(&model)?;
    Ok(model)
}

fn check_shape(m: &SurrogateModel) -> Result<(), ModelIoError> {
    let bad = |msg: String| Err(ModelIoError::Shape(msg));
    let Some(first) = m.layers.first() else { return bad("no layers".into()) };
    if m.input_min.len() != first.inputs || m.input_max.len() != first.inputs {
        return bad(format!("input ranges do not match {} inputs", first.inputs));
    }
    for (k, l) in m.layers.iter().enumerate() {
        if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
            return bad(format!("layer {k} arrays do not match {}x{}", l.outputs, l.inputs));
        }
        if let Some(next) = m.layers.get(k + 1) {
            if next.inputs != l.outputs {
                return bad(format!("layer {} expects {} inputs, layer {k} gives {}", k + 1, next.inputs, l.outputs));
            }
        }
    }
    if m.layers.last().is_some_and(|l| l.outputs != 1) {
        return bad("output layer must have one unit".into());
    }
    Ok(())
}

pub fn save(model: &SurrogateModel, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, to_json(model)).map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })
}

pub fn load(path: &Path) -> Result<SurrogateModel, ModelIoError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })?;
    from_json(&text)
}
