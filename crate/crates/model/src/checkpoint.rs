//! Single-file generator checkpoints: safetensors weights with the config in the header.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use crate::error::ModelError;
use crate::generator::{Generator, GeneratorConfig};
use crate::tensor::{Element, Tensor};

const FORMAT: &str = "scengen-generator/1";

fn encode<T: Element>(t: &Tensor<T>) -> (Dtype, Vec<u8>) {
    if std::mem::size_of::<T>() == 4 {
        (Dtype::F32, t.data.iter().flat_map(|v| (v.as_f64() as f32).to_le_bytes()).collect())
    } else {
        (Dtype::F64, t.data.iter().flat_map(|v| v.as_f64().to_le_bytes()).collect())
    }
}

fn decode<T: Element>(view: &TensorView<'_>) -> Result<Vec<T>, ModelError> {
    let bytes = view.data();
    match view.dtype() {
        Dtype::F32 => Ok(bytes.chunks_exact(4).map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect()),
        Dtype::F64 => Ok(bytes.chunks_exact(8).map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap()))).collect()),
        other => Err(ModelError::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

pub fn to_bytes<T: Element>(model: &Generator<T>) -> Result<Vec<u8>, ModelError> {
    let encoded: Vec<(String, Vec<usize>, Dtype, Vec<u8>)> = model
        .params()
        .entries()
        .iter()
        .map(|e| {
            let (dtype, bytes) = encode(&e.value);
            (e.name.clone(), vec![e.value.rows, e.value.cols], dtype, bytes)
        })
        .collect();
    let views = encoded
        .iter()
        .map(|(name, shape, dtype, bytes)| {
            TensorView::new(*dtype, shape.clone(), bytes)
                .map(|v| (name.clone(), v))
                .map_err(|e| ModelError::Checkpoint(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut meta = HashMap::new();
    meta.insert("format".to_string(), FORMAT.to_string());
    meta.insert("dtype".to_string(), T::DTYPE.to_string());
    meta.insert(
        "config".to_string(),
        serde_json::to_string(model.config()).map_err(|e| ModelError::Checkpoint(e.to_string()))?,
    );
    safetensors::serialize(views, Some(meta)).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

/// Rebuild a generator from checkpoint bytes, refusing missing, extra or mis-shaped tensors.
pub fn from_bytes<T: Element>(bytes: &[u8]) -> Result<Generator<T>, ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let (_, header) = SafeTensors::read_metadata(bytes).map_err(|e| bad(e.to_string()))?;
    let meta = header.metadata().as_ref().ok_or_else(|| bad("missing metadata".into()))?;
    if meta.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(bad(format!("unknown format {:?}", meta.get("format"))));
    }
    let config: GeneratorConfig = serde_json::from_str(meta.get("config").ok_or_else(|| bad("missing config".into()))?)
        .map_err(|e| bad(format!("config: {e}")))?;
    let mut model = Generator::<T>::new(config, 0)?;
    let st = SafeTensors::deserialize(bytes).map_err(|e| bad(e.to_string()))?;
    let expected = model.params().len();
    if st.len() != expected {
        return Err(bad(format!("checkpoint holds {} tensors, model expects {expected}", st.len())));
    }
    for entry in model.params_mut().entries_mut() {
        let view = st.tensor(&entry.name).map_err(|_| bad(format!("missing tensor {}", entry.name)))?;
        let shape = [entry.value.rows, entry.value.cols];
        if view.shape() != shape {
            return Err(bad(format!("tensor {} has shape {:?}, expected {shape:?}", entry.name, view.shape())));
        }
        entry.value.data = decode(&view)?;
    }
    Ok(model)
}

pub fn save<T: Element>(model: &Generator<T>, path: &Path) -> Result<(), ModelError> {
    let bytes = to_bytes(model)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<T: Element>(path: &Path) -> Result<Generator<T>, ModelError> {
    from_bytes(&fs::read(path)?)
}
