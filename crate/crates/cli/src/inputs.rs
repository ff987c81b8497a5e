//! Reading module, tuple and complex inputs.  An input argument is inline
//! JSON (starting with `{`), a file path, or the name of a corpus module.

use std::path::Path;

use pisupport::{BoundedComplex, ComplexJson, NilTuple, NilTupleJson, RepExpr};
use serde_json::Value;

use crate::report::{sha256_hex, CliError, InputRef};

pub struct Loaded {
    pub name: String,
    pub value: Value,
    pub input: InputRef,
}

pub fn load(role: &str, arg: &str, corpus: &Path) -> Result<Loaded, CliError> {
    let (name, source, bytes) = if arg.trim_start().starts_with('{') {
        ("inline".to_string(), "inline".to_string(), arg.as_bytes().to_vec())
    } else if Path::new(arg).is_file() {
        let bytes = std::fs::read(arg).map_err(|e| CliError::invalid("io", format!("{arg}: {e}")))?;
        let stem = Path::new(arg).file_stem().unwrap_or_default().to_string_lossy().into_owned();
        (stem, arg.to_string(), bytes)
    } else {
        let path = corpus.join(format!("{arg}.json"));
        let bytes = std::fs::read(&path)
            .map_err(|_| CliError::invalid("io", format!("{role} {arg:?} is neither a file nor a corpus module")))?;
        (arg.to_string(), format!("corpus:{arg}"), bytes)
    };
    let value: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::invalid("parse", format!("{role} {source}: malformed JSON: {e}")))?;
    Ok(Loaded { name, value, input: InputRef { role: role.into(), source, sha256: sha256_hex(&bytes) } })
}

pub fn module(l: &Loaded) -> Result<RepExpr, CliError> {
    Ok(RepExpr::from_value(&l.value)?)
}

pub fn tuple(l: &Loaded) -> Result<NilTuple, CliError> {
    let j: NilTupleJson = serde_json::from_value(l.value.clone())
        .map_err(|e| CliError::invalid("parse", format!("tuple {}: {e}", l.input.source)))?;
    Ok(NilTuple::from_json(&j, None)?)
}

/// A complex file, or a bare module read as a complex concentrated in degree 0.
pub fn complex(l: &Loaded, default_p: u32) -> Result<BoundedComplex, CliError> {
    if l.value.get("degrees").is_none() {
        return Ok(BoundedComplex::from_module(default_p, module(l)?, 0));
    }
    let j: ComplexJson = serde_json::from_value(l.value.clone())
        .map_err(|e| CliError::invalid("parse", format!("complex {}: {e}", l.input.source)))?;
    Ok(BoundedComplex::from_json(&j, default_p)?)
}

/// Characteristic a complex file pins, if any.
pub fn complex_p(l: &Loaded) -> Option<u32> {
    l.value.get("p").and_then(Value::as_u64).map(|p| p as u32)
}
