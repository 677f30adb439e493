//! Textual weights file.
//!
//! ```text
//! pinnuq-weights v1
//! activation tanh
//! layers 1 32 32 1
//! W0 <row-major values>
//! b0 <values>
//! ...
//! ```
//!
//! Values are written in scientific notation with enough significant digits
//! (17 for `f64`) to read back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::network::{Activation, NetworkParameters};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const WEIGHTS_MAGIC: &str = "pinnuq-weights v1";

fn push_values<S: Real>(out: &mut String, tag: &str, values: &[S]) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {:.*e}", S::ROUND_TRIP_DIGITS - 1, v);
    }
    out.push('\n');
}

pub fn weights_to_string<S: Real>(params: &NetworkParameters<S>) -> String {
    let mut out = String::new();
    out.push_str(WEIGHTS_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "activation {}", params.activation().name());
    out.push_str("layers");
    for n in params.layer_sizes() {
        let _ = write!(out, " {n}");
    }
    out.push('\n');
    for l in 0..params.num_layers() {
        push_values(&mut out, &format!("W{l}"), params.weights(l));
        push_values(&mut out, &format!("b{l}"), params.biases(l));
    }
    out
}

fn parse_line<'a>(lines: &mut impl Iterator<Item = &'a str>, tag: &str) -> Result<Vec<&'a str>> {
    let line = lines.next().ok_or_else(|| Error::Parse(format!("missing '{tag}' line")))?;
    let mut it = line.split_whitespace();
    match it.next() {
        Some(t) if t == tag => Ok(it.collect()),
        other => Err(Error::Parse(format!("expected '{tag}', found {other:?}"))),
    }
}

fn parse_values<S: Real>(tokens: &[&str], expected: usize, tag: &str) -> Result<Vec<S>> {
    if tokens.len() != expected {
        return Err(Error::Parse(format!("{tag}: expected {expected} values, got {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map(S::lit)
                .map_err(|e| Error::Parse(format!("{tag}: bad number '{t}': {e}")))
        })
        .collect()
}

pub fn weights_from_str<S: Real>(text: &str) -> Result<NetworkParameters<S>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(m) if m.trim() == WEIGHTS_MAGIC => {}
        other => return Err(Error::Parse(format!("bad header {other:?}"))),
    }
    let act = parse_line(&mut lines, "activation")?;
    let activation = Activation::parse(act.first().copied().unwrap_or(""))
        .map_err(|e| Error::Parse(e.to_string()))?;
    let sizes = parse_line(&mut lines, "layers")?
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("layers: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if sizes.len() < 2 {
        return Err(Error::Parse(format!("layers: need at least two sizes, got {sizes:?}")));
    }
    let mut flat = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let wt = format!("W{l}");
        flat.extend(parse_values::<S>(&parse_line(&mut lines, &wt)?, n_in * n_out, &wt)?);
        let bt = format!("b{l}");
        flat.extend(parse_values::<S>(&parse_line(&mut lines, &bt)?, n_out, &bt)?);
    }
    if let Some(extra) = lines.next() {
        return Err(Error::Parse(format!("trailing content: {extra:?}")));
    }
    NetworkParameters::from_flat(&sizes, activation, flat).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_weights<S: Real>(params: &NetworkParameters<S>, path: &Path) -> Result<()> {
    std::fs::write(path, weights_to_string(params)).map_err(Error::at_path(path))?;
    Ok(())
}

pub fn read_weights<S: Real>(path: &Path) -> Result<NetworkParameters<S>> {
    weights_from_str(&std::fs::read_to_string(path).map_err(Error::at_path(path))?)
}
