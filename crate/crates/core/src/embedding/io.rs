use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EmbedError, EmbeddingModel};

/// Writes input vectors in word2vec text format with six decimals.
pub fn write_model(model: &EmbeddingModel, out: impl Write) -> Result<(), EmbedError> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{} {}", model.len(), model.dim())?;
    for (i, token) in model.tokens().iter().enumerate() {
        out.write_all(token.as_bytes())?;
        for x in model.row(i) {
            write!(out, " {x:.6}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_model(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<(), EmbedError> {
    write_model(model, File::create(path)?)
}

pub fn read_model(input: impl BufRead) -> Result<EmbeddingModel, EmbedError> {
    let err = |line: usize, message: String| EmbedError::Parse { line, message };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))??;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => (
            c.parse::<usize>().map_err(|e| err(1, format!("vocabulary size: {e}")))?,
            d.parse::<usize>().map_err(|e| err(1, format!("dimension: {e}")))?,
        ),
        _ => return Err(err(1, format!("expected \"<vocab_size> <dimension>\", got {header:?}"))),
    };
    if count == 0 || dim == 0 {
        return Err(err(1, "empty model".into()));
    }

    let mut tokens = Vec::with_capacity(count);
    let mut seen = HashSet::with_capacity(count);
    let mut values = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == count {
            return Err(err(lineno, format!("more rows than the declared {count}")));
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line");
        let start = values.len();
        for f in fields {
            let x: f64 = f.parse().map_err(|_| err(lineno, format!("bad component {f:?}")))?;
            if !x.is_finite() {
                return Err(err(lineno, format!("non-finite component {f:?}")));
            }
            values.push(x);
        }
        if values.len() - start != dim {
            return Err(err(lineno, format!("expected {dim} components, got {}", values.len() - start)));
        }
        if !seen.insert(token.to_string()) {
            return Err(err(lineno, format!("duplicate token {token:?}")));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != count {
        return Err(err(0, format!("header declares {count} rows, found {}", tokens.len())));
    }
    EmbeddingModel::from_rows(tokens, dim, values)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel, EmbedError> {
    read_model(BufReader::new(File::open(path)?))
}
