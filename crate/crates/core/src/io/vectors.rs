use std::collections::HashSet;
use std::path::Path;

use super::{fmt_float, numbered_lines, parse_floats, read_text, write_text, FormatError};
use crate::embedding::{EmbeddingTable, TableMeta};

/// Parse the `V D` word-vector format. Vectors are L2 normalized on load;
/// a repeated word keeps its first vector. `expected_dim` enforces D.
pub fn parse_vectors(
    text: &str,
    source_name: &str,
    expected_dim: Option<usize>,
    meta: TableMeta,
) -> Result<EmbeddingTable, FormatError> {
    let mut lines = numbered_lines(text);
    let header: Vec<usize> = lines
        .next()
        .map(|(_, l)| l.split_ascii_whitespace().map(|t| t.parse::<usize>()).collect::<Result<_, _>>())
        .and_then(Result::ok)
        .filter(|h: &Vec<usize>| h.len() == 2 && h[1] > 0)
        .ok_or_else(|| FormatError::parse(source_name, 1, "expected header \"V D\""))?;
    let (n, dim) = (header[0], header[1]);
    if let Some(d) = expected_dim.filter(|&d| d != dim) {
        return Err(FormatError::parse(source_name, 1, format!("vectors have dimension {dim}, expected {d}")));
    }
    let mut table = EmbeddingTable::new(dim, meta).map_err(|e| FormatError::invalid(source_name, e))?;
    let mut seen = HashSet::new();
    let mut rows = 0;
    for (line, l) in lines {
        rows += 1;
        let (word, values) = l
            .split_once(' ')
            .ok_or_else(|| FormatError::parse(source_name, line, "expected word followed by values"))?;
        let v = parse_floats(values, source_name, line)?;
        if !seen.insert(word.to_string()) {
            log::warn!("{source_name}:{line}: duplicate word {word:?}, keeping the first vector");
            continue;
        }
        table.insert(word, &v).map_err(|e| FormatError::parse(source_name, line, e))?;
    }
    if rows != n {
        return Err(FormatError::invalid(source_name, format!("header declares {n} vectors, found {rows}")));
    }
    Ok(table)
}

pub fn load_vectors(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable, FormatError> {
    let name = path.display().to_string();
    let meta = TableMeta {
        source: name.clone(),
        ..TableMeta::default()
    };
    parse_vectors(&read_text(path)?, &name, expected_dim, meta)
}

pub fn write_vectors(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (w, v) in table.iter() {
        out.push_str(w);
        for x in v {
            out.push(' ');
            out.push_str(&fmt_float(*x));
        }
        out.push('\n');
    }
    out
}

pub fn save_vectors(table: &EmbeddingTable, path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_vectors(table))
}
