use std::fmt::Write as _;
use std::path::Path;

use super::{fmt_float, numbered_lines, parse_floats, read_text, write_text, FormatError};
use crate::corpus::{Caption, ImageFeatureStore, PairedCorpus};

/// Marks stripped from the end of a caption's final token.
pub const DEFAULT_TRAILING_PUNCTUATION: &str = ".!?;";

/// Lowercase every token and strip one trailing punctuation mark from the
/// final token, dropping that token if nothing is left of it.
pub fn normalize_caption(text: &str, punctuation: &str) -> Vec<String> {
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if let Some(last) = tokens.last_mut() {
        if let Some(c) = last.chars().last().filter(|c| punctuation.contains(*c)) {
            last.truncate(last.len() - c.len_utf8());
            if last.is_empty() {
                tokens.pop();
            }
        }
    }
    tokens
}

/// Parse `image_id<TAB>tokens` lines.
pub fn parse_captions(text: &str, source_name: &str, punctuation: &str) -> Result<Vec<Caption>, FormatError> {
    let mut captions = Vec::new();
    for (line, l) in numbered_lines(text) {
        let (id, rest) = l
            .split_once('\t')
            .ok_or_else(|| FormatError::parse(source_name, line, "expected image_id<TAB>caption"))?;
        if id.trim().is_empty() || id.trim() != id {
            return Err(FormatError::parse(source_name, line, "empty or padded image id"));
        }
        let tokens = normalize_caption(rest, punctuation);
        if tokens.is_empty() {
            return Err(FormatError::parse(source_name, line, "empty caption"));
        }
        captions.push(Caption {
            image_id: id.to_string(),
            tokens,
        });
    }
    if captions.is_empty() {
        return Err(FormatError::invalid(source_name, "no captions"));
    }
    Ok(captions)
}

pub fn load_captions(path: &Path, punctuation: &str) -> Result<Vec<Caption>, FormatError> {
    parse_captions(&read_text(path)?, &path.display().to_string(), punctuation)
}

pub fn write_captions(captions: &[Caption]) -> String {
    let mut out = String::new();
    for c in captions {
        let _ = writeln!(out, "{}\t{}", c.image_id, c.tokens.join(" "));
    }
    out
}

pub fn save_captions(captions: &[Caption], path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_captions(captions))
}

/// Parse a `#dim=D` header followed by `image_id<TAB>D values` rows.
pub fn parse_image_features(text: &str, source_name: &str) -> Result<ImageFeatureStore, FormatError> {
    let mut lines = numbered_lines(text);
    let dim = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix("#dim="))
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| FormatError::parse(source_name, 1, "expected header #dim=D with D >= 1"))?;
    let mut store = ImageFeatureStore::new(dim);
    for (line, l) in lines {
        let (id, values) = l
            .split_once('\t')
            .ok_or_else(|| FormatError::parse(source_name, line, "expected image_id<TAB>values"))?;
        let v = parse_floats(values, source_name, line)?;
        store
            .insert(id.to_string(), v)
            .map_err(|e| FormatError::parse(source_name, line, e))?;
    }
    Ok(store)
}

pub fn load_image_features(path: &Path) -> Result<ImageFeatureStore, FormatError> {
    parse_image_features(&read_text(path)?, &path.display().to_string())
}

pub fn write_image_features(store: &ImageFeatureStore) -> String {
    let mut out = format!("#dim={}\n", store.dim());
    for (id, v) in store.iter() {
        out.push_str(id);
        out.push('\t');
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&fmt_float(*x));
        }
        out.push('\n');
    }
    out
}

pub fn save_image_features(store: &ImageFeatureStore, path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_image_features(store))
}

/// Captions plus their image features; every captioned image must have a
/// feature row.
pub fn load_corpus(captions: &Path, features: &Path, punctuation: &str) -> Result<PairedCorpus, FormatError> {
    let corpus = PairedCorpus::new(load_captions(captions, punctuation)?, load_image_features(features)?);
    corpus
        .check_features()
        .map_err(|e| FormatError::invalid(&captions.display().to_string(), e))?;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rule() {
        assert_eq!(normalize_caption("A dog Runs.", DEFAULT_TRAILING_PUNCTUATION), ["a", "dog", "runs"]);
        assert_eq!(normalize_caption("Two cats !", DEFAULT_TRAILING_PUNCTUATION), ["two", "cats"]);
        // only one mark, and only on the final token
        assert_eq!(normalize_caption("e.g. wow..", DEFAULT_TRAILING_PUNCTUATION), ["e.g.", "wow."]);
        assert_eq!(normalize_caption("a dog.", ""), ["a", "dog."]);
    }

    #[test]
    fn caption_errors_carry_line_numbers() {
        let err = parse_captions("i1\ta dog\ni2\t  \n", "c.tsv", ".").unwrap_err();
        assert_eq!(err.to_string(), "c.tsv:2: empty caption");
        let err = parse_captions("i1 a dog\n", "c.tsv", ".").unwrap_err();
        assert!(err.to_string().starts_with("c.tsv:1:"));
    }

    #[test]
    fn feature_round_trip_keeps_nine_digits() {
        let mut store = ImageFeatureStore::new(3);
        store.insert("a".into(), vec![1.0 / 3.0, -2.5e-7, 12345.678901]).unwrap();
        store.insert("b".into(), vec![0.0, 1.0, -1.0]).unwrap();
        let back = parse_image_features(&write_image_features(&store), "f").unwrap();
        for (id, v) in store.iter() {
            for (x, y) in v.iter().zip(back.get(id).unwrap()) {
                assert!((x - y).abs() <= 5e-9 * x.abs(), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn feature_rows_are_checked() {
        let err = parse_image_features("#dim=3\na\t1 2 3\nb\t1 2\n", "f").unwrap_err();
        assert!(err.to_string().contains("f:3:") && err.to_string().contains('b'), "{err}");
        assert!(parse_image_features("#dim=2\na\t1 2\na\t3 4\n", "f").is_err());
        assert!(parse_image_features("a\t1 2\n", "f").is_err());
        assert!(parse_image_features("#dim=2\na\t1 nan\n", "f").is_err());
    }
}
