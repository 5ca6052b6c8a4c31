//! Text interchange formats: caption corpora, image features, word vectors,
//! similarity datasets, priming trials and lexicons.
//!
//! Every loader rejects malformed input with the offending line number. The
//! only repair is the duplicate-word rule of [`load_vectors`].

mod corpus;
mod datasets;
mod vectors;

use std::fmt::Display;
use std::path::{Path, PathBuf};

pub use corpus::{
    load_captions, load_corpus, load_image_features, normalize_caption, parse_captions, parse_image_features,
    save_captions, save_image_features, write_captions, write_image_features, DEFAULT_TRAILING_PUNCTUATION,
};
pub use datasets::{
    load_lexicon, load_sim_dataset, load_spp, parse_lexicon, parse_sim_dataset, parse_spp, save_lexicon,
    save_sim_dataset, save_spp, write_lexicon, write_sim_dataset, write_spp, SPP_HEADER,
};
pub use vectors::{load_vectors, parse_vectors, save_vectors, write_vectors};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error("{source_name}: {msg}")]
    Invalid { source_name: String, msg: String },
}

impl FormatError {
    pub(crate) fn parse(source_name: &str, line: usize, msg: impl Display) -> Self {
        FormatError::Parse {
            source_name: source_name.to_string(),
            line,
            msg: msg.to_string(),
        }
    }

    pub(crate) fn invalid(source_name: &str, msg: impl Display) -> Self {
        FormatError::Invalid {
            source_name: source_name.to_string(),
            msg: msg.to_string(),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Nine significant digits, the precision of every float in these formats.
pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub(crate) fn parse_floats(fields: &str, source_name: &str, line: usize) -> Result<Vec<f64>, FormatError> {
    fields
        .split_ascii_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::parse(source_name, line, format!("not a finite number: {t:?}")))
        })
        .collect()
}

/// Lines numbered from 1, with a trailing carriage return removed.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}
