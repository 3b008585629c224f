//! Versioned text checkpoints.
//!
//! ```text
//! seek-checkpoint v1 d=<d> k=<k> entities=<n> relations=<m>
//! E <name> <d decimals>
//! ...
//! R <name> <d decimals>
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly. Names run from the tag to the last `d` space-separated
//! fields, so they may contain spaces.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::scoring::{validate_shape, EmbeddingTable};

const MAGIC: &str = "seek-checkpoint";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub segments: usize,
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
}

impl Checkpoint {
    pub fn new(segments: usize, vocab: Vocabulary, table: EmbeddingTable) -> Result<Self> {
        validate_shape(table.dim(), segments)?;
        if vocab.num_entities() != table.num_entities() || vocab.num_relations() != table.num_relations() {
            return Err(Error::Config(format!(
                "vocabulary has {} entities / {} relations but table has {} / {}",
                vocab.num_entities(),
                vocab.num_relations(),
                table.num_entities(),
                table.num_relations()
            )));
        }
        Ok(Self { segments, vocab, table })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        let table = &self.table;
        writeln!(
            out,
            "{MAGIC} {VERSION} d={} k={} entities={} relations={}",
            table.dim(),
            self.segments,
            table.num_entities(),
            table.num_relations()
        )?;
        let mut row = String::new();
        for (id, name) in self.vocab.entities().iter().enumerate() {
            format_row(&mut row, "E", name, table.entity(id));
            out.write_all(row.as_bytes())?;
        }
        for (id, name) in self.vocab.relations().iter().enumerate() {
            format_row(&mut row, "R", name, table.relation(id));
            out.write_all(row.as_bytes())?;
        }
        out.flush()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(bad(1, "empty checkpoint".into())),
        };
        let header = Header::parse(&header).ok_or_else(|| bad(1, format!("bad header `{header}`")))?;
        validate_shape(header.dim, header.segments).map_err(|e| bad(1, e.to_string()))?;

        let mut vocab = Vocabulary::new();
        let mut entities = Vec::with_capacity(header.entities * header.dim);
        let mut relations = Vec::with_capacity(header.relations * header.dim);
        let total = header.entities + header.relations;
        for index in 0..total {
            let lineno = index + 2;
            let line = match lines.next() {
                Some(line) => line.map_err(|e| Error::io(path, e))?,
                None => return Err(bad(lineno, format!("expected {total} rows, found {index}"))),
            };
            let (tag, target, ids) = if index < header.entities {
                ("E ", &mut entities, vocab.num_entities())
            } else {
                ("R ", &mut relations, vocab.num_relations())
            };
            let rest = line
                .strip_prefix(tag)
                .ok_or_else(|| bad(lineno, format!("expected a `{}` row", tag.trim())))?;
            let name = parse_row(rest, header.dim, target).map_err(|m| bad(lineno, m))?;
            let id = if tag == "E " {
                vocab.intern_entity(name)
            } else {
                vocab.intern_relation(name)
            };
            if id != ids {
                return Err(bad(lineno, format!("duplicate name `{name}`")));
            }
        }
        if let Some(extra) = lines.next() {
            let extra = extra.map_err(|e| Error::io(path, e))?;
            if !extra.trim().is_empty() {
                return Err(bad(total + 2, "trailing data after last row".into()));
            }
        }
        let table = EmbeddingTable::from_parts(header.dim, entities, relations)?;
        Ok(Self {
            segments: header.segments,
            vocab,
            table,
        })
    }
}

fn format_row(buf: &mut String, tag: &str, name: &str, values: &[f64]) {
    use std::fmt::Write as _;
    buf.clear();
    buf.push_str(tag);
    buf.push(' ');
    buf.push_str(name);
    for v in values {
        // 1 leading digit + 16 fractional digits = 17 significant digits.
        let _ = write!(buf, " {v:.16e}");
    }
    buf.push('\n');
}

/// Parses `<name> v_1 ... v_d`, appending the values to `out`.
fn parse_row<'a>(rest: &'a str, dim: usize, out: &mut Vec<f64>) -> Result<&'a str, String> {
    let mut fields = rest.rsplitn(dim + 1, ' ');
    let mut values = Vec::with_capacity(dim);
    for _ in 0..dim {
        let field = fields.next().ok_or("too few values")?;
        values.push(field.parse::<f64>().map_err(|_| format!("bad value `{field}`"))?);
    }
    let name = fields
        .next()
        .ok_or_else(|| format!("expected a name and {dim} values"))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    out.extend(values.iter().rev());
    Ok(name)
}

struct Header {
    dim: usize,
    segments: usize,
    entities: usize,
    relations: usize,
}

impl Header {
    fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split(' ');
        if parts.next()? != MAGIC || parts.next()? != VERSION {
            return None;
        }
        let mut field =
            |key: &str| -> Option<usize> { parts.next()?.strip_prefix(key)?.strip_prefix('=')?.parse().ok() };
        let header = Header {
            dim: field("d")?,
            segments: field("k")?,
            entities: field("entities")?,
            relations: field("relations")?,
        };
        parts.next().is_none().then_some(header)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{init_embeddings, ModelConfig};
    use std::io::Cursor;

    fn sample() -> Checkpoint {
        let mut vocab = Vocabulary::new();
        vocab.intern_entity("alice");
        vocab.intern_entity("New York  City");
        vocab.intern_relation("lives in");
        let cfg = ModelConfig::new(4, 2, 11).unwrap();
        let table = init_embeddings(2, 1, &cfg).unwrap();
        Checkpoint::new(2, vocab, table).unwrap()
    }

    #[test]
    fn text_layout() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "seek-checkpoint v1 d=4 k=2 entities=2 relations=1");
        assert!(lines[1].starts_with("E alice "));
        assert!(lines[2].starts_with("E New York  City "));
        assert!(lines[3].starts_with("R lives in "));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn round_trip_is_lossless() {
        let ckpt = sample();
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(Cursor::new(buf), Path::new("mem")).unwrap();
        assert_eq!(back, ckpt);
    }

    #[test]
    fn rejects_truncated_and_bad_headers() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            Checkpoint::read_from(Cursor::new(truncated), Path::new("mem")),
            Err(Error::Parse { line: 3, .. })
        ));
        let bad = text.replacen("v1", "v2", 1);
        assert!(matches!(
            Checkpoint::read_from(Cursor::new(bad), Path::new("mem")),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_k = text.replacen("k=2", "k=3", 1);
        assert!(Checkpoint::read_from(Cursor::new(bad_k), Path::new("mem")).is_err());
    }

    #[test]
    fn mismatched_vocab_is_rejected() {
        let ckpt = sample();
        let mut vocab = ckpt.vocab.clone();
        vocab.intern_entity("extra");
        assert!(Checkpoint::new(2, vocab, ckpt.table).is_err());
    }
}
