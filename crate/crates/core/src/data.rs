//! Triple files, vocabularies and the filtered-evaluation index.
//!
//! Triple files are UTF-8 text with one `head<TAB>relation<TAB>tail` record
//! per line and no header. Everything other than the two tab separators is
//! part of a token, so names may contain spaces.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type EntityId = usize;
pub type RelationId = usize;

/// Bidirectional mapping between entity/relation names and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entity_to_id: HashMap<String, EntityId>,
    id_to_entity: Vec<String>,
    relation_to_id: HashMap<String, RelationId>,
    id_to_relation: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_entities(&self) -> usize {
        self.id_to_entity.len()
    }

    pub fn num_relations(&self) -> usize {
        self.id_to_relation.len()
    }

    /// Returns the id for `name`, appending it if unseen.
    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        intern(&mut self.entity_to_id, &mut self.id_to_entity, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        intern(&mut self.relation_to_id, &mut self.id_to_relation, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_to_id.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_to_id.get(name).copied()
    }

    pub fn entity(&self, id: EntityId) -> Option<&str> {
        self.id_to_entity.get(id).map(String::as_str)
    }

    pub fn relation(&self, id: RelationId) -> Option<&str> {
        self.id_to_relation.get(id).map(String::as_str)
    }

    pub fn entities(&self) -> &[String] {
        &self.id_to_entity
    }

    pub fn relations(&self) -> &[String] {
        &self.id_to_relation
    }

    /// Decodes a triple back to its names. Panics on ids from another vocabulary.
    pub fn decode(&self, triple: Triple) -> (&str, &str, &str) {
        (
            &self.id_to_entity[triple.h],
            &self.id_to_relation[triple.r],
            &self.id_to_entity[triple.t],
        )
    }

    /// Encodes a triple of names without growing the vocabulary.
    pub fn encode(&self, h: &str, r: &str, t: &str) -> Result<Triple> {
        let unknown = |kind: &'static str, name: &str| Error::UnknownName {
            kind,
            name: name.to_string(),
        };
        Ok(Triple {
            h: self.entity_id(h).ok_or_else(|| unknown("entity", h))?,
            r: self.relation_id(r).ok_or_else(|| unknown("relation", r))?,
            t: self.entity_id(t).ok_or_else(|| unknown("entity", t))?,
        })
    }

    /// Writes the vocabulary dump: a header line with both counts, then
    /// `id<TAB>name` for every entity followed by every relation.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(
                out,
                "entities={} relations={}",
                self.num_entities(),
                self.num_relations()
            )?;
            for (id, name) in self.id_to_entity.iter().enumerate() {
                writeln!(out, "{id}\t{name}")?;
            }
            for (id, name) in self.id_to_relation.iter().enumerate() {
                writeln!(out, "{id}\t{name}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line + 1,
            message,
        };
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header".into()))?;
        let (num_entities, num_relations) =
            parse_count_header(header).ok_or_else(|| bad(0, format!("bad header `{header}`")))?;

        let mut vocab = Vocabulary::new();
        for expected in 0..num_entities + num_relations {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| bad(expected + 1, "truncated vocabulary dump".into()))?;
            let (id, name) = line
                .split_once('\t')
                .ok_or_else(|| bad(lineno, "expected `id<TAB>name`".into()))?;
            let id: usize = id.parse().map_err(|_| bad(lineno, format!("bad id `{id}`")))?;
            let assigned = if expected < num_entities {
                vocab.intern_entity(name)
            } else {
                vocab.intern_relation(name)
            };
            if assigned != id {
                return Err(bad(lineno, format!("non-contiguous or duplicate id {id}")));
            }
        }
        Ok(vocab)
    }
}

fn intern(map: &mut HashMap<String, usize>, names: &mut Vec<String>, name: &str) -> usize {
    if let Some(&id) = map.get(name) {
        return id;
    }
    let id = names.len();
    names.push(name.to_string());
    map.insert(name.to_string(), id);
    id
}

fn parse_count_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let entities = parts.next()?.strip_prefix("entities=")?.parse().ok()?;
    let relations = parts.next()?.strip_prefix("relations=")?.parse().ok()?;
    parts.next().is_none().then_some((entities, relations))
}

/// An id-encoded `(head, relation, tail)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub h: EntityId,
    pub r: RelationId,
    pub t: EntityId,
}

impl Triple {
    pub const fn new(h: EntityId, r: RelationId, t: EntityId) -> Self {
        Self { h, r, t }
    }

    /// The same relation with head and tail swapped.
    pub const fn reversed(self) -> Self {
        Self {
            h: self.t,
            r: self.r,
            t: self.h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleSet {
    pub split: Split,
    pub triples: Vec<Triple>,
}

impl TripleSet {
    pub fn new(split: Split, triples: Vec<Triple>) -> Self {
        Self { split, triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }
}

/// Reads a triple file, interning unseen names into `vocab`.
///
/// Empty lines are skipped; any other line must have exactly three
/// tab-separated fields.
pub fn load_triples(path: &Path, split: Split, vocab: &mut Vocabulary) -> Result<TripleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_triples(BufReader::new(file), path, split, vocab)
}

pub(crate) fn read_triples(
    reader: impl BufRead,
    path: &Path,
    split: Split,
    vocab: &mut Vocabulary,
) -> Result<TripleSet> {
    // Names are interned only once the whole file has parsed, so a malformed
    // file leaves the vocabulary untouched.
    let mut raw = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        raw.push([fields[0].to_string(), fields[1].to_string(), fields[2].to_string()]);
    }
    let triples = raw
        .iter()
        .map(|[h, r, t]| Triple {
            h: vocab.intern_entity(h),
            r: vocab.intern_relation(r),
            t: vocab.intern_entity(t),
        })
        .collect();
    Ok(TripleSet::new(split, triples))
}

/// Every triple known to be true, used to discard true corruptions when ranking.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    known: HashSet<Triple>,
}

impl FilterIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.known.contains(triple)
    }

    pub fn insert(&mut self, triple: Triple) -> bool {
        self.known.insert(triple)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }
}

impl FromIterator<Triple> for FilterIndex {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Self {
            known: iter.into_iter().collect(),
        }
    }
}

pub fn build_filter_index(train: &TripleSet, valid: &TripleSet, test: &TripleSet) -> FilterIndex {
    train.iter().chain(valid.iter()).chain(test.iter()).copied().collect()
}

/// The three splits of a benchmark directory sharing one vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
}

impl Dataset {
    /// Loads `train.txt`, `valid.txt` and `test.txt` from `dir`, in that order.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        let train = load_triples(&dir.join(Split::Train.file_name()), Split::Train, &mut vocab)?;
        let valid = load_triples(&dir.join(Split::Valid.file_name()), Split::Valid, &mut vocab)?;
        let test = load_triples(&dir.join(Split::Test.file_name()), Split::Test, &mut vocab)?;
        Ok(Self {
            vocab,
            train,
            valid,
            test,
        })
    }

    pub fn filter_index(&self) -> FilterIndex {
        build_filter_index(&self.train, &self.valid, &self.test)
    }
}

/// Writes triples in the same TSV layout [`load_triples`] reads.
pub fn write_triples(path: &Path, triples: &[Triple], vocab: &Vocabulary) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for &triple in triples {
        let (h, r, t) = vocab.decode(triple);
        writeln!(out, "{h}\t{r}\t{t}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str, vocab: &mut Vocabulary) -> Result<TripleSet> {
        read_triples(Cursor::new(text), Path::new("mem"), Split::Train, vocab)
    }

    #[test]
    fn three_line_file() {
        let mut vocab = Vocabulary::new();
        let set = parse("a\tr1\tb\nb\tr1\ta\na\tr2\tc\n", &mut vocab).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(vocab.num_entities(), 3);
        assert_eq!(vocab.num_relations(), 2);
        assert_eq!(set.triples[1], Triple::new(1, 0, 0));
        assert_eq!(vocab.decode(set.triples[2]), ("a", "r2", "c"));
    }

    #[test]
    fn empty_file_leaves_vocab_unchanged() {
        let mut vocab = Vocabulary::new();
        vocab.intern_entity("x");
        let before = vocab.clone();
        let set = parse("", &mut vocab).unwrap();
        assert!(set.is_empty());
        assert_eq!(vocab, before);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut vocab = Vocabulary::new();
        let err = parse("a\tr\tb\n\na b c\n", &mut vocab).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(vocab.num_entities(), 0);
    }

    #[test]
    fn spaces_belong_to_tokens() {
        let mut vocab = Vocabulary::new();
        let set = parse("New York\tlocated in\t United States \n", &mut vocab).unwrap();
        assert_eq!(
            vocab.decode(set.triples[0]),
            ("New York", "located in", " United States ")
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        let mut vocab = Vocabulary::new();
        let err = load_triples(Path::new("/nonexistent/x.txt"), Split::Test, &mut vocab);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn filter_index_dedups_across_splits() {
        let train = TripleSet::new(
            Split::Train,
            vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2), Triple::new(2, 0, 3)],
        );
        let valid = TripleSet::new(Split::Valid, vec![Triple::new(3, 0, 4)]);
        let test = TripleSet::new(Split::Test, vec![Triple::new(0, 0, 1)]);
        let index = build_filter_index(&train, &valid, &test);
        assert_eq!(index.len(), 4);
        assert!(index.contains(&Triple::new(3, 0, 4)));
        assert!(!index.contains(&Triple::new(4, 0, 3)));

        let empty = TripleSet::new(Split::Train, vec![]);
        assert!(build_filter_index(&empty, &empty, &empty).is_empty());
    }

    #[test]
    fn encode_rejects_unknown_names() {
        let mut vocab = Vocabulary::new();
        parse("a\tr\tb\n", &mut vocab).unwrap();
        assert_eq!(vocab.encode("b", "r", "a").unwrap(), Triple::new(1, 0, 0));
        match vocab.encode("a", "r", "zz") {
            Err(Error::UnknownName { kind, name }) => {
                assert_eq!(kind, "entity");
                assert_eq!(name, "zz");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vocab_dump_round_trip() {
        let mut vocab = Vocabulary::new();
        parse("a b\tr\tc\nc\ts\td\n", &mut vocab).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        vocab.write_dump(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("entities=3 relations=2\n0\ta b\n"));
        assert_eq!(Vocabulary::read_dump(&path).unwrap(), vocab);
    }
}
