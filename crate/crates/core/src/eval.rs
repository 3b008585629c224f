//! Filtered link-prediction ranking and reverse-triple probability reports.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::data::{FilterIndex, Triple, TripleSet, Vocabulary};
use crate::error::{Error, Result};
use crate::scoring::{probability, EmbeddingTable, ScoreFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    fn replace(self, triple: Triple, entity: usize) -> Triple {
        match self {
            Side::Head => Triple::new(entity, triple.r, triple.t),
            Side::Tail => Triple::new(triple.h, triple.r, entity),
        }
    }

    fn target(self, triple: Triple) -> usize {
        match self {
            Side::Head => triple.h,
            Side::Tail => triple.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportSide {
    Head,
    Tail,
    Both,
}

impl fmt::Display for ReportSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportSide::Head => "head",
            ReportSide::Tail => "tail",
            ReportSide::Both => "both",
        })
    }
}

/// MRR and Hits@{1,3,10} (as percentages) over a set of rankings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingReport {
    pub side: ReportSide,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    /// Number of rankings summarized.
    pub count: usize,
}

impl RankingReport {
    pub fn from_ranks(side: ReportSide, ranks: &[usize]) -> Self {
        let count = ranks.len();
        if count == 0 {
            return Self {
                side,
                mrr: 0.0,
                hits1: 0.0,
                hits3: 0.0,
                hits10: 0.0,
                count,
            };
        }
        let n = count as f64;
        let hits = |cut: usize| 100.0 * ranks.iter().filter(|&&r| r <= cut).count() as f64 / n;
        Self {
            side,
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            hits1: hits(1),
            hits3: hits(3),
            hits10: hits(10),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredictionReport {
    pub both: RankingReport,
    pub head: RankingReport,
    pub tail: RankingReport,
    pub head_ranks: Vec<usize>,
    pub tail_ranks: Vec<usize>,
}

impl LinkPredictionReport {
    pub fn rows(&self) -> [&RankingReport; 3] {
        [&self.head, &self.tail, &self.both]
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "side", "MRR", "Hits@1", "Hits@3", "Hits@10", "count"
        );
        for r in self.rows() {
            out.push_str(&format!(
                "{:<6} {:>8.4} {:>8.2} {:>8.2} {:>8.2} {:>8}\n",
                r.side.to_string(),
                r.mrr,
                r.hits1,
                r.hits3,
                r.hits10,
                r.count
            ));
        }
        out
    }

    /// `metric,side,value` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "metric,side,value")?;
            for r in self.rows() {
                writeln!(out, "mrr,{},{}", r.side, r.mrr)?;
                writeln!(out, "hits@1,{},{}", r.side, r.hits1)?;
                writeln!(out, "hits@3,{},{}", r.side, r.hits3)?;
                writeln!(out, "hits@10,{},{}", r.side, r.hits10)?;
                writeln!(out, "count,{},{}", r.side, r.count)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Scoring function and segment count used for ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scorer {
    pub score_fn: ScoreFn,
    pub k: usize,
}

impl Scorer {
    pub fn new(score_fn: ScoreFn, k: usize) -> Self {
        Self { score_fn, k }
    }
}

/// Filtered rank of `test` among all replacements of one side.
///
/// The rank is 1 plus the number of candidates scoring strictly higher than
/// the true triple, ignoring candidates that are known true triples. With no
/// filter every candidate counts (raw setting).
///
/// All scoring functions are linear in the entity being replaced, so the
/// coefficient vector is built once and each candidate costs one dot product.
pub fn rank_triple(
    test: Triple,
    side: Side,
    table: &EmbeddingTable,
    scorer: Scorer,
    filter: Option<&FilterIndex>,
) -> Result<usize> {
    table.check_triple(test)?;
    let mut coeffs = vec![0.0; table.dim()];
    let relation = table.relation(test.r);
    match side {
        Side::Head => scorer
            .score_fn
            .head_coefficients(relation, table.entity(test.t), scorer.k, &mut coeffs),
        Side::Tail => scorer
            .score_fn
            .tail_coefficients(table.entity(test.h), relation, scorer.k, &mut coeffs),
    }
    let dot = |e: usize| -> f64 { coeffs.iter().zip(table.entity(e)).fold(0.0, |acc, (c, v)| acc + c * v) };
    let target = side.target(test);
    let true_score = dot(target);
    let better = (0..table.num_entities())
        .filter(|&e| e != target)
        .filter(|&e| dot(e) > true_score)
        .filter(|&e| filter.is_none_or(|f| !f.contains(&side.replace(test, e))))
        .count();
    Ok(better + 1)
}

/// Ranks every test triple on both sides. MRR and Hits@N of the combined
/// report are taken over all `2 · |test|` rankings.
pub fn evaluate(
    test_set: &TripleSet,
    table: &EmbeddingTable,
    scorer: Scorer,
    filter: Option<&FilterIndex>,
) -> Result<LinkPredictionReport> {
    if test_set.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let ranks: Vec<(usize, usize)> = test_set
        .triples
        .par_iter()
        .map(|&triple| {
            Ok((
                rank_triple(triple, Side::Head, table, scorer, filter)?,
                rank_triple(triple, Side::Tail, table, scorer, filter)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (head_ranks, tail_ranks): (Vec<usize>, Vec<usize>) = ranks.into_iter().unzip();
    let all: Vec<usize> = head_ranks.iter().chain(&tail_ranks).copied().collect();
    Ok(LinkPredictionReport {
        both: RankingReport::from_ranks(ReportSide::Both, &all),
        head: RankingReport::from_ranks(ReportSide::Head, &head_ranks),
        tail: RankingReport::from_ranks(ReportSide::Tail, &tail_ranks),
        head_ranks,
        tail_ranks,
    })
}

/// Probability of a triple and of its reverse under one scoring function.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyRow {
    pub triple: Triple,
    pub score_fn: ScoreFn,
    pub p_forward: f64,
    pub p_reverse: f64,
}

impl CaseStudyRow {
    pub fn label(&self, vocab: &Vocabulary) -> String {
        let (h, r, t) = vocab.decode(self.triple);
        format!("({h}, {r}, {t})")
    }
}

/// `σ(score(h, r, t))` and `σ(score(t, r, h))` for each triple. The reverse
/// reuses the same relation embedding.
pub fn case_study(
    triples: &[Triple],
    table: &EmbeddingTable,
    k: usize,
    score_fn: ScoreFn,
) -> Result<Vec<CaseStudyRow>> {
    triples
        .iter()
        .map(|&triple| {
            let forward = score_fn.score_triple(triple, table, k)?;
            let reverse = score_fn.score_triple(triple.reversed(), table, k)?;
            Ok(CaseStudyRow {
                triple,
                score_fn,
                p_forward: probability(forward),
                p_reverse: probability(reverse),
            })
        })
        .collect()
}

/// `triple,function,p_forward,p_reverse` rows.
pub fn write_case_study_csv(path: &Path, rows: &[CaseStudyRow], vocab: &Vocabulary) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_case_study(BufWriter::new(file), rows, vocab).map_err(|e| Error::io(path, e))
}

pub fn write_case_study(mut out: impl Write, rows: &[CaseStudyRow], vocab: &Vocabulary) -> std::io::Result<()> {
    writeln!(out, "triple,function,p_forward,p_reverse")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(&row.label(vocab)),
            row.score_fn,
            row.p_forward,
            row.p_reverse
        )?;
    }
    out.flush()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    /// d=1, k=1 table whose tail scores for (0, 0, ·) are the entity values.
    fn line_table(values: &[f64]) -> EmbeddingTable {
        EmbeddingTable::from_parts(1, values.to_vec(), vec![1.0]).unwrap()
    }

    fn scorer() -> Scorer {
        Scorer::new(ScoreFn::F1, 1)
    }

    #[test]
    fn rank_one_when_true_triple_wins() {
        let table = line_table(&[1.0, 3.0, 2.0, 1.0]);
        let rank = rank_triple(Triple::new(0, 0, 1), Side::Tail, &table, scorer(), None).unwrap();
        assert_eq!(rank, 1);
    }

    #[test]
    fn filtered_rank_skips_known_triples() {
        // h=0 has value 1; tail scores are the entity values. True tail 1
        // scores 2; entities 4 and 5 score higher, and (0,0,4) is known.
        let table = line_table(&[1.0, 2.0, 0.5, 1.0, 5.0, 3.0]);
        let test = Triple::new(0, 0, 1);
        let filter: FilterIndex = [test, Triple::new(0, 0, 4)].into_iter().collect();
        assert_eq!(
            rank_triple(test, Side::Tail, &table, scorer(), Some(&filter)).unwrap(),
            2
        );
        assert_eq!(rank_triple(test, Side::Tail, &table, scorer(), None).unwrap(), 3);
    }

    #[test]
    fn ties_do_not_count() {
        let table = line_table(&[1.0, 1.0, 1.0, 1.0]);
        for side in [Side::Head, Side::Tail] {
            assert_eq!(
                rank_triple(Triple::new(0, 0, 1), side, &table, scorer(), None).unwrap(),
                1
            );
        }
    }

    #[test]
    fn report_arithmetic() {
        let r = RankingReport::from_ranks(ReportSide::Both, &[1, 4]);
        assert_eq!(r.mrr, 0.625);
        assert_eq!((r.hits1, r.hits3, r.hits10), (50.0, 50.0, 100.0));
        let one = RankingReport::from_ranks(ReportSide::Both, &[1, 1]);
        assert_eq!((one.mrr, one.hits1, one.hits3, one.hits10), (1.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn evaluate_splits_sides() {
        let table = line_table(&[3.0, 2.0, 1.0]);
        let test = TripleSet::new(Split::Test, vec![Triple::new(0, 0, 1), Triple::new(2, 0, 0)]);
        let report = evaluate(&test, &table, scorer(), None).unwrap();
        assert_eq!(report.head_ranks.len(), 2);
        assert_eq!(report.both.count, 4);
        let mean = (report.head.mrr + report.tail.mrr) / 2.0;
        assert!((report.both.mrr - mean).abs() < 1e-15);
        assert!(report.to_table().lines().count() == 4);

        let empty = TripleSet::new(Split::Test, vec![]);
        assert!(evaluate(&empty, &table, scorer(), None).is_err());
    }

    #[test]
    fn zero_embeddings_give_half_probabilities() {
        let table = EmbeddingTable::zeros(3, 2, 8);
        let rows = case_study(&[Triple::new(0, 1, 2)], &table, 4, ScoreFn::F4).unwrap();
        assert_eq!(rows[0].p_forward, 0.5);
        assert_eq!(rows[0].p_reverse, 0.5);
    }

    #[test]
    fn case_study_csv_quotes_commas() {
        let mut vocab = Vocabulary::new();
        vocab.intern_entity("a, b");
        vocab.intern_entity("c");
        vocab.intern_relation("r");
        let rows = vec![CaseStudyRow {
            triple: Triple::new(0, 0, 1),
            score_fn: ScoreFn::F2,
            p_forward: 0.75,
            p_reverse: 0.25,
        }];
        let mut buf = Vec::new();
        write_case_study(&mut buf, &rows, &vocab).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "triple,function,p_forward,p_reverse\n\"(a, b, r, c)\",f2,0.75,0.25\n"
        );
    }
}
