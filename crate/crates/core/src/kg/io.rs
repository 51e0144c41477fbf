//! TSV triple files and JSON Lines question files.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityId, KnowledgeGraph, QaInstance};
use crate::error::{Error, Result};

/// Reads `head<TAB>relation<TAB>tail` lines. Blank lines are skipped;
/// duplicate lines collapse to one triple.
pub fn load_graph(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_graph(BufReader::new(file), path)
}

pub fn parse_graph(reader: impl BufRead, path: &Path) -> Result<KnowledgeGraph> {
    let mut builder = KnowledgeGraph::builder();
    let mut lines = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |msg: String| Error::Parse { path: path.to_owned(), line: line_no, msg };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        if fields.iter().any(|f| f.trim().is_empty()) {
            return Err(parse_err("empty field".into()));
        }
        builder
            .add_triple(fields[0].trim(), fields[1].trim(), fields[2].trim())
            .map_err(|e| parse_err(e.to_string()))?;
        lines += 1;
    }
    if lines == 0 {
        return Err(Error::Empty(format!("{} contains no triples", path.display())));
    }
    let g = builder.build();
    log::info!(
        "loaded {}: {} entities, {} relations (with inverses), {} triples",
        path.display(),
        g.num_entities(),
        g.num_relations(),
        g.num_triples()
    );
    Ok(g)
}

pub fn write_triples(path: impl AsRef<Path>, g: &KnowledgeGraph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in g.triples().iter().filter(|t| !t.relation.is_inverse()) {
        writeln!(
            out,
            "{}\t{}\t{}",
            g.entity_label(t.head),
            g.relation_label(t.relation),
            g.entity_label(t.tail)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct QuestionRecord {
    pub id: String,
    pub question: String,
    pub topic_entities: Vec<String>,
    pub answers: Vec<String>,
}

pub fn load_questions(path: impl AsRef<Path>, g: &KnowledgeGraph) -> Result<Vec<QaInstance>> {
    let path = path.as_ref();
    parse_questions(BufReader::new(File::open(path)?), path, g)
}

/// Parses question JSON Lines and resolves labels. Every unresolved label
/// across the file is reported in a single error.
pub fn parse_questions(reader: impl BufRead, path: &Path, g: &KnowledgeGraph) -> Result<Vec<QaInstance>> {
    let mut out = Vec::new();
    let mut unresolved = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QuestionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if rec.topic_entities.is_empty() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: idx + 1,
                msg: format!("question {} has no topic entities", rec.id),
            });
        }
        let mut resolve = |labels: &[String]| -> Vec<EntityId> {
            let mut ids: Vec<EntityId> = labels
                .iter()
                .filter_map(|l| {
                    let id = g.entity(l);
                    if id.is_none() {
                        unresolved.insert(l.clone());
                    }
                    id
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        };
        let topic_entities = resolve(&rec.topic_entities);
        let answers = resolve(&rec.answers);
        out.push(QaInstance { id: rec.id, question: rec.question, topic_entities, answers });
    }
    if !unresolved.is_empty() {
        return Err(Error::UnresolvedLabels(unresolved.into_iter().collect()));
    }
    Ok(out)
}

pub fn write_questions(path: impl AsRef<Path>, g: &KnowledgeGraph, questions: &[QaInstance]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for q in questions {
        let labels = |ids: &[EntityId]| ids.iter().map(|&e| g.entity_label(e).to_owned()).collect();
        let rec = QuestionRecord {
            id: q.id.clone(),
            question: q.question.clone(),
            topic_entities: labels(&q.topic_entities),
            answers: labels(&q.answers),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
