//! CoNLL column files: space-separated chunking/NER columns and the
//! ten-column tab-separated dependency format.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;

use super::{repair_bio, RawSentence, Token};
use crate::error::{Error, Result};
use crate::tree::validate_heads;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagColumn {
    Absent,
    /// The last column, when the line has more columns than the form and POS need.
    Last,
    At(usize),
}

/// Which columns of a chunking/NER file hold the form, POS and tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainColumns {
    pub form: usize,
    pub pos: Option<usize>,
    pub tag: TagColumn,
}

impl Default for ChainColumns {
    fn default() -> Self {
        Self {
            form: 0,
            pos: Some(1),
            tag: TagColumn::Last,
        }
    }
}

impl ChainColumns {
    /// `word POS chunk`
    pub fn chunking() -> Self {
        Self {
            tag: TagColumn::At(2),
            ..Self::default()
        }
    }

    /// `word POS chunk entity`
    pub fn ner() -> Self {
        Self {
            tag: TagColumn::At(3),
            ..Self::default()
        }
    }

    fn required(&self) -> usize {
        let mut needed = self.form.max(self.pos.unwrap_or(0)) + 1;
        if let TagColumn::At(i) = self.tag {
            needed = needed.max(i + 1);
        }
        needed
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn finish_chain_sentence(
    tokens: &mut Vec<Token>,
    sentences: &mut Vec<RawSentence>,
    path: &Path,
    line: usize,
) {
    if tokens.is_empty() {
        return;
    }
    let mut sentence = RawSentence::new(std::mem::take(tokens));
    if let Some(tags) = sentence.tags() {
        let mut tags: Vec<String> = tags.into_iter().map(str::to_owned).collect();
        let repaired = repair_bio(&mut tags);
        if repaired > 0 {
            warn!(
                "{}: sentence ending before line {line}: {repaired} stray I- tag(s) read as B-",
                path.display()
            );
            for (token, tag) in sentence.tokens.iter_mut().zip(tags) {
                token.tag = Some(tag);
            }
        }
    }
    sentences.push(sentence);
}

/// Parses chunking/NER column text. `path` only labels diagnostics.
pub fn parse_conll_chain(
    text: &str,
    columns: &ChainColumns,
    path: &Path,
) -> Result<Vec<RawSentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut width = None;
    let needed = columns.required();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            finish_chain_sentence(&mut tokens, &mut sentences, path, line_no);
            continue;
        }
        if fields[0] == "-DOCSTART-" {
            continue;
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected {w} columns, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        if fields.len() < needed {
            return Err(parse_error(
                path,
                line_no,
                format!("expected at least {needed} columns, found {}", fields.len()),
            ));
        }
        let pos = columns.pos.map_or("_", |c| fields[c]);
        let mut token = Token::new(fields[columns.form], pos);
        token.tag = match columns.tag {
            TagColumn::Absent => None,
            TagColumn::At(c) => Some(fields[c].to_owned()),
            TagColumn::Last if fields.len() > columns.form.max(columns.pos.unwrap_or(0)) + 1 => {
                Some(fields[fields.len() - 1].to_owned())
            }
            TagColumn::Last => None,
        };
        tokens.push(token);
    }
    finish_chain_sentence(&mut tokens, &mut sentences, path, text.lines().count() + 1);
    Ok(sentences)
}

pub fn read_conll_chain(
    path: impl AsRef<Path>,
    columns: &ChainColumns,
) -> Result<Vec<RawSentence>> {
    let path = path.as_ref();
    parse_conll_chain(&fs::read_to_string(path)?, columns, path)
}

/// Writes `form POS [tag]` lines with a blank line after each sentence.
pub fn write_conll_chain(mut out: impl Write, sentences: &[RawSentence]) -> Result<()> {
    for sentence in sentences {
        for token in &sentence.tokens {
            match &token.tag {
                Some(tag) => writeln!(out, "{} {} {}", token.form, token.pos, tag)?,
                None => writeln!(out, "{} {}", token.form, token.pos)?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn optional(field: &str) -> Option<&str> {
    (field != "_").then_some(field)
}

fn finish_tree_sentence(
    tokens: &mut Vec<Token>,
    sentences: &mut Vec<RawSentence>,
    path: &Path,
    first_line: usize,
) -> Result<()> {
    if tokens.is_empty() {
        return Ok(());
    }
    let sentence = RawSentence::new(std::mem::take(tokens));
    if let Some(heads) = sentence.heads() {
        validate_heads(&heads)
            .map_err(|e| parse_error(path, first_line, format!("invalid gold tree: {e}")))?;
    }
    sentences.push(sentence);
    Ok(())
}

/// Parses ten-column dependency text (`ID FORM LEMMA CPOSTAG POSTAG FEATS
/// HEAD DEPREL PHEAD PDEPREL`). Gold trees must have exactly one word
/// attached to the root and no cycles.
pub fn parse_conll_dependency(text: &str, path: &Path) -> Result<Vec<RawSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut first_line = 1;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            finish_tree_sentence(&mut tokens, &mut sentences, path, first_line)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 10 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 10 columns, found {}", fields.len()),
            ));
        }
        if tokens.is_empty() {
            first_line = line_no;
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("invalid token id `{}`", fields[0])))?;
        if id != tokens.len() + 1 {
            return Err(parse_error(
                path,
                line_no,
                format!(
                    "token id {id} out of sequence, expected {}",
                    tokens.len() + 1
                ),
            ));
        }
        let head = match optional(fields[6]) {
            None => None,
            Some(h) => Some(
                h.parse::<usize>()
                    .map_err(|_| parse_error(path, line_no, format!("invalid head `{h}`")))?,
            ),
        };
        let pos = optional(fields[4]).or(optional(fields[3])).unwrap_or("_");
        tokens.push(Token {
            form: fields[1].to_owned(),
            pos: pos.to_owned(),
            tag: None,
            head,
            relation: optional(fields[7]).map(str::to_owned),
        });
    }
    finish_tree_sentence(&mut tokens, &mut sentences, path, first_line)?;
    Ok(sentences)
}

pub fn read_conll_dependency(path: impl AsRef<Path>) -> Result<Vec<RawSentence>> {
    let path = path.as_ref();
    parse_conll_dependency(&fs::read_to_string(path)?, path)
}

pub fn write_conll_dependency(mut out: impl Write, sentences: &[RawSentence]) -> Result<()> {
    for sentence in sentences {
        for (i, token) in sentence.tokens.iter().enumerate() {
            let head = token.head.map_or_else(|| "_".to_owned(), |h| h.to_string());
            writeln!(
                out,
                "{}\t{}\t_\t{}\t{}\t_\t{}\t{}\t_\t_",
                i + 1,
                token.form,
                token.pos,
                token.pos,
                head,
                token.relation.as_deref().unwrap_or("_"),
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}
